"""Implicit conversion (beta/eta and the monad laws) and the explicit rewrite
catalog for the effect equations."""

import logging
import sys
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Dict, Iterator, Optional, Union

from src.syntax import (
    SCHEMA, LmrError, Path, ScopeError, Tm, TmKind, Ty, TyKind, abstract_tm, drop_var,
    free_in, free_type_vars, free_vars, instantiate_all, instantiate_tm, instantiate_tm_type,
    iter_subterms, replace_at, shift_tm, shift_tm_types, shift_ty, subterm_at, swap_vars,
    ty_free_vars,
)

logger = logging.getLogger(__name__)

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

Witness = Union[Tm, Ty, None]


class RewriteError(LmrError):
    """``kind`` is ``no-match`` or ``path-invalid``."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        self.message = message
        super().__init__(f"{kind}: {message}")


# ----------------------------------------------------------------------------
# Normalization

@lru_cache(maxsize=1 << 16)
def normalize(t: Tm) -> Tm:
    """Normal form under beta, eta (as contraction), the monad laws and the
    unpack commuting conversion. Effects are never reduced."""
    if t.kind is TmKind.VAR or not t.args:
        return t
    new = []
    same = True
    for spec, a in zip(SCHEMA[t.kind], t.args):
        b = normalize(a) if spec.sort == "tm" else a
        same = same and b is a
        new.append(b)
    if not same:
        t = replace(t, args=tuple(new), _hash=[])
    reduct = _head(t)
    return t if reduct is None else normalize(reduct)


def conv_eq(u: Tm, v: Tm) -> bool:
    return u == v or normalize(u) == normalize(v)


def redexes(t: Tm) -> Iterator[Path]:
    """Paths of the subterms that contract in one conversion step."""
    for path, node, _, _ in iter_subterms(t):
        if node.kind is not TmKind.VAR and _head(node) is not None:
            yield path


def contract_at(t: Tm, path: Path) -> Tm:
    """One conversion step at ``path``, leaving the rest of ``t`` alone."""
    try:
        node, _, _ = subterm_at(t, tuple(path))
    except ScopeError as exc:
        raise RewriteError("path-invalid", str(exc))
    reduct = _head(node)
    if reduct is None:
        raise RewriteError("no-match", f"nothing contracts at {list(path)}")
    return replace_at(t, tuple(path), reduct)


def _is_var(t: Tm, i: int) -> bool:
    return t.kind is TmKind.VAR and t.args[0] == i


def _lower(t: Tm, k: int = 1) -> Optional[Tm]:
    """``t`` moved out from under ``k`` binders it does not use."""
    if any(i < k for i in free_vars(t)):
        return None
    return shift_tm(t, -k)


def _head(t: Tm) -> Optional[Tm]:
    k, a = t.kind, t.args
    if k is TmKind.APP and a[0].kind is TmKind.LAM:
        return instantiate_tm(a[0].args[1], a[1])
    if k is TmKind.FST and a[0].kind is TmKind.PAIR:
        return a[0].args[0]
    if k is TmKind.SND and a[0].kind is TmKind.PAIR:
        return a[0].args[1]
    if k is TmKind.CASE and a[0].kind in (TmKind.INL, TmKind.INR):
        branch = a[1] if a[0].kind is TmKind.INL else a[2]
        return instantiate_tm(branch, a[0].args[1])
    if k is TmKind.TYAPP and a[0].kind is TmKind.TYLAM:
        return instantiate_tm_type(a[0].args[0], a[1])
    if k is TmKind.UNPACK:
        return _unpack(t)
    if k is TmKind.NATREC:
        motive, n, z, s = a
        if n.kind is TmKind.ZERO:
            return z
        if n.kind is TmKind.SUCC:
            pred = n.args[0]
            return instantiate_all(s, [pred, replace(t, args=(motive, pred, z, s), _hash=[])])
        return None
    if k is TmKind.LISTREC:
        motive, xs, on_nil, on_cons = a
        if xs.kind is TmKind.NIL:
            return on_nil
        if xs.kind is TmKind.CONS:
            head, tail = xs.args
            rest = replace(t, args=(motive, tail, on_nil, on_cons), _hash=[])
            return instantiate_all(on_cons, [head, tail, rest])
        return None
    if k is TmKind.BIND:
        m, body = a
        if m.kind is TmKind.RET:
            return instantiate_tm(body, m.args[0])
        if body.kind is TmKind.RET and _is_var(body.args[0], 0):
            return m
        if m.kind is TmKind.BIND:
            inner = replace(m, args=(m.args[1], shift_tm(body, 1, 1)), _hash=[])
            return replace(m, args=(m.args[0], inner), _hash=[])
        return None
    if k is TmKind.LAM:
        body = a[1]
        if body.kind is TmKind.APP and _is_var(body.args[1], 0) and not free_in(body.args[0], 0):
            return shift_tm(body.args[0], -1)
        return None
    if k is TmKind.PAIR:
        l, r = a
        if l.kind is TmKind.FST and r.kind is TmKind.SND and l.args[0] == r.args[0]:
            return l.args[0]
        return None
    if k is TmKind.TYLAM:
        body = a[0]
        if (body.kind is TmKind.TYAPP and body.args[1] == Ty.var(0)
                and 0 not in free_type_vars(body.args[0])):
            return shift_tm_types(body.args[0], -1)
        return None
    return None


def _unpack(t: Tm) -> Optional[Tm]:
    scrut, body = t.args
    if scrut.kind is TmKind.PACK:
        _, witness, inner = scrut.args
        opened = instantiate_tm(body, shift_tm_types(inner, 1))
        return instantiate_tm_type(opened, witness)
    # commuting conversion, read as eta: the body only uses the pair (a, x)
    # repackaged, so the package itself can stand for it
    target = None
    for _, node, cty, ctm in iter_subterms(body):
        if (node.kind is TmKind.PACK and node.args[1] == Ty.var(cty)
                and _is_var(node.args[2], ctm) and cty not in ty_free_vars(node.args[0])):
            try:
                target = shift_tm_types(shift_tm(node, -ctm), -cty)
            except ScopeError:
                continue
            break
    if target is None:
        return None
    abstracted = abstract_tm(body, target)
    if free_in(abstracted, 1) or 0 in free_type_vars(abstracted):
        return None
    return instantiate_tm(shift_tm_types(drop_var(abstracted, 1), -1), scrut)


# ----------------------------------------------------------------------------
# Rewrite catalog

Matcher = Callable[[Tm, Witness], Optional[Tm]]


@dataclass(frozen=True)
class RewriteRule:
    id: str
    forward: Matcher
    backward: Matcher
    witness: Optional[str] = None   # what the backward direction must be given


def _same(a: Tm, b: Tm) -> bool:
    return conv_eq(a, b)


def _two_statement(head: Callable[[Tm, Tm], Optional[Tm]]) -> Matcher:
    """Lift a rule on ``s1; s2`` to the head of a longer bind chain whose
    continuation ignores the first result."""

    def match(t: Tm, witness: Witness) -> Optional[Tm]:
        if t.kind is not TmKind.BIND:
            return None
        s1, rest = t.args
        out = head(s1, rest)
        if out is not None:
            return out
        if rest.kind is TmKind.BIND and not free_in(rest.args[1], 1):
            s2, k = rest.args
            pair = head(s1, s2)
            if pair is not None:
                return Tm.bind(pair, drop_var(k, 1), rest.names[0] if rest.names else "x")
        return None

    return match


def _unfold_of_fold_fwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is TmKind.UNFOLD and t.args[0].kind is TmKind.FOLD:
        return Tm.seq(Tm.step(), Tm.ret(t.args[0].args[1]))
    return None


def _step_ret(t: Tm) -> Optional[Tm]:
    """``u`` if ``t`` is ``step; ret u``."""
    if t.kind is TmKind.BIND and t.args[0].kind is TmKind.STEP and t.args[1].kind is TmKind.RET:
        return _lower(t.args[1].args[0])
    return None


def _unfold_of_fold_bwd(t: Tm, witness: Witness) -> Optional[Tm]:
    u = _step_ret(t)
    if u is None or not isinstance(witness, Ty) or witness.kind is not TyKind.MU:
        return None
    return Tm.unfold(Tm.fold(witness, u))


def _fold_of_unfold_fwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.UNFOLD:
        return None
    body = t.args[1]
    if (body.kind is TmKind.RET and body.args[0].kind is TmKind.FOLD
            and _is_var(body.args[0].args[1], 0)):
        return Tm.seq(Tm.step(), Tm.ret(t.args[0].args[0]))
    return None


def _fold_of_unfold_bwd(t: Tm, witness: Witness) -> Optional[Tm]:
    u = _step_ret(t)
    if u is None or not isinstance(witness, Ty) or witness.kind is not TyKind.MU:
        return None
    return Tm.bind(Tm.unfold(u), Tm.ret(Tm.fold(witness, Tm.var(0))))


def _get_after_set_head(s1: Tm, s2: Tm) -> Optional[Tm]:
    if s1.kind is not TmKind.SET or s2.kind is not TmKind.GET:
        return None
    loc, value = s1.args
    if not _same(s2.args[0], shift_tm(loc, 1)):
        return None
    return Tm.seq(Tm.step(), Tm.seq(Tm.set(loc, value), Tm.ret(value)))


def _get_after_set_bwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.STEP:
        return None
    rest = t.args[1]
    if rest.kind is not TmKind.BIND or rest.args[0].kind is not TmKind.SET:
        return None
    loc, value = (_lower(x) for x in rest.args[0].args)
    if loc is None or value is None:
        return None
    k = rest.args[1]
    if k.kind is TmKind.RET and _same(k.args[0], shift_tm(value, 2)):
        return Tm.seq(Tm.set(loc, value), Tm.get(shift_tm(loc, 1)))
    if free_in(k, 0) or free_in(k, 1):
        return None
    # the read's result is discarded by the continuation
    return Tm.bind(Tm.set(loc, value), Tm.bind(Tm.get(shift_tm(loc, 1)), k, "x"), "_")


def _set_after_new_fwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.NEW:
        return None
    body = t.args[1]
    if body.kind is not TmKind.BIND or body.args[0].kind is not TmKind.SET:
        return None
    loc, value = body.args[0].args
    k = body.args[1]
    if not _is_var(loc, 0) or free_in(k, 0):
        return None
    lowered = _lower(value)
    if lowered is None:
        return None
    return Tm.bind(Tm.new(lowered), drop_var(k, 0), t.names[0] if t.names else "x")


def _set_after_new_bwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.NEW or not isinstance(witness, Tm):
        return None
    value = t.args[0].args[0]
    k = t.args[1]
    inner = Tm.bind(Tm.set(Tm.var(0), shift_tm(value, 1)), shift_tm(k, 1), "_")
    return Tm.bind(Tm.new(witness), inner, t.names[0] if t.names else "x")


def _set_after_set_head(s1: Tm, s2: Tm) -> Optional[Tm]:
    if s1.kind is not TmKind.SET or s2.kind is not TmKind.SET:
        return None
    if not _same(s2.args[0], shift_tm(s1.args[0], 1)):
        return None
    value = _lower(s2.args[1])
    return None if value is None else Tm.set(s1.args[0], value)


def _set_after_set_bwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.SET or not isinstance(witness, Tm):
        return None
    loc, value = t.args
    return Tm.seq(Tm.set(loc, witness), Tm.set(loc, value))


def _get_after_get(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.GET:
        return None
    first, rest = t.args[0], t.args[1]
    names = (t.names[0] if t.names else "x",)
    if rest.kind is TmKind.GET:
        second, k = rest, Tm.ret(Tm.var(0))
    elif rest.kind is TmKind.BIND and rest.args[0].kind is TmKind.GET:
        second, k = rest.args[0], rest.args[1]
        names = names + (rest.names[0] if rest.names else "y",)
    else:
        return None
    other = _lower(second.args[0])
    if other is None:
        return None
    swapped = Tm.bind(Tm.get(shift_tm(first.args[0], 1)), swap_vars(k),
                      names[0])
    return Tm.bind(Tm.get(other), swapped, names[-1])


def _set_after_get_fwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.GET:
        return None
    body = t.args[1]
    if body.kind is not TmKind.BIND or body.args[0].kind is not TmKind.SET:
        return None
    loc, value = body.args[0].args
    k = body.args[1]
    if not _is_var(value, 0) or not _same(loc, shift_tm(t.args[0].args[0], 1)) or free_in(k, 0):
        return None
    return replace(t, args=(t.args[0], drop_var(k, 0)), _hash=[])


def _set_after_get_bwd(t: Tm, witness: Witness) -> Optional[Tm]:
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.GET:
        return None
    loc = t.args[0].args[0]
    inner = Tm.bind(Tm.set(shift_tm(loc, 1), Tm.var(0)), shift_tm(t.args[1], 1), "_")
    return replace(t, args=(t.args[0], inner), _hash=[])


def _step_commute(op_kinds: Optional[frozenset]) -> tuple:
    """``x <- op; step; w`` becomes ``step; x <- op; w`` and back."""

    def accepts(op: Tm) -> bool:
        return op_kinds is None or op.kind in op_kinds

    def forward(t: Tm, witness: Witness) -> Optional[Tm]:
        if t.kind is not TmKind.BIND or not accepts(t.args[0]) or t.args[0].kind is TmKind.STEP:
            return None
        op, rest = t.args
        if rest.kind is TmKind.STEP:
            k = Tm.ret(Tm.var(0))
        elif rest.kind is TmKind.BIND and rest.args[0].kind is TmKind.STEP:
            k = rest.args[1]
        else:
            return None
        name = t.names[0] if t.names else "x"
        return Tm.bind(Tm.step(), Tm.bind(shift_tm(op, 1), swap_vars(k), name), "_")

    def backward(t: Tm, witness: Witness) -> Optional[Tm]:
        if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.STEP:
            return None
        rest = t.args[1]
        if rest.kind is not TmKind.BIND or not accepts(rest.args[0]):
            return None
        op = _lower(rest.args[0])
        if op is None or op.kind is TmKind.STEP:
            return None
        name = rest.names[0] if rest.names else "x"
        return Tm.bind(op, Tm.bind(Tm.step(), swap_vars(rest.args[1]), "_"), name)

    return forward, backward


def _catalog() -> Dict[str, RewriteRule]:
    rules = [
        RewriteRule("unfold-of-fold", _unfold_of_fold_fwd, _unfold_of_fold_bwd, "type"),
        RewriteRule("fold-of-unfold", _fold_of_unfold_fwd, _fold_of_unfold_bwd, "type"),
        RewriteRule("get-after-set", _two_statement(_get_after_set_head), _get_after_set_bwd),
        RewriteRule("set-after-new", _set_after_new_fwd, _set_after_new_bwd, "term"),
        RewriteRule("set-after-set", _two_statement(_set_after_set_head), _set_after_set_bwd,
                    "term"),
        RewriteRule("get-after-get", _get_after_get, _get_after_get),
        RewriteRule("set-after-get", _set_after_get_fwd, _set_after_get_bwd),
    ]
    for op, kinds in (("get", {TmKind.GET}), ("set", {TmKind.SET}), ("new", {TmKind.NEW}),
                      ("unfold", {TmKind.UNFOLD}), ("bind", None)):
        fwd, bwd = _step_commute(frozenset(kinds) if kinds else None)
        rules.append(RewriteRule(f"step-commute-{op}", fwd, bwd))
    return {r.id: r for r in rules}


RULES: Dict[str, RewriteRule] = _catalog()

EFFECT_RULES = tuple(RULES)


def rule_by_name(name: str) -> RewriteRule:
    key = name.replace("_", "-")
    if key not in RULES:
        raise RewriteError("no-match", f"unknown rewrite rule {name!r}")
    return RULES[key]


def _shift_witness(witness: Witness, cty: int, ctm: int) -> Witness:
    if isinstance(witness, Tm):
        return shift_tm_types(shift_tm(witness, ctm), cty)
    if isinstance(witness, Ty):
        return shift_ty(witness, cty)
    return witness


def _matches(u: Tm, path: Optional[Path]) -> Iterator[tuple]:
    if path is not None:
        try:
            node, cty, ctm = subterm_at(u, tuple(path))
        except ScopeError as exc:
            raise RewriteError("path-invalid", str(exc))
        yield tuple(path), node, cty, ctm
        return
    yield from iter_subterms(u)


def rewrite(u: Tm, path: Optional[Path], rule: Union[str, RewriteRule],
            direction: str = "forward", witness: Witness = None) -> Tm:
    """Replace the subterm at ``path`` (or the first match in pre-order) by
    the other side of ``rule``. ``witness`` is read in ``u``'s context."""
    if isinstance(rule, str):
        rule = rule_by_name(rule)
    if direction not in ("forward", "backward"):
        raise RewriteError("no-match", f"unknown direction {direction!r}")
    matcher = rule.forward if direction == "forward" else rule.backward
    if direction == "backward" and rule.witness and witness is None:
        raise RewriteError("no-match", f"{rule.id} backward needs a {rule.witness} witness")
    for where, node, cty, ctm in _matches(u, path):
        out = matcher(node, _shift_witness(witness, cty, ctm))
        if out is not None:
            logger.debug("rewrite %s %s at %s", rule.id, direction, list(where))
            return replace_at(u, where, out)
    where = f"at {list(path)}" if path is not None else "anywhere"
    raise RewriteError("no-match", f"{rule.id} ({direction}) does not apply {where}")
