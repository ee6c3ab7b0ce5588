"""Proof kernel: the closed rule catalog, goal states and the certifier.

Every rule is read goal-directed: given the conclusion sequent and the rule's
arguments it computes the premises. ``check_proof`` recomputes every premise
from scratch, so a ``ProofTree`` carries no trusted information beyond the
rule names and their arguments.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from src.conv import RewriteError, conv_eq, normalize, rewrite
from src.syntax import (
    Ctx, LmrError, Path, ScopeError, Tm, TmKind, Ty, TyKind, free_in, instantiate_all, instantiate_tm,
    instantiate_ty, iter_subterms, replace_at, shift_tm, shift_tm_types, subst_tm, subterm_at,
)
from src.typeck import TypeCheckError, check_sequent, check_tm, infer_tm

logger = logging.getLogger(__name__)

Equation = Tuple[Ty, Tm, Tm]
EqEnv = FrozenSet[Equation]


class KernelError(LmrError):
    """``kind`` is one of rule-mismatch, ill-typed-arg, side-condition-failed,
    unknown-rule or arity; ``path`` locates the failing node in the tree."""

    def __init__(self, kind: str, message: str, path: Tuple[int, ...] = ()):
        self.kind = kind
        self.message = message
        self.path = tuple(path)
        super().__init__(message)

    def at(self, path: Tuple[int, ...]) -> "KernelError":
        return KernelError(self.kind, self.message, path)

    def __str__(self) -> str:
        return f"{self.kind} at node {list(self.path)}: {self.message}"


@dataclass(frozen=True)
class Sequent:
    ctx: Ctx
    hyp: Tm
    goal: Tm


@dataclass
class ProofTree:
    rule: str
    args: Dict[str, Any] = field(default_factory=dict)
    premises: List["ProofTree"] = field(default_factory=list)

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def walk(self, path: Tuple[int, ...] = ()) -> Iterator[Tuple[Tuple[int, ...], "ProofTree"]]:
        yield path, self
        for i, p in enumerate(self.premises):
            yield from p.walk(path + (i,))


Premise = Tuple[Sequent, EqEnv]
RuleFn = Callable[[Sequent, EqEnv, Dict[str, Any]], List[Premise]]


@dataclass(frozen=True)
class Param:
    key: str
    sort: str               # prop, term, type, binder, int, path, dir, side, rule, witness, names, terms, types, eq
    required: bool = True
    default: Any = None


@dataclass(frozen=True)
class RuleSpec:
    name: str
    fn: RuleFn
    params: Tuple[Param, ...]


RULES: Dict[str, RuleSpec] = {}


def rule(name: str, *params: Param):
    def register(fn: RuleFn) -> RuleFn:
        RULES[name] = RuleSpec(name, fn, tuple(params))
        return fn
    return register


def opt(key: str, sort: str, default: Any = None) -> Param:
    return Param(key, sort, False, default)


# ----------------------------------------------------------------------------
# Helpers

def _mismatch(message: str) -> KernelError:
    return KernelError("rule-mismatch", message)


def _view(t: Tm, *kinds: TmKind) -> Tm:
    """``t`` itself if its head is one of ``kinds``, else its normal form."""
    if t.kind in kinds:
        return t
    n = normalize(t)
    if n.kind in kinds:
        return n
    wanted = " or ".join(k.value for k in kinds)
    raise _mismatch(f"expected {wanted}, found {n.kind.value}")


def _seq(seq: Sequent, hyp: Optional[Tm] = None, goal: Optional[Tm] = None,
         ctx: Optional[Ctx] = None) -> Sequent:
    return Sequent(ctx if ctx is not None else seq.ctx,
                   hyp if hyp is not None else seq.hyp,
                   goal if goal is not None else seq.goal)


def norm_equation(a: Ty, u: Tm, v: Tm) -> Equation:
    return (a, normalize(u), normalize(v))


def env_map(env: EqEnv, fn: Callable[[Tm], Tm]) -> EqEnv:
    return frozenset(norm_equation(a, fn(u), fn(v)) for a, u, v in env)


def env_shift(env: EqEnv, d: int = 1) -> EqEnv:
    return env_map(env, lambda t: shift_tm(t, d)) if env else env


STRUCTURE = frozenset({TmKind.SEP, TmKind.AND})


def _walk(t: Tm, path: Path, kinds: FrozenSet[TmKind]) -> Optional[Tm]:
    node = t
    for step in path:
        if node.kind not in kinds or step not in (0, 1):
            return None
        node = node.args[step]
    return node


def locate(t: Tm, path: Path, kinds: FrozenSet[TmKind] = STRUCTURE) -> Tuple[Tm, Tm]:
    """Follow ``path`` through ``kinds`` nodes of ``t`` (or of its normal form).
    Returns the term the path was resolved in and the node found."""
    path = tuple(path)
    for base in (t, normalize(t)):
        node = _walk(base, path, kinds)
        if node is not None:
            return base, node
    raise _mismatch(f"path {list(path)} does not follow the {'/'.join(k.value for k in kinds)} "
                    f"structure")


def _replace_occurrence(t: Tm, u: Tm, v: Tm, path: Optional[Path]) -> Tm:
    def shifted(x: Tm, cty: int, ctm: int) -> Tm:
        return shift_tm_types(shift_tm(x, ctm), cty)

    if path is not None:
        try:
            node, cty, ctm = subterm_at(t, tuple(path))
        except ScopeError as exc:
            raise _mismatch(str(exc))
        if not conv_eq(node, shifted(u, cty, ctm)):
            raise _mismatch(f"the subterm at {list(path)} is not the equation's side")
        return replace_at(t, tuple(path), shifted(v, cty, ctm))
    for where, node, cty, ctm in iter_subterms(t):
        if node == shifted(u, cty, ctm):
            return replace_at(t, where, shifted(v, cty, ctm))
    raise _mismatch("the equation's side does not occur")


def _monad_arg(ctx: Ctx, e: Tm) -> Ty:
    a = infer_tm(ctx, e)
    if a.kind is not TyKind.T:
        raise _mismatch("expected a computation")
    return a.args[0]


def _name(t: Tm, default: str = "x") -> str:
    return t.names[0] if t.names and t.names[0] and t.names[0] != "_" else default


# ----------------------------------------------------------------------------
# Structural rules

@rule("hyp")
def _hyp(seq, env, args):
    if not conv_eq(seq.hyp, seq.goal):
        raise _mismatch("hypothesis and goal are not convertible")
    return []


@rule("cut", Param("phi", "prop"))
def _cut(seq, env, args):
    phi = args["phi"]
    return [(_seq(seq, goal=phi), env), (_seq(seq, hyp=phi), env)]


@rule("weaken-hyp", Param("keep", "int"), opt("path", "path", ()))
def _weaken_hyp(seq, env, args):
    base, node = locate(seq.hyp, args["path"])
    node = _view(node, TmKind.SEP, TmKind.AND)
    if args["keep"] not in (0, 1):
        raise _mismatch("keep must be 0 or 1")
    return [(_seq(seq, hyp=replace_at(base, tuple(args["path"]), node.args[args["keep"]])), env)]


def _conv(seq: Sequent, env: EqEnv, args: Dict[str, Any], side: str) -> List[Premise]:
    current = seq.goal if side == "goal" else seq.hyp
    if args.get("target") is not None:
        target = args["target"]
        if not conv_eq(current, target):
            raise _mismatch(f"the {side} is not convertible with the target")
        new = target
    elif args.get("eq") is not None:
        eq = normalize(args["eq"])
        if eq.kind is not TmKind.EQ:
            raise _mismatch("eq must be an equation")
        a, u, v = eq.args
        if (a, u, v) not in env and (a, v, u) not in env:
            raise KernelError("side-condition-failed", "the equation has not been registered")
        if args.get("dir", "forward") == "backward":
            u, v = v, u
        new = _replace_occurrence(normalize(current), u, v, args.get("path"))
    else:
        raise _mismatch(f"conv-{side} needs a target or a registered equation")
    return [(_seq(seq, **{side: new}), env)]


@rule("conv-goal", opt("target", "prop"), opt("eq", "eq"), opt("path", "path"),
      opt("dir", "dir", "forward"))
def _conv_goal(seq, env, args):
    return _conv(seq, env, args, "goal")


@rule("conv-hyp", opt("target", "prop"), opt("eq", "eq"), opt("path", "path"),
      opt("dir", "dir", "forward"))
def _conv_hyp(seq, env, args):
    return _conv(seq, env, args, "hyp")


@rule("subst-instance", Param("types", "types"), Param("terms", "terms"), Param("hyp0", "prop"),
      Param("goal0", "prop"), opt("names", "names", ()))
def _subst_instance(seq, env, args):
    types, terms = list(args["types"]), list(args["terms"])
    if len(types) != len(terms):
        raise _mismatch("one type per instantiated variable")
    names = list(args.get("names") or ())
    ctx = seq.ctx
    for i, (a, t) in enumerate(zip(types, terms)):
        check_tm(seq.ctx, t, a)
        ctx = ctx.extend(names[i] if i < len(names) else f"w{i}", a)
    if not conv_eq(instantiate_all(args["hyp0"], terms), seq.hyp):
        raise _mismatch("the hypothesis is not an instance of hyp0")
    if not conv_eq(instantiate_all(args["goal0"], terms), seq.goal):
        raise _mismatch("the goal is not an instance of goal0")
    return [(Sequent(ctx, args["hyp0"], args["goal0"]), env_shift(env, len(terms)))]


def _rewrite(seq, env, args, side):
    current = normalize(seq.goal if side == "goal" else seq.hyp)
    try:
        new = rewrite(current, args.get("path"), args["rule"], args.get("dir", "forward"),
                      args.get("witness"))
    except RewriteError as exc:
        raise _mismatch(str(exc))
    return [(_seq(seq, **{side: new}), env)]


@rule("rewrite-goal", Param("rule", "rule"), opt("dir", "dir", "forward"), opt("path", "path"),
      opt("witness", "witness"))
def _rewrite_goal(seq, env, args):
    return _rewrite(seq, env, args, "goal")


@rule("rewrite-hyp", Param("rule", "rule"), opt("dir", "dir", "forward"), opt("path", "path"),
      opt("witness", "witness"))
def _rewrite_hyp(seq, env, args):
    return _rewrite(seq, env, args, "hyp")


# ----------------------------------------------------------------------------
# Equality

@rule("eq-formation")
def _eq_formation(seq, env, args):
    g = _view(seq.goal, TmKind.EQ)
    if not conv_eq(g.args[1], g.args[2]):
        raise _mismatch("the two sides are not convertible")
    return []


@rule("lawvere-fwd")
def _lawvere_fwd(seq, env, args):
    ctx = seq.ctx
    if len(ctx) < 2:
        raise _mismatch("needs two variables of the same type")
    a = ctx.lookup(0)
    h = _view(seq.hyp, TmKind.AND)
    eq = _view(h.args[1], TmKind.EQ)
    if eq.args[1:] != (Tm.var(1), Tm.var(0)) or eq.args[0] != a or ctx.lookup(1) != a:
        raise _mismatch("the hypothesis must end with an equation between the last two variables")
    merge = lambda t: instantiate_tm(t, Tm.var(0))
    inner = ctx.truncate(len(ctx) - 1)
    return [(Sequent(inner, merge(h.args[0]), merge(seq.goal)), env_map(env, merge))]


@rule("lawvere-bwd", Param("hyp0", "prop"), Param("goal0", "prop"), opt("name", "name", "y"))
def _lawvere_bwd(seq, env, args):
    if len(seq.ctx) < 1:
        raise _mismatch("needs a variable to duplicate")
    a = seq.ctx.lookup(0)
    hyp0, goal0 = args["hyp0"], args["goal0"]
    if not conv_eq(instantiate_tm(hyp0, Tm.var(0)), seq.hyp):
        raise _mismatch("hyp0 does not collapse to the hypothesis")
    if not conv_eq(instantiate_tm(goal0, Tm.var(0)), seq.goal):
        raise _mismatch("goal0 does not collapse to the goal")
    ctx = seq.ctx.extend(args.get("name") or "y", a)
    hyp = Tm.and_(hyp0, Tm.eq(a, Tm.var(1), Tm.var(0)))
    return [(Sequent(ctx, hyp, goal0), env_shift(env))]


@rule("eq-reflect", Param("eq", "eq"))
def _eq_reflect(seq, env, args):
    eq = args["eq"]
    if eq.kind is not TmKind.EQ or eq.args[0] is None:
        raise _mismatch("eq-reflect needs an annotated equation")
    a, u, v = eq.args
    return [(_seq(seq, hyp=Tm.top(), goal=eq), env), (seq, env | {norm_equation(a, u, v)})]


@rule("prop-ext")
def _prop_ext(seq, env, args):
    g = _view(seq.goal, TmKind.EQ)
    if g.args[0] != Ty.prop():
        raise _mismatch("prop-ext proves equations between propositions")
    phi, psi = g.args[1], g.args[2]
    return [(_seq(seq, hyp=Tm.and_(seq.hyp, phi), goal=psi), env),
            (_seq(seq, hyp=Tm.and_(seq.hyp, psi), goal=phi), env)]


# ----------------------------------------------------------------------------
# Intuitionistic higher-order logic

@rule("true-intro")
def _true_intro(seq, env, args):
    _view(seq.goal, TmKind.TOP)
    return []


@rule("false-elim", opt("path", "path", ()))
def _false_elim(seq, env, args):
    _, node = locate(seq.hyp, args["path"])
    _view(node, TmKind.BOT)
    return []


@rule("and-intro")
def _and_intro(seq, env, args):
    g = _view(seq.goal, TmKind.AND)
    return [(_seq(seq, goal=g.args[0]), env), (_seq(seq, goal=g.args[1]), env)]


@rule("and-elim", Param("other", "prop"), opt("keep", "int", 0))
def _and_elim(seq, env, args):
    other = args["other"]
    both = Tm.and_(seq.goal, other) if args["keep"] == 0 else Tm.and_(other, seq.goal)
    return [(_seq(seq, goal=both), env)]


@rule("or-intro", Param("keep", "int"))
def _or_intro(seq, env, args):
    g = _view(seq.goal, TmKind.OR)
    if args["keep"] not in (0, 1):
        raise _mismatch("keep must be 0 or 1")
    return [(_seq(seq, goal=g.args[args["keep"]]), env)]


@rule("or-elim", opt("path", "path", ()))
def _or_elim(seq, env, args):
    path = tuple(args["path"])
    base, node = locate(seq.hyp, path)
    node = _view(node, TmKind.OR)
    return [(_seq(seq, hyp=replace_at(base, path, node.args[i])), env) for i in (0, 1)]


@rule("imp-intro")
def _imp_intro(seq, env, args):
    g = _view(seq.goal, TmKind.IMPLIES)
    return [(_seq(seq, hyp=Tm.and_(seq.hyp, g.args[0]), goal=g.args[1]), env)]


@rule("imp-elim", Param("antecedent", "prop"))
def _imp_elim(seq, env, args):
    a = args["antecedent"]
    return [(_seq(seq, goal=Tm.implies(a, seq.goal)), env), (_seq(seq, goal=a), env)]


@rule("forall-intro")
def _forall_intro(seq, env, args):
    g = _view(seq.goal, TmKind.FORALLP)
    ctx = seq.ctx.extend(_name(g), g.args[0])
    return [(Sequent(ctx, shift_tm(seq.hyp, 1), g.args[1]), env_shift(env))]


@rule("forall-elim", Param("prop", "prop"), Param("term", "term"))
def _forall_elim(seq, env, args):
    p = _view(args["prop"], TmKind.FORALLP)
    check_tm(seq.ctx, args["term"], p.args[0])
    if not conv_eq(instantiate_tm(p.args[1], args["term"]), seq.goal):
        raise _mismatch("the goal is not this instance of the quantifier")
    return [(_seq(seq, goal=p), env)]


@rule("exists-intro", Param("term", "term"))
def _exists_intro(seq, env, args):
    g = _view(seq.goal, TmKind.EXISTSP)
    check_tm(seq.ctx, args["term"], g.args[0])
    return [(_seq(seq, goal=instantiate_tm(g.args[1], args["term"])), env)]


@rule("exists-elim", opt("path", "path", ()))
def _exists_elim(seq, env, args):
    path = tuple(args["path"])
    base, node = locate(seq.hyp, path)
    node = _view(node, TmKind.EXISTSP)
    ctx = seq.ctx.extend(_name(node), node.args[0])
    hyp = replace_at(shift_tm(base, 1), path, node.args[1])
    return [(Sequent(ctx, hyp, shift_tm(seq.goal, 1)), env_shift(env))]


@rule("list-case", Param("var", "int"), opt("names", "names", ("x", "xs")))
def _list_case(seq, env, args):
    i = args["var"]
    if not 0 <= i < len(seq.ctx):
        raise _mismatch(f"no variable {i}")
    lst = seq.ctx.lookup(i)
    if lst.kind is not TyKind.LIST:
        raise _mismatch("list-case needs a variable of list type")
    elem = lst.args[0]
    names = tuple(args.get("names") or ("x", "xs")) + ("x", "xs")
    nil = Tm.nil(elem)
    on_nil = lambda t: subst_tm(t, i, nil)
    cons = Tm.cons(Tm.var(1, names[0]), Tm.var(0, names[1]))
    on_cons = lambda t: subst_tm(shift_tm(t, 2), i + 2, cons)
    ctx = seq.ctx.extend(names[0], elem).extend(names[1], lst)
    return [(Sequent(seq.ctx, on_nil(seq.hyp), on_nil(seq.goal)), env_map(env, on_nil)),
            (Sequent(ctx, on_cons(seq.hyp), on_cons(seq.goal)), env_map(env, on_cons))]


# ----------------------------------------------------------------------------
# Separation

@rule("wand-adjunction-fwd")
def _wand_fwd(seq, env, args):
    g = _view(seq.goal, TmKind.WAND)
    return [(_seq(seq, hyp=Tm.sep(seq.hyp, g.args[0]), goal=g.args[1]), env)]


@rule("wand-adjunction-bwd")
def _wand_bwd(seq, env, args):
    h = _view(seq.hyp, TmKind.SEP)
    return [(_seq(seq, hyp=h.args[0], goal=Tm.wand(h.args[1], seq.goal)), env)]


@rule("sep-mono")
def _sep_mono(seq, env, args):
    h = _view(seq.hyp, TmKind.SEP)
    g = _view(seq.goal, TmKind.SEP)
    return [(_seq(seq, hyp=h.args[0], goal=g.args[0]), env),
            (_seq(seq, hyp=h.args[1], goal=g.args[1]), env)]


@rule("sep-weaken")
def _sep_weaken(seq, env, args):
    g = _view(seq.goal, TmKind.AND)
    return [(_seq(seq, goal=Tm.sep(*g.args)), env)]


def _assoc_l(node: Tm) -> Tm:
    node = _view(node, TmKind.SEP)
    right = _view(node.args[1], TmKind.SEP)
    return Tm.sep(Tm.sep(node.args[0], right.args[0]), right.args[1])


def _assoc_r(node: Tm) -> Tm:
    node = _view(node, TmKind.SEP)
    left = _view(node.args[0], TmKind.SEP)
    return Tm.sep(left.args[0], Tm.sep(left.args[1], node.args[1]))


def _comm(node: Tm) -> Tm:
    node = _view(node, TmKind.SEP)
    return Tm.sep(node.args[1], node.args[0])


def _unit_intro(node: Tm) -> Tm:
    return Tm.sep(node, Tm.top())


def _unit_elim(node: Tm) -> Tm:
    node = _view(node, TmKind.SEP)
    _view(node.args[1], TmKind.TOP)
    return node.args[0]


def _restructure(transform: Callable[[Tm], Tm]) -> RuleFn:
    def apply(seq, env, args):
        side = args.get("side", "goal")
        if side not in ("goal", "hyp"):
            raise _mismatch("side must be goal or hyp")
        path = tuple(args.get("path") or ())
        base, node = locate(seq.goal if side == "goal" else seq.hyp, path)
        return [(_seq(seq, **{side: replace_at(base, path, transform(node))}), env)]
    return apply


for _name_, _transform in (("sep-assoc-l", _assoc_l), ("sep-assoc-r", _assoc_r),
                           ("sep-comm", _comm), ("sep-unit-intro", _unit_intro),
                           ("sep-unit-elim", _unit_elim)):
    rule(_name_, opt("side", "side", "goal"), opt("path", "path", ()))(_restructure(_transform))


# ----------------------------------------------------------------------------
# Persistence

@rule("box-mono")
def _box_mono(seq, env, args):
    h = _view(seq.hyp, TmKind.BOX)
    g = _view(seq.goal, TmKind.BOX)
    return [(_seq(seq, hyp=h.args[0], goal=g.args[0]), env)]


@rule("box-dup")
def _box_dup(seq, env, args):
    g = _view(seq.goal, TmKind.SEP)
    boxed = _view(g.args[1], TmKind.BOX)
    if not conv_eq(g.args[0], boxed.args[0]):
        raise _mismatch("box-dup needs φ ∗ □φ")
    return [(_seq(seq, goal=boxed), env)]


@rule("box-idem")
def _box_idem(seq, env, args):
    g = _view(seq.goal, TmKind.BOX)
    inner = _view(g.args[0], TmKind.BOX)
    return [(_seq(seq, goal=inner), env)]


@rule("box-and-to-sep")
def _box_and_to_sep(seq, env, args):
    g = _view(seq.goal, TmKind.SEP)
    _view(g.args[1], TmKind.BOX)
    return [(_seq(seq, goal=Tm.and_(*g.args)), env)]


@rule("box-intro")
def _box_intro(seq, env, args):
    _view(seq.hyp, TmKind.BOX)
    g = _view(seq.goal, TmKind.BOX)
    return [(_seq(seq, goal=g.args[0]), env)]


@rule("box-true")
def _box_true(seq, env, args):
    _view(seq.hyp, TmKind.TOP)
    g = _view(seq.goal, TmKind.BOX)
    _view(g.args[0], TmKind.TOP)
    return []


@rule("box-elim")
def _box_elim(seq, env, args):
    return [(_seq(seq, goal=Tm.box(seq.goal)), env)]


# ----------------------------------------------------------------------------
# Later

@rule("later-intro")
def _later_intro(seq, env, args):
    g = _view(seq.goal, TmKind.LATER)
    return [(_seq(seq, goal=g.args[0]), env)]


def _later_over(kind: TmKind) -> RuleFn:
    def apply(seq, env, args):
        g = _view(seq.goal, TmKind.LATER)
        inner = _view(g.args[0], kind)
        a, b = inner.args
        return [(_seq(seq, goal=Tm(kind, (Tm.later(a), Tm.later(b)))), env)]
    return apply


rule("later-and")(_later_over(TmKind.AND))
rule("later-sep")(_later_over(TmKind.SEP))


@rule("later-wand")
def _later_wand(seq, env, args):
    g = _view(seq.goal, TmKind.WAND)
    a = _view(g.args[0], TmKind.LATER)
    b = _view(g.args[1], TmKind.LATER)
    return [(_seq(seq, goal=Tm.wand(a.args[0], b.args[0])), env)]


@rule("later-box-commute-l")
def _later_box_l(seq, env, args):
    g = _view(seq.goal, TmKind.BOX)
    inner = _view(g.args[0], TmKind.LATER)
    return [(_seq(seq, goal=Tm.later(Tm.box(inner.args[0]))), env)]


@rule("later-box-commute-r")
def _later_box_r(seq, env, args):
    g = _view(seq.goal, TmKind.LATER)
    inner = _view(g.args[0], TmKind.BOX)
    return [(_seq(seq, goal=Tm.box(Tm.later(inner.args[0]))), env)]


@rule("later-mono")
def _later_mono(seq, env, args):
    h = _view(seq.hyp, TmKind.LATER)
    g = _view(seq.goal, TmKind.LATER)
    return [(_seq(seq, hyp=h.args[0], goal=g.args[0]), env)]


@rule("fold-equality-fwd")
def _fold_eq_fwd(seq, env, args):
    g = _view(seq.goal, TmKind.EQ)
    mu = g.args[0]
    if mu.kind is not TyKind.MU:
        raise _mismatch("fold-equality compares elements of a recursive type")
    u = _view(g.args[1], TmKind.FOLD)
    v = _view(g.args[2], TmKind.FOLD)
    unrolled = instantiate_ty(mu.body, mu)
    return [(_seq(seq, goal=Tm.later(Tm.eq(unrolled, u.args[1], v.args[1]))), env)]


@rule("fold-equality-bwd", Param("mu", "type"))
def _fold_eq_bwd(seq, env, args):
    mu = args["mu"]
    if mu.kind is not TyKind.MU:
        raise _mismatch("mu must be a recursive type")
    g = _view(seq.goal, TmKind.LATER)
    eq = _view(g.args[0], TmKind.EQ)
    if instantiate_ty(mu.body, mu) != eq.args[0]:
        raise _mismatch("the equation is not at the unrolled type")
    folded = Tm.eq(mu, Tm.fold(mu, eq.args[1]), Tm.fold(mu, eq.args[2]))
    return [(_seq(seq, goal=folded), env)]


def _after_step(t: Tm) -> Tm:
    t = _view(t, TmKind.BIND)
    if t.args[0].kind is not TmKind.STEP or free_in(t.args[1], 0):
        raise _mismatch("expected step followed by a continuation that ignores its result")
    return shift_tm(t.args[1], -1)


@rule("step-equality-fwd")
def _step_eq_fwd(seq, env, args):
    g = _view(seq.goal, TmKind.EQ)
    if g.args[0].kind is not TyKind.T:
        raise _mismatch("step-equality compares computations")
    u, v = _after_step(g.args[1]), _after_step(g.args[2])
    return [(_seq(seq, goal=Tm.later(Tm.eq(g.args[0], u, v))), env)]


@rule("step-equality-bwd")
def _step_eq_bwd(seq, env, args):
    g = _view(seq.goal, TmKind.LATER)
    eq = _view(g.args[0], TmKind.EQ)
    if eq.args[0].kind is not TyKind.T:
        raise _mismatch("step-equality compares computations")
    step = lambda t: Tm.seq(Tm.step(), t)
    return [(_seq(seq, goal=Tm.eq(eq.args[0], step(eq.args[1]), step(eq.args[2]))), env)]


@rule("loeb")
def _loeb(seq, env, args):
    return [(_seq(seq, hyp=Tm.and_(seq.hyp, Tm.later(seq.goal))), env)]


# ----------------------------------------------------------------------------
# Weakest preconditions. Each rule uses its axiom as a cut: the premise is the
# left-hand side of the axiom whose right-hand side is the goal.

def _wp(seq: Sequent) -> Tuple[Ty, Tm, Tm, str]:
    g = _view(seq.goal, TmKind.WP)
    return g.args[0], g.args[1], g.args[2], _name(g)


@rule("wp-wand", Param("post", "binder"))
def _wp_wand(seq, env, args):
    a, e, psi, name = _wp(seq)
    phi = args["post"]
    frame = Tm.forallp(a, Tm.wand(phi, psi), name)
    return [(_seq(seq, goal=Tm.sep(frame, Tm.wp(a, e, phi, name))), env)]


@rule("wp-val")
def _wp_val(seq, env, args):
    _, e, phi, _ = _wp(seq)
    e = _view(e, TmKind.RET)
    return [(_seq(seq, goal=instantiate_tm(phi, e.args[0])), env)]


@rule("wp-bind", opt("first", "term"), opt("rest", "binder"))
def _wp_bind(seq, env, args):
    b, e, phi, name = _wp(seq)
    if args.get("first") is not None:
        first, rest = args["first"], args.get("rest")
        if rest is None:
            raise _mismatch("wp-bind with an explicit first statement needs the rest")
        if not conv_eq(Tm.bind(first, rest), e):
            raise _mismatch("first and rest do not compose to the program")
        inner_name = "x"
    else:
        e = _view(e, TmKind.BIND)
        first, rest = e.args
        inner_name = _name(e)
    a = _monad_arg(seq.ctx, first)
    inner = Tm.wp(b, rest, shift_tm(phi, 1, 1), name)
    return [(_seq(seq, goal=Tm.wp(a, first, inner, inner_name)), env)]


@rule("wp-get")
def _wp_get(seq, env, args):
    a, e, phi, name = _wp(seq)
    loc = shift_tm(_view(e, TmKind.GET).args[0], 1)
    cell = Tm.points_to(a, loc, Tm.var(0, name))
    body = Tm.sep(cell, Tm.later(Tm.wand(cell, phi)))
    return [(_seq(seq, goal=Tm.existsp(a, body, name)), env)]


@rule("wp-set")
def _wp_set(seq, env, args):
    _, e, phi, _ = _wp(seq)
    loc, value = _view(e, TmKind.SET).args
    a = infer_tm(seq.ctx, value)
    old = Tm.existsp(a, Tm.points_to(a, shift_tm(loc, 1), Tm.var(0, "v")), "v")
    after = Tm.wand(Tm.points_to(a, loc, value), instantiate_tm(phi, Tm.unit()))
    return [(_seq(seq, goal=Tm.sep(old, after)), env)]


@rule("wp-new")
def _wp_new(seq, env, args):
    _, e, phi, name = _wp(seq)
    value = _view(e, TmKind.NEW).args[0]
    a = infer_tm(seq.ctx, value)
    cell = Tm.points_to(a, Tm.var(0, name), shift_tm(value, 1))
    return [(_seq(seq, goal=Tm.forallp(Ty.ref(a), Tm.wand(cell, phi), name)), env)]


@rule("wp-step")
def _wp_step(seq, env, args):
    _, e, phi, _ = _wp(seq)
    _view(e, TmKind.STEP)
    return [(_seq(seq, goal=Tm.later(instantiate_tm(phi, Tm.unit()))), env)]


# ----------------------------------------------------------------------------
# Certification

def canonical_rule(name: str) -> str:
    return name.replace("_", "-")


def rule_spec(name: str) -> RuleSpec:
    spec = RULES.get(canonical_rule(name))
    if spec is None:
        raise KernelError("unknown-rule", f"no rule named {name!r}")
    return spec


def _with_defaults(spec: RuleSpec, args: Dict[str, Any]) -> Dict[str, Any]:
    known = {p.key for p in spec.params}
    extra = set(args) - known
    if extra:
        raise KernelError("ill-typed-arg", f"{spec.name} takes no argument {sorted(extra)[0]!r}")
    out = dict(args)
    for p in spec.params:
        if p.key not in out or out[p.key] is None:
            if p.required:
                raise KernelError("ill-typed-arg", f"{spec.name} needs argument {p.key!r}")
            out[p.key] = p.default
    return out


_typed: Dict[Sequent, bool] = {}


def _well_typed(seq: Sequent) -> None:
    if seq in _typed:
        return
    check_sequent(seq)
    if len(_typed) > 1 << 15:
        _typed.clear()
    _typed[seq] = True


def expand(seq: Sequent, env: EqEnv, name: str, args: Optional[Dict[str, Any]] = None) -> List[Premise]:
    """Premises of applying rule ``name`` backwards to ``seq``."""
    spec = rule_spec(name)
    full = _with_defaults(spec, args or {})
    try:
        premises = spec.fn(seq, env, full)
    except TypeCheckError as exc:
        raise KernelError("ill-typed-arg", str(exc))
    except (RewriteError, ScopeError) as exc:
        raise _mismatch(str(exc))
    for p, _ in premises:
        try:
            _well_typed(p)
        except TypeCheckError as exc:
            raise KernelError("ill-typed-arg", f"{spec.name} produced an ill-typed premise: {exc}")
        except ScopeError as exc:
            raise KernelError("ill-typed-arg", f"{spec.name} produced an ill-scoped premise: {exc}")
    return premises


def check_proof(seq: Sequent, tree: ProofTree, env: EqEnv = frozenset(),
                path: Tuple[int, ...] = ()) -> None:
    """Certify that ``tree`` derives ``seq``; raises ``KernelError`` at the first bad node."""
    if not path:
        try:
            _well_typed(seq)
        except (TypeCheckError, ScopeError) as exc:
            raise KernelError("ill-typed-arg", f"the sequent is ill-typed: {exc}")
    stack = [(seq, env, tree, tuple(path))]
    while stack:
        s, e, node, where = stack.pop()
        try:
            premises = expand(s, e, node.rule, node.args)
        except KernelError as exc:
            raise exc.at(where)
        if len(premises) != len(node.premises):
            raise KernelError("arity", f"{node.rule} has {len(premises)} premises, the tree gives "
                                       f"{len(node.premises)}", where)
        for i in reversed(range(len(premises))):
            ps, pe = premises[i]
            stack.append((ps, pe, node.premises[i], where + (i,)))


# ----------------------------------------------------------------------------
# Goal states

@dataclass(frozen=True)
class Goal:
    id: int
    seq: Sequent
    env: EqEnv = frozenset()


@dataclass(frozen=True)
class ProofState:
    """Open goals plus the steps taken so far. States are immutable; every
    operation returns a new one."""

    root: Goal
    goals: Tuple[Goal, ...]
    steps: Tuple[Tuple[int, Optional[str], Any, Tuple[int, ...]], ...] = ()
    next_id: int = 1

    @classmethod
    def start(cls, seq: Sequent, env: EqEnv = frozenset()) -> "ProofState":
        try:
            _well_typed(seq)
        except (TypeCheckError, ScopeError) as exc:
            raise KernelError("ill-typed-arg", f"the sequent is ill-typed: {exc}")
        root = Goal(0, seq, env)
        return cls(root, (root,))

    @property
    def done(self) -> bool:
        return not self.goals

    def goal(self, index: int = 0) -> Goal:
        if not 0 <= index < len(self.goals):
            raise KernelError("arity", f"no open goal {index}")
        return self.goals[index]

    def tree(self) -> ProofTree:
        if self.goals:
            raise KernelError("arity", f"{len(self.goals)} goal(s) still open")
        by_id = {gid: (r, a, kids) for gid, r, a, kids in self.steps}

        def build(gid: int) -> ProofTree:
            r, a, kids = by_id[gid]
            if r is None:
                return a
            return ProofTree(r, dict(a), [build(k) for k in kids])

        return build(self.root.id)

    def path_of(self, goal_id: int) -> Tuple[int, ...]:
        """Position the goal takes in the finished tree."""
        parent = {kid: (gid, i) for gid, _, _, kids in self.steps for i, kid in enumerate(kids)}
        path = []
        while goal_id in parent:
            goal_id, i = parent[goal_id]
            path.append(i)
        return tuple(reversed(path))


def apply_rule(st: ProofState, name: str, args: Optional[Dict[str, Any]] = None,
               index: int = 0) -> ProofState:
    goal = st.goal(index)
    spec = rule_spec(name)
    try:
        premises = expand(goal.seq, goal.env, spec.name, args)
    except KernelError as exc:
        raise exc.at(st.path_of(goal.id))
    new = tuple(Goal(st.next_id + i, s, e) for i, (s, e) in enumerate(premises))
    logger.debug("%s on goal %d: %d premise(s)", spec.name, goal.id, len(new))
    step = (goal.id, spec.name, _with_defaults(spec, args or {}), tuple(g.id for g in new))
    goals = st.goals[:index] + new + st.goals[index + 1:]
    return ProofState(st.root, goals, st.steps + (step,), st.next_id + len(new))


def close_with(st: ProofState, tree: ProofTree, index: int = 0) -> ProofState:
    """Discharge a goal with an already built tree, certifying it first."""
    goal = st.goal(index)
    check_proof(goal.seq, tree, goal.env)
    goals = st.goals[:index] + st.goals[index + 1:]
    return ProofState(st.root, goals, st.steps + ((goal.id, None, tree, ()),), st.next_id)


def defer(st: ProofState, index: int = 0) -> ProofState:
    goal = st.goal(index)
    goals = st.goals[:index] + st.goals[index + 1:] + (goal,)
    return ProofState(st.root, goals, st.steps, st.next_id)


def register_reflection(st: ProofState, proved: Sequent, tree: ProofTree,
                        index: int = 0) -> ProofState:
    """Add the equation proved by ``tree`` to the goal's equation environment."""
    goal = st.goal(index)
    if proved.ctx != goal.seq.ctx:
        raise KernelError("side-condition-failed", "the equation lives in another context")
    if normalize(proved.hyp).kind is not TmKind.TOP:
        raise KernelError("side-condition-failed", "only equations proved from True reflect")
    if proved.goal.kind is not TmKind.EQ:
        raise KernelError("side-condition-failed", "the proved sequent is not an equation")
    check_proof(proved, tree, goal.env)
    st = apply_rule(st, "eq-reflect", {"eq": proved.goal}, index)
    return close_with(st, tree, index)


# ----------------------------------------------------------------------------
# Bounded search, for checking that the rules do not derive what they should not

def _props_of(t: Tm) -> List[Tm]:
    found = []
    for _, node, cty, ctm in iter_subterms(normalize(t)):
        if cty == 0 and ctm == 0 and node.kind in (TmKind.SEP, TmKind.AND, TmKind.WAND,
                                                     TmKind.POINTSTO, TmKind.BOX, TmKind.LATER,
                                                     TmKind.TOP, TmKind.EQ):
            found.append(node)
    return found


def default_pool(seq: Sequent) -> List[Tuple[str, Dict[str, Any]]]:
    pool: List[Tuple[str, Dict[str, Any]]] = []
    for name, spec in RULES.items():
        if all(not p.required for p in spec.params) and not any(p.sort == "side" for p in spec.params):
            pool.append((name, {}))
        elif any(p.sort == "side" for p in spec.params):
            pool += [(name, {"side": side}) for side in ("goal", "hyp")]
    pool += [("weaken-hyp", {"keep": k}) for k in (0, 1)]
    seen = set()
    for phi in _props_of(seq.hyp) + _props_of(seq.goal) + [Tm.top()]:
        if phi not in seen:
            seen.add(phi)
            pool.append(("cut", {"phi": phi}))
    return pool


def search_derivation(seq: Sequent, depth: int,
                      pool: Optional[Sequence[Tuple[str, Dict[str, Any]]]] = None,
                      env: EqEnv = frozenset()) -> Optional[ProofTree]:
    """Exhaustively try every pool step up to ``depth`` nested rule applications."""
    candidates = list(pool) if pool is not None else default_pool(seq)
    failed: set = set()

    def go(s: Sequent, e: EqEnv, d: int) -> Optional[ProofTree]:
        if d == 0 or (s, e, d) in failed:
            return None
        for name, args in candidates:
            try:
                premises = expand(s, e, name, args)
            except LmrError:
                continue
            subtrees = []
            for ps, pe in premises:
                sub = go(ps, pe, d - 1)
                if sub is None:
                    break
                subtrees.append(sub)
            else:
                return ProofTree(name, dict(args), subtrees)
        failed.add((s, e, d))
        return None

    return go(seq, env, depth)
