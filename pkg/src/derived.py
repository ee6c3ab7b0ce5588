"""Derived forms built on the kernel: recursive functions, Hoare triples and
the proof macros that expand into primitive rule applications."""

import logging
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Any, List, Optional, Sequence, Tuple

from src.conv import normalize
from src.kernel import (
    EqEnv, KernelError, ProofState, ProofTree, Sequent, apply_rule, close_with, locate,
    register_reflection,
)
from src.syntax import (
    Ctx, Path, Tm, TmKind, Ty, TyKind, abstract_tm, free_in, instantiate_all, instantiate_tm,
    replace_at, shift_tm, shift_ty, subst_tm,
)
from src.typeck import check_prop, infer_tm

logger = logging.getLogger(__name__)


def _shape(message: str) -> KernelError:
    return KernelError("rule-mismatch", message)


# ----------------------------------------------------------------------------
# Recursive functions
#
# rec f (x : A) : B => e is encoded through S = mu s. s -> A -> T B:
#   unroll(s) = fun y => h <- unfold s; h s y            : A -> T B
#   self      = fun (s : S) (x : A) => e[unroll(s)/f]     : S -> A -> T B
#   rec       = unroll(fold self)
# so that  rec a  =  h <- unfold (fold self); h (fold self) a
#                 =  step; self (fold self) a          (unfold-of-fold)
#                 =  step; e[rec/f][a/x]               (beta)

def rec_type(a: Ty, b: Ty) -> Ty:
    return Ty.mu(Ty.arrow(Ty.var(0, "s"), Ty.arrow(shift_ty(a, 1), Ty.t(shift_ty(b, 1)))), "s")


def unroll(s: Tm, a: Ty) -> Tm:
    """``fun y => h <- unfold s; h s y`` for ``s`` of the self-referential type."""
    call = Tm.app(Tm.app(Tm.var(0, "h"), shift_tm(s, 2)), Tm.var(1, "y"))
    return Tm.lam(a, Tm.bind(Tm.unfold(shift_tm(s, 1)), call, "h"), "y")


def mk_rec(a: Ty, b: Ty, e: Tm, f_name: str = "f", x_name: str = "x") -> Tm:
    """``e`` lives under ``f : A -> T B`` (index 1) and ``x : A`` (index 0)."""
    s_ty = rec_type(a, b)
    body = subst_tm(e, 1, unroll(Tm.var(1, "s"), a))
    self_ = Tm.lam(s_ty, Tm.lam(a, body, x_name), "s")
    return unroll(Tm.fold(s_ty, self_), a)


@dataclass(frozen=True)
class RecCall:
    """A normalized call ``rec a``: the folded ``self`` and the argument."""

    folded: Tm
    arg: Tm

    @property
    def self_(self) -> Tm:
        return self.folded.args[1]

    @property
    def types(self) -> Tuple[Ty, Ty]:
        arrow = self.folded.args[0].body
        a, tb = arrow.args[1].args
        return shift_ty(a, -1), shift_ty(tb.args[0], -1)

    @property
    def function(self) -> Tm:
        return unroll(self.folded, self.types[0])

    @property
    def unfolded(self) -> Tm:
        """``step; self (fold self) a``, the right-hand side of the rec equation."""
        return Tm.seq(Tm.step(), Tm.app(Tm.app(self.self_, self.folded), self.arg))


def rec_call(t: Tm) -> Optional[RecCall]:
    """Recognize the normal form of ``rec a`` produced by ``mk_rec``."""
    t = normalize(t)
    if t.kind is not TmKind.BIND or t.args[0].kind is not TmKind.UNFOLD:
        return None
    folded = t.args[0].args[0]
    if folded.kind is not TmKind.FOLD or folded.args[0].kind is not TyKind.MU:
        return None
    call = t.args[1]
    if call.kind is not TmKind.APP or call.args[0].kind is not TmKind.APP:
        return None
    head, arg_up = call.args
    h, s_up = head.args
    if h != Tm.var(0) or s_up != shift_tm(folded, 1) or free_in(arg_up, 0):
        return None
    return RecCall(folded, shift_tm(arg_up, -1))


def rec_equation(ctx: Ctx, call: RecCall) -> Tuple[Sequent, ProofTree]:
    """The certified unfolding equation ``rec a = step; e[rec/f][a/x]``."""
    _, b = call.types
    eq = Tm.eq(Ty.t(b), Tm.app(call.function, call.arg), call.unfolded)
    tree = ProofTree("rewrite-goal", {"rule": "unfold-of-fold", "dir": "forward", "path": (1, 0)},
                     [ProofTree("eq-formation")])
    return Sequent(ctx, Tm.top(), eq), tree


def mk_hoare(ctx: Ctx, pre: Tm, e: Tm, post: Tm, name: str = "x") -> Tm:
    """``box (pre -* wp e {x. post})``; ``post`` is under the result binder."""
    te = infer_tm(ctx, e)
    if te.kind is not TyKind.T:
        raise _shape("a Hoare triple needs a computation")
    triple = Tm.box(Tm.wand(pre, Tm.wp(te.args[0], e, post, name)))
    check_prop(ctx, triple)
    return triple


# ----------------------------------------------------------------------------
# Macros. Each one rewrites the goal at ``index`` into primitive steps and
# leaves at most one open goal in its place.

def _steps(st: ProofState, index: int, *steps: Tuple[str, dict]) -> ProofState:
    for name, args in steps:
        st = apply_rule(st, name, args, index)
    return st


def _peel_foralls(t: Tm) -> Tuple[List[Tuple[Ty, str]], Tm]:
    binders = []
    while t.kind is TmKind.FORALLP:
        binders.append((t.args[0], t.names[0] if t.names else "z"))
        t = t.args[1]
    return binders, t


def _wrap_foralls(binders: Sequence[Tuple[Ty, str]], body: Tm) -> Tm:
    for ty, name in reversed(binders):
        body = Tm.forallp(ty, body, name)
    return body


def _instances(q: Tm, terms: Sequence[Tm]) -> List[Tm]:
    """``[q, q t1, q t1 t2, ...]`` for a nest of universal quantifiers."""
    out = [q]
    for t in terms:
        cur = out[-1]
        if cur.kind is not TmKind.FORALLP:
            cur = normalize(cur)
        if cur.kind is not TmKind.FORALLP:
            raise _shape("too many terms for the quantifier")
        out.append(instantiate_tm(cur.args[1], t))
    return out


def _forall_elims(st: ProofState, index: int, q: Tm, terms: Sequence[Tm]) -> ProofState:
    """Close ``q ⊢ q t1 .. tn``."""
    qs = _instances(q, terms)
    for j in reversed(range(len(terms))):
        st = apply_rule(st, "forall-elim", {"prop": qs[j], "term": terms[j]}, index)
    return apply_rule(st, "hyp", {}, index)


def wp_rec(st: ProofState, index: int = 0) -> ProofState:
    """Löb induction for a recursive function.

    The goal ``chi ⊢ ∀z.. psi -* wp (rec a) {y. post}`` is reduced to
    ``chi ∧ IH ⊢ ∀z.. psi -* wp (self (fold self) a) {y. post}`` where ``IH`` is
    the original goal.
    """
    goal = st.goal(index)
    hyp = goal.seq.hyp
    spec = normalize(goal.seq.goal)
    binders, body = _peel_foralls(spec)
    if body.kind is not TmKind.WAND or body.args[1].kind is not TmKind.WP:
        raise _shape("wp_rec needs a goal of the form ∀z.. psi -* wp (rec a) {post}")
    psi, wp = body.args
    call = rec_call(wp.args[1])
    if call is None:
        raise _shape("the program is not a call of a recursive function")
    k = len(binders)
    inner = Tm.wp(wp.args[0], Tm.app(Tm.app(call.self_, call.folded), call.arg), wp.args[2],
                  wp.names[0] if wp.names else "y")
    unfolded_spec = _wrap_foralls(binders, Tm.wand(psi, inner))

    if normalize(hyp).kind is TmKind.LATER:
        phi = normalize(hyp).args[0]
    else:
        phi = hyp
        st = _steps(st, index, ("cut", {"phi": Tm.later(hyp)}), ("later-intro", {}), ("hyp", {}))
    st = _steps(st, index, ("loeb", {}), ("cut", {"phi": Tm.later(unfolded_spec)}),
                ("cut", {"phi": Tm.later(Tm.and_(phi, spec))}), ("later-and", {}), ("hyp", {}),
                ("later-mono", {}))
    # index now holds the caller's goal; index + 1 proves ▷unfolded ⊢ spec
    j = index + 1
    for _ in range(k):
        st = apply_rule(st, "forall-intro", {}, j)
    st = apply_rule(st, "wand-adjunction-fwd", {}, j)
    inner_ctx = st.goal(j).seq.ctx
    proved, tree = rec_equation(inner_ctx, call)
    st = register_reflection(st, proved, tree, j)
    ih = shift_tm(unfolded_spec, k)
    frame = Tm.sep(Tm.wand(psi, inner), psi)
    st = _steps(st, j, ("conv-goal", {"eq": proved.goal}), ("wp-bind", {}), ("wp-step", {}),
                ("cut", {"phi": Tm.later(Tm.sep(ih, psi))}), ("later-sep", {}), ("sep-mono", {}),
                ("hyp", {}), ("later-intro", {}), ("hyp", {}), ("later-mono", {}),
                ("cut", {"phi": frame}), ("sep-mono", {}))
    terms = [Tm.var(k - 1 - i, name) for i, (_, name) in enumerate(binders)]
    st = _forall_elims(st, j, ih, terms)
    return _steps(st, j, ("hyp", {}), ("wand-adjunction-bwd", {}), ("hyp", {}))


def derive_wp_rec(seq: Sequent, premise: ProofTree, env: EqEnv = frozenset()) -> ProofTree:
    """Full derivation of ``seq`` by ``wp_rec`` with ``premise`` proving its open goal."""
    st = wp_rec(ProofState.start(seq, env))
    st = close_with(st, premise, 0)
    return st.tree()


def _extract(st: ProofState, index: int, path: Path) -> ProofState:
    """Close ``hyp ⊢ node`` where ``node`` sits at ``path`` in the hypothesis."""
    for step in path:
        st = apply_rule(st, "weaken-hyp", {"keep": step}, index)
    return apply_rule(st, "hyp", {}, index)


def eq_subst(st: ProofState, path: Path, direction: str = "ltr", index: int = 0) -> ProofState:
    """Rewrite the goal with the equation found at ``path`` in the hypothesis
    (``ltr`` replaces its left side by its right side)."""
    goal = st.goal(index)
    ctx, g = goal.seq.ctx, normalize(goal.seq.goal)
    _, node = locate(goal.seq.hyp, path)
    eq = normalize(node)
    if eq.kind is not TmKind.EQ:
        raise _shape("eq_subst needs an equation in the hypothesis")
    a, s, t = eq.args
    old, new = (s, t) if direction == "ltr" else (t, s)
    hole = abstract_tm(g, normalize(old))
    if not free_in(hole, 0):
        raise _shape("the equation's side does not occur in the goal")
    at_y = shift_tm(hole, 2, 1)
    at_x = subst_tm(at_y, 0, Tm.var(1, "x"))
    hyp0, goal0 = (at_y, at_x) if direction == "ltr" else (at_x, at_y)
    replaced = instantiate_tm(hole, new)
    st = _steps(st, index, ("cut", {"phi": Tm.and_(replaced, eq)}), ("and-intro", {}))
    st = _extract(st, index + 1, tuple(path))
    return _steps(st, index + 1,
                  ("subst-instance", {"types": (a, a), "terms": (s, t),
                                      "hyp0": Tm.and_(hyp0, Tm.eq(a, Tm.var(1), Tm.var(0))),
                                      "goal0": goal0, "names": ("x", "y")}),
                  ("lawvere-fwd", {}), ("hyp", {}))


def _left_nested(t: Tm, path: Path = ()) -> Optional[Path]:
    while t.kind is TmKind.SEP:
        if t.args[0].kind is TmKind.SEP:
            return path
        t, path = t.args[1], path + (1,)
    return None


def _leaves(t: Tm) -> List[Tm]:
    if t.kind is not TmKind.SEP:
        return [t]
    return _leaves(t.args[0]) + _leaves(t.args[1])


def sep_leaves(hyp: Tm) -> List[Tm]:
    return _leaves(hyp if hyp.kind is TmKind.SEP else normalize(hyp))


def reorder_hyp(st: ProofState, order: Sequence[int], index: int = 0) -> ProofState:
    """Permute the ∗-separated parts of the hypothesis into the right-nested
    sequence ``order`` (indices into the left-to-right leaves)."""
    hyp = st.goal(index).seq.hyp
    if hyp.kind is not TmKind.SEP:
        st = apply_rule(st, "conv-hyp", {"target": normalize(hyp)}, index)
    n = len(sep_leaves(st.goal(index).seq.hyp))
    if sorted(order) != list(range(n)):
        raise _shape(f"reorder needs a permutation of 0..{n - 1}")
    while True:
        where = _left_nested(st.goal(index).seq.hyp)
        if where is None:
            break
        st = apply_rule(st, "sep-assoc-r", {"side": "hyp", "path": where}, index)
    current = list(range(n))
    for pos, want in enumerate(order):
        j = current.index(want)
        while j > pos:
            m = j - 1
            path = (1,) * m
            if m + 1 == n - 1:
                st = apply_rule(st, "sep-comm", {"side": "hyp", "path": path}, index)
            else:
                st = _steps(st, index, ("sep-assoc-l", {"side": "hyp", "path": path}),
                            ("sep-comm", {"side": "hyp", "path": path + (0,)}),
                            ("sep-assoc-r", {"side": "hyp", "path": path}))
            current[m], current[j] = current[j], current[m]
            j = m
    return st


def _congruence(st: ProofState, index: int, path: Path, leaf) -> ProofState:
    """Close ``H ⊢ H'`` where ``H'`` differs from ``H`` only below ``path``."""
    if not path:
        return leaf(st, index)
    seq = st.goal(index).seq
    kind = (seq.hyp if seq.hyp.kind in (TmKind.SEP, TmKind.AND) else normalize(seq.hyp)).kind
    step, rest = path[0], tuple(path[1:])
    if kind is TmKind.SEP:
        st = apply_rule(st, "sep-mono", {}, index)
        if step == 0:
            st = _congruence(st, index, rest, leaf)
            return apply_rule(st, "hyp", {}, index)
        st = apply_rule(st, "hyp", {}, index)
        return _congruence(st, index, rest, leaf)
    st = apply_rule(st, "and-intro", {}, index)
    for side in (0, 1):
        st = apply_rule(st, "weaken-hyp", {"keep": side}, index)
        st = _congruence(st, index, rest, leaf) if side == step else apply_rule(st, "hyp", {}, index)
    return st


def specialize(st: ProofState, path: Path, terms: Sequence[Tm], index: int = 0) -> ProofState:
    """Instantiate the universal statement at ``path`` in the hypothesis."""
    seq = st.goal(index).seq
    base, node = locate(seq.hyp, path)
    qs = _instances(node, list(terms))
    st = _steps(st, index, ("cut", {"phi": replace_at(base, tuple(path), qs[-1])}))
    if base is not seq.hyp:
        st = apply_rule(st, "conv-hyp", {"target": base}, index)
    st = _congruence(st, index, tuple(path),
                     lambda s, i: _forall_elims(s, i, node, list(terms)))
    return st


def hoare_intro(st: ProofState, index: int = 0) -> ProofState:
    """``chi ⊢ box (pre -* wp ..)`` becomes ``pre ⊢ wp ..`` (``chi`` persistent or True)."""
    hyp = normalize(st.goal(index).seq.hyp)
    if hyp.kind is TmKind.TOP:
        st = _steps(st, index, ("cut", {"phi": Tm.box(Tm.top())}), ("box-true", {}),
                    ("box-intro", {}), ("wand-adjunction-fwd", {}),
                    ("weaken-hyp", {"keep": 1}))
        return st
    if hyp.kind is TmKind.BOX:
        return _steps(st, index, ("box-intro", {}), ("wand-adjunction-fwd", {}))
    raise _shape("hoare_intro needs a persistent hypothesis")


def use_lemma(st: ProofState, lemma: Sequent, proof: ProofTree, terms: Sequence[Tm],
              index: int = 0) -> ProofState:
    """Replace the goal ``chi ⊢ G`` by ``chi ⊢ H`` using a lemma ``H ⊢ G``
    proved over variables instantiated with ``terms``."""
    if lemma.ctx.ty_count:
        raise _shape("lemmas with type parameters cannot be used")
    types = [ty for _, ty in lemma.ctx.elems]
    if len(types) != len(terms):
        raise _shape(f"the lemma takes {len(types)} argument(s)")
    st = _steps(st, index, ("cut", {"phi": instantiate_all(lemma.hyp, list(terms))}))
    st = apply_rule(st, "subst-instance", {"types": tuple(types), "terms": tuple(terms),
                                           "hyp0": lemma.hyp, "goal0": lemma.goal,
                                           "names": tuple(lemma.ctx.tm_names()[::-1])},
                    index + 1)
    return close_with(st, proof, index + 1)


# ----------------------------------------------------------------------------
# The linked-list case study

@dataclass(frozen=True)
class CaseStudyLib:
    llist: Ty
    list_inv: Tm
    append: Tm
    oplus: Tm
    theorem: Sequent
    proof: Any
    tree: Optional[ProofTree] = None


def build_case_study(library_dir: Optional[FilePath] = None) -> CaseStudyLib:
    """Load ``append.lmr`` and certify its correctness theorem."""
    from src.config import Settings
    from src.scripts import run_script
    from src.surface import load_library

    library_dir = library_dir or Settings.from_env().library_dir
    module = load_library(FilePath(library_dir) / "append.lmr", library_dir)
    if module.errors:
        raise module.errors[0]
    env = module.env
    theorem = env.theorems["append_correct"]
    tree = run_script(theorem.sequent, theorem.script, env).tree()
    alpha = Ty.var(0, "a")
    return CaseStudyLib(
        llist=env.instantiate_type("llist", [alpha]),
        list_inv=env.instantiate_term("listInv", [alpha]),
        append=env.instantiate_term("append", [alpha]),
        oplus=env.instantiate_term("oplus", [alpha]),
        theorem=theorem.sequent,
        proof=theorem.script,
        tree=tree,
    )
