import itertools

import pytest

from src.conv import conv_eq, normalize, rewrite
from src.derived import (
    build_case_study, derive_wp_rec, mk_hoare, mk_rec, rec_call, rec_equation, reorder_hyp,
)
from src.generators import NAT
from src.interp import Done, Heap, OutOfFuel, eval_program, obs_equiv
from src.kernel import (
    KernelError, ProofState, ProofTree, Sequent, apply_rule, check_proof, register_reflection,
)
from src.surface import parse_term
from src.syntax import Ctx, Tm, TmKind, Ty, instantiate_ty
from src.typeck import infer_tm


def node(rule, *premises, **args) -> ProofTree:
    return ProofTree(rule, dict(args), list(premises))


IDENTITY = mk_rec(NAT, NAT, Tm.ret(Tm.var(0)))


def test_rec_has_a_function_type():
    assert infer_tm(Ctx(), IDENTITY) == Ty.arrow(NAT, Ty.t(NAT))


def test_rec_unfolds_with_one_step():
    call = normalize(Tm.app(IDENTITY, Tm.nat(5)))
    assert not conv_eq(call, Tm.ret(Tm.nat(5)))
    unfolded = rewrite(call, None, "unfold-of-fold")
    assert conv_eq(unfolded, Tm.seq(Tm.step(), Tm.ret(Tm.nat(5))))


def test_rec_call_is_recognized():
    call = rec_call(Tm.app(IDENTITY, Tm.nat(5)))
    assert call is not None
    assert call.arg == Tm.nat(5)
    assert call.types == (NAT, NAT)
    assert rec_call(Tm.ret(Tm.nat(5))) is None


def test_rec_equation_is_certified():
    call = rec_call(Tm.app(IDENTITY, Tm.nat(5)))
    seq, tree = rec_equation(Ctx(), call)
    assert seq.goal.kind is TmKind.EQ
    check_proof(seq, tree)


def unfolding_sides(app: Tm):
    seq, _ = rec_equation(Ctx(), rec_call(app))
    return seq.goal.args[1], seq.goal.args[2]


@pytest.mark.parametrize("n", range(10))
def test_unfolding_equation_holds_when_run(n):
    lhs, rhs = unfolding_sides(Tm.app(IDENTITY, Tm.nat(n)))
    assert obs_equiv(lhs, rhs, [Heap(), Heap.of(Tm.nat(n))], 50) is None


def test_unfolding_equation_of_append_holds_when_run(case_env):
    llist = case_env.instantiate_type("llist", [NAT])
    unrolled = instantiate_ty(llist.args[0], llist)
    cell_ty = Ty.prod(NAT, llist)
    empty = Tm.fold(llist, Tm.inl(unrolled, Tm.unit()))
    append = case_env.instantiate_term("append", [NAT])

    def lay_out(items, start):
        cells = {}
        for i, n in enumerate(items):
            nxt = Tm.fold(llist, Tm.inr(unrolled, Tm.loc(cell_ty, start + i + 1)))
            cells[start + i] = Tm.pair(Tm.nat(n), nxt if i + 1 < len(items) else empty)
        head = Tm.fold(llist, Tm.inr(unrolled, Tm.loc(cell_ty, start))) if items else empty
        return cells, head

    lists = [[], [0], [2], [1, 2], [2, 0, 1]]
    for xs, ys in itertools.product(lists, repeat=2):
        first, l1 = lay_out(xs, 0)
        second, l2 = lay_out(ys, len(xs))
        lhs, rhs = unfolding_sides(Tm.app(append, Tm.pair(l1, l2)))
        assert obs_equiv(lhs, rhs, [Heap.compose(first, second)], 50) is None, (xs, ys)


def test_reflected_equation_rewrites_the_goal():
    program = Tm.app(IDENTITY, Tm.nat(5))
    seq = Sequent(Ctx(), Tm.top(), Tm.wp(NAT, program, Tm.eq(NAT, Tm.var(0), Tm.nat(5))))
    st = ProofState.start(seq)
    proved, tree = rec_equation(Ctx(), rec_call(program))
    st = register_reflection(st, proved, tree)
    for name, args in (("conv-goal", {"eq": proved.goal}), ("wp-bind", {}), ("wp-step", {}),
                       ("later-intro", {}), ("wp-val", {})):
        st = apply_rule(st, name, args)
    assert st.goal(0).seq.goal == Tm.eq(NAT, Tm.nat(5), Tm.nat(5))
    st = apply_rule(st, "eq-formation")
    check_proof(seq, st.tree())


def test_wp_rec_derivation():
    seq = Sequent(Ctx(), Tm.top(), parse_term(
        "forall (n : nat). True -* wp ((rec f (x : nat) : nat => ret x) n) {y. y = n}"))
    premise = node("forall-intro", node("wand-adjunction-fwd", node("wp-val", node("eq-formation"))))
    tree = derive_wp_rec(seq, premise)
    check_proof(seq, tree)
    assert any(t.rule == "loeb" for _, t in tree.walk())


def test_wp_rec_rejects_other_programs():
    seq = Sequent(Ctx(), Tm.top(), parse_term("forall (n : nat). True -* wp (ret n) {y. y = n}"))
    with pytest.raises(KernelError) as info:
        derive_wp_rec(seq, node("hyp"))
    assert info.value.kind == "rule-mismatch"


@pytest.mark.parametrize("fuel", [1, 5, 20, 50])
def test_diverging_recursion_runs_out_of_fuel(fuel):
    loop = parse_term("(rec f (x : nat) : nat => f x) 0")
    assert isinstance(eval_program(loop, fuel=fuel), OutOfFuel)


def test_recursion_evaluates():
    double = parse_term(
        "rec f (x : nat) : nat => natrec [T nat] x with zero => ret 0 | succ m r => "
        "(y <- r; ret (succ (succ y)))")
    out = eval_program(Tm.app(double, Tm.nat(3)), fuel=10)
    assert isinstance(out, Done)
    assert out.value == Tm.nat(6)
    assert out.steps == 1


def test_hoare_triple_shape():
    triple = mk_hoare(Ctx(), Tm.top(), Tm.ret(Tm.nat(5)), Tm.eq(NAT, Tm.var(0), Tm.nat(5)))
    assert triple.kind is TmKind.BOX
    wand = triple.args[0]
    assert wand.kind is TmKind.WAND and wand.args[1].kind is TmKind.WP


def test_hoare_triple_needs_a_computation():
    with pytest.raises(KernelError):
        mk_hoare(Ctx(), Tm.top(), Tm.nat(5), Tm.top())


def test_reorder_permutes_separated_parts(prop_ctx):
    p, q, r = Tm.var(2), Tm.var(1), Tm.var(0)
    st = ProofState.start(Sequent(prop_ctx, Tm.sep(Tm.sep(p, q), r), Tm.sep(r, Tm.sep(p, q))))
    st = reorder_hyp(st, [2, 0, 1])
    assert st.goal(0).seq.hyp == Tm.sep(r, Tm.sep(p, q))
    st = apply_rule(st, "hyp")
    check_proof(st.root.seq, st.tree())


def test_reorder_needs_a_permutation(prop_ctx):
    p, q = Tm.var(2), Tm.var(1)
    st = ProofState.start(Sequent(prop_ctx, Tm.sep(p, q), Tm.sep(q, p)))
    with pytest.raises(KernelError):
        reorder_hyp(st, [0, 0])


def test_empty_list_invariant(case_env):
    llist = case_env.instantiate_type("llist", [NAT])
    unrolled = instantiate_ty(llist.args[0], llist)
    empty = Tm.fold(llist, Tm.inl(unrolled, Tm.unit()))
    inv = case_env.instantiate_term("listInv", [NAT])
    seq = Sequent(Ctx(), Tm.top(), Tm.app(Tm.app(inv, empty), Tm.nil(NAT)))
    check_proof(seq, node("eq-formation"))


def test_case_study_is_certified(library_dir):
    lib = build_case_study(library_dir)
    assert lib.tree is not None
    check_proof(lib.theorem, lib.tree)
    assert infer_tm(Ctx(("a",)), lib.append) == Ty.arrow(Ty.prod(lib.llist, lib.llist),
                                                         Ty.t(lib.llist))
