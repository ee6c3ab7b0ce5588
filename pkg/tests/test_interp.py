import itertools
import random

import pytest

from src.conv import normalize, rewrite
from src.generators import NAT, frames, nat_heaps
from src.interp import (
    FAULTS, Costs, Done, Heap, HeapError, OutOfFuel, TraceEvent, check_law_decl, eval_program,
    law_suite, obs_equiv, wp_check,
)
from src.surface import parse_module, parse_term
from src.syntax import Tm, TmKind, Ty, instantiate_ty


def loc(i: int) -> Tm:
    return Tm.loc(NAT, i)


def test_allocate_write_read():
    out = eval_program(parse_term("x <- new 5; set x 7; get x"), fuel=10)
    assert str(out) == "Done value=7 heap={0↦7} steps=1"


def test_no_fuel_for_a_step():
    assert isinstance(eval_program(parse_term("step; ret 0"), fuel=0), OutOfFuel)
    assert str(eval_program(parse_term("step; ret 0"), fuel=0)) == "OutOfFuel"


def test_pure_return_is_free():
    heap = Heap.of(Tm.nat(3))
    out = eval_program(Tm.ret(Tm.nat(5)), heap, fuel=0)
    assert out == Done(Tm.nat(5), heap, 0)


def test_writes_are_free_reads_are_not():
    prog = Tm.seq(Tm.set(loc(0), Tm.nat(2)), Tm.get(loc(0)))
    heap = Heap.of(Tm.nat(0))
    assert isinstance(eval_program(prog, heap, fuel=0), OutOfFuel)
    out = eval_program(prog, heap, fuel=1)
    assert isinstance(out, Done) and out.value == Tm.nat(2) and out.steps == 1


def test_custom_costs():
    prog = Tm.get(loc(0))
    out = eval_program(prog, Heap.of(Tm.nat(4)), fuel=0, costs=Costs(get=0))
    assert isinstance(out, Done) and out.steps == 0


def test_trace_records_charged_operations():
    trace = []
    eval_program(parse_term("x <- new 5; step; set x 7; get x"), fuel=10, trace=trace)
    assert [e.op for e in trace] == ["step", "get"]
    assert trace[-1] == TraceEvent(2, "get", "loc 0")


def test_dangling_location():
    with pytest.raises(HeapError) as info:
        eval_program(Tm.get(loc(3)), Heap())
    assert info.value.kind == "dangling"


def test_fragments_must_be_disjoint_and_gapless():
    with pytest.raises(HeapError) as info:
        Heap.compose({0: Tm.nat(1)}, {0: Tm.nat(2)})
    assert info.value.kind == "overlap"
    with pytest.raises(HeapError) as info:
        Heap.compose({1: Tm.nat(1)})
    assert info.value.kind == "gap"


def test_get_after_set_is_observationally_sound():
    lhs = Tm.seq(Tm.set(loc(0), Tm.nat(5)), Tm.get(loc(0)))
    rhs = rewrite(lhs, None, "get-after-set")
    assert obs_equiv(lhs, rhs, nat_heaps(random.Random(0), 1, 5), 20) is None


def test_step_is_observable():
    example = obs_equiv(parse_term("step; ret 0"), parse_term("ret 0"), [Heap()], 5)
    assert example is not None
    assert example.fuel == 0
    assert isinstance(example.obs1, OutOfFuel) and isinstance(example.obs2, Done)


def test_exhaustive_comparison_finds_the_same_fuel():
    example = obs_equiv(parse_term("step; ret 0"), parse_term("ret 0"), [Heap()], 5,
                        exhaustive=True)
    assert example is not None and example.fuel == 0


def test_different_values_are_observable():
    example = obs_equiv(Tm.ret(Tm.nat(1)), Tm.ret(Tm.nat(2)), [Heap()], 5)
    assert example is not None and example.to_json()["obs1"].startswith("Done value=1")


def test_set_after_new_on_empty_heap():
    lhs = parse_term("r <- new 1; set r 2; get r")
    rhs = rewrite(lhs, None, "set-after-new")
    assert rhs == parse_term("r <- new 2; get r")
    assert obs_equiv(lhs, rhs, [Heap()], 10) is None


def test_wp_check_reads_the_precondition():
    outcome = wp_check(Tm.get(loc(0)), {0: Tm.nat(5)}, frames(1),
                       lambda v, h: v == Tm.nat(5) and h == {0: Tm.nat(5)})
    assert outcome.ok


def test_wp_check_reports_a_failed_postcondition():
    outcome = wp_check(Tm.set(loc(0), Tm.nat(6)), {0: Tm.nat(5)}, frames(1),
                       lambda v, h: h == {0: Tm.nat(5)})
    assert not outcome.ok and outcome.reason == "postcondition failed"


def test_wp_check_catches_frame_writes():
    outcome = wp_check(Tm.set(loc(1), Tm.nat(0)), {0: Tm.nat(5)}, [{1: Tm.nat(3)}],
                       lambda v, h: True)
    assert not outcome.ok
    assert outcome.frame == {1: Tm.nat(3)}


def test_wp_check_frame_overlap():
    with pytest.raises(HeapError) as info:
        wp_check(Tm.get(loc(0)), {0: Tm.nat(5)}, [{0: Tm.nat(1)}], lambda v, h: True)
    assert info.value.kind == "overlap"


def test_running_out_of_fuel_satisfies_any_postcondition():
    outcome = wp_check(parse_term("step; ret 0"), {}, frames(0), lambda v, h: False, fuel=0)
    assert outcome.ok


def test_law_suite_passes():
    report = law_suite(seed=0, instances=8, workers=2)
    assert report.ok, report.failing()
    assert len(report.rules) == 17
    assert all(r.instances == 8 for r in report.rules)


def test_free_reads_break_get_after_set():
    report = law_suite(seed=0, instances=8, workers=2, costs=FAULTS["get-free"])
    assert not report.ok
    assert "get-after-set" in report.failing()
    assert "unfold-of-fold" not in report.failing()
    failure = next(r for r in report.rules if r.rule == "get-after-set").failures[0]
    assert str(failure.example.obs1) != str(failure.example.obs2)


def test_zero_instances_pass_with_a_warning():
    report = law_suite(seed=0, instances=0)
    assert report.ok
    assert report.warnings
    assert report.to_json()["warnings"] == report.warnings


def test_law_declarations():
    module = parse_module(
        "law good : (set (loc [nat] 0) 5; get (loc [nat] 0)) == "
        "(step; set (loc [nat] 0) 5; ret 5) : T nat fuel 10\n"
        "law bad : (ret 1) == (ret 2) : T nat fuel 3\n")
    good, bad = module.decls
    assert check_law_decl(good.lhs, good.rhs, good.ty, good.fuel) is None
    assert check_law_decl(bad.lhs, bad.rhs, bad.ty, bad.fuel) is not None


def test_law_must_relate_programs():
    module = parse_module("law pure : 1 == 1 : nat fuel 3")
    [law] = module.decls
    with pytest.raises(HeapError):
        check_law_decl(law.lhs, law.rhs, law.ty, law.fuel)


# ----------------------------------------------------------------------------
# linked lists in the heap

def walk(value: Tm, cells) -> list:
    """Elements of the linked list ``value`` whose cells live in ``cells``."""
    out = []
    v = normalize(value)
    while True:
        assert v.kind is TmKind.FOLD
        inner = v.args[1]
        if inner.kind is TmKind.INL:
            return out
        cell = cells[inner.args[1].args[1]]
        out.append(cell.args[0].to_int())
        v = cell.args[1]


def test_main_program(case_env):
    out = eval_program(case_env.termdefs["main"].tm)
    assert isinstance(out, Done) and out.value == Tm.nat(7)


def test_demo_appends_in_place(case_env):
    out = eval_program(case_env.termdefs["demo"].tm)
    assert isinstance(out, Done)
    assert walk(out.value, out.heap.cells) == [1, 2, 3]


@pytest.fixture
def llist_nat(case_env):
    llist = case_env.instantiate_type("llist", [NAT])
    unrolled = instantiate_ty(llist.args[0], llist)
    cell_ty = Ty.prod(NAT, llist)
    empty = Tm.fold(llist, Tm.inl(unrolled, Tm.unit()))

    def at(i: int) -> Tm:
        return Tm.fold(llist, Tm.inr(unrolled, Tm.loc(cell_ty, i)))

    return empty, at


def test_append_meets_its_specification_on_every_frame(case_env, llist_nat):
    empty, at = llist_nat
    append = case_env.instantiate_term("append", [NAT])
    pre = {0: Tm.pair(Tm.nat(1), at(1)), 1: Tm.pair(Tm.nat(2), empty),
           2: Tm.pair(Tm.nat(3), empty)}
    program = Tm.app(append, Tm.pair(at(0), at(2)))

    def post(value, cells):
        return walk(value, cells) == [1, 2, 3]

    outcome = wp_check(program, pre, frames(3), post)
    assert outcome.ok, outcome.reason


def test_append_to_empty_returns_the_second_list(case_env, llist_nat):
    empty, at = llist_nat
    append = case_env.instantiate_term("append", [NAT])
    pre = {0: Tm.pair(Tm.nat(9), empty)}
    outcome = wp_check(Tm.app(append, Tm.pair(empty, at(0))), pre, frames(1),
                       lambda v, h: walk(v, h) == [9] and h == {0: Tm.pair(Tm.nat(9), empty)})
    assert outcome.ok, outcome.reason


def lay_out(items, start: int, empty: Tm, at) -> tuple:
    """Cells for ``items`` from ``start`` on, and the pointer to the first."""
    cells = {}
    for i, n in enumerate(items):
        nxt = at(start + i + 1) if i + 1 < len(items) else empty
        cells[start + i] = Tm.pair(Tm.nat(n), nxt)
    return cells, (at(start) if items else empty)


def elements(t: Tm) -> list:
    out = []
    while t.kind is TmKind.CONS:
        out.append(t.args[0].to_int())
        t = t.args[1]
    assert t.kind is TmKind.NIL
    return out


def nat_list_literal(items) -> Tm:
    out = Tm.nil(NAT)
    for n in reversed(items):
        out = Tm.cons(Tm.nat(n), out)
    return out


def test_append_on_every_pair_of_short_lists(case_env, llist_nat):
    empty, at = llist_nat
    append = case_env.instantiate_term("append", [NAT])
    oplus = case_env.instantiate_term("oplus", [NAT])
    short = [list(xs) for n in range(4) for xs in itertools.product(range(3), repeat=n)]
    for xs, ys in itertools.product(short, repeat=2):
        first, l1 = lay_out(xs, 0, empty, at)
        second, l2 = lay_out(ys, len(xs), empty, at)
        pre = {**first, **second}
        expected = elements(normalize(Tm.app(Tm.app(oplus, nat_list_literal(xs)),
                                             nat_list_literal(ys))))

        def post(value, cells):
            return set(cells) == set(pre) and walk(value, cells) == expected

        outcome = wp_check(Tm.app(append, Tm.pair(l1, l2)), pre,
                           frames(len(pre), max_size=1, values=range(2)), post)
        assert outcome.ok, (xs, ys, outcome.reason)


# ----------------------------------------------------------------------------
# the heap axioms behind the wp rules, on every small frame

@pytest.mark.parametrize("n", range(4))
def test_returning_a_value_leaves_the_heap_alone(n):
    outcome = wp_check(Tm.ret(Tm.nat(n)), {}, frames(0),
                       lambda v, h: v == Tm.nat(n) and h == {})
    assert outcome.ok, outcome.reason


@pytest.mark.parametrize("n", range(4))
def test_allocation_owns_exactly_the_new_cell(n):
    def post(value, cells):
        return value.kind is TmKind.LOC and cells == {value.args[1]: Tm.nat(n)}

    outcome = wp_check(Tm.new(Tm.nat(n)), {}, frames(0), post)
    assert outcome.ok, outcome.reason


@pytest.mark.parametrize("n", range(4))
def test_a_step_then_a_value(n):
    prog = Tm.seq(Tm.step(), Tm.ret(Tm.nat(n)))
    outcome = wp_check(prog, {}, frames(0), lambda v, h: v == Tm.nat(n) and h == {})
    assert outcome.ok, outcome.reason
    assert not wp_check(prog, {}, frames(0), lambda v, h: False, fuel=1).ok


@pytest.mark.parametrize("n", range(4))
def test_bound_read_then_write(n):
    prog = Tm.bind(Tm.get(loc(0)), Tm.seq(Tm.set(loc(0), Tm.succ(Tm.var(0))), Tm.ret(Tm.var(0))))
    outcome = wp_check(prog, {0: Tm.nat(n)}, frames(1),
                       lambda v, h: v == Tm.nat(n) and h == {0: Tm.nat(n + 1)})
    assert outcome.ok, outcome.reason
