import random

import pytest

from src.conv import normalize
from src.generators import NAT, random_pure_type, random_term
from src.surface import parse_term, parse_type
from src.syntax import Ctx, Tm, Ty, TypeFlag
from src.typeck import TypeCheckError, check_sequent, check_ty, infer_tm, is_program

LLIST_BODY = Ty.mu(Ty.sum(Ty.unit(), Ty.ref(Ty.prod(Ty.var(1), Ty.var(0)))))


def test_recursive_heap_type_is_a_program_type():
    check_ty(Ctx(("a",)), LLIST_BODY, TypeFlag.PROGRAM)
    assert is_program(Ctx(("a",)), LLIST_BODY)


def test_prop_is_not_a_program_type():
    with pytest.raises(TypeCheckError) as info:
        check_ty(Ctx(), Ty.prop(), TypeFlag.PROGRAM)
    assert info.value.kind == "flag-violation"


def test_prop_under_ref_is_rejected_even_at_logical_flag():
    with pytest.raises(TypeCheckError) as info:
        check_ty(Ctx(), Ty.ref(Ty.prop()), TypeFlag.LOGICAL)
    assert info.value.kind == "flag-violation"


def test_predicates_are_logical_only():
    pred = parse_type("forall a. a -> prop")
    check_ty(Ctx(), pred, TypeFlag.LOGICAL)
    assert not is_program(Ctx(), pred)


def test_unbound_type_variable():
    with pytest.raises(TypeCheckError) as info:
        check_ty(Ctx(), Ty.var(0))
    assert info.value.kind == "unbound"


def test_infer_program_function():
    t = parse_term("fun (x : ref nat) => y <- get x; ret y")
    assert infer_tm(Ctx(), t) == Ty.arrow(Ty.ref(NAT), Ty.t(NAT))


def test_set_checks_stored_type(ref_ctx):
    with pytest.raises(TypeCheckError) as info:
        infer_tm(ref_ctx, Tm.set(Tm.var(0), Tm.top()))
    assert info.value.kind == "mismatch"


def test_bind_needs_a_computation():
    with pytest.raises(TypeCheckError) as info:
        infer_tm(Ctx(), Tm.bind(Tm.nat(5), Tm.ret(Tm.var(0))))
    assert info.value.kind == "not-a-monad"


def test_cannot_store_propositions():
    with pytest.raises(TypeCheckError) as info:
        infer_tm(Ctx(), Tm.new(Tm.top()))
    assert info.value.kind == "flag-violation"


def test_get_needs_a_reference():
    with pytest.raises(TypeCheckError) as info:
        infer_tm(Ctx(), Tm.get(Tm.nat(1)))
    assert info.value.kind == "not-a-ref"


def test_unknown_name_is_unbound():
    with pytest.raises(TypeCheckError) as info:
        parse_term("ret nowhere")
    assert info.value.kind == "unbound"


def test_error_carries_source_span(ref_ctx):
    t = parse_term("x <- get l; set l (x, x)", ref_ctx)
    with pytest.raises(TypeCheckError) as info:
        infer_tm(ref_ctx, t)
    assert info.value.span is not None


def test_propositions(ref_ctx):
    phi = parse_term("exists (v : nat). l |-> v * |> (l |-> v -* wp (get l) {x. x = v})", ref_ctx)
    assert infer_tm(ref_ctx, phi) == Ty.prop()


def test_append_instance_type(case_env):
    ctx = Ctx(("a",))
    llist = case_env.instantiate_type("llist", [Ty.var(0)])
    assert llist == LLIST_BODY
    append = case_env.instantiate_term("append", [Ty.var(0)])
    assert infer_tm(ctx, append) == Ty.arrow(Ty.prod(llist, llist), Ty.t(llist))


def test_polymorphic_definition_applied_to_nat(case_env):
    oplus = case_env.instantiate_term("oplus", [NAT])
    assert infer_tm(Ctx(), oplus) == Ty.arrow(Ty.list(NAT), Ty.arrow(Ty.list(NAT), Ty.list(NAT)))


def test_case_study_sequent_is_well_formed(case_env):
    check_sequent(case_env.theorems["append_correct"].sequent)


def test_type_application_must_be_a_program_type():
    ident = Tm.tylam(Tm.lam(Ty.var(0), Tm.var(0)))
    assert infer_tm(Ctx(), Tm.tyapp(ident, NAT)) == Ty.arrow(NAT, NAT)
    with pytest.raises(TypeCheckError) as info:
        infer_tm(Ctx(), Tm.tyapp(ident, Ty.prop()))
    assert info.value.kind == "flag-violation"


def test_unpacked_type_may_not_escape():
    pkg = Tm.pack(Ty.exists(Ty.var(0)), NAT, Tm.nat(3))
    assert infer_tm(Ctx(), Tm.unpack(pkg, Tm.ret(Tm.unit()))) == Ty.t(Ty.unit())
    with pytest.raises(TypeCheckError) as info:
        infer_tm(Ctx(), Tm.unpack(pkg, Tm.ret(Tm.var(0))))
    assert info.value.kind == "escape"


def _ctx_of(env) -> Ctx:
    return Ctx((), tuple((f"x{i}", a) for i, a in reversed(list(enumerate(env)))))


@pytest.mark.parametrize("seed", range(60))
def test_generated_terms_have_their_type(seed):
    rng = random.Random(seed)
    env = (NAT, Ty.list(NAT))
    ty = random_pure_type(rng)
    t = random_term(rng, ty, 3, env)
    assert infer_tm(_ctx_of(env), t) == ty


@pytest.mark.parametrize("seed", range(60))
def test_normalization_preserves_types(seed):
    rng = random.Random(1000 + seed)
    env = (NAT,)
    ty = random_pure_type(rng)
    t = random_term(rng, ty, 3, env)
    assert infer_tm(_ctx_of(env), normalize(t)) == ty
