import random

import pytest

from src.conv import EFFECT_RULES, RewriteError, conv_eq, normalize, rewrite, rule_by_name
from src.generators import NAT, NAT_LIST, nat_list, rule_instance
from src.surface import parse_term
from src.syntax import Ctx, Tm, Ty, instantiate_ty
from src.typeck import infer_tm

L = Tm.var(0, "l")


def test_left_unit_is_implicit(ref_ctx):
    t = parse_term("x <- ret 5; set l x", ref_ctx)
    assert normalize(t) == Tm.set(L, Tm.nat(5))


def test_right_unit_is_implicit(ref_ctx):
    assert normalize(parse_term("x <- get l; ret x", ref_ctx)) == Tm.get(L)


def test_bind_chains_are_right_nested():
    m = Tm.bind(Tm.get(Tm.var(0)), Tm.set(Tm.var(1), Tm.var(0)))
    t = Tm.bind(m, Tm.get(Tm.var(1)))
    expected = Tm.bind(Tm.get(Tm.var(0)), Tm.bind(Tm.set(Tm.var(1), Tm.var(0)), Tm.get(Tm.var(2))))
    assert normalize(t) == expected


def test_beta_and_projections():
    t = Tm.fst(Tm.pair(Tm.app(Tm.lam(NAT, Tm.succ(Tm.var(0))), Tm.nat(1)), Tm.unit()))
    assert normalize(t) == Tm.nat(2)


def test_recursors_compute_on_literals():
    t = parse_term("natrec [nat] 2 with zero => 1 | succ m r => succ r")
    assert normalize(t) == Tm.nat(3)
    xs = parse_term("listrec [nat] cons 4 (cons 2 (nil [nat])) with nil => 0 | cons h t r => succ r")
    assert normalize(xs) == Tm.nat(2)


def test_conversion_ignores_pure_redexes():
    redex = Tm.app(Tm.lam(NAT, Tm.ret(Tm.var(0))), Tm.nat(5))
    assert conv_eq(redex, Tm.ret(Tm.nat(5)))
    post = Tm.eq(NAT, Tm.var(0), Tm.nat(5))
    assert conv_eq(Tm.wp(NAT, redex, post), Tm.wp(NAT, Tm.ret(Tm.nat(5)), post))


def test_steps_are_never_erased():
    assert not conv_eq(Tm.seq(Tm.step(), Tm.ret(Tm.nat(5))), Tm.ret(Tm.nat(5)))


def test_effects_are_not_reduced(ref_ctx):
    t = parse_term("set l 5; get l", ref_ctx)
    assert normalize(t) == t


def test_normalize_is_idempotent(ref_ctx):
    t = parse_term("x <- (y <- get l; ret y); z <- ret x; set l z", ref_ctx)
    once = normalize(t)
    assert normalize(once) == once


def test_get_after_set(ref_ctx):
    t = parse_term("set l 5; get l", ref_ctx)
    assert rewrite(t, None, "get-after-set") == parse_term("step; set l 5; ret 5", ref_ctx)


def test_get_after_set_inside_a_chain(ref_ctx):
    t = parse_term("x <- get l; set l 1; get l", ref_ctx)
    out = rewrite(t, (1,), "get_after_set")
    assert out == parse_term("x <- get l; step; set l 1; ret 1", ref_ctx)


def test_unfold_of_fold_both_ways():
    v = Tm.inl(instantiate_ty(NAT_LIST.args[0], NAT_LIST), Tm.unit())
    redex = Tm.unfold(Tm.fold(NAT_LIST, v))
    stepped = Tm.seq(Tm.step(), Tm.ret(v))
    assert rewrite(redex, None, "unfold-of-fold") == stepped
    assert rewrite(stepped, None, "unfold-of-fold", "backward", NAT_LIST) == redex


def test_set_after_set(ref_ctx):
    t = parse_term("set l 1; set l 2", ref_ctx)
    assert rewrite(t, None, "set-after-set") == Tm.set(L, Tm.nat(2))
    assert rewrite(Tm.set(L, Tm.nat(2)), None, "set-after-set", "backward", Tm.nat(1)) == t


def test_set_after_get(ref_ctx):
    t = parse_term("x <- get l; set l x; ret x", ref_ctx)
    assert rewrite(t, None, "set-after-get") == parse_term("x <- get l; ret x", ref_ctx)


def test_step_commutes_with_get(ref_ctx):
    t = parse_term("x <- get l; step; ret x", ref_ctx)
    assert rewrite(t, None, "step-commute-get") == parse_term("step; x <- get l; ret x", ref_ctx)


def test_rule_that_matches_nowhere():
    with pytest.raises(RewriteError) as info:
        rewrite(Tm.ret(Tm.nat(5)), None, "get-after-set")
    assert info.value.kind == "no-match"


def test_rule_at_wrong_path(ref_ctx):
    t = parse_term("set l 5; get l", ref_ctx)
    with pytest.raises(RewriteError) as info:
        rewrite(t, (1,), "get-after-set")
    assert info.value.kind == "no-match"


def test_path_outside_term(ref_ctx):
    t = parse_term("set l 5; get l", ref_ctx)
    with pytest.raises(RewriteError) as info:
        rewrite(t, (7, 0), "get-after-set")
    assert info.value.kind == "path-invalid"


def test_backward_rewrite_needs_its_witness():
    stepped = Tm.seq(Tm.step(), Tm.ret(nat_list([])))
    with pytest.raises(RewriteError) as info:
        rewrite(stepped, None, "unfold-of-fold", "backward")
    assert info.value.kind == "no-match"


def test_unknown_rule_name():
    with pytest.raises(RewriteError):
        rule_by_name("get-after-nothing")


def test_rule_names_accept_underscores():
    assert rule_by_name("set_after_new").id == "set-after-new"


def test_catalog_is_complete():
    assert set(EFFECT_RULES) == {
        "unfold-of-fold", "fold-of-unfold", "get-after-set", "set-after-new", "set-after-set",
        "get-after-get", "set-after-get", "step-commute-get", "step-commute-set",
        "step-commute-new", "step-commute-unfold", "step-commute-bind",
    }


@pytest.mark.parametrize("rule", EFFECT_RULES)
@pytest.mark.parametrize("seed", range(5))
def test_rewriting_preserves_types(rule, seed):
    rng = random.Random(seed)
    lhs = rule_instance(rule, rng, 2)
    rhs = rewrite(lhs, None, rule)
    assert infer_tm(Ctx(), rhs) == infer_tm(Ctx(), lhs)


def test_rewrite_leaves_other_subterms_alone(ref_ctx):
    t = parse_term("(set l 5; get l, 3)", ref_ctx)
    out = rewrite(t, (0,), "get-after-set")
    assert out.args[1] == Tm.nat(3)
    assert infer_tm(ref_ctx, out) == Ty.prod(Ty.t(NAT), NAT)
