"""Seeded properties of evaluation and conversion over generated programs.

The suites that loop over ``property_instances`` cases scale with
``LMR_PROPERTY_INSTANCES``; suites over pairs of cases take half as many.
"""

import itertools
import random

import pytest

from src.conv import contract_at, conv_eq, normalize, redexes
from src.generators import (
    NAT, beta_expand, nat_heaps, random_program, random_pure_type, random_term, random_type,
)
from src.interp import Done, OutOfFuel, eval_program, law_suite, obs_equiv, result_type, value_has_type
from src.surface import parse_term, pretty_tm
from src.syntax import SCHEMA, TY_BINDERS, Ctx, Tm, TmKind, Ty, TyKind, instantiate_tm, instantiate_ty
from src.typeck import infer_tm

SEEDS = range(25)


def program_and_heap(seed: int):
    rng = random.Random(seed)
    size = rng.randint(1, 3)
    return rng, random_program(rng, size), nat_heaps(rng, size, 1)[0]


@pytest.mark.parametrize("seed", SEEDS)
def test_more_fuel_never_changes_a_finished_run(seed):
    _, prog, heap = program_and_heap(seed)
    out = eval_program(prog, heap, fuel=30)
    if isinstance(out, Done):
        for extra in (1, 5, 20):
            assert eval_program(prog, heap, fuel=30 + extra) == out
        assert eval_program(prog, heap, fuel=out.steps) == out


@pytest.mark.parametrize("seed", SEEDS)
def test_less_fuel_never_finishes_an_unfinished_run(seed):
    _, prog, heap = program_and_heap(seed)
    out = eval_program(prog, heap, fuel=30)
    if isinstance(out, Done):
        if out.steps:
            assert isinstance(eval_program(prog, heap, fuel=out.steps - 1), OutOfFuel)
    else:
        for fuel in (0, 10, 29):
            assert isinstance(eval_program(prog, heap, fuel=fuel), OutOfFuel)


@pytest.mark.parametrize("seed", SEEDS)
def test_evaluation_is_deterministic(seed):
    _, prog, heap = program_and_heap(seed)
    assert eval_program(prog, heap, fuel=30) == eval_program(prog, heap, fuel=30)


@pytest.mark.parametrize("seed", SEEDS)
def test_results_have_the_program_type(seed):
    _, prog, heap = program_and_heap(seed)
    out = eval_program(prog, heap, fuel=30)
    if isinstance(out, Done):
        assert value_has_type(out.value, result_type(prog))


@pytest.mark.parametrize("seed", SEEDS)
def test_extra_redexes_are_unobservable(seed):
    rng, prog, heap = program_and_heap(seed)
    expanded = beta_expand(rng, prog, Ty.t(NAT))
    assert obs_equiv(prog, expanded, [heap], 20) is None


@pytest.mark.parametrize("seed", SEEDS)
def test_extra_redexes_are_convertible(seed):
    rng = random.Random(seed)
    ty = random_pure_type(rng)
    t = random_term(rng, ty, 3)
    assert conv_eq(beta_expand(rng, t, ty), t)


def test_the_law_suite_is_reproducible():
    first = law_suite(seed=3, instances=4, workers=1)
    second = law_suite(seed=3, instances=4, workers=2)
    assert first.to_json() == second.to_json()


def nat_list_literal(items) -> Tm:
    out = Tm.nil(NAT)
    for n in reversed(items):
        out = Tm.cons(Tm.nat(n), out)
    return out


@pytest.mark.parametrize("seed", range(10))
def test_logical_append_computes_concatenation(case_env, seed):
    rng = random.Random(seed)
    xs = [rng.randint(0, 3) for _ in range(rng.randint(0, 4))]
    ys = [rng.randint(0, 3) for _ in range(rng.randint(0, 4))]
    oplus = case_env.instantiate_term("oplus", [NAT])
    joined = normalize(Tm.app(Tm.app(oplus, nat_list_literal(xs)), nat_list_literal(ys)))
    assert joined == nat_list_literal(xs + ys)


def every_list(max_len: int, domain=range(3)):
    for n in range(max_len + 1):
        yield from (list(xs) for xs in itertools.product(domain, repeat=n))


def test_logical_append_on_every_short_list(case_env):
    oplus = case_env.instantiate_term("oplus", [NAT])
    ys = Tm.var(0)
    for xs in every_list(5):
        joined = normalize(Tm.app(Tm.app(oplus, nat_list_literal(xs)), ys))
        expected = ys
        for n in reversed(xs):
            expected = Tm.cons(Tm.nat(n), expected)
        assert joined == expected, xs
    for xs, zs in itertools.product(every_list(3), repeat=2):
        joined = normalize(Tm.app(Tm.app(oplus, nat_list_literal(xs)), nat_list_literal(zs)))
        assert joined == nat_list_literal(xs + zs), (xs, zs)


# ----------------------------------------------------------------------------
# Conversion and substitution at scale

def ctx_of(env) -> Ctx:
    return Ctx((), tuple((f"x{i}", a) for i, a in reversed(list(enumerate(env)))))


def generated_term(seed: int, env=(NAT,)):
    rng = random.Random(seed)
    ty = random_pure_type(rng)
    return rng, ty, random_term(rng, ty, 3, env)


def test_normalization_preserves_types(property_instances):
    env = (NAT, Ty.list(NAT))
    for seed in range(property_instances):
        _, ty, t = generated_term(seed, env)
        n = normalize(t)
        assert infer_tm(ctx_of(env), n) == ty, seed
        assert normalize(n) == n, seed


def test_any_reduction_order_reaches_the_normal_form(property_instances):
    for seed in range(property_instances):
        rng, _, t = generated_term(seed)
        current = t
        while True:
            spots = list(redexes(current))
            if not spots:
                break
            current = contract_at(current, rng.choice(spots))
        assert current == normalize(t), seed


def test_printed_terms_parse_back(property_instances):
    env = (NAT,)
    ctx = ctx_of(env)
    for seed in range(property_instances):
        _, _, t = generated_term(seed, env)
        text = pretty_tm(t, ctx)
        assert parse_term(text, ctx) == t, (seed, text)


# Named-variable rendition: every binder gets a distinct name, free variable
# k is spelled ``free<k>``. Substitution there is plain replacement.

def _bound_or_free(i: int, scope: list) -> tuple:
    return ("var", scope[-1 - i] if i < len(scope) else f"free{i - len(scope)}")


def _lookup(name: str, scope: list) -> int:
    if name in scope:
        return scope[::-1].index(name)
    return int(name[len("free"):]) + len(scope)


def named_ty(a: Ty, scope: list, fresh) -> tuple:
    if a.kind is TyKind.VAR:
        return _bound_or_free(a.args[0], scope)
    if a.kind in TY_BINDERS:
        name = next(fresh)
        return (a.kind, name, named_ty(a.args[0], scope + [name], fresh))
    return (a.kind, None) + tuple(named_ty(x, scope, fresh) for x in a.args)


def nameless_ty(n: tuple, scope: list) -> Ty:
    if n[0] == "var":
        return Ty.var(_lookup(n[1], scope))
    kind, binder = n[0], n[1]
    if binder is not None:
        return Ty(kind, (nameless_ty(n[2], scope + [binder]),))
    return Ty(kind, tuple(nameless_ty(x, scope) for x in n[2:]))


def named_tm(t: Tm, scope: list, fresh) -> tuple:
    if t.kind is TmKind.VAR:
        return _bound_or_free(t.args[0], scope)
    parts = [t.kind]
    for spec, a in zip(SCHEMA[t.kind], t.args):
        if spec.sort == "tm":
            binders = [next(fresh) for _ in range(spec.tm_binders)]
            parts.append(("tm", tuple(binders), named_tm(a, scope + binders, fresh)))
        else:
            parts.append(("raw", a))
    return tuple(parts)


def nameless_tm(n: tuple, scope: list) -> Tm:
    if n[0] == "var":
        return Tm.var(_lookup(n[1], scope))
    args = []
    for part in n[1:]:
        if part[0] == "tm":
            args.append(nameless_tm(part[2], scope + list(part[1])))
        else:
            args.append(part[1])
    return Tm(n[0], tuple(args))


def plug(n, replacement):
    """Fill ``free0`` with ``replacement`` and renumber the other free names."""
    if not isinstance(n, tuple) or not n:
        return n
    if n[0] == "var":
        name = n[1]
        if name == "free0":
            return replacement
        if name.startswith("free"):
            return ("var", f"free{int(name[len('free'):]) - 1}")
        return n
    return tuple(plug(x, replacement) for x in n)


def binder_names():
    return (f"b{i}" for i in itertools.count())


def test_type_substitution_matches_named_substitution(property_instances):
    for seed in range(property_instances // 2):
        rng = random.Random(seed)
        body, b = random_type(rng, 4, scope=2), random_type(rng, 3, scope=1)
        fresh = binder_names()
        expected = nameless_ty(plug(named_ty(body, [], fresh), named_ty(b, [], fresh)), [])
        assert instantiate_ty(body, b) == expected, seed


def test_term_substitution_matches_named_substitution(property_instances):
    for seed in range(property_instances // 2):
        rng = random.Random(seed)
        a = random_pure_type(rng)
        body = random_term(rng, random_pure_type(rng), 3, (a, NAT))
        v = random_term(rng, a, 2, (NAT,))
        fresh = binder_names()
        expected = nameless_tm(plug(named_tm(body, [], fresh), named_tm(v, [], fresh)), [])
        assert instantiate_tm(body, v) == expected, seed
