"""Seeded generators for ground terms, heaps and frames.

Everything takes an explicit ``random.Random`` so that the law suite and the
property tests are reproducible from a seed.
"""

import itertools
import random
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

from src.syntax import Tm, TmKind, Ty, TyKind, instantiate_tm, instantiate_tm_type, instantiate_ty, shift_tm
from src.interp import Heap

MAX_NAT = 3
MAX_CELLS = 3

NAT = Ty.nat()
NAT_LIST = Ty.mu(Ty.sum(Ty.unit(), Ty.prod(NAT, Ty.var(0, "r"))), "r")


def nat_value(rng: random.Random) -> Tm:
    return Tm.nat(rng.randint(0, MAX_NAT))


def location(rng: random.Random, heap_size: int, elem: Ty = NAT) -> Tm:
    return Tm.loc(elem, rng.randrange(heap_size))


def random_value(rng: random.Random, ty: Ty, depth: int = 2) -> Tm:
    """A closed value of a first-order ``ty`` (unit, nat, products, sums,
    lists and recursive types over those)."""
    k = ty.kind
    if k is TyKind.UNIT:
        return Tm.unit()
    if k is TyKind.NAT:
        return nat_value(rng)
    if k is TyKind.PROD:
        return Tm.pair(random_value(rng, ty.args[0], depth), random_value(rng, ty.args[1], depth))
    if k is TyKind.SUM:
        if depth <= 0 or rng.random() < 0.5:
            return Tm.inl(ty, random_value(rng, ty.args[0], depth - 1))
        return Tm.inr(ty, random_value(rng, ty.args[1], depth - 1))
    if k is TyKind.LIST:
        out = Tm.nil(ty.args[0])
        for _ in range(rng.randint(0, max(depth, 0))):
            out = Tm.cons(random_value(rng, ty.args[0], depth - 1), out)
        return out
    if k is TyKind.MU:
        return Tm.fold(ty, random_value(rng, instantiate_ty(ty.args[0], ty), depth - 1))
    raise ValueError(f"no value generator for {k.value}")


def nat_list(items: Sequence[int]) -> Tm:
    """``items`` as a folded ``NAT_LIST`` value."""
    unrolled = instantiate_ty(NAT_LIST.args[0], NAT_LIST)
    out = Tm.fold(NAT_LIST, Tm.inl(unrolled, Tm.unit()))
    for n in reversed(items):
        out = Tm.fold(NAT_LIST, Tm.inr(unrolled, Tm.pair(Tm.nat(n), out)))
    return out


# ----------------------------------------------------------------------------
# Heaps and frames

def nat_heaps(rng: random.Random, size: int, count: int) -> List[Heap]:
    return [Heap.of(*(nat_value(rng) for _ in range(size))) for _ in range(count)]


def _cell_types(terms: Iterable[Tm]) -> Dict[int, Ty]:
    found: Dict[int, Ty] = {}
    stack = list(terms)
    while stack:
        t = stack.pop()
        if t.kind is TmKind.LOC:
            found.setdefault(t.args[1], t.args[0])
            continue
        stack.extend(a for a in t.args if isinstance(a, Tm))
    return found


def heaps_for(terms: Sequence[Tm], rng: random.Random, count: int) -> List[Heap]:
    """Heaps large enough for every location literal in ``terms``, each cell
    holding a random value of the type its literal announces."""
    types = _cell_types(terms)
    size = max(types, default=-1) + 1
    out = []
    for _ in range(count):
        cells = [random_value(rng, types.get(i, NAT), 1) for i in range(size)]
        out.append(Heap.of(*cells))
    return out or [Heap()]


def frames(start: int, max_size: int = 2, values: Sequence[int] = range(MAX_NAT + 1)) -> Iterator[Dict[int, Tm]]:
    """Every frame of at most ``max_size`` nat cells placed from ``start`` on."""
    for size in range(max_size + 1):
        for combo in itertools.product(values, repeat=size):
            yield {start + i: Tm.nat(n) for i, n in enumerate(combo)}


# ----------------------------------------------------------------------------
# Programs

def _cont(rng: random.Random, heap_size: int) -> Tm:
    """A ``T nat`` program with one free ``nat`` variable (index 0)."""
    x = Tm.var(0, "x")
    l = location(rng, heap_size) if heap_size else None
    choice = rng.randrange(6 if heap_size else 3)
    if choice == 0:
        return Tm.ret(x)
    if choice == 1:
        return Tm.ret(Tm.succ(x))
    if choice == 2:
        return Tm.seq(Tm.step(), Tm.ret(x))
    if choice == 3:
        return Tm.seq(Tm.set(l, x), Tm.ret(x))
    if choice == 4:
        return Tm.bind(Tm.get(l), Tm.ret(Tm.var(rng.randrange(2))), "y")
    return random_program(rng, heap_size, 1)


def random_program(rng: random.Random, heap_size: int, depth: int = 2) -> Tm:
    """A closed ``T nat`` program over a heap of ``heap_size`` nat cells."""
    l = location(rng, heap_size) if heap_size else None
    options = ["ret", "step"] + (["get", "set"] if l is not None else [])
    if depth > 0:
        options += ["bind", "new", "case", "beta", "unfold"]
    choice = rng.choice(options)
    if choice == "ret":
        return Tm.ret(nat_value(rng))
    if choice == "step":
        return Tm.seq(Tm.step(), random_program(rng, heap_size, depth - 1) if depth else
                      Tm.ret(nat_value(rng)))
    if choice == "get":
        return Tm.get(l)
    if choice == "set":
        rest = random_program(rng, heap_size, depth - 1) if depth else Tm.get(l)
        return Tm.seq(Tm.set(l, nat_value(rng)), rest)
    if choice == "bind":
        return Tm.bind(random_program(rng, heap_size, depth - 1), _cont(rng, heap_size))
    if choice == "new":
        return Tm.bind(Tm.new(nat_value(rng)), Tm.get(Tm.var(0, "r")), "r")
    if choice == "case":
        sum_ty = Ty.sum(NAT, Ty.unit())
        scrut = Tm.inl(sum_ty, nat_value(rng)) if rng.random() < 0.5 else Tm.inr(sum_ty, Tm.unit())
        left = _cont(rng, heap_size)
        right = shift_tm(random_program(rng, heap_size, depth - 1), 1)
        return Tm.case(scrut, left, right)
    if choice == "beta":
        return Tm.app(Tm.lam(NAT, _cont(rng, heap_size)), nat_value(rng))
    payload = random_value(rng, instantiate_ty(NAT_LIST.args[0], NAT_LIST), 2)
    unrolled = Tm.unfold(Tm.fold(NAT_LIST, payload))
    head = Tm.case(Tm.var(0), Tm.ret(Tm.nat(0)), Tm.ret(Tm.fst(Tm.var(0))), ("u", "p"))
    return Tm.bind(unrolled, head, "z")


def _on_unrolled(rng: random.Random) -> Tuple[Tm, Tm]:
    """``fold`` payload of ``NAT_LIST`` and a continuation inspecting it."""
    payload = random_value(rng, instantiate_ty(NAT_LIST.args[0], NAT_LIST), 2)
    k = Tm.case(Tm.var(0), Tm.ret(Tm.nat(rng.randint(0, MAX_NAT))), Tm.ret(Tm.fst(Tm.var(0))),
                ("u", "p"))
    return payload, k


def rule_instance(rule: str, rng: random.Random, heap_size: int) -> Tm:
    """A ground left-hand side for the rewrite ``rule`` over nat cells."""
    l, l2 = location(rng, heap_size), location(rng, heap_size)
    v, w = nat_value(rng), nat_value(rng)
    tail = rng.random() < 0.5
    if rule == "unfold-of-fold":
        payload, k = _on_unrolled(rng)
        redex = Tm.unfold(Tm.fold(NAT_LIST, payload))
        return Tm.bind(redex, k, "z") if tail else redex
    if rule == "fold-of-unfold":
        payload, _ = _on_unrolled(rng)
        return Tm.bind(Tm.unfold(Tm.fold(NAT_LIST, payload)), Tm.ret(Tm.fold(NAT_LIST, Tm.var(0))), "z")
    if rule == "get-after-set":
        rest = Tm.bind(Tm.get(l), _cont(rng, heap_size)) if tail else Tm.get(l)
        return Tm.seq(Tm.set(l, v), rest)
    if rule == "set-after-new":
        k = Tm.get(Tm.var(1, "r")) if tail else Tm.bind(Tm.get(Tm.var(1, "r")), Tm.ret(Tm.succ(Tm.var(0))))
        return Tm.bind(Tm.new(v), Tm.bind(Tm.set(Tm.var(0, "r"), w), k, "_"), "r")
    if rule == "set-after-set":
        rest = Tm.seq(Tm.set(l, w), Tm.get(l2)) if tail else Tm.set(l, w)
        return Tm.seq(Tm.set(l, v), rest)
    if rule == "get-after-get":
        k = Tm.ret(Tm.pair(Tm.var(1), Tm.var(0))) if tail else Tm.ret(Tm.var(rng.randrange(2)))
        return Tm.bind(Tm.get(l), Tm.bind(Tm.get(l2), k, "y"), "x")
    if rule == "set-after-get":
        k = Tm.ret(Tm.succ(Tm.var(1))) if tail else Tm.get(l2)
        return Tm.bind(Tm.get(l), Tm.bind(Tm.set(l, Tm.var(0)), k, "_"), "x")
    if rule.startswith("step-commute-"):
        op_name = rule[len("step-commute-"):]
        if op_name == "get":
            op, k = Tm.get(l), _cont(rng, heap_size)
        elif op_name == "set":
            op, k = Tm.set(l, v), Tm.get(l2)
        elif op_name == "new":
            op, k = Tm.new(v), Tm.get(Tm.var(0, "r"))
        elif op_name == "unfold":
            payload, k = _on_unrolled(rng)
            op = Tm.unfold(Tm.fold(NAT_LIST, payload))
        else:
            op = random_program(rng, heap_size, 1)
            k = _cont(rng, heap_size)
        if op_name in ("get", "bind") and not tail:
            return Tm.bind(op, Tm.step())
        return Tm.bind(op, Tm.seq(Tm.step(), k))
    raise ValueError(f"no instance generator for rule {rule!r}")


def law_instance(law: str, rng: random.Random, heap_size: int) -> Tuple[Tm, Tm]:
    """Both sides of a ground instance of a monad or beta law."""
    if law == "monad-left-unit":
        v, k = nat_value(rng), _cont(rng, heap_size)
        return Tm.bind(Tm.ret(v), k), instantiate_tm(k, v)
    if law == "monad-right-unit":
        m = random_program(rng, heap_size, 2)
        return Tm.bind(m, Tm.ret(Tm.var(0))), m
    if law == "monad-assoc":
        m, f, g = random_program(rng, heap_size, 1), _cont(rng, heap_size), _cont(rng, heap_size)
        return Tm.bind(Tm.bind(m, f), g), Tm.bind(m, Tm.bind(f, shift_tm(g, 1, 1)))
    if law == "forall-beta":
        body = Tm.lam(Ty.var(0, "a"), Tm.bind(random_program(rng, heap_size, 1), Tm.ret(Tm.var(1))))
        v = nat_value(rng)
        return Tm.app(Tm.tyapp(Tm.tylam(body), NAT), v), Tm.app(instantiate_tm_type(body, NAT), v)
    if law == "exists-beta":
        alpha = Ty.var(0, "a")
        ex = Ty.exists(Ty.prod(alpha, Ty.arrow(alpha, NAT)))
        impl = Tm.pair(nat_value(rng), Tm.lam(NAT, Tm.succ(Tm.var(0))))
        body = Tm.bind(random_program(rng, heap_size, 1),
                       Tm.ret(Tm.app(Tm.snd(Tm.var(1)), Tm.fst(Tm.var(1)))), "y")
        lhs = Tm.unpack(Tm.pack(ex, NAT, impl), body)
        return lhs, instantiate_tm(instantiate_tm_type(body, NAT), impl)
    raise ValueError(f"no instance generator for law {law!r}")


# ----------------------------------------------------------------------------
# Pure terms with redexes

_PURE_TYPES = (Ty.unit(), NAT, Ty.prod(NAT, NAT), Ty.sum(NAT, Ty.unit()), Ty.arrow(NAT, NAT),
               Ty.list(NAT))


def _canonical(rng: random.Random, ty: Ty, env: Sequence[Ty], depth: int) -> Tm:
    k = ty.kind
    if k is TyKind.ARROW:
        return Tm.lam(ty.args[0], random_term(rng, ty.args[1], depth - 1, (ty.args[0],) + tuple(env)))
    if k is TyKind.T:
        return Tm.ret(random_term(rng, ty.args[0], depth - 1, env))
    if k is TyKind.PROD:
        return Tm.pair(random_term(rng, ty.args[0], depth - 1, env),
                       random_term(rng, ty.args[1], depth - 1, env))
    if k is TyKind.NAT and depth > 0 and rng.random() < 0.3:
        return Tm.succ(random_term(rng, NAT, depth - 1, env))
    return random_value(rng, ty, 1)


def random_term(rng: random.Random, ty: Ty, depth: int = 3, env: Sequence[Ty] = ()) -> Tm:
    """A well-typed term of ``ty`` in ``env`` (index 0 first), rich in
    beta, projection, case and recursor redexes."""
    candidates = [i for i, a in enumerate(env) if a == ty]
    if depth <= 0:
        if candidates and rng.random() < 0.5:
            return Tm.var(rng.choice(candidates))
        return _canonical(rng, ty, env, 0)
    choice = rng.randrange(8)
    inner = depth - 1
    if choice == 0 and candidates:
        return Tm.var(rng.choice(candidates))
    if choice == 1:
        a = rng.choice(_PURE_TYPES[:4])
        body = random_term(rng, ty, inner, (a,) + tuple(env))
        return Tm.app(Tm.lam(a, body), random_term(rng, a, inner, env))
    if choice == 2:
        other = rng.choice(_PURE_TYPES[:3])
        if rng.random() < 0.5:
            return Tm.fst(Tm.pair(random_term(rng, ty, inner, env), random_term(rng, other, inner, env)))
        return Tm.snd(Tm.pair(random_term(rng, other, inner, env), random_term(rng, ty, inner, env)))
    if choice == 3:
        sum_ty = Ty.sum(NAT, Ty.unit())
        scrut = random_term(rng, sum_ty, inner, env)
        left = random_term(rng, ty, inner, (NAT,) + tuple(env))
        right = random_term(rng, ty, inner, (Ty.unit(),) + tuple(env))
        return Tm.case(scrut, left, right)
    if choice == 4:
        n = Tm.nat(rng.randint(0, MAX_NAT))
        step = random_term(rng, ty, inner, (ty, NAT) + tuple(env))
        return Tm.natrec(ty, n, random_term(rng, ty, inner, env), step)
    if choice == 5:
        xs = random_value(rng, Ty.list(NAT), 2)
        step = random_term(rng, ty, inner, (ty, Ty.list(NAT), NAT) + tuple(env))
        return Tm.listrec(ty, xs, random_term(rng, ty, inner, env), step)
    if choice == 6 and ty.kind is TyKind.T:
        a = rng.choice(_PURE_TYPES[:3])
        first = random_term(rng, Ty.t(a), inner, env)
        return Tm.bind(first, random_term(rng, ty, inner, (a,) + tuple(env)))
    return _canonical(rng, ty, env, depth)


def random_pure_type(rng: random.Random) -> Ty:
    return rng.choice(_PURE_TYPES + (Ty.t(NAT),))


_TYPE_FORMERS = (Ty.prod, Ty.sum, Ty.arrow, Ty.list, Ty.ref, Ty.t, Ty.mu, Ty.forall, Ty.exists)


def random_type(rng: random.Random, depth: int = 3, scope: int = 0) -> Ty:
    """A type over ``scope`` free variables, binders included. No
    well-formedness is promised (``mu`` bodies may be negative)."""
    if depth <= 0 or rng.random() < 0.2:
        leaves = [Ty.unit(), NAT] + [Ty.var(i) for i in range(scope)]
        return rng.choice(leaves)
    former = rng.choice(_TYPE_FORMERS)
    if former in (Ty.prod, Ty.sum, Ty.arrow):
        return former(random_type(rng, depth - 1, scope), random_type(rng, depth - 1, scope))
    if former in (Ty.mu, Ty.forall, Ty.exists):
        return former(random_type(rng, depth - 1, scope + 1))
    return former(random_type(rng, depth - 1, scope))


def beta_expand(rng: random.Random, t: Tm, ty: Ty) -> Tm:
    """A term convertible with ``t`` (one extra redex at the root)."""
    choice = rng.randrange(3)
    if choice == 0:
        return Tm.app(Tm.lam(NAT, shift_tm(t, 1)), nat_value(rng))
    if choice == 1:
        return Tm.fst(Tm.pair(t, Tm.unit()))
    if ty.kind is TyKind.T:
        return Tm.bind(t, Tm.ret(Tm.var(0)))
    return Tm.snd(Tm.pair(nat_value(rng), t))
