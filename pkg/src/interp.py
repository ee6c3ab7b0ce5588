"""Fuel-counted reference interpreter for closed monadic programs.

Pure subterms are evaluated by normalisation; the interpreter only walks the
monadic spine. Fuel is one countdown shared by the whole run: ``get``,
``unfold`` and ``step`` each cost one unit and everything else is free, so a
run with fuel ``n`` is ``OutOfFuel`` exactly when it needs more than ``n``
units.
"""

import asyncio
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from src import conv
from src.conv import normalize
from src.syntax import (
    Ctx, LmrError, Tm, TmKind, Ty, TyKind, instantiate_tm, instantiate_tm_type, instantiate_ty,
)
from src.typeck import TypeCheckError, check_value, infer_tm

logger = logging.getLogger(__name__)

Fragment = Mapping[int, Tm]


class HeapError(LmrError):
    """Bad interpreter input: overlapping or gapped heap fragments, a dangling
    location, or a program that is not a closed monadic term."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        self.message = message
        super().__init__(f"{kind}: {message}")


def show_value(v: Tm) -> str:
    from src.surface import pretty_tm
    return pretty_tm(v)


@dataclass(frozen=True)
class Heap:
    """Cells ``0 .. next_fresh - 1``; each holds a closed normal value."""
    cells: Tuple[Tm, ...] = ()

    @property
    def next_fresh(self) -> int:
        return len(self.cells)

    def read(self, i: int) -> Tm:
        if not 0 <= i < len(self.cells):
            raise HeapError("dangling", f"read of unallocated location {i}")
        return self.cells[i]

    def write(self, i: int, v: Tm) -> "Heap":
        if not 0 <= i < len(self.cells):
            raise HeapError("dangling", f"write to unallocated location {i}")
        return Heap(self.cells[:i] + (v,) + self.cells[i + 1:])

    def alloc(self, v: Tm) -> Tuple["Heap", int]:
        return Heap(self.cells + (v,)), len(self.cells)

    def as_fragment(self) -> Dict[int, Tm]:
        return dict(enumerate(self.cells))

    def without(self, indices: Iterable[int]) -> Dict[int, Tm]:
        drop = set(indices)
        return {i: v for i, v in enumerate(self.cells) if i not in drop}

    @classmethod
    def of(cls, *values: Tm) -> "Heap":
        return cls(tuple(normalize(v) for v in values))

    @classmethod
    def compose(cls, *fragments: Fragment) -> "Heap":
        """Disjoint union of fragments; the union must cover ``0 .. n-1``."""
        merged: Dict[int, Tm] = {}
        for frag in fragments:
            for i, v in frag.items():
                if i in merged:
                    raise HeapError("overlap", f"location {i} is owned by two fragments")
                merged[i] = v
        if sorted(merged) != list(range(len(merged))):
            raise HeapError("gap", f"fragments cover {sorted(merged)}, not a prefix of the heap")
        return cls(tuple(normalize(merged[i]) for i in range(len(merged))))

    def __str__(self) -> str:
        return show_fragment(self.as_fragment())


def show_fragment(frag: Fragment) -> str:
    return "{" + ", ".join(f"{i}↦{show_value(frag[i])}" for i in sorted(frag)) + "}"


@dataclass(frozen=True)
class Done:
    value: Tm
    heap: Heap
    steps: int

    def __str__(self) -> str:
        return f"Done value={show_value(self.value)} heap={self.heap} steps={self.steps}"


@dataclass(frozen=True)
class OutOfFuel:
    def __str__(self) -> str:
        return "OutOfFuel"


Observation = Union[Done, OutOfFuel]


@dataclass(frozen=True)
class Costs:
    get: int = 1
    unfold: int = 1
    step: int = 1


DEFAULT_COSTS = Costs()

# mutation profiles for testing the law suite itself
FAULTS: Dict[str, Costs] = {"get-free": Costs(get=0)}


@dataclass(frozen=True)
class TraceEvent:
    index: int
    op: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.index}] {self.op} {self.detail}".rstrip()


def _loc(t: Tm, op: str) -> int:
    if t.kind is not TmKind.LOC:
        raise HeapError("stuck", f"{op} of a non-location {show_value(t)}")
    return t.args[1]


def eval_program(e: Tm, heap: Heap = Heap(), fuel: int = 50, costs: Costs = DEFAULT_COSTS,
                 trace: Optional[List[TraceEvent]] = None) -> Observation:
    """Run ``e`` (closed, of type ``T A``) on ``heap`` with ``fuel`` units."""
    term = normalize(e)
    conts: List[Tm] = []
    used = 0

    def charge(op: str, cost: int, detail: str = "") -> bool:
        nonlocal used
        if used + cost > fuel:
            return False
        used += cost
        if trace is not None and cost:
            trace.append(TraceEvent(used, op, detail))
        return True

    while True:
        k = term.kind
        if k is TmKind.BIND:
            conts.append(term.args[1])
            term = term.args[0]
            continue
        if k is TmKind.RET:
            value = term.args[0]
        elif k is TmKind.GET:
            i = _loc(term.args[0], "get")
            if not charge("get", costs.get, f"loc {i}"):
                return OutOfFuel()
            value = heap.read(i)
        elif k is TmKind.SET:
            heap = heap.write(_loc(term.args[0], "set"), term.args[1])
            value = Tm.unit()
        elif k is TmKind.NEW:
            try:
                elem = infer_tm(Ctx(), term.args[0])
            except TypeCheckError as exc:
                raise HeapError("ill-typed", f"new of an ill-typed value: {exc}")
            heap, i = heap.alloc(term.args[0])
            value = Tm.loc(elem, i)
        elif k is TmKind.STEP:
            if not charge("step", costs.step):
                return OutOfFuel()
            value = Tm.unit()
        elif k is TmKind.UNFOLD:
            folded = term.args[0]
            if folded.kind is not TmKind.FOLD:
                raise HeapError("stuck", f"unfold of a non-fold {show_value(folded)}")
            if not charge("unfold", costs.unfold):
                return OutOfFuel()
            value = folded.args[1]
        else:
            raise HeapError("stuck", f"not a monadic computation: {k.value}")
        if not conts:
            return Done(value, heap, used)
        term = normalize(instantiate_tm(conts.pop(), value))


def result_type(e: Tm) -> Ty:
    """``A`` for a closed program of type ``T A``."""
    try:
        ty = infer_tm(Ctx(), e)
    except TypeCheckError as exc:
        raise HeapError("ill-typed", str(exc))
    if ty.kind is not TyKind.T:
        raise HeapError("ill-typed", "the program is not a computation of type T A")
    return ty.args[0]


def value_has_type(v: Tm, a: Ty) -> bool:
    try:
        check_value(v, a)
    except (TypeCheckError, LmrError):
        return False
    return True


# ----------------------------------------------------------------------------
# Observational equivalence

@dataclass(frozen=True)
class Counterexample:
    heap: Heap
    fuel: int
    obs1: Observation
    obs2: Observation

    def to_json(self) -> dict:
        return {"heap": str(self.heap), "fuel": self.fuel,
                "obs1": str(self.obs1), "obs2": str(self.obs2)}


def _at_fuel(obs: Observation, n: int) -> Observation:
    if isinstance(obs, Done) and obs.steps <= n:
        return obs
    return OutOfFuel()


def _first_difference(o1: Observation, o2: Observation, fuel_max: int) -> Optional[int]:
    """Least fuel at which runs observed at ``fuel_max`` differ."""
    if o1 == o2:
        return None
    if isinstance(o1, Done) and isinstance(o2, Done):
        if o1.steps != o2.steps:
            return min(o1.steps, o2.steps)
        return o1.steps
    done = o1 if isinstance(o1, Done) else o2
    return done.steps if done.steps <= fuel_max else fuel_max


def obs_equiv(e1: Tm, e2: Tm, heaps: Iterable[Heap], fuel_max: int = 50,
              costs: Costs = DEFAULT_COSTS, exhaustive: bool = False) -> Optional[Counterexample]:
    """``None`` when the programs agree on every heap and every fuel up to
    ``fuel_max``; otherwise the first distinguishing heap and fuel."""
    for heap in heaps:
        if exhaustive:
            for n in range(fuel_max + 1):
                o1 = eval_program(e1, heap, n, costs)
                o2 = eval_program(e2, heap, n, costs)
                if o1 != o2:
                    return Counterexample(heap, n, o1, o2)
            continue
        o1 = eval_program(e1, heap, fuel_max, costs)
        o2 = eval_program(e2, heap, fuel_max, costs)
        n = _first_difference(o1, o2, fuel_max)
        if n is not None:
            return Counterexample(heap, n, _at_fuel(o1, n), _at_fuel(o2, n))
    return None


# ----------------------------------------------------------------------------
# Weakest preconditions over frames

@dataclass(frozen=True)
class WpOutcome:
    ok: bool
    frame: Optional[Dict[int, Tm]] = None
    observation: Optional[Observation] = None
    reason: str = ""


Post = Callable[[Tm, Dict[int, Tm]], bool]


def wp_check(e: Tm, pre: Fragment, frames: Iterable[Fragment], post: Post,
             fuel: int = 50, costs: Costs = DEFAULT_COSTS) -> WpOutcome:
    """Run ``e`` from ``pre`` joined with each frame. Every finished run must
    leave the frame untouched and satisfy ``post`` on what remains; running
    out of fuel passes."""
    for frame in frames:
        overlap = set(pre) & set(frame)
        if overlap:
            raise HeapError("overlap", f"frame shares location(s) {sorted(overlap)} with the precondition")
        frame = dict(frame)
        obs = eval_program(e, Heap.compose(pre, frame), fuel, costs)
        if isinstance(obs, OutOfFuel):
            continue
        after = obs.heap.as_fragment()
        for i, v in frame.items():
            if after[i] != normalize(v):
                return WpOutcome(False, frame, obs, f"frame location {i} was modified")
        if not post(obs.value, obs.heap.without(frame)):
            return WpOutcome(False, frame, obs, "postcondition failed")
    return WpOutcome(True)


# ----------------------------------------------------------------------------
# Law suite

@dataclass
class Failure:
    term1: str
    term2: str
    example: Counterexample

    def to_json(self) -> dict:
        out = {"term1": self.term1, "term2": self.term2}
        out.update(self.example.to_json())
        return out


@dataclass
class RuleReport:
    rule: str
    instances: int = 0
    passes: int = 0
    failures: List[Failure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"rule": self.rule, "instances": self.instances, "passes": self.passes,
                "failures": [f.to_json() for f in self.failures]}


@dataclass
class LawReport:
    seed: int
    instances: int
    fuel: int
    rules: List[RuleReport] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rules)

    def failing(self) -> List[str]:
        return [r.rule for r in self.rules if not r.ok]

    def to_json(self) -> dict:
        return {"seed": self.seed, "instances": self.instances, "fuel": self.fuel,
                "ok": self.ok, "warnings": list(self.warnings),
                "rules": [r.to_json() for r in self.rules]}


MONAD_LAWS = ("monad-left-unit", "monad-right-unit", "monad-assoc")
BETA_LAWS = ("forall-beta", "exists-beta")
LAW_CATALOG: Tuple[str, ...] = tuple(conv.EFFECT_RULES) + MONAD_LAWS + BETA_LAWS


def _instance_pair(law: str, rng: random.Random, heap_size: int) -> Tuple[Tm, Tm]:
    from src import generators

    if law in conv.RULES:
        lhs = generators.rule_instance(law, rng, heap_size)
        return lhs, conv.rewrite(lhs, None, law, "forward")
    return generators.law_instance(law, rng, heap_size)


def check_rule(law: str, seed: int, instances: int, fuel: int,
               costs: Costs = DEFAULT_COSTS, heaps_per_instance: int = 6) -> RuleReport:
    """Generate ``instances`` ground instances of one law and compare both sides."""
    from src import generators
    from src.surface import pretty_tm

    rng = random.Random(f"{seed}:{law}")
    report = RuleReport(law)
    for _ in range(instances):
        heap_size = rng.randint(1, generators.MAX_CELLS)
        lhs, rhs = _instance_pair(law, rng, heap_size)
        heaps = generators.nat_heaps(rng, heap_size, heaps_per_instance)
        report.instances += 1
        example = obs_equiv(lhs, rhs, heaps, fuel, costs)
        if example is None:
            report.passes += 1
        else:
            report.failures.append(Failure(pretty_tm(lhs), pretty_tm(rhs), example))
    logger.debug("law %s: %d/%d", law, report.passes, report.instances)
    return report


async def law_suite_async(seed: int = 0, instances: int = 20, fuel: int = 50,
                          costs: Costs = DEFAULT_COSTS, workers: int = 4,
                          heaps_per_instance: int = 6,
                          laws: Sequence[str] = LAW_CATALOG) -> LawReport:
    semaphore = asyncio.Semaphore(max(1, workers))

    async def one(law: str) -> RuleReport:
        async with semaphore:
            return await asyncio.to_thread(check_rule, law, seed, instances, fuel, costs,
                                           heaps_per_instance)

    reports = await asyncio.gather(*(one(law) for law in laws))
    report = LawReport(seed, instances, fuel, list(reports))
    if instances == 0:
        message = "no instances requested; every law passes vacuously"
        logger.warning(message)
        report.warnings.append(message)
    return report


def law_suite(seed: int = 0, instances: int = 20, fuel: int = 50,
              costs: Costs = DEFAULT_COSTS, workers: int = 4,
              heaps_per_instance: int = 6) -> LawReport:
    return asyncio.run(law_suite_async(seed, instances, fuel, costs, workers, heaps_per_instance))


# ----------------------------------------------------------------------------
# `law` declarations

def close_law(lhs: Tm, rhs: Tm, n_params: int) -> Tuple[Tm, Tm]:
    """Type parameters of a ``law`` are instantiated with ``nat``."""
    for _ in range(n_params):
        lhs = instantiate_tm_type(lhs, Ty.nat())
        rhs = instantiate_tm_type(rhs, Ty.nat())
    return lhs, rhs


def check_law_decl(lhs: Tm, rhs: Tm, ty: Ty, fuel: int, n_params: int = 0, seed: int = 0,
                   heaps: int = 6) -> Optional[Counterexample]:
    from src import generators

    lhs, rhs = close_law(lhs, rhs, n_params)
    for _ in range(n_params):
        ty = instantiate_ty(ty, Ty.nat())
    if ty.kind is not TyKind.T:
        raise HeapError("ill-typed", "a law relates programs; its type must be T A")
    for side in (lhs, rhs):
        if not value_has_type(side, ty):
            raise HeapError("ill-typed", "a side of the law does not have its declared type")
    rng = random.Random(f"{seed}:law")
    return obs_equiv(lhs, rhs, generators.heaps_for((lhs, rhs), rng, heaps), fuel)
