"""Nameless abstract syntax for types, terms and contexts.

Types and terms are immutable trees. Bound variables are de Bruijn indices;
surface names survive only as display hints (``names``), which never take
part in equality, so ``==`` on two nodes is alpha-equivalence.

Type variables and element variables live in separate index spaces. A term
node records, per child, how many type binders and how many element binders
it opens (see ``SCHEMA``); every traversal in this module is driven by that
table.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterator, Optional, Sequence


# ----------------------------------------------------------------------------
# Errors

class LmrError(Exception):
    """Base class for every error raised by the checker."""


class ScopeError(LmrError):
    """Ill-scoped input reached an operation that assumes well-scopedness."""


@dataclass(frozen=True)
class Span:
    file: str
    start: int
    end: int
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


# ----------------------------------------------------------------------------
# Types

class TypeFlag(Enum):
    PROGRAM = "program"
    LOGICAL = "logical"


class TyKind(Enum):
    VAR = "var"
    UNIT = "unit"
    EMPTY = "empty"
    PROD = "prod"
    SUM = "sum"
    ARROW = "arrow"
    NAT = "nat"
    LIST = "list"
    MU = "mu"
    FORALL = "forall"
    EXISTS = "exists"
    REF = "ref"
    T = "T"
    PROP = "prop"


TY_BINDERS = frozenset({TyKind.MU, TyKind.FORALL, TyKind.EXISTS})


@dataclass(frozen=True)
class Ty:
    kind: TyKind
    args: tuple = ()
    names: tuple = field(default=(), compare=False, repr=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    _hash: list = field(default_factory=list, compare=False, repr=False)

    def __hash__(self) -> int:
        if not self._hash:
            self._hash.append(hash((self.kind, self.args)))
        return self._hash[0]

    # builders
    @classmethod
    def var(cls, i: int, name: str = "") -> "Ty":
        return cls(TyKind.VAR, (i,), (name,) if name else ())

    @classmethod
    def unit(cls) -> "Ty":
        return cls(TyKind.UNIT)

    @classmethod
    def empty(cls) -> "Ty":
        return cls(TyKind.EMPTY)

    @classmethod
    def nat(cls) -> "Ty":
        return cls(TyKind.NAT)

    @classmethod
    def prop(cls) -> "Ty":
        return cls(TyKind.PROP)

    @classmethod
    def prod(cls, a: "Ty", b: "Ty") -> "Ty":
        return cls(TyKind.PROD, (a, b))

    @classmethod
    def sum(cls, a: "Ty", b: "Ty") -> "Ty":
        return cls(TyKind.SUM, (a, b))

    @classmethod
    def arrow(cls, a: "Ty", b: "Ty") -> "Ty":
        return cls(TyKind.ARROW, (a, b))

    @classmethod
    def list(cls, a: "Ty") -> "Ty":
        return cls(TyKind.LIST, (a,))

    @classmethod
    def ref(cls, a: "Ty") -> "Ty":
        return cls(TyKind.REF, (a,))

    @classmethod
    def t(cls, a: "Ty") -> "Ty":
        return cls(TyKind.T, (a,))

    @classmethod
    def mu(cls, body: "Ty", name: str = "r") -> "Ty":
        return cls(TyKind.MU, (body,), (name,))

    @classmethod
    def forall(cls, body: "Ty", name: str = "a") -> "Ty":
        return cls(TyKind.FORALL, (body,), (name,))

    @classmethod
    def exists(cls, body: "Ty", name: str = "a") -> "Ty":
        return cls(TyKind.EXISTS, (body,), (name,))

    @property
    def body(self) -> "Ty":
        return self.args[0]


# ----------------------------------------------------------------------------
# Terms

class TmKind(Enum):
    VAR = "var"
    UNIT = "unit"
    PAIR = "pair"
    FST = "fst"
    SND = "snd"
    INL = "inl"
    INR = "inr"
    CASE = "case"
    ABSURD = "absurd"
    LAM = "lam"
    APP = "app"
    TYLAM = "tylam"
    TYAPP = "tyapp"
    PACK = "pack"
    UNPACK = "unpack"
    FOLD = "fold"
    UNFOLD = "unfold"
    RET = "ret"
    BIND = "bind"
    GET = "get"
    SET = "set"
    NEW = "new"
    STEP = "step"
    ZERO = "zero"
    SUCC = "succ"
    NATREC = "natrec"
    NIL = "nil"
    CONS = "cons"
    LISTREC = "listrec"
    LOC = "loc"
    # propositions
    EQ = "eq"
    TOP = "top"
    BOT = "bot"
    AND = "and"
    OR = "or"
    IMPLIES = "implies"
    FORALLP = "forallp"
    EXISTSP = "existsp"
    SEP = "sep"
    WAND = "wand"
    BOX = "box"
    LATER = "later"
    POINTSTO = "pointsto"
    WP = "wp"


@dataclass(frozen=True)
class Child:
    sort: str  # "tm", "ty" or "int"
    ty_binders: int = 0
    tm_binders: int = 0


_TM = Child("tm")
_TY = Child("ty")
_INT = Child("int")

SCHEMA: dict[TmKind, tuple[Child, ...]] = {
    TmKind.VAR: (_INT,),
    TmKind.UNIT: (),
    TmKind.PAIR: (_TM, _TM),
    TmKind.FST: (_TM,),
    TmKind.SND: (_TM,),
    TmKind.INL: (_TY, _TM),
    TmKind.INR: (_TY, _TM),
    TmKind.CASE: (_TM, Child("tm", 0, 1), Child("tm", 0, 1)),
    TmKind.ABSURD: (_TY, _TM),
    TmKind.LAM: (_TY, Child("tm", 0, 1)),
    TmKind.APP: (_TM, _TM),
    TmKind.TYLAM: (Child("tm", 1, 0),),
    TmKind.TYAPP: (_TM, _TY),
    TmKind.PACK: (_TY, _TY, _TM),
    TmKind.UNPACK: (_TM, Child("tm", 1, 1)),
    TmKind.FOLD: (_TY, _TM),
    TmKind.UNFOLD: (_TM,),
    TmKind.RET: (_TM,),
    TmKind.BIND: (_TM, Child("tm", 0, 1)),
    TmKind.GET: (_TM,),
    TmKind.SET: (_TM, _TM),
    TmKind.NEW: (_TM,),
    TmKind.STEP: (),
    TmKind.ZERO: (),
    TmKind.SUCC: (_TM,),
    TmKind.NATREC: (_TY, _TM, _TM, Child("tm", 0, 2)),
    TmKind.NIL: (_TY,),
    TmKind.CONS: (_TM, _TM),
    TmKind.LISTREC: (_TY, _TM, _TM, Child("tm", 0, 3)),
    TmKind.LOC: (_TY, _INT),
    TmKind.EQ: (_TY, _TM, _TM),
    TmKind.TOP: (),
    TmKind.BOT: (),
    TmKind.AND: (_TM, _TM),
    TmKind.OR: (_TM, _TM),
    TmKind.IMPLIES: (_TM, _TM),
    TmKind.FORALLP: (_TY, Child("tm", 0, 1)),
    TmKind.EXISTSP: (_TY, Child("tm", 0, 1)),
    TmKind.SEP: (_TM, _TM),
    TmKind.WAND: (_TM, _TM),
    TmKind.BOX: (_TM,),
    TmKind.LATER: (_TM,),
    TmKind.POINTSTO: (_TY, _TM, _TM),
    TmKind.WP: (_TY, _TM, Child("tm", 0, 1)),
}

PROP_KINDS = frozenset({
    TmKind.EQ, TmKind.TOP, TmKind.BOT, TmKind.AND, TmKind.OR, TmKind.IMPLIES,
    TmKind.FORALLP, TmKind.EXISTSP, TmKind.SEP, TmKind.WAND, TmKind.BOX,
    TmKind.LATER, TmKind.POINTSTO, TmKind.WP,
})


@dataclass(frozen=True)
class Tm:
    kind: TmKind
    args: tuple = ()
    names: tuple = field(default=(), compare=False, repr=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    _hash: list = field(default_factory=list, compare=False, repr=False)

    def __hash__(self) -> int:
        if not self._hash:
            self._hash.append(hash((self.kind, self.args)))
        return self._hash[0]

    # builders -------------------------------------------------------------
    @classmethod
    def var(cls, i: int, name: str = "") -> "Tm":
        return cls(TmKind.VAR, (i,), (name,) if name else ())

    @classmethod
    def unit(cls) -> "Tm":
        return cls(TmKind.UNIT)

    @classmethod
    def pair(cls, a: "Tm", b: "Tm") -> "Tm":
        return cls(TmKind.PAIR, (a, b))

    @classmethod
    def fst(cls, a: "Tm") -> "Tm":
        return cls(TmKind.FST, (a,))

    @classmethod
    def snd(cls, a: "Tm") -> "Tm":
        return cls(TmKind.SND, (a,))

    @classmethod
    def inl(cls, sum_ty: Ty, a: "Tm") -> "Tm":
        return cls(TmKind.INL, (sum_ty, a))

    @classmethod
    def inr(cls, sum_ty: Ty, a: "Tm") -> "Tm":
        return cls(TmKind.INR, (sum_ty, a))

    @classmethod
    def case(cls, scrut: "Tm", left: "Tm", right: "Tm",
             names: tuple = ("x", "y")) -> "Tm":
        return cls(TmKind.CASE, (scrut, left, right), names)

    @classmethod
    def absurd(cls, ty: Ty, a: "Tm") -> "Tm":
        return cls(TmKind.ABSURD, (ty, a))

    @classmethod
    def lam(cls, ty: Ty, body: "Tm", name: str = "x") -> "Tm":
        return cls(TmKind.LAM, (ty, body), (name,))

    @classmethod
    def app(cls, f: "Tm", *args: "Tm") -> "Tm":
        for a in args:
            f = cls(TmKind.APP, (f, a))
        return f

    @classmethod
    def tylam(cls, body: "Tm", name: str = "a") -> "Tm":
        return cls(TmKind.TYLAM, (body,), (name,))

    @classmethod
    def tyapp(cls, f: "Tm", ty: Ty) -> "Tm":
        return cls(TmKind.TYAPP, (f, ty))

    @classmethod
    def pack(cls, ex_ty: Ty, witness: Ty, a: "Tm") -> "Tm":
        return cls(TmKind.PACK, (ex_ty, witness, a))

    @classmethod
    def unpack(cls, a: "Tm", body: "Tm", names: tuple = ("a", "x")) -> "Tm":
        return cls(TmKind.UNPACK, (a, body), names)

    @classmethod
    def fold(cls, mu_ty: Ty, a: "Tm") -> "Tm":
        return cls(TmKind.FOLD, (mu_ty, a))

    @classmethod
    def unfold(cls, a: "Tm") -> "Tm":
        return cls(TmKind.UNFOLD, (a,))

    @classmethod
    def ret(cls, a: "Tm") -> "Tm":
        return cls(TmKind.RET, (a,))

    @classmethod
    def bind(cls, m: "Tm", body: "Tm", name: str = "x") -> "Tm":
        return cls(TmKind.BIND, (m, body), (name,))

    @classmethod
    def seq(cls, m: "Tm", rest: "Tm") -> "Tm":
        """``m; rest`` -- bind with a discarded binder; ``rest`` is unshifted."""
        return cls(TmKind.BIND, (m, shift_tm(rest, 1)), ("_",))

    @classmethod
    def get(cls, a: "Tm") -> "Tm":
        return cls(TmKind.GET, (a,))

    @classmethod
    def set(cls, loc: "Tm", a: "Tm") -> "Tm":
        return cls(TmKind.SET, (loc, a))

    @classmethod
    def new(cls, a: "Tm") -> "Tm":
        return cls(TmKind.NEW, (a,))

    @classmethod
    def step(cls) -> "Tm":
        return cls(TmKind.STEP)

    @classmethod
    def zero(cls) -> "Tm":
        return cls(TmKind.ZERO)

    @classmethod
    def succ(cls, a: "Tm") -> "Tm":
        return cls(TmKind.SUCC, (a,))

    @classmethod
    def nat(cls, n: int) -> "Tm":
        t = cls.zero()
        for _ in range(n):
            t = cls.succ(t)
        return t

    @classmethod
    def natrec(cls, motive: Ty, n: "Tm", z: "Tm", s: "Tm",
               names: tuple = ("n", "r")) -> "Tm":
        return cls(TmKind.NATREC, (motive, n, z, s), names)

    @classmethod
    def nil(cls, elem: Ty) -> "Tm":
        return cls(TmKind.NIL, (elem,))

    @classmethod
    def cons(cls, head: "Tm", tail: "Tm") -> "Tm":
        return cls(TmKind.CONS, (head, tail))

    @classmethod
    def listrec(cls, motive: Ty, xs: "Tm", on_nil: "Tm", on_cons: "Tm",
                names: tuple = ("x", "xs", "r")) -> "Tm":
        return cls(TmKind.LISTREC, (motive, xs, on_nil, on_cons), names)

    @classmethod
    def loc(cls, ty: Ty, n: int) -> "Tm":
        return cls(TmKind.LOC, (ty, n))

    @classmethod
    def eq(cls, ty: Optional[Ty], a: "Tm", b: "Tm") -> "Tm":
        return cls(TmKind.EQ, (ty, a, b))

    @classmethod
    def top(cls) -> "Tm":
        return cls(TmKind.TOP)

    @classmethod
    def bot(cls) -> "Tm":
        return cls(TmKind.BOT)

    @classmethod
    def and_(cls, a: "Tm", b: "Tm") -> "Tm":
        return cls(TmKind.AND, (a, b))

    @classmethod
    def or_(cls, a: "Tm", b: "Tm") -> "Tm":
        return cls(TmKind.OR, (a, b))

    @classmethod
    def implies(cls, a: "Tm", b: "Tm") -> "Tm":
        return cls(TmKind.IMPLIES, (a, b))

    @classmethod
    def forallp(cls, ty: Ty, body: "Tm", name: str = "x") -> "Tm":
        return cls(TmKind.FORALLP, (ty, body), (name,))

    @classmethod
    def existsp(cls, ty: Ty, body: "Tm", name: str = "x") -> "Tm":
        return cls(TmKind.EXISTSP, (ty, body), (name,))

    @classmethod
    def sep(cls, a: "Tm", b: "Tm") -> "Tm":
        return cls(TmKind.SEP, (a, b))

    @classmethod
    def wand(cls, a: "Tm", b: "Tm") -> "Tm":
        return cls(TmKind.WAND, (a, b))

    @classmethod
    def box(cls, a: "Tm") -> "Tm":
        return cls(TmKind.BOX, (a,))

    @classmethod
    def later(cls, a: "Tm") -> "Tm":
        return cls(TmKind.LATER, (a,))

    @classmethod
    def points_to(cls, ty: Optional[Ty], loc: "Tm", a: "Tm") -> "Tm":
        return cls(TmKind.POINTSTO, (ty, loc, a))

    @classmethod
    def wp(cls, ty: Optional[Ty], e: "Tm", post: "Tm", name: str = "x") -> "Tm":
        return cls(TmKind.WP, (ty, e, post), (name,))

    # accessors ------------------------------------------------------------
    @property
    def index(self) -> int:
        return self.args[0]

    def children(self) -> Iterator[tuple[int, Child, Any]]:
        for i, (spec, a) in enumerate(zip(SCHEMA[self.kind], self.args)):
            yield i, spec, a

    def to_int(self) -> Optional[int]:
        n, t = 0, self
        while t.kind is TmKind.SUCC:
            n, t = n + 1, t.args[0]
        return n if t.kind is TmKind.ZERO else None


def seq_all(*stmts: Tm) -> Tm:
    """``s1; s2; ...; sn`` with discarded binders, right-nested."""
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Tm.seq(s, out)
    return out


# ----------------------------------------------------------------------------
# Generic traversals

def map_ty(a: Ty, on_var: Callable[[Ty, int], Ty], depth: int = 0) -> Ty:
    if a.kind is TyKind.VAR:
        return on_var(a, depth)
    if not a.args:
        return a
    inner = depth + 1 if a.kind in TY_BINDERS else depth
    new = tuple(map_ty(x, on_var, inner) for x in a.args)
    if all(x is y for x, y in zip(new, a.args)):
        return a
    return replace(a, args=new, _hash=[])


def map_tm(t: Tm,
           on_var: Callable[[Tm, int, int], Tm],
           on_ty: Callable[[Ty, int], Ty],
           cty: int = 0, ctm: int = 0) -> Tm:
    """Rebuild ``t`` bottom-up, calling ``on_var`` at element variables and
    ``on_ty`` at every embedded type, with the current binder depths."""
    if t.kind is TmKind.VAR:
        return on_var(t, cty, ctm)
    if not t.args:
        return t
    new = []
    same = True
    for spec, a in zip(SCHEMA[t.kind], t.args):
        if spec.sort == "tm":
            b = map_tm(a, on_var, on_ty, cty + spec.ty_binders, ctm + spec.tm_binders)
        elif spec.sort == "ty" and a is not None:
            b = on_ty(a, cty)
        else:
            b = a
        same = same and b is a
        new.append(b)
    if same:
        return t
    return replace(t, args=tuple(new), _hash=[])


def _keep_var(t: Tm, cty: int, ctm: int) -> Tm:
    return t


def _keep_ty(a: Ty, cty: int) -> Ty:
    return a


# ----------------------------------------------------------------------------
# Shifting and substitution on types

def shift_ty(a: Ty, d: int, cutoff: int = 0) -> Ty:
    if d == 0:
        return a

    def on_var(v: Ty, depth: int) -> Ty:
        i = v.args[0]
        if i < cutoff + depth:
            return v
        if i + d < 0:
            raise ScopeError(f"type variable {i} shifted below zero")
        return Ty(TyKind.VAR, (i + d,), v.names)

    return map_ty(a, on_var)


def subst_ty(a: Ty, target: int, b: Ty) -> Ty:
    """Replace type variable ``target`` by ``b`` (no index decrement)."""

    def on_var(v: Ty, depth: int) -> Ty:
        return shift_ty(b, depth) if v.args[0] == target + depth else v

    return map_ty(a, on_var)


def instantiate_ty(body: Ty, b: Ty) -> Ty:
    """Open the binder of ``body`` with ``b``: ``body[b/0]``."""
    return shift_ty(subst_ty(body, 0, shift_ty(b, 1)), -1)


def ty_free_vars(a: Ty) -> set[int]:
    found: set[int] = set()

    def on_var(v: Ty, depth: int) -> Ty:
        if v.args[0] >= depth:
            found.add(v.args[0] - depth)
        return v

    map_ty(a, on_var)
    return found


# ----------------------------------------------------------------------------
# Shifting and substitution on terms

def shift_tm(t: Tm, d: int, cutoff: int = 0) -> Tm:
    """Shift free element variables ``>= cutoff`` by ``d``."""
    if d == 0:
        return t

    def on_var(v: Tm, cty: int, ctm: int) -> Tm:
        i = v.args[0]
        if i < cutoff + ctm:
            return v
        if i + d < 0:
            raise ScopeError(f"variable {i} shifted below zero")
        return Tm(TmKind.VAR, (i + d,), v.names)

    return map_tm(t, on_var, _keep_ty)


def shift_tm_types(t: Tm, d: int, cutoff: int = 0) -> Tm:
    """Shift free type variables ``>= cutoff`` inside every embedded type."""
    if d == 0:
        return t
    return map_tm(t, _keep_var, lambda a, cty: shift_ty(a, d, cutoff + cty))


def subst_tm(u: Tm, target: int, v: Tm) -> Tm:
    """Replace element variable ``target`` of ``u`` by ``v`` (no decrement)."""

    def on_var(x: Tm, cty: int, ctm: int) -> Tm:
        if x.args[0] == target + ctm:
            return shift_tm_types(shift_tm(v, ctm), cty)
        return x

    return map_tm(u, on_var, _keep_ty)


def instantiate_tm(body: Tm, v: Tm) -> Tm:
    """Open one element binder of ``body`` with ``v``: ``body[v/0]``."""
    return shift_tm(subst_tm(body, 0, shift_tm(v, 1)), -1)


def instantiate_all(body: Tm, values: Sequence[Tm]) -> Tm:
    """Open ``len(values)`` element binders; ``values[0]`` is the outermost."""
    k = len(values)
    out = body
    for idx, v in enumerate(reversed(values)):
        out = instantiate_tm(out, shift_tm(v, k - idx - 1))
    return out


def subst_tm_type(u: Tm, target: int, b: Ty) -> Tm:
    """Replace type variable ``target`` in every embedded type of ``u``."""
    return map_tm(u, _keep_var, lambda a, cty: subst_ty(a, target + cty, shift_ty(b, cty)))


def instantiate_tm_type(body: Tm, b: Ty) -> Tm:
    """Open one type binder of ``body`` with ``b``."""
    return shift_tm_types(subst_tm_type(body, 0, shift_ty(b, 1)), -1)


def free_vars(t: Tm) -> set[int]:
    found: set[int] = set()

    def on_var(x: Tm, cty: int, ctm: int) -> Tm:
        if x.args[0] >= ctm:
            found.add(x.args[0] - ctm)
        return x

    map_tm(t, on_var, _keep_ty)
    return found


def free_in(t: Tm, i: int) -> bool:
    return i in free_vars(t)


def free_type_vars(t: Tm) -> set[int]:
    found: set[int] = set()

    def on_ty(a: Ty, cty: int) -> Ty:
        found.update(i - cty for i in ty_free_vars(a) if i >= cty)
        return a

    map_tm(t, _keep_var, on_ty)
    return found


def drop_var(t: Tm, i: int) -> Tm:
    """Remove the unused binder at index ``i`` (indices above it move down)."""
    if free_in(t, i):
        raise ScopeError(f"variable {i} is used and cannot be dropped")
    return shift_tm(t, -1, i + 1) if i >= 0 else t


def swap_vars(t: Tm) -> Tm:
    """Exchange element variables 0 and 1."""

    def on_var(x: Tm, cty: int, ctm: int) -> Tm:
        i = x.args[0]
        if i == ctm:
            return Tm(TmKind.VAR, (ctm + 1,), x.names)
        if i == ctm + 1:
            return Tm(TmKind.VAR, (ctm,), x.names)
        return x

    return map_tm(t, on_var, _keep_ty)


def abstract_tm(t: Tm, target: Tm) -> Tm:
    """Return a body under one new binder in which every occurrence of
    ``target`` has become the bound variable."""
    base = shift_tm(t, 1)
    tgt = shift_tm(target, 1)
    cache: dict[tuple[int, int], Tm] = {}

    def candidate(cty: int, ctm: int) -> Tm:
        key = (cty, ctm)
        if key not in cache:
            cache[key] = shift_tm_types(shift_tm(tgt, ctm), cty)
        return cache[key]

    def go(node: Tm, cty: int, ctm: int) -> Tm:
        if node == candidate(cty, ctm):
            return Tm.var(ctm, "w")
        if node.kind is TmKind.VAR or not node.args:
            return node
        new = []
        for spec, a in zip(SCHEMA[node.kind], node.args):
            if spec.sort == "tm":
                new.append(go(a, cty + spec.ty_binders, ctm + spec.tm_binders))
            else:
                new.append(a)
        return replace(node, args=tuple(new), _hash=[])

    return go(base, 0, 0)


# ----------------------------------------------------------------------------
# Paths

Path = tuple[int, ...]


def subterm_at(t: Tm, path: Path) -> tuple[Tm, int, int]:
    """Return the subterm at ``path`` and the (type, element) binder depth."""
    cty = ctm = 0
    node = t
    for step in path:
        if step >= len(node.args) or SCHEMA[node.kind][step].sort != "tm":
            raise ScopeError(f"path {list(path)} does not address a term")
        spec = SCHEMA[node.kind][step]
        cty += spec.ty_binders
        ctm += spec.tm_binders
        node = node.args[step]
    return node, cty, ctm


def replace_at(t: Tm, path: Path, new: Tm) -> Tm:
    if not path:
        return new
    head, rest = path[0], path[1:]
    if head >= len(t.args) or SCHEMA[t.kind][head].sort != "tm":
        raise ScopeError(f"path {list(path)} does not address a term")
    args = list(t.args)
    args[head] = replace_at(t.args[head], rest, new)
    return replace(t, args=tuple(args), _hash=[])


def iter_subterms(t: Tm, path: Path = (), cty: int = 0,
                  ctm: int = 0) -> Iterator[tuple[Path, Tm, int, int]]:
    """Pre-order walk over term positions with their binder depths."""
    yield path, t, cty, ctm
    if t.kind is TmKind.VAR:
        return
    for i, spec, a in t.children():
        if spec.sort == "tm":
            yield from iter_subterms(a, path + (i,), cty + spec.ty_binders,
                                     ctm + spec.tm_binders)


def alpha_eq(a: Tm | Ty, b: Tm | Ty) -> bool:
    """Equality up to bound-variable renaming; structural on nameless trees."""
    return a == b


# ----------------------------------------------------------------------------
# Contexts

@dataclass(frozen=True)
class Ctx:
    """Type context Ξ (names only) and element context Γ (outermost first)."""

    ty_names: tuple[str, ...] = ()
    elems: tuple[tuple[str, Ty], ...] = ()

    @property
    def ty_count(self) -> int:
        return len(self.ty_names)

    def __len__(self) -> int:
        return len(self.elems)

    def lookup(self, i: int) -> Ty:
        if not 0 <= i < len(self.elems):
            raise ScopeError(f"unbound variable {i}")
        return self.elems[-1 - i][1]

    def name_of(self, i: int) -> str:
        return self.elems[-1 - i][0]

    def extend(self, name: str, ty: Ty) -> "Ctx":
        return Ctx(self.ty_names, self.elems + ((name, ty),))

    def extend_ty(self, name: str) -> "Ctx":
        shifted = tuple((n, shift_ty(a, 1)) for n, a in self.elems)
        return Ctx(self.ty_names + (name,), shifted)

    def truncate(self, n: int) -> "Ctx":
        return Ctx(self.ty_names, self.elems[:n])

    def tm_names(self) -> list[str]:
        """Names indexed by de Bruijn index (index 0 first)."""
        return [n for n, _ in reversed(self.elems)]

    def ty_names_by_index(self) -> list[str]:
        return list(reversed(self.ty_names))
