"""Bidirectional typechecking for types, terms, propositions and sequents."""

import logging
from dataclasses import replace
from typing import Optional

from src.syntax import (
    Ctx, LmrError, Span, Tm, TmKind, Ty, TyKind, TypeFlag, instantiate_ty, shift_ty,
    ty_free_vars,
)

logger = logging.getLogger(__name__)


class TypeCheckError(LmrError):
    """``kind`` is one of mismatch, flag-violation, unbound, not-a-monad,
    not-a-ref, not-a-function, arity, escape."""

    def __init__(self, kind: str, message: str, span: Optional[Span] = None,
                 expected: Optional[Ty] = None, actual: Optional[Ty] = None):
        self.kind = kind
        self.message = message
        self.span = span
        self.expected = expected
        self.actual = actual
        super().__init__(message)

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.kind}: {self.message}"


PROGRAM_ONLY = frozenset({TyKind.MU, TyKind.EXISTS, TyKind.REF, TyKind.T})


def check_ty(xi: Ctx, a: Ty, flag: TypeFlag = TypeFlag.LOGICAL, depth: int = 0) -> None:
    """Formation of ``a`` over the type context of ``xi`` at ``flag``."""
    k = a.kind
    if k is TyKind.VAR:
        if a.args[0] >= xi.ty_count + depth:
            raise TypeCheckError("unbound", f"type variable {a.args[0]} is not in scope", a.span)
        return
    if k is TyKind.PROP:
        if flag is TypeFlag.PROGRAM:
            raise TypeCheckError("flag-violation", "prop is not a program type", a.span)
        return
    if k in PROGRAM_ONLY:
        inner = depth + 1 if k in (TyKind.MU, TyKind.EXISTS) else depth
        check_ty(xi, a.args[0], TypeFlag.PROGRAM, inner)
        return
    if k is TyKind.FORALL:
        check_ty(xi, a.args[0], flag, depth + 1)
        return
    for child in a.args:
        check_ty(xi, child, flag, depth)


def is_program(xi: Ctx, a: Ty) -> bool:
    try:
        check_ty(xi, a, TypeFlag.PROGRAM)
    except TypeCheckError:
        return False
    return True


def check_ctx(ctx: Ctx) -> None:
    for name, a in ctx.elems:
        try:
            check_ty(ctx, a, TypeFlag.LOGICAL)
        except TypeCheckError as exc:
            raise TypeCheckError(exc.kind, f"in the type of {name!r}: {exc.message}", exc.span)


def _expect(kind: TyKind, a: Ty, error: str, what: str) -> Ty:
    if a.kind is not kind:
        raise TypeCheckError(error, f"expected {what}, found {a.kind.value}", actual=a)
    return a


def _same(expected: Ty, actual: Ty, what: str) -> None:
    if expected != actual:
        raise TypeCheckError("mismatch", f"{what}: types differ", expected=expected, actual=actual)


def _program(ctx: Ctx, a: Ty, what: str) -> None:
    try:
        check_ty(ctx, a, TypeFlag.PROGRAM)
    except TypeCheckError as exc:
        raise TypeCheckError("flag-violation", f"{what} must be a program type ({exc.message})",
                             actual=a)


def infer_tm(ctx: Ctx, t: Tm) -> Ty:
    """Synthesize the type of ``t``. Errors carry the smallest enclosing span."""
    try:
        return _infer(ctx, t)
    except TypeCheckError as exc:
        if exc.span is None and t.span is not None:
            exc.span = t.span
        raise


def check_tm(ctx: Ctx, t: Tm, a: Ty) -> None:
    actual = infer_tm(ctx, t)
    if actual != a:
        raise TypeCheckError("mismatch", f"expected a term of another type",
                             span=t.span, expected=a, actual=actual)


def check_prop(ctx: Ctx, phi: Tm) -> None:
    check_tm(ctx, phi, Ty.prop())


def check_value(value: Tm, a: Ty) -> None:
    """Value typing for interpreter results: closed and of type ``a``."""
    check_tm(Ctx(), value, a)


def _infer(ctx: Ctx, t: Tm) -> Ty:
    k, a = t.kind, t.args
    prop = Ty.prop()
    if k is TmKind.VAR:
        if a[0] >= len(ctx):
            raise TypeCheckError("unbound", f"variable {a[0]} is not in scope", t.span)
        return ctx.lookup(a[0])
    if k is TmKind.UNIT:
        return Ty.unit()
    if k is TmKind.PAIR:
        return Ty.prod(infer_tm(ctx, a[0]), infer_tm(ctx, a[1]))
    if k in (TmKind.FST, TmKind.SND):
        p = _expect(TyKind.PROD, infer_tm(ctx, a[0]), "mismatch", "a pair")
        return p.args[0] if k is TmKind.FST else p.args[1]
    if k in (TmKind.INL, TmKind.INR):
        s = _expect(TyKind.SUM, a[0], "mismatch", "a sum annotation")
        check_ty(ctx, s)
        check_tm(ctx, a[1], s.args[0] if k is TmKind.INL else s.args[1])
        return s
    if k is TmKind.CASE:
        s = _expect(TyKind.SUM, infer_tm(ctx, a[0]), "mismatch", "a sum")
        left = infer_tm(ctx.extend(t.names[0] if t.names else "x", s.args[0]), a[1])
        right = infer_tm(ctx.extend(t.names[1] if len(t.names) > 1 else "y", s.args[1]), a[2])
        _same(left, right, "case branches")
        return left
    if k is TmKind.ABSURD:
        check_ty(ctx, a[0])
        check_tm(ctx, a[1], Ty.empty())
        return a[0]
    if k is TmKind.LAM:
        check_ty(ctx, a[0])
        body = infer_tm(ctx.extend(_name(t), a[0]), a[1])
        return Ty.arrow(a[0], body)
    if k is TmKind.APP:
        f = _expect(TyKind.ARROW, infer_tm(ctx, a[0]), "not-a-function", "a function")
        check_tm(ctx, a[1], f.args[0])
        return f.args[1]
    if k is TmKind.TYLAM:
        body = infer_tm(ctx.extend_ty(_name(t, "a")), a[0])
        return Ty.forall(body, _name(t, "a"))
    if k is TmKind.TYAPP:
        f = _expect(TyKind.FORALL, infer_tm(ctx, a[0]), "mismatch", "a polymorphic term")
        check_ty(ctx, a[1])
        _program(ctx, a[1], "a type argument")
        return instantiate_ty(f.args[0], a[1])
    if k is TmKind.PACK:
        e = _expect(TyKind.EXISTS, a[0], "mismatch", "an existential annotation")
        check_ty(ctx, e, TypeFlag.PROGRAM)
        _program(ctx, a[1], "a witness type")
        check_tm(ctx, a[2], instantiate_ty(e.args[0], a[1]))
        return e
    if k is TmKind.UNPACK:
        e = _expect(TyKind.EXISTS, infer_tm(ctx, a[0]), "mismatch", "an existential package")
        names = t.names or ("a", "x")
        inner = ctx.extend_ty(names[0]).extend(names[1], e.args[0])
        result = infer_tm(inner, a[1])
        if 0 in ty_free_vars(result):
            raise TypeCheckError("escape", "the unpacked type variable escapes its scope",
                                 t.span, actual=result)
        return shift_ty(result, -1)
    if k is TmKind.FOLD:
        m = _expect(TyKind.MU, a[0], "mismatch", "a recursive type annotation")
        check_ty(ctx, m, TypeFlag.PROGRAM)
        check_tm(ctx, a[1], instantiate_ty(m.args[0], m))
        return m
    if k is TmKind.UNFOLD:
        m = _expect(TyKind.MU, infer_tm(ctx, a[0]), "mismatch", "a recursive type")
        return Ty.t(instantiate_ty(m.args[0], m))
    if k is TmKind.RET:
        inner = infer_tm(ctx, a[0])
        _program(ctx, inner, "a returned value")
        return Ty.t(inner)
    if k is TmKind.BIND:
        m = _expect(TyKind.T, infer_tm(ctx, a[0]), "not-a-monad", "a computation")
        rest = _expect(TyKind.T, infer_tm(ctx.extend(_name(t), m.args[0]), a[1]),
                       "not-a-monad", "a computation after bind")
        return rest
    if k is TmKind.GET:
        r = _expect(TyKind.REF, infer_tm(ctx, a[0]), "not-a-ref", "a reference")
        return Ty.t(r.args[0])
    if k is TmKind.SET:
        r = _expect(TyKind.REF, infer_tm(ctx, a[0]), "not-a-ref", "a reference")
        check_tm(ctx, a[1], r.args[0])
        return Ty.t(Ty.unit())
    if k is TmKind.NEW:
        inner = infer_tm(ctx, a[0])
        _program(ctx, inner, "a stored value")
        return Ty.t(Ty.ref(inner))
    if k is TmKind.STEP:
        return Ty.t(Ty.unit())
    if k is TmKind.ZERO:
        return Ty.nat()
    if k is TmKind.SUCC:
        check_tm(ctx, a[0], Ty.nat())
        return Ty.nat()
    if k is TmKind.NATREC:
        motive = a[0]
        check_ty(ctx, motive)
        check_tm(ctx, a[1], Ty.nat())
        check_tm(ctx, a[2], motive)
        names = t.names or ("n", "r")
        check_tm(ctx.extend(names[0], Ty.nat()).extend(names[1], motive), a[3], motive)
        return motive
    if k is TmKind.NIL:
        check_ty(ctx, a[0])
        return Ty.list(a[0])
    if k is TmKind.CONS:
        head = infer_tm(ctx, a[0])
        check_tm(ctx, a[1], Ty.list(head))
        return Ty.list(head)
    if k is TmKind.LISTREC:
        motive = a[0]
        check_ty(ctx, motive)
        lst = _expect(TyKind.LIST, infer_tm(ctx, a[1]), "mismatch", "a list")
        check_tm(ctx, a[2], motive)
        names = t.names or ("x", "xs", "r")
        inner = ctx.extend(names[0], lst.args[0]).extend(names[1], lst).extend(names[2], motive)
        check_tm(inner, a[3], motive)
        return motive
    if k is TmKind.LOC:
        _program(ctx, a[0], "a location's content")
        return Ty.ref(a[0])
    # propositions
    if k in (TmKind.TOP, TmKind.BOT):
        return prop
    if k in (TmKind.AND, TmKind.OR, TmKind.IMPLIES, TmKind.SEP, TmKind.WAND):
        check_tm(ctx, a[0], prop)
        check_tm(ctx, a[1], prop)
        return prop
    if k in (TmKind.BOX, TmKind.LATER):
        check_tm(ctx, a[0], prop)
        return prop
    if k in (TmKind.FORALLP, TmKind.EXISTSP):
        check_ty(ctx, a[0])
        check_tm(ctx.extend(_name(t), a[0]), a[1], prop)
        return prop
    if k is TmKind.EQ:
        ty = a[0] if a[0] is not None else infer_tm(ctx, a[1])
        check_ty(ctx, ty)
        check_tm(ctx, a[1], ty)
        check_tm(ctx, a[2], ty)
        return prop
    if k is TmKind.POINTSTO:
        ty = a[0]
        if ty is None:
            ty = _expect(TyKind.REF, infer_tm(ctx, a[1]), "not-a-ref", "a reference").args[0]
        check_tm(ctx, a[1], Ty.ref(ty))
        check_tm(ctx, a[2], ty)
        return prop
    if k is TmKind.WP:
        m = _expect(TyKind.T, infer_tm(ctx, a[1]), "not-a-monad", "a computation")
        if a[0] is not None:
            _same(Ty.t(a[0]), m, "wp annotation")
        _program(ctx, m.args[0], "a wp result")
        check_tm(ctx.extend(_name(t), m.args[0]), a[2], prop)
        return prop
    raise TypeCheckError("mismatch", f"unknown term former {k.value}", t.span)


def _name(t: Tm, default: str = "x") -> str:
    return t.names[0] if t.names and t.names[0] else default


def check_sequent(seq) -> None:
    """Contexts well formed, hypothesis and goal are propositions."""
    check_ctx(seq.ctx)
    check_prop(seq.ctx, seq.hyp)
    check_prop(seq.ctx, seq.goal)


# ----------------------------------------------------------------------------
# Annotation filling

def annotate(ctx: Ctx, t: Tm) -> Tm:
    """Fill the omitted annotations of ``=``, ``|->`` and ``wp``."""
    try:
        return _annotate(ctx, t)
    except TypeCheckError as exc:
        if exc.span is None and t.span is not None:
            exc.span = t.span
        raise


def _annotate(ctx: Ctx, t: Tm) -> Tm:
    k, a = t.kind, t.args
    if k is TmKind.VAR or not a:
        return t
    kids = list(a)
    if k is TmKind.LAM or k in (TmKind.FORALLP, TmKind.EXISTSP):
        kids[1] = annotate(ctx.extend(_name(t), a[0]), a[1])
    elif k is TmKind.TYLAM:
        kids[0] = annotate(ctx.extend_ty(_name(t, "a")), a[0])
    elif k is TmKind.BIND:
        kids[0] = annotate(ctx, a[0])
        m = _expect(TyKind.T, infer_tm(ctx, kids[0]), "not-a-monad", "a computation")
        kids[1] = annotate(ctx.extend(_name(t), m.args[0]), a[1])
    elif k is TmKind.CASE:
        kids[0] = annotate(ctx, a[0])
        s = _expect(TyKind.SUM, infer_tm(ctx, kids[0]), "mismatch", "a sum")
        names = t.names or ("x", "y")
        kids[1] = annotate(ctx.extend(names[0], s.args[0]), a[1])
        kids[2] = annotate(ctx.extend(names[1], s.args[1]), a[2])
    elif k is TmKind.UNPACK:
        kids[0] = annotate(ctx, a[0])
        e = _expect(TyKind.EXISTS, infer_tm(ctx, kids[0]), "mismatch", "an existential package")
        names = t.names or ("a", "x")
        kids[1] = annotate(ctx.extend_ty(names[0]).extend(names[1], e.args[0]), a[1])
    elif k is TmKind.NATREC:
        kids[1] = annotate(ctx, a[1])
        kids[2] = annotate(ctx, a[2])
        names = t.names or ("n", "r")
        kids[3] = annotate(ctx.extend(names[0], Ty.nat()).extend(names[1], a[0]), a[3])
    elif k is TmKind.LISTREC:
        kids[1] = annotate(ctx, a[1])
        kids[2] = annotate(ctx, a[2])
        lst = _expect(TyKind.LIST, infer_tm(ctx, kids[1]), "mismatch", "a list")
        names = t.names or ("x", "xs", "r")
        inner = ctx.extend(names[0], lst.args[0]).extend(names[1], lst).extend(names[2], a[0])
        kids[3] = annotate(inner, a[3])
    elif k is TmKind.WP:
        kids[1] = annotate(ctx, a[1])
        m = _expect(TyKind.T, infer_tm(ctx, kids[1]), "not-a-monad", "a computation")
        kids[0] = m.args[0] if a[0] is None else a[0]
        kids[2] = annotate(ctx.extend(_name(t), kids[0]), a[2])
    else:
        for i, child in enumerate(a):
            if isinstance(child, Tm):
                kids[i] = annotate(ctx, child)
        if k is TmKind.EQ and a[0] is None:
            kids[0] = infer_tm(ctx, kids[1])
        elif k is TmKind.POINTSTO and a[0] is None:
            r = _expect(TyKind.REF, infer_tm(ctx, kids[1]), "not-a-ref", "a reference")
            kids[0] = r.args[0]
    if all(x is y for x, y in zip(kids, a)):
        return t
    return replace(t, args=tuple(kids), _hash=[])
