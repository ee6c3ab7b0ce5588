"""Concrete syntax: parsing ``.lmr`` text, elaborating it to nameless syntax,
and printing nameless syntax back to parseable text."""

import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from src.derived import mk_rec
from src.kernel import Sequent
from src.syntax import (
    Ctx, LmrError, Span, Tm, TmKind, Ty, TyKind, free_in, instantiate_tm_type,
    instantiate_ty, shift_ty,
)
from src.typeck import TypeCheckError, annotate

logger = logging.getLogger(__name__)

GRAMMAR_PATH = Path(__file__).with_name("grammar.lark")

KEYWORDS = frozenset("""
    def theorem proof law qed fuel at mu forall exists ref T list nat prop fun
    tfun rec bind in unpack as match with inl inr natrec listrec zero succ cons
    nil ret get new set unfold fold fst snd pack absurd wp step loc box True False
""".split())

_DECL_START = re.compile(r"^(?=(?:def|theorem|proof|law)\b)", re.MULTILINE)


class ParseError(LmrError):
    def __init__(self, message: str, span: Optional[Span] = None,
                 expected: Sequence[str] = ()):
        self.message = message
        self.span = span
        self.expected = sorted(set(expected))
        where = f"{span}: " if span else ""
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{hint}")


# ----------------------------------------------------------------------------
# Parse trees with names

@dataclass
class Node:
    tag: str
    kids: List[Any]
    span: Optional[Span] = None


class _ToNodes(Transformer):
    def __init__(self, file: str):
        super().__init__()
        self.file = file

    def __default__(self, data, children, meta):
        span = None
        if not meta.empty:
            span = Span(self.file, meta.start_pos, meta.end_pos, meta.line, meta.column)
        return Node(str(data), list(children), span)

    def INT(self, token: Token) -> int:
        return int(token)

    def PATH(self, token: Token) -> tuple:
        digits = re.findall(r"\d+", str(token))
        return tuple(int(d) for d in digits)

    def NAME(self, token: Token) -> str:
        return str(token)


_parser: Optional[Lark] = None


def get_parser() -> Lark:
    global _parser
    if _parser is None:
        _parser = Lark(GRAMMAR_PATH.read_text(encoding="utf-8"), parser="lalr",
                       lexer="contextual", propagate_positions=True,
                       maybe_placeholders=False)
    return _parser


def _describe_terminal(name: str) -> str:
    try:
        pattern = get_parser().get_terminal(name).pattern
    except KeyError:
        return name
    if pattern.type == "str":
        return repr(pattern.value)
    return name


def _parse_error(exc: UnexpectedInput, text: str, file: str) -> ParseError:
    pos = getattr(exc, "pos_in_stream", None) or 0
    line = exc.line if exc.line and exc.line > 0 else text.count("\n", 0, pos) + 1
    column = exc.column if exc.column and exc.column > 0 else 1
    if isinstance(exc, UnexpectedToken):
        message = f"unexpected token {str(exc.token)!r}"
        expected = exc.expected
    elif isinstance(exc, UnexpectedCharacters):
        message = f"unexpected character {text[pos:pos + 1]!r}"
        expected = exc.allowed or ()
    elif isinstance(exc, UnexpectedEOF):
        message = "unexpected end of input"
        expected = exc.expected
    else:
        message = str(exc)
        expected = ()
    span = Span(file, pos, pos, line, column)
    return ParseError(message, span, [_describe_terminal(e) for e in expected])


def parse_text(text: str, file: str = "<input>") -> tuple[List[Node], List[ParseError]]:
    """Parse declarations, recovering at each top-level keyword."""
    text = text.replace("\r\n", "\n")
    starts = [m.start() for m in _DECL_START.finditer(text)]
    if not starts or starts[0] != 0:
        starts.insert(0, 0)
    bounds = list(zip(starts, starts[1:] + [len(text)]))
    nodes: List[Node] = []
    errors: List[ParseError] = []
    to_nodes = _ToNodes(file)
    for start, end in bounds:
        # blank out the preceding text so positions stay file-relative
        padded = re.sub(r"[^\n]", " ", text[:start]) + text[start:end]
        try:
            tree = get_parser().parse(padded)
        except UnexpectedInput as exc:
            errors.append(_parse_error(exc, padded, file))
            continue
        nodes.extend(to_nodes.transform(tree).kids)
    return nodes, errors


# ----------------------------------------------------------------------------
# Declarations

@dataclass
class StepArg:
    kind: str          # "pos", "named" or "at"
    name: Optional[str]
    value: Any         # Node for terms/types, str, int or a path tuple
    sort: str          # "term", "type", "name", "int" or "path"


@dataclass
class ProofStep:
    keyword: str
    args: List[StepArg]
    text: str
    span: Optional[Span] = None

    def positional(self) -> List[StepArg]:
        return [a for a in self.args if a.kind == "pos"]

    def named(self, key: str) -> List[StepArg]:
        return [a for a in self.args if a.kind == "named" and a.name == key]

    def path(self) -> Optional[tuple]:
        paths = [a.value for a in self.args if a.kind == "at"]
        return paths[-1] if paths else None


@dataclass
class ProofScript:
    name: str
    steps: List[ProofStep]
    span: Optional[Span] = None


@dataclass
class TypeDef:
    name: str
    params: tuple
    ty: Ty
    span: Optional[Span] = None
    kind: str = "typedef"


@dataclass
class TermDef:
    name: str
    params: tuple
    ty: Ty
    tm: Tm
    span: Optional[Span] = None
    kind: str = "termdef"


@dataclass
class Theorem:
    name: str
    sequent: Sequent
    script: Optional[ProofScript] = None
    span: Optional[Span] = None
    kind: str = "theorem"


@dataclass
class LawCheck:
    name: str
    lhs: Tm
    rhs: Tm
    ty: Ty
    fuel: int
    params: tuple = ()
    span: Optional[Span] = None
    kind: str = "law"


Decl = Union[TypeDef, TermDef, Theorem, LawCheck]


@dataclass
class DeclError:
    """A declaration that failed to parse or elaborate."""
    name: str
    kind: str
    error: LmrError
    span: Optional[Span] = None


@dataclass
class SourceModule:
    decls: List[Decl] = field(default_factory=list)
    errors: List[Union[ParseError, DeclError]] = field(default_factory=list)
    file: str = "<input>"
    env: Optional["Env"] = None

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class Env:
    """Definitions visible to elaboration; later decls see earlier ones."""
    typedefs: Dict[str, TypeDef] = field(default_factory=dict)
    termdefs: Dict[str, TermDef] = field(default_factory=dict)
    theorems: Dict[str, Theorem] = field(default_factory=dict)
    lemmas: Dict[str, Any] = field(default_factory=dict)   # name -> certified ProofTree

    def copy(self) -> "Env":
        return Env(dict(self.typedefs), dict(self.termdefs), dict(self.theorems),
                   dict(self.lemmas))

    def names(self) -> set:
        return set(self.typedefs) | set(self.termdefs) | set(self.theorems)

    def add(self, decl: Decl) -> None:
        if isinstance(decl, TypeDef):
            self.typedefs[decl.name] = decl
        elif isinstance(decl, TermDef):
            self.termdefs[decl.name] = decl
        elif isinstance(decl, Theorem):
            self.theorems[decl.name] = decl

    def instantiate_type(self, name: str, tys: Sequence[Ty] = ()) -> Ty:
        return _typedef_instance(name, list(tys), Scope([], [], self), None)

    def instantiate_term(self, name: str, tys: Sequence[Ty] = ()) -> Tm:
        if name not in self.termdefs:
            raise _unbound("term", name, None)
        return _termdef_instance(name, list(tys), Scope([], [], self), None)


# ----------------------------------------------------------------------------
# Elaboration

@dataclass
class Scope:
    """Names in scope; index 0 of each list is the innermost binder."""
    ty_names: List[str]
    tm_names: List[str]
    env: Env

    @classmethod
    def of_ctx(cls, ctx: Ctx, env: Env) -> "Scope":
        return cls(ctx.ty_names_by_index(), ctx.tm_names(), env)

    def push_tm(self, *names: str) -> "Scope":
        out = list(self.tm_names)
        for n in names:
            out.insert(0, n)
        return Scope(self.ty_names, out, self.env)

    def push_ty(self, name: str) -> "Scope":
        return Scope([name] + self.ty_names, self.tm_names, self.env)


def _unbound(what: str, name: str, span: Optional[Span]) -> TypeCheckError:
    return TypeCheckError("unbound", f"unbound {what} {name!r}", span=span)


def _instantiate_params(body, args: Sequence[Ty], on_ty):
    k = len(args)
    for idx, b in enumerate(reversed(args)):
        body = on_ty(body, shift_ty(b, k - idx - 1))
    return body


def elab_ty(node: Node, scope: Scope) -> Ty:
    tag, kids = node.tag, node.kids
    simple = {"tunit": Ty.unit, "tempty": Ty.empty, "tnat": Ty.nat, "tprop": Ty.prop}
    if tag in simple:
        return simple[tag]()
    if tag == "tarrow":
        return Ty.arrow(elab_ty(kids[0], scope), elab_ty(kids[1], scope))
    if tag == "tsum":
        return Ty.sum(elab_ty(kids[0], scope), elab_ty(kids[1], scope))
    if tag == "tprod":
        return Ty.prod(elab_ty(kids[0], scope), elab_ty(kids[1], scope))
    if tag == "tref":
        return Ty.ref(elab_ty(kids[0], scope))
    if tag == "tmonad":
        return Ty.t(elab_ty(kids[0], scope))
    if tag == "tlist":
        return Ty.list(elab_ty(kids[0], scope))
    if tag in ("tmu", "tforall", "texists"):
        name = kids[0]
        body = elab_ty(kids[1], scope.push_ty(name))
        return {"tmu": Ty.mu, "tforall": Ty.forall, "texists": Ty.exists}[tag](body, name)
    if tag == "tname":
        name = kids[0]
        if name in scope.ty_names:
            return Ty.var(scope.ty_names.index(name), name)
        return _typedef_instance(name, [], scope, node.span)
    if tag == "tdefapp":
        name = kids[0]
        if name in scope.ty_names:
            raise TypeCheckError("mismatch", f"type variable {name!r} takes no arguments",
                                 span=node.span)
        return _typedef_instance(name, [elab_ty(k, scope) for k in kids[1:]], scope, node.span)
    raise ParseError(f"unexpected type form {tag}", node.span)


def _typedef_instance(name: str, args: List[Ty], scope: Scope, span) -> Ty:
    td = scope.env.typedefs.get(name)
    if td is None:
        raise _unbound("type", name, span)
    if len(td.params) != len(args):
        raise TypeCheckError("arity", f"type {name!r} expects {len(td.params)} "
                             f"argument(s), got {len(args)}", span=span)
    return _instantiate_params(td.ty, args, instantiate_ty)


def _termdef_instance(name: str, args: List[Ty], scope: Scope, span) -> Tm:
    td = scope.env.termdefs[name]
    if len(td.params) > len(args):
        raise TypeCheckError("arity", f"{name!r} expects {len(td.params)} type "
                             f"argument(s), got {len(args)}", span=span)
    k = len(td.params)
    out = _instantiate_params(td.tm, args[:k], instantiate_tm_type)
    for extra in args[k:]:
        out = Tm.tyapp(out, extra)
    return out


_UNARY = {
    "ret": Tm.ret, "get": Tm.get, "new": Tm.new, "unfold": Tm.unfold,
    "fst": Tm.fst, "snd": Tm.snd, "succ": Tm.succ, "later": Tm.later, "box": Tm.box,
}
_BINARY = {
    "pair": Tm.pair, "set": Tm.set, "cons": Tm.cons, "apply": Tm.app,
    "implies": Tm.implies, "wand": Tm.wand, "or_": Tm.or_, "and_": Tm.and_,
    "sep": Tm.sep,
}
_ANNOTATED = {"fold": Tm.fold, "inl": Tm.inl, "inr": Tm.inr, "absurd": Tm.absurd}
_CONSTANTS = {"unit": Tm.unit, "step": Tm.step, "zero": Tm.zero, "top": Tm.top,
              "bot": Tm.bot}


def elab_tm(node: Node, scope: Scope) -> Tm:
    """Resolve names to indices. Annotations of ``=``, ``|->`` and ``wp`` that
    the source leaves out stay ``None`` until ``typeck.annotate``."""
    out = _elab_tm(node, scope)
    if out.span is None and node.span is not None:
        out = replace(out, span=node.span)
    return out


def _elab_tm(node: Node, scope: Scope) -> Tm:
    tag, kids = node.tag, node.kids
    if tag in _CONSTANTS:
        return _CONSTANTS[tag]()
    if tag in _UNARY:
        return _UNARY[tag](elab_tm(kids[0], scope))
    if tag in _BINARY:
        return _BINARY[tag](elab_tm(kids[0], scope), elab_tm(kids[1], scope))
    if tag in _ANNOTATED:
        return _ANNOTATED[tag](elab_ty(kids[0], scope), elab_tm(kids[1], scope))
    if tag == "num":
        return Tm.nat(kids[0])
    if tag == "name":
        return _elab_name(kids[0], [], scope, node.span)
    if tag == "tyapply":
        tys: List[Ty] = []
        head = node
        while head.tag == "tyapply":
            tys.insert(0, elab_ty(head.kids[1], scope))
            head = head.kids[0]
        if head.tag == "name":
            return _elab_name(head.kids[0], tys, scope, head.span)
        out = elab_tm(head, scope)
        for b in tys:
            out = Tm.tyapp(out, b)
        return out
    if tag == "nil":
        return Tm.nil(elab_ty(kids[0], scope))
    if tag == "loc":
        return Tm.loc(elab_ty(kids[0], scope), kids[1])
    if tag == "pack":
        return Tm.pack(elab_ty(kids[0], scope), elab_ty(kids[1], scope),
                       elab_tm(kids[2], scope))
    if tag == "eq":
        return Tm.eq(None, elab_tm(kids[0], scope), elab_tm(kids[1], scope))
    if tag == "eq_ann":
        return Tm.eq(elab_ty(kids[1], scope), elab_tm(kids[0], scope), elab_tm(kids[2], scope))
    if tag == "pointsto":
        return Tm.points_to(None, elab_tm(kids[0], scope), elab_tm(kids[1], scope))
    if tag == "wp":
        e = elab_tm(kids[0], scope)
        return Tm.wp(None, e, elab_tm(kids[2], scope.push_tm(kids[1])), kids[1])
    if tag in ("lam", "forallp", "existsp"):
        return _elab_binders(tag, kids[:-1], kids[-1], scope)
    if tag == "tylam":
        return Tm.tylam(elab_tm(kids[1], scope.push_ty(kids[0])), kids[0])
    if tag == "rec":
        f, x, a_node, b_node, body = kids
        a, b = elab_ty(a_node, scope), elab_ty(b_node, scope)
        e = elab_tm(body, scope.push_tm(f, x))
        return mk_rec(a, b, e, f_name=f, x_name=x)
    if tag == "bind":
        name, e1, e2 = kids
        return Tm.bind(elab_tm(e1, scope), elab_tm(e2, scope.push_tm(name)), name)
    if tag == "seq":
        # "" can never be written, so the discarded binder is unreachable
        return Tm(TmKind.BIND, (elab_tm(kids[0], scope), elab_tm(kids[1], scope.push_tm(""))),
                  ("_",))
    if tag == "unpack":
        e, a, x, body = kids
        inner = scope.push_ty(a).push_tm(x)
        return Tm.unpack(elab_tm(e, scope), elab_tm(body, inner), (a, x))
    if tag == "match":
        e, x, left, y, right = kids
        return Tm.case(elab_tm(e, scope), elab_tm(left, scope.push_tm(x)),
                       elab_tm(right, scope.push_tm(y)), (x, y))
    if tag == "natrec":
        motive, n, z, p, r, s = kids
        return Tm.natrec(elab_ty(motive, scope), elab_tm(n, scope), elab_tm(z, scope),
                         elab_tm(s, scope.push_tm(p, r)), (p, r))
    if tag == "listrec":
        motive, xs, on_nil, h, t, r, on_cons = kids
        return Tm.listrec(elab_ty(motive, scope), elab_tm(xs, scope), elab_tm(on_nil, scope),
                          elab_tm(on_cons, scope.push_tm(h, t, r)), (h, t, r))
    raise ParseError(f"unexpected term form {tag}", node.span)


def _elab_name(name: str, tys: List[Ty], scope: Scope, span) -> Tm:
    if name in scope.tm_names:
        out = Tm.var(scope.tm_names.index(name), name)
        for b in tys:
            out = Tm.tyapp(out, b)
        return out
    if name in scope.env.termdefs:
        return _termdef_instance(name, tys, scope, span)
    raise _unbound("variable", name, span)


def _elab_binders(tag: str, binders: List[Node], body: Node, scope: Scope) -> Tm:
    flat: List[tuple] = []
    for b in binders:
        ty = elab_ty(b.kids[-1], scope)
        flat.extend((n, ty) for n in b.kids[:-1])
    inner = scope.push_tm(*[n for n, _ in flat])
    out = elab_tm(body, inner)
    make = {"lam": Tm.lam, "forallp": Tm.forallp, "existsp": Tm.existsp}[tag]
    for name, ty in reversed(flat):
        out = make(ty, out, name)
    return out


def _params(kids: List[Any]) -> tuple:
    for k in kids:
        if isinstance(k, Node) and k.tag == "tparams":
            return tuple(k.kids)
    return ()


def _step(node: Node, text: str) -> ProofStep:
    keyword, *raw = node.kids
    args: List[StepArg] = []
    for a in raw:
        if a.tag == "at_arg":
            args.append(StepArg("at", None, a.kids[0], "path"))
            continue
        name = a.kids[0] if a.tag == "named_arg" else None
        value = a.kids[-1]
        sort = {"term_val": "term", "type_val": "type", "name_val": "name",
                "int_val": "int"}[value.tag]
        payload = value.kids[0]
        args.append(StepArg("named" if name else "pos", name, payload, sort))
    snippet = text[node.span.start:node.span.end] if node.span else keyword
    return ProofStep(keyword, args, " ".join(snippet.split()), node.span)


def _elab_decl(node: Node, env: Env, text: str, module: SourceModule) -> Optional[Decl]:
    kids = node.kids
    name = kids[0]
    params = _params(kids)
    ty_scope = Scope(list(reversed(params)), [], env)
    rest = [k for k in kids[1:] if not (isinstance(k, Node) and k.tag == "tparams")]
    if node.tag == "typedef":
        return TypeDef(name, params, elab_ty(rest[0], ty_scope), node.span)
    if node.tag == "termdef":
        ctx = Ctx(params)
        ty = elab_ty(rest[0], ty_scope)
        tm = annotate(ctx, elab_tm(rest[1], ty_scope))
        return TermDef(name, params, ty, tm, node.span)
    if node.tag == "theorem":
        elems: List[tuple] = []
        if isinstance(rest[0], Node) and rest[0].tag == "hypctx":
            for bind in rest.pop(0).kids:
                ty = elab_ty(bind.kids[-1], ty_scope)
                elems.extend((n, ty) for n in bind.kids[:-1])
        ctx = Ctx(params, tuple(elems))
        scope = Scope.of_ctx(ctx, env)
        hyp = annotate(ctx, elab_tm(rest[0], scope))
        goal = annotate(ctx, elab_tm(rest[1], scope))
        return Theorem(name, Sequent(ctx, hyp, goal), None, node.span)
    if node.tag == "proof":
        target = next((d for d in module.decls
                       if isinstance(d, Theorem) and d.name == name), None)
        if target is None:
            raise TypeCheckError("unbound", f"proof for unknown theorem {name!r}", span=node.span)
        if target.script is not None:
            raise ParseError(f"theorem {name!r} already has a proof", node.span)
        target.script = ProofScript(name, [_step(s, text) for s in rest], node.span)
        return None
    if node.tag == "law":
        ctx = Ctx(params)
        lhs = annotate(ctx, elab_tm(rest[0], ty_scope))
        rhs = annotate(ctx, elab_tm(rest[1], ty_scope))
        return LawCheck(name, lhs, rhs, elab_ty(rest[2], ty_scope), rest[3], params, node.span)
    raise ParseError(f"unexpected declaration {node.tag}", node.span)


def parse_module(text: str, file: str = "<input>", env: Optional[Env] = None) -> SourceModule:
    """Parse and elaborate a whole file. Failing declarations are reported in
    ``errors`` and skipped; the rest still elaborate."""
    text = text.replace("\r\n", "\n")
    nodes, parse_errors = parse_text(text, file)
    scope_env = env.copy() if env is not None else Env()
    module = SourceModule(file=file, env=scope_env)
    decl_errors: List[DeclError] = []
    seen: set = set()
    for node in nodes:
        name = node.kids[0]
        try:
            if node.tag != "proof" and name in seen:
                raise ParseError(f"duplicate declaration {name!r}", node.span)
            decl = _elab_decl(node, scope_env, text, module)
        except LmrError as exc:
            logger.debug("declaration %s failed to elaborate: %s", name, exc)
            decl_errors.append(DeclError(name, node.tag, exc, node.span))
            continue
        if decl is not None:
            seen.add(name)
            module.decls.append(decl)
            scope_env.add(decl)
    combined: List[Any] = list(parse_errors) + decl_errors
    module.errors = sorted(combined, key=lambda e: e.span.start if e.span else -1)
    return module


def parse_file(path: Union[str, Path], env: Optional[Env] = None) -> SourceModule:
    path = Path(path)
    return parse_module(path.read_text(encoding="utf-8"), str(path), env)


PRELUDE_NAME = "prelude.lmr"


def load_library(path: Union[str, Path], library_dir: Optional[Path] = None,
                 prelude: bool = True) -> SourceModule:
    """Parse ``path`` on top of the prelude's environment.

    The prelude's own errors are reported with the returned module so a broken
    prelude is never silently ignored.
    """
    path = Path(path)
    library_dir = Path(library_dir) if library_dir is not None else path.parent
    prelude_path = library_dir / PRELUDE_NAME
    if not prelude or not prelude_path.exists() or path.resolve() == prelude_path.resolve():
        return parse_file(path)
    base = parse_file(prelude_path)
    module = parse_file(path, base.env)
    module.errors = list(base.errors) + module.errors
    return module


def parse_term(text: str, ctx: Ctx = Ctx(), env: Optional[Env] = None) -> Tm:
    """Parse a single term in ``ctx`` (by way of a throwaway law header)."""
    node = _parse_fragment(f"law _ : ({text}) == () : 1 fuel 0")
    tm = elab_tm(node.kids[1], Scope.of_ctx(ctx, env or Env()))
    return annotate(ctx, tm)


def parse_type(text: str, ty_names: Sequence[str] = (), env: Optional[Env] = None) -> Ty:
    node = _parse_fragment(f"law _ : () == () : {text} fuel 0")
    return elab_ty(node.kids[3], Scope(list(reversed(ty_names)), [], env or Env()))


def _parse_fragment(text: str) -> Node:
    nodes, errors = parse_text(text, "<fragment>")
    if errors:
        raise errors[0]
    return nodes[0]


# ----------------------------------------------------------------------------
# Printing

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_']*$")


def _fresh(hint: str, taken: Sequence[str], default: str) -> str:
    base = hint if hint and hint != "_" and _IDENT.match(hint) and hint not in KEYWORDS else default
    if base not in taken:
        return base
    stem = base.rstrip("0123456789") or default
    i = 1
    while f"{stem}{i}" in taken:
        i += 1
    return f"{stem}{i}"


def _hint(t: Union[Tm, Ty], i: int = 0, default: str = "x") -> str:
    return t.names[i] if len(t.names) > i and t.names[i] else default


def pretty_ty(a: Ty, ty_names: Sequence[str] = (), level: int = 0) -> str:
    """Print a type; ``ty_names[0]`` names type variable 0."""
    names = list(ty_names)
    k = a.kind
    if k is TyKind.VAR:
        i = a.args[0]
        if i >= len(names):
            raise LmrError(f"type variable {i} has no name in scope")
        s, own = names[i], 4
    elif k in (TyKind.UNIT, TyKind.EMPTY, TyKind.NAT, TyKind.PROP):
        s, own = {TyKind.UNIT: "1", TyKind.EMPTY: "0", TyKind.NAT: "nat",
                  TyKind.PROP: "prop"}[k], 4
    elif k in (TyKind.REF, TyKind.T, TyKind.LIST):
        s, own = f"{k.value} {pretty_ty(a.args[0], names, 3)}", 3
    elif k is TyKind.PROD:
        s, own = f"{pretty_ty(a.args[0], names, 2)} * {pretty_ty(a.args[1], names, 3)}", 2
    elif k is TyKind.SUM:
        s, own = f"{pretty_ty(a.args[0], names, 1)} + {pretty_ty(a.args[1], names, 2)}", 1
    elif k is TyKind.ARROW:
        s, own = f"{pretty_ty(a.args[0], names, 1)} -> {pretty_ty(a.args[1], names, 0)}", 0
    else:
        default = "r" if k is TyKind.MU else "a"
        n = _fresh(_hint(a, 0, default), names, default)
        s, own = f"{k.value} {n}. {pretty_ty(a.args[0], [n] + names, 0)}", 0
    return f"({s})" if own < level else s


class _TermPrinter:
    def __init__(self, ty_names: Sequence[str], tm_names: Sequence[str]):
        self.base_ty = list(ty_names)
        self.base_tm = list(tm_names)

    def ty(self, a: Optional[Ty], tys: List[str]) -> str:
        return pretty_ty(a, tys) if a is not None else "_"

    def __call__(self, t: Tm, tys: List[str], tms: List[str], level: int = 0) -> str:
        s, own = self.render(t, tys, tms)
        return f"({s})" if own < level else s

    def bound(self, t: Tm, tms: List[str], i: int = 0) -> str:
        return _fresh(_hint(t, i), tms, "x")

    def render(self, t: Tm, tys: List[str], tms: List[str]) -> tuple:
        k, a = t.kind, t.args
        p = self
        n = t.to_int() if k in (TmKind.ZERO, TmKind.SUCC) else None
        if n is not None:
            return str(n), 10
        if k is TmKind.VAR:
            if a[0] >= len(tms) or not tms[a[0]]:
                raise LmrError(f"variable {a[0]} has no name in scope")
            return tms[a[0]], 10
        simple = {TmKind.UNIT: "()", TmKind.STEP: "step", TmKind.TOP: "True",
                  TmKind.BOT: "False"}
        if k in simple:
            return simple[k], 10
        if k is TmKind.NIL:
            return f"nil [{p.ty(a[0], tys)}]", 10
        if k is TmKind.LOC:
            return f"loc [{p.ty(a[0], tys)}] {a[1]}", 10
        if k is TmKind.PAIR:
            return f"({p(a[0], tys, tms)}, {p(a[1], tys, tms)})", 10
        if k in (TmKind.FST, TmKind.SND, TmKind.RET, TmKind.GET, TmKind.NEW,
                 TmKind.UNFOLD, TmKind.SUCC):
            return f"{k.value} {p(a[0], tys, tms, 10)}", 9
        if k in (TmKind.SET, TmKind.CONS):
            return f"{k.value} {p(a[0], tys, tms, 10)} {p(a[1], tys, tms, 10)}", 9
        if k in (TmKind.FOLD, TmKind.INL, TmKind.INR, TmKind.ABSURD):
            return f"{k.value} [{p.ty(a[0], tys)}] {p(a[1], tys, tms, 10)}", 9
        if k is TmKind.PACK:
            return (f"pack [{p.ty(a[0], tys)}, {p.ty(a[1], tys)}] "
                    f"{p(a[2], tys, tms, 10)}"), 9
        if k is TmKind.WP:
            x = p.bound(t, tms)
            return f"wp {p(a[1], tys, tms, 8)} {{{x}. {p(a[2], tys, [x] + tms)}}}", 9
        if k is TmKind.APP:
            return f"{p(a[0], tys, tms, 8)} {p(a[1], tys, tms, 10)}", 8
        if k is TmKind.TYAPP:
            return f"{p(a[0], tys, tms, 8)} [{p.ty(a[1], tys)}]", 8
        if k is TmKind.POINTSTO:
            return f"{p(a[1], tys, tms, 8)} |-> {p(a[2], tys, tms, 8)}", 7
        if k is TmKind.LATER:
            return f"|> {p(a[0], tys, tms, 7)}", 7
        if k is TmKind.BOX:
            return f"box {p(a[0], tys, tms, 7)}", 7
        if k is TmKind.EQ:
            op = "=" if a[0] is None else f"={{{p.ty(a[0], tys)}}}"
            return f"{p(a[1], tys, tms, 7)} {op} {p(a[2], tys, tms, 7)}", 6
        infix = {TmKind.SEP: ("*", 5, 5, 6), TmKind.AND: ("/\\", 4, 4, 5),
                 TmKind.OR: ("\\/", 3, 3, 4), TmKind.WAND: ("-*", 2, 3, 2),
                 TmKind.IMPLIES: ("=>", 1, 2, 1)}
        if k in infix:
            op, own, left, right = infix[k]
            return f"{p(a[0], tys, tms, left)} {op} {p(a[1], tys, tms, right)}", own
        if k in (TmKind.LAM, TmKind.FORALLP, TmKind.EXISTSP):
            x = p.bound(t, tms)
            head = {TmKind.LAM: "fun", TmKind.FORALLP: "forall", TmKind.EXISTSP: "exists"}[k]
            sep = " =>" if k is TmKind.LAM else "."
            return f"{head} ({x} : {p.ty(a[0], tys)}){sep} {p(a[1], tys, [x] + tms)}", 0
        if k is TmKind.TYLAM:
            n = _fresh(_hint(t, 0, "a"), tys, "a")
            return f"tfun {n} => {p(a[0], [n] + tys, tms)}", 0
        if k is TmKind.BIND:
            if not free_in(a[1], 0):
                return f"{p(a[0], tys, tms, 1)}; {p(a[1], tys, ['_'] + tms)}", 0
            x = p.bound(t, tms)
            return f"{x} <- {p(a[0], tys, tms, 1)}; {p(a[1], tys, [x] + tms)}", 0
        if k is TmKind.UNPACK:
            n = _fresh(_hint(t, 0, "a"), tys, "a")
            x = p.bound(t, tms, 1)
            return (f"unpack {p(a[0], tys, tms, 1)} as ({n}, {x}) in "
                    f"{p(a[1], [n] + tys, [x] + tms)}"), 0
        if k is TmKind.CASE:
            x, y = p.bound(t, tms, 0), p.bound(t, tms, 1)
            return (f"match {p(a[0], tys, tms, 1)} with inl {x} => "
                    f"{p(a[1], tys, [x] + tms, 1)} | inr {y} => {p(a[2], tys, [y] + tms)}"), 0
        if k is TmKind.NATREC:
            m = p.bound(t, tms, 0)
            r = _fresh(_hint(t, 1, "r"), tms + [m], "r")
            return (f"natrec [{p.ty(a[0], tys)}] {p(a[1], tys, tms, 1)} with zero => "
                    f"{p(a[2], tys, tms, 1)} | succ {m} {r} => {p(a[3], tys, [r, m] + tms)}"), 0
        if k is TmKind.LISTREC:
            h = p.bound(t, tms, 0)
            tl = _fresh(_hint(t, 1, "xs"), tms + [h], "xs")
            r = _fresh(_hint(t, 2, "r"), tms + [h, tl], "r")
            return (f"listrec [{p.ty(a[0], tys)}] {p(a[1], tys, tms, 1)} with nil => "
                    f"{p(a[2], tys, tms, 1)} | cons {h} {tl} {r} => "
                    f"{p(a[3], tys, [r, tl, h] + tms)}"), 0
        raise LmrError(f"cannot print {k.value}")


def pretty_tm(t: Tm, ctx: Optional[Ctx] = None, level: int = 0) -> str:
    ctx = ctx or Ctx()
    tys, tms = ctx.ty_names_by_index(), ctx.tm_names()
    return _TermPrinter(tys, tms)(t, tys, tms, level)


def pretty_sequent(seq: Sequent) -> str:
    ctx = seq.ctx
    binders = ", ".join(f"{n} : {pretty_ty(a, ctx.ty_names_by_index())}" for n, a in ctx.elems)
    return f"{binders} | {pretty_tm(seq.hyp, ctx)} |- {pretty_tm(seq.goal, ctx)}"


def _params_text(params: tuple) -> str:
    return f" ({' '.join(params)})" if params else ""


def pretty_decl(decl: Decl) -> str:
    if isinstance(decl, TypeDef):
        tys = list(reversed(decl.params))
        return f"def {decl.name}{_params_text(decl.params)} := {pretty_ty(decl.ty, tys)}"
    if isinstance(decl, TermDef):
        ctx = Ctx(decl.params)
        return (f"def {decl.name}{_params_text(decl.params)} : "
                f"{pretty_ty(decl.ty, ctx.ty_names_by_index())} := {pretty_tm(decl.tm, ctx)}")
    if isinstance(decl, LawCheck):
        ctx = Ctx(decl.params)
        return (f"law {decl.name}{_params_text(decl.params)} : {pretty_tm(decl.lhs, ctx)} == "
                f"{pretty_tm(decl.rhs, ctx)} : {pretty_ty(decl.ty, ctx.ty_names_by_index())} "
                f"fuel {decl.fuel}")
    seq = decl.sequent
    ctx = seq.ctx
    tys = ctx.ty_names_by_index()
    binders = ", ".join(f"{n} : {pretty_ty(a, tys)}" for n, a in ctx.elems)
    out = (f"theorem {decl.name}{_params_text(ctx.ty_names)}"
           f"{f' [{binders}]' if binders else ''} : "
           f"{pretty_tm(seq.hyp, ctx)} |- {pretty_tm(seq.goal, ctx)}")
    if decl.script is not None:
        steps = "".join(f"  {s.text};\n" for s in decl.script.steps)
        out += f"\nproof {decl.name} {{\n{steps}  qed\n}}"
    return out


def pretty_print(obj: Union[SourceModule, Decl, Tm, Ty], ctx: Optional[Ctx] = None) -> str:
    """Deterministic text that parses back to an alpha-equal object."""
    if isinstance(obj, SourceModule):
        return "".join(pretty_decl(d) + "\n\n" for d in obj.decls)
    if isinstance(obj, Ty):
        return pretty_ty(obj, (ctx or Ctx()).ty_names_by_index())
    if isinstance(obj, Tm):
        return pretty_tm(obj, ctx)
    return pretty_decl(obj)


def decl_key(decl: Decl) -> tuple:
    """Comparable content of a declaration, ignoring names hints and spans."""
    if isinstance(decl, TypeDef):
        return ("typedef", decl.name, len(decl.params), decl.ty)
    if isinstance(decl, TermDef):
        return ("termdef", decl.name, len(decl.params), decl.ty, decl.tm)
    if isinstance(decl, LawCheck):
        return ("law", decl.name, len(decl.params), decl.lhs, decl.rhs, decl.ty, decl.fuel)
    seq = decl.sequent
    steps = tuple(s.text for s in decl.script.steps) if decl.script else None
    return ("theorem", decl.name, seq.ctx.ty_count,
            tuple(a for _, a in seq.ctx.elems), seq.hyp, seq.goal, steps)
