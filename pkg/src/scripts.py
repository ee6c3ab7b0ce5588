"""Replaying ``proof { ... qed }`` scripts against the kernel.

A script is a list of steps acting on the first open goal. Step arguments are
elaborated in that goal's context, so names bound by ``intro`` or
``exists_elim`` can be used in later steps.
"""

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

from src import derived
from src.kernel import (
    Param, ProofState, ProofTree, Sequent, apply_rule, check_proof, defer, rule_spec,
)
from src.conv import normalize
from src.surface import Env, ProofScript, ProofStep, Scope, StepArg, elab_tm, elab_ty
from src.syntax import Ctx, LmrError, Span, Tm, TmKind
from src.typeck import annotate

logger = logging.getLogger(__name__)


class ScriptError(LmrError):
    """A step that could not be run; wraps the underlying error when there is one."""

    def __init__(self, message: str, step: Optional[ProofStep] = None,
                 cause: Optional[LmrError] = None):
        self.message = message
        self.step = step
        self.cause = cause
        self.span: Optional[Span] = step.span if step is not None else None
        super().__init__(message)

    def __str__(self) -> str:
        where = f"in step `{self.step.text}`: " if self.step is not None else ""
        return f"{where}{self.message}"


class _Args:
    """Elaborates the arguments of one step in the focused goal's context."""

    def __init__(self, step: ProofStep, ctx: Ctx, env: Env):
        self.step = step
        self.ctx = ctx
        self.env = env
        self.scope = Scope.of_ctx(ctx, env)

    def fail(self, message: str) -> ScriptError:
        return ScriptError(message, self.step)

    def term(self, arg: StepArg) -> Tm:
        if arg.sort != "term":
            raise self.fail(f"expected a parenthesised term, got {arg.value!r}")
        return annotate(self.ctx, elab_tm(arg.value, self.scope))

    def binder(self, arg: StepArg) -> Tm:
        lam = self.term(arg)
        if lam.kind is not TmKind.LAM:
            raise self.fail("expected a function `fun (x : A) => ...` standing for a binder")
        return lam.args[1]

    def type(self, arg: StepArg):
        if arg.sort != "type":
            raise self.fail(f"expected a bracketed type, got {arg.value!r}")
        return elab_ty(arg.value, self.scope)

    def word(self, arg: StepArg, choices: Sequence[str]) -> str:
        if arg.sort != "name" or arg.value not in choices:
            raise self.fail(f"expected one of {', '.join(choices)}")
        return arg.value

    def index(self, arg: StepArg) -> int:
        if arg.sort == "int":
            return arg.value
        if arg.sort == "name":
            names = self.ctx.tm_names()
            if arg.value not in names:
                raise self.fail(f"no variable {arg.value!r} in the goal")
            return names.index(arg.value)
        raise self.fail("expected a number or a variable name")

    def number(self, arg: StepArg) -> int:
        if arg.sort != "int":
            raise self.fail("expected a number")
        return arg.value

    def convert(self, param: Param, args: List[StepArg]) -> Any:
        sort = param.sort
        one = args[0]
        if sort in ("prop", "term", "eq"):
            return self.term(one)
        if sort == "binder":
            return self.binder(one)
        if sort == "type":
            return self.type(one)
        if sort == "int":
            return self.index(one) if param.key == "var" else self.number(one)
        if sort == "dir":
            return self.word(one, ("forward", "backward"))
        if sort == "side":
            return self.word(one, ("goal", "hyp"))
        if sort in ("rule", "name"):
            if one.sort != "name":
                raise self.fail(f"expected a name for {param.key}")
            return one.value.replace("_", "-") if sort == "rule" else one.value
        if sort == "witness":
            return self.type(one) if one.sort == "type" else self.term(one)
        if sort == "names":
            return tuple(self.word(a, (a.value,)) for a in args)
        if sort == "terms":
            return tuple(self.term(a) for a in args)
        if sort == "types":
            return tuple(self.type(a) for a in args)
        if sort == "path":
            return tuple(one.value)
        raise self.fail(f"unsupported argument sort {sort}")


_MANY = ("names", "terms", "types")


def rule_args(step: ProofStep, params: Sequence[Param], ctx: Ctx, env: Env,
              skip: int = 0) -> Dict[str, Any]:
    """Bind positional (in declaration order), named and ``at`` arguments."""
    conv = _Args(step, ctx, env)
    out: Dict[str, Any] = {}
    positional = step.positional()[skip:]
    free = [p for p in params if p.sort != "path"]
    for p in free:
        if not positional:
            break
        if p.sort in _MANY:
            out[p.key], positional = conv.convert(p, positional), []
        else:
            out[p.key] = conv.convert(p, positional[:1])
            positional = positional[1:]
    if positional:
        raise conv.fail(f"too many arguments for {step.keyword}")
    by_key = {p.key: p for p in params}
    for arg in step.args:
        if arg.kind != "named":
            continue
        if arg.name not in by_key:
            raise conv.fail(f"unknown argument {arg.name!r}")
        out[arg.name] = conv.convert(by_key[arg.name], [arg])
    where = step.path()
    if where is not None:
        if "path" not in by_key:
            raise conv.fail(f"{step.keyword} takes no path")
        out["path"] = tuple(where)
    return out


StepFn = Callable[[ProofState, ProofStep, Env], ProofState]
STEPS: Dict[str, StepFn] = {}


def step(name: str):
    def register(fn: StepFn) -> StepFn:
        STEPS[name] = fn
        return fn
    return register


def _focus(st: ProofState, s: ProofStep) -> Sequent:
    if st.done:
        raise ScriptError("no goals left", s)
    return st.goal(0).seq


@step("rule")
def _rule(st: ProofState, s: ProofStep, env: Env) -> ProofState:
    seq = _focus(st, s)
    pos = s.positional()
    if not pos or pos[0].sort != "name":
        raise ScriptError("rule needs a rule name", s)
    spec = rule_spec(pos[0].value)
    return apply_rule(st, spec.name, rule_args(s, spec.params, seq.ctx, env, skip=1))


@step("rewrite")
def _rewrite(st: ProofState, s: ProofStep, env: Env) -> ProofState:
    seq = _focus(st, s)
    conv = _Args(s, seq.ctx, env)
    pos = s.positional()
    if not pos or pos[0].sort != "name":
        raise ScriptError("rewrite needs an equation name", s)
    args: Dict[str, Any] = {"rule": pos[0].value.replace("_", "-")}
    side = "goal"
    for a in pos[1:]:
        if a.sort == "name" and a.value in ("forward", "backward"):
            args["dir"] = a.value
        elif a.sort == "name" and a.value in ("goal", "hyp"):
            side = a.value
        else:
            args["witness"] = conv.type(a) if a.sort == "type" else conv.term(a)
    for a in s.args:
        if a.kind == "named" and a.name == "side":
            side = conv.word(a, ("goal", "hyp"))
        elif a.kind == "named" and a.name == "dir":
            args["dir"] = conv.word(a, ("forward", "backward"))
        elif a.kind == "named" and a.name == "witness":
            args["witness"] = conv.type(a) if a.sort == "type" else conv.term(a)
    if s.path() is not None:
        args["path"] = tuple(s.path())
    return apply_rule(st, f"rewrite-{side}", args)


@step("loeb")
def _loeb(st, s, env):
    _focus(st, s)
    return apply_rule(st, "loeb", {})


_INTRO = {TmKind.FORALLP: "forall-intro", TmKind.IMPLIES: "imp-intro",
          TmKind.WAND: "wand-adjunction-fwd"}


@step("intro")
def _intro(st, s, env):
    pos = s.positional()
    count = _Args(s, Ctx(), env).number(pos[0]) if pos else 1
    for _ in range(count):
        goal = _focus(st, s).goal
        kind = goal.kind if goal.kind in _INTRO else normalize(goal).kind
        if kind not in _INTRO:
            raise ScriptError("nothing to introduce", s)
        st = apply_rule(st, _INTRO[kind], {})
    return st


@step("defer")
def _defer(st, s, env):
    _focus(st, s)
    return defer(st)


@step("wp_rec")
def _wp_rec(st, s, env):
    _focus(st, s)
    return derived.wp_rec(st)


@step("eq_subst")
def _eq_subst(st, s, env):
    _focus(st, s)
    direction = "ltr"
    for a in s.positional():
        direction = _Args(s, Ctx(), env).word(a, ("ltr", "rtl"))
    return derived.eq_subst(st, tuple(s.path() or ()), direction)


@step("reorder")
def _reorder(st, s, env):
    _focus(st, s)
    conv = _Args(s, Ctx(), env)
    return derived.reorder_hyp(st, [conv.number(a) for a in s.positional()])


@step("specialize")
def _specialize(st, s, env):
    seq = _focus(st, s)
    conv = _Args(s, seq.ctx, env)
    return derived.specialize(st, tuple(s.path() or ()), [conv.term(a) for a in s.positional()])


@step("hoare_intro")
def _hoare_intro(st, s, env):
    _focus(st, s)
    return derived.hoare_intro(st)


@step("use")
def _use(st, s, env):
    seq = _focus(st, s)
    pos = s.positional()
    if not pos or pos[0].sort != "name":
        raise ScriptError("use needs a lemma name", s)
    name = pos[0].value
    lemma = env.theorems.get(name)
    if lemma is None:
        raise ScriptError(f"no lemma named {name!r}", s)
    tree = certify_lemma(name, env)
    conv = _Args(s, seq.ctx, env)
    return derived.use_lemma(st, lemma.sequent, tree, [conv.term(a) for a in pos[1:]])


def certify_lemma(name: str, env: Env) -> ProofTree:
    """Certified tree of a previously declared theorem, cached in ``env.lemmas``."""
    if name in env.lemmas:
        return env.lemmas[name]
    theorem = env.theorems[name]
    if theorem.script is None:
        raise ScriptError(f"lemma {name!r} has no proof")
    tree = run_script(theorem.sequent, theorem.script, env).tree()
    check_proof(theorem.sequent, tree)
    env.lemmas[name] = tree
    return tree


def run_step(st: ProofState, s: ProofStep, env: Env) -> ProofState:
    fn = STEPS.get(s.keyword)
    if fn is None:
        raise ScriptError(f"unknown step {s.keyword!r}", s)
    try:
        return fn(st, s, env)
    except ScriptError:
        raise
    except LmrError as exc:
        raise ScriptError(str(exc), s, exc)


def run_script(seq: Sequent, script: ProofScript, env: Env) -> ProofState:
    """Replay every step; the returned state has no open goals."""
    st = ProofState.start(seq)
    for i, s in enumerate(script.steps):
        logger.debug("%s step %d: %s", script.name, i, s.text)
        st = run_step(st, s, env)
    if not st.done:
        raise ScriptError(f"{len(st.goals)} goal(s) left open at qed")
    return st
