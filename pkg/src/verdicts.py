"""Per-declaration verdicts for ``check`` and the file-level driver that
produces them."""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.config import Settings
from src.kernel import KernelError, check_proof
from src.syntax import LmrError, Span

logger = logging.getLogger(__name__)


class VerdictStatus(Enum):
    PENDING = "pending"
    OK = "ok"                    # type and term definitions that elaborate
    CERTIFIED = "certified"      # theorems whose proof the kernel accepts
    PASSED = "passed"            # law declarations that hold on every test heap
    UNPROVED = "unproved"
    FAILED = "failed"
    ILL_TYPED = "ill-typed"
    PARSE_ERROR = "parse-error"
    IO_ERROR = "io-error"

    @property
    def exit_code(self) -> int:
        if self in (VerdictStatus.PARSE_ERROR, VerdictStatus.IO_ERROR):
            return 2
        if self in (VerdictStatus.OK, VerdictStatus.CERTIFIED, VerdictStatus.PASSED):
            return 0
        return 1


@dataclass
class Diagnostic:
    message: str
    span: Optional[Span] = None
    path: Optional[tuple] = None     # failing node of a proof tree

    def to_json(self) -> Dict[str, Any]:
        span = None
        if self.span is not None:
            span = {"file": self.span.file, "line": self.span.line, "column": self.span.column}
        out: Dict[str, Any] = {"span": span, "message": self.message}
        if self.path is not None:
            out["path"] = list(self.path)
        return out

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        node = f" (at proof node {list(self.path)})" if self.path is not None else ""
        return f"{where}{self.message}{node}"


@dataclass
class Verdict:
    name: str
    kind: str
    status: VerdictStatus
    errors: List[Diagnostic] = field(default_factory=list)
    elapsed: float = 0.0

    def to_json(self) -> Dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "status": self.status.value,
                "errors": [e.to_json() for e in self.errors]}

    def headline(self) -> str:
        return f"{self.kind} {self.name}: {self.status.value}"


class VerdictTracker:
    """Verdicts of one file, in declaration order."""

    def __init__(self, file: str):
        self.file = file
        self._verdicts: Dict[str, Verdict] = {}
        self._order: List[str] = []

    def create(self, name: str, kind: str) -> str:
        key = f"{kind}:{name}:{len(self._order)}"
        self._verdicts[key] = Verdict(name, kind, VerdictStatus.PENDING)
        self._order.append(key)
        return key

    def update(self, key: str, status: Optional[VerdictStatus] = None,
               error: Optional[Diagnostic] = None, elapsed: Optional[float] = None) -> None:
        if key not in self._verdicts:
            raise KeyError(f"no verdict {key!r}")
        verdict = self._verdicts[key]
        if status is not None:
            verdict.status = status
        if error is not None:
            verdict.errors.append(error)
            if verdict.status in (VerdictStatus.PENDING, VerdictStatus.OK):
                verdict.status = VerdictStatus.FAILED
        if elapsed is not None:
            verdict.elapsed = elapsed

    def get(self, key: str) -> Optional[Verdict]:
        return self._verdicts.get(key)

    def verdicts(self) -> List[Verdict]:
        return [self._verdicts[k] for k in self._order]

    @property
    def exit_code(self) -> int:
        return max((v.status.exit_code for v in self.verdicts()), default=0)

    def to_json(self) -> List[Dict[str, Any]]:
        return [dict(v.to_json(), file=self.file) for v in self.verdicts()]


def diagnostic(exc: LmrError) -> Diagnostic:
    """Structured diagnostic of any checker error."""
    from src.surface import ParseError
    from src.typeck import TypeCheckError

    if isinstance(exc, TypeCheckError):
        text = f"{exc.kind}: {exc.message}"
    elif isinstance(exc, ParseError):
        text = exc.message
    else:
        text = str(exc)
    cause = getattr(exc, "cause", None)
    kernel = exc if isinstance(exc, KernelError) else cause if isinstance(cause, KernelError) else None
    return Diagnostic(text, getattr(exc, "span", None), kernel.path if kernel is not None else None)


def _status_for(exc: LmrError) -> VerdictStatus:
    from src.surface import ParseError
    from src.typeck import TypeCheckError

    if isinstance(exc, ParseError):
        return VerdictStatus.PARSE_ERROR
    if isinstance(exc, TypeCheckError):
        return VerdictStatus.ILL_TYPED
    return VerdictStatus.FAILED


def check_file(path: Union[str, Path], settings: Settings, prelude: bool = True) -> VerdictTracker:
    """Parse, typecheck and certify one file. Never raises for checker errors;
    they become verdicts."""
    from src.interp import check_law_decl
    from src.scripts import run_script
    from src.surface import DeclError, LawCheck, ParseError, Theorem, load_library

    path = Path(path)
    tracker = VerdictTracker(str(path))
    try:
        module = load_library(path, settings.library_dir, prelude=prelude)
    except (OSError, UnicodeDecodeError) as exc:
        message = f"cannot read {path}: {getattr(exc, 'strerror', None) or exc}"
        logger.error(message)
        tracker.update(tracker.create(path.name, "file"), VerdictStatus.IO_ERROR, Diagnostic(message))
        return tracker

    for err in module.errors:
        if isinstance(err, DeclError):
            key = tracker.create(err.name, err.kind)
            tracker.update(key, _status_for(err.error), diagnostic(err.error))
        elif isinstance(err, ParseError):
            key = tracker.create("<syntax>", "parse")
            tracker.update(key, VerdictStatus.PARSE_ERROR, Diagnostic(err.message, err.span))

    for decl in module.decls:
        key = tracker.create(decl.name, decl.kind)
        started = time.perf_counter()
        if isinstance(decl, Theorem):
            if decl.script is None:
                tracker.update(key, VerdictStatus.UNPROVED,
                               Diagnostic("theorem has no proof", decl.span))
            else:
                try:
                    state = run_script(decl.sequent, decl.script, module.env)
                    check_proof(decl.sequent, state.tree())
                except LmrError as exc:
                    logger.info("%s: %s", decl.name, exc)
                    tracker.update(key, VerdictStatus.FAILED, diagnostic(exc))
                else:
                    tracker.update(key, VerdictStatus.CERTIFIED)
                    module.env.lemmas[decl.name] = state.tree()
        elif isinstance(decl, LawCheck):
            try:
                example = check_law_decl(decl.lhs, decl.rhs, decl.ty, decl.fuel,
                                         len(decl.params), settings.seed,
                                         settings.heaps_per_instance)
            except LmrError as exc:
                tracker.update(key, _status_for(exc), diagnostic(exc))
            else:
                if example is None:
                    tracker.update(key, VerdictStatus.PASSED)
                else:
                    message = (f"sides differ on heap {example.heap} with fuel {example.fuel}: "
                               f"{example.obs1} vs {example.obs2}")
                    tracker.update(key, VerdictStatus.FAILED, Diagnostic(message, decl.span))
        else:
            tracker.update(key, VerdictStatus.OK)
        tracker.update(key, elapsed=time.perf_counter() - started)
    return tracker
