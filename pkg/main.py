import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from src.config import Settings
from src.console import console, err_console, setup_logging
from src.interp import DEFAULT_COSTS, FAULTS, Heap, HeapError, eval_program, law_suite_async, result_type
from src.surface import Env, load_library, parse_term
from src.syntax import Ctx, LmrError
from src.verdicts import VerdictStatus, VerdictTracker, check_file

logger = logging.getLogger("lmr")

STATUS_STYLE = {
    VerdictStatus.OK: "green",
    VerdictStatus.CERTIFIED: "bold green",
    VerdictStatus.PASSED: "green",
    VerdictStatus.UNPROVED: "yellow",
    VerdictStatus.FAILED: "red",
    VerdictStatus.ILL_TYPED: "red",
    VerdictStatus.PARSE_ERROR: "red",
    VerdictStatus.IO_ERROR: "red",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmr", description="Machine-checker for a guarded separation logic over stateful programs")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging on stderr")
    parser.add_argument("--library", type=Path, help="directory holding prelude.lmr")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="typecheck and certify .lmr files")
    check.add_argument("files", nargs="+", type=Path)
    check.add_argument("--json", action="store_true", help="print one JSON array of verdicts")
    check.add_argument("--no-prelude", action="store_true", help="do not load prelude.lmr first")
    check.add_argument("--workers", type=int, help="files checked concurrently")

    run = sub.add_parser("eval", help="run a program with the reference interpreter")
    run.add_argument("file", type=Path, nargs="?", help=".lmr file defining the entry point")
    run.add_argument("--entry", default="main", help="closed definition of type T A to run")
    run.add_argument("--expr", "-e", help="program text to run instead of a definition")
    run.add_argument("--fuel", type=int)
    run.add_argument("--heap", default="", help="initial cells, e.g. '5; 7' for {0↦5, 1↦7}")
    run.add_argument("--trace", action="store_true", help="print every fuel-consuming transition")
    run.add_argument("--no-prelude", action="store_true")

    laws = sub.add_parser("laws", help="test the equational theory against the interpreter")
    laws.add_argument("--seed", type=int)
    laws.add_argument("--instances", type=int)
    laws.add_argument("--fuel", type=int)
    laws.add_argument("--workers", type=int)
    laws.add_argument("--json", action="store_true")
    laws.add_argument("--inject-fault", choices=["get-free"], help="test-only cost mutation")
    return parser


def emit_json(payload) -> None:
    console.out(json.dumps(payload, indent=2, ensure_ascii=False), highlight=False)


# ----------------------------------------------------------------------------
# check

async def check_files(files: Sequence[Path], settings: Settings, prelude: bool) -> List[VerdictTracker]:
    """Check files concurrently; results come back in input order."""
    semaphore = asyncio.Semaphore(settings.workers)

    async def one(path: Path) -> VerdictTracker:
        async with semaphore:
            return await asyncio.to_thread(check_file, path, settings, prelude)

    return list(await asyncio.gather(*(one(f) for f in files)))


def display_verdicts(trackers: Sequence[VerdictTracker], verbose: bool = False) -> None:
    for tracker in trackers:
        for v in tracker.verdicts():
            style = STATUS_STYLE.get(v.status, "white")
            timing = f" [dim]({v.elapsed:.2f}s)[/dim]" if verbose else ""
            console.print(f"{v.kind} {escape(v.name)}: [{style}]{v.status.value}[/{style}]{timing}", soft_wrap=True)
            for err in v.errors:
                console.print(f"  [red]{escape(str(err))}[/red]", highlight=False, soft_wrap=True)

    table = Table(title="Verdicts")
    table.add_column("File")
    table.add_column("Declarations", justify="right")
    table.add_column("Certified", justify="right")
    table.add_column("Failing", justify="right")
    table.add_column("Exit", justify="right")
    for tracker in trackers:
        verdicts = tracker.verdicts()
        certified = sum(v.status is VerdictStatus.CERTIFIED for v in verdicts)
        failing = sum(v.status.exit_code != 0 for v in verdicts)
        table.add_row(escape(tracker.file), str(len(verdicts)), str(certified), str(failing),
                      str(tracker.exit_code))
    console.print(table)


async def cmd_check(args, settings: Settings) -> int:
    trackers = await check_files(args.files, settings, prelude=not args.no_prelude)
    if args.json:
        emit_json([entry for t in trackers for entry in t.to_json()])
    else:
        display_verdicts(trackers, args.verbose)
    return max((t.exit_code for t in trackers), default=0)


# ----------------------------------------------------------------------------
# eval

def parse_heap(spec: str, env: Env) -> Heap:
    cells = [part.strip() for part in spec.split(";") if part.strip()]
    return Heap.of(*(parse_term(text, Ctx(), env) for text in cells))


def load_entry(args, settings: Settings):
    env = Env()
    if args.file is not None:
        module = load_library(args.file, settings.library_dir, prelude=not args.no_prelude)
        if module.errors:
            raise module.errors[0]
        env = module.env
    elif not args.no_prelude and settings.prelude_path.exists():
        module = load_library(settings.prelude_path, settings.library_dir)
        env = module.env
    if args.expr is not None:
        return parse_term(args.expr, Ctx(), env), env
    if args.entry not in env.termdefs:
        raise LmrError(f"no definition named {args.entry!r}")
    if env.termdefs[args.entry].params:
        raise LmrError(f"{args.entry!r} takes type parameters; run a closed instance instead")
    return env.instantiate_term(args.entry), env


def cmd_eval(args, settings: Settings) -> int:
    if args.file is None and args.expr is None:
        err_console.print("[red]eval needs a file or --expr[/red]")
        return 2
    try:
        program, env = load_entry(args, settings)
        result_type(program)
        heap = parse_heap(args.heap, env)
    except OSError as exc:
        err_console.print(f"[red]cannot read {args.file}: {exc.strerror or exc}[/red]")
        return 2
    except (HeapError, LmrError) as exc:
        err_console.print(f"[red]{escape(str(exc))}[/red]")
        return 2
    trace = [] if args.trace else None
    try:
        obs = eval_program(program, heap, settings.fuel, trace=trace)
    except HeapError as exc:
        err_console.print(f"[red]evaluation failed: {escape(str(exc))}[/red]")
        return 1
    for event in trace or ():
        console.print(str(event), markup=False, highlight=False, soft_wrap=True)
    console.print(str(obs), markup=False, highlight=False, soft_wrap=True)
    return 0


# ----------------------------------------------------------------------------
# laws

def display_laws(report) -> None:
    table = Table(title=f"Equational laws (seed {report.seed}, fuel {report.fuel})")
    table.add_column("Rule")
    table.add_column("Instances", justify="right")
    table.add_column("Passes", justify="right")
    table.add_column("Status")
    for r in report.rules:
        status = "[green]pass[/green]" if r.ok else "[red]FAIL[/red]"
        table.add_row(r.rule, str(r.instances), str(r.passes), status)
    console.print(table)
    for r in report.rules:
        for f in r.failures[:1]:
            body = (f"{f.term1}\n  vs\n{f.term2}\n\nheap {f.example.heap}, fuel {f.example.fuel}\n"
                    f"{f.example.obs1}\n{f.example.obs2}")
            console.print(Panel(
                escape(body),
                title=f"[red]{r.rule}[/red]", border_style="red"), highlight=False)
    for warning in report.warnings:
        console.print(f"[yellow]warning: {warning}[/yellow]")


async def cmd_laws(args, settings: Settings) -> int:
    costs = FAULTS[args.inject_fault] if args.inject_fault else DEFAULT_COSTS
    report = await law_suite_async(settings.seed, settings.instances, settings.fuel, costs,
                                   settings.workers, settings.heaps_per_instance)
    if args.json:
        emit_json(report.to_json())
    else:
        display_laws(report)
    return 0 if report.ok else 1


async def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings.from_env().override(
            fuel=getattr(args, "fuel", None), seed=getattr(args, "seed", None),
            instances=getattr(args, "instances", None), workers=getattr(args, "workers", None),
            library_dir=args.library)
    except ValueError as exc:
        err_console.print(f"[red]{exc}[/red]")
        return 2
    setup_logging("DEBUG" if args.verbose else settings.log_level)
    logger.debug("settings: %s", settings)

    try:
        if args.command == "check":
            return await cmd_check(args, settings)
        if args.command == "eval":
            return cmd_eval(args, settings)
        return await cmd_laws(args, settings)
    except KeyboardInterrupt:
        err_console.print("\n[yellow]Operation cancelled by user[/yellow]")
        return 2


if __name__ == "__main__":
    load_dotenv()
    sys.exit(asyncio.run(main()))
