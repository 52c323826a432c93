"""Command-line interface for trichotomy-lab."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from contextlib import contextmanager
from enum import StrEnum
from pathlib import Path
from typing import Annotated, Any

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from trichotomy_lab.base.errors import (
    DocumentError,
    PreconditionError,
    TheoremViolationError,
    TrichotomyLabError,
)
from trichotomy_lab.base.projections import check_invariance, check_range_orthogonality
from trichotomy_lab.base.report import CheckResult, VerificationReport
from trichotomy_lab.base.settings import LabSettings, get_settings
from trichotomy_lab.base.system import check_propagator
from trichotomy_lab.coupling.theorems import (
    DICHOTOMY_EXPONENT,
    ForwardResult,
    theorem1_forward,
    theorem2_forward,
    theorem4_equivalence,
)
from trichotomy_lab.documents import (
    SCHEMA_VERSION,
    Problem,
    ReportDocument,
    SystemDocument,
    dump,
    input_digest,
    parse_document,
    read_bytes,
    resolve,
    system_document,
    write_atomic,
)
from trichotomy_lab.genlab.fixtures import FIXTURES
from trichotomy_lab.verify.trichotomy import (
    ExponentGrid,
    estimate_exponents,
    growth_checks,
    verify_fp_dichotomy,
    verify_trichotomy,
)

app = typer.Typer(
    help="trichotomy-lab - verify trichotomies and dichotomies of discrete linear systems",
    no_args_is_help=True,
)
console = Console(stderr=True)
logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


class OutputFormat(StrEnum):
    JSON = "json"


class LogLevel(StrEnum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


RENDERERS = {OutputFormat.JSON: dump}


InputArg = Annotated[Path, typer.Argument(help="System document (JSON)")]
WindowOpt = Annotated[
    int | None, typer.Option(min=0, help="Last step checked (default: the system horizon)")
]
TolOpt = Annotated[float | None, typer.Option(min=0.0, help="Relative slack on declared K")]
SeedOpt = Annotated[int | None, typer.Option(help="Seed for randomized checks")]
ThreadsOpt = Annotated[int | None, typer.Option(min=1, help="Worker threads for sweeps")]
FormatOpt = Annotated[OutputFormat, typer.Option("--format", help="Report format")]
OutOpt = Annotated[
    Path | None, typer.Option("--out", help="Write the report here instead of stdout")
]


@app.callback()
def main(
    log_level: Annotated[
        LogLevel | None,
        typer.Option(
            case_sensitive=False, help="Logging level (default: TRICHOTOMY_LAB_LOG_LEVEL)"
        ),
    ] = None,
) -> None:
    """Configure logging on stderr."""
    with _input_errors():
        defaults = get_settings()
    level = log_level.value if log_level is not None else defaults.log_level
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _settings(
    seed: int | None = None, threads: int | None = None, tol: float | None = None
) -> LabSettings:
    update: dict[str, Any] = {}
    if seed is not None:
        update["seed"] = seed
    if threads is not None:
        update["threads"] = threads
    if tol is not None:
        update["verdict_tol"] = tol
    return get_settings().model_copy(update=update)


@contextmanager
def _input_errors() -> Iterator[None]:
    """Exit 2 on anything raised while reading and resolving documents."""
    try:
        yield
    except (ValidationError, TrichotomyLabError) as e:
        console.print(f"[red]Error: {e}[/red]")
        raise typer.Exit(EXIT_INPUT) from e


@contextmanager
def _verdict_errors() -> Iterator[None]:
    """Exit 1 on failed preconditions and theorem checks, 2 on other input errors."""
    try:
        yield
    except TheoremViolationError as e:
        console.print(f"[red]Stage {e.stage} failed: {e}[/red]")
        raise typer.Exit(EXIT_FAIL) from e
    except PreconditionError as e:
        console.print(f"[red]Failed: {e}[/red]")
        raise typer.Exit(EXIT_FAIL) from e
    except TrichotomyLabError as e:
        console.print(f"[red]Error: {e}[/red]")
        raise typer.Exit(EXIT_INPUT) from e


def _load(*paths: Path) -> tuple[list[Problem], str]:
    """Resolve documents and digest their bytes in order."""
    raws = []
    problems = []
    for path in paths:
        raw = read_bytes(path)
        raws.append(raw)
        problems.append(resolve(parse_document(raw, str(path))))
    return problems, input_digest(*raws)


def _summarize(title: str, reports: list[VerificationReport], checks: list[CheckResult]) -> None:
    table = Table(title=title)
    table.add_column("Check", style="cyan")
    table.add_column("Verdict")
    table.add_column("Detail", style="dim")

    def verdict(passed: bool) -> str:
        return "[green]pass[/green]" if passed else "[red]fail[/red]"

    for report in reports:
        for p in report.patterns:
            detail = "vacuous" if p.vacuous else f"K_min {p.k_min:.9g} at (m, n) = {p.witness}"
            table.add_row(f"{report.name}/{p.name}", verdict(p.passed), detail)
        for c in report.checks:
            table.add_row(f"{report.name}/{c.name}", verdict(c.passed), c.message)
        for s in report.stages:
            table.add_row(f"{report.name}/stage {s.name}", verdict(s.passed), s.message)
    for c in checks:
        table.add_row(c.name, verdict(c.passed), c.message)
    console.print(table)


def _finish(
    document: ReportDocument, out: Path | None, fmt: OutputFormat = OutputFormat.JSON
) -> None:
    """Emit the report and exit with its verdict."""
    _summarize(document.command, document.reports, document.checks)
    text = RENDERERS[fmt](document)
    if out is None:
        typer.echo(text, nl=False)
    else:
        try:
            write_atomic(out, text)
        except OSError as e:
            console.print(f"[red]Error: cannot write {out}: {e.strerror}[/red]")
            raise typer.Exit(EXIT_INPUT) from e
    raise typer.Exit(EXIT_PASS if document.passed else EXIT_FAIL)


@app.command()
def validate(
    source: InputArg,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    fmt: FormatOpt = OutputFormat.JSON,
    out: OutOpt = None,
) -> None:
    """Run the structural checks on a system document."""
    settings = _settings(seed, threads)
    with _input_errors():
        (problem,), digest = _load(source)
        family = problem.require_di() if problem.mode == "dichotomy" else problem.require_tri()
        for role, rate in problem.rates.items():
            try:
                rate.require_defined(problem.system.horizon)
            except TrichotomyLabError as e:
                raise DocumentError(str(e), f"rates.{role}") from e

        system = problem.system
        gating = [
            check_propagator(system, system.horizon, settings.propagator_tol),
            family.validate(settings.projection_tol),
            check_invariance(system, family, settings.projection_tol),
            check_range_orthogonality(
                family, settings.projection_tol, settings.pythagoras_samples, settings.seed
            ),
        ]
        heuristic = []
        if problem.mode == "trichotomy":
            heuristic = growth_checks(problem.rates, system.horizon, settings.divergence_floor)
    document = ReportDocument(
        command="validate",
        input_digest=digest,
        seed=settings.seed,
        passed=all(c.passed for c in gating),
        checks=[*gating, *heuristic],
    )
    _finish(document, out, fmt)


@app.command()
def verify(
    source: InputArg,
    window: WindowOpt = None,
    tol: TolOpt = None,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    fmt: FormatOpt = OutputFormat.JSON,
    out: OutOpt = None,
) -> None:
    """Verify the declared trichotomy (or FP dichotomy) and report every K_min."""
    settings = _settings(seed, threads, tol)
    with _input_errors():
        (problem,), digest = _load(source)

    with _verdict_errors():
        if problem.mode == "dichotomy":
            pair, dichotomy = problem.require_di(), problem.dichotomy_params()
            report = verify_fp_dichotomy(problem.system, pair, dichotomy, window, settings=settings)
        else:
            family, params = problem.require_tri(), problem.bound_params()
            report = verify_trichotomy(problem.system, family, params, window, settings=settings)
    document = ReportDocument(
        command="verify",
        input_digest=digest,
        seed=settings.seed,
        passed=report.passed,
        reports=[report],
    )
    _finish(document, out, fmt)


def _dichotomy_document(forward: ForwardResult, problem: Problem) -> SystemDocument:
    params = problem.bound_params()
    return system_document(
        forward.system,
        forward.splitting,
        {"h": forward.rate, "mu": params.mu, "nu": params.nu},
        {
            "K": forward.report.declared_k or params.K,
            "eps": params.eps,
            "c": DICHOTOMY_EXPONENT,
        },
        mode="dichotomy",
    )


@app.command()
def couple(
    source: InputArg,
    out_b: Annotated[Path, typer.Option("--out-b", help="Document for the B-system")],
    out_c: Annotated[Path, typer.Option("--out-c", help="Document for the C-system")],
    window: WindowOpt = None,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    fmt: FormatOpt = OutputFormat.JSON,
    out: OutOpt = None,
) -> None:
    """Build both rescaled systems with their splittings and write them as dichotomy documents."""
    settings = _settings(seed, threads)
    with _input_errors():
        (problem,), digest = _load(source)
        family, params = problem.require_tri(), problem.bound_params()

    with _verdict_errors():
        forward_b = theorem1_forward(problem.system, family, params, window, settings=settings)
        forward_c = theorem2_forward(problem.system, family, params, window, settings=settings)

    for forward, path in ((forward_b, out_b), (forward_c, out_c)):
        try:
            write_atomic(path, dump(_dichotomy_document(forward, problem)))
        except OSError as e:
            console.print(f"[red]Error: cannot write {path}: {e.strerror}[/red]")
            raise typer.Exit(EXIT_INPUT) from e
        logger.info("wrote %s", path)

    reports = [forward_b.report, forward_c.report]
    document = ReportDocument(
        command="couple",
        input_digest=digest,
        seed=settings.seed,
        passed=all(r.passed for r in reports),
        reports=reports,
    )
    _finish(document, out, fmt)


@app.command()
def roundtrip(
    source: InputArg,
    window: WindowOpt = None,
    sys_b: Annotated[
        Path | None, typer.Option("--sys-b", help="B-system document replacing the built one")
    ] = None,
    sys_c: Annotated[
        Path | None, typer.Option("--sys-c", help="C-system document replacing the built one")
    ] = None,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    fmt: FormatOpt = OutputFormat.JSON,
    out: OutOpt = None,
) -> None:
    """Run forward-B, forward-C and the reverse reconstruction, reporting each stage."""
    settings = _settings(seed, threads)
    with _input_errors():
        extra = [p for p in (sys_b, sys_c) if p is not None]
        problems, digest = _load(source, *extra)
        problem, *replacements = problems
        family, params = problem.require_tri(), problem.bound_params()
        replaced_b = replacements.pop(0).system if sys_b is not None else None
        replaced_c = replacements.pop(0).system if sys_c is not None else None

    with _verdict_errors():
        report = theorem4_equivalence(
            problem.system,
            family,
            params,
            window,
            sys_b=replaced_b,
            sys_c=replaced_c,
            settings=settings,
        )
    if (stage := report.failed_stage()) is not None:
        console.print(f"[red]Stage {stage} failed[/red]")
    document = ReportDocument(
        command="roundtrip",
        input_digest=digest,
        seed=settings.seed,
        passed=report.passed,
        reports=[report],
    )
    _finish(document, out, fmt)


@app.command()
def estimate(
    source: InputArg,
    grid: Annotated[
        str, typer.Option(help='Candidate lists as JSON, e.g. {"a": [0.75, 1], "eps": [0, 0.5]}')
    ],
    window: WindowOpt = None,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    fmt: FormatOpt = OutputFormat.JSON,
    out: OutOpt = None,
) -> None:
    """Search a grid of exponents for the smallest overall K_min."""
    settings = _settings(seed, threads)
    with _input_errors():
        (problem,), digest = _load(source)
        family = problem.require_tri()
        rates = [problem.rate(role) for role in ("h", "k", "mu", "nu")]
        exponent_grid = ExponentGrid.model_validate_json(grid)

    with _verdict_errors():
        result = estimate_exponents(
            problem.system, family, *rates, exponent_grid, window, settings=settings
        )
    best = result.params
    logger.info("best exponents a=%g b=%g eps=%g", best.a, best.b, best.eps)
    document = ReportDocument(
        command="estimate",
        input_digest=digest,
        seed=settings.seed,
        passed=math.isfinite(result.k_min),
        estimate={
            "a": best.a,
            "b": best.b,
            "eps": best.eps,
            "K": best.K,
            "k_min": result.k_min,
            "grid": result.table.to_dict(orient="records"),
        },
    )
    _finish(document, out, fmt)


@app.command()
def generate(
    source: Annotated[
        Path | None, typer.Argument(help="Document with a 'generate' block")
    ] = None,
    fixture: Annotated[
        str | None, typer.Option(help=f"Named fixture instead of a document: {sorted(FIXTURES)}")
    ] = None,
    out: Annotated[
        Path | None, typer.Option("--out", help="Write the document here instead of stdout")
    ] = None,
) -> None:
    """Materialize a generator spec into an explicit coefficient document."""
    with _input_errors():
        if fixture is not None and source is None:
            if fixture not in FIXTURES:
                raise DocumentError(f"unknown fixture; known: {sorted(FIXTURES)}", "--fixture")
            doc = SystemDocument(version=SCHEMA_VERSION, generate=FIXTURES[fixture]())
        elif source is not None and fixture is None:
            doc = parse_document(read_bytes(source), str(source))
            if doc.generate is None:
                raise DocumentError("'generate' block required", "generate")
        else:
            raise DocumentError("give exactly one of SOURCE and --fixture")
        problem = resolve(doc)

    explicit = system_document(
        problem.system,
        problem.family,
        problem.rates,
        problem.params.model_dump(exclude_none=True),
    )
    text = dump(explicit)
    if out is None:
        typer.echo(text, nl=False)
        return
    try:
        write_atomic(out, text)
    except OSError as e:
        console.print(f"[red]Error: cannot write {out}: {e.strerror}[/red]")
        raise typer.Exit(EXIT_INPUT) from e
    console.print(f"[green]Document saved to {out}[/green]")


if __name__ == "__main__":
    app()
