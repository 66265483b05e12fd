import json
import logging
import time
import uuid
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple

import json5
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from prodist.core.distribution import Distribution, validate
from prodist.core.errors import DistributionError, PbarNotPositive, ProdistError
from prodist.core.numeric import NumericField, render

app = typer.Typer(help="prodist: variational distance of n-fold product distributions")
config_app = typer.Typer(help="Manage prodist configuration")
app.add_typer(config_app, name="config")

console = Console()
err_console = Console(stderr=True)

EXIT_VALIDATION = 1
EXIT_INAPPLICABLE = 2

InputOption = typer.Option(..., "--input", "-i", help="JSON file with {\"p\": {...}, \"q\": {...}}")
NOption = typer.Option(..., "--n", "-n", min=1, help="Number of i.i.d. repetitions")
BackendOption = typer.Option(None, "--backend", "-b", help="rational or float (default from config)")
OutOption = typer.Option("csv", "--out", help="Table format: csv or json")
OutputOption = typer.Option(None, "--output", "-o", help="Write the table to this file instead of stdout")
SeedOption = typer.Option(None, "--seed", help="Monte Carlo seed (default from config)")


# ==============================================================================
# Plumbing
# ==============================================================================

def _config():
    from prodist.core.config import load_config
    return load_config()


def _backend(backend: Optional[str]) -> NumericField:
    if backend is None:
        return _config().numerics.backend
    try:
        return NumericField(backend)
    except ValueError:
        raise ValueError(f"Unknown backend '{backend}' (expected rational or float)") from None


def _load_pair(path: Path, field: NumericField) -> Tuple[Distribution, Distribution]:
    """Read and validate a {"p": ..., "q": ...} file (JSON5 accepted)."""
    with open(path, "r", encoding="utf-8") as f:
        data = json5.load(f)
    if not isinstance(data, dict) or "p" not in data or "q" not in data:
        raise DistributionError("Input must be an object with 'p' and 'q' distributions")
    tolerance = _config().numerics.sum_tolerance
    p = Distribution.from_json(data["p"], field)
    q = Distribution.from_json(data["q"], field)
    validate(p, tolerance)
    validate(q, tolerance)
    return p, q


def _enable_debug_logging() -> None:
    """Send prodist.* DEBUG records to stderr (config key ``debug``)."""
    root = logging.getLogger("prodist")
    root.setLevel(logging.DEBUG)
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        root.addHandler(RichHandler(console=err_console, show_path=False))


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        typer.echo(text, nl=not text.endswith("\n"))
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text, encoding="utf-8")
    console.print(f"[green]Wrote {output}[/green]")


def _log(event: str, data: Dict[str, Any], run_id: str, level: str = "INFO") -> None:
    try:
        from prodist.core.system_logger import SystemLogger
        SystemLogger.get_instance().log(event, data, run_id=run_id, level=level)
    except Exception as e:
        logging.getLogger("prodist.cli").debug(f"Run log unavailable: {e}")


@contextmanager
def _command(name: str, params: Dict[str, Any]) -> Iterator[None]:
    """Log the run and map library errors onto exit codes."""
    run_id = uuid.uuid4().hex[:12]
    started = time.perf_counter()
    outcome = "ok"
    try:
        if _config().debug:
            _enable_debug_logging()
        yield
    except PbarNotPositive as e:
        outcome = "inapplicable"
        _log("BOUND_INAPPLICABLE", {"command": name, "error": str(e)}, run_id, "WARNING")
        err_console.print(f"[yellow]{e}[/yellow]")
        raise typer.Exit(EXIT_INAPPLICABLE)
    except (DistributionError, ValidationError, ValueError, ProdistError, OSError) as e:
        outcome = "invalid"
        _log("VALIDATION_ERROR", {"command": name, "error": str(e)}, run_id, "ERROR")
        err_console.print(f"[red]Error: {e}[/red]")
        raise typer.Exit(EXIT_VALIDATION)
    finally:
        _log(
            "COMMAND_RUN",
            {
                "command": name,
                "params": {k: str(v) for k, v in params.items()},
                "duration_s": round(time.perf_counter() - started, 6),
                "outcome": outcome,
            },
            run_id,
        )


def _print_json(payload: Any) -> None:
    typer.echo(json.dumps(payload, indent=2, default=render))


# ==============================================================================
# Distance commands
# ==============================================================================

@app.command()
def dist(
    input: Path = InputOption,
    n: int = NOption,
    backend: Optional[str] = BackendOption,
    engine: str = typer.Option("auto", "--engine", "-e", help="auto, brute, type, two-point or mc"),
    samples: Optional[int] = typer.Option(None, "--samples", help="Monte Carlo samples for --engine mc"),
    seed: Optional[int] = SeedOption,
):
    """Compute delta(P^n, Q^n) with an exact engine (or Monte Carlo)."""
    from prodist.core.family import TwoPointFamily
    from prodist.engines import exact as engines
    from prodist.engines.sampling import mc_distance
    from prodist.proof.bounds import exact_distance

    with _command("dist", {"input": input, "n": n, "backend": backend, "engine": engine}):
        field = _backend(backend)
        p, q = _load_pair(input, field)
        cfg = _config()
        query = engines.ProductQuery(p=p, q=q, n=n)
        if engine == "auto":
            used, value = exact_distance(
                p, q, n,
                brute_force_limit=cfg.engines.brute_force_limit,
                type_class_limit=cfg.engines.type_class_limit,
                partitions=cfg.engines.partitions,
                equality_tolerance=cfg.numerics.equality_tolerance,
            )
            if used is None:
                raise ValueError("Every exact engine refused the instance; try --engine mc")
        elif engine == "brute":
            used, value = engine, engines.brute_force_distance(query, cfg.engines.brute_force_limit)
        elif engine == "type":
            used, value = engine, engines.type_class_distance(
                query, cfg.engines.type_class_limit, cfg.engines.partitions
            )
        elif engine == "two-point":
            family, t = TwoPointFamily.from_pair(p, q, cfg.numerics.equality_tolerance)
            used, value = engine, engines.two_point_distance(family, t, n)
        elif engine == "mc":
            estimate = mc_distance(
                query,
                samples or cfg.sampling.samples,
                cfg.sampling.seed if seed is None else seed,
                cfg.sampling.shards,
                cfg.sampling.confidence,
            )
            _print_json({"n": n, "engine": "mc", **estimate.model_dump()})
            return
        else:
            raise ValueError(f"Unknown engine '{engine}'")
        _print_json({"n": n, "engine": used, "backend": field.value, "distance": value, "float": float(value)})


@app.command()
def mc(
    input: Path = InputOption,
    n: int = NOption,
    samples: Optional[int] = typer.Option(None, "--samples", help="Number of samples (>= 100)"),
    seed: Optional[int] = SeedOption,
    shards: Optional[int] = typer.Option(None, "--shards", help="Independent generator streams"),
):
    """Monte Carlo estimate of delta(P^n, Q^n) with a 95% interval."""
    from prodist.engines.exact import ProductQuery
    from prodist.engines.sampling import mc_distance

    with _command("mc", {"input": input, "n": n, "samples": samples, "seed": seed, "shards": shards}):
        cfg = _config()
        p, q = _load_pair(input, NumericField.FLOAT)
        estimate = mc_distance(
            ProductQuery(p=p, q=q, n=n),
            samples or cfg.sampling.samples,
            cfg.sampling.seed if seed is None else seed,
            shards or cfg.sampling.shards,
            cfg.sampling.confidence,
        )
        _print_json(estimate.model_dump())


@app.command()
def bound(
    input: Path = InputOption,
    n: int = NOption,
    backend: Optional[str] = BackendOption,
    exact: bool = typer.Option(True, "--exact/--no-exact", help="Also compute the exact distance"),
    mc_samples: Optional[int] = typer.Option(None, "--mc-samples", help="Fall back to Monte Carlo when exact engines refuse"),
    seed: Optional[int] = SeedOption,
):
    """Print every applicable bound (BoundReport) as JSON."""
    from prodist.proof.bounds import bound_report

    with _command("bound", {"input": input, "n": n, "backend": backend}):
        field = _backend(backend)
        p, q = _load_pair(input, field)
        cfg = _config()
        report = bound_report(
            p, q, n,
            compute_exact=exact,
            brute_force_limit=cfg.engines.brute_force_limit,
            type_class_limit=cfg.engines.type_class_limit,
            mc_samples=mc_samples,
            seed=cfg.sampling.seed if seed is None else seed,
            ulps=cfg.numerics.upward_ulps,
            partitions=cfg.engines.partitions,
            equality_tolerance=cfg.numerics.equality_tolerance,
        )
        typer.echo(report.model_dump_json(indent=2))
        if report.pbar is not None and not report.applicable.get("lemma1_first"):
            raise PbarNotPositive(report.pbar)


@app.command()
def chain(
    input: Path = InputOption,
    n: Optional[int] = typer.Option(None, "--n", "-n", min=1, help="Also assemble the bound for this n"),
    backend: Optional[str] = BackendOption,
):
    """Decompose (P, Q) into a two-point chain and print it as JSON."""
    from prodist.proof.chain import chain_bound_assembly, chain_invariants, two_point_chain

    with _command("chain", {"input": input, "n": n, "backend": backend}):
        field = _backend(backend)
        p, q = _load_pair(input, field)
        cfg = _config()
        tolerance = cfg.numerics.equality_tolerance
        decomposition = two_point_chain(p, q, tolerance)
        payload: Dict[str, Any] = {
            **decomposition.to_json(),
            "invariants": chain_invariants(decomposition, p, q, tolerance, cfg.numerics.sum_tolerance),
        }
        if n is not None:
            report = chain_bound_assembly(
                p, q, n,
                assembly_limit=cfg.experiments.assembly_limit,
                ulps=cfg.numerics.upward_ulps,
                equality_tolerance=tolerance,
            )
            payload["assembly"] = json.loads(report.model_dump_json())
        _print_json(payload)


# ==============================================================================
# Experiments
# ==============================================================================

@app.command()
def sweep(
    input: Path = InputOption,
    n_max: int = typer.Option(..., "--n-max", min=1, help="Largest n"),
    backend: Optional[str] = BackendOption,
    out: str = OutOption,
    output: Optional[Path] = OutputOption,
):
    """Exact distance against every bound for n = 1..n_max."""
    from prodist.experiments.probes import growth_sweep
    from prodist.experiments.reporting import render_table

    with _command("sweep", {"input": input, "n_max": n_max, "backend": backend}):
        field = _backend(backend)
        p, q = _load_pair(input, field)
        cfg = _config()
        table = growth_sweep(
            p, q, n_max,
            type_class_limit=cfg.engines.type_class_limit,
            ulps=cfg.numerics.upward_ulps,
            equality_tolerance=cfg.numerics.equality_tolerance,
        )
        _emit(render_table(table, out), output)


@app.command()
def tightness(
    pbar: str = typer.Option(..., "--pbar", help="Minimum differing probability, 0 < pbar < 1/2"),
    n_max: int = typer.Option(..., "--n-max", min=1),
    delta: Optional[str] = typer.Option(None, "--delta", help="Single-letter distance of the probe pair"),
    regime: Optional[float] = typer.Option(None, "--regime", help="In-regime filter: exact below this value"),
    points: Optional[int] = typer.Option(None, "--points", help="Geometric grid size instead of every n"),
    backend: Optional[str] = BackendOption,
    out: str = OutOption,
    output: Optional[Path] = OutputOption,
):
    """Quotient of the exact distance and the first square-root bound as n grows."""
    from prodist.experiments.probes import tightness_probe
    from prodist.experiments.reporting import render_table

    with _command("tightness", {"pbar": pbar, "n_max": n_max, "delta": delta}):
        cfg = _config()
        field = _backend(backend)
        table = tightness_probe(
            pbar,
            n_max,
            delta=delta if delta is not None else cfg.experiments.probe_delta,
            regime=regime if regime is not None else cfg.experiments.regime,
            points=points,
            field=field,
            ulps=cfg.numerics.upward_ulps,
        )
        _emit(render_table(table, out), output)


@app.command()
def constant(
    n_max: int = typer.Option(..., "--n-max", min=1),
    points: Optional[int] = typer.Option(None, "--points", help="Geometric grid size instead of every n"),
    backend: Optional[str] = BackendOption,
    out: str = OutOption,
    output: Optional[Path] = OutputOption,
):
    """The constant c in delta(P^n,Q^n) = sqrt(c n / pbar) delta(P,Q) over a probe grid."""
    from prodist.experiments.probes import constant_probe
    from prodist.experiments.reporting import render_table

    with _command("constant", {"n_max": n_max, "points": points}):
        cfg = _config().experiments
        table = constant_probe(n_max, cfg.pbars, cfg.deltas, points=points, field=_backend(backend))
        _emit(render_table(table, out), output)
        err_console.print(f"[bold green]sup c_required = {table.meta['sup_c_required']:.6f}[/bold green]")


@app.command()
def pathint(
    input: Path = InputOption,
    n: int = NOption,
    grid: Optional[int] = typer.Option(None, "--grid", min=1, help="Riemann grid cells"),
    backend: Optional[str] = BackendOption,
):
    """Distance along the straight two-point path from P to Q against the integrated derivative bound."""
    from prodist.core.family import TwoPointFamily
    from prodist.experiments.probes import lemma1_path_bound, path_integral_check

    with _command("pathint", {"input": input, "n": n, "grid": grid}):
        field = _backend(backend)
        p, q = _load_pair(input, field)
        cfg = _config()
        family, t_q = TwoPointFamily.from_pair(p, q, cfg.numerics.equality_tolerance)
        cells = grid or cfg.experiments.grid
        ulps = cfg.numerics.upward_ulps
        result = path_integral_check(family, family.t0, t_q, n, cells, ulps)
        _print_json({
            "n": n,
            "grid": cells,
            "distance": result.distance,
            "integral": result.integral,
            "path_bound": lemma1_path_bound(family, family.t0, t_q, n, ulps),
        })


@app.command()
def derivative(
    input: Path = InputOption,
    n: int = NOption,
    backend: Optional[str] = BackendOption,
    method: str = typer.Option("closed", "--method", help="closed (O(n)) or direct (O(n^2))"),
    table: bool = typer.Option(False, "--table", help="Print the per-k decomposition"),
):
    """Right derivative along the two-point path from P towards Q, with both derivative bounds."""
    from prodist.core.family import TwoPointFamily
    from prodist.proof.derivative import decompose, derivative_bounds

    with _command("derivative", {"input": input, "n": n, "method": method}):
        field = _backend(backend)
        p, q = _load_pair(input, field)
        cfg = _config()
        family, _ = TwoPointFamily.from_pair(p, q, cfg.numerics.equality_tolerance)
        value, first, second = derivative_bounds(family, n, method, cfg.numerics.upward_ulps)
        if table:
            view = Table(show_header=True, header_style="bold magenta")
            for column in ("k", "q(k)", "rbar", "inner sum", "gamma"):
                view.add_column(column)
            for term in decompose(family, n).terms:
                view.add_row(
                    str(term.k), f"{float(term.qk):.6g}", str(term.rbar),
                    f"{float(term.inner_sum):.6g}", f"{float(term.gamma):.6g}",
                )
            err_console.print(view)
        _print_json({"n": n, "derivative": value, "float": float(value), "lemma2_first": first, "lemma2_second": second})


# ==============================================================================
# Configuration
# ==============================================================================

@config_app.command("get")
def config_get(key: str):
    """Print a configuration value by dotted key (e.g. engines.type_class_limit)."""
    from prodist.core.config import get_value, load_config

    try:
        value = get_value(load_config(), key)
    except KeyError:
        console.print(f"[red]Key '{key}' not found.[/red]")
        raise typer.Exit(EXIT_VALIDATION)
    if isinstance(value, dict):
        console.print_json(json.dumps(value))
    else:
        typer.echo(str(value))


@config_app.command("set")
def config_set(key: str, value: str):
    """Set a configuration value (parsed as JSON5 when possible) and save it."""
    from prodist.core.config import ConfigLoader, load_config, set_value

    try:
        updated = set_value(load_config(), key, value)
    except KeyError:
        console.print(f"[red]Key '{key}' not found.[/red]")
        raise typer.Exit(EXIT_VALIDATION)
    except ValidationError as e:
        console.print(f"[red]Failed to set value (Validation Error): {e}[/red]")
        raise typer.Exit(EXIT_VALIDATION)
    path = ConfigLoader.save(updated)
    load_config(reload=True)
    console.print(f"[green]Set '{key}' in {path}[/green]")


@config_app.command("unset")
def config_unset(key: str):
    """Restore a configuration value to its default."""
    from prodist.core.config import ConfigLoader, load_config, unset_value

    try:
        updated = unset_value(load_config(), key)
    except KeyError:
        console.print(f"[red]Key '{key}' not found.[/red]")
        raise typer.Exit(EXIT_VALIDATION)
    ConfigLoader.save(updated)
    load_config(reload=True)
    console.print(f"[green]Unset '{key}'[/green]")


if __name__ == "__main__":
    app()
