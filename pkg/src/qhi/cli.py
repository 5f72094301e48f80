"""Command line interface: ``qhi validate|move|solve|decorate|statesum|verify|report``."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .decor import solve_charges, solve_flattenings, weights
from .gluing import CrossRatioPoint, build_cusp_section, build_equations, solve, solve_complete
from .harness import (
    Targets,
    default_guess,
    emit_report,
    homotopy_rows,
    run_pipeline,
    run_suite,
    state_sum_rows,
    suite_rows,
)
from .moves import MoveError, TransitRecord, apply_record
from .triangulation import TriangulationError, load, save, validate


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        click.echo(text)


def _complex_pairs(data) -> list[complex]:
    return [complex(a, b) for a, b in data]


def _load_with_section(source: str):
    tri, wb, data = load(source)
    if wb is None:
        raise click.ClickException(f"{source} has no vertex orders")
    return tri, wb, build_cusp_section(tri, wb, data.get("cusp_basis"))


@click.group()
def main() -> None:
    """Quantum hyperbolic state sums on weakly branched triangulations."""


@main.command("validate")
@click.option("--in", "source", required=True, help="Triangulation file or census name.")
def validate_cmd(source: str) -> None:
    """Check the structural invariants of a triangulation."""
    try:
        tri, wb, _ = load(source)
    except TriangulationError as exc:
        raise click.ClickException(str(exc)) from exc
    report = validate(tri)
    out = {
        "name": tri.name,
        "ok": report.ok,
        "problems": report.problems,
        "edges": report.num_edges,
        "cusps": report.num_cusps,
        "manifold_vertices": report.num_manifold_vertices,
        "weak_branching": wb is not None,
    }
    if wb is not None:
        out["colors"] = list(wb.colors)
        out["signs"] = list(wb.signs)
    click.echo(json.dumps(out, indent=2))
    sys.exit(0 if report.ok else 1)


@main.command("move")
@click.option("--in", "source", required=True, help="Triangulation file or census name.")
@click.option("--script", "script", required=True, type=click.Path(exists=True), help="JSON list of move records.")
@click.option("--out", "out", required=True, type=click.Path(), help="Output triangulation file.")
def move_cmd(source: str, script: str, out: str) -> None:
    """Apply a JSON script of moves to the combinatorial data."""
    tri, wb, _ = load(source)
    if wb is None:
        raise click.ClickException(f"{source} has no vertex orders")
    applied = []
    for entry in json.loads(Path(script).read_text()):
        try:
            record = TransitRecord.from_json(entry)
        except (KeyError, TypeError, ValueError) as exc:
            raise click.ClickException(f"malformed move record {entry}: {exc}") from exc
        try:
            tri, wb, rec = apply_record(tri, wb, record)
        except MoveError as exc:
            raise click.ClickException(f"move {entry}: {exc}") from exc
        applied.append(rec.to_json())
    save(out, tri, wb, moves=applied)
    click.echo(json.dumps({"tets": tri.num_tets, "colors": list(wb.colors), "moves": len(applied)}))


@main.command("solve")
@click.option("--in", "source", required=True, help="Triangulation file or census name.")
@click.option("--guess", "guess", type=click.Path(exists=True), help="JSON list of [re, im] per tetrahedron.")
@click.option("--complete/--no-complete", default=True, help="Also impose trivial cusp holonomy.")
@click.option("--out", "out", type=click.Path(), help="Point file (stdout if omitted).")
def solve_cmd(source: str, guess: str | None, complete: bool, out: str | None) -> None:
    """Solve the gluing equations by Newton iteration."""
    tri, wb, section = _load_with_section(source)
    start = _complex_pairs(json.loads(Path(guess).read_text())) if guess else default_guess(wb)
    system = build_equations(tri, wb)
    point = solve_complete(system, section, start) if complete else solve(system, start)
    data = point.to_json()
    data.update({"iterations": point.iterations, "residual": point.residual})
    _write(json.dumps(data, indent=2), out)


@main.command("decorate")
@click.option("--in", "source", required=True, help="Triangulation file or census name.")
@click.option("--point", "point_file", required=True, type=click.Path(exists=True))
@click.option("--kf-shift", nargs=2, type=int, default=(0, 0), help="k_f = d_w + i pi (shift) on (l, m).")
@click.option("--kc", nargs=2, type=int, default=(0, 0), help="k_c on (l, m).")
@click.option("--out", "out", type=click.Path())
def decorate_cmd(source: str, point_file: str, kf_shift, kc, out: str | None) -> None:
    """Solve for a flattening and a charge with the given weights."""
    tri, wb, section = _load_with_section(source)
    point = CrossRatioPoint.from_json(json.loads(Path(point_file).read_text()))
    d_w = [section.log_holonomy(point, loop) for loop in section.basis]
    f = solve_flattenings(point, section, [d + 1j * 3.141592653589793 * s for d, s in zip(d_w, kf_shift)])
    c = solve_charges(section, kc)
    w = weights(point, f, c, section)
    data = {
        "flattening": [list(v) for v in f.values],
        "flattening_free": [list(k) for k in f.kernel],
        "charge": [list(v) for v in c.values],
        "charge_free": [list(k) for k in c.kernel],
        "weights": w.to_json(),
    }
    _write(json.dumps(data, indent=2), out)


@main.command("statesum")
@click.option("--in", "source", required=True, help="Triangulation file or census name.")
@click.option("-N", "Ns", multiple=True, type=int, default=(3,), help="Odd N (repeatable); N = 1 gives the classical value.")
@click.option("--targets", "targets_file", type=click.Path(exists=True), help="JSON decoration targets.")
@click.option("--out", "out", type=click.Path())
def statesum_cmd(source: str, Ns, targets_file: str | None, out: str | None) -> None:
    """Solve, decorate and evaluate H_N with provenance."""
    targets = Targets.from_json(json.loads(Path(targets_file).read_text())) if targets_file else Targets()
    result = run_pipeline(source, targets, Ns)
    _write(json.dumps(result.to_json(), indent=2), out)


@main.command("verify")
@click.option("--suite", "suite", multiple=True, default=("all",), help="Scenario name (repeatable) or 'all'.")
@click.option("--seed", type=int, default=None, help="Overrides QHI_SEED.")
@click.option("--json", "json_out", type=click.Path(), help="Write the full results as JSON.")
def verify_cmd(suite, seed: int | None, json_out: str | None) -> None:
    """Run verification scenarios; exit code 0 iff all pass."""
    try:
        results = run_suite(list(suite), seed)
    except KeyError as exc:
        raise click.ClickException(str(exc)) from exc
    for r in results:
        worst = max((c.deviation for c in r.checks), default=0.0)
        line = f"{r.status.upper():6s} {r.name:26s} checks={len(r.checks):4d} max_dev={worst:.3e} {r.seconds:.2f}s"
        if r.error:
            line += f"  [{r.error}]"
        click.echo(line)
    if json_out:
        Path(json_out).write_text(json.dumps([r.to_json() for r in results], indent=2) + "\n")
    sys.exit(0 if all(r.passed for r in results) else 1)


@main.command("report")
@click.option("--in", "source", default="m003", help="Triangulation file or census name.")
@click.option("-N", "Ns", multiple=True, type=int, default=(3, 5, 7, 9))
@click.option("--homotopy", nargs=2, type=float, default=None, help="Target log holonomy (re im) of the first loop.")
@click.option("--steps", type=int, default=20)
@click.option("--suite", "suite", multiple=True, help="Tabulate scenario results instead.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--out", "out", type=click.Path())
def report_cmd(source: str, Ns, homotopy, steps: int, suite, fmt: str, out: str | None) -> None:
    """Tables of H_N, alpha_N, H_N,red, volumes and holonomies."""
    if suite:
        rows = suite_rows(run_suite(list(suite)))
    elif homotopy is not None:
        rows = homotopy_rows(source, complex(*homotopy), steps, Ns)
    else:
        rows = state_sum_rows(source, Ns)
    _write(emit_report(rows, fmt), out)


if __name__ == "__main__":
    main()
