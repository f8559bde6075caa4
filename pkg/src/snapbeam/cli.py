"""Command-line interface: generate scenarios, trace paths, analyse
bistability and run the grasp controller emulation.

Data outputs are CSV and JSON with exact float round-trips; SVG figures
are optional presentation extras.
"""

from __future__ import annotations

import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import click
import numpy as np

from . import bistability as bst
from . import scenarios as sc
from .model import Material, ScenarioError, dump_scenario, read_scenario
from .sensing import (GraspControllerConfig, TraceFormatError, detect_peaks, events_to_csv,
                      read_trace_csv, run_controller)
from .solver import (DIVERGENCE, STEP_UNDERFLOW, ConvergenceError, EquilibriumPath, PathPoint,
                     State, constrained_start, continue_path, default_settings,
                     two_step_protocol)

FAILED = (DIVERGENCE, STEP_UNDERFLOW)


def bundled_trace_path() -> Path:
    return Path(str(resources.files("snapbeam") / "data" / "opening_trace.csv"))


def _num(x) -> str:
    return format(float(x), ".17g")


def _json_num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")


# -- parameter checks ----------------------------------------------------------

def _check(cond):
    def callback(ctx, param, value):
        if value is not None and not cond(value):
            raise click.BadParameter(f"{value!r} is out of range", ctx=ctx, param=param)
        return value
    return callback


positive = _check(lambda v: v > 0)
non_negative = _check(lambda v: v >= 0)
finite = _check(math.isfinite)


@click.group()
@click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path), default=Path("."),
              show_default=True, help="Output directory.")
@click.option("--svg", is_flag=True, help="Also write SVG figures.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Parallel workers across independent scenario files.")
@click.option("--seed", type=int, default=None, help="Reserved; no command uses randomness.")
@click.pass_context
def cli(ctx, out, svg, jobs, seed):
    """Snap-through analysis of bistable beam structures."""
    ctx.obj = {"out": out, "svg": svg, "jobs": jobs, "seed": seed}


def _out_dir(ctx) -> Path:
    out = ctx.obj["out"]
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- generate ------------------------------------------------------------------

@cli.group()
def generate():
    """Write a scenario file for one of the built-in geometries."""


def _emit(ctx, model, output, default_name):
    path = _out_dir(ctx) / (output or default_name)
    path.write_text(dump_scenario(model), encoding="utf-8")
    click.echo(str(path))


@generate.command("arch")
@click.option("--span", type=float, default=0.1, show_default=True, callback=positive)
@click.option("--rise", type=float, default=0.008, show_default=True, callback=non_negative)
@click.option("--n", "n", type=int, default=32, show_default=True,
              callback=_check(lambda v: v >= 4 and v % 2 == 0))
@click.option("--profile", type=click.Choice(sc.PROFILES), default="half_sine", show_default=True)
@click.option("--ends", type=click.Choice(sc.END_TYPES), default="pinned", show_default=True)
@click.option("--imperfection", type=float, default=0.01, show_default=True, callback=finite)
@click.option("--thickness", type=float, default=sc.DEMO_THICKNESS, show_default=True,
              callback=positive)
@click.option("--width", type=float, default=sc.DEMO_WIDTH, show_default=True, callback=positive)
@click.option("--E", "E", type=float, default=sc.DEMO_E, show_default=True, callback=positive)
@click.option("--rho", type=float, default=sc.DEMO_RHO, show_default=True, callback=non_negative)
@click.option("--output", "-o", default=None, help="File name inside --out.")
@click.pass_context
def generate_arch(ctx, span, rise, n, profile, ends, imperfection, thickness, width, E, rho,
                  output):
    """Shallow arch with a downward apex force."""
    mat = sc.demo_material(thickness=thickness, width=width, E=E, rho=rho)
    spec = sc.ArchSpec(span, rise, profile, n, mat, ends, imperfection)
    _emit(ctx, sc.make_shallow_arch(spec), output, "arch.json")


@generate.command("vertical-beam")
@click.option("--length", type=float, default=0.05, show_default=True, callback=positive)
@click.option("--n", "n", type=int, default=16, show_default=True, callback=_check(lambda v: v >= 4))
@click.option("--tip-force", type=float, default=0.005, show_default=True, callback=finite)
@click.option("--thickness", type=float, default=0.002, show_default=True, callback=positive)
@click.option("--width", type=float, default=sc.DEMO_WIDTH, show_default=True, callback=positive)
@click.option("--E", "E", type=float, default=sc.DEMO_E, show_default=True, callback=positive)
@click.option("--rho", type=float, default=sc.DEMO_RHO, show_default=True, callback=non_negative)
@click.option("--output", "-o", default=None, help="File name inside --out.")
@click.pass_context
def generate_vertical_beam(ctx, length, n, tip_force, thickness, width, E, rho, output):
    """Clamped vertical beam under gravity with a transverse tip force."""
    mat = Material.rectangular("silicone", E, width, thickness, rho)
    model = sc.make_vertical_beam(length, n, mat, tip_force)
    _emit(ctx, model, output, "vertical_beam.json")


@generate.command("von-mises")
@click.option("--half-span", type=float, default=1.0, show_default=True, callback=positive)
@click.option("--rise", type=float, default=0.1, show_default=True, callback=positive)
@click.option("--E", "E", type=float, default=2.0e11, show_default=True, callback=positive)
@click.option("--A", "A", type=float, default=1.0e-4, show_default=True, callback=positive)
@click.option("--output", "-o", default=None, help="File name inside --out.")
@click.pass_context
def generate_von_mises(ctx, half_span, rise, E, A, output):
    """Two-bar shallow truss loaded at the apex."""
    model = sc.make_von_mises_truss(half_span, rise, Material("steel", E, A, 1.0, 0.0))
    _emit(ctx, model, output, "von_mises.json")


@generate.command("cantilever")
@click.option("--length", type=float, default=1.0, show_default=True, callback=positive)
@click.option("--n", "n", type=int, default=20, show_default=True, callback=_check(lambda v: v >= 1))
@click.option("--tip-force", type=float, default=3e-4, show_default=True, callback=finite)
@click.option("--E", "E", type=float, default=1e6, show_default=True, callback=positive)
@click.option("--A", "A", type=float, default=1e-2, show_default=True, callback=positive)
@click.option("--I", "I", type=float, default=1e-6, show_default=True, callback=positive)
@click.option("--output", "-o", default=None, help="File name inside --out.")
@click.pass_context
def generate_cantilever(ctx, length, n, tip_force, E, A, I, output):
    """Horizontal cantilever with a transverse tip force."""
    model = sc.make_cantilever(length, n, Material("beam", E, A, I, 0.0), tip_force)
    _emit(ctx, model, output, "cantilever.json")


# -- trace ---------------------------------------------------------------------

def path_csv(path: EquilibriumPath, n_dofs: int) -> str:
    head = ["step", "lambda", "energy", "min_eig", "det_sign"] + [f"q_{i}" for i in range(n_dofs)]
    lines = [",".join(head)]
    for i, p in enumerate(path.points):
        row = [str(i), _num(p.state.lam), _num(p.energy), _num(p.min_eigenvalue), str(p.det_sign)]
        row += [_num(v) for v in p.state.q]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _control_dof(model, settings):
    if settings.control_dof is not None:
        return int(settings.control_dof)
    F = np.abs(model.reference_load())
    return int(np.argmax(F)) if np.any(F) else 0


def _state_row(path, i, control):
    p = path.points[i]
    return {"step": i, "lambda": p.state.lam, "energy": _json_num(p.energy),
            "control_displacement": float(p.state.q[control]),
            "min_eig": _json_num(p.min_eigenvalue), "det_sign": p.det_sign,
            "stable": bool(p.det_sign > 0 and p.min_eigenvalue > 0)}


def _settings_doc(s):
    return {k: getattr(s, k) for k in s.__dataclass_fields__}


def run_trace(scenario: str, out: str, overrides: dict, svg: bool, every: int) -> dict:
    """Trace one scenario file; returns a small status record."""
    t0 = time.perf_counter()
    model = read_scenario(scenario)
    s = default_settings(model).replace(**overrides)
    model = model.with_settings(s)
    stem = Path(scenario).stem
    out = Path(out)
    error = None
    try:
        path = two_step_protocol(model, s) if model.load.gravity else continue_path(model, s)
    except ConvergenceError as exc:
        q = constrained_start(model)
        lam = exc.lam if exc.lam is not None else 0.0
        path = EquilibriumPath([PathPoint(State(q, lam), math.nan, math.nan, 0, 0)], DIVERGENCE)
        error = str(exc)
    control = _control_dof(model, s)
    (out / f"{stem}.csv").write_text(path_csv(path, model.n_dofs), encoding="utf-8")

    limits = bst.find_limit_points(path)
    lam = path.lambdas
    states = [_state_row(path, 0, control)]
    j = bst._far_crossing(path, limits)
    if j is not None:
        states.append(_state_row(path, j, control))
    report = {
        "scenario": stem,
        "settings": _settings_doc(s),
        "control_dof": control,
        "path": {
            "points": len(path),
            "termination": path.termination,
            "error": error,
            "step_boundary": path.step_boundary,
            "lambda_sign_changes": int(np.count_nonzero(np.diff(np.sign(
                np.diff(lam)[np.diff(lam) != 0])))) if len(lam) > 2 else 0,
            "limit_points": [{"rows": list(lp.path_index), "lambda_star": lp.lambda_star,
                              "kind": lp.kind} for lp in limits],
        },
        "states": states,
    }
    _write_json(out / f"{stem}_report.json", report)
    if svg:
        from .plotting import plot_path
        plot_path(model, path, control, out / f"{stem}.svg", every=every, limit_points=limits)
    return {"scenario": stem, "termination": path.termination, "points": len(path),
            "wall_time": time.perf_counter() - t0, "ok": path.termination not in FAILED}


def _map(jobs, fn, args_list):
    if jobs > 1 and len(args_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, *zip(*args_list)))
    return [fn(*a) for a in args_list]


def _finish(results):
    ok = True
    for r in results:
        click.echo(f"{r['scenario']}: {r['termination']}, {r['points']} points, "
                   f"{r['wall_time']:.2f} s")
        ok &= r["ok"]
    if not ok:
        sys.exit(1)


@cli.command()
@click.argument("scenarios", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["load_control", "displacement_control",
                                             "arc_length"]), default=None)
@click.option("--control-dof", type=int, default=None, callback=_check(lambda v: v >= 0))
@click.option("--initial-step", type=float, default=None, callback=positive)
@click.option("--min-step", type=float, default=None, callback=positive)
@click.option("--max-step", type=float, default=None, callback=positive)
@click.option("--max-steps", type=int, default=None, callback=positive)
@click.option("--newton-tol", type=float, default=None, callback=positive)
@click.option("--target-lambda", type=float, default=None, callback=finite)
@click.option("--target-displacement", type=float, default=None, callback=finite)
@click.option("--every", type=int, default=10, show_default=True, callback=positive,
              help="Draw every k-th deformed shape in the SVG.")
@click.pass_context
def trace(ctx, scenarios, every, **overrides):
    """Trace the equilibrium path of each scenario file."""
    out = _out_dir(ctx)
    try:
        for f in scenarios:  # fail fast on bad files or overrides
            default_settings(read_scenario(f)).replace(**overrides)
    except ScenarioError as exc:
        raise click.ClickException(str(exc)) from None
    args = [(f, str(out), overrides, ctx.obj["svg"], every) for f in scenarios]
    _finish(_map(ctx.obj["jobs"], run_trace, args))


# -- bistable ------------------------------------------------------------------

def _stable_doc(model, st, control):
    return {"energy": st.energy, "control_displacement": float(st.state.q[control]),
            "lambda": st.state.lam, "stable": st.stable, "min_eig": _json_num(st.min_eigenvalue)}


def run_bistable(scenario: str, out: str, samples: int, svg: bool) -> dict:
    t0 = time.perf_counter()
    model = read_scenario(scenario)
    stem = Path(scenario).stem
    out = Path(out)
    res = bst.analyze(model)
    control = res.trigger_dof
    d1 = float(res.first.state.q[control])
    doc = {
        "scenario": stem,
        "control_dof": control,
        "limit_points": [{"rows": list(lp.path_index), "lambda_star": lp.lambda_star,
                          "kind": lp.kind} for lp in res.limit_points],
        "path_termination": res.path.termination,
    }
    if res.bistable:
        d2 = float(res.second.state.q[control])
        lo, hi = sorted((d1 - 0.25 * (d2 - d1), d1 + 1.25 * (d2 - d1)))
        doc.update({
            "monostable": False,
            "stable_states": [_stable_doc(model, res.first, control),
                              _stable_doc(model, res.second, control)],
            "energy_barrier": res.energy_barrier,
            "trigger_force": res.trigger_force,
        })
    else:
        reach = float(np.max(np.abs(res.path.dof(control) - d1)))
        if reach < 1e-9 * model.scale:
            reach = 0.05 * model.scale
        lo, hi = d1 - reach, d1 + reach
        doc.update({"monostable": True,
                    "stable_states": [_stable_doc(model, res.first, control)]})
        if isinstance(res.second, bst.StableState):
            doc["unstable_far_state"] = _stable_doc(model, res.second, control)
    land = bst.energy_landscape(model, control, lo, hi, samples, res.first.state)
    doc["landscape_minima"] = [land[i].displacement for i in bst.landscape_minima(land)]
    lines = ["control_displacement,energy,reaction"]
    lines += [f"{_num(p.displacement)},{_num(p.energy)},{_num(p.reaction)}" for p in land]
    (out / f"{stem}_landscape.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / f"{stem}_bistable.json", doc)
    if svg:
        from .plotting import plot_landscape
        marks = [s["control_displacement"] for s in doc["stable_states"]]
        plot_landscape(land, out / f"{stem}_landscape.svg", marks)
    term = res.path.termination
    return {"scenario": stem, "termination": "monostable" if doc["monostable"] else "bistable",
            "points": len(res.path), "wall_time": time.perf_counter() - t0,
            "ok": term not in FAILED}


@cli.command()
@click.argument("scenarios", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--samples", type=int, default=121, show_default=True,
              callback=_check(lambda v: v >= 3), help="Landscape sample count.")
@click.pass_context
def bistable(ctx, scenarios, samples):
    """Stable states, energy barrier, trigger force and energy landscape."""
    out = _out_dir(ctx)
    try:
        for f in scenarios:
            read_scenario(f)
    except ScenarioError as exc:
        raise click.ClickException(str(exc)) from None
    args = [(f, str(out), samples, ctx.obj["svg"]) for f in scenarios]
    try:
        results = _map(ctx.obj["jobs"], run_bistable, args)
    except ConvergenceError as exc:
        raise click.ClickException(f"solver failure: {exc}") from None
    _finish(results)


# -- sense ---------------------------------------------------------------------

@cli.command()
@click.argument("trace_csv", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["active", "passive"]), default="active",
              show_default=True)
@click.option("--threshold", type=float, default=10.0, show_default=True, callback=finite,
              help="Vacuum threshold (active mode).")
@click.option("--band", type=float, default=0.0, show_default=True, callback=non_negative,
              help="Hysteresis band below the threshold for reopening.")
@click.option("--debounce", type=int, default=1, show_default=True,
              callback=_check(lambda v: v >= 1))
@click.option("--trigger-force", type=float, default=math.inf,
              help="Contact-force threshold (passive mode).")
@click.option("--min-prominence", type=float, default=2.0, show_default=True,
              callback=non_negative)
@click.pass_context
def sense(ctx, trace_csv, mode, threshold, band, debounce, trigger_force, min_prominence):
    """Replay a pressure trace (default: the bundled opening trace)."""
    out = _out_dir(ctx)
    src = Path(trace_csv) if trace_csv else bundled_trace_path()
    try:
        samples = read_trace_csv(src.read_text(encoding="utf-8"))
    except TraceFormatError as exc:
        raise click.ClickException(f"{src}: {exc}") from None
    config = GraspControllerConfig(mode, threshold, band, debounce, trigger_force)
    state = run_controller(samples, config)
    peaks = detect_peaks(samples, min_prominence) if samples else []
    stem = src.stem
    (out / f"{stem}_events.csv").write_text(events_to_csv(state.events), encoding="utf-8")
    _write_json(out / f"{stem}_peaks.json", {
        "trace": src.name,
        "min_prominence": min_prominence,
        "peaks": [{"t": t, "p": p} for t, p in peaks],
        "final_phase": state.phase,
    })
    if ctx.obj["svg"]:
        from .plotting import plot_trace
        plot_trace(samples, out / f"{stem}_trace.svg", peaks, state.events)
    click.echo(f"{stem}: {len(state.events)} events, peaks "
               + ", ".join(_num(p) for _, p in peaks))


def main():
    cli(prog_name="snapbeam")


if __name__ == "__main__":
    main()
