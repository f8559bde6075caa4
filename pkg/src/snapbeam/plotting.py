"""Static SVG figures for paths, energy landscapes and pressure traces.

Figures are built with the object-oriented matplotlib API (no pyplot
state) and saved with a fixed hash salt and no date stamp, so repeated
runs write identical files.
"""

from __future__ import annotations

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
import numpy as np

_RC = {"svg.hashsalt": "snapbeam", "font.size": 9, "axes.grid": True, "grid.alpha": 0.3}


def _save(fig: Figure, filename) -> None:
    with matplotlib.rc_context(_RC):
        FigureCanvasSVG(fig)
        fig.savefig(filename, format="svg", metadata={"Date": None})


def _new(ncols=1, width=7.0, height=3.2):
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(width, height), layout="constrained")
        axes = fig.subplots(1, ncols)
    return fig, np.atleast_1d(axes)


def plot_path(model, path, control_dof, filename, every=10, limit_points=()):
    """Deformed shapes (every ``every``-th point) and lambda vs control displacement."""
    fig, (ax_shape, ax_curve) = _new(2)
    xy = model.coordinates()
    n = len(xy)
    pts = path.points
    picks = list(range(0, len(pts), max(1, every)))
    if picks[-1] != len(pts) - 1:
        picks.append(len(pts) - 1)
    cmap = matplotlib.colormaps["viridis"]
    for k, i in enumerate(picks):
        q = pts[i].state.q
        x = xy[:, 0] + q[0:3 * n:3]
        y = xy[:, 1] + q[1:3 * n:3]
        ax_shape.plot(x, y, color=cmap(k / max(1, len(picks) - 1)), lw=1.0)
    ax_shape.plot(xy[:, 0], xy[:, 1], "k--", lw=0.8, label="reference")
    ax_shape.set_aspect("equal", adjustable="datalim")
    ax_shape.set_xlabel("x [m]")
    ax_shape.set_ylabel("y [m]")
    ax_shape.legend(loc="best", frameon=False)

    d = path.dof(control_dof)
    ax_curve.plot(d, path.lambdas, "-", color="C0", lw=1.2)
    for lp in limit_points:
        j = lp.path_index[1]
        ax_curve.plot(d[j], lp.lambda_star, "o", color="C3", ms=4)
    ax_curve.axhline(0.0, color="k", lw=0.6)
    ax_curve.set_xlabel(f"q[{control_dof}]")
    ax_curve.set_ylabel("load factor")
    _save(fig, filename)


def plot_landscape(points, filename, stable_displacements=()):
    fig, (ax_e, ax_r) = _new(2)
    d = np.array([p.displacement for p in points])
    e = np.array([p.energy for p in points])
    r = np.array([p.reaction for p in points])
    ax_e.plot(d, e, "-", color="C0")
    for ds in stable_displacements:
        ax_e.axvline(ds, color="C3", lw=0.8, ls=":")
    ax_e.set_xlabel("control displacement [m]")
    ax_e.set_ylabel("potential energy [J]")
    ax_r.plot(d, r, "-", color="C1")
    ax_r.axhline(0.0, color="k", lw=0.6)
    ax_r.set_xlabel("control displacement [m]")
    ax_r.set_ylabel("reaction [N]")
    _save(fig, filename)


def plot_trace(trace, filename, peaks=(), events=()):
    fig, (ax,) = _new(1, width=6.0)
    ax.plot([s.t for s in trace], [s.p for s in trace], "-", color="C0", lw=1.0)
    if peaks:
        ax.plot([t for t, _ in peaks], [p for _, p in peaks], "v", color="C3", ms=5)
    for e in events:
        ax.axvline(e.t, color="0.5", lw=0.6, ls="--")
    ax.set_xlabel("sample")
    ax.set_ylabel("pressure [sensor units]")
    _save(fig, filename)
