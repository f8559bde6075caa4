"""Limit points, stability, the second stable state and the trigger force."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .corotational import assemble, global_internal
from .model import Model
from .solver import (ConvergenceError, EquilibriumPath, State, StabilityGauge,
                     continue_path, default_settings, gravity_equilibrium, residual_norm,
                     solve_at_load)

MONOSTABLE = "monostable"


class NotEquilibriumError(ValueError):
    pass


class MonostableError(ValueError):
    pass


@dataclass(frozen=True)
class LimitPoint:
    path_index: tuple
    lambda_star: float
    kind: str  # "maximum" | "minimum"


@dataclass(frozen=True)
class StableState:
    state: State
    energy: float
    stable: bool
    min_eigenvalue: float


@dataclass(frozen=True)
class LandscapePoint:
    displacement: float
    energy: float
    reaction: float
    converged: bool = True


def _abscissa(path: EquilibriumPath) -> np.ndarray:
    s = path.arcs
    if len(s) > 1 and np.all(np.diff(s) > 0):
        return s
    # fall back to chord length in (q, lambda)
    X = np.column_stack([path.displacements(), path.lambdas])
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(X, axis=0), axis=1))])


def find_limit_points(path: EquilibriumPath) -> list:
    """One limit point per sign change of the discrete load-factor increments.

    ``lambda_star`` is the vertex of the parabola through the three points
    nearest the turn (in path arc length).
    """
    lam = path.lambdas
    if len(lam) < 3:
        return []
    s = _abscissa(path)
    d = np.diff(lam)
    nz = [i for i in range(len(d)) if d[i] != 0.0]
    out = []
    for a, b in zip(nz, nz[1:]):
        if np.sign(d[a]) == np.sign(d[b]):
            continue
        kind = "maximum" if d[a] > 0 else "minimum"
        i = b  # extremal sample: increment a enters it, increment b leaves it
        lam_star, s_star = _vertex([s[a], s[i], s[b + 1]], [lam[a], lam[i], lam[b + 1]], kind)
        k = i - 1 if s_star < s[i] else i
        out.append(LimitPoint((int(k), int(k + 1)), float(lam_star), kind))
    return out


def _vertex(xs, ys, kind):
    x0, x1, x2 = xs
    y0, y1, y2 = ys
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    if denom == 0:
        return y1, x1
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    c = y1 - a * x1 * x1 - b * x1
    if a == 0 or (kind == "maximum" and a > 0) or (kind == "minimum" and a < 0):
        return y1, x1
    xv = -b / (2 * a)
    if not x0 <= xv <= x2:
        return y1, x1
    return a * xv * xv + b * xv + c, xv


def reversed_path(path: EquilibriumPath) -> EquilibriumPath:
    pts = path.points[::-1]
    total = pts[0].arc
    pts = [replace(p, arc=total - p.arc) for p in pts]
    return EquilibriumPath(pts, path.termination, None, path.load_scale, path.length_scale)


def classify_stability(model: Model, state: State, tol: Optional[float] = None,
                       prescribed=None) -> tuple:
    """Return ``(stable, smallest_eigenvalue)`` for an equilibrium state.

    Raises :class:`NotEquilibriumError` when the residual exceeds
    ``tol * (|lambda F_ref| + 1)``.
    """
    if tol is None:
        tol = default_settings(model).newton_tol
    F = model.reference_load()
    res = residual_norm(model, state, prescribed)
    if res > tol * (abs(state.lam) * np.linalg.norm(F) + 1.0):
        raise NotEquilibriumError(f"not an equilibrium (residual {res:.3g})")
    free = model.free_dofs(prescribed or {})
    gauge = StabilityGauge(model, free)
    _, K = assemble(model, state.q, state.lam, free=free)
    min_eig, _ = gauge.indicators(K)
    return bool(min_eig > gauge.eps), min_eig


def _arc_settings(model: Model):
    s = default_settings(model)
    return s.replace(method="arc_length") if s.method != "arc_length" else s


def _start_state(model: Model):
    s = default_settings(model)
    state, _ = gravity_equilibrium(model, s)
    if not model.load.gravity:
        state, _ = solve_at_load(model, 0.0, state.q, s)
    return state


def _far_crossing(path: EquilibriumPath, limits: list) -> Optional[int]:
    """First index j after the second limit point with lambda_{j-1} < 0 <= lambda_j."""
    if len(limits) < 2:
        return None
    lam = path.lambdas
    for j in range(limits[1].path_index[1], len(lam)):
        if j > 0 and lam[j - 1] < 0.0 <= lam[j]:
            return j
    return None


def _snap_stop(points):
    lam = [p.state.lam for p in points]
    if len(lam) < 4:
        return False
    d = np.diff(lam)
    changes = np.count_nonzero(np.diff(np.sign(d[d != 0])))
    return changes >= 2 and lam[-2] < 0.0 <= lam[-1]


def snap_path(model: Model, settings=None) -> EquilibriumPath:
    """Arc-length path from the first stable state through both limit points
    and back to lambda >= 0 on the far branch (or until the settings stop)."""
    s = settings or _arc_settings(model)
    start = _start_state(model)
    path = continue_path(model, s, start=start, stop=_snap_stop)
    return path


def trigger_dof(model: Model, path: EquilibriumPath, limits: list) -> int:
    s = default_settings(model)
    if s.control_dof is not None:
        return int(s.control_dof)
    if limits:
        i, j = limits[0].path_index
        dq = path.points[j].state.q - path.points[i].state.q
    else:
        dq = model.reference_load()
    trans = np.array([k % 3 != 2 for k in range(model.n_dofs)])
    return int(np.argmax(np.where(trans, np.abs(dq), -1.0)))


def find_second_stable_state(model: Model, path: Optional[EquilibriumPath] = None):
    """Locate the snapped-through equilibrium at zero load.

    Returns a :class:`StableState` or :data:`MONOSTABLE`.
    """
    s = default_settings(model)
    if path is None:
        path = snap_path(model)
    limits = find_limit_points(path)
    j = _far_crossing(path, limits)
    if j is None:
        return MONOSTABLE
    a, b = path.points[j - 1].state, path.points[j].state
    t = -a.lam / (b.lam - a.lam)
    guess = a.q + t * (b.q - a.q)
    try:
        polished, _ = solve_at_load(model, 0.0, guess, s)
    except ConvergenceError:
        return MONOSTABLE
    first = path.points[0].state
    if np.linalg.norm(polished.q - first.q) < 1e-6 * model.scale:
        return MONOSTABLE
    stable, eig = classify_stability(model, polished)
    return StableState(polished, potential_energy(model, polished.q), stable, eig)


def first_stable_state(model: Model) -> StableState:
    state = _start_state(model)
    stable, eig = classify_stability(model, state)
    return StableState(state, potential_energy(model, state.q), stable, eig)


def potential_energy(model: Model, q, lam: float = 0.0) -> float:
    """Strain energy minus the work potential of gravity and ``lam * F_ref``."""
    _, _, U = global_internal(model, q, need_tangent=False)
    return float(U - np.dot(model.gravity_load() + lam * model.reference_load(), q))


def energy_barrier(path: EquilibriumPath, first_energy: float, end: Optional[int] = None) -> float:
    """Largest path energy between the start and ``end`` minus the first-well energy."""
    e = path.energies[: (end + 1) if end is not None else None]
    return float(np.max(e) - first_energy)


def energy_landscape(model: Model, control_dof: int, lo: float, hi: float,
                     samples: int, start: Optional[State] = None) -> list:
    """Constrained equilibria at zero load over a sweep of one prescribed dof.

    The sweep starts from the sample nearest ``start`` (default: the first
    stable state) and warm-starts outward in both directions; samples that
    fail to converge are flagged. Output follows sample order.
    """
    s = default_settings(model)
    if start is None:
        start = _start_state(model)
    values = np.linspace(lo, hi, samples)
    g = model.gravity_load()
    out: list = [None] * samples
    i0 = int(np.argmin(np.abs(values - start.q[control_dof])))

    def sweep(indices):
        q_prev, d_prev = start.q.copy(), float(start.q[control_dof])
        for i in indices:
            d = float(values[i])
            q_new = _reach(model, s, control_dof, q_prev, d_prev, d)
            if q_new is None:
                out[i] = LandscapePoint(d, math.nan, math.nan, False)
                continue
            f, _, U = global_internal(model, q_new, need_tangent=False)
            out[i] = LandscapePoint(d, float(U - np.dot(g, q_new)), float((f - g)[control_dof]))
            q_prev, d_prev = q_new, d

    sweep(range(i0, samples))
    sweep(range(i0 - 1, -1, -1))
    return out


def _reach(model, s, dof, q, d_from, d_to, depth=0):
    """Move the prescribed dof from ``d_from`` to ``d_to`` (tangent predictor,
    then Newton), halving the increment on failure."""
    free = model.free_dofs({dof: d_to})
    guess = q.copy()
    try:
        f, K, _ = global_internal(model, q)
        Kff = K[np.ix_(free, free)]
        guess[free] -= np.linalg.solve(Kff, K[free, dof] * (d_to - d_from))
    except np.linalg.LinAlgError:
        pass
    try:
        state, _ = solve_at_load(model, 0.0, guess, s, prescribed={dof: d_to})
        return state.q
    except ConvergenceError:
        if depth >= 8:
            return None
    mid = 0.5 * (d_from + d_to)
    q_mid = _reach(model, s, dof, q, d_from, mid, depth + 1)
    if q_mid is None:
        return None
    return _reach(model, s, dof, q_mid, mid, d_to, depth + 1)


def landscape_minima(points: list) -> list:
    """Indices of strict interior local minima of the sampled energy."""
    e = [p.energy for p in points]
    return [i for i in range(1, len(e) - 1)
            if points[i].converged and e[i] < e[i - 1] and e[i] < e[i + 1]]


def trigger_force(model: Model, path: Optional[EquilibriumPath] = None) -> float:
    """Load at the first limit point: the quasi-static push that commits the snap."""
    if path is None:
        path = continue_path(model, _arc_settings(model), start=_start_state(model),
                             stop=_first_limit_stop)
    limits = find_limit_points(path)
    if not limits:
        raise MonostableError("monostable: no trigger")
    return limits[0].lambda_star * float(np.linalg.norm(model.reference_load()))


def _first_limit_stop(points):
    lam = [p.state.lam for p in points]
    return len(lam) >= 4 and lam[-1] < lam[-2] < lam[-3]


@dataclass
class BistabilityResult:
    path: EquilibriumPath
    limit_points: list
    trigger_dof: int
    first: StableState
    second: object  # StableState or MONOSTABLE
    trigger_force: Optional[float]
    energy_barrier: Optional[float]

    @property
    def bistable(self) -> bool:
        return isinstance(self.second, StableState) and self.second.stable


def analyze(model: Model) -> BistabilityResult:
    path = snap_path(model)
    limits = find_limit_points(path)
    first = first_stable_state(model)
    second = find_second_stable_state(model, path)
    trig = trigger_force(model, path) if limits else None
    barrier = None
    if isinstance(second, StableState):
        barrier = energy_barrier(path, first.energy, _far_crossing(path, limits))
    return BistabilityResult(path, limits, trigger_dof(model, path, limits), first, second,
                             trig, barrier)
