"""Equilibrium solves and path following.

Three continuation methods share one loop: load control, displacement
control (Batoz-Dhatt bordering on a single dof) and spherical arc-length
(Crisfield) which can pass limit points. Arc lengths are measured in a
dimensionless metric: translations are divided by the model length scale,
rotations are taken as-is, and the load factor is divided by the load
that produces a unit (scaled) linear response at the start state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from .corotational import ElementError, assemble, global_internal
from .model import ContinuationSettings, Model

log = logging.getLogger(__name__)

TARGET_REACHED = "target reached"
MAX_STEPS = "max steps"
STEP_UNDERFLOW = "step underflow"
DIVERGENCE = "divergence"

STAB_REL = 1e-8
GROW_FACTOR = 1.5
FAST_ITERS = 4


class ConvergenceError(RuntimeError):
    def __init__(self, message, lam=None):
        self.lam = lam
        super().__init__(message)


class _NewtonFailure(Exception):
    pass


@dataclass(frozen=True)
class State:
    q: np.ndarray
    lam: float


@dataclass(frozen=True)
class PathPoint:
    state: State
    energy: float
    min_eigenvalue: float
    det_sign: int
    newton_iters: int
    arc: float = 0.0


@dataclass
class EquilibriumPath:
    points: list
    termination: str
    step_boundary: Optional[int] = None
    load_scale: float = 1.0
    length_scale: float = 1.0

    def __len__(self):
        return len(self.points)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.state.lam for p in self.points])

    @property
    def arcs(self) -> np.ndarray:
        return np.array([p.arc for p in self.points])

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])

    def dof(self, index: int) -> np.ndarray:
        return np.array([p.state.q[index] for p in self.points])

    def displacements(self) -> np.ndarray:
        return np.array([p.state.q for p in self.points])


def default_settings(model: Model) -> ContinuationSettings:
    return model.settings if model.settings is not None else ContinuationSettings()


def constrained_start(model: Model, q=None, prescribed=None) -> np.ndarray:
    q = np.zeros(model.n_dofs) if q is None else np.array(q, dtype=float)
    q[model.fixed_dofs()] = 0.0
    for i, v in model.prescribed_values().items():
        q[i] = v
    for i, v in (prescribed or {}).items():
        q[i] = v
    return q


def stiffness_scale(model: Model) -> float:
    """Largest diagonal entry of the constrained rest tangent."""
    free = model.free_dofs()
    _, K = assemble(model, np.zeros(model.n_dofs), 0.0, free=free)
    return float(np.max(np.abs(np.diag(K)))) if free.size else 1.0


class StabilityGauge:
    """Stability indicators on a diagonally scaled constrained tangent.

    The tangent is congruence-scaled by the inverse square root of the rest
    tangent diagonal, which preserves eigenvalue signs while removing the
    disparity between axial, bending and rotational stiffness. Reported
    eigenvalues are multiplied back by the largest rest diagonal, so the
    threshold ``STAB_REL * scale`` is relative to the stiffest dof.
    """

    def __init__(self, model: Model, free: np.ndarray):
        self.free = free
        _, K0 = assemble(model, np.zeros(model.n_dofs), 0.0, free=free)
        d = np.abs(np.diag(K0)) if free.size else np.ones(0)
        d = np.where(d > 0, d, 1.0)
        self.scale = float(d.max()) if d.size else 1.0
        self.S = np.sqrt(self.scale / d)
        self.eps = STAB_REL * self.scale

    def eigenvalues(self, Kff: np.ndarray) -> np.ndarray:
        return np.linalg.eigvalsh(self.S[:, None] * Kff * self.S[None, :])

    def indicators(self, Kff: np.ndarray) -> tuple:
        """(smallest scaled eigenvalue, determinant sign)."""
        if Kff.size == 0:
            return math.inf, 1
        eig = self.eigenvalues(Kff)
        if np.any(np.abs(eig) <= self.eps):
            det = 0
        else:
            det = -1 if np.count_nonzero(eig < 0) % 2 else 1
        return float(eig[0]), det


def _tol_ref(tol, lam, F):
    return tol * (abs(lam) * np.linalg.norm(F) + 1.0)


def _factor(K):
    lu = lu_factor(K, check_finite=True)
    if np.any(np.diag(lu[0]) == 0.0):
        raise LinAlgError("singular tangent")
    return lu


def _newton(model, free, q, lam, tol, max_iters, gravity_scale=1.0):
    """Plain Newton on the free dofs. Returns (q, iterations)."""
    F = model.reference_load()
    ref = _tol_ref(tol, lam, F)
    q = q.copy()
    prev = math.inf
    growth = 0
    for it in range(max_iters + 1):
        try:
            r, K = assemble(model, q, lam, gravity_scale, free)
        except ElementError as exc:
            raise _NewtonFailure(str(exc)) from exc
        norm = float(np.linalg.norm(r))
        if not math.isfinite(norm):
            raise _NewtonFailure("non-finite residual")
        if norm <= ref:
            return q, it
        if it == max_iters:
            raise _NewtonFailure(f"max iterations ({max_iters})")
        growth = growth + 1 if norm > prev else 0
        if growth >= 3:
            raise _NewtonFailure("residual grew 3 consecutive iterations")
        prev = norm
        try:
            q[free] -= lu_solve(_factor(K), r)
        except (LinAlgError, ValueError) as exc:
            raise _NewtonFailure("singular tangent") from exc
    raise _NewtonFailure("unreachable")


def solve_at_load(model: Model, lam: float, q0=None, settings=None, prescribed=None,
                  gravity_scale=1.0):
    """Newton solve at fixed load factor.

    ``prescribed`` maps extra dof indices to imposed values (they are
    eliminated like the model's own prescribed dofs). Returns
    ``(State, iterations)``; raises :class:`ConvergenceError` on divergence.
    """
    s = settings or default_settings(model)
    prescribed = prescribed or {}
    free = model.free_dofs(prescribed)
    q = constrained_start(model, q0, prescribed)
    try:
        q, iters = _newton(model, free, q, lam, s.newton_tol, s.max_newton_iters, gravity_scale)
    except _NewtonFailure as exc:
        raise ConvergenceError(f"no convergence at lambda={lam:.17g}: {exc}", lam) from None
    return State(q, float(lam)), iters


def gravity_equilibrium(model: Model, settings=None) -> tuple:
    """Equilibrium under gravity alone (lambda = 0), ramping gravity if needed."""
    s = settings or default_settings(model)
    free = model.free_dofs()
    q = constrained_start(model)
    if not model.load.gravity:
        return State(q, 0.0), 0
    scale, step, total = 0.0, 1.0, 0
    while scale < 1.0:
        trial = min(1.0, scale + step)
        try:
            q_new, it = _newton(model, free, q, 0.0, s.newton_tol, s.max_newton_iters, trial)
        except _NewtonFailure:
            step *= 0.5
            if step < 1e-6:
                raise ConvergenceError("gravity step did not converge", 0.0) from None
            continue
        q, scale, total = q_new, trial, total + it
    return State(q, 0.0), total


class _Metric:
    def __init__(self, model, free, Kff, Ff):
        self.w = np.where(free % 3 == 2, 1.0, 1.0 / model.scale)
        self.length_scale = model.scale
        nt = 0.0
        if np.any(Ff):
            try:
                nt = float(np.linalg.norm(self.w * lu_solve(_factor(Kff), Ff)))
            except (LinAlgError, ValueError):
                nt = 0.0
        self.load_scale = 1.0 / nt if nt > 0 and math.isfinite(nt) else 1.0
        self.inv_l2 = 1.0 / self.load_scale**2

    def dot(self, dq1, dl1, dq2, dl2):
        return float(np.dot(self.w * dq1, self.w * dq2) + dl1 * dl2 * self.inv_l2)

    def norm(self, dq, dl):
        return math.sqrt(max(self.dot(dq, dl, dq, dl), 0.0))


@dataclass
class _Tracker:
    model: Model
    settings: ContinuationSettings
    free: np.ndarray
    Ff: np.ndarray
    F: np.ndarray
    metric: _Metric
    gauge: StabilityGauge
    points: list = field(default_factory=list)

    def annotate(self, q, lam, iters, arc):
        f, K, U = global_internal(self.model, q)
        min_eig, det = self.gauge.indicators(K[np.ix_(self.free, self.free)])
        return PathPoint(State(q.copy(), float(lam)), U, min_eig, det, iters, arc)


def _solve_both(K, r, Ff):
    lu = _factor(K)
    return lu_solve(lu, -r), lu_solve(lu, Ff)


def _arc_step(tr: _Tracker, q, lam, prev_inc, ds):
    s, model, free, Ff, metric = tr.settings, tr.model, tr.free, tr.Ff, tr.metric
    try:
        r, K = assemble(model, q, lam, free=free)
        _, dq_t = _solve_both(K, r, Ff)
    except (LinAlgError, ValueError, ElementError) as exc:
        raise _NewtonFailure(str(exc)) from exc
    dl = ds / metric.norm(dq_t, 1.0)
    if prev_inc is not None and metric.dot(dq_t, 1.0, *prev_inc) < 0:
        dl = -dl
    Dq, Dl = dl * dq_t, dl
    prev_norm, growth = math.inf, 0
    for it in range(s.max_newton_iters + 1):
        qt = q.copy()
        qt[free] += Dq
        lt = lam + Dl
        try:
            r, K = assemble(model, qt, lt, free=free)
        except ElementError as exc:
            raise _NewtonFailure(str(exc)) from exc
        norm = float(np.linalg.norm(r))
        if not math.isfinite(norm):
            raise _NewtonFailure("non-finite residual")
        if norm <= _tol_ref(s.newton_tol, lt, tr.F):
            return qt, lt, (Dq, Dl), it
        if it == s.max_newton_iters:
            raise _NewtonFailure("max iterations")
        growth = growth + 1 if norm > prev_norm else 0
        if growth >= 3:
            raise _NewtonFailure("residual grew")
        prev_norm = norm
        try:
            dq_r, dq_t = _solve_both(K, r, Ff)
        except (LinAlgError, ValueError) as exc:
            raise _NewtonFailure("singular tangent") from exc
        base = Dq + dq_r
        a = metric.dot(dq_t, 1.0, dq_t, 1.0)
        b = 2.0 * metric.dot(base, Dl, dq_t, 1.0)
        c = metric.dot(base, Dl, base, Dl) - ds * ds
        disc = b * b - 4.0 * a * c
        if disc < 0:
            raise _NewtonFailure("complex arc-length roots")
        sq = math.sqrt(disc)
        # numerically stable pair of roots
        qq = -0.5 * (b + math.copysign(sq, b))
        roots = [qq / a, c / qq] if qq != 0 else [0.0, 0.0]
        best = None
        for dlam in roots:
            cand = (base + dlam * dq_t, Dl + dlam)
            cos = metric.dot(*cand, Dq, Dl)
            if best is None or cos > best[0]:
                best = (cos, cand)
        Dq, Dl = best[1]
    raise _NewtonFailure("unreachable")


def _load_step(tr: _Tracker, q, lam, dlam):
    s, model, free = tr.settings, tr.model, tr.free
    try:
        r, K = assemble(model, q, lam, free=free)
        _, dq_t = _solve_both(K, r, tr.Ff)
    except (LinAlgError, ValueError, ElementError) as exc:
        raise _NewtonFailure(str(exc)) from exc
    qp = q.copy()
    qp[free] += dlam * dq_t
    qn, it = _newton(model, free, qp, lam + dlam, s.newton_tol, s.max_newton_iters)
    return qn, lam + dlam, (qn[free] - q[free], dlam), it


def _disp_step(tr: _Tracker, q, lam, dd):
    s, model, free, Ff = tr.settings, tr.model, tr.free, tr.Ff
    ci = int(np.flatnonzero(free == s.control_dof)[0])
    Dq = None
    Dl = 0.0
    prev_norm, growth = math.inf, 0
    for it in range(s.max_newton_iters + 1):
        qt = q.copy()
        if Dq is not None:
            qt[free] += Dq
        lt = lam + Dl
        try:
            r, K = assemble(model, qt, lt, free=free)
        except ElementError as exc:
            raise _NewtonFailure(str(exc)) from exc
        norm = float(np.linalg.norm(r))
        if not math.isfinite(norm):
            raise _NewtonFailure("non-finite residual")
        if Dq is not None and norm <= _tol_ref(s.newton_tol, lt, tr.F):
            return qt, lt, (Dq, Dl), it - 1
        if it == s.max_newton_iters:
            raise _NewtonFailure("max iterations")
        if Dq is not None:
            growth = growth + 1 if norm > prev_norm else 0
            if growth >= 3:
                raise _NewtonFailure("residual grew")
            prev_norm = norm
        try:
            dq_r, dq_t = _solve_both(K, r, Ff)
        except (LinAlgError, ValueError) as exc:
            raise _NewtonFailure("singular tangent") from exc
        if dq_t[ci] == 0.0:
            raise _NewtonFailure("control dof insensitive to the load")
        if Dq is None:
            dlam = dd / dq_t[ci]
            Dq, Dl = dlam * dq_t, dlam
        else:
            dlam = -dq_r[ci] / dq_t[ci]
            Dq = Dq + dq_r + dlam * dq_t
            Dl += dlam
    raise _NewtonFailure("unreachable")


def _target_hit(s: ContinuationSettings, q0, lam0, q, lam):
    if s.target_lambda is not None and s.method != "displacement_control":
        if s.target_lambda >= lam0 and lam >= s.target_lambda:
            return True
        if s.target_lambda < lam0 and lam <= s.target_lambda:
            return True
    if s.target_displacement is not None and s.control_dof is not None:
        sign = math.copysign(1.0, s.target_displacement - q0[s.control_dof])
        if (q[s.control_dof] - s.target_displacement) * sign >= 0:
            return True
    return False


def continue_path(model: Model, settings: Optional[ContinuationSettings] = None,
                  start: Optional[State] = None,
                  stop: Optional[Callable[[list], bool]] = None) -> EquilibriumPath:
    """Trace an equilibrium path from ``start`` (default: rest at lambda = 0).

    ``stop`` is an optional predicate on the list of accepted points; it
    ends the run with termination "target reached".
    """
    s = settings or default_settings(model)
    free = model.free_dofs()
    F = model.reference_load()
    Ff = F[free]
    if start is None:
        start = State(constrained_start(model), 0.0)
        start_iters = 0
        try:
            q0, start_iters = _newton(model, free, start.q, 0.0, s.newton_tol,
                                      s.max_newton_iters)
            start = State(q0, 0.0)
        except _NewtonFailure as exc:
            raise ConvergenceError(f"no equilibrium at the start state: {exc}", 0.0) from None
    else:
        start_iters = 0
    _, K0 = assemble(model, start.q, start.lam, free=free)
    metric = _Metric(model, free, K0, Ff)
    tr = _Tracker(model, s, free, Ff, F, metric, StabilityGauge(model, free))
    tr.points.append(tr.annotate(start.q, start.lam, start_iters, 0.0))
    path = EquilibriumPath(tr.points, MAX_STEPS, None, metric.load_scale, metric.length_scale)
    if not np.any(Ff):
        path.termination = TARGET_REACHED
        return path
    if s.method == "displacement_control" and s.control_dof not in set(free.tolist()):
        raise ValueError(f"control dof {s.control_dof} is constrained")

    q, lam = start.q.copy(), start.lam
    step = s.initial_step
    prev_inc = None
    if s.method == "displacement_control":
        direction = 1.0
        if s.target_displacement is not None:
            direction = math.copysign(1.0, s.target_displacement - q[s.control_dof])
    else:
        direction = 1.0
        if s.method == "load_control" and s.target_lambda is not None:
            direction = math.copysign(1.0, s.target_lambda - lam)

    for _ in range(s.max_steps):
        while True:
            try:
                if s.method == "arc_length":
                    qn, ln, inc, it = _arc_step(tr, q, lam, prev_inc, step)
                    if prev_inc is not None and metric.dot(*inc, *prev_inc) <= 0:
                        raise _NewtonFailure("increment reversed direction")
                elif s.method == "load_control":
                    dl = direction * step
                    if s.target_lambda is not None and (lam + dl - s.target_lambda) * direction > 0:
                        dl = s.target_lambda - lam
                    qn, ln, inc, it = _load_step(tr, q, lam, dl)
                else:
                    dd = direction * step
                    if s.target_displacement is not None:
                        rest = s.target_displacement - q[s.control_dof]
                        if abs(dd) > abs(rest):
                            dd = rest
                    qn, ln, inc, it = _disp_step(tr, q, lam, dd)
                break
            except _NewtonFailure as exc:
                log.debug("step %.3g failed at lambda=%.6g: %s", step, lam, exc)
                step *= 0.5
                if step < s.min_step:
                    if len(tr.points) == 1:
                        raise ConvergenceError(
                            f"divergence at the first step: {exc}", lam) from None
                    path.termination = STEP_UNDERFLOW
                    return path
        arc = tr.points[-1].arc + metric.norm(*inc)
        tr.points.append(tr.annotate(qn, ln, it, arc))
        q, lam, prev_inc = qn, ln, inc
        if it <= FAST_ITERS:
            step = min(step * GROW_FACTOR, s.max_step)
        step = max(min(step, s.max_step), s.min_step)
        if _target_hit(s, start.q, start.lam, q, lam) or (stop is not None and stop(tr.points)):
            path.termination = TARGET_REACHED
            return path
    path.termination = MAX_STEPS
    return path


def two_step_protocol(model: Model, settings: Optional[ContinuationSettings] = None,
                      stop=None) -> EquilibriumPath:
    """Gravity first (lambda = 0), then continue in lambda from that state.

    ``step_boundary`` on the result is the index of the first point of the
    second step.
    """
    s = settings or default_settings(model)
    if not model.load.gravity:
        return continue_path(model, s, stop=stop)
    g_state, iters = gravity_equilibrium(model, s)
    path = continue_path(model, s, start=g_state, stop=stop)
    first = path.points[0]
    path.points[0] = PathPoint(first.state, first.energy, first.min_eigenvalue,
                               first.det_sign, iters, 0.0)
    path.step_boundary = 1
    return path


def residual_norm(model: Model, state: State, prescribed=None) -> float:
    free = model.free_dofs(prescribed or {})
    r, _ = assemble(model, state.q, state.lam, free=free)
    return float(np.linalg.norm(r))
