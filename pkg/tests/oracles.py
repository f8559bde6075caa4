"""Independent reference solutions used by the tests (not shipped)."""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar


def elastica_tip(alpha):
    """Tip position (x/L, y/L) of a clamped elastica under a tip force of
    fixed direction perpendicular to the undeformed axis, alpha = P L^2 / EI.

    Shooting on the root curvature: theta'' = -alpha cos(theta) in s/L,
    theta(0) = 0, theta'(1) = 0.
    """
    def rhs(s, y):
        theta, kappa, x, w = y
        return [kappa, -alpha * math.cos(theta), math.cos(theta), math.sin(theta)]

    def shoot(k0):
        sol = solve_ivp(rhs, (0.0, 1.0), [0.0, k0, 0.0, 0.0], rtol=1e-12, atol=1e-14)
        return sol.y[:, -1]

    k0 = brentq(lambda k: shoot(k)[1], 1e-9, alpha, xtol=1e-14)
    _, _, x, w = shoot(k0)
    return x, w


def truss_force(w, a, h, EA):
    """Downward apex force of the two-bar truss at downward apex travel ``w``."""
    L0 = math.hypot(a, h)
    L = math.hypot(a, h - w)
    return 2.0 * EA * (L0 - L) / L0 * (h - w) / L


def truss_limit(a, h, EA):
    """(w*, F*) at the first maximum of the truss force."""
    res = minimize_scalar(lambda w: -truss_force(w, a, h, EA), bounds=(0.0, h),
                          method="bounded", options={"xatol": 1e-14 * h})
    return res.x, -res.fun


def truss_far_state(a, h, EA):
    """Second zero-force equilibrium of the truss, away from w = 0 and w = h."""
    return brentq(lambda w: truss_force(w, a, h, EA), 1.5 * h, 2.5 * h, xtol=1e-14 * h)


def bisect_trigger(model, control_dof, jump, rel_tol=1e-5):
    """Largest load factor reachable by load control from the rest state.

    Load control is stepped up from lambda = 0 (doubling the increment)
    until Newton fails or the control dof jumps by more than ``jump``; the
    bracket is then bisected, always warm-starting from the last state on
    the near branch.
    """
    from snapbeam.solver import ConvergenceError, solve_at_load

    state, _ = solve_at_load(model, 0.0)

    def attempt(lam, base):
        try:
            s, _ = solve_at_load(model, lam, base.q)
        except ConvergenceError:
            return None
        if abs(s.q[control_dof] - base.q[control_dof]) > jump:
            return None
        return s

    lo, lo_state, step = 0.0, state, 1e-5
    while True:
        s = attempt(lo + step, lo_state)
        if s is None:
            hi = lo + step
            break
        lo, lo_state = lo + step, s
        step *= 2.0
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        s = attempt(mid, lo_state)
        if s is None:
            hi = mid
        else:
            lo, lo_state = mid, s
    return 0.5 * (lo + hi)


def rigid_motion(X, Y, tx, ty, alpha):
    """Nodal (u, w, theta) for a rigid motion of the points (X, Y)."""
    c, s = np.cos(alpha), np.sin(alpha)
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    return c * X - s * Y + tx - X, s * X + c * Y + ty - Y, np.full_like(X, alpha)


def mirrored_minimum(model):
    """Strain-energy minimum at zero load found by trust-region minimization
    started from the arch reflected through its chord (y -> -y)."""
    from scipy.optimize import minimize
    from snapbeam.corotational import global_internal

    free = model.free_dofs()
    xy = model.coordinates()
    q0 = np.zeros(model.n_dofs)
    q0[1::3] = -2.0 * xy[:, 1]
    slope = np.gradient(xy[:, 1], xy[:, 0])
    q0[2::3] = -2.0 * np.arctan(slope)

    def full(x):
        q = q0.copy()
        q[free] = x
        return q

    def energy(x):
        f, _, U = global_internal(model, full(x), need_tangent=False)
        return U, f[free]

    def hess(x):
        return global_internal(model, full(x))[1][np.ix_(free, free)]

    res = minimize(energy, q0[free], jac=True, hess=hess, method="trust-exact",
                   options={"gtol": 1e-12})
    return full(res.x), res
