"""Co-rotational two-node Euler-Bernoulli beam element.

The element motion is split into a rigid rotation of the chord plus small
local deformations measured against it: an axial stretch ``u_l`` and two
end rotations relative to the chord. The local laws are linear elastic,

    F_N = EA u_l / L0
    (M1, M2) = (2 EI / L0) [[2, 1], [1, 2]] (theta1_l, theta2_l)

and the global internal force and tangent are the exact first and second
derivatives of the element strain energy. Nodal rotations are positive
counter-clockwise.

Everything is evaluated in batches of elements (leading axis) so that
assembly is a handful of numpy operations; the single-element functions at
the bottom are thin wrappers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

COLLAPSE_EPS = 1e-9
MAX_LOCAL_ROTATION = 0.5 * math.pi


class ElementError(ArithmeticError):
    """Element configuration outside the range the formulation supports."""

    def __init__(self, message, element=None):
        self.element = element
        prefix = f"element {element}: " if element is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class LocalDeformation:
    u_l: float
    theta1_l: float
    theta2_l: float
    beta: float
    L: float


@dataclass(frozen=True)
class LocalForces:
    F_N: float
    M1: float
    M2: float


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    return -((np.pi - a) % (2.0 * np.pi) - np.pi)


class _Batch:
    """Kinematics of a batch of elements at displacement ``q`` (m x 6)."""

    def __init__(self, dx0, dy0, q, ids=None):
        L0 = np.hypot(dx0, dy0)
        self.L0 = L0
        self.beta0 = np.arctan2(dy0, dx0)
        dX = dx0 + q[:, 3] - q[:, 0]
        dY = dy0 + q[:, 4] - q[:, 1]
        L = np.hypot(dX, dY)
        bad = ~(L > COLLAPSE_EPS * L0)
        if np.any(bad):
            raise ElementError("element collapsed", _first(bad, ids))
        self.L = L
        self.u_l = (L * L - L0 * L0) / (L + L0)
        self.c = dX / L
        self.s = dY / L
        self.beta = np.arctan2(dY, dX)
        self.t1 = wrap_angle(q[:, 2] + self.beta0 - self.beta)
        self.t2 = wrap_angle(q[:, 5] + self.beta0 - self.beta)
        over = (np.abs(self.t1) > MAX_LOCAL_ROTATION) | (np.abs(self.t2) > MAX_LOCAL_ROTATION)
        if np.any(over):
            raise ElementError("local rotation out of range", _first(over, ids))


def _first(mask, ids):
    i = int(np.flatnonzero(mask)[0])
    return i if ids is None else int(ids[i])


def element_arrays(dx0, dy0, E, A, I, q, ids=None, need_tangent=True):
    """Energy, internal force and tangent for a batch of elements.

    Returns ``(U, f, K)`` with shapes (m,), (m, 6), (m, 6, 6); ``K`` is None
    when ``need_tangent`` is false.
    """
    k = _Batch(dx0, dy0, q, ids)
    m = q.shape[0]
    EA_L = E * A / k.L0
    EI_L = E * I / k.L0
    N = EA_L * k.u_l
    M1 = 2.0 * EI_L * (2.0 * k.t1 + k.t2)
    M2 = 2.0 * EI_L * (k.t1 + 2.0 * k.t2)
    U = 0.5 * EA_L * k.u_l**2 + EI_L * (2.0 * k.t1**2 + 2.0 * k.t1 * k.t2 + 2.0 * k.t2**2)

    c, s, L = k.c, k.s, k.L
    zero = np.zeros(m)
    r = np.stack([-c, -s, zero, c, s, zero], axis=1)  # d u_l / dq
    z = np.stack([s, -c, zero, -s, c, zero], axis=1)  # L * d beta / dq
    B1 = -z / L[:, None]
    B1[:, 2] += 1.0
    B2 = -z / L[:, None]
    B2[:, 5] += 1.0
    f = N[:, None] * r + M1[:, None] * B1 + M2[:, None] * B2
    if not need_tangent:
        return U, f, None

    outer = lambda a, b: np.einsum("mi,mj->mij", a, b)  # noqa: E731
    K = EA_L[:, None, None] * outer(r, r)
    K += (2.0 * EI_L)[:, None, None] * (2.0 * outer(B1, B1) + outer(B1, B2)
                                        + outer(B2, B1) + 2.0 * outer(B2, B2))
    K += (N / L)[:, None, None] * outer(z, z)
    rz = outer(r, z)
    K += ((M1 + M2) / L**2)[:, None, None] * (rz + np.transpose(rz, (0, 2, 1)))
    return U, f, K


def _model_arrays(model):
    cache = model.__dict__.get("_snapbeam_arrays")
    if cache is None:
        els = model.elements
        cache = dict(
            dx0=np.array([e.dx0 for e in els], dtype=float),
            dy0=np.array([e.dy0 for e in els], dtype=float),
            E=np.array([e.material.E for e in els], dtype=float),
            A=np.array([e.material.A for e in els], dtype=float),
            I=np.array([e.material.I for e in els], dtype=float),
            dofs=np.array([[3 * e.node_a + i for i in range(3)]
                           + [3 * e.node_b + i for i in range(3)] for e in els], dtype=int),
        )
        # Model is a frozen dataclass; cache on the instance dict directly.
        object.__setattr__(model, "_snapbeam_arrays", cache)
    return cache


def global_internal(model, q, need_tangent=True):
    """Assembled (unconstrained) internal force, tangent and strain energy.

    Accumulation runs in element order, so results do not depend on any
    scheduling.
    """
    arr = _model_arrays(model)
    dofs = arr["dofs"]
    ids = np.arange(len(model.elements))
    U, fe, Ke = element_arrays(arr["dx0"], arr["dy0"], arr["E"], arr["A"], arr["I"],
                               q[dofs], ids=ids, need_tangent=need_tangent)
    n = model.n_dofs
    f = np.zeros(n)
    np.add.at(f, dofs, fe)
    K = None
    if need_tangent:
        K = np.zeros((n, n))
        np.add.at(K, (dofs[:, :, None], dofs[:, None, :]), Ke)
    return f, K, float(np.sum(U))


def total_strain_energy(model, q) -> float:
    return global_internal(model, q, need_tangent=False)[2]


def assemble(model, q, lam, gravity_scale=1.0, free=None):
    """Residual and tangent restricted to the free dofs.

    residual = internal force - lam * reference load - gravity load
    """
    f, K, _ = global_internal(model, q)
    r = f - lam * model.reference_load() - gravity_scale * model.gravity_load()
    if free is None:
        free = model.free_dofs()
    return r[free], K[np.ix_(free, free)]


# -- single-element API ------------------------------------------------------

def _one(element, q):
    q = np.asarray(q, dtype=float).reshape(1, 6)
    m = element.material
    return (np.array([element.dx0]), np.array([element.dy0]), np.array([m.E]),
            np.array([m.A]), np.array([m.I]), q)


def local_kinematics(element, q) -> LocalDeformation:
    dx0, dy0, _, _, _, qq = _one(element, q)
    k = _Batch(dx0, dy0, qq)
    return LocalDeformation(float(k.u_l[0]), float(k.t1[0]), float(k.t2[0]),
                            float(k.beta[0]), float(k.L[0]))


def local_forces(d: LocalDeformation, element) -> LocalForces:
    m = element.material
    L0 = element.L0
    k = 2.0 * m.E * m.I / L0
    return LocalForces(m.E * m.A * d.u_l / L0,
                       k * (2.0 * d.theta1_l + d.theta2_l),
                       k * (d.theta1_l + 2.0 * d.theta2_l))


def strain_energy(element, q) -> float:
    U, _, _ = element_arrays(*_one(element, q), need_tangent=False)
    return float(U[0])


def internal_force(element, q) -> np.ndarray:
    _, f, _ = element_arrays(*_one(element, q), need_tangent=False)
    return f[0]


def tangent_stiffness(element, q) -> np.ndarray:
    _, _, K = element_arrays(*_one(element, q))
    return K[0]
