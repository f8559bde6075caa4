"""Parametric model generators.

Default material values are illustrative choices for a soft silicone
strip, not measured properties of any particular part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (BoundaryConditions, ContinuationSettings, LoadCase, Material, NodeGeom,
                    ScenarioError, dof_index, make_model)

DEMO_E = 1.3e6  # Pa
DEMO_RHO = 1100.0  # kg/m^3
DEMO_WIDTH = 0.01  # m
DEMO_THICKNESS = 0.001  # m

PROFILES = ("half_sine", "circular")
END_TYPES = ("clamped", "pinned")


def demo_material(thickness=DEMO_THICKNESS, width=DEMO_WIDTH, E=DEMO_E, rho=DEMO_RHO):
    return Material.rectangular("silicone", E, width, thickness, rho)


@dataclass(frozen=True)
class ArchSpec:
    span: float = 0.1
    rise: float = 0.008
    profile: str = "half_sine"
    n_elements: int = 32
    material: Material = demo_material()
    ends: str = "pinned"
    imperfection: float = 0.01

    def __post_init__(self):
        if not self.span > 0:
            raise ScenarioError("span must be positive")
        if not self.rise >= 0:
            raise ScenarioError("rise must be non-negative")
        if self.n_elements < 4 or self.n_elements % 2:
            raise ScenarioError("n_elements must be an even number >= 4")
        if self.profile not in PROFILES:
            raise ScenarioError(f"profile must be one of {PROFILES}")
        if self.ends not in END_TYPES:
            raise ScenarioError(f"ends must be one of {END_TYPES}")
        if not math.isfinite(self.imperfection):
            raise ScenarioError("imperfection must be finite")


def arch_profile(spec: ArchSpec) -> np.ndarray:
    """Node coordinates of the arch, apex exactly at (span/2, rise).

    An antisymmetric component ``imperfection * rise * sin(2 pi x / span)``
    is superposed; it vanishes at the ends and the apex and lets the path
    follow the asymmetric snap mode instead of the symmetric one.
    """
    n, l, h = spec.n_elements, spec.span, spec.rise
    if spec.profile == "half_sine" or h == 0.0:
        x = np.linspace(0.0, l, n + 1)
        y = h * np.sin(np.pi * x / l)
    else:
        R = (0.25 * l * l + h * h) / (2.0 * h)
        half = math.asin(min(1.0, 0.5 * l / R))
        if h > R:  # more than a semicircle
            half = math.pi - half
        phi = np.linspace(-half, half, n + 1)
        x = 0.5 * l + R * np.sin(phi)
        y = h - R + R * np.cos(phi)
    y = y + spec.imperfection * h * np.sin(2.0 * np.pi * x / l)
    x[0], x[-1], x[n // 2] = 0.0, l, 0.5 * l
    y[0], y[-1], y[n // 2] = 0.0, 0.0, h
    return np.column_stack([x, y])


def _end_dofs(node, ends):
    kinds = ("u", "w", "theta") if ends == "clamped" else ("u", "w")
    return [(node, k) for k in kinds]


def apex_node(model_or_spec) -> int:
    n = getattr(model_or_spec, "n_elements", None)
    if n is None:
        n = len(model_or_spec.nodes) - 1
    return n // 2


def make_shallow_arch(spec: ArchSpec = ArchSpec(), settings=None):
    """Arch on the chosen profile with a unit downward force at the apex."""
    xy = arch_profile(spec)
    n = spec.n_elements
    nodes = [NodeGeom(i, float(x), float(y)) for i, (x, y) in enumerate(xy)]
    bcs = BoundaryConditions(fixed=tuple(_end_dofs(0, spec.ends) + _end_dofs(n, spec.ends)))
    apex = n // 2
    load = LoadCase(forces=((apex, "w", -1.0),))
    if settings is None:
        settings = ContinuationSettings(
            method="arc_length", control_dof=dof_index(apex, "w"),
            initial_step=0.01, min_step=1e-7, max_step=0.04, max_steps=600,
            target_displacement=-2.5 * spec.rise if spec.rise > 0 else -0.25 * spec.span)
    return make_model(nodes, [(i, i + 1) for i in range(n)], spec.material, bcs, load, settings)


def make_vertical_beam(length=0.05, n_elements=16, material=None, tip_force=0.005,
                       settings=None):
    """Clamped-base vertical beam under gravity with a transverse tip force."""
    if not length > 0:
        raise ScenarioError("length must be positive")
    if n_elements < 4:
        raise ScenarioError("n_elements must be >= 4")
    material = material or Material.rectangular("silicone", DEMO_E, DEMO_WIDTH, 0.002, DEMO_RHO)
    nodes = [NodeGeom(i, 0.0, length * i / n_elements) for i in range(n_elements + 1)]
    bcs = BoundaryConditions(fixed=tuple(_end_dofs(0, "clamped")))
    load = LoadCase(forces=((n_elements, "u", float(tip_force)),), gravity=True)
    if settings is None:
        settings = ContinuationSettings(
            method="load_control", control_dof=dof_index(n_elements, "u"),
            initial_step=0.05, min_step=1e-6, max_step=0.1, max_steps=200, target_lambda=1.0)
    return make_model(nodes, [(i, i + 1) for i in range(n_elements)], material, bcs, load,
                      settings)


def make_von_mises_truss(half_span=1.0, rise=0.1, material=None, settings=None):
    """Two shallow bars meeting at a loaded apex, outer ends pinned.

    Bending stiffness is set negligible (I = 1e-8 A a^2) so the bars act
    essentially as axial members.
    """
    if not rise > 0:
        raise ScenarioError("rise must be positive")
    if not half_span > 0:
        raise ScenarioError("half_span must be positive")
    base = material or Material("steel", 2.0e11, 1.0e-4, 1.0, 0.0)
    mat = Material(base.name, base.E, base.A, 1e-8 * base.A * half_span**2, base.rho)
    nodes = [NodeGeom(0, 0.0, 0.0), NodeGeom(1, half_span, rise), NodeGeom(2, 2 * half_span, 0.0)]
    bcs = BoundaryConditions(fixed=tuple(_end_dofs(0, "pinned") + _end_dofs(2, "pinned")))
    load = LoadCase(forces=((1, "w", -1.0),))
    if settings is None:
        settings = ContinuationSettings(
            method="arc_length", control_dof=dof_index(1, "w"),
            initial_step=0.005, min_step=1e-8, max_step=0.02, max_steps=600,
            target_displacement=-2.5 * rise, newton_tol=1e-9)
    return make_model(nodes, [(0, 1), (1, 2)], mat, bcs, load, settings)


def make_cantilever(length=1.0, n_elements=20, material=None, tip_force=3e-4,
                    direction="w", settings=None):
    """Horizontal cantilever clamped at x = 0 with a tip force."""
    if not length > 0:
        raise ScenarioError("length must be positive")
    if n_elements < 1:
        raise ScenarioError("n_elements must be >= 1")
    material = material or Material("beam", 1e6, 1e-2, 1e-6, 0.0)
    nodes = [NodeGeom(i, length * i / n_elements, 0.0) for i in range(n_elements + 1)]
    bcs = BoundaryConditions(fixed=tuple(_end_dofs(0, "clamped")))
    load = LoadCase(forces=((n_elements, direction, float(tip_force)),))
    if settings is None:
        settings = ContinuationSettings(
            method="load_control", control_dof=dof_index(n_elements, "w"),
            initial_step=0.1, min_step=1e-6, max_step=0.25, max_steps=100, target_lambda=1.0)
    return make_model(nodes, [(i, i + 1) for i in range(n_elements)], material, bcs, load,
                      settings)


def make_simply_supported(length=1.0, n_elements=20, material=None, mid_force=-1e-3):
    """Pin at x = 0, roller at x = L, point force at midspan."""
    if n_elements % 2:
        raise ScenarioError("n_elements must be even")
    material = material or Material("beam", 1e6, 1e-2, 1e-6, 0.0)
    nodes = [NodeGeom(i, length * i / n_elements, 0.0) for i in range(n_elements + 1)]
    bcs = BoundaryConditions(fixed=((0, "u"), (0, "w"), (n_elements, "w")))
    load = LoadCase(forces=((n_elements // 2, "w", float(mid_force)),))
    return make_model(nodes, [(i, i + 1) for i in range(n_elements)], material, bcs, load)
