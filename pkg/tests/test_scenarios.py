import math

import numpy as np
import pytest
from scipy.integrate import quad

from snapbeam import scenarios as sc
from snapbeam.model import ScenarioError, dof_index, validate
from snapbeam.solver import continue_path, two_step_protocol


def profile_arc_length(spec):
    l, h, e = spec.span, spec.rise, spec.imperfection
    if spec.profile == "half_sine":
        def dy(x):
            return h * math.pi / l * math.cos(math.pi * x / l) \
                + e * h * 2 * math.pi / l * math.cos(2 * math.pi * x / l)
        return quad(lambda x: math.hypot(1.0, dy(x)), 0.0, l, limit=200)[0]
    R = (0.25 * l * l + h * h) / (2 * h)
    return 2 * R * math.asin(0.5 * l / R)


@pytest.mark.parametrize("spec", [
    sc.ArchSpec(), sc.ArchSpec(imperfection=0.0), sc.ArchSpec(profile="circular", imperfection=0.0),
    sc.ArchSpec(ends="clamped", n_elements=64), sc.ArchSpec(span=0.2, rise=0.03),
])
def test_arch_geometry(spec):
    model = sc.make_shallow_arch(spec)
    n = spec.n_elements
    assert len(model.nodes) == n + 1
    apex = sc.apex_node(model)
    assert apex == n // 2
    assert model.nodes[apex].Y == spec.rise and model.nodes[apex].X == 0.5 * spec.span
    assert model.nodes[0].Y == 0.0 and model.nodes[-1].X == spec.span
    total = sum(el.L0 for el in model.elements)
    assert total == pytest.approx(profile_arc_length(spec), rel=1e-3)
    assert validate(model) == []
    F = model.reference_load()
    assert F[dof_index(apex, "w")] == -1.0 and np.count_nonzero(F) == 1


def test_end_conditions():
    pinned = sc.make_shallow_arch(sc.ArchSpec(ends="pinned"))
    clamped = sc.make_shallow_arch(sc.ArchSpec(ends="clamped"))
    assert set(pinned.bcs.fixed) == {(0, "u"), (0, "w"), (32, "u"), (32, "w")}
    assert set(clamped.bcs.fixed) == set(pinned.bcs.fixed) | {(0, "theta"), (32, "theta")}


def test_flat_spec_is_straight_beam():
    model = sc.make_shallow_arch(sc.ArchSpec(rise=0.0, n_elements=8))
    assert all(n.Y == 0.0 for n in model.nodes)


@pytest.mark.parametrize("kwargs", [
    dict(span=0.0), dict(rise=-1.0), dict(n_elements=7), dict(n_elements=2),
    dict(profile="parabola"), dict(ends="free"), dict(imperfection=math.nan),
])
def test_invalid_arch_spec(kwargs):
    with pytest.raises(ScenarioError):
        sc.ArchSpec(**kwargs)


@pytest.mark.parametrize("make", [
    lambda: sc.make_vertical_beam(length=-1.0), lambda: sc.make_vertical_beam(n_elements=3),
    lambda: sc.make_von_mises_truss(rise=0.0), lambda: sc.make_cantilever(length=0.0),
])
def test_invalid_generator_parameters(make):
    with pytest.raises(ScenarioError):
        make()


def test_all_generators_validate():
    for model in (sc.make_vertical_beam(), sc.make_von_mises_truss(), sc.make_cantilever(),
                  sc.make_simply_supported(), sc.make_shallow_arch()):
        assert validate(model) == []


def test_vertical_beam_layout():
    model = sc.make_vertical_beam(length=0.05, n_elements=16)
    assert all(n.X == 0.0 for n in model.nodes)
    assert model.nodes[-1].Y == 0.05
    assert model.load.gravity
    assert model.reference_load()[dof_index(16, "u")] == 0.005


def test_vertical_beam_mesh_convergence():
    tips = []
    for n in (16, 32):
        path = two_step_protocol(sc.make_vertical_beam(n_elements=n))
        tips.append(path.points[-1].state.q[dof_index(n, "u")])
    assert abs(tips[1] / tips[0] - 1) < 0.01


def test_von_mises_bending_is_negligible():
    model = sc.make_von_mises_truss(half_span=1.0)
    m = model.elements[0].material
    assert m.I == pytest.approx(1e-8 * m.A, rel=1e-15)


def test_von_mises_symmetric_path():
    model = sc.make_von_mises_truss(half_span=1.0, rise=0.1)
    path = continue_path(model)
    u_apex = path.dof(dof_index(1, "u"))
    assert np.max(np.abs(u_apex)) < 1e-8 * 1.0
    assert path.dof(dof_index(1, "w"))[-1] <= -2.5 * 0.1 + 1e-12


def test_demo_material_is_rectangular_silicone():
    m = sc.demo_material()
    assert m.E == 1.3e6
    assert m.A == pytest.approx(1e-5) and m.I == pytest.approx(0.01 * 1e-9 / 12)
