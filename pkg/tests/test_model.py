import json
import math

import numpy as np
import pytest

from snapbeam import scenarios as sc
from snapbeam.model import (BoundaryConditions, ContinuationSettings, Element, LoadCase, Material,
                            Model, NodeGeom, ScenarioSchemaError, ScenarioValidationError, dof_index,
                            dump_scenario, load_scenario, make_model, permute_nodes,
                            scenario_document, validate)

STEEL = Material("steel", 2e11, 1e-4, 1e-8, 7800.0)


def cantilever_doc():
    return {
        "nodes": [{"id": 0, "x": 0.0, "y": 0.0}, {"id": 1, "x": 1.0, "y": 0.0}],
        "elements": [{"a": 0, "b": 1, "material": "steel"}],
        "materials": {"steel": {"E": 2e11, "A": 1e-4, "I": 1e-8, "rho": 7800.0}},
        "bcs": {"fixed": [{"node": 0, "dof": d} for d in ("u", "w", "theta")]},
        "load": {"forces": [{"node": 1, "dof": "w", "value": -1.0}], "gravity": False},
    }


def test_dof_index_layout():
    assert [dof_index(2, k) for k in ("u", "w", "theta")] == [6, 7, 8]
    with pytest.raises(ValueError):
        dof_index(0, "phi")


def test_minimal_cantilever_document():
    model = load_scenario(cantilever_doc())
    assert len(model.elements) == 1
    assert model.fixed_dofs().tolist() == [0, 1, 2]
    assert model.free_dofs().tolist() == [3, 4, 5]
    assert model.reference_load()[4] == -1.0


def test_duplicate_node_id_is_schema_error():
    doc = cantilever_doc()
    doc["nodes"][1]["id"] = 0
    with pytest.raises(ScenarioSchemaError, match="duplicate"):
        load_scenario(doc)


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.pop("load"), "load"),
    (lambda d: d["nodes"][0].update(x="zero"), "nodes/0/x"),
    (lambda d: d.update(extra=1), "extra"),
    (lambda d: d["bcs"]["fixed"][0].update(dof="phi"), "bcs/fixed/0/dof"),
])
def test_schema_violations_name_the_field(mutate, fragment):
    doc = cantilever_doc()
    mutate(doc)
    with pytest.raises(ScenarioSchemaError) as info:
        load_scenario(doc)
    assert fragment in str(info.value)


def test_invalid_json_text():
    with pytest.raises(ScenarioSchemaError, match="JSON"):
        load_scenario("{nodes: ")


def test_validation_failures_carry_entity():
    doc = cantilever_doc()
    doc["bcs"]["fixed"] = []
    with pytest.raises(ScenarioValidationError) as info:
        load_scenario(doc)
    assert [d.kind for d in info.value.diagnostics] == ["rest stiffness singular"]

    doc = cantilever_doc()
    doc["nodes"].append({"id": 2, "x": 5.0, "y": 5.0})
    doc["nodes"].append({"id": 3, "x": 6.0, "y": 5.0})
    doc["elements"].append({"a": 2, "b": 3, "material": "steel"})
    with pytest.raises(ScenarioValidationError) as info:
        load_scenario(doc)
    diag = info.value.diagnostics[0]
    assert diag.kind == "mesh disconnected" and diag.entity == "node 2"


def test_validate_examples():
    assert validate(load_scenario(cantilever_doc())) == []
    free = make_model([NodeGeom(0, 0, 0), NodeGeom(1, 1, 0)], [(0, 1)], STEEL,
                      BoundaryConditions(), LoadCase())
    assert [d.kind for d in validate(free)] == ["rest stiffness singular"]
    zero = make_model([NodeGeom(0, 0, 0), NodeGeom(1, 0, 0)], [(0, 1)], STEEL,
                      BoundaryConditions(fixed=((0, "u"), (0, "w"), (0, "theta"))), LoadCase())
    assert [(d.kind, d.entity) for d in validate(zero)] == [("zero-length element", "element 0")]


def test_fixed_and_prescribed_conflict():
    model = make_model([NodeGeom(0, 0, 0), NodeGeom(1, 1, 0)], [(0, 1)], STEEL,
                       BoundaryConditions(fixed=((0, "u"), (0, "w"), (0, "theta")),
                                          prescribed=((0, "u", 0.1),)), LoadCase())
    assert any(d.kind == "dof both fixed and prescribed" for d in validate(model))


def test_round_trip_arch_is_identical():
    model = sc.make_shallow_arch()
    again = load_scenario(dump_scenario(model))
    assert again == model
    assert dump_scenario(again) == dump_scenario(model)


def test_round_trip_preserves_gravity_and_settings():
    model = sc.make_vertical_beam()
    doc = json.loads(dump_scenario(model))
    assert doc["load"]["gravity"] is True
    again = load_scenario(doc)
    assert again == model and again.settings == model.settings


def test_geometry_is_recomputed_exactly():
    model = sc.make_shallow_arch(sc.ArchSpec(profile="circular"))
    for el in model.elements:
        a, b = model.nodes[el.node_a], model.nodes[el.node_b]
        assert el.L0 == math.hypot(b.X - a.X, b.Y - a.Y)
        assert el.beta0 == math.atan2(b.Y - a.Y, b.X - a.X)


def _two_node(material=STEEL, b_id=1):
    nodes = (NodeGeom(0, 0.0, 0.0), NodeGeom(1, 1.0, 0.0))
    el = Element(0, b_id, material, 1.0, 0.0)
    return Model(nodes, (el,), BoundaryConditions(fixed=((0, "u"), (0, "w"), (0, "theta"))))


def test_self_connected_element_is_reported():
    kinds = [d.kind for d in validate(_two_node(b_id=0))]
    assert "element connects a node to itself" in kinds


@pytest.mark.parametrize("kwargs", [dict(E=0), dict(A=-1), dict(I=0), dict(rho=-1)])
def test_material_invariants_are_reported(kwargs):
    base = dict(name="m", E=1.0, A=1.0, I=1.0, rho=0.0)
    base.update(kwargs)
    diags = validate(_two_node(Material(**base)))
    assert [(d.kind, d.entity) for d in diags] == [("invalid material", "material m")]


@pytest.mark.parametrize("kwargs", [
    dict(min_step=0.1, initial_step=0.01), dict(newton_tol=0.1), dict(method="newton"),
    dict(method="displacement_control"), dict(max_steps=0),
])
def test_settings_invariants(kwargs):
    with pytest.raises(ScenarioSchemaError):
        ContinuationSettings(**kwargs)


def test_gravity_lumping():
    model = sc.make_vertical_beam(length=0.05, n_elements=4)
    g = model.gravity_load()
    m = model.elements[0].material
    total = m.rho * m.A * 0.05 * 9.81
    assert g[1::3].sum() == pytest.approx(-total, rel=1e-14)
    assert g[1] == pytest.approx(-total / 8, rel=1e-14)
    assert np.all(g[0::3] == 0.0) and np.all(g[2::3] == 0.0)


def test_scenario_document_keys():
    doc = scenario_document(sc.make_von_mises_truss())
    assert set(doc) == {"nodes", "elements", "materials", "bcs", "load", "solver"}


def test_permute_nodes_keeps_model_valid():
    model = sc.make_shallow_arch(sc.ArchSpec(n_elements=8))
    perm = {i: (i * 5) % 9 for i in range(9)}
    other = permute_nodes(model, perm)
    assert validate(other) == []
    assert sorted(e.L0 for e in other.elements) == sorted(e.L0 for e in model.elements)
