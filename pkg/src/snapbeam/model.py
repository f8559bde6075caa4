"""Problem data model: nodes, elements, materials, supports, loads.

Also handles reading, writing and validating scenario documents (JSON).
Degrees of freedom are numbered node-major, three per node in the fixed
order (u, w, theta): global index ``3 * node_id + k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Optional, Sequence

import jsonschema
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

DOF_KINDS = ("u", "w", "theta")
DOFS_PER_NODE = 3


class ScenarioError(ValueError):
    """Base class for problems with a scenario document or model."""


class ScenarioSchemaError(ScenarioError):
    """The document does not conform to the scenario schema."""


class ScenarioValidationError(ScenarioError):
    """The document parsed but the model it describes is invalid."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


def dof_index(node: int, kind: str) -> int:
    return DOFS_PER_NODE * node + DOF_KINDS.index(kind)


@dataclass(frozen=True)
class Material:
    name: str
    E: float
    A: float
    I: float
    rho: float = 0.0

    @classmethod
    def rectangular(cls, name, E, width, thickness, rho=0.0):
        """Material record for a solid rectangular section ``width x thickness``."""
        return cls(name, E, width * thickness, width * thickness**3 / 12.0, rho)


@dataclass(frozen=True)
class NodeGeom:
    id: int
    X: float
    Y: float


@dataclass(frozen=True)
class Element:
    """Two-node beam element. ``L0`` and ``beta0`` are derived from geometry."""

    node_a: int
    node_b: int
    material: Material
    dx0: float
    dy0: float

    @classmethod
    def between(cls, na: NodeGeom, nb: NodeGeom, material: Material) -> "Element":
        return cls(na.id, nb.id, material, nb.X - na.X, nb.Y - na.Y)

    @property
    def L0(self) -> float:
        return math.hypot(self.dx0, self.dy0)

    @property
    def beta0(self) -> float:
        return math.atan2(self.dy0, self.dx0)


@dataclass(frozen=True)
class BoundaryConditions:
    fixed: tuple = ()  # (node, kind)
    prescribed: tuple = ()  # (node, kind, value)


@dataclass(frozen=True)
class LoadCase:
    forces: tuple = ()  # (node, kind, value)
    gravity: bool = False
    gravity_vector: tuple = (0.0, -9.81)


@dataclass(frozen=True)
class ContinuationSettings:
    """Path-following controls.

    ``initial_step``/``min_step``/``max_step`` are load-factor increments
    for ``load_control``, control-dof displacement increments for
    ``displacement_control`` and dimensionless arc lengths for
    ``arc_length``.
    """

    method: str = "arc_length"
    control_dof: Optional[int] = None
    initial_step: float = 0.01
    min_step: float = 1e-6
    max_step: float = 0.05
    max_steps: int = 400
    newton_tol: float = 1e-8
    max_newton_iters: int = 25
    target_lambda: Optional[float] = None
    target_displacement: Optional[float] = None

    METHODS = ("load_control", "displacement_control", "arc_length")

    def __post_init__(self):
        if self.method not in self.METHODS:
            raise ScenarioSchemaError(f"solver.method: unknown method {self.method!r}")
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            raise ScenarioSchemaError(
                "solver: need 0 < min_step <= initial_step <= max_step")
        if not 0 < self.newton_tol <= 1e-2:
            raise ScenarioSchemaError("solver.newton_tol must lie in (0, 1e-2]")
        if self.max_steps < 1 or self.max_newton_iters < 1:
            raise ScenarioSchemaError("solver: max_steps and max_newton_iters must be >= 1")
        if self.method == "displacement_control" and self.control_dof is None:
            raise ScenarioSchemaError("solver.control_dof required for displacement_control")

    def replace(self, **changes) -> "ContinuationSettings":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update({k: v for k, v in changes.items() if v is not None})
        return ContinuationSettings(**values)


@dataclass(frozen=True)
class Model:
    nodes: tuple
    elements: tuple
    bcs: BoundaryConditions = field(default_factory=BoundaryConditions)
    load: LoadCase = field(default_factory=LoadCase)
    settings: Optional[ContinuationSettings] = None

    @property
    def n_dofs(self) -> int:
        return DOFS_PER_NODE * len(self.nodes)

    @property
    def materials(self) -> dict:
        out = {}
        for el in self.elements:
            out.setdefault(el.material.name, el.material)
        return out

    @property
    def scale(self) -> float:
        """Characteristic length: largest extent of the node bounding box."""
        xy = self.coordinates()
        ext = float(np.max(xy.max(axis=0) - xy.min(axis=0)))
        return ext if ext > 0 else 1.0

    def coordinates(self) -> np.ndarray:
        return np.array([[n.X, n.Y] for n in self.nodes], dtype=float)

    def fixed_dofs(self) -> np.ndarray:
        return np.array(sorted(dof_index(n, k) for n, k in self.bcs.fixed), dtype=int)

    def prescribed_values(self) -> dict:
        return {dof_index(n, k): float(v) for n, k, v in self.bcs.prescribed}

    def free_dofs(self, extra_constrained=()) -> np.ndarray:
        taken = set(self.fixed_dofs().tolist()) | set(self.prescribed_values())
        taken |= set(extra_constrained)
        return np.array([i for i in range(self.n_dofs) if i not in taken], dtype=int)

    def reference_load(self) -> np.ndarray:
        f = np.zeros(self.n_dofs)
        for n, k, v in self.load.forces:
            f[dof_index(n, k)] += v
        return f

    def gravity_load(self) -> np.ndarray:
        """Gravity lumped as rho*A*L0/2 at each element end."""
        f = np.zeros(self.n_dofs)
        if not self.load.gravity:
            return f
        gx, gy = self.load.gravity_vector
        for el in self.elements:
            half = 0.5 * el.material.rho * el.material.A * el.L0
            for n in (el.node_a, el.node_b):
                f[3 * n] += half * gx
                f[3 * n + 1] += half * gy
        return f

    def with_load(self, forces=None, gravity=None) -> "Model":
        load = LoadCase(
            forces=self.load.forces if forces is None else tuple(forces),
            gravity=self.load.gravity if gravity is None else gravity,
            gravity_vector=self.load.gravity_vector,
        )
        return Model(self.nodes, self.elements, self.bcs, load, self.settings)

    def with_settings(self, settings: ContinuationSettings) -> "Model":
        return Model(self.nodes, self.elements, self.bcs, self.load, settings)


class Diagnostic(NamedTuple):
    kind: str
    entity: str
    detail: str = ""

    def __str__(self):
        tail = f" ({self.detail})" if self.detail else ""
        return f"{self.entity}: {self.kind}{tail}"


def validate(model: Model) -> list:
    """Return one diagnostic per violated model invariant (empty if valid)."""
    diags = []
    n_nodes = len(model.nodes)
    ids = [n.id for n in model.nodes]
    if ids != list(range(n_nodes)):
        diags.append(Diagnostic("node ids not contiguous from 0", "nodes"))
    for i, el in enumerate(model.elements):
        ent = f"element {i}"
        if not (0 <= el.node_a < n_nodes and 0 <= el.node_b < n_nodes):
            diags.append(Diagnostic("unknown node", ent, f"{el.node_a}-{el.node_b}"))
            continue
        if el.node_a == el.node_b:
            diags.append(Diagnostic("element connects a node to itself", ent))
        na, nb = model.nodes[el.node_a], model.nodes[el.node_b]
        if el.dx0 != nb.X - na.X or el.dy0 != nb.Y - na.Y:
            diags.append(Diagnostic("geometry mismatch", ent))
        if el.L0 <= 0.0:
            diags.append(Diagnostic("zero-length element", ent))
        m = el.material
        if not (m.E > 0 and m.A > 0 and m.I > 0 and m.rho >= 0):
            diags.append(Diagnostic("invalid material", f"material {m.name}"))

    bc_dofs = {}
    for n, k in model.bcs.fixed:
        bc_dofs.setdefault((n, k), []).append("fixed")
    for n, k, _ in model.bcs.prescribed:
        bc_dofs.setdefault((n, k), []).append("prescribed")
    for (n, k), how in bc_dofs.items():
        if not 0 <= n < n_nodes or k not in DOF_KINDS:
            diags.append(Diagnostic("unknown dof", f"node {n}", k))
        elif "fixed" in how and "prescribed" in how:
            diags.append(Diagnostic("dof both fixed and prescribed", f"node {n}", k))
    for n, k, _ in model.load.forces:
        if not 0 <= n < n_nodes or k not in DOF_KINDS:
            diags.append(Diagnostic("load on unknown dof", f"node {n}", k))

    if diags or n_nodes == 0:
        return diags

    if n_nodes > 1:
        rows = [el.node_a for el in model.elements]
        cols = [el.node_b for el in model.elements]
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_nodes, n_nodes))
        n_comp, labels = connected_components(graph, directed=False)
        if n_comp > 1:
            stray = [i for i in range(n_nodes) if labels[i] != labels[0]]
            diags.append(Diagnostic("mesh disconnected", f"node {stray[0]}"))
            return diags

    if any(el.L0 <= 0 for el in model.elements):
        return diags
    if rest_stiffness_singular(model):
        diags.append(Diagnostic("rest stiffness singular", "bcs",
                                "supports do not remove all rigid-body modes"))
    return diags


def rest_stiffness_singular(model: Model, rel_tol: float = 1e-12) -> bool:
    from .corotational import global_internal

    free = model.free_dofs()
    if free.size == 0:
        return False
    _, K, _ = global_internal(model, np.zeros(model.n_dofs))
    Kff = K[np.ix_(free, free)]
    scale = np.max(np.abs(np.diag(Kff)))
    if scale <= 0:
        return True
    return np.linalg.eigvalsh(Kff)[0] <= rel_tol * scale


# -- scenario documents ----------------------------------------------------

_DOF_ENUM = {"enum": list(DOF_KINDS)}
_NUM = {"type": "number"}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["nodes", "elements", "materials", "bcs", "load"],
    "properties": {
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "x", "y"],
                "properties": {"id": {"type": "integer"}, "x": _NUM, "y": _NUM},
            },
        },
        "elements": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["a", "b", "material"],
                "properties": {"a": {"type": "integer"}, "b": {"type": "integer"},
                               "material": {"type": "string"}},
            },
        },
        "materials": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "required": ["E", "A", "I"],
                "properties": {"E": _NUM, "A": _NUM, "I": _NUM, "rho": _NUM},
            },
        },
        "bcs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fixed": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["node", "dof"],
                        "properties": {"node": {"type": "integer"}, "dof": _DOF_ENUM},
                    },
                },
                "prescribed": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["node", "dof", "value"],
                        "properties": {"node": {"type": "integer"}, "dof": _DOF_ENUM,
                                       "value": _NUM},
                    },
                },
            },
        },
        "load": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "forces": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["node", "dof", "value"],
                        "properties": {"node": {"type": "integer"}, "dof": _DOF_ENUM,
                                       "value": _NUM},
                    },
                },
                "gravity": {"type": "boolean"},
                "gravity_vector": {"type": "array", "items": _NUM,
                                   "minItems": 2, "maxItems": 2},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": list(ContinuationSettings.METHODS)},
                "control_dof": {"type": ["integer", "null"]},
                "initial_step": _NUM,
                "min_step": _NUM,
                "max_step": _NUM,
                "max_steps": {"type": "integer"},
                "newton_tol": _NUM,
                "max_newton_iters": {"type": "integer"},
                "target_lambda": {"type": ["number", "null"]},
                "target_displacement": {"type": ["number", "null"]},
            },
        },
    },
}


def load_scenario(document) -> Model:
    """Build a validated :class:`Model` from a scenario document.

    ``document`` may be a JSON string or an already-parsed mapping. Raises
    :class:`ScenarioSchemaError` for malformed documents and
    :class:`ScenarioValidationError` when the described model is invalid.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioSchemaError(f"not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(document, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioSchemaError(f"{where}: {exc.message}") from None

    seen = set()
    for rec in document["nodes"]:
        if rec["id"] in seen:
            raise ScenarioSchemaError(f"nodes: duplicate node id {rec['id']}")
        seen.add(rec["id"])
    nodes = tuple(NodeGeom(int(r["id"]), float(r["x"]), float(r["y"]))
                  for r in sorted(document["nodes"], key=lambda r: r["id"]))
    if [n.id for n in nodes] != list(range(len(nodes))):
        raise ScenarioSchemaError("nodes: ids must be contiguous from 0")

    materials = {
        name: Material(name, float(m["E"]), float(m["A"]), float(m["I"]),
                       float(m.get("rho", 0.0)))
        for name, m in document["materials"].items()
    }
    elements = []
    for i, rec in enumerate(document["elements"]):
        if rec["material"] not in materials:
            raise ScenarioSchemaError(
                f"elements/{i}: unknown material {rec['material']!r}")
        a, b = rec["a"], rec["b"]
        if not (0 <= a < len(nodes) and 0 <= b < len(nodes)):
            raise ScenarioSchemaError(f"elements/{i}: references a missing node")
        elements.append(Element.between(nodes[a], nodes[b], materials[rec["material"]]))

    bcs_doc = document["bcs"]
    bcs = BoundaryConditions(
        fixed=tuple((r["node"], r["dof"]) for r in bcs_doc.get("fixed", [])),
        prescribed=tuple((r["node"], r["dof"], float(r["value"]))
                         for r in bcs_doc.get("prescribed", [])),
    )
    load_doc = document["load"]
    load = LoadCase(
        forces=tuple((r["node"], r["dof"], float(r["value"]))
                     for r in load_doc.get("forces", [])),
        gravity=bool(load_doc.get("gravity", False)),
        gravity_vector=tuple(float(g) for g in load_doc.get("gravity_vector", (0.0, -9.81))),
    )
    settings = None
    if "solver" in document:
        settings = ContinuationSettings(**document["solver"])

    model = Model(nodes, tuple(elements), bcs, load, settings)
    diags = validate(model)
    if diags:
        raise ScenarioValidationError(diags)
    return model


def scenario_document(model: Model) -> dict:
    doc: dict[str, Any] = {
        "nodes": [{"id": n.id, "x": n.X, "y": n.Y} for n in model.nodes],
        "elements": [{"a": e.node_a, "b": e.node_b, "material": e.material.name}
                     for e in model.elements],
        "materials": {name: {"E": m.E, "A": m.A, "I": m.I, "rho": m.rho}
                      for name, m in model.materials.items()},
        "bcs": {
            "fixed": [{"node": n, "dof": k} for n, k in model.bcs.fixed],
            "prescribed": [{"node": n, "dof": k, "value": v}
                           for n, k, v in model.bcs.prescribed],
        },
        "load": {
            "forces": [{"node": n, "dof": k, "value": v} for n, k, v in model.load.forces],
            "gravity": model.load.gravity,
            "gravity_vector": list(model.load.gravity_vector),
        },
    }
    if model.settings is not None:
        s = model.settings
        doc["solver"] = {k: getattr(s, k) for k in s.__dataclass_fields__}
    return doc


def dump_scenario(model: Model) -> str:
    """Serialize ``model`` to a scenario JSON string (exact float round-trip)."""
    return json.dumps(scenario_document(model), indent=2) + "\n"


def read_scenario(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def make_model(nodes: Sequence[NodeGeom], connectivity, materials,
               bcs: BoundaryConditions, load: LoadCase,
               settings: Optional[ContinuationSettings] = None) -> Model:
    """Convenience constructor: ``connectivity`` is (a, b) pairs.

    ``materials`` is a single :class:`Material` or one per element.
    """
    if isinstance(materials, Material):
        materials = [materials] * len(connectivity)
    nodes = tuple(nodes)
    elements = tuple(Element.between(nodes[a], nodes[b], m)
                     for (a, b), m in zip(connectivity, materials))
    return Model(nodes, elements, bcs, load, settings)


def permute_nodes(model: Model, perm: Mapping[int, int]) -> Model:
    """Relabel node ``i`` as ``perm[i]`` keeping geometry and references consistent."""
    nodes = sorted((NodeGeom(perm[n.id], n.X, n.Y) for n in model.nodes), key=lambda n: n.id)
    elements = tuple(Element(perm[e.node_a], perm[e.node_b], e.material, e.dx0, e.dy0)
                     for e in model.elements)
    bcs = BoundaryConditions(
        fixed=tuple((perm[n], k) for n, k in model.bcs.fixed),
        prescribed=tuple((perm[n], k, v) for n, k, v in model.bcs.prescribed),
    )
    load = LoadCase(tuple((perm[n], k, v) for n, k, v in model.load.forces),
                    model.load.gravity, model.load.gravity_vector)
    return Model(tuple(nodes), elements, bcs, load, model.settings)
