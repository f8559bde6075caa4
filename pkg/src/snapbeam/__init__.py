"""Co-rotational beam snap-through analysis for bistable gripper palms."""

from .model import (BoundaryConditions, ContinuationSettings, Element, LoadCase, Material, Model,
                    NodeGeom, ScenarioError, dof_index, dump_scenario, load_scenario, validate)
from .solver import EquilibriumPath, State, continue_path, solve_at_load, two_step_protocol

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditions", "ContinuationSettings", "Element", "EquilibriumPath", "LoadCase",
    "Material", "Model", "NodeGeom", "ScenarioError", "State", "continue_path", "dof_index",
    "dump_scenario", "load_scenario", "solve_at_load", "two_step_protocol", "validate",
]
