"""2D two-fluid incompressible flow on moving quadrilateral meshes.

Biquadratic (Q2) velocity / discontinuous linear pressure finite elements,
one-directional mesh motion driven by the interface kinematics, slip and
generalized Navier (GNBC) wall conditions with moving contact points, and a
diagnostics suite for discrete energy balances and geometric conservation.
"""

from .mesh import (
    Mesh,
    MotionMap,
    MeshConstructionError,
    MeshTangledError,
    build_structured_mesh,
    apply_motion,
    interface_measure,
    region_integral,
)
from .params import PhysicalParams, SchemeConfig
from .spaces import FunctionSpace, build_spaces, evaluate_field
from .motion import MeshVelocity, discrete_normals, kinematic_trace, solve_mesh_velocity
from .solver import State, StepResult, step
from .energy import EnergyReport, GclCheckResult, energy_report

__all__ = [
    "Mesh",
    "MotionMap",
    "MeshConstructionError",
    "MeshTangledError",
    "build_structured_mesh",
    "apply_motion",
    "interface_measure",
    "region_integral",
    "PhysicalParams",
    "SchemeConfig",
    "FunctionSpace",
    "build_spaces",
    "evaluate_field",
    "MeshVelocity",
    "discrete_normals",
    "kinematic_trace",
    "solve_mesh_velocity",
    "State",
    "StepResult",
    "step",
    "EnergyReport",
    "GclCheckResult",
    "energy_report",
]
