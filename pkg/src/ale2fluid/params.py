"""Physical parameters and scheme configuration."""

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class PhysicalParams:
    """Fluid and wall data in reduced units.

    Fluid 1 and 2 are told apart by the mesh region tags.  beta is the wall
    slip coefficient, applied per fluid on the wall segments each fluid
    touches.  theta_s is the static contact angle measured in fluid 1.  u_b
    maps a wall tag to its tangential velocity (along +x for horizontal
    walls, +y for lateral ones).
    """

    rho1: float = 1.0
    rho2: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0
    gamma: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    theta_s: float = math.pi / 2
    g: float = 0.0
    u_b: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.rho1, self.rho2, self.eta1, self.eta2) <= 0.0:
            raise ValueError("densities and viscosities must be positive")
        if self.gamma < 0.0 or self.beta1 < 0.0 or self.beta2 < 0.0:
            raise ValueError("gamma and beta must be nonnegative")
        if not 0.0 < self.theta_s < math.pi:
            raise ValueError("theta_s must lie in (0, pi)")

    @property
    def delta_rho(self):
        return self.rho2 - self.rho1

    def rho(self, region):
        return self.rho1 if region == 1 else self.rho2

    def eta(self, region):
        return self.eta1 if region == 1 else self.eta2

    def beta(self, region):
        return self.beta1 if region == 1 else self.beta2

    def wall_velocity(self, tag):
        return float(self.u_b.get(tag, 0.0))


MOTION_SCHEMES = ("M1", "M2", "M3")
GRAVITY_DOMAINS = ("prev", "next", "half")


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping choices: mesh-motion scheme and gravity domain.

    motion_scheme M1 builds the mesh velocity from the current velocity, M2
    iterates it to consistency with the end-of-step velocity (relaxed fixed
    point), M3 extrapolates from the two previous velocities.  The gravity
    load is assembled on the old mesh ("prev"), the moved mesh ("next") or
    averaged ("half").
    """

    motion_scheme: str = "M1"
    gravity_domain: str = "next"
    dt: float = 0.025
    motion_axis: int = 1
    m2_relaxation: float = 0.7
    m2_tol: float = 1e-8
    m2_max_iter: int = 50
    solver: str = "direct"
    gmres_tol: float = 1e-10
    gmres_restart: int = 50
    gmres_max_iter: int = 2000
    n_min: float = 0.1
    quad_volume: int = 5
    quad_edge: int = 5

    def __post_init__(self):
        if self.motion_scheme not in MOTION_SCHEMES:
            raise ValueError(f"unknown motion scheme {self.motion_scheme!r}")
        if self.gravity_domain not in GRAVITY_DOMAINS:
            raise ValueError(f"unknown gravity domain {self.gravity_domain!r}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.m2_relaxation <= 1.0:
            raise ValueError("m2_relaxation must lie in (0, 1]")
        if self.motion_axis not in (0, 1):
            raise ValueError("motion_axis must be 0 or 1")
        if self.solver not in ("direct", "gmres"):
            raise ValueError(f"unknown solver {self.solver!r}")
