"""Linearized single-track (bicycle) lateral dynamics and exact discretization.

State ordering is fixed as (v, omega, y, psi): lateral velocity, yaw rate,
lateral displacement, yaw angle. The input u is the steering-wheel angle in
radians; the steering ratio enters through the input matrix only. Valid for
small sideslip/yaw angles and constant longitudinal speed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

__all__ = [
    "VehicleParams",
    "ContinuousDynamics",
    "DiscreteDynamics",
    "VehicleState",
    "OutputSample",
    "build_continuous",
    "discretize",
    "step",
    "output",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the plant. All strictly positive.

    cf, cr: front/rear cornering stiffness [N/rad]
    a, b:   mass center to front/rear axle [m]
    m:      mass [kg]
    iz:     polar moment of inertia [kg m^2]
    steering_ratio: steering-wheel to road-wheel ratio [-]
    u_long: constant longitudinal velocity [m/s] (model singular at 0)
    """

    cf: float = 12000.0
    cr: float = 8000.0
    a: float = 0.92
    b: float = 1.38
    m: float = 1200.0
    iz: float = 1500.0
    steering_ratio: float = 16.0
    u_long: float = 20.0

    def __post_init__(self):
        for name in ("cf", "cr", "a", "b", "m", "iz", "steering_ratio", "u_long"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"vehicle parameter {name} must be strictly positive, got {value!r}")


@dataclass(frozen=True)
class ContinuousDynamics:
    """Continuous-time (a_c, b_c, c_c); c_c is the fixed (y, psi) output selector."""

    a_c: np.ndarray
    b_c: np.ndarray
    c_c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a_c", _frozen(self.a_c))
        object.__setattr__(self, "b_c", _frozen(self.b_c))
        object.__setattr__(self, "c_c", _frozen(self.c_c))


@dataclass(frozen=True)
class DiscreteDynamics:
    """Zero-order-hold discretization (a, b, c) at sampling period t_s."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    t_s: float

    def __post_init__(self):
        if self.t_s <= 0.0:
            raise ValueError(f"sampling period must be positive, got {self.t_s!r}")
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "b", _frozen(self.b))
        object.__setattr__(self, "c", _frozen(self.c))


@dataclass(frozen=True)
class VehicleState:
    v: float = 0.0
    omega: float = 0.0
    y: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.v, self.omega, self.y, self.psi])):
            raise ValueError("vehicle state entries must be finite")

    def as_array(self):
        return np.array([self.v, self.omega, self.y, self.psi])

    @classmethod
    def from_array(cls, arr):
        v, omega, y, psi = np.asarray(arr, dtype=float)
        return cls(v=v, omega=omega, y=y, psi=psi)


@dataclass(frozen=True)
class OutputSample:
    """(y, psi) pair: lateral displacement [m] and yaw angle [rad]."""

    y: float
    psi: float

    def as_array(self):
        return np.array([self.y, self.psi])


def build_continuous(params: VehicleParams) -> ContinuousDynamics:
    """Populate the closed-form continuous matrices from physical parameters."""
    cf, cr = params.cf, params.cr
    a, b = params.a, params.b
    m, iz = params.m, params.iz
    u = params.u_long
    a_c = np.array([
        [-(cf + cr) / (m * u), -(a * cf - b * cr) / (m * u) - u, 0.0, 0.0],
        [-(a * cf - b * cr) / (iz * u), -(a * a * cf + b * b * cr) / (iz * u), 0.0, 0.0],
        [1.0, 0.0, 0.0, u],
        [0.0, 1.0, 0.0, 0.0],
    ])
    b_c = np.array([
        [cf / (params.steering_ratio * m)],
        [a * cf / (params.steering_ratio * iz)],
        [0.0],
        [0.0],
    ])
    c_c = np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return ContinuousDynamics(a_c=a_c, b_c=b_c, c_c=c_c)


def discretize(cont: ContinuousDynamics, t_s: float) -> DiscreteDynamics:
    """Exact zero-order-hold discretization at period t_s.

    Computed as the matrix exponential of the augmented block
    [[a_c, b_c], [0, 0]] * t_s, so (a, b) satisfy the semigroup property
    a(t_s) = a(t_s/2) @ a(t_s/2) to rounding.
    """
    if t_s <= 0.0:
        raise ValueError(f"sampling period must be positive, got {t_s!r}")
    if not (np.isfinite(cont.a_c).all() and np.isfinite(cont.b_c).all()):
        raise ValueError("continuous dynamics contain non-finite entries")
    n = cont.a_c.shape[0]
    m = cont.b_c.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = cont.a_c
    aug[:n, n:] = cont.b_c
    e = expm(aug * t_s)
    return DiscreteDynamics(a=e[:n, :n], b=e[:n, n:], c=cont.c_c, t_s=t_s)


def step(dyn: DiscreteDynamics, x: VehicleState, u: float) -> VehicleState:
    """One plant update: A x + B u."""
    if not np.isfinite(u):
        raise ValueError(f"steering input must be finite, got {u!r}")
    nxt = dyn.a @ x.as_array() + dyn.b[:, 0] * u
    return VehicleState.from_array(nxt)


def output(dyn: DiscreteDynamics, x: VehicleState) -> OutputSample:
    """Measured output z = C x, i.e. the (y, psi) components."""
    y, psi = dyn.c @ x.as_array()
    return OutputSample(y=y, psi=psi)
