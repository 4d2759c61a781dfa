"""Closed-loop scenario engine: reference paths, plant-agents-detector loop, metrics.

Scenarios:
  path_following     driver and automation track the same smooth curve
  obstacle_avoidance the driver's reference adds a lateral lane-change offset
                     that the automation's reference does not have
  combined           path-following segment followed by the driver deviation,
                     normally run with the switching detector enabled

Runs are fully deterministic: identical configs produce bit-identical traces.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .agents import (
    AuthorityWeights,
    agent_step,
    build_bundle,
    rebuild_for_weights,
)
from .authority import (
    DetectorState,
    SwitchingConfig,
    apply_rule,
    detector_update,
    expected_driver_input,
)
from .predictor import MpcConfig, PredictionWorkspace, synthesize_driver_gain
from .vehicle import VehicleParams, VehicleState, build_continuous, discretize, step

__all__ = [
    "SCENARIO_KINDS",
    "PathShape",
    "ReferencePath",
    "ScenarioConfig",
    "SimTrace",
    "Metrics",
    "SimulationDiverged",
    "make_reference",
    "run_scenario",
    "compute_metrics",
    "verify_trace",
    "TRACE_COLUMNS",
]

SCENARIO_KINDS = ("path_following", "obstacle_avoidance", "combined")

TRACE_COLUMNS = (
    "k", "t", "v", "omega", "y", "psi", "u_D", "u_D_hat", "u_A", "u",
    "lambda_D", "lambda_A", "delta", "r_D_y", "r_D_psi", "r_A_y", "r_A_psi",
)

# Default driver output weights: relaxed for everyday path following,
# much larger when the driver insists on their own path in an emergency.
Q_A_DEFAULT = (1.5, 0.6)
Q_D_PATH_FOLLOWING = (0.036, 0.02)
Q_D_OBSTACLE = (36.0, 20.0)
# Unit input weight destabilizes the finite-horizon loops on the default
# vehicle (autonomous-loop spectral radius 1.0064 at N=50); 0.03 keeps every
# operating point's behavior consistent with the documented trend suite.
R_DEFAULT = 0.03


class SimulationDiverged(RuntimeError):
    """Raised when the plant state stops being finite; carries the step index."""

    def __init__(self, step_index):
        super().__init__(f"simulation state became non-finite at step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True)
class PathShape:
    """Geometry of the generated reference curves.

    amplitude / period:  lateral sinusoid y(t) = amplitude sin(2 pi t / period)
    offset:              driver's lane-change offset during avoidance [m]
    deviation_start:     time the driver's reference starts deviating [s];
                         None defers to the scenario default (2 s for
                         obstacle_avoidance, half the run for combined)
    deviation_duration:  length of the smoothstep transition [s]
    """

    amplitude: float = 2.0
    period: float = 10.0
    offset: float = 3.0
    deviation_start: float | None = None
    deviation_duration: float = 2.0

    def __post_init__(self):
        if self.period <= 0.0:
            raise ValueError(f"path period must be positive, got {self.period}")
        if self.deviation_duration <= 0.0:
            raise ValueError(
                f"deviation duration must be positive, got {self.deviation_duration}")


@dataclass(frozen=True)
class ReferencePath:
    """Sampled (y_ref, psi_ref) sequence with unlimited lookahead.

    psi_ref is constructed from y_ref by the forward-difference small-angle
    rule psi[k] = (y[k+1] - y[k]) / (U T), consistent with the linearized
    kinematics ydot = v + U psi. Indices beyond the sampled range hold the
    final sample.
    """

    y: np.ndarray
    psi: np.ndarray
    label: str

    def __len__(self):
        return len(self.y)

    def sample(self, k: int):
        i = min(max(k, 0), len(self.y) - 1)
        return self.y[i], self.psi[i]

    def window(self, start: int, count: int) -> np.ndarray:
        """(count, 2) array of samples start .. start+count-1, clamped at the end."""
        idx = np.clip(np.arange(start, start + count), 0, len(self.y) - 1)
        return np.column_stack((self.y[idx], self.psi[idx]))


def _smoothstep(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau * tau * (3.0 - 2.0 * tau)


def make_reference(kind: str, shape: PathShape, *, steps: int, t_s: float, u_long: float,
                   lookahead: int = 0, role: str = "automation") -> ReferencePath:
    """Generate one party's reference path for a scenario.

    The driver's path differs from the automation's only in the
    obstacle_avoidance / combined kinds, where a smoothstep lane-change offset
    is added from deviation_start onward; it is exactly zero before the
    deviation and exactly `offset` after it completes.
    """
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}")
    if role not in ("automation", "driver"):
        raise ValueError(f"unknown path role {role!r}")
    if steps < 1:
        raise ValueError(f"path length must be at least one step, got {steps}")
    length = steps + lookahead + 1
    t = np.arange(length + 1) * t_s
    y = shape.amplitude * np.sin(2.0 * np.pi * t / shape.period)
    if role == "driver" and kind in ("obstacle_avoidance", "combined"):
        if shape.deviation_start is None:
            raise ValueError("deviation_start must be set for scenarios with a driver deviation")
        tau = (t - shape.deviation_start) / shape.deviation_duration
        y = y + shape.offset * _smoothstep(tau)
    psi = (y[1:] - y[:-1]) / (u_long * t_s)
    return ReferencePath(y=y[:-1], psi=psi, label=role)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one closed-loop run.

    q_d defaults by scenario kind: the path-following weights for
    path_following and combined, the much larger obstacle weights for
    obstacle_avoidance. duration / t_s must give an integer step count of at
    least 2 * horizon so the long reference window is exercised.
    """

    kind: str = "path_following"
    duration: float | None = None
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    t_s: float = 0.02
    horizon: int = 50
    q_a: tuple = Q_A_DEFAULT
    r_a: float = R_DEFAULT
    q_d: tuple | None = None
    r_d: float = R_DEFAULT
    lambda_d: float | None = None
    lambda_a: float | None = None
    driver_kind: str = "adaptive"
    shape: PathShape = field(default_factory=PathShape)
    switching: SwitchingConfig | None = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.duration is None:
            object.__setattr__(self, "duration", 20.0 if self.kind == "combined" else 10.0)
        if self.q_d is None:
            q_d = Q_D_OBSTACLE if self.kind == "obstacle_avoidance" else Q_D_PATH_FOLLOWING
            object.__setattr__(self, "q_d", q_d)
        if self.shape.deviation_start is None:
            start = self.duration / 2.0 if self.kind == "combined" else 2.0
            object.__setattr__(self, "shape", replace(self.shape, deviation_start=start))
        if self.lambda_d is None and self.lambda_a is None:
            default_d = (self.switching.lambda_d_low if self.switching is not None else 0.5)
            object.__setattr__(self, "lambda_d", default_d)
            object.__setattr__(self, "lambda_a", 1.0 - default_d)
        elif self.lambda_d is None:
            object.__setattr__(self, "lambda_d", 1.0 - self.lambda_a)
        elif self.lambda_a is None:
            object.__setattr__(self, "lambda_a", 1.0 - self.lambda_d)
        self.weights()  # validates nonnegativity and the simplex constraint
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        self.automation_cfg()  # validates positive definiteness of all weights
        self.driver_cfg()
        steps = self.duration / self.t_s
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(
                f"duration {self.duration} is not an integer number of {self.t_s} s steps")
        if round(steps) < 2 * self.horizon:
            raise ValueError(
                f"run of {round(steps)} steps is shorter than 2 * horizon = {2 * self.horizon}")

    @property
    def steps(self) -> int:
        return round(self.duration / self.t_s)

    def weights(self) -> AuthorityWeights:
        return AuthorityWeights(lambda_d=self.lambda_d, lambda_a=self.lambda_a)

    def automation_cfg(self) -> MpcConfig:
        return MpcConfig(n=self.horizon, q=np.diag(self.q_a), r=np.array([[self.r_a]]))

    def driver_cfg(self) -> MpcConfig:
        return MpcConfig(n=self.horizon, q=np.diag(self.q_d), r=np.array([[self.r_d]]))


@dataclass(frozen=True)
class SimTrace:
    """Per-step record of one run; column arrays in TRACE_COLUMNS order."""

    k: np.ndarray
    t: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    u_D: np.ndarray
    u_D_hat: np.ndarray
    u_A: np.ndarray
    u: np.ndarray
    lambda_D: np.ndarray
    lambda_A: np.ndarray
    delta: np.ndarray
    r_D_y: np.ndarray
    r_D_psi: np.ndarray
    r_A_y: np.ndarray
    r_A_psi: np.ndarray

    def __len__(self):
        return len(self.k)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def to_csv(self, path):
        """Write the trace with 17 significant digits for bit-exact regression."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(len(self.k)):
                fields = [str(int(self.k[i]))]
                fields += [format(float(self.column(c)[i]), ".17g") for c in TRACE_COLUMNS[1:]]
                fh.write(",".join(fields) + "\n")

    @classmethod
    def from_csv(cls, path):
        data = np.genfromtxt(path, delimiter=",", names=True)
        return cls(**{c: np.atleast_1d(data[c]) for c in TRACE_COLUMNS})


@dataclass(frozen=True)
class Metrics:
    """Summary numbers of one run; latency only meaningful when a switch occurred."""

    rms_y_err: float
    rms_psi_err: float
    rms_u_d: float
    peak_u_d: float
    latency_s: float | None
    switch_count: int


def run_scenario(cfg: ScenarioConfig):
    """Execute one closed-loop run. Returns (SimTrace, Metrics).

    Per step: read the reference windows (N driver samples, 2N-1 automation
    samples), evaluate the agents, update the intent detector when switching
    is enabled (a weight change becomes effective at the next step, with all
    weight-dependent gains rebuilt between steps), then advance the plant.
    Metrics are computed against the driver's reference.
    """
    dyn = discretize(build_continuous(cfg.vehicle), cfg.t_s)
    n = cfg.horizon
    steps = cfg.steps
    weights = cfg.weights()
    bundle = build_bundle(dyn, cfg.automation_cfg(), cfg.driver_cfg(), weights,
                          cfg.driver_kind)
    path_kw = dict(steps=steps, t_s=cfg.t_s, u_long=cfg.vehicle.u_long, lookahead=2 * n)
    r_a = make_reference(cfg.kind, cfg.shape, role="automation", **path_kw)
    r_d = make_reference(cfg.kind, cfg.shape, role="driver", **path_kw)

    detector = None
    est_gain = None
    if cfg.switching is not None:
        est_cfg = MpcConfig(n=n, q=cfg.switching.q_d_hat, r=cfg.switching.r_d_hat)
        est_gain = synthesize_driver_gain(bundle.tilde, est_cfg, weights.lambda_d)
        detector = DetectorState(cfg.switching.window, weights=weights)

    cols = {name: np.empty(steps) for name in TRACE_COLUMNS}
    workspace = PredictionWorkspace(n)
    x = VehicleState()
    for k in range(steps):
        r_d_win = r_d.window(k + 1, n)
        r_a_long = r_a.window(k + 1, 2 * n - 1)
        try:
            u_d, u_a, u = agent_step(bundle, x, r_d_win, r_a_long, workspace)
        except ValueError as exc:
            raise SimulationDiverged(k) from exc
        if not (math.isfinite(u_d) and math.isfinite(u_a) and math.isfinite(u)):
            raise SimulationDiverged(k)

        u_hat = math.nan
        delta = math.nan
        pending = None
        if detector is not None:
            u_hat = expected_driver_input(est_gain, bundle.tilde, bundle.automation_gain,
                                          x, r_a_long, weights.lambda_a)
            delta = detector_update(detector, u_d, u_hat)
            proposed = apply_rule(delta, cfg.switching)
            if proposed != weights:
                pending = proposed

        state = x.as_array()
        row = (k, k * cfg.t_s, state[0], state[1], state[2], state[3], u_d, u_hat,
               u_a, u, weights.lambda_d, weights.lambda_a, delta,
               *r_d.sample(k), *r_a.sample(k))
        for name, value in zip(TRACE_COLUMNS, row):
            cols[name][k] = value

        x = step(dyn, x, u)
        if not np.isfinite(x.as_array()).all():
            raise SimulationDiverged(k)

        if pending is not None:
            weights = pending
            bundle = rebuild_for_weights(bundle, weights)
            est_gain = synthesize_driver_gain(bundle.tilde, est_cfg, weights.lambda_d)
            detector.weights = weights
            if cfg.switching.clear_on_switch:
                detector.clear()

    trace = SimTrace(**cols)
    return trace, compute_metrics(trace, r_d)


def compute_metrics(trace: SimTrace, reference: ReferencePath) -> Metrics:
    """RMS tracking errors and driver effort vs the given reference path.

    Detection latency is the time between the first step where the two
    reference columns of the trace differ and the first authority switch.
    """
    if len(trace) == 0:
        raise ValueError("cannot compute metrics of an empty trace")
    idx = np.clip(trace.k.astype(int), 0, len(reference) - 1)
    y_err = trace.y - reference.y[idx]
    psi_err = trace.psi - reference.psi[idx]
    switch_steps = np.nonzero(np.diff(trace.lambda_D) != 0.0)[0] + 1
    diverged = np.nonzero((trace.r_D_y != trace.r_A_y) | (trace.r_D_psi != trace.r_A_psi))[0]
    latency = None
    if switch_steps.size and diverged.size:
        latency = float(trace.t[switch_steps[0]] - trace.t[diverged[0]])
    return Metrics(
        rms_y_err=float(np.sqrt(np.mean(y_err ** 2))),
        rms_psi_err=float(np.sqrt(np.mean(psi_err ** 2))),
        rms_u_d=float(np.sqrt(np.mean(trace.u_D ** 2))),
        peak_u_d=float(np.abs(trace.u_D).max()),
        latency_s=latency,
        switch_count=int(switch_steps.size),
    )


def verify_trace(trace: SimTrace, dyn, blend_tol: float = 1e-12,
                 dynamics_tol: float = 1e-10):
    """Re-check the per-row blend identity and the step-to-step dynamics identity.

    Raises ValueError naming the first offending row; returns None when the
    trace is self-consistent.
    """
    blended = trace.lambda_D * trace.u_D + trace.lambda_A * trace.u_A
    bad = np.nonzero(np.abs(trace.u - blended) > blend_tol)[0]
    if bad.size:
        raise ValueError(f"blend identity violated at step {bad[0]}")
    if len(trace) >= 2:
        states = np.column_stack((trace.v, trace.omega, trace.y, trace.psi))
        predicted = states[:-1] @ dyn.a.T + np.outer(trace.u[:-1], dyn.b[:, 0])
        err = np.abs(states[1:] - predicted).max(axis=1)
        bad = np.nonzero(err > dynamics_tol)[0]
        if bad.size:
            raise ValueError(f"dynamics identity violated at step {bad[0]}")
