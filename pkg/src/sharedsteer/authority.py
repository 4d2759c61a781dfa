"""Driver-intention mismatch detection and threshold-based authority switching.

The automation estimates the driver input it would expect under matched
intentions (driver reference identical to its own) with an estimated driver
gain, accumulates the signed residual between actual and expected input in a
constant-length sliding window, and switches the authority weights when the
window's mean cumulative error crosses a threshold. The rule is memoryless;
no hysteresis.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .agents import AuthorityWeights
from .predictor import FeedbackGain, TildePredictor, assemble_w_a, driver_command
from .vehicle import VehicleState

__all__ = [
    "SwitchingConfig",
    "DetectorState",
    "expected_driver_input",
    "detector_update",
    "apply_rule",
]


def _weight_matrix(name, value, shape):
    mat = np.array(value, dtype=float)
    if mat.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {mat.shape}")
    mat.flags.writeable = False
    return mat


@dataclass(frozen=True, eq=False)
class SwitchingConfig:
    """Sliding-window detector and the two authority-weight operating points.

    window:        residual window length H in steps
    threshold:     switching threshold on the window mean [rad]
    lambda_d_high: driver weight when a mismatch is detected
    lambda_d_low:  driver weight when intentions agree
    q_d_hat:       automation's estimate of the driver output weight (2x2)
    r_d_hat:       automation's estimate of the driver input weight (1x1)
    clear_on_switch: drop the residual window when the weights change
    """

    window: int = 50
    threshold: float = 0.1
    lambda_d_high: float = 0.7
    lambda_d_low: float = 0.3
    q_d_hat: np.ndarray = field(default_factory=lambda: np.diag([0.028, 0.015]))
    r_d_hat: np.ndarray = field(default_factory=lambda: np.array([[0.03]]))
    clear_on_switch: bool = False

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window length must be >= 1, got {self.window}")
        if self.threshold <= 0.0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if not 0.0 <= self.lambda_d_low < self.lambda_d_high <= 1.0:
            raise ValueError(
                f"need 0 <= lambda_d_low < lambda_d_high <= 1, got "
                f"{self.lambda_d_low}, {self.lambda_d_high}")
        object.__setattr__(self, "q_d_hat", _weight_matrix("q_d_hat", self.q_d_hat, (2, 2)))
        object.__setattr__(self, "r_d_hat", _weight_matrix("r_d_hat", self.r_d_hat, (1, 1)))

    def __eq__(self, other):
        if not isinstance(other, SwitchingConfig):
            return NotImplemented
        return (self.window == other.window
                and self.threshold == other.threshold
                and self.lambda_d_high == other.lambda_d_high
                and self.lambda_d_low == other.lambda_d_low
                and np.array_equal(self.q_d_hat, other.q_d_hat)
                and np.array_equal(self.r_d_hat, other.r_d_hat)
                and self.clear_on_switch == other.clear_on_switch)

    def high_weights(self) -> AuthorityWeights:
        return AuthorityWeights.from_driver(self.lambda_d_high)

    def low_weights(self) -> AuthorityWeights:
        return AuthorityWeights.from_driver(self.lambda_d_low)


class DetectorState:
    """Sliding residual window; single-owner mutable, advanced once per step.

    `residual_sum` always equals the sum of the buffered residuals (it is
    recomputed on every push, so there is no incremental drift). `weights`
    tracks the currently active authority weights for trace bookkeeping.
    """

    def __init__(self, window: int, weights: AuthorityWeights | None = None):
        if window < 1:
            raise ValueError(f"window length must be >= 1, got {window}")
        self.window = window
        self.buffer = deque(maxlen=window)
        self.residual_sum = 0.0
        self.weights = weights

    def push(self, residual: float) -> float:
        """Record one residual and return the window mean delta = |sum| / H.

        Divides by the full window length even before the buffer fills, so a
        short history cannot spuriously trip the threshold during warm-up.
        """
        self.buffer.append(residual)
        # fsum: correctly rounded, so the delta is order-invariant within the window
        self.residual_sum = math.fsum(self.buffer)
        return abs(self.residual_sum) / self.window

    def clear(self):
        self.buffer.clear()
        self.residual_sum = 0.0


def expected_driver_input(est_gain: FeedbackGain, tp: TildePredictor, k_a: FeedbackGain,
                          x: VehicleState, r_a_long, lambda_a: float) -> float:
    """Driver input expected under matched intentions (r_D taken to be r_A).

    est_gain must be synthesized from the estimated driver weights for the
    currently active authority weights; tp is the tilde predictor for those
    same weights.
    """
    r_a_long = np.asarray(r_a_long, dtype=float)
    n = tp.horizon
    if r_a_long.shape != (2 * n - 1, 2):
        raise ValueError(f"long reference window must be ({2 * n - 1}, 2), got {r_a_long.shape}")
    w_a = assemble_w_a(k_a, r_a_long)
    return driver_command(est_gain, tp, x, r_a_long[:n], w_a, lambda_a)


def detector_update(st: DetectorState, actual: float, expected: float) -> float:
    """Push the residual actual - expected and return the updated delta."""
    if not (np.isfinite(actual) and np.isfinite(expected)):
        raise ValueError("detector inputs must be finite")
    return st.push(actual - expected)


def apply_rule(delta: float, cfg: SwitchingConfig) -> AuthorityWeights:
    """Memoryless threshold rule: delta >= threshold selects high driver authority."""
    if delta >= cfg.threshold:
        return cfg.high_weights()
    return cfg.low_weights()
