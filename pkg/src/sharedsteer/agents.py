"""Steppable driver/automation agents and the authority-weighted blending law.

An AgentBundle packages the automation controller and one driver model
(adaptive or conventional) with gains consistent with a fixed pair of
authority weights. Weight changes go through rebuild_for_weights, which
re-synthesizes everything that depends on the weights; bundles are immutable
so a stale-gain state cannot be created by mutation.
"""

from dataclasses import dataclass, replace

import numpy as np

from .predictor import (
    FeedbackGain,
    MpcConfig,
    PredictionWorkspace,
    StackedPredictor,
    TildePredictor,
    assemble_w_a,
    automation_command,
    build_tilde,
    driver_command,
    stack_prediction,
    synthesize_automation_gain,
    synthesize_driver_gain,
)
from .vehicle import DiscreteDynamics, VehicleState

__all__ = [
    "AuthorityWeights",
    "AgentBundle",
    "DRIVER_KINDS",
    "blend",
    "build_bundle",
    "agent_step",
    "rebuild_for_weights",
]

DRIVER_KINDS = ("adaptive", "conventional")


@dataclass(frozen=True)
class AuthorityWeights:
    """Nonnegative blending weights on the simplex lambda_d + lambda_a = 1."""

    lambda_d: float
    lambda_a: float

    def __post_init__(self):
        if self.lambda_d < 0.0 or self.lambda_a < 0.0:
            raise ValueError(f"authority weights must be nonnegative, got {self}")
        if abs(self.lambda_d + self.lambda_a - 1.0) > 1e-9:
            raise ValueError(
                f"authority weights must sum to 1, got {self.lambda_d} + {self.lambda_a}")

    @classmethod
    def from_driver(cls, lambda_d):
        return cls(lambda_d=lambda_d, lambda_a=1.0 - lambda_d)


@dataclass(frozen=True)
class AgentBundle:
    """Automation + driver agents synthesized for one fixed weight pair.

    The driver gain is guaranteed consistent with `weights`: construct bundles
    only via build_bundle / rebuild_for_weights. For the conventional driver
    the gain is the manual-driving gain on the plain stacks (it ignores the
    controller when steering), while the plant still receives the blended
    input.
    """

    dyn: DiscreteDynamics
    stacked: StackedPredictor
    automation_gain: FeedbackGain
    tilde: TildePredictor
    driver_gain: FeedbackGain
    driver_cfg: MpcConfig
    weights: AuthorityWeights
    driver_kind: str


def blend(u_d: float, u_a: float, w: AuthorityWeights) -> float:
    """Weighted summation of the two commands: lambda_d u_D + lambda_a u_A."""
    if not (np.isfinite(u_d) and np.isfinite(u_a)):
        raise ValueError("commands must be finite")
    return w.lambda_d * u_d + w.lambda_a * u_a


def _driver_gain_for(dyn, stacked, k_a, tilde, driver_cfg, weights, driver_kind):
    if driver_kind == "conventional":
        # manual-driving gain: computed as if lambda_d = 1, lambda_a = 0
        manual = build_tilde(dyn, stacked, k_a, 0.0)
        return synthesize_driver_gain(manual, driver_cfg, 1.0)
    return synthesize_driver_gain(tilde, driver_cfg, weights.lambda_d)


def build_bundle(dyn: DiscreteDynamics, automation_cfg: MpcConfig, driver_cfg: MpcConfig,
                 weights: AuthorityWeights, driver_kind: str = "adaptive") -> AgentBundle:
    """Synthesize all gains and predictors for the given weights."""
    if driver_kind not in DRIVER_KINDS:
        raise ValueError(f"driver kind must be one of {DRIVER_KINDS}, got {driver_kind!r}")
    if automation_cfg.n != driver_cfg.n:
        raise ValueError("automation and driver horizons must match")
    stacked = stack_prediction(dyn, automation_cfg.n)
    k_a = synthesize_automation_gain(stacked, automation_cfg)
    tilde = build_tilde(dyn, stacked, k_a, weights.lambda_a)
    k_d = _driver_gain_for(dyn, stacked, k_a, tilde, driver_cfg, weights, driver_kind)
    return AgentBundle(dyn=dyn, stacked=stacked, automation_gain=k_a, tilde=tilde,
                       driver_gain=k_d, driver_cfg=driver_cfg, weights=weights,
                       driver_kind=driver_kind)


def agent_step(bundle: AgentBundle, x: VehicleState, r_d_window, r_a_long,
               workspace: PredictionWorkspace | None = None):
    """Evaluate both commands and their blend at the current state.

    r_d_window: driver reference over the next N samples, shape (N, 2)
    r_a_long:   automation reference over the next 2N-1 samples, shape (2N-1, 2)

    Returns (u_d, u_a, u).
    """
    n = bundle.stacked.horizon
    r_a_long = np.asarray(r_a_long, dtype=float)
    if r_a_long.shape != (2 * n - 1, 2):
        raise ValueError(f"automation window must be ({2 * n - 1}, 2), got {r_a_long.shape}")
    u_a = automation_command(bundle.automation_gain, bundle.stacked, x, r_a_long[:n])
    if bundle.driver_kind == "adaptive":
        out = workspace.w_a_stack if workspace is not None else None
        w_a = assemble_w_a(bundle.automation_gain, r_a_long, out=out)
        u_d = driver_command(bundle.driver_gain, bundle.tilde, x, r_d_window, w_a,
                             bundle.weights.lambda_a)
    else:
        r_d_window = np.asarray(r_d_window, dtype=float)
        if r_d_window.shape != (n, 2):
            raise ValueError(f"driver window must be ({n}, 2), got {r_d_window.shape}")
        eps = r_d_window.reshape(-1) - bundle.stacked.phi @ x.as_array()
        u_d = float(bundle.driver_gain.first_row @ eps)
    return u_d, u_a, blend(u_d, u_a, bundle.weights)


def rebuild_for_weights(bundle: AgentBundle, w: AuthorityWeights) -> AgentBundle:
    """New bundle re-synthesized for w; the automation gain is weight-independent."""
    tilde = build_tilde(bundle.dyn, bundle.stacked, bundle.automation_gain, w.lambda_a)
    if bundle.driver_kind == "conventional":
        k_d = bundle.driver_gain  # manual gain does not depend on the weights
    else:
        k_d = synthesize_driver_gain(tilde, bundle.driver_cfg, w.lambda_d)
    return replace(bundle, tilde=tilde, driver_gain=k_d, weights=w)
