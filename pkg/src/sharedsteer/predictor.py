"""Horizon-stacked prediction matrices and the constant analytical MPC gains.

Both parties solve an unconstrained finite-horizon tracking problem whose
least-squares solution is a constant gain applied to a regressor:

    automation:  u_A = e1' K_A (r_A_stack - Phi x)
    driver:      u_D = e1' K_D (r_D_stack - Phi~ x - lambda_A Theta~ w_A)

where the driver's tilde matrices are the prediction stacks rebuilt with the
closed-loop matrix A~ = A - lambda_A B e1' K_A Phi, i.e. the driver has
internalized the automation's feedback strategy. Gains are synthesized by
solving the normal equations with a symmetric positive-definite factorization
(the input weight guarantees full column rank); an SVD pseudo-inverse is the
fallback if the factorization reports loss of positive definiteness.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, sqrtm

from .vehicle import DiscreteDynamics, VehicleState

__all__ = [
    "MpcConfig",
    "StackedPredictor",
    "TildePredictor",
    "FeedbackGain",
    "PredictionWorkspace",
    "stack_prediction",
    "synthesize_automation_gain",
    "automation_command",
    "build_tilde",
    "synthesize_driver_gain",
    "assemble_w_a",
    "driver_command",
]


def _check_spd(name, mat):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    return mat


@dataclass(frozen=True)
class MpcConfig:
    """Horizon length and quadratic weights of one party's tracking cost.

    n: prediction/control horizon (steps), >= 1
    q: 2x2 output-error weight, symmetric positive definite
    r: 1x1 input weight, symmetric positive definite
    """

    n: int
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"horizon must be >= 1, got {self.n}")
        object.__setattr__(self, "q", _check_spd("output weight q", self.q))
        object.__setattr__(self, "r", _check_spd("input weight r", self.r))


@dataclass(frozen=True)
class StackedPredictor:
    """Stacked prediction geometry over the horizon.

    phi:   (2N, 4), row-block i = C A^(i+1)
    theta: (2N, N), lower block triangular, block (i, j) = C A^(i-j) B
    """

    phi: np.ndarray
    theta: np.ndarray
    horizon: int


@dataclass(frozen=True)
class TildePredictor:
    """Prediction stacks rebuilt around the automation-absorbed matrix A~."""

    a_tilde: np.ndarray
    phi_tilde: np.ndarray
    theta_tilde: np.ndarray
    horizon: int
    lambda_a: float


@dataclass(frozen=True)
class FeedbackGain:
    """Constant (N, 2N) least-squares gain; the applied command is row 0 @ regressor."""

    k: np.ndarray
    horizon: int

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.shape != (self.horizon, 2 * self.horizon):
            raise ValueError(f"gain shape {k.shape} inconsistent with horizon {self.horizon}")
        if not np.isfinite(k).all():
            raise ValueError("gain contains non-finite entries")

    @property
    def first_row(self):
        return self.k[0]


class PredictionWorkspace:
    """Reusable single-owner scratch buffers for the per-step regressors.

    Avoids reallocating the stacked windows and feedforward sequence on every
    simulation step; contents are always as-if freshly computed. Must not be
    shared between concurrent evaluations.
    """

    def __init__(self, horizon: int):
        self.horizon = horizon
        self.r_stack = np.empty(2 * horizon)
        self.w_a_stack = np.empty(horizon)
        self.eps = np.empty(2 * horizon)


def _stack(a, b, c, n):
    """Build (phi, theta) for x(k+i) rollouts of x+ = a x + b u, z = c x."""
    phi = np.empty((2 * n, 4))
    a_pow = np.eye(4)
    for i in range(n):
        a_pow = a_pow @ a
        phi[2 * i : 2 * i + 2] = c @ a_pow
    # impulse responses c a^d b, d = 0..n-1
    cab = np.empty((n, 2))
    col = b.copy()
    for d in range(n):
        cab[d] = (c @ col)[:, 0]
        col = a @ col
    theta = np.zeros((2 * n, n))
    for i in range(n):
        for j in range(i + 1):
            theta[2 * i : 2 * i + 2, j] = cab[i - j]
    return phi, theta


def stack_prediction(dyn: DiscreteDynamics, n: int) -> StackedPredictor:
    """Stack the horizon-n prediction matrices of the discrete plant."""
    if n < 1:
        raise ValueError(f"horizon must be >= 1, got {n}")
    phi, theta = _stack(dyn.a, dyn.b, dyn.c, n)
    return StackedPredictor(phi=phi, theta=theta, horizon=n)


def _solve_gain(theta, q, r, n, lam=1.0):
    """Least-squares gain of [lam sqrt(Qb) theta; sqrt(Rb)] u = [sqrt(Qb); 0] eps.

    Normal equations (lam^2 theta' Qb theta + Rb) K = lam theta' Qb, solved by a
    Cholesky factorization; Rb > 0 makes the system SPD for every lam in [0, 1].
    """
    q_block = np.kron(np.eye(n), q)
    r_block = np.kron(np.eye(n), r)
    tq = theta.T @ q_block
    h = lam * lam * (tq @ theta) + r_block
    g = lam * tq
    try:
        return cho_solve(cho_factor(h), g)
    except np.linalg.LinAlgError:  # pragma: no cover - unreachable with r > 0
        sqrt_q = np.real(sqrtm(q_block))
        stacked = np.vstack([lam * sqrt_q @ theta, np.real(sqrtm(r_block))])
        rhs = np.vstack([sqrt_q, np.zeros((n, 2 * n))])
        return np.linalg.pinv(stacked) @ rhs


def synthesize_automation_gain(sp: StackedPredictor, cfg: MpcConfig) -> FeedbackGain:
    """Constant automation gain K_A minimizing tracking error plus effort."""
    if cfg.n != sp.horizon:
        raise ValueError(f"config horizon {cfg.n} != predictor horizon {sp.horizon}")
    k = _solve_gain(sp.theta, cfg.q, cfg.r, sp.horizon)
    return FeedbackGain(k=k, horizon=sp.horizon)


def automation_command(gain: FeedbackGain, sp: StackedPredictor, x: VehicleState,
                       r_window) -> float:
    """First element of K_A (r_stack - Phi x) for the next-N reference window."""
    r_window = np.asarray(r_window, dtype=float)
    if r_window.shape != (sp.horizon, 2):
        raise ValueError(f"reference window must be ({sp.horizon}, 2), got {r_window.shape}")
    eps = r_window.reshape(-1) - sp.phi @ x.as_array()
    return float(gain.first_row @ eps)


def build_tilde(dyn: DiscreteDynamics, sp: StackedPredictor, k_a: FeedbackGain,
                lambda_a: float) -> TildePredictor:
    """Rebuild the prediction stacks around A~ = A - lambda_A B e1' K_A Phi."""
    if not 0.0 <= lambda_a <= 1.0:
        raise ValueError(f"lambda_a must be in [0, 1], got {lambda_a}")
    a_tilde = dyn.a - lambda_a * (dyn.b @ (k_a.first_row[None, :] @ sp.phi))
    phi_tilde, theta_tilde = _stack(a_tilde, dyn.b, dyn.c, sp.horizon)
    return TildePredictor(a_tilde=a_tilde, phi_tilde=phi_tilde, theta_tilde=theta_tilde,
                          horizon=sp.horizon, lambda_a=lambda_a)


def synthesize_driver_gain(tp: TildePredictor, cfg_d: MpcConfig, lambda_d: float) -> FeedbackGain:
    """Constant driver gain K_D; exactly zero when the driver has no authority."""
    if not 0.0 <= lambda_d <= 1.0:
        raise ValueError(f"lambda_d must be in [0, 1], got {lambda_d}")
    if cfg_d.n != tp.horizon:
        raise ValueError(f"config horizon {cfg_d.n} != predictor horizon {tp.horizon}")
    k = _solve_gain(tp.theta_tilde, cfg_d.q, cfg_d.r, tp.horizon, lam=lambda_d)
    return FeedbackGain(k=k, horizon=tp.horizon)


def assemble_w_a(k_a: FeedbackGain, r_a_long, out=None) -> np.ndarray:
    """Automation feedforward sequence w_A over the horizon.

    Entry i is e1' K_A applied to the reference window shifted by i, so the
    long window must span the next 2N-1 reference samples. Pass a length-N
    `out` buffer (e.g. a PredictionWorkspace's w_a_stack) to fill in place.
    """
    n = k_a.horizon
    r_a_long = np.asarray(r_a_long, dtype=float)
    if r_a_long.shape != (2 * n - 1, 2):
        raise ValueError(f"long reference window must be ({2 * n - 1}, 2), got {r_a_long.shape}")
    flat = np.ascontiguousarray(r_a_long).reshape(-1)
    shifted = np.lib.stride_tricks.sliding_window_view(flat, 2 * n)[::2]
    if out is None:
        return shifted @ k_a.first_row
    np.matmul(shifted, k_a.first_row, out=out)
    return out


def driver_command(k_d: FeedbackGain, tp: TildePredictor, x: VehicleState,
                   r_d_window, w_a, lambda_a: float) -> float:
    """First element of K_D (r_D_stack - Phi~ x - lambda_A Theta~ w_A)."""
    n = tp.horizon
    r_d_window = np.asarray(r_d_window, dtype=float)
    w_a = np.asarray(w_a, dtype=float)
    if r_d_window.shape != (n, 2):
        raise ValueError(f"driver reference window must be ({n}, 2), got {r_d_window.shape}")
    if w_a.shape != (n,):
        raise ValueError(f"w_A stack must have length {n}, got {w_a.shape}")
    eps = r_d_window.reshape(-1) - tp.phi_tilde @ x.as_array() - lambda_a * (tp.theta_tilde @ w_a)
    return float(k_d.first_row @ eps)
