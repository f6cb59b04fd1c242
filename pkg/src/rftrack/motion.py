"""Linear stochastic target motion (planar double integrator).

State ordering is ``[x, y, vx, vy]`` everywhere in the package.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigurationError

STATE_DIM = 4
POS = slice(0, 2)
VEL = slice(2, 4)


def as_state(state) -> np.ndarray:
    """Validate and return a target state as a float array of shape (4,)."""
    s = np.asarray(state, dtype=float).reshape(-1)
    if s.shape != (STATE_DIM,):
        raise ConfigurationError(f"target state must have {STATE_DIM} components, got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ConfigurationError("target state must be finite")
    return s


@dataclass(frozen=True)
class MotionModel:
    """Transition ``A``, output ``C`` and process-noise covariance ``Q``."""

    dt: float
    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray

    @property
    def q_inv(self) -> np.ndarray:
        return np.linalg.inv(self.Q)


def transition_matrix(dt: float) -> np.ndarray:
    A = np.eye(STATE_DIM)
    A[0, 2] = A[1, 3] = dt
    return A


def build_motion_model(dt: float = 1.0, q_cov=None) -> MotionModel:
    """Build the double-integrator model.

    Args:
        dt: time step in seconds. ``dt=0`` is accepted and yields ``A = I``.
        q_cov: 4x4 process-noise covariance; defaults to ``2 * I``.
    """
    if dt < 0 or not np.isfinite(dt):
        raise ConfigurationError(f"dt must be a non-negative finite number, got {dt}")
    Q = 2.0 * np.eye(STATE_DIM) if q_cov is None else np.array(q_cov, dtype=float)
    if Q.ndim == 0:
        Q = float(Q) * np.eye(STATE_DIM)
    if Q.shape != (STATE_DIM, STATE_DIM):
        raise ConfigurationError(f"Q must be {STATE_DIM}x{STATE_DIM}, got {Q.shape}")
    if not np.allclose(Q, Q.T, rtol=1e-12, atol=0.0):
        raise ConfigurationError("Q must be symmetric")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise ConfigurationError("Q must be positive definite") from None
    C = np.zeros((2, STATE_DIM))
    C[0, 0] = C[1, 1] = 1.0
    for arr in (Q, C):
        arr.setflags(write=False)
    A = transition_matrix(dt)
    A.setflags(write=False)
    return MotionModel(dt=float(dt), A=A, C=C, Q=Q)


def step_target(model: MotionModel, state, rng: np.random.Generator, noiseless: bool = False) -> np.ndarray:
    """Propagate the true target one step: ``A @ state + w`` with ``w ~ N(0, Q)``."""
    s = as_state(state)
    mean = model.A @ s
    if noiseless or not np.any(model.Q):
        return mean
    return mean + rng.multivariate_normal(np.zeros(STATE_DIM), model.Q)


def transition_log_density(model: MotionModel, x_next, x_prev) -> np.ndarray:
    """Log of the Gaussian transition density ``N(x_next; A x_prev, Q)``.

    Broadcasts over leading dimensions of ``x_next`` and ``x_prev`` (last axis = 4).
    A singular ``Q`` raises ``numpy.linalg.LinAlgError``.
    """
    x_next = np.asarray(x_next, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    resid = x_next - x_prev @ model.A.T
    L = np.linalg.cholesky(model.Q)
    flat = resid.reshape(-1, STATE_DIM)
    y = solve_triangular(L, flat.T, lower=True).T
    maha = np.sum(y * y, axis=-1).reshape(resid.shape[:-1])
    log_norm = STATE_DIM * np.log(2 * np.pi) + 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (maha + log_norm)
