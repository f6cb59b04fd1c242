"""Detection-based extended Kalman filter.

Each step predicts the belief, then runs a Bayes-risk likelihood-ratio test on
whether the target transmitted.  The measurement update is applied only when
transmission is declared; otherwise the prediction is kept.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelParams,
    Measurement,
    QuadratureSpec,
    expected_measurement,
    measurement_log_likelihood,
    noise_covariance,
)
from .errors import NumericalWarning
from .fisher import symmetrize
from .motion import STATE_DIM, MotionModel, as_state

MIN_DISTANCE = 1e-3


@dataclass(frozen=True)
class EkfBelief:
    x_hat: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class DetectionRecord:
    """Outcome of the transmit/silence test.

    ``log_threshold`` is the log of the right-hand side of the likelihood-ratio
    test; it is ``-inf`` when the threshold is zero or negative and ``+inf``
    when it is unbounded.
    """

    decided_h1: bool
    log_lr: float
    log_threshold: float
    costs: tuple
    regularized: bool = False


def initial_belief(x0, sigma_pos: float, sigma_vel: float) -> EkfBelief:
    p = np.diag([sigma_pos**2, sigma_pos**2, sigma_vel**2, sigma_vel**2])
    return EkfBelief(x_hat=as_state(x0), p=p)


def ekf_predict(belief: EkfBelief, model: MotionModel) -> EkfBelief:
    A = model.A
    return EkfBelief(x_hat=A @ belief.x_hat, p=symmetrize(A @ belief.p @ A.T + model.Q))


def _floored_distances(x, geom):
    # a tracker can sit exactly on the estimate (it flies straight at it); the
    # model is singular there, so linearize no closer than MIN_DISTANCE
    return np.maximum(np.linalg.norm(geom - as_state(x)[:2], axis=-1), MIN_DISTANCE)


def measurement_jacobian(params: ChannelParams, x_pred, geom) -> np.ndarray:
    """Jacobian of the expected measurement w.r.t. the state, shape (N, 4).

    Row ``i`` is ``-2 c d_i^-4 (p - p_i)`` on the position columns, with
    ``c = g p_on (1-q) e^{sigma_sh^2/2}``; velocity columns are zero.
    """
    x_pred = as_state(x_pred)
    geom = np.asarray(geom, dtype=float)
    d = _floored_distances(x_pred, geom)
    H = np.zeros((geom.shape[0], STATE_DIM))
    H[:, :2] = (-2.0 * params.gain * params.mean_fade / d**4)[:, None] * (x_pred[:2] - geom)
    return H


def _signed_log(x):
    return np.sign(x), (np.log(abs(x)) if x != 0 else -np.inf)


def _greater(sa, la, sb, lb) -> bool:
    """Compare ``sa*exp(la) > sb*exp(lb)`` for signs in {-1, 0, 1}."""
    if sa == 0 or la == -np.inf:
        sa, la = 0.0, -np.inf
    if sb == 0 or lb == -np.inf:
        sb, lb = 0.0, -np.inf
    if sa != sb:
        return sa > sb
    if sa == 0:
        return False
    return la > lb if sa > 0 else la < lb


def lrt_decision(log_alpha: float, log_beta: float, miss_gain: float, fa_cost: float, q: float):
    """Bayes-risk likelihood-ratio test on the transmit hypothesis.

    Decides transmission iff ``(1-q) miss_gain alpha > q fa_cost beta``, where
    ``miss_gain = (U21 - U11) / |P|`` and ``fa_cost = (U12 - U22) / |P|`` may
    take any sign.  Returns ``(decided, log_threshold)``.
    """
    with np.errstate(divide="ignore"):
        log_q, log_1mq = np.log(q), np.log1p(-q)
    s_l, l_l = _signed_log(miss_gain)
    s_r, l_r = _signed_log(fa_cost)
    if q == 0.0 or q == 1.0:
        # a known-transmitting or known-silent target needs no test
        decided = q == 0.0
    else:
        decided = _greater(s_l, l_l + log_1mq + log_alpha, s_r, l_r + log_q + log_beta)
    if q == 0.0:
        log_thr = -np.inf
    elif q == 1.0:
        log_thr = np.inf
    elif s_r <= 0:
        log_thr = -np.inf
    elif s_l <= 0:
        log_thr = np.inf
    else:
        log_thr = float(l_r + log_q - l_l - log_1mq)
    return bool(decided), log_thr


def detect_and_update(
    belief_pred: EkfBelief,
    z: Measurement,
    params: ChannelParams,
    geom,
    quad: QuadratureSpec | None = None,
):
    """Bayes-risk detection followed by the conditional EKF update.

    Returns ``(belief, DetectionRecord)``.  On a silence decision the returned
    belief is ``belief_pred`` itself.
    """
    zv = np.asarray(z.z if isinstance(z, Measurement) else z, dtype=float)
    geom = np.asarray(geom, dtype=float)
    x, P = belief_pred.x_hat, belief_pred.p
    d = _floored_distances(x, geom)
    H = measurement_jacobian(params, x, geom)
    R = noise_covariance(params, d)
    y = zv - expected_measurement(params, d)
    S = symmetrize(H @ P @ H.T + R)
    regularized = False
    if np.linalg.cond(S) > 1e14:
        eps = 1e-9 * np.trace(S)
        warnings.warn(f"innovation covariance near-singular; regularizing with {eps:.3g} I", NumericalWarning, stacklevel=2)
        S = S + eps * np.eye(S.shape[0])
        regularized = True
    K = np.linalg.solve(S, H @ P).T
    I_KH = np.eye(STATE_DIM) - K @ H
    Ky = K @ y

    det_p = np.linalg.det(P)
    det_ikh = np.linalg.det(I_KH)
    costs = (det_ikh * det_p, np.linalg.det(P + np.outer(Ky, Ky)), det_p, det_p)
    # U21 - U11 = |P| (1 - |I - KH|);  U12 - U22 = |P| Ky' P^-1 Ky  (|P| cancels)
    miss_gain = 1.0 - det_ikh
    fa_cost = float(Ky @ np.linalg.solve(P, Ky))

    _, log_alpha, log_beta = measurement_log_likelihood(params, zv, d, quad)
    log_alpha, log_beta = float(log_alpha), float(log_beta)
    decided, log_thr = lrt_decision(log_alpha, log_beta, miss_gain, fa_cost, params.q)
    record = DetectionRecord(
        decided_h1=bool(decided),
        log_lr=log_alpha - log_beta,
        log_threshold=log_thr,
        costs=tuple(max(0.0, float(c)) for c in costs),
        regularized=regularized,
    )
    if not decided:
        return belief_pred, record
    return EkfBelief(x_hat=x + Ky, p=symmetrize(I_KH @ P)), record
