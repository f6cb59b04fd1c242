"""Posterior Fisher information recursion and D-optimality.

The information about the current target state is carried forward with::

    J_pred = -D2.T @ inv(J + D1) @ D2 + D3
    J_next = J_pred + D4

where ``D1..D3`` follow from the linear-Gaussian motion model and ``D4`` is the
expected negative Hessian of the measurement log-likelihood, estimated by
Monte Carlo over measurement noise with central finite differences.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, QuadratureSpec, measurement_from_draws, measurement_log_likelihood
from .errors import ConfigurationError, DegenerateGeometryError, NumericalWarning
from .motion import STATE_DIM, MotionModel, as_state


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


@dataclass(frozen=True)
class ProcessInfo:
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


@dataclass(frozen=True)
class HessianMCConfig:
    """Monte Carlo settings for the measurement-information term.

    ``delta`` is the finite-difference step in metres on the position axes.
    Close to a tracker the step shrinks to ``rel_delta`` times the smallest
    tracker distance so the stencil stays well inside the likelihood's scale.
    """

    n_samples: int = 100
    delta: float = 0.5
    rel_delta: float = 0.05
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    # elements per likelihood batch (candidates x samples x points x trackers x nodes)
    chunk_elements: int = 2_000_000
    # clip negative eigenvalues of the averaged Hessian (expected information is PSD)
    psd_project: bool = True

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be at least 1")
        if not self.delta > 0:
            raise ConfigurationError("delta must be positive")
        if not self.rel_delta > 0:
            raise ConfigurationError("rel_delta must be positive")


def process_info(model: MotionModel) -> ProcessInfo:
    q_inv = np.linalg.inv(model.Q)
    A = model.A
    return ProcessInfo(d1=symmetrize(A.T @ q_inv @ A), d2=-A.T @ q_inv, d3=symmetrize(q_inv))


def fim_predict(j: np.ndarray, pi: ProcessInfo) -> np.ndarray:
    """Propagate information one step through the motion model."""
    m = np.asarray(j, dtype=float) + pi.d1
    if np.linalg.cond(m) > 1e14:
        # D1 is positive definite, so it sets a scale even when J + D1 vanishes
        eps = 1e-9 * max(abs(np.trace(m)), np.linalg.norm(pi.d1))
        warnings.warn(f"J + D1 is near-singular; regularizing with {eps:.3g} I", NumericalWarning, stacklevel=2)
        m = m + eps * np.eye(m.shape[0])
    return symmetrize(pi.d3 - pi.d2.T @ np.linalg.solve(m, pi.d2))


def fim_update(j_pred: np.ndarray, d4: np.ndarray) -> np.ndarray:
    j_pred = np.asarray(j_pred, dtype=float)
    d4 = np.asarray(d4, dtype=float)
    if j_pred.shape != d4.shape:
        raise ValueError(f"shape mismatch: {j_pred.shape} vs {d4.shape}")
    return symmetrize(j_pred + d4)


def d_criterion(j: np.ndarray) -> float:
    """D-criterion in decibels, ``10 log10 det J``; ``-inf`` when det <= 0."""
    sign, logdet = np.linalg.slogdet(np.asarray(j, dtype=float))
    if sign <= 0:
        return -np.inf
    return float(10.0 * logdet / np.log(10.0))


def draw_noise(rng: np.random.Generator, n_samples: int, n_trackers: int):
    """Standard variates for ``n_samples`` synthetic measurements."""
    u = rng.random(n_samples)
    n_sh = rng.standard_normal((n_samples, n_trackers))
    n_th = rng.standard_normal((n_samples, n_trackers))
    return u, n_sh, n_th


def _stencil(delta):
    # centre, +-2 delta on each axis, four diagonal corners
    h = delta
    return np.array(
        [[0, 0], [2 * h, 0], [-2 * h, 0], [0, 2 * h], [0, -2 * h], [h, h], [h, -h], [-h, h], [-h, -h]],
        dtype=float,
    )


def _hessian_from_stencil(f, delta):
    f0, fpx, fmx, fpy, fmy, fpp, fpm, fmp, fmm = np.moveaxis(f, -1, 0)
    den = 4.0 * delta**2
    hxx = (fpx - 2.0 * f0 + fmx) / den
    hyy = (fpy - 2.0 * f0 + fmy) / den
    hxy = (fpp - fpm - fmp + fmm) / den
    return hxx, hyy, hxy


def _one_sided_hessian(params, z, geom, xy, delta, quad):
    """Forward/backward second differences for one sample whose central stencil failed."""
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            h = delta
            pts = xy + np.array(
                [[0, 0], [sx * h, 0], [2 * sx * h, 0], [0, sy * h], [0, 2 * sy * h], [sx * h, sy * h]]
            )
            d = np.linalg.norm(geom[None, :, :] - pts[:, None, :], axis=-1)
            if np.any(d <= 0):
                continue
            f = measurement_log_likelihood(params, z[None, :], d, quad)[0]
            if not np.all(np.isfinite(f)):
                continue
            f0, fx1, fx2, fy1, fy2, fxy = f
            hxx = (fx2 - 2 * fx1 + f0) / h**2
            hyy = (fy2 - 2 * fy1 + f0) / h**2
            hxy = (fxy - fx1 - fy1 + f0) / (sx * sy * h**2)
            return hxx, hyy, hxy
    raise DegenerateGeometryError("likelihood could not be differenced around the target position")


def d4_batch(params: ChannelParams, geoms, x, noise, cfg: HessianMCConfig) -> np.ndarray:
    """Measurement information for a batch of tracker geometries sharing one noise draw.

    Args:
        geoms: (C, N, 2) candidate tracker positions.
        x: target state at which information is evaluated.
        noise: ``(u, n_sh, n_th)`` from :func:`draw_noise`; reused for every
            candidate so that candidates are compared on paired noise.

    Returns:
        (C, 4, 4) array; velocity rows and columns are exactly zero.
    """
    geoms = np.asarray(geoms, dtype=float)
    x = as_state(x)
    xy = x[:2]
    u, n_sh, n_th = noise
    n_c, n_trk = geoms.shape[0], geoms.shape[1]
    n_s = u.shape[0]
    d_true = np.linalg.norm(geoms - xy, axis=-1)  # (C, N)
    if np.any(d_true <= 0):
        raise DegenerateGeometryError("a tracker coincides with the target position")
    deltas = np.minimum(cfg.delta, cfg.rel_delta * d_true.min(axis=1))  # (C,)
    unit = _stencil(1.0)
    per_candidate = n_s * len(unit) * n_trk * cfg.quad.n_nodes
    chunk = max(1, cfg.chunk_elements // per_candidate)

    out = np.zeros((n_c, STATE_DIM, STATE_DIM))
    for c0 in range(0, n_c, chunk):
        g = geoms[c0 : c0 + chunk]
        dl = deltas[c0 : c0 + chunk]
        points = xy + dl[:, None, None] * unit  # (c, P, 2)
        z, _ = measurement_from_draws(params, d_true[c0 : c0 + chunk, None, :], u, n_sh, n_th)  # (c, S, N)
        d = np.linalg.norm(g[:, None, :, :] - points[:, :, None, :], axis=-1)  # (c, P, N)
        bad_pts = np.any(d <= 0, axis=-1)  # (c, P)
        d = np.where(d <= 0, 1.0, d)
        f = measurement_log_likelihood(params, z[:, :, None, :], d[:, None, :, :], cfg.quad)[0]  # (c, S, P)
        f = np.where(bad_pts[:, None, :], np.nan, f)
        hxx, hyy, hxy = _hessian_from_stencil(f, dl[:, None])  # (c, S)
        failed = ~(np.isfinite(hxx) & np.isfinite(hyy) & np.isfinite(hxy))
        for ci, si in zip(*np.nonzero(failed)):
            hxx[ci, si], hyy[ci, si], hxy[ci, si] = _one_sided_hessian(
                params, z[ci, si], g[ci], xy, dl[ci], cfg.quad
            )
        blk = out[c0 : c0 + chunk]
        blk[:, 0, 0] = -hxx.mean(axis=1)
        blk[:, 1, 1] = -hyy.mean(axis=1)
        blk[:, 0, 1] = blk[:, 1, 0] = -hxy.mean(axis=1)
    if cfg.psd_project:
        out[:, :2, :2] = project_psd(out[:, :2, :2])
    return out


def project_psd(m: np.ndarray) -> np.ndarray:
    """Nearest positive semidefinite matrix (negative eigenvalues set to zero)."""
    vals, vecs = np.linalg.eigh(symmetrize(m))
    return symmetrize((vecs * np.maximum(vals, 0.0)[..., None, :]) @ np.swapaxes(vecs, -1, -2))


def measurement_info_d4(params: ChannelParams, geom, x, cfg: HessianMCConfig, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo estimate of the expected measurement information at state ``x``."""
    geom = np.asarray(geom, dtype=float)
    noise = draw_noise(rng, cfg.n_samples, geom.shape[0])
    return d4_batch(params, geom[None], x, noise, cfg)[0]
