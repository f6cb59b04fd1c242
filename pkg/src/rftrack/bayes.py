"""Recursive Bayesian estimator on a quantized target state space.

Probability masses live on the cell centres of a regular 4-D grid.  Prediction
applies a precomputed sparse transition kernel, update multiplies by the
measurement likelihood, and the point estimate is the posterior mean.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular

from .channel import ChannelParams, Measurement, QuadratureSpec, measurement_log_likelihood
from .errors import ConfigurationError, NumericalWarning
from .motion import STATE_DIM, MotionModel, as_state

# exp() of anything below this underflows to zero in float64
_LOG_TINY = np.log(np.finfo(float).tiny)
# likelihood is evaluated no closer than this to a tracker (the model is singular at d = 0)
MIN_DISTANCE = 1e-3


@dataclass(frozen=True)
class GridSpec:
    """Per-dimension ``(min, max, bins)`` for x, y, vx, vy.

    ``max_speed`` zeroes the prior on cells whose speed exceeds it.
    """

    x: tuple = (0.0, 600.0, 10)
    y: tuple = (0.0, 600.0, 10)
    vx: tuple = (-10.0, 10.0, 10)
    vy: tuple = (-10.0, 10.0, 10)
    max_speed: float | None = None
    max_cells: int = 10_000

    def __post_init__(self):
        for name, (lo, hi, bins) in zip("x y vx vy".split(), self.dims):
            if int(bins) != bins or bins < 2:
                raise ConfigurationError(f"grid dimension {name} needs at least 2 bins")
            if not hi > lo:
                raise ConfigurationError(f"grid dimension {name} needs max > min")
        if self.n_cells > self.max_cells:
            raise ConfigurationError(f"grid has {self.n_cells} cells, budget is {self.max_cells}")

    @property
    def dims(self):
        return (self.x, self.y, self.vx, self.vy)

    @property
    def shape(self):
        return tuple(int(b) for _, _, b in self.dims)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def widths(self) -> np.ndarray:
        return np.array([(hi - lo) / b for lo, hi, b in self.dims])

    def axis_centers(self):
        return [lo + (np.arange(int(b)) + 0.5) * (hi - lo) / b for lo, hi, b in self.dims]

    @property
    def centers(self) -> np.ndarray:
        """(K, 4) cell centres in C order (x varies slowest)."""
        mesh = np.meshgrid(*self.axis_centers(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def cell_index(self, state) -> int:
        """Flat index of the cell containing ``state`` (clipped to the grid)."""
        s = as_state(state)
        idx = []
        for v, (lo, hi, b) in zip(s, self.dims):
            idx.append(int(np.clip(np.floor((v - lo) / (hi - lo) * b), 0, b - 1)))
        return int(np.ravel_multi_index(idx, self.shape))


@dataclass(frozen=True)
class GridPosterior:
    masses: np.ndarray
    boundary_leak: bool = False
    likelihood_collapse: bool = False


def _normalize(m):
    total = m.sum()
    if not total > 0:
        raise ConfigurationError("grid posterior has no mass")
    return m / total


def init_grid(spec: GridSpec, kind: str = "uniform", mean=None, cov=None) -> GridPosterior:
    """Initial posterior: ``"uniform"`` over admissible cells or ``"gaussian"`` N(mean, cov)."""
    centers = spec.centers
    admissible = np.ones(len(centers), dtype=bool)
    if spec.max_speed is not None:
        admissible = np.hypot(centers[:, 2], centers[:, 3]) <= spec.max_speed
    if kind == "uniform":
        m = admissible.astype(float)
    elif kind == "gaussian":
        mean = as_state(mean)
        L = np.linalg.cholesky(np.asarray(cov, dtype=float))
        y = solve_triangular(L, (centers - mean).T, lower=True)
        logp = np.where(admissible, -0.5 * np.sum(y * y, axis=0), -np.inf)
        if not np.any(np.isfinite(logp)):
            raise ConfigurationError("no admissible grid cells")
        m = np.exp(logp - logp.max())
    else:
        raise ConfigurationError(f"unknown initialization {kind!r}")
    return GridPosterior(masses=_normalize(m))


@dataclass(frozen=True)
class TransitionKernel:
    """Row-stochastic sparse matrix ``T[src, dst]`` plus rows that left the grid."""

    matrix: sp.csr_matrix
    escaped: np.ndarray


_KERNELS: dict = {}


def transition_kernel(spec: GridSpec, model: MotionModel, rel_threshold: float = 1e-12, chunk: int = 256):
    """Sparse cell-to-cell transition probabilities (cached per grid and model).

    Each source row holds the Gaussian transition density evaluated at every
    destination centre, with entries below ``rel_threshold`` of the row maximum
    dropped, normalized to sum to one.  Rows whose largest density underflows
    are marked as escaped and left empty.
    """
    key = (spec, model.dt, model.A.tobytes(), model.Q.tobytes(), rel_threshold)
    if key in _KERNELS:
        return _KERNELS[key]
    centers = spec.centers
    K = len(centers)
    L = np.linalg.cholesky(model.Q)
    log_norm = 0.5 * STATE_DIM * np.log(2 * np.pi) + np.sum(np.log(np.diag(L)))
    # whiten once so each chunk only needs squared distances
    wc = solve_triangular(L, centers.T, lower=True).T  # (K, 4)
    wm = solve_triangular(L, (centers @ model.A.T).T, lower=True).T
    rows, cols, vals = [], [], []
    escaped = np.zeros(K, dtype=bool)
    cut = np.log(rel_threshold)
    for s0 in range(0, K, chunk):
        src = wm[s0 : s0 + chunk]
        d2 = np.sum(src**2, axis=1)[:, None] - 2.0 * src @ wc.T + np.sum(wc**2, axis=1)[None, :]
        logf = -0.5 * np.maximum(d2, 0.0) - log_norm
        rmax = logf.max(axis=1)
        escaped[s0 : s0 + chunk] = rmax < _LOG_TINY
        keep = (logf - rmax[:, None] >= cut) & ~escaped[s0 : s0 + chunk, None]
        r, c = np.nonzero(keep)
        w = np.exp(logf[r, c] - rmax[r])
        rows.append(r + s0)
        cols.append(c)
        vals.append(w)
    rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
    T = sp.csr_matrix((vals, (rows, cols)), shape=(K, K))
    sums = np.asarray(T.sum(axis=1)).ravel()
    T = sp.diags(np.where(sums > 0, 1.0 / np.where(sums > 0, sums, 1.0), 0.0)) @ T
    kernel = TransitionKernel(matrix=T.tocsr(), escaped=escaped)
    _KERNELS[key] = kernel
    return kernel


def grid_predict(post: GridPosterior, spec: GridSpec, model: MotionModel) -> GridPosterior:
    kernel = transition_kernel(spec, model)
    m = post.masses
    prior = kernel.matrix.T @ m
    leaked = float(m[kernel.escaped].sum())
    leak = leaked > 0
    if leak:
        warnings.warn(f"{leaked:.3g} of the mass left the grid; spreading it uniformly", NumericalWarning, stacklevel=2)
        prior = prior + leaked / len(prior)
    return GridPosterior(masses=_normalize(prior), boundary_leak=leak)


def cell_log_likelihood(spec: GridSpec, z, params: ChannelParams, geom, quad: QuadratureSpec | None = None):
    """Measurement log-likelihood at every cell (evaluated once per position column)."""
    zv = np.asarray(z.z if isinstance(z, Measurement) else z, dtype=float)
    geom = np.asarray(geom, dtype=float)
    ax, ay = spec.axis_centers()[:2]
    X, Y = np.meshgrid(ax, ay, indexing="ij")
    pos = np.stack([X.ravel(), Y.ravel()], axis=-1)
    d = np.maximum(np.linalg.norm(geom[None] - pos[:, None, :], axis=-1), MIN_DISTANCE)
    ll = measurement_log_likelihood(params, zv, d, quad)[0].reshape(len(ax), len(ay))
    nv = spec.shape[2] * spec.shape[3]
    return np.repeat(ll.ravel(), nv)


def grid_update(
    prior: GridPosterior,
    spec: GridSpec,
    z,
    params: ChannelParams,
    geom,
    quad: QuadratureSpec | None = None,
    log_lik: np.ndarray | None = None,
) -> GridPosterior:
    """Multiply by the measurement likelihood and renormalize.

    ``log_lik`` may be supplied directly (one value per cell) instead of
    evaluating the channel model.
    """
    if log_lik is None:
        log_lik = cell_log_likelihood(spec, z, params, geom, quad)
    log_lik = np.asarray(log_lik, dtype=float)
    support = prior.masses > 0
    if not np.any(support & np.isfinite(log_lik)):
        return GridPosterior(masses=prior.masses, likelihood_collapse=True)
    shift = np.max(log_lik[support & np.isfinite(log_lik)])
    post = prior.masses * np.exp(log_lik - shift)
    total = post.sum()
    if not total > 0:
        warnings.warn("likelihood collapsed on the grid; keeping the prior", NumericalWarning, stacklevel=2)
        return GridPosterior(masses=prior.masses, likelihood_collapse=True)
    return GridPosterior(masses=post / total, boundary_leak=prior.boundary_leak)


def mmse_estimate(post: GridPosterior, spec: GridSpec) -> np.ndarray:
    return post.masses @ spec.centers


def posterior_covariance(post: GridPosterior, spec: GridSpec) -> np.ndarray:
    c = spec.centers
    mean = post.masses @ c
    r = c - mean
    return (post.masses[:, None] * r).T @ r
