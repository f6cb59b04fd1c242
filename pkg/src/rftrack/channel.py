"""Intermittent RSSI measurement model.

Received power at tracker ``i`` (linear milliwatts)::

    z_i = s * g * p_on * d_i**-2 * v_i + p_th_i

with one Bernoulli ``s`` per time step shared by all trackers (``P(s=0) = q``),
independent log-normal shadowing ``v_i = exp(sigma_sh * n_i)`` and Gaussian
thermal noise ``p_th_i ~ N(p_th_mean, sigma_th**2)``.  Thermal noise can push
``z_i`` below zero.

All functions broadcast over leading axes; the last axis indexes trackers.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, DegenerateGeometryError, QuadratureError

LOG_2PI = np.log(2.0 * np.pi)
# thermal windows narrower than this (in units of the log-shadowing exponent) use the delta limit
_THIN_WINDOW = 1e-6
# fade exponents beyond this carry less than e^-800 of prior weight
_T_MAX = 40.0
# coarse scan used to find the bulk of the integrand for wide thermal windows
_SCAN_POINTS = 65
_FOCUS_MARGIN = 40.0


def dbm_to_mw(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def mw_to_dbm(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("power must be positive to convert to dBm")
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class ChannelParams:
    """Measurement constants, all powers in linear milliwatts.

    Defaults: ``g = 1``, ``p_on = 30 dBm``, ``q = 0.2``, ``sigma_sh = 1``,
    thermal mean ``-70 dBm`` and thermal std ``-80 dBm``.
    """

    g: float = 1.0
    p_on: float = 1000.0
    q: float = 0.2
    sigma_sh: float = 1.0
    p_th_mean: float = 1e-7
    sigma_th: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ConfigurationError(f"q must lie in [0, 1], got {self.q}")
        if self.p_on <= 0:
            raise ConfigurationError(f"p_on must be positive, got {self.p_on}")
        if self.g <= 0:
            raise ConfigurationError(f"g must be positive, got {self.g}")
        if self.sigma_sh < 0:
            raise ConfigurationError(f"sigma_sh must be non-negative, got {self.sigma_sh}")
        if self.sigma_th <= 0:
            raise ConfigurationError(f"sigma_th must be positive, got {self.sigma_th}")

    @classmethod
    def from_dbm(cls, p_on_dbm=30.0, p_th_mean_dbm=-70.0, sigma_th_dbm=-80.0, **kw):
        return cls(
            p_on=float(dbm_to_mw(p_on_dbm)),
            p_th_mean=float(dbm_to_mw(p_th_mean_dbm)),
            sigma_th=float(dbm_to_mw(sigma_th_dbm)),
            **kw,
        )

    @property
    def gain(self) -> float:
        """``g * p_on``: received power at 1 m without fading."""
        return self.g * self.p_on

    @property
    def mean_fade(self) -> float:
        """``(1 - q) * E[v_sh]``."""
        return (1.0 - self.q) * np.exp(0.5 * self.sigma_sh**2)


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre rule for the transmit-branch convolution integral.

    ``half_width`` is the thermal window in standard deviations; readings far
    below the thermal mean need a wide window, since the transmit branch then
    explains them by a deep fade plus a large thermal deviation.
    """

    n_nodes: int = 64
    half_width: float = 12.0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ConfigurationError("quadrature needs at least 2 nodes")
        if self.half_width <= 0:
            raise ConfigurationError("quadrature half_width must be positive")


@lru_cache(maxsize=16)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class Measurement:
    z: np.ndarray
    truth_s: bool | None = None


def as_geometry(positions) -> np.ndarray:
    """Validate tracker coordinates, returning an (N, 2) float array."""
    geom = np.array(positions, dtype=float)
    if geom.ndim == 1 and geom.size == 2:
        geom = geom[None, :]
    if geom.ndim != 2 or geom.shape[1] != 2 or geom.shape[0] < 1:
        raise ConfigurationError(f"tracker positions must have shape (N, 2), got {geom.shape}")
    if not np.all(np.isfinite(geom)):
        raise ConfigurationError("tracker positions must be finite")
    return geom


def distances(target_xy, geom) -> np.ndarray:
    """Euclidean tracker-to-target distances.

    ``target_xy`` has shape (..., 2) and ``geom`` (..., N, 2); the result has
    shape (..., N).  A zero distance raises ``DegenerateGeometryError``.
    """
    target_xy = np.asarray(target_xy, dtype=float)
    geom = np.asarray(geom, dtype=float)
    d = np.linalg.norm(geom - target_xy[..., None, :], axis=-1)
    if np.any(d <= 0):
        raise DegenerateGeometryError("a tracker coincides with the target position")
    return d


def expected_measurement(params: ChannelParams, d) -> np.ndarray:
    """Mean received power ``g p_on (1-q) e^{sigma_sh^2/2} d^-2 + p_th_mean``."""
    d = np.asarray(d, dtype=float)
    return params.gain * params.mean_fade / d**2 + params.p_th_mean


def measurement_from_draws(params: ChannelParams, d, u, n_sh, n_th):
    """Deterministic map from standard random variates to measurements.

    Args:
        d: distances, shape broadcastable to (..., N).
        u: uniforms in [0, 1), shape (...); the target transmits iff ``u >= q``.
        n_sh, n_th: standard normals, shape (..., N), for shadowing and thermal noise.

    Returns:
        ``(z, s)`` with ``z`` of shape (..., N) and boolean ``s`` of shape (...).
    """
    d = np.asarray(d, dtype=float)
    s = np.asarray(u) >= params.q
    fade = np.exp(params.sigma_sh * np.asarray(n_sh))
    z = s[..., None] * params.gain / d**2 * fade + params.p_th_mean + params.sigma_th * np.asarray(n_th)
    return z, s


def sample_measurement(params: ChannelParams, d, rng: np.random.Generator) -> Measurement:
    """Draw one measurement vector for the given distances."""
    d = np.asarray(d, dtype=float).reshape(-1)
    if np.any(d <= 0):
        raise DegenerateGeometryError("distances must be positive")
    n = d.size
    u = rng.random()
    n_sh = rng.standard_normal(n)
    n_th = rng.standard_normal(n)
    z, s = measurement_from_draws(params, d, u, n_sh, n_th)
    return Measurement(z=z, truth_s=bool(s))


def noise_covariance(params: ChannelParams, d) -> np.ndarray:
    """Covariance of ``v = z - h`` for one time step.

    Off-diagonal terms come from the shared Bernoulli transmit state; the
    diagonal is the exact variance of a single tracker's measurement.
    """
    d = np.asarray(d, dtype=float).reshape(-1)
    q, sig2 = params.q, params.sigma_sh**2
    a = params.gain / d**2
    R = np.outer(a, a) * q * (1.0 - q) * np.exp(sig2)
    var = a**2 * ((1.0 - q) * np.exp(2.0 * sig2) - (1.0 - q) ** 2 * np.exp(sig2)) + params.sigma_th**2
    R[np.diag_indices_from(R)] = var
    return R


def _gauss_logpdf(x, mean, std):
    return -0.5 * ((x - mean) / std) ** 2 - np.log(std) - 0.5 * LOG_2PI


def _log_integrand(t, z, a, sig, mu, sd):
    # log of phi(t) * N(z - a e^{sig t}; mu, sd) on the fade-exponent axis
    return -0.5 * t**2 - 0.5 * LOG_2PI + _gauss_logpdf(z[..., None] - a[..., None] * np.exp(sig * t), mu, sd)


def _focus_windows(z, a, sig, mu, sd, lo, hi):
    """Shrink each ``[lo, hi]`` to the part where the integrand is within e^-40 of its peak."""
    u = np.linspace(0.0, 1.0, _SCAN_POINTS)
    ts = lo[:, None] + (hi - lo)[:, None] * u
    lf = _log_integrand(ts, z, a, sig, mu, sd)
    keep = lf >= lf.max(axis=1, keepdims=True) - _FOCUS_MARGIN
    first = np.argmax(keep, axis=1)
    last = _SCAN_POINTS - 1 - np.argmax(keep[:, ::-1], axis=1)
    rows = np.arange(len(lo))
    new_lo = ts[rows, np.maximum(first - 1, 0)]
    new_hi = ts[rows, np.minimum(last + 1, _SCAN_POINTS - 1)]
    return new_lo, new_hi


def log_alpha_per_sensor(params: ChannelParams, z, d, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Log density of each ``z_i`` given the target transmitted.

    This is the convolution of the scaled log-normal fade with the thermal
    Gaussian.  The integral is taken over the standard-normal shadowing exponent
    ``t`` (``v = exp(sigma_sh * t)``) on the set where the thermal term lies
    within ``W`` standard deviations of its mean, and evaluated by
    Gauss-Legendre in log space.  When that set is not contained in
    ``|t| <= W`` (readings near the thermal floor) a coarse scan first locates
    the bulk of the integrand.
    """
    quad = quad or QuadratureSpec()
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float)
    a = params.gain / d**2
    mu, sd = params.p_th_mean, params.sigma_th
    if params.sigma_sh == 0.0:
        return _gauss_logpdf(z, a + mu, sd)

    z, a = np.broadcast_arrays(z, a)
    sig, W = params.sigma_sh, quad.half_width
    lo_z = (z - mu - W * sd) / a
    hi_z = (z - mu + W * sd) / a
    # thermal window mapped to t: g_lo = -inf when it reaches zero fade, g_hi = nan when no fade reaches it
    g_hi = np.where(hi_z > 0, np.log(np.where(hi_z > 0, hi_z, 1.0)) / sig, np.nan)
    g_lo = np.where(lo_z > 0, np.log(np.where(lo_z > 0, lo_z, 1.0)) / sig, -np.inf)
    t_lo, t_hi = g_lo.copy(), g_hi.copy()

    # when the thermal window is vanishingly thin in t, the thermal density acts
    # as a delta: the integral is phi(t*) / (sigma_sh (z - mu)) with a e^{sigma_sh t*} = z - mu
    thin = (lo_z > 0) & ~((g_hi - g_lo) > _THIN_WINDOW)
    wide = ~thin & ~((g_lo >= -W) & (g_hi <= W))
    if np.any(wide):
        lo = np.clip(g_lo[wide], -_T_MAX, _T_MAX)
        hi = np.where(np.isnan(g_hi[wide]), _T_MAX, np.clip(g_hi[wide], -_T_MAX, _T_MAX))
        # windows lying wholly beyond +-_T_MAX: keep a unit slice at the edge nearest zero
        hi = np.where(lo >= hi, np.minimum(g_hi[wide], g_lo[wide] + 1.0), hi)
        lo = np.where(g_hi[wide] <= -_T_MAX, np.maximum(g_lo[wide], g_hi[wide] - 1.0), lo)
        lo = np.where(g_lo[wide] >= _T_MAX, g_lo[wide], lo)
        hi = np.where(g_hi[wide] <= -_T_MAX, g_hi[wide], hi)
        t_lo[wide], t_hi[wide] = _focus_windows(z[wide], a[wide], sig, mu, sd, lo, hi)
    t_lo = np.where(thin, -1.0, t_lo)
    t_hi = np.where(thin, 1.0, t_hi)

    x, w = _legendre(quad.n_nodes)
    half = 0.5 * (t_hi - t_lo)
    mid = 0.5 * (t_hi + t_lo)
    t = mid[..., None] + half[..., None] * x
    log_f = _log_integrand(t, z, a, sig, mu, sd)
    with np.errstate(divide="ignore"):
        out = np.array(logsumexp(log_f + np.log(w), axis=-1) + np.log(half), dtype=float)
    if np.any(thin):
        zt, at = z[thin], a[thin]
        t_star = np.log((zt - mu) / at) / sig
        out[thin] = -0.5 * t_star**2 - 0.5 * LOG_2PI - np.log(sig * (zt - mu))
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[:3]
        raise QuadratureError(
            f"transmit-branch quadrature produced non-finite values at indices {bad.tolist()} "
            f"(n_nodes={quad.n_nodes}, half_width={W})"
        )
    return out


def log_beta_per_sensor(params: ChannelParams, z) -> np.ndarray:
    """Log density of each ``z_i`` given silence (thermal noise only)."""
    return _gauss_logpdf(np.asarray(z, dtype=float), params.p_th_mean, params.sigma_th)


def measurement_log_likelihood(params: ChannelParams, z, d, quad: QuadratureSpec | None = None):
    """Mixture log-likelihood of a measurement vector.

    Returns:
        ``(log_l, log_alpha, log_beta)`` where ``alpha`` and ``beta`` are the
        joint densities of the N measurements under transmission and silence,
        and ``log_l = log((1 - q) alpha + q beta)``.  Each has the shape of the
        leading (non-tracker) axes.
    """
    log_alpha = np.sum(log_alpha_per_sensor(params, z, d, quad), axis=-1)
    log_beta = np.sum(log_beta_per_sensor(params, z), axis=-1)
    log_beta = np.broadcast_to(log_beta, np.shape(log_alpha))
    with np.errstate(divide="ignore"):
        log_l = np.logaddexp(np.log1p(-params.q) + log_alpha, np.log(params.q) + log_beta)
    return log_l, log_alpha, log_beta


def log_likelihood_at(params: ChannelParams, z, target_xy, geom, quad: QuadratureSpec | None = None):
    """Mixture log-likelihood of ``z`` evaluated at candidate target positions."""
    return measurement_log_likelihood(params, z, distances(target_xy, geom), quad)[0]
