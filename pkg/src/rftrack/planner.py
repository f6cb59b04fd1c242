"""One-step-ahead swarm heading selection.

Two planners are provided: an exhaustive D-optimal search that scores every
joint heading vector by the determinant of the next-step information matrix,
and the bio-inspired rule that points every tracker at the current estimate.
"""
import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, as_geometry
from .errors import ConfigurationError, NumericalWarning
from .fisher import HessianMCConfig, d4_batch, draw_noise, fim_predict, process_info, symmetrize
from .motion import MotionModel, as_state

PLANNERS = ("steepest_descent", "bio_inspired")


@dataclass(frozen=True)
class PlannerConfig:
    headings_per_uav: int = 16
    v_max: float = 5.0
    planner_kind: str = "bio_inspired"
    # joint grids larger than this fall back to coordinate ascent
    max_candidates: int = 4096
    ascent_sweeps: int = 2

    def __post_init__(self):
        if self.headings_per_uav < 4:
            raise ConfigurationError("headings_per_uav must be at least 4")
        if self.v_max <= 0:
            raise ConfigurationError("v_max must be positive")
        if self.planner_kind not in PLANNERS:
            raise ConfigurationError(f"planner_kind must be one of {PLANNERS}, got {self.planner_kind!r}")


@dataclass(frozen=True)
class HeadingPlan:
    """Headings in radians (one per tracker) and the common step length in metres."""

    headings: np.ndarray
    step_length: float
    degenerate: bool = False
    n_candidates: int = 0
    coordinate_ascent: bool = False
    score: float = np.nan


def heading_grid(n: int) -> np.ndarray:
    """``n`` headings ascending from ``-pi`` (exclusive of ``+pi``)."""
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


def apply_plan(geom, plan: HeadingPlan) -> np.ndarray:
    geom = as_geometry(geom)
    th = np.asarray(plan.headings, dtype=float)
    if th.shape != (geom.shape[0],):
        raise ConfigurationError(f"plan has {th.size} headings for {geom.shape[0]} trackers")
    return geom + plan.step_length * np.column_stack([np.cos(th), np.sin(th)])


def bio_inspired_plan(x_hat, geom, step_length: float = 0.0) -> HeadingPlan:
    """Point every tracker straight at the estimated target position."""
    x_hat = as_state(x_hat)
    geom = as_geometry(geom)
    delta = x_hat[:2] - geom
    at_target = np.all(delta == 0.0, axis=1)
    headings = np.where(at_target, 0.0, np.arctan2(delta[:, 1], delta[:, 0]))
    return HeadingPlan(headings=headings, step_length=float(step_length), degenerate=bool(at_target.any()))


def _moved(geom, headings, step):
    # headings (C, N) -> geometries (C, N, 2)
    return geom[None] + step * np.stack([np.cos(headings), np.sin(headings)], axis=-1)


def score_headings(j, x_hat, geom, params, model, headings, step, mc, noise):
    """Log-determinant of the next-step information for each heading vector.

    ``headings`` has shape (C, N).  The same ``noise`` draw is used for all
    candidates.  Non-positive determinants score ``-inf``.
    """
    pi = process_info(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        j_pred = fim_predict(j, pi)
    x_pred = model.A @ as_state(x_hat)
    geoms = _moved(geom, np.asarray(headings, dtype=float), step)
    # a tracker landing exactly on the predicted target cannot be scored
    ok = np.all(np.linalg.norm(geoms - x_pred[:2], axis=-1) > 0, axis=-1)
    scores = np.full(len(geoms), -np.inf)
    if ok.any():
        d4 = d4_batch(params, geoms[ok], x_pred, noise, mc)
        sign, logdet = np.linalg.slogdet(symmetrize(j_pred[None] + d4))
        scores[ok] = np.where(sign > 0, logdet, -np.inf)
    return scores


def steepest_descent_plan(
    j,
    x_hat,
    geom,
    params: ChannelParams,
    model: MotionModel,
    cfg: PlannerConfig,
    mc: HessianMCConfig,
    rng: np.random.Generator,
) -> HeadingPlan:
    """Exhaustive D-optimal heading search over the joint heading grid.

    Information is scored at the one-step prediction ``A @ x_hat``.  Ties go
    to the first candidate in row-major order (first tracker varies slowest).
    """
    geom = as_geometry(geom)
    x_hat = as_state(x_hat)
    n = geom.shape[0]
    step = cfg.v_max * model.dt
    grid = heading_grid(cfg.headings_per_uav)
    noise = draw_noise(rng, mc.n_samples, n)

    def fallback():
        bio = bio_inspired_plan(x_hat, geom, step)
        return HeadingPlan(headings=bio.headings, step_length=step, degenerate=True, n_candidates=n_eval)

    if cfg.headings_per_uav**n <= cfg.max_candidates:
        cands = np.array(list(itertools.product(grid, repeat=n)))
        n_eval = len(cands)
        scores = score_headings(j, x_hat, geom, params, model, cands, step, mc, noise)
        if not np.any(np.isfinite(scores)):
            return fallback()
        best = int(np.argmax(scores))
        return HeadingPlan(headings=cands[best], step_length=step, n_candidates=n_eval, score=float(scores[best]))

    # coordinate ascent from the bio-inspired headings
    current = bio_inspired_plan(x_hat, geom).headings.copy()
    best_score = -np.inf
    n_eval = 0
    for _ in range(cfg.ascent_sweeps):
        for i in range(n):
            cands = np.repeat(current[None], len(grid), axis=0)
            cands[:, i] = grid
            scores = score_headings(j, x_hat, geom, params, model, cands, step, mc, noise)
            n_eval += len(cands)
            k = int(np.argmax(scores))
            if scores[k] > best_score:
                best_score = scores[k]
                current = cands[k]
    if not np.isfinite(best_score):
        return fallback()
    return HeadingPlan(
        headings=current, step_length=step, n_candidates=n_eval, coordinate_ascent=True, score=float(best_score)
    )
