import itertools

import numpy as np
import pytest

from rftrack import planner
from rftrack.channel import ChannelParams
from rftrack.errors import ConfigurationError
from rftrack.fisher import HessianMCConfig, draw_noise
from rftrack.motion import build_motion_model
from rftrack.planner import (
    HeadingPlan,
    PlannerConfig,
    apply_plan,
    bio_inspired_plan,
    heading_grid,
    score_headings,
    steepest_descent_plan,
)

MC = HessianMCConfig(n_samples=20)


def setup():
    model = build_motion_model(1.0)
    j = np.diag([1e-3, 1e-3, 1.0, 1.0])
    x_hat = np.array([60.0, 40.0, 0.0, 0.0])
    geom = np.array([[0.0, 0.0], [20.0, 0.0]])
    return j, x_hat, geom, ChannelParams(q=0.2, sigma_th=1e-9), model


def test_heading_grid():
    g = heading_grid(16)
    assert g[0] == -np.pi and len(g) == 16
    assert np.all(np.diff(g) > 0) and g[-1] < np.pi
    assert np.allclose(np.diff(g), np.pi / 8)


@pytest.mark.parametrize("kw", [dict(headings_per_uav=3), dict(v_max=0.0), dict(planner_kind="random")])
def test_invalid_planner_config(kw):
    with pytest.raises(ConfigurationError):
        PlannerConfig(**kw)


def test_bio_points_at_estimate():
    geom = np.array([[0.0, 0.0], [10.0, 10.0], [20.0, 0.0]])
    plan = bio_inspired_plan([10.0, 0.0, 0.0, 0.0], geom, 5.0)
    assert np.allclose(plan.headings, [0.0, -np.pi / 2, np.pi])
    moved = apply_plan(geom, plan)
    assert np.allclose(moved, [[5.0, 0.0], [10.0, 5.0], [15.0, 0.0]])
    assert not plan.degenerate


def test_bio_flags_tracker_on_estimate():
    plan = bio_inspired_plan([1.0, 1.0, 0.0, 0.0], [[1.0, 1.0], [0.0, 0.0]], 5.0)
    assert plan.degenerate
    assert np.all(np.isfinite(plan.headings))


def test_apply_plan_respects_step_length():
    rng = np.random.default_rng(0)
    geom = rng.uniform(-100, 100, size=(5, 2))
    plan = HeadingPlan(headings=rng.uniform(-np.pi, np.pi, 5), step_length=3.5)
    assert np.allclose(np.linalg.norm(apply_plan(geom, plan) - geom, axis=1), 3.5)


def test_apply_plan_shape_mismatch():
    with pytest.raises(ConfigurationError):
        apply_plan([[0.0, 0.0], [1.0, 1.0]], HeadingPlan(headings=np.zeros(3), step_length=1.0))


def test_steepest_enumerates_joint_grid():
    j, x_hat, geom, params, model = setup()
    cfg = PlannerConfig(planner_kind="steepest_descent")
    plan = steepest_descent_plan(j, x_hat, geom, params, model, cfg, MC, np.random.default_rng(0))
    assert plan.n_candidates == 256
    assert not plan.coordinate_ascent and not plan.degenerate
    assert plan.step_length == cfg.v_max * model.dt
    assert all(np.isclose(h, heading_grid(16)).any() for h in plan.headings)


def test_steepest_picks_best_scored_candidate():
    # oracle: score every joint heading on the same noise draw one at a time
    j, x_hat, geom, params, model = setup()
    cfg = PlannerConfig(planner_kind="steepest_descent", headings_per_uav=8)
    plan = steepest_descent_plan(j, x_hat, geom, params, model, cfg, MC, np.random.default_rng(7))
    noise = draw_noise(np.random.default_rng(7), MC.n_samples, 2)
    grid = heading_grid(8)
    scores = {
        c: score_headings(j, x_hat, geom, params, model, np.array([c]), 5.0, MC, noise)[0]
        for c in itertools.product(grid, repeat=2)
    }
    best = max(scores, key=scores.get)
    assert np.allclose(plan.headings, best)
    assert plan.score == pytest.approx(scores[best], rel=1e-9)


def test_steepest_is_deterministic():
    j, x_hat, geom, params, model = setup()
    cfg = PlannerConfig(planner_kind="steepest_descent", headings_per_uav=8)
    a = steepest_descent_plan(j, x_hat, geom, params, model, cfg, MC, np.random.default_rng(3))
    b = steepest_descent_plan(j, x_hat, geom, params, model, cfg, MC, np.random.default_rng(3))
    assert np.array_equal(a.headings, b.headings) and a.score == b.score


def test_coordinate_ascent_for_large_swarms():
    j, x_hat, _, params, model = setup()
    geom = np.array([[0.0, 0.0], [20.0, 0.0], [0.0, 20.0], [20.0, 20.0]])
    cfg = PlannerConfig(planner_kind="steepest_descent", headings_per_uav=8, max_candidates=100, ascent_sweeps=2)
    plan = steepest_descent_plan(j, x_hat, geom, params, model, cfg, MC, np.random.default_rng(0))
    assert plan.coordinate_ascent
    assert plan.n_candidates == 2 * 4 * 8
    assert np.isfinite(plan.score)
    # ascent never ends below its bio-inspired starting point
    noise = draw_noise(np.random.default_rng(0), MC.n_samples, 4)
    start = bio_inspired_plan(x_hat, geom).headings
    start_score = score_headings(j, x_hat, geom, params, model, start[None], 5.0, MC, noise)[0]
    assert plan.score >= start_score


@pytest.mark.parametrize("max_candidates", [4096, 4])
def test_steepest_falls_back_when_nothing_scores(monkeypatch, max_candidates):
    j, x_hat, geom, params, model = setup()
    monkeypatch.setattr(planner, "score_headings", lambda *a, **k: np.full(len(a[5]), -np.inf))
    cfg = PlannerConfig(planner_kind="steepest_descent", headings_per_uav=4, max_candidates=max_candidates)
    plan = steepest_descent_plan(j, x_hat, geom, params, model, cfg, MC, np.random.default_rng(0))
    assert plan.degenerate
    assert np.allclose(plan.headings, bio_inspired_plan(x_hat, geom).headings)
    assert plan.step_length == cfg.v_max * model.dt


def test_score_marks_landing_on_target():
    j, _, geom, params, model = setup()
    # the predicted target sits exactly one step east of tracker 0
    x_hat = np.array([5.0, 0.0, 0.0, 0.0])
    cands = np.array([[0.0, np.pi / 2], [np.pi / 2, np.pi / 2]])
    s = score_headings(j, x_hat, geom, params, model, cands, 5.0, MC, draw_noise(np.random.default_rng(0), 20, 2))
    assert s[0] == -np.inf and np.isfinite(s[1])
