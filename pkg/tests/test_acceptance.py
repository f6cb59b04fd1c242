"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Criteria 4 and 5 run the full 20-seed closed-loop comparisons and take several
minutes on one core.
"""
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from oracles import pipeline_vs_brute_force

from rftrack import repro
from rftrack.channel import ChannelParams, expected_measurement, noise_covariance
from rftrack.ekf import measurement_jacobian
from rftrack.fisher import HessianMCConfig, fim_predict, measurement_info_d4, process_info
from rftrack.motion import build_motion_model


def record(number, title, passed, detail):
    line = f"ACCEPTANCE {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def random_pd(rng, n=4):
    m = rng.normal(size=(n, n))
    return m @ m.T + rng.uniform(0.01, 1.0) * np.eye(n)


def test_1_noise_covariance_oracle():
    t0 = time.perf_counter()
    p = ChannelParams()
    d = np.array([100.0, 150.0])
    n = 1_000_000
    rng = np.random.default_rng(2024)
    # draw straight from the generative model
    s = rng.random(n) >= p.q
    fade = np.exp(p.sigma_sh * rng.standard_normal((n, 2)))
    z = s[:, None] * p.g * p.p_on / d**2 * fade + p.p_th_mean + p.sigma_th * rng.standard_normal((n, 2))
    v = z - expected_measurement(p, d)
    R = noise_covariance(p, d)
    vc = v - v.mean(axis=0)
    worst = 0.0
    for i in range(2):
        for j in range(2):
            prod = vc[:, i] * vc[:, j]
            se = prod.std() / np.sqrt(n)
            worst = max(worst, abs(prod.mean() - R[i, j]) / se)
    secs = time.perf_counter() - t0
    ok = worst < 5.0 and secs < 30
    assert record(1, "noise covariance vs 1e6 draws", ok, f"max |error| {worst:.2f} SE (limit 5), {secs:.1f} s")


def test_2_gaussian_fim_oracle():
    t0 = time.perf_counter()
    p = ChannelParams(q=0.0, sigma_sh=0.0)
    geom = np.array([[100.0, 0.0], [0.0, 100.0]])
    x = np.zeros(4)
    d4 = measurement_info_d4(p, geom, x, HessianMCConfig(n_samples=2000), np.random.default_rng(7))
    # linearized information with H from central differences of the mean
    h = 1e-3
    H = np.zeros((2, 4))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        H[:, k] = (
            expected_measurement(p, np.linalg.norm(geom - e, axis=1)) - expected_measurement(p, np.linalg.norm(geom + e, axis=1))
        ) / (2 * h)
    ref = H.T @ np.linalg.solve(noise_covariance(p, [100.0, 100.0]), H)
    err = np.linalg.norm(d4 - ref) / np.linalg.norm(ref)
    secs = time.perf_counter() - t0
    ok = err <= 0.10 and secs < 60
    assert record(2, "Gaussian-case D4 vs H'R^-1 H", ok, f"relative Frobenius error {err:.2e} (limit 0.10), {secs:.1f} s")


def test_3_fim_recursion_identity():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        m = build_motion_model(rng.uniform(0.0, 2.0), random_pd(rng))
        J = random_pd(rng)
        closed = np.linalg.inv(m.Q + m.A @ np.linalg.inv(J) @ m.A.T)
        worst = max(worst, np.linalg.norm(fim_predict(J, process_info(m)) - closed) / np.linalg.norm(closed))
    assert record(3, "information prediction vs inversion lemma", worst <= 1e-8, f"max relative error {worst:.2e} (limit 1e-8)")


@pytest.mark.slow
def test_4_planner_dominance(tmp_path):
    rep = repro.repro_dcrit(tmp_path)
    ok = rep.passed and rep.seconds < 15 * 60
    detail = "; ".join(f"{c.label}: {c.detail} [{'ok' if c.passed else 'miss'}]" for c in rep.checks)
    assert record(4, "steepest vs bio D-criterion", ok, f"{detail}; {rep.seconds:.0f} s")


@pytest.mark.slow
def test_5_estimator_convergence(tmp_path):
    rep = repro.repro_mse(tmp_path)
    ok = rep.passed and rep.seconds < 20 * 60
    detail = "; ".join(f"{c.label}: {c.detail} [{'ok' if c.passed else 'miss'}]" for c in rep.checks)
    assert record(5, "final mean squared state error", ok, f"{detail}; {rep.seconds:.0f} s")


def test_6_detection_extremes(tmp_path):
    rep = repro.repro_detection(tmp_path)
    ok = rep.passed and rep.seconds < 60
    detail = "; ".join(f"{c.label.split(':')[0]}: {c.detail}" for c in rep.checks)
    assert record(6, "no detection errors at q in {0, 1}", ok, f"{detail}; {rep.seconds:.1f} s")


def test_7_grid_filter_brute_force():
    err = pipeline_vs_brute_force(0)
    assert record(7, "grid filter vs exhaustive marginalization", err <= 1e-6, f"max per-cell difference {err:.2e} (limit 1e-6)")


def test_8_jacobian_finite_differences():
    rng = np.random.default_rng(8)
    p = ChannelParams()
    worst = 0.0
    for _ in range(100):
        n = rng.integers(1, 6)
        geom = rng.uniform(-300, 300, size=(n, 2))
        x = np.r_[rng.uniform(-300, 300, 2), rng.normal(size=2)]
        d = np.linalg.norm(geom - x[:2], axis=1)
        h = 1e-4 * d.min()
        fd = np.zeros((n, 4))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            up = expected_measurement(p, np.linalg.norm(geom - (x[:2] + e), axis=1))
            dn = expected_measurement(p, np.linalg.norm(geom - (x[:2] - e), axis=1))
            fd[:, k] = (up - dn) / (2 * h)
        H = measurement_jacobian(p, x, geom)
        worst = max(worst, np.max(np.abs(H - fd)) / np.max(np.abs(fd)))
    assert record(8, "Jacobian vs central differences", worst <= 1e-4, f"max relative error {worst:.2e} over 100 geometries (limit 1e-4)")


def test_9_fig4_reproduction(tmp_path):
    rep = repro.repro_fig4(tmp_path)
    ok = rep.passed and rep.seconds < 10 and (tmp_path / "fig4_traces.csv").exists()
    detail = "; ".join(f"{c.label}: {c.detail}" for c in rep.checks)
    assert record(9, "approach traces", ok, f"{detail}; {rep.seconds:.2f} s")
