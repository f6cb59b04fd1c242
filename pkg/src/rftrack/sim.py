"""Closed-loop tracking scenarios and Monte Carlo batches.

Each step of :func:`run_scenario` propagates the true target, samples a
measurement, updates the estimator, logs the posterior information at the true
state, plans headings from the estimate, and moves the trackers.
"""
import dataclasses
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bayes, ekf
from .channel import ChannelParams, QuadratureSpec, as_geometry, distances, sample_measurement
from .errors import ConfigurationError, NumericalWarning
from .fisher import HessianMCConfig, d_criterion, fim_predict, fim_update, measurement_info_d4, process_info
from .motion import as_state, build_motion_model, step_target
from .planner import PlannerConfig, apply_plan, bio_inspired_plan, steepest_descent_plan

ESTIMATORS = ("ekf", "bayes")
STREAMS = {"init": 0, "target": 1, "channel": 2, "fim": 3, "plan_fim": 4, "planner": 5}


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for a named purpose, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(STREAMS[label],)))


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one run.  Powers are linear milliwatts."""

    # launched 20 m apart from a base at the corner of the patrol region
    tracker_positions: tuple = ((0.0, 0.0), (20.0, 0.0))
    region: tuple = (0.0, 600.0, 0.0, 600.0)
    target_initial: tuple | None = None
    dt: float = 1.0
    q_cov: tuple = tuple(tuple(2.0 * float(i == j) for j in range(4)) for i in range(4))
    channel: ChannelParams = field(default_factory=ChannelParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    estimator: str = "ekf"
    grid: bayes.GridSpec = field(default_factory=bayes.GridSpec)
    mc: HessianMCConfig = field(default_factory=HessianMCConfig)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    prior_sigma_pos: float | None = None
    prior_sigma_vel: float = 1.0
    n_steps: int = 10
    master_seed: int = 0
    # detection sweeps can skip the information bookkeeping (dcrit_db is then NaN)
    log_fim: bool = True

    def __post_init__(self):
        geom = as_geometry(self.tracker_positions)
        object.__setattr__(self, "tracker_positions", tuple(map(tuple, geom.tolist())))
        q = np.asarray(self.q_cov, dtype=float)
        if q.ndim == 0:
            q = float(q) * np.eye(4)
        object.__setattr__(self, "q_cov", tuple(map(tuple, q.tolist())))
        if self.target_initial is not None:
            object.__setattr__(self, "target_initial", tuple(as_state(self.target_initial).tolist()))
        if self.estimator not in ESTIMATORS:
            raise ConfigurationError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.n_steps < 0:
            raise ConfigurationError("n_steps must be non-negative")
        x0, x1, y0, y1 = self.region
        if not (x1 > x0 and y1 > y0):
            raise ConfigurationError("region must be (xmin, xmax, ymin, ymax) with max > min")
        if self.prior_sigma_pos is not None and self.prior_sigma_pos <= 0:
            raise ConfigurationError("prior_sigma_pos must be positive")
        if self.prior_sigma_vel <= 0:
            raise ConfigurationError("prior_sigma_vel must be positive")
        build_motion_model(self.dt, q)

    @property
    def n_trackers(self) -> int:
        return len(self.tracker_positions)

    @property
    def sigma_pos(self) -> float:
        if self.prior_sigma_pos is not None:
            return self.prior_sigma_pos
        x0, x1, y0, y1 = self.region
        # std of a uniform draw over the wider side
        return max(x1 - x0, y1 - y0) / np.sqrt(12.0)

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


@dataclass
class StepMetrics:
    step: int
    true_state: np.ndarray
    estimate: np.ndarray
    sq_err_pos: float
    sq_err_state: float
    dcrit_db: float
    detect_outcome: str
    tracker_positions: np.ndarray
    truth_s: bool
    j: np.ndarray = field(repr=False, default=None)
    d4: np.ndarray = field(repr=False, default=None)
    # D-criterion of the information recursion run at the estimates
    dcrit_est_db: float = float("nan")


@dataclass
class RunResult:
    steps: list
    timing: dict
    seed: int

    def column(self, name) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps])


class SimulationError(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step


def _outcome(decided, truth):
    return {(True, True): "TP", (True, False): "FP", (False, True): "FN", (False, False): "TN"}[(decided, truth)]


def initial_target(cfg: ScenarioConfig, rng) -> np.ndarray:
    if cfg.target_initial is not None:
        return np.array(cfg.target_initial)
    x0, x1, y0, y1 = cfg.region
    return np.array([rng.uniform(x0, x1), rng.uniform(y0, y1), 0.0, 0.0])


def initial_estimate(cfg: ScenarioConfig) -> np.ndarray:
    x0, x1, y0, y1 = cfg.region
    return np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.0, 0.0])


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    seed = cfg.master_seed
    model = build_motion_model(cfg.dt, cfg.q_cov)
    pi = process_info(model)
    params = cfg.channel
    geom = as_geometry(cfg.tracker_positions)
    step_len = cfg.planner.v_max * cfg.dt

    rng_target = substream(seed, "target")
    rng_channel = substream(seed, "channel")
    rng_fim = substream(seed, "fim")
    rng_plan_fim = substream(seed, "plan_fim")
    rng_planner = substream(seed, "planner")
    x_true = initial_target(cfg, substream(seed, "init"))
    x_hat = initial_estimate(cfg)
    belief = ekf.initial_belief(x_hat, cfg.sigma_pos, cfg.prior_sigma_vel)
    j_true = np.linalg.inv(belief.p)
    j_plan = j_true.copy()
    post = None
    if cfg.estimator == "bayes":
        post = bayes.init_grid(cfg.grid, "gaussian", x_hat, belief.p)

    timing = {"estimation": 0.0, "planning": 0.0, "fim": 0.0}
    steps = []
    for k in range(1, cfg.n_steps + 1):
        try:
            x_true = step_target(model, x_true, rng_target)
            meas = sample_measurement(params, distances(x_true[:2], geom), rng_channel)

            t0 = time.perf_counter()
            outcome = ""
            if cfg.estimator == "ekf":
                belief, rec = ekf.detect_and_update(ekf.ekf_predict(belief, model), meas, params, geom, cfg.quad)
                x_hat = belief.x_hat
                outcome = _outcome(rec.decided_h1, meas.truth_s)
            else:
                post = bayes.grid_predict(post, cfg.grid, model)
                post = bayes.grid_update(post, cfg.grid, meas, params, geom, cfg.quad)
                x_hat = bayes.mmse_estimate(post, cfg.grid)
            t1 = time.perf_counter()
            timing["estimation"] += t1 - t0

            d4 = None
            if cfg.log_fim:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", NumericalWarning)
                    d4 = measurement_info_d4(params, geom, x_true, cfg.mc, rng_fim)
                    j_true = fim_update(fim_predict(j_true, pi), d4)
            t2 = time.perf_counter()
            timing["fim"] += t2 - t1

            err = x_hat - x_true
            steps.append(
                StepMetrics(
                    step=k,
                    true_state=x_true.copy(),
                    estimate=np.array(x_hat, dtype=float),
                    sq_err_pos=float(err[:2] @ err[:2]),
                    sq_err_state=float(err @ err),
                    dcrit_db=d_criterion(j_true) if cfg.log_fim else float("nan"),
                    detect_outcome=outcome,
                    tracker_positions=geom.copy(),
                    truth_s=bool(meas.truth_s),
                    j=j_true.copy() if cfg.log_fim else None,
                    d4=d4,
                )
            )

            t3 = time.perf_counter()
            if cfg.log_fim or cfg.planner.planner_kind == "steepest_descent":
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", NumericalWarning)
                    # information about the estimated state: what the planner can see
                    d4_hat = measurement_info_d4(params, geom, _off_trackers(x_hat, geom), cfg.mc, rng_plan_fim)
                    j_plan = fim_update(fim_predict(j_plan, pi), d4_hat)
                steps[-1].dcrit_est_db = d_criterion(j_plan)
            if cfg.planner.planner_kind == "steepest_descent":
                plan = steepest_descent_plan(j_plan, x_hat, geom, params, model, cfg.planner, cfg.mc, rng_planner)
            else:
                plan = bio_inspired_plan(x_hat, geom, step_len)
            geom = apply_plan(geom, plan)
            timing["planning"] += time.perf_counter() - t3
        except Exception as e:  # noqa: BLE001 - re-raised with the step attached
            raise SimulationError(k, e) from e
    return RunResult(steps=steps, timing=timing, seed=seed)


def _off_trackers(x_hat, geom):
    # nudge an estimate that sits exactly on a tracker so distances stay positive
    x = np.array(x_hat, dtype=float)
    while np.any(np.linalg.norm(geom - x[:2], axis=1) == 0):
        x[:2] += 1e-6
    return x


@dataclass
class BatchStats:
    steps: np.ndarray
    mean_sq_err_pos: np.ndarray
    std_sq_err_pos: np.ndarray
    mean_sq_err_state: np.ndarray
    std_sq_err_state: np.ndarray
    mean_dcrit_db: np.ndarray
    std_dcrit_db: np.ndarray
    confusion: dict
    runs: list = field(repr=False, default_factory=list)


def confusion_rates(outcomes) -> dict:
    """Detection rates with denominators split by the true transmit state."""
    outcomes = list(outcomes)
    counts = {k: outcomes.count(k) for k in ("TP", "FP", "FN", "TN")}
    pos = counts["TP"] + counts["FN"]
    neg = counts["FP"] + counts["TN"]
    # an empty class contributes no errors and no correct decisions
    return {
        **counts,
        "tp_rate": counts["TP"] / pos if pos else 0.0,
        "fn_rate": counts["FN"] / pos if pos else 0.0,
        "fp_rate": counts["FP"] / neg if neg else 0.0,
        "tn_rate": counts["TN"] / neg if neg else 0.0,
    }


def _run_seed(args):
    cfg, seed = args
    return run_scenario(cfg.replace(master_seed=seed))


def run_batch(cfg: ScenarioConfig, n_runs: int, seeds=None, workers: int = 1) -> BatchStats:
    """Run ``n_runs`` independent scenarios and aggregate per-step statistics.

    Seeds default to ``master_seed, master_seed + 1, ...``.  Aggregation is in
    seed order regardless of ``workers``.
    """
    if n_runs < 1:
        raise ConfigurationError("n_runs must be at least 1")
    seeds = list(seeds) if seeds is not None else [cfg.master_seed + i for i in range(n_runs)]
    if len(seeds) != n_runs:
        raise ConfigurationError("need exactly one seed per run")
    jobs = [(cfg, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(_run_seed, jobs))
    else:
        runs = [_run_seed(j) for j in jobs]

    def stack(name):
        return np.array([r.column(name) for r in runs]).reshape(n_runs, cfg.n_steps)

    pos, state, dc = stack("sq_err_pos"), stack("sq_err_state"), stack("dcrit_db")
    outcomes = [s.detect_outcome for r in runs for s in r.steps if s.detect_outcome]
    return BatchStats(
        steps=np.arange(1, cfg.n_steps + 1),
        mean_sq_err_pos=pos.mean(axis=0),
        std_sq_err_pos=pos.std(axis=0),
        mean_sq_err_state=state.mean(axis=0),
        std_sq_err_state=state.std(axis=0),
        mean_dcrit_db=dc.mean(axis=0),
        std_dcrit_db=dc.std(axis=0),
        confusion=confusion_rates(outcomes),
        runs=runs,
    )


def table1_scenario(**overrides) -> ScenarioConfig:
    """Default simulation parameters (two trackers, bio planner, EKF)."""
    return ScenarioConfig(**overrides)


@dataclass(frozen=True)
class Fig4Scenario:
    """Four trackers closing in on a stationary target along straight lines."""

    n_trackers: int = 4
    start_distance: float = 300.0
    speed: float = 5.0
    dt: float = 0.05
    n_steps: int = 1000
    channel: ChannelParams = field(default_factory=lambda: ChannelParams(q=0.5, sigma_sh=1.0))
    master_seed: int = 0

    def distances(self) -> np.ndarray:
        t = np.arange(self.n_steps) * self.dt
        d = self.start_distance - self.speed * t
        if np.any(d <= 0):
            raise ConfigurationError("trackers reach the target within the trace")
        return np.repeat(d[:, None], self.n_trackers, axis=1)


def fig4_scenario(**overrides) -> Fig4Scenario:
    return Fig4Scenario(**overrides)


def fig4_traces(cfg: Fig4Scenario) -> dict:
    """Noiseless, faded and sampled received-power traces, each (n_steps, n_trackers) in mW.

    The noiseless trace uses continuous transmission without shadowing; the
    faded trace adds intermittency and shadowing around the thermal mean; the
    sampled trace adds thermal noise on top of the same fades.
    """
    p = cfg.channel
    d = cfg.distances()
    rng = substream(cfg.master_seed, "channel")
    s = rng.random(cfg.n_steps) >= p.q
    fade = np.exp(p.sigma_sh * rng.standard_normal(d.shape))
    thermal = p.sigma_th * rng.standard_normal(d.shape)
    received = s[:, None] * p.gain / d**2 * fade
    return {
        "time": np.arange(cfg.n_steps) * cfg.dt,
        "distance": d,
        "noiseless": p.gain / d**2 + p.p_th_mean,
        "faded": received + p.p_th_mean,
        "sampled": received + p.p_th_mean + thermal,
        "truth_s": s,
    }
