"""Scenario files: TOML ingestion, canonical serialization and hashing.

Powers are written in dBm in the file and converted to milliwatts on load.
"""
import hashlib
import json
import sys

import numpy as np

from .bayes import GridSpec
from .channel import ChannelParams, QuadratureSpec, dbm_to_mw, mw_to_dbm
from .errors import ConfigurationError
from .fisher import HessianMCConfig
from .planner import PlannerConfig
from .sim import ScenarioConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = {
    "scenario": {
        "n_steps",
        "master_seed",
        "estimator",
        "region",
        "tracker_positions",
        "target_initial",
        "prior_sigma_pos",
        "prior_sigma_vel",
        "log_fim",
    },
    "motion": {"dt", "q"},
    "channel": {"g", "p_on_dbm", "q", "sigma_sh", "p_th_mean_dbm", "sigma_th_dbm"},
    "planner": {"kind", "headings_per_uav", "v_max", "max_candidates", "ascent_sweeps"},
    "grid": {"x", "y", "vx", "vy", "max_speed", "max_cells"},
    "mc": {"n_samples", "delta"},
    "quadrature": {"n_nodes", "half_width"},
}


def _check_keys(doc):
    for section, body in doc.items():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        extra = set(body) - SECTIONS[section]
        if extra:
            raise ConfigurationError(f"unknown field(s) in [{section}]: {', '.join(sorted(extra))}")


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a parsed document (missing fields take defaults)."""
    _check_keys(doc)
    get = lambda sec: dict(doc.get(sec, {}))  # noqa: E731
    try:
        ch = get("channel")
        base = ChannelParams()
        channel = ChannelParams(
            g=float(ch.get("g", base.g)),
            p_on=float(dbm_to_mw(ch["p_on_dbm"])) if "p_on_dbm" in ch else base.p_on,
            q=float(ch.get("q", base.q)),
            sigma_sh=float(ch.get("sigma_sh", base.sigma_sh)),
            p_th_mean=float(dbm_to_mw(ch["p_th_mean_dbm"])) if "p_th_mean_dbm" in ch else base.p_th_mean,
            sigma_th=float(dbm_to_mw(ch["sigma_th_dbm"])) if "sigma_th_dbm" in ch else base.sigma_th,
        )
        pl = get("planner")
        if "kind" in pl:
            pl["planner_kind"] = pl.pop("kind")
        planner = PlannerConfig(**pl)
        grid = GridSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in get("grid").items()})
        quad = QuadratureSpec(**get("quadrature"))
        mc = HessianMCConfig(quad=quad, **get("mc"))
        mo = get("motion")
        sc = get("scenario")
        kw = {}
        for key in ("n_steps", "master_seed", "estimator", "prior_sigma_pos", "prior_sigma_vel", "log_fim"):
            if key in sc:
                kw[key] = sc[key]
        for key in ("region", "tracker_positions", "target_initial"):
            if key in sc:
                kw[key] = _nested_tuple(sc[key])
        if "dt" in mo:
            kw["dt"] = float(mo["dt"])
        if "q" in mo:
            kw["q_cov"] = _nested_tuple(mo["q"]) if isinstance(mo["q"], list) else float(mo["q"])
        return ScenarioConfig(channel=channel, planner=planner, grid=grid, mc=mc, quad=quad, **kw)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigurationError(str(e)) from e


def _nested_tuple(v):
    return tuple(_nested_tuple(x) for x in v) if isinstance(v, (list, tuple)) else v


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"config file is not valid TOML: {e}") from e
    return config_from_dict(doc)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Canonical document for ``cfg`` (the inverse of :func:`config_from_dict`)."""
    ch = cfg.channel
    doc = {
        "scenario": {
            "n_steps": cfg.n_steps,
            "master_seed": cfg.master_seed,
            "estimator": cfg.estimator,
            "region": list(cfg.region),
            "tracker_positions": [list(p) for p in cfg.tracker_positions],
            "prior_sigma_vel": cfg.prior_sigma_vel,
            "log_fim": cfg.log_fim,
        },
        "motion": {"dt": cfg.dt, "q": [list(r) for r in cfg.q_cov]},
        "channel": {
            "g": ch.g,
            "p_on_dbm": float(mw_to_dbm(ch.p_on)),
            "q": ch.q,
            "sigma_sh": ch.sigma_sh,
            "p_th_mean_dbm": float(mw_to_dbm(ch.p_th_mean)),
            "sigma_th_dbm": float(mw_to_dbm(ch.sigma_th)),
        },
        "planner": {
            "kind": cfg.planner.planner_kind,
            "headings_per_uav": cfg.planner.headings_per_uav,
            "v_max": cfg.planner.v_max,
            "max_candidates": cfg.planner.max_candidates,
            "ascent_sweeps": cfg.planner.ascent_sweeps,
        },
        "grid": {
            "x": list(cfg.grid.x),
            "y": list(cfg.grid.y),
            "vx": list(cfg.grid.vx),
            "vy": list(cfg.grid.vy),
            "max_cells": cfg.grid.max_cells,
        },
        "mc": {"n_samples": cfg.mc.n_samples, "delta": cfg.mc.delta},
        "quadrature": {"n_nodes": cfg.quad.n_nodes, "half_width": cfg.quad.half_width},
    }
    if cfg.target_initial is not None:
        doc["scenario"]["target_initial"] = list(cfg.target_initial)
    if cfg.prior_sigma_pos is not None:
        doc["scenario"]["prior_sigma_pos"] = cfg.prior_sigma_pos
    if cfg.grid.max_speed is not None:
        doc["grid"]["max_speed"] = cfg.grid.max_speed
    return doc


def config_hash(cfg: ScenarioConfig) -> str:
    """Short digest of every semantic field except the seed (which is logged per row)."""
    doc = config_to_dict(cfg)
    doc["scenario"].pop("master_seed")
    # channel values pass through dBm, so hash the linear values to avoid round-off
    ch = cfg.channel
    doc["channel"] = {k: float(np.float64(getattr(ch, k))) for k in ("g", "p_on", "q", "sigma_sh", "p_th_mean", "sigma_th")}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
