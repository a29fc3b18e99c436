"""Command-line front end: config parsing, seeded batch execution, CSV output.

Two subcommands mirror the scenarios: `track` runs the target-tracking
mission and writes errors.csv + cdf.csv; `explore` runs the mapping and
detection mission and writes qlearn.csv + map.csv. Both accept --counters
to emit the complexity-scaling sweeps as counters.csv. Files are written
atomically (temp file + rename) so a crashed batch never leaves half a CSV.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .comms import CommsConfig
from .control import (Experience, NavConstraints, QParams, QTable, RewardConfig,
                      q_update)
from .core import MobilityLimits
from .inference import (GaussianBelief, InverseScanModel, LogOddsGrid, MotionModel,
                        OpCounters, ekf_predict, ekf_update)
from .scenarios import (ExplorationConfig, TrackingConfig, empirical_cdf,
                        run_exploration, run_tracking)
from .sensing import ThzRadarParams, RangeMeasurement


class ConfigError(ValueError):
    """Malformed or invalid configuration file."""


_NESTED = {
    "comms": CommsConfig,
    "limits": MobilityLimits,
    "constraints": NavConstraints,
    "qparams": QParams,
    "radar": ThzRadarParams,
    "scan_model": InverseScanModel,
    "rewards": RewardConfig,
}


def _build(cls, data: dict, path: str):
    """Instantiate a config dataclass from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or cls.__name__}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path or cls.__name__}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key in _NESTED and isinstance(value, dict):
            kwargs[key] = _build(_NESTED[key], value, where)
        elif isinstance(value, list):
            kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[key] = value
    if cls is NavConstraints and "limits" not in kwargs:
        kwargs["limits"] = MobilityLimits()
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from exc


def parse_config(path, scenario: str):
    """Load a scenario config file (JSON); an empty file means all defaults."""
    cls = TrackingConfig if scenario == "track" else ExplorationConfig
    if path is None:
        return cls()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8").strip()
    if not text:
        return cls()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    cfg = _build(cls, data, "")
    if scenario == "track" and isinstance(cfg.constraints, NavConstraints):
        # Keep the speed interval consistent between the two blocks.
        cfg.constraints.limits = cfg.limits
    return cfg


def config_to_dict(cfg) -> dict:
    """Round-trip helper: emit a config as plain JSON-compatible data."""
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def _atomic_write(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return f"{x:.9g}"


@dataclass
class CliConfig:
    scenario: str
    config_path: str | None
    runs: int
    base_seed: int
    out_dir: str
    counters: bool = False
    comm_log: bool = False

    def __post_init__(self):
        if self.scenario not in ("track", "explore"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")


CDF_THRESHOLDS = np.round(np.arange(0.0, 10.0 + 1e-9, 0.1), 10)


def _scheme_columns(cfg: TrackingConfig) -> tuple[str, float, int, float]:
    if cfg.comms.mode == "edge":
        return "edge", 0.0, cfg.comms.edge_delay, 0.0
    return "u2u", cfg.comms.range_m, 0, cfg.comms.link_loss


def _track_batch(cli: CliConfig, cfg: TrackingConfig, out: Path) -> list[Path]:
    scheme, r_m, delay, loss = _scheme_columns(cfg)
    error_rows = ["run_id,step,uav_id,error_m,scheme,r_m,L,link_loss"]
    comm_rows = ["step,src,dst,hops,dropped"]
    all_errors, burn_errors = [], []
    counters = OpCounters() if cli.counters else None
    for k in range(cli.runs):
        seed = cli.base_seed + k
        result = run_tracking(cfg, seed=seed, counters=counters)
        if result.min_separation < cfg.constraints.d_min_uav - 1e-6:
            raise RuntimeError(
                f"run {k}: anti-collision violated (min separation "
                f"{result.min_separation:.3f} m)")
        for t in range(cfg.steps):
            for u in range(cfg.n_uavs):
                error_rows.append(
                    f"{k},{t},{u + 1},{_fmt(result.errors[t, u])},{scheme},"
                    f"{_fmt(r_m)},{delay},{_fmt(loss)}")
        for step, src, dst, hops, dropped in result.comm_events:
            comm_rows.append(f"{step},{src},{dst},{hops},{dropped}")
        all_errors.append(result.errors)
        burn_errors.append(result.errors[cfg.burn_in:])
        print(f"run {k} seed {seed}: mean error "
              f"{result.errors[cfg.burn_in:].mean():.2f} m, "
              f"CDF(2m) {np.mean(result.errors[cfg.burn_in:] <= 2.0):.3f}")

    written = []

    def emit(name, rows):
        path = out / name
        _atomic_write(path, rows)
        written.append(path)

    emit("errors.csv", error_rows)
    for name, pool in (("cdf.csv", all_errors), ("cdf_burnin.csv", burn_errors)):
        curve = empirical_cdf(np.concatenate([e.ravel() for e in pool]),
                              CDF_THRESHOLDS)
        rows = ["scheme,r_m,L,threshold_m,cdf"]
        rows += [f"{scheme},{_fmt(r_m)},{delay},{_fmt(t)},{_fmt(c)}"
                 for t, c in zip(CDF_THRESHOLDS, curve)]
        emit(name, rows)
    if cli.comm_log:
        emit("comms.csv", comm_rows)
    if counters is not None:
        emit("counters.csv", _counter_rows())
    return written


def _explore_batch(cli: CliConfig, cfg: ExplorationConfig, out: Path) -> list[Path]:
    q_rows = ["run_id,episode,n_uavs,positive_q_sum,map_accuracy,coverage"]
    map_rows = ["run_id,episode,cell_x,cell_y,log_odds"]
    counters = OpCounters() if cli.counters else None
    for k in range(cli.runs):
        seed = cli.base_seed + k
        result = run_exploration(cfg, seed=seed, counters=counters)
        if np.any(result.episode_lengths > cfg.mission_time):
            raise RuntimeError(f"run {k}: an episode exceeded the mission time")
        for e in range(cfg.episodes):
            q_rows.append(f"{k},{e},{cfg.n_uavs},{_fmt(result.positive_q[e])},"
                          f"{_fmt(result.map_accuracy[e])},{_fmt(result.coverage[e])}")
            grid = result.merged_grids[e]
            for ix in range(grid.shape[0]):
                for iy in range(grid.shape[1]):
                    map_rows.append(f"{k},{e},{ix},{iy},{_fmt(grid[ix, iy])}")
        print(f"run {k} seed {seed}: final positive-Q "
              f"{result.positive_q[-1]:.1f}, accuracy {result.map_accuracy[-1]:.3f}")

    written = []
    for name, rows in (("qlearn.csv", q_rows), ("map.csv", map_rows)):
        path = out / name
        _atomic_write(path, rows)
        written.append(path)
    if counters is not None:
        path = out / "counters.csv"
        _atomic_write(path, _counter_rows())
        written.append(path)
    return written


def _counter_rows() -> list[str]:
    """Complexity-verification sweeps: operation counts over problem sizes."""
    rows = ["routine,dimension,multiplies,adds"]
    rng = np.random.default_rng(0)

    for d in (2, 4, 8, 16):
        c = OpCounters()
        n = 2 * d
        model = MotionModel.constant_velocity(0.1, dims=d)
        ekf_predict(GaussianBelief(np.zeros(n), np.eye(n)), model, counters=c)
        m, a = c.report("ekf_predict_cov")
        rows.append(f"ekf_predict_cov,{n},{m},{a}")

    for m_count in (8, 16, 32, 64):
        c = OpCounters()
        belief = GaussianBelief(np.zeros(4), np.eye(4) * 100.0)
        meas = []
        for i in range(m_count):
            pos = rng.uniform(-100, 100, size=2)
            meas.append(RangeMeasurement(uav_id=i, timestamp=0,
                                         range_m=float(np.linalg.norm(pos)) + 1.0,
                                         uav_position=pos, noise_var=1.0))
        ekf_update(belief, meas, counters=c)
        m, a = c.report("ekf_gain")
        rows.append(f"ekf_gain,{m_count},{m},{a}")

    from .inference import og_update
    from .sensing import EnergyMatrix
    for w in (20, 40, 80, 160):
        c = OpCounters()
        grid = LogOddsGrid.blank(w, 3)
        n_bins = int(np.ceil(np.hypot(w, 3) * 0.5 / 0.15))
        values = np.full((1, n_bins), -120.0)
        far = (w - 0.5) * 0.5 - 0.25
        values[0, round(far / 0.15)] = -40.0
        scan = EnergyMatrix(values=values, angles=np.array([0.0]), bin_width_m=0.15)
        og_update(grid, scan, pose=(0.25, 0.75), model=InverseScanModel(), counters=c)
        m, a = c.report("og_update")
        rows.append(f"og_update,{w},{m},{a}")

    for n_actions in (8, 16, 32, 64, 128):
        c = OpCounters()
        table = QTable(4, n_actions)
        q_update(table, Experience(1, 0, 0, reward=1.0, next_state=1, step=0),
                 QParams(), counters=c)
        m, a = c.report("q_update")
        rows.append(f"q_update,{n_actions},{m},{a}")
    return rows


def run_batch(cli: CliConfig) -> int:
    """Execute the batch; returns the process exit status."""
    out = Path(cli.out_dir)
    try:
        cfg = parse_config(cli.config_path, cli.scenario)
        if cli.scenario == "track":
            written = _track_batch(cli, cfg, out)
        else:
            written = _explore_batch(cli, cfg, out)
    except (ConfigError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest = {"status": "failed", "error": str(exc),
                    "scenario": cli.scenario, "runs_requested": cli.runs}
        _atomic_write(out / "manifest.json", [json.dumps(manifest, indent=2)])
        return 1
    manifest = {"status": "ok", "scenario": cli.scenario, "runs": cli.runs,
                "base_seed": cli.base_seed,
                "files": [p.name for p in written]}
    _atomic_write(out / "manifest.json", [json.dumps(manifest, indent=2)])
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uavloc",
        description="Deterministic multi-UAV localization simulator")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name, blurb in (("track", "four-UAV target tracking mission"),
                        ("explore", "indoor mapping and detection mission")):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--runs", type=int, default=1, help="number of seeded runs")
        p.add_argument("--seed", type=int, default=0, help="base seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--counters", action="store_true",
                       help="emit complexity-scaling counters.csv")
        p.add_argument("--comm-log", action="store_true",
                       help="emit per-link comm events (track only)")
    args = parser.parse_args(argv)
    try:
        cli = CliConfig(scenario=args.scenario, config_path=args.config,
                        runs=args.runs, base_seed=args.seed, out_dir=args.out,
                        counters=args.counters, comm_log=args.comm_log)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_batch(cli)


if __name__ == "__main__":
    sys.exit(main())
