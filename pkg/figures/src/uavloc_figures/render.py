"""The three figure kinds: error CDFs, learning curves, occupancy heatmaps.

Rendering is read-only over its inputs and deterministic: a fixed style,
the Agg backend, and no clock-dependent state, so identical inputs yield
identical images.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .io import SchemaError, load_many, load_rows  # noqa: E402

DPI = 120


def _save(fig, out_path):
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)


def _group_label(scheme: str, r_m: float, delay: float) -> str:
    if scheme == "edge":
        return f"edge, L={delay:g}"
    return f"u2u, r={r_m:g} m"


def render_cdf(in_paths, out_path) -> None:
    """One curve per (scheme, r_m, L) group found across the input files."""
    rows = load_many(in_paths, "cdf")
    groups: dict[tuple, list] = {}
    for row in rows:
        key = (row["scheme"], row["r_m"], row["L"])
        groups.setdefault(key, []).append((row["threshold_m"], row["cdf"]))

    fig, ax = plt.subplots(figsize=(6, 4))
    for key in sorted(groups):
        pts = sorted(groups[key])
        thresholds = [t for t, _ in pts]
        values = [v for _, v in pts]
        if min(values) < 0 or max(values) > 1:
            raise SchemaError(f"cdf values for group {key} fall outside [0, 1]")
        ax.plot(thresholds, values, label=_group_label(*key))
    ax.set_xlabel("localization error threshold [m]")
    ax.set_ylabel("empirical CDF")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, out_path)


def render_qcurve(in_paths, out_path) -> None:
    """Mean positive-Q per episode with a +-1 std band, one curve per swarm size."""
    rows = load_many(in_paths, "qlearn")
    by_size: dict[int, dict[int, list]] = {}
    for row in rows:
        size = int(row["n_uavs"])
        by_size.setdefault(size, {}).setdefault(int(row["episode"]), []).append(
            row["positive_q_sum"])

    fig, ax = plt.subplots(figsize=(6, 4))
    for size in sorted(by_size):
        episodes = sorted(by_size[size])
        means = np.array([np.mean(by_size[size][e]) for e in episodes])
        stds = np.array([np.std(by_size[size][e]) for e in episodes])
        label = f"{size} UAV" + ("s" if size != 1 else "")
        ax.plot(episodes, means, label=label)
        ax.fill_between(episodes, means - stds, means + stds, alpha=0.2)
    ax.set_xlabel("episode")
    ax.set_ylabel("positive Q-value sum")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, out_path)


def render_map(in_paths, out_path, run_id: int | None = None,
               episode: int | None = None, trajectory_path=None) -> None:
    """Diverging log-odds heatmap for one (run, episode), trajectories optional.

    Defaults to the first run and its last episode present in the data. A
    trajectory file is a CSV with x,y columns (and an optional uav_id column
    to split tracks)."""
    rows = load_many(in_paths, "map")
    if run_id is None:
        run_id = int(min(r["run_id"] for r in rows))
    chosen = [r for r in rows if int(r["run_id"]) == run_id]
    if not chosen:
        raise SchemaError(f"run_id {run_id} not present in the input")
    if episode is None:
        episode = int(max(r["episode"] for r in chosen))
    cells = [r for r in chosen if int(r["episode"]) == episode]
    if not cells:
        raise SchemaError(f"episode {episode} not present for run {run_id}")

    width = int(max(r["cell_x"] for r in cells)) + 1
    height = int(max(r["cell_y"] for r in cells)) + 1
    grid = np.zeros((width, height))
    for r in cells:
        grid[int(r["cell_x"]), int(r["cell_y"])] = r["log_odds"]

    fig, ax = plt.subplots(figsize=(5, 5))
    limit = max(float(np.max(np.abs(grid))), 1e-9)
    image = ax.imshow(grid.T, origin="lower", cmap="RdBu_r",
                      vmin=-limit, vmax=limit)
    fig.colorbar(image, ax=ax, label="log-odds")
    if trajectory_path is not None:
        tracks = _load_trajectories(trajectory_path)
        for uav_id, (xs, ys) in sorted(tracks.items()):
            ax.plot(xs, ys, marker=".", markersize=3, linewidth=1.0,
                    label=f"UAV {uav_id}" if uav_id is not None else "trajectory")
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel("cell x")
    ax.set_ylabel("cell y")
    ax.set_title(f"run {run_id}, episode {episode}")
    fig.tight_layout()
    _save(fig, out_path)


def _load_trajectories(path):
    import csv
    from pathlib import Path

    p = Path(path)
    if not p.exists():
        raise SchemaError(f"trajectory file not found: {path}")
    tracks: dict = {}
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "x" not in header or "y" not in header:
            raise SchemaError(f"{path}: trajectory file needs x and y columns")
        for row in reader:
            key = int(row["uav_id"]) if "uav_id" in header else None
            xs, ys = tracks.setdefault(key, ([], []))
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
    if not tracks:
        raise SchemaError(f"{path}: no trajectory rows")
    return tracks
