"""Acceptance: the three figure kinds render from the bundled samples, CDF
curves stay within [0, 1], and the bundled learning-curve sample shows the
two-UAV swarm above the single UAV."""

from pathlib import Path

import numpy as np

from uavloc_figures.cli import main
from uavloc_figures.io import load_rows

DATA = Path(__file__).parent / "data"


def test_all_three_kinds_render_from_bundled_samples(tmp_path):
    jobs = (("cdf", "cdf_sample.csv"), ("qcurve", "qlearn_sample.csv"),
            ("map", "map_sample.csv"))
    for kind, sample in jobs:
        out = tmp_path / f"{kind}.png"
        assert main([kind, "--in", str(DATA / sample), "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 0
    print("\nACCEPTANCE figures-render: PASS (cdf, qcurve, map)")


def test_bundled_cdf_sample_is_within_unit_range():
    rows = load_rows(DATA / "cdf_sample.csv", "cdf")
    values = [r["cdf"] for r in rows]
    assert 0.0 <= min(values) and max(values) <= 1.0
    print("\nACCEPTANCE figures-cdf-range: PASS")


def test_bundled_qlearn_sample_shows_two_uav_advantage():
    rows = load_rows(DATA / "qlearn_sample.csv", "qlearn")
    means: dict[int, dict[int, list]] = {}
    for r in rows:
        means.setdefault(int(r["n_uavs"]), {}).setdefault(
            int(r["episode"]), []).append(r["positive_q_sum"])
    episodes = sorted(means[1])
    one = np.array([np.mean(means[1][e]) for e in episodes])
    two = np.array([np.mean(means[2][e]) for e in episodes])
    assert np.all(two > one)
    print("\nACCEPTANCE figures-two-vs-one: PASS (2-UAV curve dominates)")
