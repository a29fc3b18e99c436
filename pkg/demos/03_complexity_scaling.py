"""Verify how the core routines' arithmetic cost scales with problem size.

Each routine runs under operation counters over a sweep of sizes; the
log-log slope of (total operations) vs (size) is the empirical scaling
order. Expected: cubic covariance prediction, cubic gain computation in the
measurement count, linear occupancy update in cells per beam, linear
Q-update in the action count.

Run:  python3 demos/03_complexity_scaling.py
"""

import numpy as np

from uavloc import (Experience, GaussianBelief, MotionModel, OpCounters, QParams,
                    QTable, ekf_predict, ekf_update, fit_exponent, og_update,
                    q_update)
from uavloc.inference import InverseScanModel, LogOddsGrid
from uavloc.sensing import EnergyMatrix, RangeMeasurement


def sweep(label, sizes, run_one):
    totals = []
    for size in sizes:
        counters = OpCounters()
        routine = run_one(size, counters)
        totals.append(counters.total(routine))
    slope = fit_exponent(sizes, totals)
    print(f"{label:<38} sizes {list(sizes)}")
    print(f"{'':<38} ops   {totals}  ->  order {slope:.2f}")
    return slope


def predict_case(dims, counters):
    n = 2 * dims
    model = MotionModel.constant_velocity(0.1, dims=dims)
    ekf_predict(GaussianBelief(np.zeros(n), np.eye(n)), model, counters=counters)
    return "ekf_predict_cov"


def gain_case(m, counters, rng=np.random.default_rng(1)):
    meas = []
    for i in range(m):
        pos = rng.uniform(-100, 100, size=2)
        meas.append(RangeMeasurement(uav_id=i, timestamp=0,
                                     range_m=float(np.linalg.norm(pos)) + 1.0,
                                     uav_position=pos, noise_var=1.0))
    ekf_update(GaussianBelief(np.zeros(4), np.eye(4) * 100.0), meas,
               counters=counters)
    return "ekf_gain"


def og_case(width, counters):
    grid = LogOddsGrid.blank(width, 3)
    n_bins = int(np.ceil(np.hypot(width, 3) * 0.5 / 0.15))
    values = np.full((1, n_bins), -120.0)
    values[0, round(((width - 0.5) * 0.5 - 0.25) / 0.15)] = -40.0
    scan = EnergyMatrix(values=values, angles=np.array([0.0]), bin_width_m=0.15)
    og_update(grid, scan, pose=(0.25, 0.75), model=InverseScanModel(),
              counters=counters)
    return "og_update"


def q_case(n_actions, counters):
    q_update(QTable(4, n_actions), Experience(1, 0, 0, 1.0, 1, 0), QParams(),
             counters=counters)
    return "q_update"


def main():
    print("Empirical scaling orders from operation counters:\n")
    sweep("covariance prediction vs state dim", [4, 8, 16, 32],
          lambda n, c: predict_case(n // 2, c))
    sweep("gain computation vs measurement count", [8, 16, 32, 64], gain_case)
    sweep("occupancy update vs cells per beam", [20, 40, 80, 160], og_case)
    sweep("Q-update vs action count", [8, 16, 32, 64, 128], q_case)


if __name__ == "__main__":
    main()
