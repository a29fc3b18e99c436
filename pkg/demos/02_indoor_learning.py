"""Indoor mapping and detection with an edge-fused Q-table.

Runs the exploration mission with one and with two UAVs sharing the table,
prints the positive-Q learning curves, and renders the final reconstructed
map next to the ground truth as ASCII art.

Run:  python3 demos/02_indoor_learning.py [n_seeds]
"""

import sys

import numpy as np

from uavloc import ExplorationConfig, default_indoor_map, run_exploration


def ascii_map(values, truth):
    rows = []
    for iy in range(truth.height - 1, -1, -1):
        est = "".join("#" if values[ix, iy] > 0 else
                      ("." if values[ix, iy] < 0 else " ")
                      for ix in range(truth.width))
        ref = "".join("#" if truth.occupancy[ix, iy] else "."
                      for ix in range(truth.width))
        rows.append(f"  {ref}    {est}")
    return "\n".join(rows)


def main():
    n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    curves = {}
    last = None
    for n_uavs, starts in ((1, ((2.0, 3.0),)), (2, ((2.0, 3.0), (2.0, 8.0)))):
        cfg = ExplorationConfig(uav_starts=starts)
        runs = [run_exploration(cfg, seed=s) for s in range(n_seeds)]
        curves[n_uavs] = np.mean([r.positive_q for r in runs], axis=0)
        if n_uavs == 2:
            last = runs[0]

    print(f"Mean positive-Q per episode over {n_seeds} seeds:")
    print(f"{'episode':>7} {'1 UAV':>12} {'2 UAVs':>12}")
    for e in range(len(curves[1])):
        print(f"{e:7d} {curves[1][e]:12.1f} {curves[2][e]:12.1f}")
    half2 = int(np.argmax(curves[2] >= 0.5 * curves[2][-1]))
    half1 = int(np.argmax(curves[1] >= 0.5 * curves[1][-1]))
    print(f"\nEpisodes to reach half the final positive-Q: "
          f"2 UAVs -> {half2}, 1 UAV -> {half1}")

    truth = default_indoor_map()
    print("\nGround truth (left) vs merged final-episode belief (right);")
    print("'#' occupied, '.' free, ' ' unobserved:\n")
    print(ascii_map(last.merged_grids[-1], truth))
    acc, cov = last.map_accuracy[-1], last.coverage[-1]
    print(f"\nfinal map accuracy {acc:.3f} at coverage {cov:.3f}")


if __name__ == "__main__":
    main()
