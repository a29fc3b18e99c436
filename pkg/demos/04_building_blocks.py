"""Tour of the individual building blocks.

Walks through the pieces the missions are assembled from: range sensing and
the EKF, multi-hop packet delivery, the THz scan against a map, the energy
detector, and the projected-gradient navigator.

Run:  python3 demos/04_building_blocks.py
"""

import numpy as np

from uavloc import (CommsConfig, GaussianBelief, MobilityLimits, MotionModel,
                    NavConstraints, Packet, TargetState, ThzRadarParams, UavPose,
                    beacon_observation, build_connectivity, default_indoor_map,
                    disseminate_u2u, ekf_predict, ekf_update, glrt_detect,
                    measure_range, navigate, rng_stream, scan_thz, step_target,
                    vec2)
from uavloc.inference import initial_belief


def main():
    rng = rng_stream(2024, 0)

    print("== Range sensing and tracking ==")
    target = TargetState(position=vec2(40, 25), velocity=vec2(1, 0))
    uavs = [UavPose(id=i + 1, position=vec2(*p))
            for i, p in enumerate([(0, 0), (100, 0), (0, 90), (110, 80)])]
    model = MotionModel.constant_velocity(0.05)
    meas = [measure_range(u, target, sigma=2.5, rng=rng, step=0) for u in uavs]
    belief = initial_belief(meas, fallback_center=(50, 50))
    print(f"trilateration start: {belief.mean[:2].round(1)} (truth {target.position})")
    for t in range(1, 30):
        target = step_target(target, 0.05, rng)
        belief = ekf_predict(belief, model)
        belief = ekf_update(belief, [measure_range(u, target, 2.5, rng, t)
                                     for u in uavs])
    err = np.linalg.norm(belief.mean[:2] - target.position)
    print(f"after 30 steps: estimate {belief.mean[:2].round(2)}, error {err:.2f} m")

    print("\n== Multi-hop delivery over a 4-node chain ==")
    chain = [UavPose(id=i, position=vec2(400.0 * i, 0)) for i in range(4)]
    graph = build_connectivity(chain, range_m=500.0)
    got = sum(bool(disseminate_u2u(graph, [Packet(0, t, None)], 3, 0.2, rng)[3])
              for t in range(2000))
    print(f"node 3 delivery rate {got / 2000:.3f} (three links at 0.8 each: "
          f"{0.8 ** 3:.3f})")

    print("\n== THz scan and detection ==")
    truth = default_indoor_map()
    params = ThzRadarParams()
    pose = UavPose(id=1, position=truth.cell_center(10, 10))
    scan = scan_thz(pose, truth, params, rng, heading=0.0)
    strongest = np.unravel_index(np.argmax(scan.values), scan.values.shape)
    print(f"strongest echo: beam {strongest[0]}, bin {strongest[1]} "
          f"(~{strongest[1] * scan.bin_width_m:.2f} m)")
    noise_mw = 10 ** (params.noise_floor_dbm / 10)
    near = beacon_observation(UavPose(id=1, position=vec2(8.25, 8.25)),
                              vec2(8.75, 8.75), 32, params, rng)
    far = beacon_observation(UavPose(id=1, position=vec2(1.0, 1.0)),
                             vec2(8.75, 8.75), 32, params, rng)
    print(f"beacon near target: detector fires = "
          f"{glrt_detect(near, 1e-3, noise_mw).decision}; "
          f"far away: {glrt_detect(far, 1e-3, noise_mw).decision}")

    print("\n== Projected-gradient navigation ==")
    swarm = [UavPose(id=1, position=vec2(-60, 5)), UavPose(id=2, position=vec2(-60, -5))]
    beliefs = {1: belief, 2: belief}
    constraints = NavConstraints(limits=MobilityLimits(8, 10))
    waypoints = navigate(beliefs, swarm, constraints, model, 2.5 ** 2)
    for uav in swarm:
        step = waypoints[uav.id] - uav.position
        print(f"UAV {uav.id}: step {step.round(2)} "
              f"(|step| = {np.linalg.norm(step):.2f} m)")
    sep = np.linalg.norm(waypoints[1] - waypoints[2])
    print(f"waypoint separation {sep:.2f} m (constraint: >= "
          f"{constraints.d_min_uav} m)")


if __name__ == "__main__":
    main()
