"""End-to-end mission scenarios over seeded Monte Carlo runs.

Two missions are provided: tracking a moving target with a four-UAV swarm
under U2U or edge-assisted communication, and exploring an indoor map with
one or two UAVs that share an edge-fused Q-table while mapping and hunting
a beacon target. Both are bit-deterministic per (config, seed).
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .comms import (CommsConfig, EdgeQueue, MapSummary, Packet,
                    build_connectivity, disseminate_u2u)
from .control import (Experience, NavConstraints, QParams, QTable, RewardConfig,
                      epsilon_at, fallback_orbit, fuse_experiences, navigate,
                      project_step, q_select_action)
from .core import (MobilityLimits, TargetState, UavPose, rng_stream, step_target,
                   step_uav, vec2)
from .inference import (GaussianBelief, InverseScanModel, LogOddsGrid, MotionModel,
                        OpCounters, ekf_predict, ekf_update, glrt_detect,
                        initial_belief, og_update)
from .sensing import (RangeMeasurement, ThzRadarParams, TrueMap, beacon_observation,
                      measure_range, scan_thz)

# RNG stream ids per entity kind, so adding an entity never perturbs others.
_STREAM_TARGET = 0
_STREAM_COMM = 1
_STREAM_SENSOR = 100   # + uav id
_STREAM_SCAN = 300     # + uav id
_STREAM_BEACON = 400   # + uav id
_STREAM_ACTION = 500   # + uav id

# The four actions of the exploration grid world: N, S, E, W.
ACTION_OFFSETS = ((0, 1), (0, -1), (1, 0), (-1, 0))
ACTION_HEADINGS = (math.pi / 2, -math.pi / 2, 0.0, math.pi)


# ---------------------------------------------------------------------------
# Use case 1: target tracking


@dataclass
class TrackingConfig:
    """Four-UAV tracking mission (defaults reproduce the headline setup)."""

    comms: CommsConfig = field(default_factory=CommsConfig)
    steps: int = 200
    sigma_range: float = 2.5
    accel_std: float = 0.05
    limits: MobilityLimits = field(default_factory=MobilityLimits)
    constraints: NavConstraints | None = None
    # Start box chosen so that r=1 km is fully connected one-hop while UAV #2
    # begins isolated at r=0.5 km.
    uav_starts: tuple = ((-350.0, 200.0), (550.0, 380.0), (-280.0, -140.0), (-100.0, 0.0))
    target_start: tuple = (75.0, -50.0)  # off-center in the patrol region
    target_velocity: tuple = (1.0, 0.0)  # 1 m/step initial speed
    prior_center: tuple = (0.0, 0.0)     # center of the patrol region
    orbit_radius: float = 100.0
    measurement_buffer: int = 5
    burn_in: int = 20
    # The edge can afford a costlier filter than the on-board trackers.
    edge_filter_iterations: int = 3
    # UAVs propagate the received estimate over its known age (one cheap
    # mean prediction per delay step).
    dead_reckon: bool = True

    def __post_init__(self):
        if self.constraints is None:
            self.constraints = NavConstraints(limits=self.limits)
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.sigma_range <= 0:
            raise ValueError("sigma_range must be positive")
        if len(self.uav_starts) < 1:
            raise ValueError("need at least one UAV")
        if self.measurement_buffer < 0:
            raise ValueError("measurement_buffer cannot be negative")
        if not (0 <= self.burn_in < self.steps):
            raise ValueError("burn_in must lie within the mission")

    @property
    def n_uavs(self) -> int:
        return len(self.uav_starts)

    @property
    def scheme_label(self) -> str:
        return self.comms.mode


@dataclass
class TrackingResult:
    errors: np.ndarray            # (steps, n_uavs) localization error per UAV
    uav_trajectories: np.ndarray  # (steps + 1, n_uavs, 2)
    target_trajectory: np.ndarray  # (steps + 1, 2)
    belief_trace: list            # (step, uav_id, mean_x, mean_y, cov_trace)
    comm_events: list             # (step, src, dst, hops, dropped)
    min_separation: float
    counters: OpCounters | None = None


def _enforce_separation(positions: np.ndarray, steps: np.ndarray, d_min: float,
                        v_max: float) -> np.ndarray:
    """Local sense-and-avoid pass: jointly correct the committed steps so no
    pair lands closer than d_min. Runs on true positions, mirroring the
    on-board anti-collision that is never delegated."""
    n = positions.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    flat = steps.reshape(-1).copy()

    def residuals_of(s):
        moved = positions + s.reshape(n, 2)
        return np.array([np.linalg.norm(moved[i] - moved[j]) - d_min
                         for i, j in pairs])

    for _ in range(5):
        res = residuals_of(flat)
        if np.all(res >= -1e-6):
            break
        moved = positions + flat.reshape(n, 2)
        rows = []
        active = []
        for k, (i, j) in enumerate(pairs):
            if res[k] >= 1e-9:
                continue
            diff = moved[i] - moved[j]
            dist = float(np.linalg.norm(diff))
            u = diff / dist if dist > 0 else np.array([1.0, 0.0])
            row = np.zeros(2 * n)
            row[2 * i:2 * i + 2] = u
            row[2 * j:2 * j + 2] = -u
            rows.append(row)
            active.append(k)

        def active_residual(s, idx=tuple(active)):
            return residuals_of(s)[list(idx)]

        flat = project_step(flat, np.array(rows), residual_fn=active_residual)
        per = flat.reshape(n, 2)
        speeds = np.linalg.norm(per, axis=1)
        over = speeds > v_max * (1 + 1e-9)
        if over.any():
            per[over] *= (v_max / speeds[over])[:, None]
        flat = per.reshape(-1)

    # Hard guarantee: whoever is still on a violated pair stays put; the
    # previous positions satisfied the constraint, so this always terminates
    # in a feasible state.
    for _ in range(n * n):
        res = residuals_of(flat)
        bad = np.flatnonzero(res < -1e-9)
        if bad.size == 0:
            break
        per = flat.reshape(n, 2)
        for k in bad:
            i, j = pairs[k]
            per[i] = 0.0
            per[j] = 0.0
        flat = per.reshape(-1)
    return flat.reshape(n, 2)


class _TrackerState:
    """Per-inference-node EKF wrapper handling lazy initialization."""

    def __init__(self, model: MotionModel, prior_center, counters=None,
                 iterations: int = 1):
        self.model = model
        self.prior_center = np.asarray(prior_center, dtype=float)
        self.belief: GaussianBelief | None = None
        self.counters = counters
        self.iterations = iterations

    def advance(self, batch: list[RangeMeasurement]) -> None:
        batch = sorted(batch, key=lambda m: (m.timestamp, m.uav_id))
        if self.belief is None:
            if not batch:
                return
            self.belief = initial_belief(batch, self.prior_center)
        else:
            self.belief = ekf_predict(self.belief, self.model, self.counters)
        if batch:
            self.belief = ekf_update(self.belief, batch, self.counters,
                                     iterations=self.iterations)

    @property
    def mean_position(self) -> np.ndarray:
        if self.belief is None:
            return self.prior_center
        return self.belief.mean[:2]


def run_tracking(config: TrackingConfig, seed: int,
                 counters: OpCounters | None = None) -> TrackingResult:
    """Simulate one tracking mission and record per-step localization errors."""
    n = config.n_uavs
    ids = list(range(1, n + 1))
    model = MotionModel.constant_velocity(config.accel_std)
    target = TargetState(position=vec2(*config.target_start),
                         velocity=vec2(*config.target_velocity))
    uavs = {i: UavPose(id=i, position=vec2(*config.uav_starts[k]))
            for k, i in enumerate(ids)}

    target_rng = rng_stream(seed, _STREAM_TARGET)
    comm_rng = rng_stream(seed, _STREAM_COMM)
    sensor_rng = {i: rng_stream(seed, _STREAM_SENSOR + i) for i in ids}

    edge_mode = config.comms.mode == "edge"
    delay = config.comms.edge_delay
    up_queue = EdgeQueue(delay=delay)
    down_queue = EdgeQueue(delay=delay if config.comms.delay_mode == "each_way" else 0)
    edge_tracker = _TrackerState(model, config.prior_center, counters,
                                 iterations=config.edge_filter_iterations)

    trackers = {i: _TrackerState(model, config.prior_center, counters) for i in ids}
    pending: dict[int, list] = {i: [] for i in ids}  # (deliver_step, packet)
    last_positions: dict[int, dict[int, np.ndarray]] = {i: {} for i in ids}
    commands: dict[int, np.ndarray | None] = {i: None for i in ids}
    received: dict[int, tuple | None] = {i: None for i in ids}
    uav_beliefs: dict[int, np.ndarray] = {i: np.asarray(config.prior_center, float)
                                          for i in ids}

    errors = np.zeros((config.steps, n))
    traj = np.zeros((config.steps + 1, n, 2))
    target_traj = np.zeros((config.steps + 1, 2))
    traj[0] = [uavs[i].position for i in ids]
    target_traj[0] = target.position
    belief_trace: list = []
    comm_events: list = []
    min_separation = math.inf

    for t in range(config.steps):
        target = step_target(target, config.accel_std, target_rng)

        packets = []
        for i in ids:
            meas = measure_range(uavs[i], target, config.sigma_range,
                                 sensor_rng[i], step=t)
            packets.append(Packet(src_id=i, created_step=t, payload=meas))

        waypoints: dict[int, np.ndarray | None] = {i: None for i in ids}

        if edge_mode:
            for pkt in packets:
                up_queue.enqueue(pkt, now=t)
            arrivals = up_queue.deliver(now=t)
            if arrivals:
                batch = [p.payload for p in arrivals]
                edge_tracker.advance(batch)
                # Position telemetry is light control traffic and arrives
                # fresh; only the sensed payload pays the delay L.
                swarm_view = [UavPose(id=i, position=uavs[i].position) for i in ids]
                beliefs = {i: edge_tracker.belief for i in ids}
                cmd = navigate(beliefs, swarm_view, config.constraints, model,
                               config.sigma_range ** 2, counters)
                data_step = max(m.timestamp for m in batch)
                payload = {"waypoints": cmd, "mean": edge_tracker.belief.mean.copy(),
                           "data_step": data_step}
                down_queue.enqueue(Packet(src_id=0, created_step=t, payload=payload),
                                   now=t)
            for pkt in down_queue.deliver(now=t):
                for i in ids:
                    commands[i] = pkt.payload["waypoints"][i]
                    received[i] = (pkt.payload["mean"], pkt.payload["data_step"])
            for i in ids:
                waypoints[i] = commands[i]
                if received[i] is not None:
                    mean, data_step = received[i]
                    if config.dead_reckon:
                        for _ in range(t - data_step):
                            mean = model.transition @ mean
                    uav_beliefs[i] = mean[:2]
        else:
            graph = build_connectivity(list(uavs.values()), config.comms.range_m)
            inbox = disseminate_u2u(graph, packets, config.comms.max_hops,
                                    config.comms.link_loss, comm_rng,
                                    events=comm_events)
            for i in ids:
                for pkt in inbox[i]:
                    pending[i].append((pkt.created_step + pkt.hops_traversed, pkt))
            for i in ids:
                due = [pkt for ds, pkt in pending[i] if ds <= t]
                pending[i] = [(ds, pkt) for ds, pkt in pending[i] if ds > t]
                fresh = [pkt.payload for pkt in due
                         if pkt.payload.timestamp >= t - config.measurement_buffer]
                trackers[i].advance(fresh)
                uav_beliefs[i] = trackers[i].mean_position
                for m in fresh:
                    last_positions[i][m.uav_id] = m.uav_position
                sources = {m.uav_id for m in fresh}
                if len(sources) < 2:
                    waypoints[i] = fallback_orbit(uavs[i], trackers[i].mean_position,
                                                  config.orbit_radius, config.limits)
                else:
                    swarm_view = [uavs[i]] + [
                        UavPose(id=j, position=pos)
                        for j, pos in sorted(last_positions[i].items()) if j != i]
                    beliefs = {p.id: trackers[i].belief for p in swarm_view}
                    cmd = navigate(beliefs, swarm_view, config.constraints, model,
                                   config.sigma_range ** 2, counters)
                    waypoints[i] = cmd[i]

        # Commit moves: clamp each displacement into the speed interval, then
        # run the local anti-collision pass on true positions.
        positions = np.array([uavs[i].position for i in ids])
        steps_arr = np.zeros((n, 2))
        for k, i in enumerate(ids):
            wp = waypoints[i]
            if wp is None:
                continue
            offset = np.asarray(wp, dtype=float) - positions[k]
            dist = float(np.linalg.norm(offset))
            if dist <= 1e-9:
                continue
            steps_arr[k] = step_uav(uavs[i], wp, config.limits).position - positions[k]
        if n > 1:
            steps_arr = _enforce_separation(positions, steps_arr,
                                            config.constraints.d_min_uav,
                                            config.limits.v_max)
        for k, i in enumerate(ids):
            uavs[i] = UavPose(id=i, position=positions[k] + steps_arr[k])

        moved = positions + steps_arr
        if n > 1:
            dists = [np.linalg.norm(moved[a] - moved[b])
                     for a in range(n) for b in range(a + 1, n)]
            min_separation = min(min_separation, min(dists))

        for k, i in enumerate(ids):
            errors[t, k] = float(np.linalg.norm(uav_beliefs[i] - target.position))
            node = edge_tracker if edge_mode else trackers[i]
            if node.belief is not None:
                belief_trace.append((t, i, float(node.belief.mean[0]),
                                     float(node.belief.mean[1]),
                                     float(np.trace(node.belief.cov))))
        traj[t + 1] = [uavs[i].position for i in ids]
        target_traj[t + 1] = target.position

    return TrackingResult(errors=errors, uav_trajectories=traj,
                          target_trajectory=target_traj, belief_trace=belief_trace,
                          comm_events=comm_events, min_separation=float(min_separation),
                          counters=counters)


# ---------------------------------------------------------------------------
# Use case 2: exploration, mapping, detection


def default_indoor_map() -> TrueMap:
    """The bundled 20 x 20 indoor map (0.5 m cells, walled border)."""
    text = importlib.resources.files("uavloc.data").joinpath("indoor_20x20.txt").read_text()
    return TrueMap.from_text(text)


@dataclass
class ExplorationConfig:
    """Indoor mapping-and-detection mission for one or two UAVs."""

    map_path: str | None = None
    uav_starts: tuple = ((2.0, 3.0), (2.0, 8.0))
    target_position: tuple = (8.5, 8.5)
    episodes: int = 20
    mission_time: int = 200
    qparams: QParams = field(default_factory=QParams)
    radar: ThzRadarParams = field(default_factory=ThzRadarParams)
    scan_model: InverseScanModel = field(default_factory=InverseScanModel)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    pfa: float = 1e-3
    beacon_samples: int = 32
    reading_range_m: float = 7.35

    def __post_init__(self):
        if self.episodes < 1 or self.mission_time < 1:
            raise ValueError("episodes and mission_time must be positive")
        if not (0.0 < self.pfa < 1.0):
            raise ValueError("pfa must lie in (0, 1)")
        if self.qparams.steps_per_episode != self.mission_time:
            self.qparams = replace(self.qparams, steps_per_episode=self.mission_time)

    @property
    def n_uavs(self) -> int:
        return len(self.uav_starts)

    def load_map(self) -> TrueMap:
        grid = (TrueMap.from_file(self.map_path) if self.map_path
                else default_indoor_map())
        for start in self.uav_starts:
            if grid.is_occupied(vec2(*start)):
                raise ValueError(f"UAV start {start} lies in an occupied cell")
        if grid.is_occupied(vec2(*self.target_position)):
            raise ValueError("target position lies in an occupied cell")
        return grid


@dataclass
class ExplorationResult:
    positive_q: np.ndarray      # per episode
    map_accuracy: np.ndarray    # per episode, merged grid
    coverage: np.ndarray        # per episode, merged grid
    episode_lengths: np.ndarray
    merged_grids: list          # per episode (W, H) log-odds array
    qtable: QTable
    experience_log: list        # (episode, Experience)
    map_summaries: list         # MapSummary sent to the edge
    counters: OpCounters | None = None


def _cell_index(ix: int, iy: int, height: int) -> int:
    return ix * height + iy


def run_exploration(config: ExplorationConfig, seed: int,
                    counters: OpCounters | None = None) -> ExplorationResult:
    """Simulate one learning mission over the configured episodes."""
    truth = config.load_map()
    w, h = truth.width, truth.height
    ids = list(range(1, config.n_uavs + 1))
    start_cells = {i: truth.world_to_cell(vec2(*config.uav_starts[k]))
                   for k, i in enumerate(ids)}
    target_cell = truth.world_to_cell(vec2(*config.target_position))
    target_center = truth.cell_center(*target_cell)
    noise_mw = 10.0 ** (config.radar.noise_floor_dbm / 10.0)

    scan_rng = {i: rng_stream(seed, _STREAM_SCAN + i) for i in ids}
    beacon_rng = {i: rng_stream(seed, _STREAM_BEACON + i) for i in ids}
    action_rng = {i: rng_stream(seed, _STREAM_ACTION + i) for i in ids}

    qtable = QTable(n_states=w * h, n_actions=4)
    scan_cache: dict = {}
    og_cache: dict = {}

    positive_q = np.zeros(config.episodes)
    accuracy = np.zeros(config.episodes)
    coverage = np.zeros(config.episodes)
    lengths = np.zeros(config.episodes, dtype=int)
    merged_grids: list = []
    experience_log: list = []
    summaries: list = []

    for episode in range(config.episodes):
        cells = dict(start_cells)
        headings = {i: 0.0 for i in ids}
        grids = {i: LogOddsGrid.blank(w, h, truth.cell_size, truth.origin) for i in ids}
        counted = {i: np.zeros((w, h), dtype=bool) for i in ids}
        detected = False

        for step in range(config.mission_time):
            epsilon = epsilon_at(config.qparams, episode, step)
            batch: list[Experience] = []
            for i in ids:
                pose = UavPose(id=i, position=truth.cell_center(*cells[i]))
                scan = scan_thz(pose, truth, config.radar, scan_rng[i],
                                heading=headings[i], cache=scan_cache)
                og_update(grids[i], scan, pose.position, config.scan_model,
                          counters=counters, cache=og_cache)
                crossed = (np.abs(grids[i].values) >= config.rewards.mapped_threshold) \
                    & ~counted[i]
                newly = int(np.count_nonzero(crossed))
                counted[i][crossed] = True

                samples = beacon_observation(pose, target_center,
                                             config.beacon_samples, config.radar,
                                             beacon_rng[i], config.reading_range_m)
                firing = glrt_detect(samples, config.pfa, noise_power=noise_mw).decision

                state = _cell_index(*cells[i], h)
                action = q_select_action(qtable, state, epsilon, action_rng[i])
                dx, dy = ACTION_OFFSETS[action]
                nx, ny = cells[i][0] + dx, cells[i][1] + dy
                reward = config.rewards.step_cost + config.rewards.new_cell * newly
                if not truth.in_bounds(nx, ny) or truth.occupancy[nx, ny]:
                    reward += config.rewards.blocked
                    nx, ny = cells[i]
                else:
                    cells[i] = (nx, ny)
                    headings[i] = ACTION_HEADINGS[action]

                if firing and max(abs(nx - target_cell[0]), abs(ny - target_cell[1])) <= 1:
                    reward += config.rewards.detection
                    detected = True

                exp = Experience(uav_id=i, state=state, action=action, reward=reward,
                                 next_state=_cell_index(nx, ny, h), step=step)
                batch.append(exp)
                experience_log.append((episode, exp))
                summaries.append(MapSummary(uav_id=i, step=step,
                                            cells_mapped=int(counted[i].sum())))
            fuse_experiences(qtable, batch, config.qparams, counters)
            if detected:
                lengths[episode] = step + 1
                break
        else:
            lengths[episode] = config.mission_time

        merged = LogOddsGrid.blank(w, h, truth.cell_size, truth.origin)
        for i in ids:
            merged.values += grids[i].values
        np.clip(merged.values, -merged.clamp, merged.clamp, out=merged.values)
        merged_grids.append(merged.values.copy())
        positive_q[episode] = positive_q_sum(qtable)
        accuracy[episode], coverage[episode] = map_accuracy(merged, truth)

    return ExplorationResult(positive_q=positive_q, map_accuracy=accuracy,
                             coverage=coverage, episode_lengths=lengths,
                             merged_grids=merged_grids, qtable=qtable,
                             experience_log=experience_log, map_summaries=summaries,
                             counters=counters)


# ---------------------------------------------------------------------------
# Metrics


def empirical_cdf(errors, thresholds) -> np.ndarray:
    """Fraction of errors at or below each threshold."""
    errors = np.asarray(errors, dtype=float).ravel()
    if errors.size == 0:
        raise ValueError("empirical_cdf needs at least one error sample")
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be sorted ascending")
    return np.array([np.mean(errors <= t) for t in thresholds])


def map_accuracy(grid: LogOddsGrid, truth: TrueMap) -> tuple[float, float]:
    """(accuracy over observed cells, coverage).

    A cell is observed iff its log-odds moved off the prior; accuracy
    compares the thresholded belief (log-odds > 0 means occupied) with the
    truth over observed cells only. An all-prior grid reports (0.0, 0.0).
    """
    if grid.values.shape != truth.occupancy.shape:
        raise ValueError("grid and truth dimensions differ")
    observed = grid.values != 0.0
    cov = float(np.mean(observed))
    if not observed.any():
        return 0.0, 0.0
    predicted = grid.values > 0.0
    acc = float(np.mean(predicted[observed] == truth.occupancy[observed]))
    return acc, cov


def positive_q_sum(qtable: QTable) -> float:
    """Sum of the positive entries of the table (learning-progress metric)."""
    vals = qtable.values
    return float(vals[vals > 0].sum())
