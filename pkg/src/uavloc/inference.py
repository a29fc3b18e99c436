"""State estimation: EKF target tracking, log-odds occupancy mapping, and
energy-detector (GLRT) target detection, with operation counters that expose
how the arithmetic cost scales with problem size.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Vec2
from .sensing import EnergyMatrix, RangeMeasurement, trace_cells

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Operation counters


class OpCounters:
    """Tally of multiply/add counts per routine.

    Routines record the canonical arithmetic cost of each linear-algebra
    step they execute (an (a x b)(b x c) product books a*b*c multiplies and
    a*(b-1)*c adds; an m x m inversion books m^3 of each). Fitting
    log(count) against log(dimension) over a sweep of sizes recovers the
    scaling exponent of the routine.
    """

    def __init__(self):
        self.multiplies: dict[str, int] = {}
        self.adds: dict[str, int] = {}

    def reset(self, routine: str | None = None) -> None:
        if routine is None:
            self.multiplies.clear()
            self.adds.clear()
        else:
            self.multiplies.pop(routine, None)
            self.adds.pop(routine, None)

    def record(self, routine: str, multiplies: int = 0, adds: int = 0) -> None:
        self.multiplies[routine] = self.multiplies.get(routine, 0) + int(multiplies)
        self.adds[routine] = self.adds.get(routine, 0) + int(adds)

    def matmul(self, routine: str, a: int, b: int, c: int) -> None:
        self.record(routine, multiplies=a * b * c, adds=a * max(b - 1, 0) * c)

    def inverse(self, routine: str, m: int) -> None:
        self.record(routine, multiplies=m ** 3, adds=m ** 3)

    def elementwise(self, routine: str, n: int, multiplies: bool = False) -> None:
        self.record(routine, multiplies=n if multiplies else 0, adds=n)

    def report(self, routine: str) -> tuple[int, int]:
        if routine not in self.multiplies and routine not in self.adds:
            raise KeyError(f"no counts recorded for routine {routine!r}")
        return self.multiplies.get(routine, 0), self.adds.get(routine, 0)

    def total(self, routine: str) -> int:
        m, a = self.report(routine)
        return m + a


def fit_exponent(dimensions, counts) -> float:
    """Slope of log(count) vs log(dimension); the empirical scaling order."""
    dims = np.asarray(dimensions, dtype=float)
    cnts = np.asarray(counts, dtype=float)
    if dims.size < 2:
        raise ValueError("need at least two sizes to fit an exponent")
    slope, _ = np.polyfit(np.log(dims), np.log(cnts), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Extended Kalman filter


@dataclass
class GaussianBelief:
    """Gaussian state belief: mean (x, y, vx, vy) and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise ValueError("covariance shape must match the mean")
        if not np.allclose(self.cov, self.cov.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")

    @property
    def position(self) -> Vec2:
        return self.mean[:2]


@dataclass
class MotionModel:
    """Linear transition with additive process noise."""

    transition: np.ndarray
    process_noise: np.ndarray

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.process_noise = np.asarray(self.process_noise, dtype=float)

    @classmethod
    def constant_velocity(cls, accel_std: float, dims: int = 2) -> "MotionModel":
        """Unit-step constant-velocity model in `dims` spatial dimensions.

        State is (positions..., velocities...); the velocity picks up the
        acceleration noise each step, matching the simulated target.
        """
        n = 2 * dims
        f = np.eye(n)
        f[:dims, dims:] = np.eye(dims)
        q = np.zeros((n, n))
        q[dims:, dims:] = np.eye(dims) * accel_std ** 2
        return cls(transition=f, process_noise=q)


def ekf_predict(belief: GaussianBelief, model: MotionModel,
                counters: OpCounters | None = None) -> GaussianBelief:
    """One prediction step: mean through F, covariance through F P F^T + Q."""
    f = model.transition
    n = f.shape[0]
    mean = f @ belief.mean
    cov = f @ belief.cov @ f.T + model.process_noise
    cov = 0.5 * (cov + cov.T)  # guard symmetry against round-off
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("predicted covariance lost positive definiteness; "
                         "check the motion model") from None
    if counters is not None:
        counters.matmul("ekf_predict_mean", n, n, 1)
        counters.matmul("ekf_predict_cov", n, n, n)
        counters.matmul("ekf_predict_cov", n, n, n)
        counters.elementwise("ekf_predict_cov", n * n)
    return GaussianBelief(mean=mean, cov=cov)


def _gain_update(belief: GaussianBelief, innovation: np.ndarray, obs: np.ndarray,
                 noise_cov: np.ndarray, counters: OpCounters | None) -> GaussianBelief:
    """Shared gain/update path (Joseph-stabilized covariance)."""
    p = belief.cov
    n = p.shape[0]
    m = obs.shape[0]
    s = obs @ p @ obs.T + noise_cov
    gain = p @ obs.T @ np.linalg.inv(s)
    if counters is not None:
        counters.matmul("ekf_gain", m, n, n)
        counters.matmul("ekf_gain", m, n, m)
        counters.elementwise("ekf_gain", m * m)
        counters.inverse("ekf_gain", m)
        counters.matmul("ekf_gain", n, n, m)
        counters.matmul("ekf_gain", n, m, m)

    mean = belief.mean + gain @ innovation
    i_kh = np.eye(n) - gain @ obs
    cov = i_kh @ p @ i_kh.T + gain @ noise_cov @ gain.T
    cov = 0.5 * (cov + cov.T)
    if counters is not None:
        counters.matmul("ekf_update_mean", n, m, 1)
        counters.elementwise("ekf_update_mean", n)
        counters.matmul("ekf_update_cov", n, m, n)
        counters.matmul("ekf_update_cov", n, n, n)
        counters.matmul("ekf_update_cov", n, n, n)
        counters.matmul("ekf_update_cov", n, m, m)
        counters.matmul("ekf_update_cov", n, m, n)
        counters.elementwise("ekf_update_cov", 2 * n * n)
    return GaussianBelief(mean=mean, cov=cov)


def ekf_update_linear(belief: GaussianBelief, z: np.ndarray, obs: np.ndarray,
                      noise_cov: np.ndarray,
                      counters: OpCounters | None = None) -> GaussianBelief:
    """Update with a linear measurement z = obs @ state + noise."""
    innovation = np.asarray(z, dtype=float) - obs @ belief.mean
    return _gain_update(belief, innovation, np.asarray(obs, dtype=float),
                        np.asarray(noise_cov, dtype=float), counters)


def _range_rows(measurements, at: np.ndarray):
    """Stacked range model linearized at a point: (H, h(at), z, vars)."""
    rows, values, ranges, variances = [], [], [], []
    for meas in measurements:
        if meas.noise_var <= 0:
            raise ValueError("measurement noise_var must be positive")
        dx, dy = at[0] - meas.uav_position[0], at[1] - meas.uav_position[1]
        predicted = math.hypot(dx, dy)
        if predicted == 0.0:
            log.debug("skipping measurement from UAV %s: coincident with mean", meas.uav_id)
            continue
        rows.append([dx / predicted, dy / predicted, 0.0, 0.0])
        values.append(predicted)
        ranges.append(meas.range_m)
        variances.append(meas.noise_var)
    return rows, values, ranges, variances


def ekf_update(belief: GaussianBelief, measurements: list[RangeMeasurement],
               counters: OpCounters | None = None,
               iterations: int = 1) -> GaussianBelief:
    """Batch range update, linearized at the current mean.

    With iterations > 1 the linearization point is refined Gauss-Newton
    style (iterated EKF) before the final update; the plain single-pass
    filter is iterations = 1. Measurements taken from a UAV coincident with
    the linearization point have an undefined Jacobian and are skipped
    (logged). An empty batch returns the belief unchanged.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    point = belief.mean.copy()
    out = belief
    for _ in range(iterations):
        rows, values, ranges, variances = _range_rows(measurements, point)
        if not rows:
            return belief
        obs = np.array(rows)
        # Gauss-Newton innovation: z - h(point) - H (mean - point).
        innovation = (np.array(ranges) - np.array(values)
                      - obs @ (belief.mean - point))
        out = _gain_update(belief, innovation, obs, np.diag(variances), counters)
        point = out.mean.copy()
    return out


def initial_belief(measurements: list[RangeMeasurement], fallback_center: Vec2,
                   position_var: float = 1e4, velocity_var: float = 10.0) -> GaussianBelief:
    """Diffuse prior for the tracker.

    With three or more ranges the prior mean comes from least-squares ring
    intersection (pairwise range differencing); otherwise it falls back to
    the given center. Velocity starts at zero.
    """
    center = np.asarray(fallback_center, dtype=float)
    pos = center
    if len(measurements) >= 3:
        ref = measurements[0]
        a_rows, b_vals = [], []
        for m in measurements[1:]:
            a_rows.append(2.0 * (m.uav_position - ref.uav_position))
            b_vals.append(ref.range_m ** 2 - m.range_m ** 2
                          + np.dot(m.uav_position, m.uav_position)
                          - np.dot(ref.uav_position, ref.uav_position))
        a = np.array(a_rows)
        if np.linalg.matrix_rank(a) == 2:
            pos, *_ = np.linalg.lstsq(a, np.array(b_vals), rcond=None)
    cov = np.diag([position_var, position_var, velocity_var, velocity_var])
    return GaussianBelief(mean=np.array([pos[0], pos[1], 0.0, 0.0]), cov=cov)


# ---------------------------------------------------------------------------
# Occupancy grid


@dataclass
class LogOddsGrid:
    """Per-cell occupancy belief in log-odds, clamped to +-10 (prior 0)."""

    values: np.ndarray
    cell_size: float = 0.5
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))
    clamp: float = 10.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.origin = np.asarray(self.origin, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("grid must be 2D")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @classmethod
    def blank(cls, width: int, height: int, cell_size: float = 0.5,
              origin=(0.0, 0.0)) -> "LogOddsGrid":
        return cls(values=np.zeros((width, height)), cell_size=cell_size,
                   origin=np.asarray(origin, dtype=float))

    @property
    def width(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.values))

    def bump(self, ix: int, iy: int, delta: float) -> None:
        self.values[ix, iy] = float(np.clip(self.values[ix, iy] + delta,
                                            -self.clamp, self.clamp))


@dataclass
class InverseScanModel:
    """Inverse sensor model for the thresholded energy scan."""

    p_hit: float = 0.7
    p_miss: float = 0.4
    detection_threshold_dbm: float = -70.0

    def __post_init__(self):
        if not (0.5 <= self.p_hit < 1.0):
            raise ValueError("p_hit must lie in [0.5, 1)")
        if not (0.0 < self.p_miss <= 0.5):
            raise ValueError("p_miss must lie in (0, 0.5]")

    @property
    def hit_increment(self) -> float:
        return math.log(self.p_hit / (1.0 - self.p_hit))

    @property
    def miss_increment(self) -> float:
        return math.log(self.p_miss / (1.0 - self.p_miss))


def og_update(grid: LogOddsGrid, scan: EnergyMatrix, pose: Vec2,
              model: InverseScanModel, counters: OpCounters | None = None,
              cache: dict | None = None) -> LogOddsGrid:
    """Fold one energy scan into the occupancy grid.

    Per beam, the first range bin above the detection threshold marks its
    cell occupied and every earlier cell along the beam free; bins beyond
    the detection are left untouched, as is the whole beam when nothing
    crosses the threshold.
    """
    pose = np.asarray(pose, dtype=float)
    ix, iy = int((pose[0] - grid.origin[0]) // grid.cell_size), \
        int((pose[1] - grid.origin[1]) // grid.cell_size)
    if not (0 <= ix < grid.width and 0 <= iy < grid.height):
        raise ValueError("pose outside the grid")

    max_range = math.hypot(grid.width, grid.height) * grid.cell_size
    for beam in range(scan.n_directions):
        profile = scan.values[beam]
        above = profile > model.detection_threshold_dbm
        if counters is not None:
            counters.elementwise("og_likelihood", profile.size)
        if not above.any():
            continue
        hit_bin = int(np.argmax(above))

        key = None
        if cache is not None:
            key = (ix, iy, round(float(scan.angles[beam]), 9))
        trace = cache.get(key) if cache is not None else None
        if trace is None:
            ang = float(scan.angles[beam])
            direction = np.array([math.cos(ang), math.sin(ang)])
            cx, cy, dists = trace_cells(pose, direction, grid.width, grid.height,
                                        grid.cell_size, grid.origin, max_range)
            bins = np.round(dists / scan.bin_width_m).astype(int)
            trace = (cx, cy, bins)
            if cache is not None:
                cache[key] = trace
        cx, cy, bins = trace

        touched = 0
        for cell_x, cell_y, cell_bin in zip(cx, cy, bins):
            if cell_bin < hit_bin:
                grid.bump(int(cell_x), int(cell_y), model.miss_increment)
                touched += 1
            elif cell_bin == hit_bin:
                grid.bump(int(cell_x), int(cell_y), model.hit_increment)
                touched += 1
                break
            else:
                break
        if counters is not None:
            counters.elementwise("og_update", touched)
    return grid


def grid_to_csv(grid: LogOddsGrid, path) -> None:
    """Dump a grid as cell_x,cell_y,log_odds rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("cell_x,cell_y,log_odds\n")
        for ix in range(grid.width):
            for iy in range(grid.height):
                fh.write(f"{ix},{iy},{grid.values[ix, iy]:.6g}\n")


def write_belief_trace(path, rows) -> None:
    """Dump belief snapshots as step,uav_id,mean_x,mean_y,cov_trace rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("step,uav_id,mean_x,mean_y,cov_trace\n")
        for step, uav_id, mean_x, mean_y, cov_trace in rows:
            fh.write(f"{step},{uav_id},{mean_x:.6g},{mean_y:.6g},{cov_trace:.6g}\n")


# ---------------------------------------------------------------------------
# GLRT detection


@dataclass
class DetectionResult:
    statistic: float
    threshold: float

    @property
    def decision(self) -> bool:
        return self.statistic > self.threshold


_THRESHOLD_TABLE: dict[tuple[int, float], float] = {}
_CALIBRATION_DRAWS = 1_000_000
_CALIBRATION_SEED = 0x5EED


def glrt_threshold(n_samples: int, pfa: float) -> float:
    """Detection threshold for the mean-energy statistic at a target false
    alarm probability.

    Thresholds come from a Monte Carlo table (one million noise-only trials
    per sample count, fixed calibration seed) and are cached per process,
    which stands in for the look-up-table implementation a real receiver
    would carry.
    """
    if not (0.0 < pfa < 1.0):
        raise ValueError("pfa must lie in (0, 1)")
    key = (int(n_samples), float(pfa))
    if key not in _THRESHOLD_TABLE:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((_CALIBRATION_SEED, n_samples))))
        stats = np.empty(_CALIBRATION_DRAWS)
        chunk = max(1, 2_000_000 // max(n_samples, 1))
        done = 0
        while done < _CALIBRATION_DRAWS:
            size = min(chunk, _CALIBRATION_DRAWS - done)
            noise = (rng.standard_normal((size, n_samples))
                     + 1j * rng.standard_normal((size, n_samples))) / math.sqrt(2.0)
            stats[done:done + size] = np.mean(np.abs(noise) ** 2, axis=1)
            done += size
        _THRESHOLD_TABLE[key] = float(np.quantile(stats, 1.0 - pfa))
    return _THRESHOLD_TABLE[key]


def glrt_detect(samples: np.ndarray, pfa: float,
                noise_power: float = 1.0) -> DetectionResult:
    """Energy detector: normalized mean energy against a calibrated threshold."""
    samples = np.asarray(samples)
    if samples.size < 1:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    statistic = float(np.mean(np.abs(samples) ** 2) / noise_power)
    threshold = glrt_threshold(samples.size, pfa)
    return DetectionResult(statistic=statistic, threshold=threshold)
