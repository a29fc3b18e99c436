"""Synthetic measurements: range echoes, sub-THz range-angle scans, beacon samples.

The scan model ray-traces each beam against a boolean occupancy map and
deposits the echo of the first obstacle into a range bin. Absolute echo
power is model dependent (the system_gain_db knob folds array, integration,
and matched-filter gains together); tests assert relative and threshold
behavior only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import UavPose, TargetState, Vec2

SPEED_OF_LIGHT = 299792458.0  # m/s


@dataclass
class RangeMeasurement:
    """One radar echo: who sensed, when, how far, and from where."""

    uav_id: int
    timestamp: int
    range_m: float
    uav_position: Vec2
    noise_var: float

    def __post_init__(self):
        self.uav_position = np.asarray(self.uav_position, dtype=float)
        if self.range_m < 0:
            raise ValueError("range cannot be negative")


@dataclass
class ThzRadarParams:
    """Sub-THz scanning radar parameters (defaults follow the 140 GHz setup)."""

    carrier_hz: float = 140e9
    eirp_dbm: float = 30.0
    noise_figure_db: float = 4.0
    bandwidth_hz: float = 1e9
    n_antennas: int = 100
    n_directions: int = 10
    scattering_coeff: float = 0.5
    scatterer_length: float = 0.5
    lobe_width: float = 1.0
    rx_gain_dbi: float = 0.0
    # Folds beamforming, integration, and matched-filter gains; absolute
    # echo levels are model dependent.
    system_gain_db: float = 105.0

    def __post_init__(self):
        if self.n_directions < 1:
            raise ValueError("need at least one steering direction")
        for name in ("carrier_hz", "bandwidth_hz", "scattering_coeff", "scatterer_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def bin_width_m(self) -> float:
        # Range resolution of a bandwidth-limited radar.
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)

    @property
    def noise_floor_dbm(self) -> float:
        # Thermal floor over the full bandwidth plus receiver noise figure.
        return -174.0 + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db


@dataclass
class EnergyMatrix:
    """Range-angle observation: received power (dBm) per (beam, range bin)."""

    values: np.ndarray  # (n_directions, n_bins), dBm
    angles: np.ndarray  # (n_directions,), radians
    bin_width_m: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float)
        if self.values.shape[0] != self.angles.shape[0]:
            raise ValueError("one steering angle per beam row required")
        if self.bin_width_m <= 0:
            raise ValueError("bin width must be positive")

    @property
    def n_directions(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]


@dataclass
class TrueMap:
    """Ground-truth boolean occupancy grid.

    occupancy[ix, iy] with iy increasing northward; cell (ix, iy) covers the
    square [origin + (ix, iy)*cell_size, origin + (ix+1, iy+1)*cell_size).
    """

    occupancy: np.ndarray
    cell_size: float = 0.5
    origin: Vec2 = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        self.origin = np.asarray(self.origin, dtype=float)
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.occupancy.ndim != 2:
            raise ValueError("occupancy must be a 2D grid")

    @property
    def width(self) -> int:
        return self.occupancy.shape[0]

    @property
    def height(self) -> int:
        return self.occupancy.shape[1]

    @property
    def diagonal_m(self) -> float:
        return float(np.hypot(self.width, self.height)) * self.cell_size

    def world_to_cell(self, position: Vec2) -> tuple[int, int]:
        rel = (np.asarray(position, dtype=float) - self.origin) / self.cell_size
        return int(math.floor(rel[0])), int(math.floor(rel[1]))

    def cell_center(self, ix: int, iy: int) -> Vec2:
        return self.origin + (np.array([ix, iy], dtype=float) + 0.5) * self.cell_size

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def contains(self, position: Vec2) -> bool:
        ix, iy = self.world_to_cell(position)
        return self.in_bounds(ix, iy)

    def is_occupied(self, position: Vec2) -> bool:
        ix, iy = self.world_to_cell(position)
        if not self.in_bounds(ix, iy):
            raise ValueError(f"position {position} outside map bounds")
        return bool(self.occupancy[ix, iy])

    @classmethod
    def from_text(cls, text: str) -> "TrueMap":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty map file")
        header = lines[0].split()
        if len(header) != 3:
            raise ValueError('map header must be "W H cell_size"')
        w, h, cell = int(header[0]), int(header[1]), float(header[2])
        rows = lines[1:]
        if len(rows) != h:
            raise ValueError(f"expected {h} map rows, got {len(rows)}")
        occ = np.zeros((w, h), dtype=bool)
        # First file row is the northernmost (iy = h-1).
        for r, row in enumerate(rows):
            if len(row) != w:
                raise ValueError(f"map row {r} has {len(row)} chars, expected {w}")
            for c, ch in enumerate(row):
                if ch == "#":
                    occ[c, h - 1 - r] = True
                elif ch != ".":
                    raise ValueError(f"unknown map char {ch!r} (use '#' or '.')")
        return cls(occupancy=occ, cell_size=cell)

    @classmethod
    def from_file(cls, path) -> "TrueMap":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = [f"{self.width} {self.height} {self.cell_size:g}"]
        for r in range(self.height - 1, -1, -1):
            lines.append("".join("#" if self.occupancy[c, r] else "." for c in range(self.width)))
        return "\n".join(lines) + "\n"


def trace_cells(origin: Vec2, direction: Vec2, width: int, height: int,
                cell_size: float, grid_origin: Vec2, max_range: float):
    """Walk grid cells along a ray (Amanatides-Woo traversal).

    Returns (ix, iy, center_dist) int/float arrays of the visited cells in
    order, starting with the cell containing the origin, stopping when the
    ray leaves the grid or the entry distance exceeds max_range.
    """
    origin = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ValueError("ray direction cannot be zero")
    d = d / norm

    rel = (origin - grid_origin) / cell_size
    ix, iy = int(math.floor(rel[0])), int(math.floor(rel[1]))
    if not (0 <= ix < width and 0 <= iy < height):
        raise ValueError("ray origin outside the grid")

    step_x = 1 if d[0] > 0 else (-1 if d[0] < 0 else 0)
    step_y = 1 if d[1] > 0 else (-1 if d[1] < 0 else 0)

    def boundary_t(coord, cell_idx, step, dcomp):
        if step == 0:
            return math.inf
        edge = cell_idx + (1 if step > 0 else 0)
        return (edge - coord) * cell_size / dcomp

    t_max_x = boundary_t(rel[0], ix, step_x, d[0])
    t_max_y = boundary_t(rel[1], iy, step_y, d[1])
    t_delta_x = abs(cell_size / d[0]) if d[0] != 0 else math.inf
    t_delta_y = abs(cell_size / d[1]) if d[1] != 0 else math.inf

    cells_x, cells_y, dists = [], [], []
    t_entry = 0.0
    while 0 <= ix < width and 0 <= iy < height and t_entry <= max_range:
        center = grid_origin + (np.array([ix, iy], dtype=float) + 0.5) * cell_size
        cells_x.append(ix)
        cells_y.append(iy)
        dists.append(float(np.linalg.norm(center - origin)))
        if t_max_x < t_max_y:
            t_entry = t_max_x
            ix += step_x
            t_max_x += t_delta_x
        else:
            t_entry = t_max_y
            iy += step_y
            t_max_y += t_delta_y

    return (np.array(cells_x, dtype=int), np.array(cells_y, dtype=int),
            np.array(dists, dtype=float))


def measure_range(uav: UavPose, target: TargetState, sigma: float,
                  rng: np.random.Generator, step: int) -> RangeMeasurement:
    """Range echo to the target with additive Gaussian noise of std sigma."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    true_range = float(np.linalg.norm(uav.position - target.position))
    noisy = true_range + (rng.normal(0.0, sigma) if sigma > 0 else 0.0)
    return RangeMeasurement(uav_id=uav.id, timestamp=step, range_m=max(noisy, 0.0),
                            uav_position=uav.position.copy(), noise_var=sigma ** 2)


def _fspl_db(distance_m: float, wavelength_m: float) -> float:
    d = max(distance_m, 1e-3)
    return 20.0 * math.log10(4.0 * math.pi * d / wavelength_m)


def scan_angles(params: ThzRadarParams, heading: float) -> np.ndarray:
    """Beam steering angles: a semi-plane scan centered on the heading."""
    return heading + np.linspace(-math.pi / 2, math.pi / 2, params.n_directions)


def scan_thz(uav: UavPose, true_map: TrueMap, params: ThzRadarParams,
             rng: np.random.Generator | None, heading: float = 0.0,
             cache: dict | None = None) -> EnergyMatrix:
    """Range-angle energy scan of the environment around a UAV.

    Each beam ray-traces to the first occupied cell; its echo (two-way
    free-space loss at the carrier, scaled by the scattering coefficient,
    scatterer length, and lobe pattern) lands in the bin of the scatterer
    center distance. Receiver noise (exponentially distributed energy with
    mean at the thermal floor) is added to every bin; pass rng=None for a
    noiseless scan.

    ``cache`` (optional) memoizes ray traces per (cell, heading); valid only
    while the map is static.
    """
    if true_map.is_occupied(uav.position):
        raise ValueError("cannot scan from inside an occupied cell")

    max_range = true_map.diagonal_m
    n_bins = int(math.ceil(max_range / params.bin_width_m))
    angles = scan_angles(params, heading)

    key = None
    if cache is not None:
        key = (true_map.world_to_cell(uav.position), round(heading, 9))
    hits = cache.get(key) if cache is not None else None
    if hits is None:
        hits = []
        for ang in angles:
            direction = np.array([math.cos(ang), math.sin(ang)])
            cx, cy, dists = trace_cells(uav.position, direction, true_map.width,
                                        true_map.height, true_map.cell_size,
                                        true_map.origin, max_range)
            occupied = true_map.occupancy[cx, cy]
            first = int(np.argmax(occupied)) if occupied.any() else -1
            if first >= 0:
                center = true_map.cell_center(int(cx[first]), int(cy[first]))
                hits.append((dists[first], center))
            else:
                hits.append(None)
        if cache is not None:
            cache[key] = hits

    noise_mw = 10.0 ** (params.noise_floor_dbm / 10.0)
    if rng is not None:
        energy = rng.exponential(noise_mw, size=(params.n_directions, n_bins))
    else:
        energy = np.zeros((params.n_directions, n_bins))

    amp_db = (params.eirp_dbm + params.rx_gain_dbi + params.system_gain_db
              + 10.0 * math.log10(params.scattering_coeff * params.scatterer_length))
    for beam, hit in enumerate(hits):
        if hit is None:
            continue
        dist, center = hit
        ang = angles[beam]
        to_center = center - uav.position
        off = math.atan2(to_center[1], to_center[0]) - ang
        lobe = max(math.cos(off), 0.0) ** params.lobe_width
        if lobe <= 0.0 or dist <= 0.0:
            continue
        echo_dbm = (amp_db + 10.0 * math.log10(lobe)
                    - 2.0 * _fspl_db(dist, params.wavelength_m))
        b = min(int(round(dist / params.bin_width_m)), n_bins - 1)
        energy[beam, b] += 10.0 ** (echo_dbm / 10.0)

    with np.errstate(divide="ignore"):
        values_dbm = 10.0 * np.log10(energy)
    values_dbm = np.maximum(values_dbm, -400.0)  # keep noiseless empty bins finite
    return EnergyMatrix(values=values_dbm, angles=angles, bin_width_m=params.bin_width_m)


def beacon_amplitude(distance_m: float, params: ThzRadarParams,
                     reading_range_m: float = 7.35) -> float:
    """Noiseless received beacon amplitude (sqrt mW); zero beyond the reading range."""
    if distance_m > reading_range_m:
        return 0.0
    rx_dbm = params.eirp_dbm + params.rx_gain_dbi - _fspl_db(distance_m, params.wavelength_m)
    return math.sqrt(10.0 ** (rx_dbm / 10.0))


def beacon_observation(uav: UavPose, target_pos: Vec2, n_samples: int,
                       params: ThzRadarParams, rng: np.random.Generator,
                       reading_range_m: float = 7.35) -> np.ndarray:
    """Complex baseband samples of the target beacon at a UAV.

    Within the reading range the samples carry the link-budget amplitude in
    circular complex Gaussian noise at the thermal floor; beyond it they are
    noise only.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    distance = float(np.linalg.norm(np.asarray(uav.position) - np.asarray(target_pos)))
    amp = beacon_amplitude(distance, params, reading_range_m)
    noise_mw = 10.0 ** (params.noise_floor_dbm / 10.0)
    noise = math.sqrt(noise_mw / 2.0) * (rng.standard_normal(n_samples)
                                         + 1j * rng.standard_normal(n_samples))
    return amp + noise
