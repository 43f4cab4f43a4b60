"""Sparse farm-flight-time coverage precomputation.

All timestamps are integer epoch seconds and the grid step divides every
schedule shift, so a shift by s steps is a pure translation of the time
index: the covered set and slant ranges for (flight, t, shift s) equal
those for (flight, t - s, shift 0). Coverage is therefore computed once
at shift zero and translated on demand.

A coverage entry exists iff the flight is airborne at that grid time and
the slant range to the farm is within the farm's beam range (inclusive).
Entries are sorted by (flight, t, farm) so downstream iteration order is
deterministic.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .config import BeamParams
from .errors import CacheMismatchError, DataError
from .geo import EARTH_RADIUS_KM, Trajectory, haversine_km_vec
from .physics import QualifiedFarm, transfer_coefficient

_KM_PER_DEG = 111.19  # one degree of latitude, generous for bucketing


@dataclass(frozen=True)
class TimeGrid:
    """Uniform analysis grid: times t0 + k*dt for k in [0, n_steps)."""

    t0_utc: int
    dt_s: int
    n_steps: int

    def __post_init__(self):
        if self.dt_s <= 0:
            raise ValueError(f"dt_s must be > 0, got {self.dt_s}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    def time_at(self, k: int) -> int:
        return self.t0_utc + k * self.dt_s

    @property
    def end_utc(self) -> int:
        return self.time_at(self.n_steps - 1)


@dataclass(frozen=True)
class ShiftSet:
    """Admissible departure shifts, as symmetric integer step offsets."""

    tau_max_s: int
    dt_s: int
    offsets: tuple[int, ...]

    @classmethod
    def build(cls, tau_max_s: int, dt_s: int) -> "ShiftSet":
        if dt_s <= 0:
            raise ValueError(f"dt_s must be > 0, got {dt_s}")
        if tau_max_s < 0 or tau_max_s % dt_s != 0:
            raise ValueError(f"tau_max_s={tau_max_s} must be a non-negative multiple of dt_s={dt_s}")
        n = tau_max_s // dt_s
        return cls(tau_max_s=tau_max_s, dt_s=dt_s, offsets=tuple(range(-n, n + 1)))

    def __len__(self) -> int:
        return len(self.offsets)

    def slot_of(self, offset: int) -> int:
        return self.offsets.index(offset)


def build_time_grid(flights, dt_s: int, tau_max_s: int) -> TimeGrid:
    """Grid spanning all flight windows padded by tau_max, snapped outward to dt."""
    flights = list(flights)
    if not flights:
        raise DataError("cannot build a time grid from an empty flight list")
    start = min(f.wheels_off_utc for f in flights) - tau_max_s
    end = max(f.wheels_off_utc + f.elapsed_s for f in flights) + tau_max_s
    t0 = (start // dt_s) * dt_s
    t_end = -(-end // dt_s) * dt_s
    return TimeGrid(t0_utc=t0, dt_s=dt_s, n_steps=(t_end - t0) // dt_s + 1)


class CoverageSet:
    """Sparse coverage tensor plus per-flight airborne windows.

    Entry arrays hold the shift-0 tensor; entries under shift s are the
    same rows with t_idx translated by +s (rows falling off the grid are
    dropped). airborne_lo/hi give, per flight, the inclusive shift-0 grid
    index range during which the flight is in the air (lo > hi means the
    flight never touches the grid).
    """

    def __init__(self, grid: TimeGrid, n_farms: int, n_flights: int,
                 farm_idx: np.ndarray, flight_idx: np.ndarray, t_idx: np.ndarray,
                 z_m: np.ndarray, coef: np.ndarray,
                 airborne_lo: np.ndarray, airborne_hi: np.ndarray,
                 shifts: ShiftSet | None = None):
        self.grid = grid
        self.n_farms = n_farms
        self.n_flights = n_flights
        self.farm_idx = farm_idx
        self.flight_idx = flight_idx
        self.t_idx = t_idx
        self.z_m = z_m
        self.coef = coef
        self.airborne_lo = airborne_lo
        self.airborne_hi = airborne_hi
        self.shifts = shifts

    @property
    def n_entries(self) -> int:
        return len(self.farm_idx)

    def shift_offsets(self) -> tuple[int, ...]:
        return self.shifts.offsets if self.shifts is not None else (0,)

    def is_airborne(self, flight: int, t: int, shift: int = 0) -> bool:
        base_t = t - shift
        return bool(self.airborne_lo[flight] <= base_t <= self.airborne_hi[flight])

    def entry_rows_for_shift(self, shift: int) -> np.ndarray:
        """Indices of base rows whose translation by ``shift`` stays on the grid."""
        t = self.t_idx + shift
        return np.nonzero((t >= 0) & (t < self.grid.n_steps))[0]

    def iter_entries(self):
        """Yield (farm, flight, t, shift, z, coef) over every shift, base order."""
        for s in self.shift_offsets():
            for row in self.entry_rows_for_shift(s):
                yield (
                    int(self.farm_idx[row]), int(self.flight_idx[row]),
                    int(self.t_idx[row]) + s, s,
                    float(self.z_m[row]), float(self.coef[row]),
                )

    def airborne_triples(self):
        """Yield (flight, t, shift) for every airborne combination on the grid."""
        for s in self.shift_offsets():
            for i in range(self.n_flights):
                lo, hi = int(self.airborne_lo[i]), int(self.airborne_hi[i])
                if lo > hi:
                    continue
                for t in range(max(0, lo + s), min(self.grid.n_steps - 1, hi + s) + 1):
                    yield (i, t, s)

    # --- serialization -------------------------------------------------

    MAGIC = b"SPHC"
    VERSION = 1

    def save(self, path, param_hash: bytes) -> None:
        """Write the columnar cache: magic, version, hash, then the entry columns."""
        if len(param_hash) != 32:
            raise ValueError("param_hash must be 32 bytes")
        columns = [
            self.farm_idx.astype("<u4"),
            self.flight_idx.astype("<u4"),
            self.t_idx.astype("<u4"),
            np.zeros(self.n_entries, dtype="<i2"),  # base tensor is shift 0
            self.z_m.astype("<f8"),
            self.coef.astype("<f8"),
        ]
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<H", self.VERSION))
            fh.write(param_hash)
            for col in columns:
                fh.write(struct.pack("<Q", len(col)))
                fh.write(col.tobytes())

    @classmethod
    def load(cls, path, param_hash: bytes, grid: TimeGrid, n_farms: int, n_flights: int,
             airborne_lo: np.ndarray, airborne_hi: np.ndarray,
             shifts: ShiftSet | None = None) -> "CoverageSet":
        """Read a cache written by save(); the stored hash must match."""
        with open(path, "rb") as fh:
            if fh.read(4) != cls.MAGIC:
                raise CacheMismatchError(f"{path}: bad magic bytes")
            (version,) = struct.unpack("<H", fh.read(2))
            if version != cls.VERSION:
                raise CacheMismatchError(f"{path}: unsupported cache version {version}")
            stored = fh.read(32)
            if stored != param_hash:
                raise CacheMismatchError(f"{path}: parameter hash mismatch")
            raw = []
            for dtype in ("<u4", "<u4", "<u4", "<i2", "<f8", "<f8"):
                (count,) = struct.unpack("<Q", fh.read(8))
                data = fh.read(count * np.dtype(dtype).itemsize)
                raw.append(np.frombuffer(data, dtype=dtype).copy())
        return cls(
            grid=grid, n_farms=n_farms, n_flights=n_flights,
            farm_idx=raw[0].astype(np.int64), flight_idx=raw[1].astype(np.int64),
            t_idx=raw[2].astype(np.int64), z_m=raw[4], coef=raw[5],
            airborne_lo=airborne_lo, airborne_hi=airborne_hi, shifts=shifts,
        )


def airborne_window(traj: Trajectory, grid: TimeGrid) -> tuple[int, int]:
    """Inclusive grid-index range with wheels_off <= grid time <= wheels_on."""
    lo = -((traj.wheels_off_utc - grid.t0_utc) // -grid.dt_s)  # ceil
    hi = (traj.wheels_on_utc - grid.t0_utc) // grid.dt_s  # floor
    return max(lo, 0), min(hi, grid.n_steps - 1)


def airborne_arrays(trajectories, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-flight airborne window bounds, for rebuilding a cached CoverageSet."""
    lo = np.zeros(len(trajectories), dtype=np.int64)
    hi = np.zeros(len(trajectories), dtype=np.int64)
    for i, traj in enumerate(trajectories):
        lo[i], hi[i] = airborne_window(traj, grid)
    return lo, hi


def ground_disk_radius_m(farm: QualifiedFarm, altitude_m: float) -> float:
    """Radius of the ground footprint where slant range stays within beam range."""
    return math.sqrt(max(0.0, farm.r_beam_m ** 2 - altitude_m ** 2))


def coverage_prefilter(traj: Trajectory, farm: QualifiedFarm,
                       radius_km: float = EARTH_RADIUS_KM) -> bool:
    """Cheap gate: can this farm possibly cover this trajectory?

    False only when the closest trajectory sample is farther than the
    farm's ground footprint radius plus one discretization step of slack,
    which can never exclude a genuinely covered pair.
    """
    lats, lons = traj.sample_lats_lons()
    if len(lats) == 0:
        return True  # no samples to test against: stay conservative
    d_km = haversine_km_vec(farm.lat, farm.lon, lats, lons, radius_km)
    disk_m = ground_disk_radius_m(farm, traj.altitude_m)
    v_eff = traj.ground_distance_km * 1000.0 / traj.elapsed_s
    slack_m = v_eff * traj.dt_s
    return float(d_km.min()) * 1000.0 <= disk_m + slack_m


class _FarmBuckets:
    """Coarse lat/lon bucket index over farm centroids.

    Cell size is the largest ground footprint radius, so any farm covering
    a query point lies in the 3x3 (latitude) neighborhood; the longitude
    search widens with latitude to keep cells at least as wide as the
    footprint everywhere.
    """

    def __init__(self, farms: list[QualifiedFarm], altitude_m: float):
        max_disk_m = max((ground_disk_radius_m(f, altitude_m) for f in farms), default=0.0)
        self.cell_deg = max(max_disk_m / 1000.0 / _KM_PER_DEG, 1e-6)
        self.buckets: dict[tuple[int, int], list[int]] = {}
        self.n_lon_cells = max(1, int(math.ceil(360.0 / self.cell_deg)))
        for idx, farm in enumerate(farms):
            key = self._cell(farm.lat, farm.lon)
            self.buckets.setdefault(key, []).append(idx)

    def _cell(self, lat: float, lon: float) -> tuple[int, int]:
        return (
            int(math.floor(lat / self.cell_deg)),
            int(math.floor(lon / self.cell_deg)) % self.n_lon_cells,
        )

    def candidates(self, lats: np.ndarray, lons: np.ndarray) -> list[int]:
        """Farm indices near any of the given points, ascending and unique."""
        found: set[int] = set()
        seen_cells: set[tuple[int, int]] = set()
        for lat, lon in zip(lats, lons):
            ci, cj = self._cell(lat, lon)
            cos_lat = max(0.05, math.cos(math.radians(lat)))
            # lon cells narrow by cos(lat), so widen the search accordingly
            reach = int(math.ceil(1.0 / cos_lat)) + 1
            for di in (-1, 0, 1):
                for dj in range(-reach, reach + 1):
                    key = (ci + di, (cj + dj) % self.n_lon_cells)
                    if key in seen_cells:
                        continue
                    seen_cells.add(key)
                    found.update(self.buckets.get(key, ()))
        return sorted(found)


def compute_coverage(trajectories: list[Trajectory], farms: list[QualifiedFarm],
                     grid: TimeGrid, shifts: ShiftSet | None, params: BeamParams,
                     radius_km: float = EARTH_RADIUS_KM,
                     use_spatial_index: bool = True) -> CoverageSet:
    """Build the sparse coverage tensor for every (farm, flight, grid time).

    Each flight is processed independently (a disjoint shard) and shards
    are concatenated in flight order, so the result is deterministic and
    sorted by (flight, t, farm).
    """
    if shifts is not None and shifts.dt_s != grid.dt_s:
        raise DataError(f"shift dt {shifts.dt_s} does not match grid dt {grid.dt_s}")
    n_flights = len(trajectories)
    n_farms = len(farms)
    airborne_lo = np.zeros(n_flights, dtype=np.int64)
    airborne_hi = np.zeros(n_flights, dtype=np.int64)
    index = _FarmBuckets(farms, trajectories[0].altitude_m) if (use_spatial_index and farms and trajectories) else None

    shard_farm, shard_flight, shard_t, shard_z, shard_coef = [], [], [], [], []
    coef_numer = transfer_coefficient(1.0, params)  # eta*A_r/(pi*lambda), divided by z per entry
    for i, traj in enumerate(trajectories):
        if traj.dt_s != grid.dt_s:
            raise DataError(
                f"flight {traj.flight_id}: trajectory dt {traj.dt_s} does not match grid dt {grid.dt_s}"
            )
        lo, hi = airborne_window(traj, grid)
        airborne_lo[i] = lo
        airborne_hi[i] = hi
        if lo > hi or not farms:
            continue
        ks = np.arange(lo, hi + 1)
        times = grid.t0_utc + ks * grid.dt_s
        fracs = (times - traj.wheels_off_utc) / traj.elapsed_s
        lats, lons = traj.positions_at_fractions(fracs)

        if index is not None:
            candidate_ids = index.candidates(lats, lons)
        else:
            candidate_ids = range(n_farms)

        rows = []
        for fi in candidate_ids:
            farm = farms[fi]
            if not coverage_prefilter(traj, farm, radius_km):
                continue
            d_km = haversine_km_vec(farm.lat, farm.lon, lats, lons, radius_km)
            z = np.hypot(d_km * 1000.0, traj.altitude_m)
            hit = np.nonzero(z <= farm.r_beam_m)[0]
            for j in hit:
                rows.append((int(ks[j]), fi, float(z[j])))
        rows.sort()
        for t, fi, z in rows:
            shard_farm.append(fi)
            shard_flight.append(i)
            shard_t.append(t)
            shard_z.append(z)
            shard_coef.append(coef_numer / z)

    return CoverageSet(
        grid=grid, n_farms=n_farms, n_flights=n_flights,
        farm_idx=np.array(shard_farm, dtype=np.int64),
        flight_idx=np.array(shard_flight, dtype=np.int64),
        t_idx=np.array(shard_t, dtype=np.int64),
        z_m=np.array(shard_z, dtype=np.float64),
        coef=np.array(shard_coef, dtype=np.float64),
        airborne_lo=airborne_lo, airborne_hi=airborne_hi,
        shifts=shifts,
    )
