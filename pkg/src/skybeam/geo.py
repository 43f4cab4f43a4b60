"""Great-circle geometry on a spherical Earth.

Distances use the haversine form, interpolation uses vector slerp, and
ground-to-air slant range uses the flat-chord Pythagorean combination of
ground distance and altitude (the chord-vs-arc error is negligible at
beam-scale distances of a few tens of km).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

EARTH_RADIUS_KM = 6371.0088


class AntipodalRouteError(ValueError):
    """Great-circle interpolation is ill-defined between antipodal points."""


@dataclass(frozen=True)
class GroundPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


def great_circle_distance(a: GroundPoint, b: GroundPoint, radius_km: float = EARTH_RADIUS_KM) -> float:
    """Haversine distance in km."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    s = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * radius_km * math.asin(min(1.0, math.sqrt(s)))


def haversine_km_vec(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray,
                     radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Distances in km from one point to arrays of points."""
    phi1 = math.radians(lat)
    phi2 = np.radians(lats)
    dphi = phi2 - phi1
    dlam = np.radians(lons - lon)
    s = np.sin(dphi / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * radius_km * np.arcsin(np.minimum(1.0, np.sqrt(s)))


def _unit_vector(p: GroundPoint) -> np.ndarray:
    phi = math.radians(p.lat)
    lam = math.radians(p.lon)
    return np.array([
        math.cos(phi) * math.cos(lam),
        math.cos(phi) * math.sin(lam),
        math.sin(phi),
    ])


def _from_unit_vectors(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lats = np.degrees(np.arcsin(np.clip(v[..., 2], -1.0, 1.0)))
    lons = np.degrees(np.arctan2(v[..., 1], v[..., 0]))
    return lats, lons


_ANTIPODAL_SIN = 1e-9


def interpolate_great_circle(a: GroundPoint, b: GroundPoint, f: float) -> GroundPoint:
    """Point a fraction ``f`` of the arc length along the minor arc from a to b.

    Endpoints are returned exactly; antipodal inputs raise
    AntipodalRouteError because the minor arc is not unique.
    """
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"fraction {f} outside [0, 1]")
    if f == 0.0:
        return a
    if f == 1.0:
        return b
    lats, lons = interpolate_many(a, b, np.array([f]))
    return GroundPoint(float(lats[0]), float(lons[0]))


def interpolate_many(a: GroundPoint, b: GroundPoint, fracs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized slerp along the minor arc; exact at f = 0 and f = 1."""
    va, vb = _unit_vector(a), _unit_vector(b)
    dot = float(np.dot(va, vb))
    dot = max(-1.0, min(1.0, dot))
    omega = math.acos(dot)
    sin_omega = math.sin(omega)
    fracs = np.asarray(fracs, dtype=float)
    if sin_omega < _ANTIPODAL_SIN:
        if dot < 0.0:
            raise AntipodalRouteError(
                f"antipodal points ({a.lat}, {a.lon}) and ({b.lat}, {b.lon})"
            )
        # coincident points: the arc is a single point
        lats = np.full(fracs.shape, a.lat)
        lons = np.full(fracs.shape, a.lon)
        return lats, lons
    w1 = np.sin((1.0 - fracs) * omega) / sin_omega
    w2 = np.sin(fracs * omega) / sin_omega
    v = np.outer(w1, va) + np.outer(w2, vb)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    lats, lons = _from_unit_vectors(v)
    # pin endpoints so f=0 / f=1 reproduce the inputs bit-for-bit
    lats[fracs == 0.0] = a.lat
    lons[fracs == 0.0] = a.lon
    lats[fracs == 1.0] = b.lat
    lons[fracs == 1.0] = b.lon
    return lats, lons


def slant_range(farm: GroundPoint, air: GroundPoint, altitude_m: float,
                radius_km: float = EARTH_RADIUS_KM) -> float:
    """Straight-line distance in m from a ground point to an aircraft overhead point."""
    if altitude_m <= 0:
        raise ValueError(f"altitude must be > 0, got {altitude_m}")
    d_m = great_circle_distance(farm, air, radius_km) * 1000.0
    return math.hypot(d_m, altitude_m)


@dataclass(frozen=True)
class Trajectory:
    """A flight's time-discretized great-circle path at constant cruise altitude.

    Samples run from wheels-off over the origin to wheels-on over the
    destination at spacing dt_s (the final gap may be shorter). The origin
    and destination points plus (wheels_off_utc, elapsed_s) fully determine
    the path, so positions at arbitrary times come from position_fraction
    rather than from the stored samples.
    """

    flight_id: str
    origin: GroundPoint
    dest: GroundPoint
    wheels_off_utc: int
    elapsed_s: int
    altitude_m: float
    speed_ms: float
    dt_s: int
    ground_distance_km: float
    samples: tuple = ()

    @property
    def wheels_on_utc(self) -> int:
        return self.wheels_off_utc + self.elapsed_s

    def fraction_at(self, t_utc: float) -> float:
        return min(1.0, max(0.0, (t_utc - self.wheels_off_utc) / self.elapsed_s))

    def positions_at_fractions(self, fracs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return interpolate_many(self.origin, self.dest, fracs)

    def position_at(self, t_utc: float) -> GroundPoint:
        return interpolate_great_circle(self.origin, self.dest, self.fraction_at(t_utc))

    def sample_lats_lons(self) -> tuple[np.ndarray, np.ndarray]:
        lats = np.array([p.lat for _, p in self.samples])
        lons = np.array([p.lon for _, p in self.samples])
        return lats, lons


def discretize_flight(rec, airports: dict, altitude_m: float, speed_ms: float, dt_s: int,
                      radius_km: float = EARTH_RADIUS_KM) -> Trajectory:
    """Discretize one flight record into a Trajectory.

    Sample count is ceil(elapsed/dt) + 1; the aircraft traverses the full
    great-circle path in exactly ``elapsed`` seconds, so the along-path
    fraction of the sample at offset u is u/elapsed. Raises
    AntipodalRouteError for airport pairs with no unique great circle and
    DataError if either airport is missing.
    """
    if dt_s <= 0:
        raise ValueError(f"dt_s must be > 0, got {dt_s}")
    try:
        o = airports[rec.origin]
        d = airports[rec.dest]
    except KeyError as exc:
        raise DataError(f"flight {rec.flight_id}: unknown airport {exc}") from exc
    origin = GroundPoint(o.lat, o.lon)
    dest = GroundPoint(d.lat, d.lon)
    n_intervals = -(-rec.elapsed_s // dt_s)  # ceil
    offsets = [min(j * dt_s, rec.elapsed_s) for j in range(n_intervals + 1)]
    fracs = np.array([u / rec.elapsed_s for u in offsets])
    lats, lons = interpolate_many(origin, dest, fracs)
    samples = tuple(
        (rec.wheels_off_utc + u, GroundPoint(float(lat), float(lon)))
        for u, lat, lon in zip(offsets, lats, lons)
    )
    return Trajectory(
        flight_id=rec.flight_id,
        origin=origin,
        dest=dest,
        wheels_off_utc=rec.wheels_off_utc,
        elapsed_s=rec.elapsed_s,
        altitude_m=altitude_m,
        speed_ms=speed_ms,
        dt_s=dt_s,
        ground_distance_km=great_circle_distance(origin, dest, radius_km),
        samples=samples,
    )


def discretize_flights(records, airports: dict, altitude_m: float, speed_ms: float, dt_s: int,
                       radius_km: float = EARTH_RADIUS_KM):
    """Discretize many flights, excluding antipodal routes with a count.

    Returns (trajectories, kept_records, n_antipodal); trajectories and
    kept_records stay index-aligned.
    """
    out: list[Trajectory] = []
    kept = []
    antipodal = 0
    for rec in records:
        try:
            out.append(discretize_flight(rec, airports, altitude_m, speed_ms, dt_s, radius_km))
            kept.append(rec)
        except AntipodalRouteError:
            antipodal += 1
    return out, kept, antipodal
