"""Aggregation of solutions into reporting cuts, and CSV/GeoJSON emission.

Every aggregation starts from per-allocation detail rows carrying an
energy amount and an energy-proportional share of the step duration, so
each cut (state, range class, day/night, farm, scenario) partitions the
grand totals exactly. Money columns come from the same rate functions the
optimizer used.

All emitted files embed the configuration hash (CSV: leading comment
line; GeoJSON: top-level member) and are byte-deterministic for identical
inputs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import economics, physics
from .config import AircraftParams, EconomicParams

RANGE_SHORT_MAX_KM = 1500.0
RANGE_MEDIUM_MAX_KM = 4000.0

DAY_START_HOUR = 6
DAY_END_HOUR = 18


def classify_range(distance_km: float) -> str:
    """Range class by origin-destination great-circle distance.

    The 1,500 km boundary belongs to medium; long is strictly beyond
    4,000 km, so monotonically later boundaries join the larger class.
    """
    if distance_km < 0:
        raise ValueError(f"distance must be >= 0, got {distance_km}")
    if distance_km < RANGE_SHORT_MAX_KM:
        return "short"
    if distance_km <= RANGE_MEDIUM_MAX_KM:
        return "medium"
    return "long"


def is_daytime(t_utc: int, lon: float) -> bool:
    """Day/night at local solar time (UTC + lon/15 h); day is [06:00, 18:00)."""
    local_s = (t_utc + lon * 240.0) % 86400.0
    hour = local_s / 3600.0
    return DAY_START_HOUR <= hour < DAY_END_HOUR


@dataclass(frozen=True)
class DetailRow:
    """One allocation's share of energy, duration, and grouping keys."""

    farm: int
    flight: int
    t: int
    p_mw: float
    energy_mwh: float
    duration_min: float
    day: bool


@dataclass(frozen=True)
class ReportContext:
    """Everything needed to attribute a solution's value."""

    solution: object
    coverage: object
    trajectories: list
    flight_records: list
    farms: list
    econ: EconomicParams
    aircraft: AircraftParams
    airport_states: dict | None = None
    day_night_mode: str = "farm_local"
    scenario: str = ""

    @property
    def grid(self):
        return self.coverage.grid

    def p_cruise_mw(self) -> float:
        return physics.cruise_power_mw(self.aircraft)


def detail_rows(ctx: ReportContext) -> list[DetailRow]:
    """Split each received step's energy and duration across its allocations.

    Duration is attributed proportionally to each allocation's energy
    contribution within the step, so every grouping dimension partitions
    duration as exactly as it partitions energy.
    """
    sol = ctx.solution
    cov = ctx.coverage
    entries = {
        (int(cov.farm_idx[k]), int(cov.flight_idx[k]), int(cov.t_idx[k])): float(cov.coef[k])
        for k in range(cov.n_entries)
    }
    shift_of = dict(sol.shifts_chosen)
    r_of = {(i, t): r for i, t, r in sol.received}
    dt_h = ctx.grid.dt_s / 3600.0
    dt_min = ctx.grid.dt_s / 60.0
    rows: list[DetailRow] = []
    for f, i, t, p in sol.allocations:
        t_base = t - shift_of.get(i, 0)
        coef = entries[(f, i, t_base)]
        contribution = coef * p
        r_total = r_of.get((i, t), contribution)
        energy = contribution * dt_h
        duration = dt_min * (contribution / r_total) if r_total > 0 else 0.0
        t_utc = ctx.grid.time_at(t)
        if ctx.day_night_mode == "farm_local":
            lon = ctx.farms[f].lon
        elif ctx.day_night_mode == "origin_local":
            lon = ctx.trajectories[i].origin.lon
        else:
            lon = 0.0
        rows.append(DetailRow(
            farm=f, flight=i, t=t, p_mw=p,
            energy_mwh=energy, duration_min=duration,
            day=is_daytime(t_utc, lon),
        ))
    return rows


def day_night_split(ctx: ReportContext) -> dict[int, dict[str, float]]:
    """Per-flight day/night energy and duration totals."""
    out: dict[int, dict[str, float]] = {}
    for row in detail_rows(ctx):
        slot = out.setdefault(row.flight, {
            "day_energy_mwh": 0.0, "night_energy_mwh": 0.0,
            "day_duration_min": 0.0, "night_duration_min": 0.0,
        })
        if row.day:
            slot["day_energy_mwh"] += row.energy_mwh
            slot["day_duration_min"] += row.duration_min
        else:
            slot["night_energy_mwh"] += row.energy_mwh
            slot["night_duration_min"] += row.duration_min
    return out


@dataclass(frozen=True)
class AggRow:
    dimension: str
    key: str
    energy_mwh: float
    duration_min: float
    breakdown: economics.SavingsBreakdown


DIMENSIONS = ("state_origin", "state_dest", "farm_state", "range_class", "day_night", "scenario")


def _group_key(ctx: ReportContext, row: DetailRow, dimension: str) -> str:
    if dimension == "range_class":
        return classify_range(ctx.trajectories[row.flight].ground_distance_km)
    if dimension == "day_night":
        return "day" if row.day else "night"
    if dimension == "farm_state":
        return ctx.farms[row.farm].base.state or "UNKNOWN"
    if dimension == "scenario":
        return ctx.scenario or "all"
    rec = ctx.flight_records[row.flight]
    code = rec.origin if dimension == "state_origin" else rec.dest
    if ctx.airport_states is None:
        return "UNKNOWN"
    return ctx.airport_states.get(code, "UNKNOWN")


def aggregate(ctx: ReportContext, dimension: str) -> list[AggRow]:
    """Aggregate the solution along one dimension; rows partition the totals.

    Rows are ordered by descending total value, ties by key, so emitted
    tables are deterministic.
    """
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}; expected one of {DIMENSIONS}")
    sums: dict[str, list[float]] = {}
    for row in detail_rows(ctx):
        key = _group_key(ctx, row, dimension)
        slot = sums.setdefault(key, [0.0, 0.0])
        slot[0] += row.energy_mwh
        slot[1] += row.duration_min
    p_cruise = ctx.p_cruise_mw()
    rows = [
        AggRow(dimension=dimension, key=key,
               energy_mwh=energy, duration_min=duration,
               breakdown=economics.breakdown(energy, duration, ctx.econ, ctx.aircraft, p_cruise))
        for key, (energy, duration) in sums.items()
    ]
    rows.sort(key=lambda r: (-r.breakdown.total_usd, r.key))
    return rows


def shift_distribution(solution, ctx: ReportContext, dt_s: int) -> list[dict]:
    """Quartiles of chosen shifts (seconds) per range class, plus counts."""
    by_class: dict[str, list[float]] = {}
    for i, steps in solution.shifts_chosen:
        klass = classify_range(ctx.trajectories[i].ground_distance_km)
        by_class.setdefault(klass, []).append(steps * dt_s)
    out = []
    for klass in ("short", "medium", "long"):
        shifts = by_class.get(klass)
        if not shifts:
            continue
        arr = np.array(shifts)
        out.append({
            "range_class": klass,
            "n_flights": len(shifts),
            "n_affected": int(np.count_nonzero(arr)),
            "min_s": float(arr.min()),
            "q1_s": float(np.percentile(arr, 25)),
            "median_s": float(np.percentile(arr, 50)),
            "q3_s": float(np.percentile(arr, 75)),
            "max_s": float(arr.max()),
        })
    return out


# --- emission ----------------------------------------------------------------

CSV_COLUMNS = ("dimension", "key", "energy_mwh", "duration_min", "fuel_saving_usd",
               "co2_saving_usd", "elec_cost_usd", "co2_kg_avoided", "total_usd")


def emit_csv(rows: list[AggRow], path, config_hash: str) -> None:
    """RFC-4180-quoted CSV with a leading config-hash comment line."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            b = row.breakdown
            writer.writerow([
                row.dimension, row.key,
                repr(row.energy_mwh), repr(row.duration_min),
                repr(b.fuel_saving_usd), repr(b.co2_saving_usd),
                repr(b.elec_cost_usd), repr(b.co2_kg_avoided), repr(b.total_usd),
            ])


def parse_csv(path) -> tuple[str, list[dict]]:
    """Read back an emitted CSV; returns (config_hash, rows)."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        config_hash = first.split("=", 1)[1] if first.startswith("# config_hash=") else ""
        reader = csv.DictReader(fh)
        return config_hash, list(reader)


def emit_rows_csv(path, columns: list[str], rows: list[dict], config_hash: str) -> None:
    """Generic deterministic CSV writer used for scenario and summary tables."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns
            ])


def _feature(geometry: dict, properties: dict) -> dict:
    return {"type": "Feature", "geometry": geometry, "properties": properties}


def emit_farms_geojson(ctx: ReportContext, path, config_hash: str,
                       selection_counts: dict[int, int] | None = None) -> None:
    """Farm points with capacity, delivered energy, and savings properties."""
    per_farm: dict[int, list[float]] = {}
    for row in detail_rows(ctx):
        slot = per_farm.setdefault(row.farm, [0.0, 0.0])
        slot[0] += row.energy_mwh
        slot[1] += row.duration_min
    p_cruise = ctx.p_cruise_mw()
    features = []
    for f, farm in enumerate(ctx.farms):
        energy, duration = per_farm.get(f, (0.0, 0.0))
        b = economics.breakdown(energy, duration, ctx.econ, ctx.aircraft, p_cruise)
        props = {
            "farm_id": farm.farm_id,
            "name": farm.base.name,
            "state": farm.base.state,
            "dc_capacity_mw": farm.base.dc_capacity_mw,
            "p_effective_mw": farm.p_effective_mw,
            "energy_mwh": energy,
            "duration_min": duration,
            "total_usd": b.total_usd,
        }
        if selection_counts is not None:
            props["selection_count"] = selection_counts.get(f, 0)
        features.append(_feature(
            {"type": "Point", "coordinates": [farm.lon, farm.lat]}, props,
        ))
    write_geojson(path, features, config_hash)


def flight_features(ctx: ReportContext, extra_properties: dict | None = None,
                    only_flights: set[int] | None = None) -> list[dict]:
    """GeoJSON features: great-circle LineStrings with range class and savings."""
    per_flight: dict[int, list[float]] = {}
    for row in detail_rows(ctx):
        slot = per_flight.setdefault(row.flight, [0.0, 0.0])
        slot[0] += row.energy_mwh
        slot[1] += row.duration_min
    p_cruise = ctx.p_cruise_mw()
    features = []
    for i, traj in enumerate(ctx.trajectories):
        if only_flights is not None and i not in only_flights:
            continue
        energy, duration = per_flight.get(i, (0.0, 0.0))
        b = economics.breakdown(energy, duration, ctx.econ, ctx.aircraft, p_cruise)
        coords = [[pt.lon, pt.lat] for _, pt in traj.samples]
        props = {
            "flight_id": traj.flight_id,
            "range_class": classify_range(traj.ground_distance_km),
            "distance_km": traj.ground_distance_km,
            "energy_mwh": energy,
            "total_usd": b.total_usd,
        }
        if extra_properties:
            props.update(extra_properties)
        features.append(_feature({"type": "LineString", "coordinates": coords}, props))
    return features


def emit_flights_geojson(ctx: ReportContext, path, config_hash: str,
                         extra_properties: dict | None = None,
                         only_flights: set[int] | None = None) -> None:
    write_geojson(path, flight_features(ctx, extra_properties, only_flights), config_hash)


def write_geojson(path, features: list[dict], config_hash: str) -> None:
    doc = {"type": "FeatureCollection", "config_hash": config_hash, "features": features}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
