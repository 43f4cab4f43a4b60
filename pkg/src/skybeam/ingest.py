"""Loaders for the three input datasets: flights, airports, and solar farms.

Each loader validates rows independently: defective rows are skipped and
counted per reason, never repaired, so accepted + rejected always equals
the input row count and re-loading a file reproduces the same records in
input order. Schema problems (missing columns) are fatal.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from shapely.geometry import Polygon

from .config import AIRPORTS_COLUMNS, FARMS_COLUMNS, FLIGHTS_COLUMNS
from .errors import DataError


@dataclass(frozen=True)
class Airport:
    code: str
    lat: float
    lon: float
    utc_offset_hours: float


@dataclass(frozen=True)
class FlightRecord:
    flight_id: str
    origin: str
    dest: str
    wheels_off_utc: int  # seconds since epoch
    elapsed_s: int


@dataclass(frozen=True)
class SolarFarmRecord:
    farm_id: str
    name: str
    lat: float
    lon: float
    dc_capacity_mw: float
    area_m2: float
    state: str = ""
    county: str = ""
    boundary: tuple | None = None  # closed ring of (lat, lon)


@dataclass
class IngestReport:
    """Named counters for one loader invocation."""

    total_rows: int = 0
    accepted: int = 0
    rejected: dict = field(default_factory=dict)
    warnings: dict = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1

    def warn(self, reason: str) -> None:
        self.warnings[reason] = self.warnings.get(reason, 0) + 1

    @property
    def total_rejected(self) -> int:
        return sum(self.rejected.values())

    def to_json_dict(self) -> dict:
        out = {"total_rows": self.total_rows, "accepted": self.accepted}
        for reason in sorted(self.rejected):
            out[f"rejected_{reason}"] = self.rejected[reason]
        for reason in sorted(self.warnings):
            out[f"warning_{reason}"] = self.warnings[reason]
        return out


def _open_reader(path: str | Path, required: list[str], what: str) -> tuple:
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    header = reader.fieldnames
    if header is None:
        fh.close()
        raise DataError(f"{what} file {path} has no header row")
    missing = [c for c in required if c not in header]
    if missing:
        fh.close()
        raise DataError(f"{what} file {path} is missing columns: {', '.join(missing)}")
    return fh, reader


def load_airports(path: str | Path, columns: dict | None = None) -> tuple[dict, IngestReport]:
    """Load the airport table keyed by code.

    Duplicate codes keep the first occurrence; out-of-range coordinates
    reject the row. Returns (table, report).
    """
    cols = dict(AIRPORTS_COLUMNS)
    if columns:
        cols.update(columns)
    fh, reader = _open_reader(path, list(cols.values()), "airports")
    table: dict[str, Airport] = {}
    report = IngestReport()
    with fh:
        for row in reader:
            report.total_rows += 1
            try:
                code = row[cols["code"]].strip()
                lat = float(row[cols["lat"]])
                lon = float(row[cols["lon"]])
                offset = float(row[cols["utc_offset_hours"]])
            except (ValueError, AttributeError, TypeError):
                report.reject("parse_error")
                continue
            if not code:
                report.reject("parse_error")
                continue
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                report.reject("out_of_range")
                continue
            if code in table:
                report.reject("duplicate")
                continue
            table[code] = Airport(code=code, lat=lat, lon=lon, utc_offset_hours=offset)
            report.accepted += 1
    return table, report


def _parse_wheels_off_utc(date_str: str, hhmm: str, utc_offset_hours: float) -> int:
    local = datetime.strptime(f"{date_str} {hhmm}", "%Y-%m-%d %H:%M")
    local = local.replace(tzinfo=timezone.utc)
    # the stamp is local wall-clock; subtracting the fixed offset yields UTC
    return int(local.timestamp()) - round(utc_offset_hours * 3600)


def load_flights(path: str | Path, airports: dict,
                 columns: dict | None = None) -> tuple[list[FlightRecord], IngestReport]:
    """Load flight records, converting local wheels-off stamps to UTC.

    Rejection reasons, checked in order: parse_error, unknown_airport,
    same_airport, bad_elapsed. Returns (records, report).
    """
    cols = dict(FLIGHTS_COLUMNS)
    if columns:
        cols.update(columns)
    fh, reader = _open_reader(path, list(cols.values()), "flights")
    records: list[FlightRecord] = []
    report = IngestReport()
    with fh:
        for row in reader:
            report.total_rows += 1
            try:
                flight_id = row[cols["flight_id"]].strip()
                origin = row[cols["origin"]].strip()
                dest = row[cols["dest"]].strip()
                date_str = row[cols["date"]].strip()
                hhmm = row[cols["wheels_off_local"]].strip()
                elapsed_min = float(row[cols["elapsed_min"]])
            except (ValueError, AttributeError, TypeError):
                report.reject("parse_error")
                continue
            origin_airport = airports.get(origin)
            dest_airport = airports.get(dest)
            if origin_airport is None or dest_airport is None:
                report.reject("unknown_airport")
                continue
            if origin == dest:
                report.reject("same_airport")
                continue
            if elapsed_min <= 0:
                report.reject("bad_elapsed")
                continue
            try:
                wheels_off_utc = _parse_wheels_off_utc(date_str, hhmm, origin_airport.utc_offset_hours)
            except ValueError:
                report.reject("parse_error")
                continue
            records.append(FlightRecord(
                flight_id=flight_id,
                origin=origin,
                dest=dest,
                wheels_off_utc=wheels_off_utc,
                elapsed_s=round(elapsed_min * 60),
            ))
            report.accepted += 1
    return records, report


def _validate_ring(ring) -> tuple | None:
    """Return the ring as a tuple of (lat, lon) if it is closed and simple."""
    if len(ring) < 4:
        return None
    if tuple(ring[0]) != tuple(ring[-1]):
        return None
    try:
        poly = Polygon([(lon, lat) for lat, lon in ring])
    except (ValueError, TypeError):
        return None
    if not poly.is_valid:
        return None
    return tuple((float(lat), float(lon)) for lat, lon in ring)


def _make_farm(farm_id, name, lat, lon, capacity, area, state, county, ring,
               report: IngestReport) -> SolarFarmRecord | None:
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        report.reject("out_of_range")
        return None
    if capacity <= 0:
        report.reject("bad_capacity")
        return None
    if area <= 0:
        report.reject("bad_area")
        return None
    boundary = None
    if ring is not None:
        boundary = _validate_ring(ring)
        if boundary is None:
            report.warn("geometry_defects")
    return SolarFarmRecord(
        farm_id=farm_id, name=name, lat=lat, lon=lon,
        dc_capacity_mw=capacity, area_m2=area, state=state, county=county,
        boundary=boundary,
    )


def _load_farms_csv(path, cols) -> tuple[list[SolarFarmRecord], IngestReport]:
    fh, reader = _open_reader(path, list(cols.values()), "farms")
    farms: list[SolarFarmRecord] = []
    report = IngestReport()
    with fh:
        for row in reader:
            report.total_rows += 1
            try:
                farm = _make_farm(
                    farm_id=row[cols["farm_id"]].strip(),
                    name=row[cols["name"]].strip(),
                    lat=float(row[cols["lat"]]),
                    lon=float(row[cols["lon"]]),
                    capacity=float(row[cols["capacity_mw_dc"]]),
                    area=float(row[cols["area_m2"]]),
                    state=row.get(cols["state"], "").strip(),
                    county=row.get(cols["county"], "").strip(),
                    ring=None,
                    report=report,
                )
            except (ValueError, AttributeError, TypeError):
                report.reject("parse_error")
                continue
            if farm is not None:
                farms.append(farm)
                report.accepted += 1
    return farms, report


def _load_farms_geojson(path, cols) -> tuple[list[SolarFarmRecord], IngestReport]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"farms file {path} is not valid GeoJSON: {exc}") from exc
    if data.get("type") != "FeatureCollection" or "features" not in data:
        raise DataError(f"farms file {path} is not a GeoJSON FeatureCollection")
    farms: list[SolarFarmRecord] = []
    report = IngestReport()
    for feature in data["features"]:
        report.total_rows += 1
        props = feature.get("properties") or {}
        try:
            ring = None
            geom = feature.get("geometry")
            if geom and geom.get("type") == "Polygon" and geom.get("coordinates"):
                # GeoJSON rings are [lon, lat]; only the outer ring is used
                ring = [(pt[1], pt[0]) for pt in geom["coordinates"][0]]
            elif geom is not None and geom.get("type") not in (None, "Point", "Polygon"):
                report.warn("geometry_defects")
            farm = _make_farm(
                farm_id=str(props[cols["farm_id"]]).strip(),
                name=str(props.get(cols["name"], "")).strip(),
                lat=float(props[cols["lat"]]),
                lon=float(props[cols["lon"]]),
                capacity=float(props[cols["capacity_mw_dc"]]),
                area=float(props[cols["area_m2"]]),
                state=str(props.get(cols["state"], "")).strip(),
                county=str(props.get(cols["county"], "")).strip(),
                ring=ring,
                report=report,
            )
        except (ValueError, AttributeError, TypeError, KeyError, IndexError):
            report.reject("parse_error")
            continue
        if farm is not None:
            farms.append(farm)
            report.accepted += 1
    return farms, report


def load_farms(path: str | Path, columns: dict | None = None) -> tuple[list[SolarFarmRecord], IngestReport]:
    """Load solar farm records from CSV or a GeoJSON FeatureCollection.

    Records with non-positive capacity or area are excluded and counted.
    A malformed polygon keeps the record as a centroid point and bumps the
    geometry_defects warning counter. Returns (records, report).
    """
    cols = dict(FARMS_COLUMNS)
    if columns:
        cols.update(columns)
    suffix = Path(path).suffix.lower()
    if suffix in (".geojson", ".json"):
        return _load_farms_geojson(path, cols)
    return _load_farms_csv(path, cols)


def load_airport_states(path: str | Path) -> dict[str, str]:
    """Auxiliary airport-code -> state mapping used by the state report cuts."""
    fh, reader = _open_reader(path, ["code", "state"], "airport states")
    table: dict[str, str] = {}
    with fh:
        for row in reader:
            code = (row.get("code") or "").strip()
            state = (row.get("state") or "").strip()
            if code and code not in table:
                table[code] = state
    return table
