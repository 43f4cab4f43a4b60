#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/fixtures/.

The toy network is built around two coverage situations:
  * FL001/FL002 cross farm F1 head-on at the same minute, and F1's
    capacity can only lift one of them past the received-power threshold,
    so the schedule optimizer must de-conflict them by one step;
  * FL003 crosses the larger farm F2 alone, as a shift-indifferent control.

farms_50.csv carries an audited qualification split at the default
parameters (altitude 12,100 m): the expected count is printed so it can be
checked against the number frozen in the acceptance suite.
"""

import csv
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from skybeam import config, physics  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

BEAM = config.BeamParams()
ALTITUDE = 12100.0


def farm_area_for_beam_range(r_beam_m: float) -> float:
    """Ground area whose safety capacity yields the given beam range."""
    p_eff = physics.min_effective_capacity_mw(BEAM, ALTITUDE) * r_beam_m / ALTITUDE
    return p_eff * 1e6 / BEAM.safety_density_w_m2


def write_airports() -> None:
    rows = [
        ("AAA", 34.0, -100.0, -6.0),
        ("BBB", 35.8, -100.0, -6.0),
        ("CCC", 34.0, -99.0, -6.0),
        ("EEE", 36.5, -95.0, -6.0),
        ("FFF", 37.5, -95.0, -6.0),
    ]
    with open(FIXTURES / "airports.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["code", "lat", "lon", "utc_offset_hours"])
        w.writerows(rows)
    with open(FIXTURES / "airport_states.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["code", "state"])
        w.writerows([("AAA", "TX"), ("BBB", "TX"), ("CCC", "OK"), ("EEE", "KS"), ("FFF", "KS")])


def write_toy_flights() -> None:
    rows = [
        ("FL001", "AAA", "BBB", "04:00", "2025-04-07", 10),
        ("FL002", "BBB", "AAA", "04:00", "2025-04-07", 10),
        ("FL003", "EEE", "FFF", "04:02", "2025-04-07", 10),
    ]
    with open(FIXTURES / "flights_toy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["flight_id", "origin", "dest", "wheels_off_local", "date", "elapsed_min"])
        w.writerows(rows)


def write_toy_farms() -> None:
    rows = [
        ("F1", "Midroute One", 34.9, -100.0, 999.0, round(farm_area_for_beam_range(12500.0), 1),
         "TX", "Hall"),
        ("F2", "Midroute Two", 37.0, -95.0, 999.0, round(farm_area_for_beam_range(20000.0), 1),
         "KS", "Labette"),
    ]
    with open(FIXTURES / "farms_toy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["farm_id", "name", "lat", "lon", "capacity_mw_dc", "area_m2", "state", "county"])
        w.writerows(rows)


def write_farms_50() -> int:
    """50 farms straddling the qualification threshold; returns the audit count."""
    states = ["TX", "CA", "FL", "AZ", "NC", "GA", "NV", "NM", "CO", "UT"]
    rows = []
    # 20 safety-limited qualifiers: area 0.9e6..2.8e6 m2 -> 18..56 MW safety
    for k in range(20):
        rows.append((f"Q{k:02d}", f"Big Array {k}", 33.0 + 0.5 * k, -118.0 + 0.9 * k,
                     100.0, 900_000.0 + 100_000.0 * k))
    # 5 dc-limited qualifiers: plenty of area, dc 17..41 MW
    for k in range(5):
        rows.append((f"D{k:02d}", f"Capped Array {k}", 36.0 + 0.7 * k, -102.0 + 1.1 * k,
                     17.0 + 6.0 * k, 5_000_000.0))
    # 15 rejected by area: safety capacity 10 MW
    for k in range(15):
        rows.append((f"A{k:02d}", f"Small Array {k}", 34.0 + 0.4 * k, -96.0 + 0.8 * k,
                     100.0, 500_000.0))
    # 10 rejected by dc capacity: 5..14 MW
    for k in range(10):
        rows.append((f"C{k:02d}", f"Thin Array {k}", 38.0 + 0.3 * k, -90.0 + 0.7 * k,
                     5.0 + 1.0 * k, 3_000_000.0))
    threshold = physics.min_effective_capacity_mw(BEAM, ALTITUDE)
    audit = sum(
        1 for _, _, _, _, dc, area in rows
        if min(dc, BEAM.safety_density_w_m2 * area / 1e6) >= threshold
    )
    with open(FIXTURES / "farms_50.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["farm_id", "name", "lat", "lon", "capacity_mw_dc", "area_m2", "state", "county"])
        for j, (fid, name, lat, lon, dc, area) in enumerate(rows):
            w.writerow([fid, name, lat, lon, dc, area, states[j % len(states)], "Somewhere"])
    return audit


def write_toy_geojson_farms() -> None:
    """The toy farms again, as GeoJSON with square boundary rings."""
    features = []
    with open(FIXTURES / "farms_toy.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            lat, lon = float(row["lat"]), float(row["lon"])
            d = 0.01
            ring = [[lon - d, lat - d], [lon + d, lat - d], [lon + d, lat + d],
                    [lon - d, lat + d], [lon - d, lat - d]]
            features.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "farm_id": row["farm_id"], "name": row["name"],
                    "lat": lat, "lon": lon,
                    "capacity_mw_dc": float(row["capacity_mw_dc"]),
                    "area_m2": float(row["area_m2"]),
                    "state": row["state"], "county": row["county"],
                },
            })
    doc = {"type": "FeatureCollection", "features": features}
    (FIXTURES / "farms_toy.geojson").write_text(json.dumps(doc, indent=2) + "\n")


def write_toy_config() -> None:
    doc = {
        "flights_path": "tests/fixtures/flights_toy.csv",
        "airports_path": "tests/fixtures/airports.csv",
        "farms_path": "tests/fixtures/farms_toy.csv",
        "airport_states_path": "tests/fixtures/airport_states.csv",
        "dt_s": 60,
        "tau_max_s": 60,
        "altitudes_m": [12100.0],
        "backend": "exact",
        "out_dir": "out/toy",
    }
    (FIXTURES / "config_toy.json").write_text(json.dumps(doc, indent=2) + "\n")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    write_airports()
    write_toy_flights()
    write_toy_farms()
    write_toy_geojson_farms()
    audit = write_farms_50()
    write_toy_config()
    print(f"fixtures written to {FIXTURES}")
    print(f"farms_50 audited qualification count at {ALTITUDE:.0f} m: {audit}")


if __name__ == "__main__":
    main()
