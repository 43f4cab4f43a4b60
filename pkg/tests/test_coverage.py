import random

import numpy as np
import pytest

from oracles import naive_coverage
from skybeam.config import BeamParams
from skybeam.coverage import (CoverageSet, ShiftSet, TimeGrid, airborne_window,
                              build_time_grid, compute_coverage, coverage_prefilter,
                              ground_disk_radius_m)
from skybeam.errors import CacheMismatchError, DataError
from skybeam.geo import discretize_flight
from skybeam.ingest import Airport, FlightRecord, SolarFarmRecord
from skybeam.physics import QualifiedFarm, min_effective_capacity_mw, qualify_farms

BEAM = BeamParams()
ALT = 12100.0


def _airports(*rows):
    return {code: Airport(code, lat, lon, 0.0) for code, lat, lon in rows}


def _farm_with_beam_range(farm_id, lat, lon, r_beam_m):
    p_eff = min_effective_capacity_mw(BEAM, ALT) * r_beam_m / ALT
    rec = SolarFarmRecord(farm_id=farm_id, name=farm_id, lat=lat, lon=lon,
                          dc_capacity_mw=999.0, area_m2=p_eff * 1e6 / 20.0)
    if r_beam_m >= ALT:
        (q,) = qualify_farms([rec], BEAM, ALT)
        assert q.r_beam_m == pytest.approx(r_beam_m, rel=1e-9)
        return q
    # below-altitude beam range cannot pass qualification; build directly
    return QualifiedFarm(base=rec, p_safety_mw=p_eff, p_effective_mw=p_eff,
                        r_beam_m=r_beam_m)


class TestBuildTimeGrid:
    def test_single_flight_padded(self):
        rec = FlightRecord("X", "A", "B", 36000, 3600)  # 10:00-11:00
        grid = build_time_grid([rec], 60, 1800)
        assert grid.t0_utc == 34200  # 09:30
        assert grid.n_steps == 121  # through 11:30

    def test_zero_padding(self):
        rec = FlightRecord("X", "A", "B", 36000, 3600)
        grid = build_time_grid([rec], 60, 0)
        assert grid.t0_utc == 36000
        assert grid.time_at(grid.n_steps - 1) == 39600

    def test_hull_property(self):
        outer = FlightRecord("X", "A", "B", 36000, 3600)
        inner = FlightRecord("Y", "A", "B", 36600, 600)
        assert build_time_grid([outer], 60, 600) == build_time_grid([outer, inner], 60, 600)

    def test_empty_list_rejected(self):
        with pytest.raises(DataError):
            build_time_grid([], 60, 0)

    def test_snap_outward(self):
        rec = FlightRecord("X", "A", "B", 36010, 595)
        grid = build_time_grid([rec], 60, 0)
        assert grid.t0_utc == 36000  # floor to the minute
        assert grid.time_at(grid.n_steps - 1) == 36660  # ceil to the minute


def _overhead_instance(r_beam_m=20000.0, wheels_off=36000, elapsed=600):
    """A flight passing straight over one farm at the route midpoint."""
    airports = _airports(("A", 34.0, -100.0), ("B", 35.8, -100.0))
    farm = _farm_with_beam_range("F", 34.9, -100.0, r_beam_m)
    rec = FlightRecord("X", "A", "B", wheels_off, elapsed)
    traj = discretize_flight(rec, airports, ALT, 235.0, 60)
    return traj, farm, rec


class TestComputeCoverage:
    def test_boundary_inclusive(self):
        traj, farm, rec = _overhead_instance(r_beam_m=12100.0)
        grid = build_time_grid([rec], 60, 0)
        cov = compute_coverage([traj], [farm], grid, None, BEAM)
        # overhead slant range equals the beam range exactly: covered
        assert cov.n_entries == 1
        assert cov.z_m[0] == pytest.approx(12100.0)

    def test_boundary_exclusive_just_below(self):
        traj, farm, rec = _overhead_instance(r_beam_m=12099.0)
        grid = build_time_grid([rec], 60, 0)
        cov = compute_coverage([traj], [farm], grid, None, BEAM)
        assert cov.n_entries == 0

    def test_overhead_five_steps_and_shift_translation(self):
        # disk radius covers two steps either side of the midpoint pass
        traj, farm, rec = _overhead_instance(r_beam_m=46000.0)
        shifts = ShiftSet.build(120, 60)
        grid = build_time_grid([rec], 60, 120)
        cov = compute_coverage([traj], [farm], grid, shifts, BEAM)
        v_eff = traj.ground_distance_km * 1000 / rec.elapsed_s
        disk = ground_disk_radius_m(farm, ALT)
        expected = len([k for k in range(11)
                        if abs(k * 60 * v_eff - traj.ground_distance_km * 500) <= disk])
        assert expected == 5
        assert cov.n_entries == 5
        base = {(int(cov.flight_idx[k]), int(cov.t_idx[k])) for k in range(cov.n_entries)}
        for s in shifts.offsets:
            translated = {(i, t + s, s) for i, t in base}
            got = {(i, t, ss) for f, i, t, ss, z, c in cov.iter_entries() if ss == s}
            assert got == translated

    def test_coefficients_match_capacity_threshold(self):
        traj, farm, rec = _overhead_instance(r_beam_m=30000.0)
        grid = build_time_grid([rec], 60, 0)
        cov = compute_coverage([traj], [farm], grid, None, BEAM)
        assert cov.n_entries > 0
        # every entry can deliver at least the threshold at full capacity
        assert np.all(cov.coef * farm.p_effective_mw >= BEAM.threshold_mw - 1e-9)

    def test_mismatched_dt_rejected(self):
        traj, farm, rec = _overhead_instance()
        grid = TimeGrid(t0_utc=35000, dt_s=30, n_steps=10)
        with pytest.raises(DataError):
            compute_coverage([traj], [farm], grid, None, BEAM)

    def test_entries_sorted(self):
        traj, farm, rec = _overhead_instance(r_beam_m=46000.0)
        grid = build_time_grid([rec], 60, 0)
        cov = compute_coverage([traj], [farm], grid, None, BEAM)
        keys = list(zip(cov.flight_idx, cov.t_idx, cov.farm_idx))
        assert keys == sorted(keys)


def _random_instance(rng: random.Random):
    n_airports = rng.randint(2, 4)
    airports = {}
    for k in range(n_airports):
        airports[f"P{k}"] = Airport(f"P{k}", rng.uniform(32.0, 40.0),
                                    rng.uniform(-105.0, -95.0), 0.0)
    codes = sorted(airports)
    recs = []
    for k in range(rng.randint(1, 3)):
        o, d = rng.sample(codes, 2)
        recs.append(FlightRecord(f"R{k}", o, d, 36000 + 60 * rng.randint(0, 10),
                                 60 * rng.randint(5, 25)))
    trajs = [discretize_flight(r, airports, ALT, 235.0, 60) for r in recs]
    farms = []
    for k in range(rng.randint(1, 4)):
        farms.append(_farm_with_beam_range(
            f"F{k}", rng.uniform(32.0, 40.0), rng.uniform(-105.0, -95.0),
            rng.uniform(12150.0, 90000.0)))
    tau = rng.choice([0, 60, 120])
    shifts = ShiftSet.build(tau, 60) if tau else None
    grid = build_time_grid(recs, 60, tau)
    return trajs, farms, grid, shifts


class TestCoverageAgainstNaiveOracle:
    def test_matches_brute_force_on_random_instances(self):
        rng = random.Random(777)
        for _ in range(12):
            trajs, farms, grid, shifts = _random_instance(rng)
            cov = compute_coverage(trajs, farms, grid, shifts, BEAM)
            offsets = shifts.offsets if shifts else (0,)
            want_entries, want_airborne = naive_coverage(trajs, farms, grid, offsets, BEAM)
            got_entries = {
                (f, i, t, s, round(z, 6)) for f, i, t, s, z, _ in cov.iter_entries()
            }
            assert got_entries == want_entries
            got_airborne = set(cov.airborne_triples())
            assert got_airborne == want_airborne

    def test_spatial_index_is_invisible(self):
        rng = random.Random(4242)
        for _ in range(4):
            trajs, farms, grid, shifts = _random_instance(rng)
            with_index = compute_coverage(trajs, farms, grid, shifts, BEAM,
                                          use_spatial_index=True)
            without = compute_coverage(trajs, farms, grid, shifts, BEAM,
                                       use_spatial_index=False)
            assert np.array_equal(with_index.farm_idx, without.farm_idx)
            assert np.array_equal(with_index.t_idx, without.t_idx)
            assert np.array_equal(with_index.z_m, without.z_m)


class TestPrefilter:
    def test_far_farm_excluded(self):
        traj, _, _ = _overhead_instance()
        far = _farm_with_beam_range("far", 39.0, -90.0, 20000.0)  # ~900 km off route
        assert coverage_prefilter(traj, far) is False

    def test_midroute_farm_kept(self):
        traj, farm, _ = _overhead_instance()
        assert coverage_prefilter(traj, farm) is True

    def test_never_excludes_covered_pairs(self):
        rng = random.Random(99)
        for _ in range(15):
            trajs, farms, grid, shifts = _random_instance(rng)
            cov = compute_coverage(trajs, farms, grid, shifts, BEAM,
                                   use_spatial_index=False)
            covered_pairs = {(int(cov.farm_idx[k]), int(cov.flight_idx[k]))
                             for k in range(cov.n_entries)}
            for f, farm in enumerate(farms):
                for i, traj in enumerate(trajs):
                    if not coverage_prefilter(traj, farm):
                        assert (f, i) not in covered_pairs


class TestAirborneWindow:
    def test_window_bounds(self):
        rec = FlightRecord("X", "A", "B", 36000, 600)
        airports = _airports(("A", 34.0, -100.0), ("B", 35.8, -100.0))
        traj = discretize_flight(rec, airports, ALT, 235.0, 60)
        grid = build_time_grid([rec], 60, 120)
        lo, hi = airborne_window(traj, grid)
        assert grid.time_at(lo) >= rec.wheels_off_utc
        assert grid.time_at(hi) <= rec.wheels_off_utc + rec.elapsed_s
        assert grid.time_at(lo) - grid.dt_s < rec.wheels_off_utc


class TestSerialization:
    def _coverage(self):
        traj, farm, rec = _overhead_instance(r_beam_m=46000.0)
        grid = build_time_grid([rec], 60, 0)
        return compute_coverage([traj], [farm], grid, None, BEAM), grid

    def test_round_trip(self, tmp_path):
        cov, grid = self._coverage()
        key = bytes(range(32))
        path = tmp_path / "cov.sphc"
        cov.save(path, key)
        loaded = CoverageSet.load(path, key, grid, cov.n_farms, cov.n_flights,
                                  cov.airborne_lo, cov.airborne_hi)
        assert np.array_equal(loaded.farm_idx, cov.farm_idx)
        assert np.array_equal(loaded.flight_idx, cov.flight_idx)
        assert np.array_equal(loaded.t_idx, cov.t_idx)
        assert np.array_equal(loaded.z_m, cov.z_m)
        assert np.array_equal(loaded.coef, cov.coef)

    def test_byte_identical_saves(self, tmp_path):
        cov, _ = self._coverage()
        key = bytes(32)
        cov.save(tmp_path / "a.sphc", key)
        cov.save(tmp_path / "b.sphc", key)
        assert (tmp_path / "a.sphc").read_bytes() == (tmp_path / "b.sphc").read_bytes()

    def test_magic_and_layout(self, tmp_path):
        cov, _ = self._coverage()
        key = bytes(32)
        cov.save(tmp_path / "a.sphc", key)
        blob = (tmp_path / "a.sphc").read_bytes()
        assert blob[:4] == b"SPHC"
        assert int.from_bytes(blob[4:6], "little") == 1
        assert blob[6:38] == key

    def test_hash_mismatch_rejected(self, tmp_path):
        cov, grid = self._coverage()
        cov.save(tmp_path / "a.sphc", bytes(32))
        with pytest.raises(CacheMismatchError):
            CoverageSet.load(tmp_path / "a.sphc", bytes(range(32)), grid,
                             cov.n_farms, cov.n_flights, cov.airborne_lo, cov.airborne_hi)
