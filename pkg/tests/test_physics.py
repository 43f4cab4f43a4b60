import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from skybeam.config import AircraftParams, BeamParams
from skybeam.ingest import SolarFarmRecord
from skybeam.physics import (beam_range_m, cruise_power_mw, end_to_end_efficiency,
                             equivalent_aperture_diameter, focusing_phase, fresnel_number,
                             min_effective_capacity_mw, qualify_farms, received_power_mw,
                             safety_capacity_mw, spot_diameter, transfer_coefficient)

DEFAULTS = BeamParams()
A320 = AircraftParams()


class TestEfficiencyChain:
    def test_reference_stage_values(self):
        assert end_to_end_efficiency(DEFAULTS) == pytest.approx(0.4478, abs=1e-4)

    def test_all_unity(self):
        p = BeamParams(eta_dc_rf=1.0, eta_free=1.0, eta_rf_dc=1.0, eta_spot=1.0)
        assert end_to_end_efficiency(p) == 1.0

    def test_single_factor(self):
        p = BeamParams(eta_dc_rf=0.5, eta_free=1.0, eta_rf_dc=1.0, eta_spot=1.0)
        assert end_to_end_efficiency(p) == 0.5


class TestCruisePower:
    def test_reference_airframe(self):
        assert cruise_power_mw(A320) == pytest.approx(10.31, abs=0.01)

    def test_unit_case(self):
        a = AircraftParams(drag_n=1.0, cruise_speed_ms=1.0, prop_efficiency=1.0)
        assert cruise_power_mw(a) == pytest.approx(1e-6)

    def test_linear_in_speed(self):
        a2 = AircraftParams(cruise_speed_ms=A320.cruise_speed_ms * 2)
        assert cruise_power_mw(a2) == pytest.approx(2 * cruise_power_mw(A320))


class TestSafetyCapacity:
    def test_square_km(self):
        assert safety_capacity_mw(1e6, 20.0) == pytest.approx(20.0)

    def test_small_area_limit(self):
        assert safety_capacity_mw(1e-6, 20.0) == pytest.approx(2e-11)

    def test_linear_in_area(self):
        assert safety_capacity_mw(2e6, 20.0) == pytest.approx(2 * safety_capacity_mw(1e6, 20.0))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            safety_capacity_mw(0.0, 20.0)


class TestFocusingDiagnostics:
    def test_fresnel_number_value(self):
        assert fresnel_number(1000.0, 0.05, 12100.0) == pytest.approx(413.22, abs=0.01)

    def test_fresnel_near_field_at_cruise(self):
        # utility-scale apertures keep the link deep in the near field
        d = equivalent_aperture_diameter(1e6)
        assert fresnel_number(d, 0.05, 12100.0) >= 1.0

    def test_fresnel_quadruple_range(self):
        a = fresnel_number(1000.0, 0.05, 12100.0)
        b = fresnel_number(1000.0, 0.05, 4 * 12100.0)
        assert b == pytest.approx(a / 4)

    def test_phase_on_axis(self):
        assert focusing_phase(0.0, 0.0, 0.05, 12100.0) == 0.0

    def test_phase_rotational_symmetry(self):
        a = focusing_phase(30.0, 40.0, 0.05, 12100.0)
        b = focusing_phase(50.0, 0.0, 0.05, 12100.0)
        assert a == pytest.approx(b, rel=1e-12)

    def test_phase_reference_value(self):
        assert focusing_phase(100.0, 0.0, 0.05, 12100.0) == pytest.approx(
            -math.pi * 1e4 / 605.0)
        assert focusing_phase(100.0, 0.0, 0.05, 12100.0) == pytest.approx(-51.93, abs=0.01)

    def test_spot_reference_value(self):
        assert spot_diameter(500.0, 0.05, 12100.0) == pytest.approx(2.9524)

    def test_spot_linear_in_range(self):
        assert spot_diameter(500.0, 0.05, 2 * 12100.0) == pytest.approx(2 * 2.9524)

    def test_spot_halves_with_double_aperture(self):
        assert spot_diameter(1000.0, 0.05, 12100.0) == pytest.approx(2.9524 / 2)


class TestReceivedPowerAndRange:
    def test_threshold_loop_closure(self):
        got = received_power_mw(16.2, 12100.0, DEFAULTS)
        assert got == pytest.approx(1.0, abs=2e-3)

    def test_zero_input(self):
        assert received_power_mw(0.0, 12100.0, DEFAULTS) == 0.0

    def test_inverse_range_scaling(self):
        assert received_power_mw(10.0, 6050.0, DEFAULTS) == pytest.approx(
            2 * received_power_mw(10.0, 12100.0, DEFAULTS))

    def test_domain_error(self):
        with pytest.raises(ValueError):
            received_power_mw(1.0, 0.0, DEFAULTS)

    def test_beam_range_reference(self):
        assert beam_range_m(16.2, DEFAULTS) == pytest.approx(12100.0, rel=2e-3)

    def test_beam_range_linear(self):
        assert beam_range_m(32.4, DEFAULTS) == pytest.approx(2 * beam_range_m(16.2, DEFAULTS))

    def test_beam_range_small_capacity_limit(self):
        assert beam_range_m(1e-9, DEFAULTS) == pytest.approx(0.0, abs=1e-3)

    @given(st.floats(min_value=1e-3, max_value=1e4))
    def test_received_at_beam_range_is_threshold(self, p_mw):
        r = beam_range_m(p_mw, DEFAULTS)
        assert received_power_mw(p_mw, r, DEFAULTS) == pytest.approx(
            DEFAULTS.threshold_mw, rel=1e-9)

    @given(st.floats(min_value=100.0, max_value=1e6),
           st.floats(min_value=0.0, max_value=100.0))
    def test_monotone_in_range_linear_in_power(self, z, p):
        base = received_power_mw(p, z, DEFAULTS)
        assert received_power_mw(p, z * 1.5, DEFAULTS) <= base + 1e-12
        assert received_power_mw(2 * p, z, DEFAULTS) == pytest.approx(2 * base, rel=1e-12)


def _farm(farm_id, dc_mw, area_m2):
    return SolarFarmRecord(farm_id=farm_id, name=farm_id, lat=35.0, lon=-100.0,
                           dc_capacity_mw=dc_mw, area_m2=area_m2)


class TestQualification:
    def test_reference_threshold(self):
        assert min_effective_capacity_mw(DEFAULTS, 12100.0) == pytest.approx(16.2, abs=0.1)

    def test_boundary_inclusive(self):
        threshold = min_effective_capacity_mw(DEFAULTS, 12100.0)
        at = _farm("at", threshold, threshold * 1e6 / 20.0)
        out = qualify_farms([at], DEFAULTS, 12100.0)
        assert len(out) == 1

    def test_safety_limited_farm_rejected(self):
        # 100 MW dc but only 5e5 m2: safety capacity 10 MW < threshold
        farm = _farm("weak", 100.0, 5e5)
        out = qualify_farms([farm], DEFAULTS, 12100.0)
        assert out == []
        assert safety_capacity_mw(5e5, 20.0) == pytest.approx(10.0)

    def test_derived_fields(self):
        farm = _farm("big", 100.0, 2e6)
        (q,) = qualify_farms([farm], DEFAULTS, 12100.0)
        assert q.p_safety_mw == pytest.approx(40.0)
        assert q.p_effective_mw == pytest.approx(40.0)
        assert q.r_beam_m == pytest.approx(beam_range_m(40.0, DEFAULTS))
        assert q.r_beam_m >= 12100.0

    @given(st.lists(st.tuples(st.floats(min_value=0.1, max_value=200.0),
                              st.floats(min_value=1e4, max_value=5e6)),
                    min_size=1, max_size=30))
    def test_agrees_with_beam_range_filter(self, specs):
        farms = [_farm(f"f{k}", dc, area) for k, (dc, area) in enumerate(specs)]
        qualified = {q.farm_id for q in qualify_farms(farms, DEFAULTS, 12100.0)}
        independent = {
            f.farm_id for f in farms
            if beam_range_m(min(f.dc_capacity_mw, safety_capacity_mw(f.area_m2, 20.0)),
                            DEFAULTS) >= 12100.0
        }
        assert qualified == independent

    @given(st.floats(min_value=0.1, max_value=100.0),
           st.floats(min_value=1e4, max_value=5e6))
    def test_effective_capacity_idempotent(self, dc, area):
        farm = _farm("f", dc, area)
        out = qualify_farms([farm], DEFAULTS, 9000.0)
        if out:
            q = out[0]
            assert q.p_effective_mw <= dc
            assert q.p_effective_mw <= q.p_safety_mw
            assert q.p_effective_mw == min(q.p_safety_mw, dc)


class TestTransferCoefficient:
    def test_consistency_with_received_power(self):
        z = 15000.0
        assert transfer_coefficient(z, DEFAULTS) * 7.5 == pytest.approx(
            received_power_mw(7.5, z, DEFAULTS), rel=1e-12)
