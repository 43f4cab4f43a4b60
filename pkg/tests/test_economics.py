import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from skybeam.config import AircraftParams, EconomicParams
from skybeam.economics import (SavingsBreakdown, breakdown, cost_rate_usd_mwh,
                               net_rate_usd_mwh, saving_rate_usd_mwh)

A320 = AircraftParams()
P_CRUISE = 10.31

st_price = st.floats(min_value=0.0, max_value=10.0)
st_rate = st.floats(min_value=0.0, max_value=500.0)
st_econ = st.builds(
    EconomicParams,
    fuel_price_usd_kg=st_price,
    fuel_co2_kg_kg=st.floats(min_value=0.0, max_value=5.0),
    elec_price_usd_mwh=st_rate,
    solar_co2_kg_mwh=st.floats(min_value=0.0, max_value=200.0),
    carbon_price_usd_kg=st.floats(min_value=0.0, max_value=1.0),
)


class TestSavingRate:
    def test_fuel_only_reference(self):
        e = EconomicParams(fuel_price_usd_kg=1.0, carbon_price_usd_kg=0.0)
        rate = saving_rate_usd_mwh(e, A320, P_CRUISE)
        assert rate == pytest.approx(2200.0 / 10.31)
        assert rate == pytest.approx(213.4, abs=0.05)

    def test_all_prices_zero(self):
        e = EconomicParams(fuel_price_usd_kg=0.0, carbon_price_usd_kg=0.0)
        assert saving_rate_usd_mwh(e, A320, P_CRUISE) == 0.0

    def test_linear_in_fuel_price(self):
        e1 = EconomicParams(fuel_price_usd_kg=1.0, carbon_price_usd_kg=0.0)
        e2 = EconomicParams(fuel_price_usd_kg=2.0, carbon_price_usd_kg=0.0)
        assert saving_rate_usd_mwh(e2, A320, P_CRUISE) == pytest.approx(
            2 * saving_rate_usd_mwh(e1, A320, P_CRUISE))

    def test_rejects_nonpositive_cruise_power(self):
        with pytest.raises(ValueError):
            saving_rate_usd_mwh(EconomicParams(), A320, 0.0)


class TestCostRate:
    def test_electricity_only(self):
        e = EconomicParams(elec_price_usd_mwh=30.0, solar_co2_kg_mwh=0.0)
        assert cost_rate_usd_mwh(e) == 30.0

    def test_all_zero(self):
        e = EconomicParams(elec_price_usd_mwh=0.0, solar_co2_kg_mwh=0.0,
                           carbon_price_usd_kg=0.0)
        assert cost_rate_usd_mwh(e) == 0.0

    def test_carbon_term(self):
        e = EconomicParams(elec_price_usd_mwh=30.0, solar_co2_kg_mwh=40.0,
                           carbon_price_usd_kg=0.05)
        assert cost_rate_usd_mwh(e) == pytest.approx(32.0)


class TestBreakdown:
    def test_zero_energy(self):
        b = breakdown(0.0, 0.0, EconomicParams(), A320, P_CRUISE)
        assert b == SavingsBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def test_default_parameters_profitable(self):
        b = breakdown(10.0, 60.0, EconomicParams(), A320, P_CRUISE)
        assert b.total_usd > 0.0

    @given(st_econ, st.floats(min_value=0.0, max_value=1e4))
    def test_decomposition_identity(self, econ, energy):
        b = breakdown(energy, 1.0, econ, A320, P_CRUISE)
        assert b.total_usd == pytest.approx(b.fuel_saving_usd + b.co2_saving_usd, rel=1e-9)
        net = net_rate_usd_mwh(econ, A320, P_CRUISE)
        assert b.total_usd == pytest.approx(energy * net, rel=1e-9, abs=1e-9)

    @given(st_econ, st.floats(min_value=0.0, max_value=1e3),
           st.floats(min_value=0.0, max_value=1e3))
    def test_linear_in_energy(self, econ, e1, e2):
        a = breakdown(e1, 0.0, econ, A320, P_CRUISE)
        b = breakdown(e2, 0.0, econ, A320, P_CRUISE)
        both = breakdown(e1 + e2, 0.0, econ, A320, P_CRUISE)
        for field in ("fuel_saving_usd", "co2_saving_usd", "elec_cost_usd",
                      "co2_kg_avoided", "total_usd"):
            assert getattr(both, field) == pytest.approx(
                getattr(a, field) + getattr(b, field), rel=1e-9, abs=1e-9)

    def test_rejects_negative_energy(self):
        with pytest.raises(ValueError):
            breakdown(-1.0, 0.0, EconomicParams(), A320, P_CRUISE)

    def test_elec_cost_is_gross_cost_rate(self):
        econ = EconomicParams()
        b = breakdown(5.0, 0.0, econ, A320, P_CRUISE)
        assert b.elec_cost_usd == pytest.approx(5.0 * cost_rate_usd_mwh(econ))


class TestValidation:
    def test_negative_price_rejected(self):
        from skybeam.errors import ConfigError
        with pytest.raises(ConfigError):
            dataclasses.replace(EconomicParams(), fuel_price_usd_kg=-1.0).validate()
