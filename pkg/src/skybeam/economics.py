"""Monetary and carbon accounting for beamed energy.

The optimizer's objective coefficient is saving_rate - cost_rate; the
report-side breakdown reuses the same rate functions so the solver
objective and the reported totals can never drift apart. Electricity-side
costs are netted inside the fuel and CO2 components so the two reported
components sum to the total cost reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import AircraftParams, EconomicParams


def saving_rate_usd_mwh(e: EconomicParams, a: AircraftParams, p_cruise_mw: float) -> float:
    """Dollars of fuel plus fuel-CO2 cost avoided per MWh of received energy."""
    if p_cruise_mw <= 0:
        raise ValueError(f"cruise power must be > 0, got {p_cruise_mw}")
    per_hour = a.fuel_flow_kg_h * (e.fuel_price_usd_kg + e.fuel_co2_kg_kg * e.carbon_price_usd_kg)
    return per_hour / p_cruise_mw


def cost_rate_usd_mwh(e: EconomicParams) -> float:
    """Dollars of electricity plus solar-CO2 cost per MWh of received energy."""
    return e.elec_price_usd_mwh + e.solar_co2_kg_mwh * e.carbon_price_usd_kg


def net_rate_usd_mwh(e: EconomicParams, a: AircraftParams, p_cruise_mw: float) -> float:
    return saving_rate_usd_mwh(e, a, p_cruise_mw) - cost_rate_usd_mwh(e)


@dataclass(frozen=True)
class SavingsBreakdown:
    energy_mwh: float
    duration_min: float
    fuel_saving_usd: float
    co2_saving_usd: float
    elec_cost_usd: float
    co2_kg_avoided: float
    total_usd: float


def breakdown(energy_mwh: float, duration_min: float, e: EconomicParams,
              a: AircraftParams, p_cruise_mw: float) -> SavingsBreakdown:
    """Decompose the value of received energy into fuel and CO2 components.

    fuel_saving nets the electricity price against the avoided fuel bill;
    co2_saving nets the solar emission cost against the avoided fuel CO2
    cost, so fuel_saving + co2_saving == energy * (saving_rate - cost_rate).
    """
    if energy_mwh < 0:
        raise ValueError(f"energy must be >= 0, got {energy_mwh}")
    fuel_kg_per_mwh = a.fuel_flow_kg_h / p_cruise_mw
    fuel_saving = energy_mwh * (fuel_kg_per_mwh * e.fuel_price_usd_kg - e.elec_price_usd_mwh)
    co2_saving = energy_mwh * e.carbon_price_usd_kg * (
        fuel_kg_per_mwh * e.fuel_co2_kg_kg - e.solar_co2_kg_mwh
    )
    return SavingsBreakdown(
        energy_mwh=energy_mwh,
        duration_min=duration_min,
        fuel_saving_usd=fuel_saving,
        co2_saving_usd=co2_saving,
        elec_cost_usd=energy_mwh * cost_rate_usd_mwh(e),
        co2_kg_avoided=energy_mwh * (fuel_kg_per_mwh * e.fuel_co2_kg_kg - e.solar_co2_kg_mwh),
        total_usd=fuel_saving + co2_saving,
    )
