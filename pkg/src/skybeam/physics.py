"""Beam link budget: efficiency chain, capacity limits, near-field focusing
diagnostics, received power, beam range, and farm qualification.

Powers are carried in watts inside every formula; megawatts appear only at
the API boundary. The transfer coefficient eta*A_r/(pi*lambda*z) is the
single code path shared with the coverage precomputation and both MILPs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import AircraftParams, BeamParams

MW = 1e6


def end_to_end_efficiency(p: BeamParams) -> float:
    """Product of the four stage efficiencies (dc->rf, free space, rf->dc, spot)."""
    return p.eta_dc_rf * p.eta_free * p.eta_rf_dc * p.eta_spot


def cruise_power_mw(a: AircraftParams) -> float:
    """Propulsive power demand at cruise, in MW."""
    return a.drag_n * a.cruise_speed_ms / a.prop_efficiency / MW


def safety_capacity_mw(area_m2: float, safety_density_w_m2: float) -> float:
    """Maximum transmit power permitted by the ground power-density cap, in MW."""
    if area_m2 <= 0:
        raise ValueError(f"area must be > 0, got {area_m2}")
    return safety_density_w_m2 * area_m2 / MW


def effective_capacity_mw(dc_capacity_mw: float, area_m2: float, p: BeamParams) -> float:
    """min(safety capacity, DC capacity): the binding transmit limit."""
    return min(safety_capacity_mw(area_m2, p.safety_density_w_m2), dc_capacity_mw)


def fresnel_number(aperture_diameter_m: float, wavelength_m: float, z_m: float) -> float:
    """D^2 / (4 lambda z); values >= 1 indicate the radiative near field."""
    return aperture_diameter_m ** 2 / (4.0 * wavelength_m * z_m)


def focusing_phase(x_m: float, y_m: float, wavelength_m: float, z_m: float) -> float:
    """Quadratic aperture phase, in radians, that focuses the beam at range z."""
    if z_m <= 0:
        raise ValueError(f"range must be > 0, got {z_m}")
    return -math.pi * (x_m ** 2 + y_m ** 2) / (wavelength_m * z_m)


def spot_diameter(aperture_diameter_m: float, wavelength_m: float, z_m: float) -> float:
    """Central-lobe diameter 2.44 lambda z / D of the focused spot, in m."""
    return 2.44 * wavelength_m * z_m / aperture_diameter_m


def equivalent_aperture_diameter(area_m2: float) -> float:
    """Diameter of the circle with the farm's ground area.

    The focusing diagnostics need a single aperture scale; farm records
    only carry an area, so the equivalent-circle diameter stands in.
    """
    return 2.0 * math.sqrt(area_m2 / math.pi)


def transfer_coefficient(z_m: float, p: BeamParams) -> float:
    """Fraction of transmitted power captured by the receiver at slant range z."""
    if z_m <= 0:
        raise ValueError(f"slant range must be > 0, got {z_m}")
    return end_to_end_efficiency(p) * p.receiver_area_m2 / (math.pi * p.wavelength_m * z_m)


def received_power_mw(p_t_mw: float, z_m: float, p: BeamParams) -> float:
    """Received power in MW for transmit power p_t at slant range z."""
    if p_t_mw < 0:
        raise ValueError(f"transmit power must be >= 0, got {p_t_mw}")
    return transfer_coefficient(z_m, p) * (p_t_mw * MW) / MW


def beam_range_m(p_f_mw: float, p: BeamParams) -> float:
    """Maximum slant range at which transmit power p_f still delivers the threshold."""
    if p_f_mw <= 0:
        raise ValueError(f"farm power must be > 0, got {p_f_mw}")
    eta = end_to_end_efficiency(p)
    return eta * p.receiver_area_m2 * (p_f_mw * MW) / (math.pi * p.wavelength_m * (p.threshold_mw * MW))


def min_effective_capacity_mw(p: BeamParams, altitude_m: float) -> float:
    """Smallest effective capacity whose beam range reaches the given altitude."""
    if altitude_m <= 0:
        raise ValueError(f"altitude must be > 0, got {altitude_m}")
    eta = end_to_end_efficiency(p)
    return (
        math.pi * p.wavelength_m * (p.threshold_mw * MW) * altitude_m
        / (eta * p.receiver_area_m2)
    ) / MW


@dataclass(frozen=True)
class QualifiedFarm:
    """A farm admitted to the beaming network, with its derived capacities."""

    base: object  # SolarFarmRecord
    p_safety_mw: float
    p_effective_mw: float
    r_beam_m: float

    @property
    def lat(self) -> float:
        return self.base.lat

    @property
    def lon(self) -> float:
        return self.base.lon

    @property
    def farm_id(self) -> str:
        return self.base.farm_id


def qualify_farms(farms, p: BeamParams, altitude_m: float) -> list[QualifiedFarm]:
    """Keep exactly the farms whose effective capacity meets the altitude threshold.

    The threshold comparison is >= : a farm exactly at the minimum capacity
    qualifies, consistent with the inclusive z <= r_beam coverage test.
    """
    threshold = min_effective_capacity_mw(p, altitude_m)
    out: list[QualifiedFarm] = []
    for farm in farms:
        p_safety = safety_capacity_mw(farm.area_m2, p.safety_density_w_m2)
        p_eff = min(p_safety, farm.dc_capacity_mw)
        if p_eff >= threshold:
            out.append(QualifiedFarm(
                base=farm,
                p_safety_mw=p_safety,
                p_effective_mw=p_eff,
                r_beam_m=beam_range_m(p_eff, p),
            ))
    return out
