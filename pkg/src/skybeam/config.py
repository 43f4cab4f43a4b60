"""Run configuration: parameter blocks, JSON loading, and content hashing.

Defaults follow the reference system: a 6 GHz (0.05 m) beam, a 261.6 m2
fuselage rectenna, a 20 W/m2 ground power-density cap, and a 1 MW minimum
useful received power. Economic defaults are placeholder assumptions and
are echoed into every artifact so results always travel with the
parameters that produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

FLIGHTS_COLUMNS = {
    "flight_id": "flight_id",
    "origin": "origin",
    "dest": "dest",
    "wheels_off_local": "wheels_off_local",
    "date": "date",
    "elapsed_min": "elapsed_min",
}

AIRPORTS_COLUMNS = {
    "code": "code",
    "lat": "lat",
    "lon": "lon",
    "utc_offset_hours": "utc_offset_hours",
}

FARMS_COLUMNS = {
    "farm_id": "farm_id",
    "name": "name",
    "lat": "lat",
    "lon": "lon",
    "capacity_mw_dc": "capacity_mw_dc",
    "area_m2": "area_m2",
    "state": "state",
    "county": "county",
}


@dataclass(frozen=True)
class BeamParams:
    """Link-budget parameters for the microwave power beaming chain."""

    eta_dc_rf: float = 0.6887
    eta_free: float = 0.95
    eta_rf_dc: float = 0.7867
    eta_spot: float = 0.87
    wavelength_m: float = 0.05
    receiver_area_m2: float = 261.6
    safety_density_w_m2: float = 20.0
    threshold_mw: float = 1.0

    def validate(self) -> None:
        for name in ("eta_dc_rf", "eta_free", "eta_rf_dc", "eta_spot"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"beam_params.{name} must be in (0, 1], got {value}")
        for name in ("wavelength_m", "receiver_area_m2", "safety_density_w_m2", "threshold_mw"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ConfigError(f"beam_params.{name} must be > 0, got {value}")


@dataclass(frozen=True)
class AircraftParams:
    """Cruise-phase constants for the hybrid-electric airframe."""

    drag_n: float = 37.3e3
    cruise_speed_ms: float = 235.0
    prop_efficiency: float = 0.85
    fuel_flow_kg_h: float = 2200.0
    cruise_altitude_m: float = 12100.0

    def validate(self) -> None:
        for name in ("drag_n", "cruise_speed_ms", "fuel_flow_kg_h", "cruise_altitude_m"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ConfigError(f"aircraft_params.{name} must be > 0, got {value}")
        if not 0.0 < self.prop_efficiency <= 1.0:
            raise ConfigError(
                f"aircraft_params.prop_efficiency must be in (0, 1], got {self.prop_efficiency}"
            )


@dataclass(frozen=True)
class EconomicParams:
    """Price and emission rates that define the objective coefficients.

    The shipped numbers are documented assumptions, not measured values:
    fuel_co2_kg_kg is the standard jet-A stoichiometric factor; the rest
    are placeholders users should override for their own market data.
    """

    fuel_price_usd_kg: float = 0.80
    fuel_co2_kg_kg: float = 3.16
    elec_price_usd_mwh: float = 30.0
    solar_co2_kg_mwh: float = 40.0
    carbon_price_usd_kg: float = 0.19

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value < 0.0:
                raise ConfigError(f"economic_params.{f.name} must be >= 0, got {value}")


DEFAULT_RHO_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs, loadable from a single JSON file."""

    flights_path: str = ""
    airports_path: str = ""
    farms_path: str = ""
    airport_states_path: str = ""

    dt_s: int = 60
    tau_max_s: int = 1800
    altitudes_m: tuple[float, ...] = (12100.0,)

    beam: BeamParams = field(default_factory=BeamParams)
    aircraft: AircraftParams = field(default_factory=AircraftParams)
    econ: EconomicParams = field(default_factory=EconomicParams)

    backend: str = "exact"
    rho_farm_grid: tuple[float, ...] = DEFAULT_RHO_GRID
    rho_flight_grid: tuple[float, ...] = DEFAULT_RHO_GRID

    out_dir: str = "out"
    seed: int = 0

    exact_var_cap: int = 5000
    exact_time_limit_s: float = 0.0  # 0 disables the limit
    gap_tol: float = 1e-9

    cap_received_at_cruise: bool = False
    single_target_per_farm: bool = False
    day_night_mode: str = "farm_local"

    earth_radius_km: float = 6371.0088

    flights_columns: dict = field(default_factory=lambda: dict(FLIGHTS_COLUMNS))
    airports_columns: dict = field(default_factory=lambda: dict(AIRPORTS_COLUMNS))
    farms_columns: dict = field(default_factory=lambda: dict(FARMS_COLUMNS))

    def validate(self, check_files: bool = True) -> list[str]:
        """Return a list of problems; raise nothing so callers can aggregate."""
        problems: list[str] = []
        if self.dt_s <= 0:
            problems.append(f"dt_s must be > 0, got {self.dt_s}")
        if self.tau_max_s < 0:
            problems.append(f"tau_max_s must be >= 0, got {self.tau_max_s}")
        if self.dt_s > 0 and self.tau_max_s % self.dt_s != 0:
            problems.append(
                f"dt_s={self.dt_s} must divide tau_max_s={self.tau_max_s}"
            )
        if not self.altitudes_m:
            problems.append("altitudes_m must be non-empty")
        for h in self.altitudes_m:
            if h <= 0:
                problems.append(f"altitude {h} must be > 0")
        if self.backend not in ("exact", "greedy", "export"):
            problems.append(f"backend must be exact|greedy|export, got {self.backend!r}")
        if self.day_night_mode not in ("farm_local", "origin_local", "utc"):
            problems.append(
                f"day_night_mode must be farm_local|origin_local|utc, got {self.day_night_mode!r}"
            )
        for name in ("rho_farm_grid", "rho_flight_grid"):
            for rho in getattr(self, name):
                if not 0.0 <= rho <= 1.0:
                    problems.append(f"{name} entry {rho} outside [0, 1]")
        if self.exact_var_cap <= 0:
            problems.append(f"exact_var_cap must be > 0, got {self.exact_var_cap}")
        if self.earth_radius_km <= 0:
            problems.append(f"earth_radius_km must be > 0, got {self.earth_radius_km}")
        try:
            self.beam.validate()
        except ConfigError as exc:
            problems.append(str(exc))
        try:
            self.aircraft.validate()
        except ConfigError as exc:
            problems.append(str(exc))
        try:
            self.econ.validate()
        except ConfigError as exc:
            problems.append(str(exc))
        if check_files:
            for name in ("flights_path", "airports_path", "farms_path"):
                path = getattr(self, name)
                if not path:
                    problems.append(f"{name} is required")
                elif not Path(path).is_file():
                    problems.append(f"{name}: no such file: {path}")
            if self.airport_states_path and not Path(self.airport_states_path).is_file():
                problems.append(f"airport_states_path: no such file: {self.airport_states_path}")
        return problems


_NESTED = {"beam": BeamParams, "aircraft": AircraftParams, "econ": EconomicParams}
_JSON_ALIASES = {"beam_params": "beam", "aircraft_params": "aircraft", "economic_params": "econ"}


def _build_dataclass(cls, data: dict, where: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a plain dict (parsed JSON), rejecting unknown keys."""
    data = dict(data)
    for alias, target in _JSON_ALIASES.items():
        if alias in data:
            if target in data:
                raise ConfigError(f"config sets both {alias!r} and {target!r}")
            data[target] = data.pop(alias)
    kwargs = {}
    for key, value in data.items():
        if key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {key!r} must be an object")
            kwargs[key] = _build_dataclass(_NESTED[key], value, key)
        elif key in ("altitudes_m", "rho_farm_grid", "rho_flight_grid"):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return _build_dataclass(RunConfig, kwargs, "config")


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig, include_out_dir: bool = False) -> dict:
    """Canonical dict form. out_dir is excluded by default so artifacts and
    hashes do not depend on where the run happened to write its outputs."""
    data = dataclasses.asdict(cfg)
    for key in ("altitudes_m", "rho_farm_grid", "rho_flight_grid"):
        data[key] = list(data[key])
    if not include_out_dir:
        data.pop("out_dir")
    return data


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    """Hex digest identifying the scientific content of a configuration."""
    return hashlib.sha256(canonical_json(config_to_dict(cfg)).encode()).hexdigest()


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
