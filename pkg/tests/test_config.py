import dataclasses
import json

import pytest

from skybeam.config import (BeamParams, RunConfig, config_from_dict, config_hash,
                            config_to_dict, load_config)
from skybeam.errors import ConfigError


class TestLoading:
    def test_round_trip(self, tmp_path, toy_config_dict):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(toy_config_dict))
        cfg = load_config(path)
        assert cfg.dt_s == 60
        assert cfg.altitudes_m == (12100.0,)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            config_from_dict({"definitely_not_a_field": 1})

    def test_nested_param_blocks(self):
        cfg = config_from_dict({"beam_params": {"wavelength_m": 0.03},
                                "aircraft_params": {"cruise_speed_ms": 250.0},
                                "economic_params": {"fuel_price_usd_kg": 1.2}})
        assert cfg.beam.wavelength_m == 0.03
        assert cfg.aircraft.cruise_speed_ms == 250.0
        assert cfg.econ.fuel_price_usd_kg == 1.2

    def test_alias_conflict_rejected(self):
        with pytest.raises(ConfigError, match="both"):
            config_from_dict({"beam_params": {}, "beam": {}})

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)


class TestValidation:
    def test_dt_must_divide_tau(self):
        cfg = RunConfig(dt_s=60, tau_max_s=90)
        assert any("divide" in p for p in cfg.validate(check_files=False))

    def test_bad_backend(self):
        cfg = RunConfig(backend="quantum")
        assert any("backend" in p for p in cfg.validate(check_files=False))

    def test_bad_beam_params_surface(self):
        cfg = RunConfig(beam=BeamParams(eta_free=1.5))
        assert any("eta_free" in p for p in cfg.validate(check_files=False))

    def test_files_checked(self, tmp_path):
        cfg = RunConfig(flights_path=str(tmp_path / "x.csv"),
                        airports_path=str(tmp_path / "y.csv"),
                        farms_path=str(tmp_path / "z.csv"))
        problems = cfg.validate(check_files=True)
        assert sum("no such file" in p for p in problems) == 3


class TestHashing:
    def test_hash_excludes_out_dir(self):
        a = RunConfig(out_dir="one")
        b = RunConfig(out_dir="two")
        assert config_hash(a) == config_hash(b)
        assert "out_dir" not in config_to_dict(a)

    def test_hash_sensitive_to_parameters(self):
        a = RunConfig()
        b = dataclasses.replace(a, dt_s=30)
        assert config_hash(a) != config_hash(b)

    def test_hash_stable(self):
        assert config_hash(RunConfig()) == config_hash(RunConfig())
