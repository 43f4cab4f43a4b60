import json
import sys
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def toy_config_dict() -> dict:
    return {
        "flights_path": str(FIXTURES / "flights_toy.csv"),
        "airports_path": str(FIXTURES / "airports.csv"),
        "farms_path": str(FIXTURES / "farms_toy.csv"),
        "airport_states_path": str(FIXTURES / "airport_states.csv"),
        "dt_s": 60,
        "tau_max_s": 60,
        "altitudes_m": [12100.0],
        "backend": "exact",
    }


@pytest.fixture()
def toy_config_path(tmp_path, toy_config_dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(toy_config_dict))
    return path
