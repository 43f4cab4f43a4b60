"""Ground-to-air microwave power beaming: farm-flight coverage modeling and
MILP-based schedule and selection optimization."""

from .config import AircraftParams, BeamParams, EconomicParams, RunConfig, load_config
from .coverage import CoverageSet, ShiftSet, TimeGrid, build_time_grid, compute_coverage
from .economics import SavingsBreakdown, breakdown, cost_rate_usd_mwh, saving_rate_usd_mwh
from .geo import GroundPoint, Trajectory, discretize_flight, great_circle_distance
from .ingest import load_airports, load_farms, load_flights
from .optimize import (ChoiceProblem, ScheduleProblem, Solution, build_choice_model,
                       build_schedule_model, penetration_sweep, solve_exact, solve_greedy)
from .physics import (beam_range_m, cruise_power_mw, end_to_end_efficiency,
                      qualify_farms, received_power_mw)

__version__ = "0.1.0"
