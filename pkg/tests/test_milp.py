import itertools

import numpy as np
import pytest
from scipy import sparse

from skybeam.errors import DataError, SolverCapError
from skybeam.milp import (MilpModel, check_feasibility, read_solution_values,
                          solve_lp_relaxation, solve_milp, write_lp, write_mps,
                          write_solution_values, x_from_values)


def _knapsack(values, weights, capacity) -> MilpModel:
    n = len(values)
    return MilpModel(
        obj=np.array(values, dtype=float),
        lb=np.zeros(n), ub=np.ones(n),
        is_integer=np.ones(n, dtype=bool),
        var_names=[f"x{i}" for i in range(n)],
        a_ub=sparse.csr_matrix(np.array([weights], dtype=float)),
        b_ub=np.array([capacity], dtype=float),
        ub_names=["cap"],
    )


def _knapsack_best(values, weights, capacity) -> float:
    best = 0.0
    for combo in itertools.product((0, 1), repeat=len(values)):
        if np.dot(combo, weights) <= capacity:
            best = max(best, float(np.dot(combo, values)))
    return best


class TestBranchAndBound:
    def test_knapsack_matches_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = rng.integers(3, 9)
            values = rng.uniform(1, 10, n)
            weights = rng.uniform(1, 10, n)
            capacity = float(weights.sum() * rng.uniform(0.2, 0.8))
            model = _knapsack(values, weights, capacity)
            res = solve_milp(model)
            assert res.status == "optimal"
            assert res.z == pytest.approx(_knapsack_best(values, weights, capacity),
                                          rel=1e-9, abs=1e-9)

    def test_lp_relaxation_dominates(self):
        model = _knapsack([5.0, 4.0, 3.0], [2.0, 3.0, 1.0], 4.0)
        milp = solve_milp(model)
        lp = solve_lp_relaxation(model)
        assert lp.z >= milp.z - 1e-9

    def test_deterministic_resolve(self):
        model = _knapsack([5.0, 4.0, 3.0, 7.0, 2.0], [2.0, 3.0, 1.0, 4.0, 2.0], 6.0)
        a = solve_milp(model)
        b = solve_milp(model)
        assert a.z == b.z
        assert np.array_equal(a.x, b.x)
        assert a.nodes == b.nodes

    def test_empty_model(self):
        model = MilpModel(obj=np.zeros(0), lb=np.zeros(0), ub=np.zeros(0),
                          is_integer=np.zeros(0, dtype=bool), var_names=[])
        res = solve_milp(model)
        assert res.status == "optimal"
        assert res.z == 0.0

    def test_infeasible_model(self):
        model = MilpModel(
            obj=np.array([1.0]), lb=np.zeros(1), ub=np.ones(1),
            is_integer=np.array([True]), var_names=["x0"],
            a_ub=sparse.csr_matrix(np.array([[1.0], [-1.0]])),
            b_ub=np.array([0.2, -0.8]),  # 0.8 <= x <= 0.2: no binary fits
            ub_names=["hi", "lo"],
        )
        res = solve_milp(model)
        assert res.status == "infeasible"

    def test_var_cap_refusal(self):
        model = _knapsack([1.0] * 10, [1.0] * 10, 5.0)
        with pytest.raises(SolverCapError, match="cap"):
            solve_milp(model, var_cap=4)

    def test_time_limit_reports_gap(self):
        rng = np.random.default_rng(3)
        n = 18
        values = rng.uniform(1, 10, n)
        weights = rng.uniform(1, 10, n)
        model = _knapsack(values, weights, float(weights.sum()) * 0.5)
        res = solve_milp(model, time_limit_s=1e-9)
        assert res.status in ("optimal", "bound_gap")
        if res.status == "bound_gap":
            assert res.gap > 0 or res.z == -np.inf


class TestModelFiles:
    def _model(self):
        return _knapsack([5.0, 4.0], [2.0, 3.0], 4.0)

    def test_lp_text_structure(self, tmp_path):
        model = self._model()
        write_lp(model, tmp_path / "m.lp")
        text = (tmp_path / "m.lp").read_text()
        assert text.startswith("\\")
        assert "Maximize" in text
        assert " cap: " in text and "<= 4" in text
        assert "Binary" in text and "x0" in text and "x1" in text
        assert text.rstrip().endswith("End")

    def test_lp_one_row_per_constraint(self, tmp_path):
        model = self._model()
        write_lp(model, tmp_path / "m.lp")
        lines = (tmp_path / "m.lp").read_text().splitlines()
        constraint_lines = [ln for ln in lines if ln.startswith(" cap")]
        assert len(constraint_lines) == 1

    def test_mps_structure(self, tmp_path):
        model = self._model()
        write_mps(model, tmp_path / "m.mps")
        text = (tmp_path / "m.mps").read_text()
        for section in ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
            assert section in text
        assert text.count("'INTORG'") == text.count("'INTEND'") == 1
        assert " BV bnd x0" in text and " BV bnd x1" in text

    def test_empty_model_files_valid(self, tmp_path):
        model = MilpModel(obj=np.zeros(0), lb=np.zeros(0), ub=np.zeros(0),
                          is_integer=np.zeros(0, dtype=bool), var_names=[])
        write_lp(model, tmp_path / "e.lp")
        write_mps(model, tmp_path / "e.mps")
        assert "Maximize" in (tmp_path / "e.lp").read_text()
        assert "ENDATA" in (tmp_path / "e.mps").read_text()

    def test_deterministic_bytes(self, tmp_path):
        model = self._model()
        write_lp(model, tmp_path / "a.lp")
        write_lp(model, tmp_path / "b.lp")
        assert (tmp_path / "a.lp").read_bytes() == (tmp_path / "b.lp").read_bytes()
        write_mps(model, tmp_path / "a.mps")
        write_mps(model, tmp_path / "b.mps")
        assert (tmp_path / "a.mps").read_bytes() == (tmp_path / "b.mps").read_bytes()


class TestSolutionFiles:
    def test_round_trip(self, tmp_path):
        model = _knapsack([5.0, 4.0, 3.0], [2.0, 3.0, 1.0], 4.0)
        res = solve_milp(model)
        path = tmp_path / "sol.txt"
        write_solution_values(model, res.x, path)
        values = read_solution_values(path)
        x = x_from_values(model, values)
        assert np.allclose(x, res.x)
        assert check_feasibility(model, x) == []

    def test_missing_names_default_zero(self, tmp_path):
        model = _knapsack([5.0, 4.0], [2.0, 3.0], 4.0)
        (tmp_path / "sol.txt").write_text("x0 1\n")
        x = x_from_values(model, read_solution_values(tmp_path / "sol.txt"))
        assert list(x) == [1.0, 0.0]

    def test_unknown_name_rejected(self, tmp_path):
        model = _knapsack([5.0], [2.0], 4.0)
        (tmp_path / "sol.txt").write_text("nope 1\n")
        with pytest.raises(DataError, match="unknown variable"):
            x_from_values(model, read_solution_values(tmp_path / "sol.txt"))

    def test_malformed_line_rejected(self, tmp_path):
        (tmp_path / "sol.txt").write_text("x0 1 extra\n")
        with pytest.raises(DataError, match="expected 'name value'"):
            read_solution_values(tmp_path / "sol.txt")

    def test_comments_and_blanks_ignored(self, tmp_path):
        (tmp_path / "sol.txt").write_text("# header\n\nx0 0.5\n")
        assert read_solution_values(tmp_path / "sol.txt") == {"x0": 0.5}


class TestFeasibilityChecker:
    def test_flags_violated_row_by_name(self):
        model = _knapsack([5.0, 4.0], [2.0, 3.0], 4.0)
        bad = check_feasibility(model, np.array([1.0, 1.0]))
        assert any("cap" in msg for msg in bad)

    def test_flags_fractional_binary(self):
        model = _knapsack([5.0], [2.0], 4.0)
        bad = check_feasibility(model, np.array([0.5]))
        assert any("integrality" in msg for msg in bad)

    def test_accepts_feasible(self):
        model = _knapsack([5.0, 4.0], [2.0, 3.0], 4.0)
        assert check_feasibility(model, np.array([1.0, 0.0])) == []
