"""The two planning MILPs and their interchangeable backends.

Schedule optimization assigns each flight exactly one departure shift and
allocates farm power across flights/time to maximize the net value of
beamed energy. Choice optimization instead selects which farms and flights
participate, at prescribed penetration rates, under fixed timetables.

Coverage indicators and transfer coefficients enter both models as fixed
parameters (precomputed), which keeps the formulations linear. Big-M
values are the tightest valid bounds: the capacity-weighted sum of
transfer coefficients over the farms covering a (flight, t) slot. Slots
that cannot reach the received-power threshold under any shift are
presolved away, removing their dead indicator binaries.

The schedule model decomposes into connected components of the farm-flight
coverage graph and is solved component-by-component (exact, because no
constraint couples components). The choice model is solved whole: its
cardinality constraints couple every farm and flight globally.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import economics, milp, physics
from .config import RunConfig
from .coverage import CoverageSet, ShiftSet
from .errors import SolutionInvalidError
from .milp import MilpModel, ModelComponent

P_DUST_MW = 1e-9


class _EconomicsMixin:
    @property
    def net_rate_usd_mwh(self) -> float:
        return self.saving_rate_usd_mwh - self.cost_rate_usd_mwh

    @property
    def dt_h(self) -> float:
        return self.dt_s / 3600.0

    def farm_capacity(self, f: int) -> float:
        return self.farms[f].p_effective_mw


@dataclass(frozen=True)
class ScheduleProblem(_EconomicsMixin):
    coverage: CoverageSet
    farms: tuple
    flight_ids: tuple
    shifts: ShiftSet
    saving_rate_usd_mwh: float
    cost_rate_usd_mwh: float
    threshold_mw: float
    dt_s: int
    cruise_cap_mw: float | None = None
    single_target_per_farm: bool = False


@dataclass(frozen=True)
class ChoiceProblem(_EconomicsMixin):
    coverage: CoverageSet
    farms: tuple
    flight_ids: tuple
    rho_farms: float
    rho_flights: float
    saving_rate_usd_mwh: float
    cost_rate_usd_mwh: float
    threshold_mw: float
    dt_s: int
    cruise_cap_mw: float | None = None
    single_target_per_farm: bool = False

    @property
    def k_farms(self) -> int:
        return round_count(self.rho_farms, len(self.farms))

    @property
    def k_flights(self) -> int:
        return round_count(self.rho_flights, len(self.flight_ids))


def round_count(rho: float, n: int) -> int:
    """Nearest integer (ties to even), clamped to [0, n]."""
    return min(max(int(round(rho * n)), 0), n)


def make_schedule_problem(coverage: CoverageSet, farms, flight_ids, shifts: ShiftSet,
                          cfg: RunConfig) -> ScheduleProblem:
    p_cruise = physics.cruise_power_mw(cfg.aircraft)
    return ScheduleProblem(
        coverage=coverage, farms=tuple(farms), flight_ids=tuple(flight_ids), shifts=shifts,
        saving_rate_usd_mwh=economics.saving_rate_usd_mwh(cfg.econ, cfg.aircraft, p_cruise),
        cost_rate_usd_mwh=economics.cost_rate_usd_mwh(cfg.econ),
        threshold_mw=cfg.beam.threshold_mw, dt_s=cfg.dt_s,
        cruise_cap_mw=p_cruise if cfg.cap_received_at_cruise else None,
        single_target_per_farm=cfg.single_target_per_farm,
    )


def make_choice_problem(coverage: CoverageSet, farms, flight_ids, rho_farms: float,
                        rho_flights: float, cfg: RunConfig) -> ChoiceProblem:
    p_cruise = physics.cruise_power_mw(cfg.aircraft)
    return ChoiceProblem(
        coverage=coverage, farms=tuple(farms), flight_ids=tuple(flight_ids),
        rho_farms=rho_farms, rho_flights=rho_flights,
        saving_rate_usd_mwh=economics.saving_rate_usd_mwh(cfg.econ, cfg.aircraft, p_cruise),
        cost_rate_usd_mwh=economics.cost_rate_usd_mwh(cfg.econ),
        threshold_mw=cfg.beam.threshold_mw, dt_s=cfg.dt_s,
        cruise_cap_mw=p_cruise if cfg.cap_received_at_cruise else None,
        single_target_per_farm=cfg.single_target_per_farm,
    )


# --- shared precomputation ----------------------------------------------


class _BaseTensor:
    """Shift-0 coverage grouped per flight and time step."""

    def __init__(self, problem):
        cov = problem.coverage
        self.by_flight: dict[int, dict[int, list[tuple[int, float]]]] = {}
        for row in range(cov.n_entries):
            i = int(cov.flight_idx[row])
            t = int(cov.t_idx[row])
            f = int(cov.farm_idx[row])
            self.by_flight.setdefault(i, {}).setdefault(t, []).append((f, float(cov.coef[row])))
        self.m0: dict[tuple[int, int], float] = {}
        for i, per_t in self.by_flight.items():
            for t, entries in per_t.items():
                self.m0[(i, t)] = sum(coef * problem.farm_capacity(f) for f, coef in entries)


class _Assembler:
    """Incremental COO model builder with named rows and variables."""

    def __init__(self):
        self.obj: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.integer: list[bool] = []
        self.names: list[str] = []
        self.ub_rows: list[list[tuple[int, float]]] = []
        self.ub_rhs: list[float] = []
        self.ub_names: list[str] = []
        self.eq_rows: list[list[tuple[int, float]]] = []
        self.eq_rhs: list[float] = []
        self.eq_names: list[str] = []

    def add_var(self, name: str, obj: float = 0.0, lb: float = 0.0, ub: float = math.inf,
                integer: bool = False) -> int:
        self.names.append(name)
        self.obj.append(obj)
        self.lb.append(lb)
        self.ub.append(1.0 if integer else ub)
        self.integer.append(integer)
        return len(self.names) - 1

    def add_ub(self, name: str, terms: list[tuple[int, float]], rhs: float) -> int:
        self.ub_rows.append(terms)
        self.ub_rhs.append(rhs)
        self.ub_names.append(name)
        return len(self.ub_rows) - 1

    def add_eq(self, name: str, terms: list[tuple[int, float]], rhs: float) -> int:
        self.eq_rows.append(terms)
        self.eq_rhs.append(rhs)
        self.eq_names.append(name)
        return len(self.eq_rows) - 1

    @staticmethod
    def _matrix(rows, n_vars):
        data, ri, ci = [], [], []
        for r, terms in enumerate(rows):
            for var, coef in terms:
                ri.append(r)
                ci.append(var)
                data.append(coef)
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n_vars))

    def build(self, meta: dict, components=None) -> MilpModel:
        n = len(self.names)
        return MilpModel(
            obj=np.array(self.obj), lb=np.array(self.lb), ub=np.array(self.ub),
            is_integer=np.array(self.integer, dtype=bool), var_names=self.names,
            a_ub=self._matrix(self.ub_rows, n) if self.ub_rows else None,
            b_ub=np.array(self.ub_rhs) if self.ub_rows else None,
            ub_names=self.ub_names,
            a_eq=self._matrix(self.eq_rows, n) if self.eq_rows else None,
            b_eq=np.array(self.eq_rhs) if self.eq_rows else None,
            eq_names=self.eq_names,
            components=components, meta=meta,
        )


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


# --- model builders ------------------------------------------------------


def build_schedule_model(problem: ScheduleProblem) -> MilpModel:
    """Schedule MILP: one shift per flight, capacity-coupled power allocation.

    Variables exist only where coverage makes them meaningful: flights
    without any coverage are fixed to shift 0 outside the model, and
    (flight, t) slots whose best-shift power bound stays below the
    threshold are presolved to zero.
    """
    cov = problem.coverage
    base = _BaseTensor(problem)
    offsets = problem.shifts.offsets
    n_steps = cov.grid.n_steps
    eps = problem.threshold_mw
    asm = _Assembler()

    modeled = sorted(base.by_flight)
    # candidate (i, t): some shift lands coverage there with enough power
    cand: dict[int, list[int]] = {}
    m_shift: dict[tuple[int, int, int], float] = {}
    for i in modeled:
        ts: set[int] = set()
        for slot, s in enumerate(offsets):
            for t_base in base.by_flight[i]:
                t = t_base + s
                if 0 <= t < n_steps:
                    m_shift[(i, t, slot)] = base.m0[(i, t_base)]
                    ts.add(t)
        cand[i] = sorted(
            t for t in ts
            if max(m_shift.get((i, t, slot), 0.0) for slot in range(len(offsets))) >= eps
        )

    d_var: dict[tuple[int, int], int] = {}
    for i in modeled:
        for slot in range(len(offsets)):
            d_var[(i, slot)] = asm.add_var(f"d_{i}_{slot}", integer=True)
    r_var: dict[tuple[int, int], int] = {}
    b_var: dict[tuple[int, int], int] = {}
    w = problem.net_rate_usd_mwh * problem.dt_h
    for i in modeled:
        for t in cand[i]:
            r_var[(i, t)] = asm.add_var(f"r_{i}_{t}", obj=w)
            b_var[(i, t)] = asm.add_var(f"b_{i}_{t}", integer=True)
    p_var: list[tuple[int, int, int, int, int, float]] = []  # (var, f, i, t, slot, coef)
    p_by_ft: dict[tuple[int, int], list[int]] = {}
    p_by_it: dict[tuple[int, int], list[int]] = {}
    for i in modeled:
        for t in cand[i]:
            for slot, s in enumerate(offsets):
                entries = base.by_flight[i].get(t - s)
                if not entries:
                    continue
                for f, coef in sorted(entries):
                    v = asm.add_var(f"p_{f}_{i}_{t}_{slot}")
                    p_var.append((v, f, i, t, slot, coef))
                    p_by_ft.setdefault((f, t), []).append(len(p_var) - 1)
                    p_by_it.setdefault((i, t), []).append(len(p_var) - 1)

    for i in modeled:
        asm.add_eq(f"pick_{i}", [(d_var[(i, slot)], 1.0) for slot in range(len(offsets))], 1.0)
    for v, f, i, t, slot, _ in p_var:
        asm.add_ub(f"plink_{f}_{i}_{t}_{slot}",
                   [(v, 1.0), (d_var[(i, slot)], -problem.farm_capacity(f))], 0.0)
    for (f, t), rows in sorted(p_by_ft.items()):
        asm.add_ub(f"farmcap_{f}_{t}", [(p_var[k][0], 1.0) for k in rows],
                   problem.farm_capacity(f))
    for i in modeled:
        for t in cand[i]:
            terms = [(r_var[(i, t)], 1.0)]
            terms += [(p_var[k][0], -p_var[k][5]) for k in p_by_it.get((i, t), [])]
            asm.add_eq(f"rdef_{i}_{t}", terms, 0.0)

            ub_terms = [(r_var[(i, t)], 1.0)]
            for slot in range(len(offsets)):
                m = m_shift.get((i, t, slot), 0.0)
                if m > 0.0:
                    ub_terms.append((d_var[(i, slot)], -m))
            asm.add_ub(f"rub_{i}_{t}", ub_terms, 0.0)

            bon_terms = [(b_var[(i, t)], 1.0)]
            for slot, s in enumerate(offsets):
                if cov.is_airborne(i, t, s):
                    bon_terms.append((d_var[(i, slot)], -1.0))
            asm.add_ub(f"bon_{i}_{t}", bon_terms, 0.0)

            asm.add_ub(f"rlo_{i}_{t}", [(b_var[(i, t)], eps), (r_var[(i, t)], -1.0)], 0.0)
            m_max = max(m_shift.get((i, t, slot), 0.0) for slot in range(len(offsets)))
            asm.add_ub(f"rhi_{i}_{t}", [(r_var[(i, t)], 1.0), (b_var[(i, t)], -m_max)], 0.0)
            if problem.cruise_cap_mw is not None:
                asm.add_ub(f"crcap_{i}_{t}", [(r_var[(i, t)], 1.0)], problem.cruise_cap_mw)

    if problem.single_target_per_farm:
        _add_single_target_rows(asm, problem, p_var, p_by_ft)

    meta = {
        "kind": "schedule",
        "problem": problem,
        "d_var": d_var,
        "r_var": r_var,
        "b_var": b_var,
        "p_var": p_var,
        "modeled_flights": modeled,
        "candidates": cand,
    }
    components = _schedule_components(problem, base, asm, meta)
    return asm.build(meta, components)


def _add_single_target_rows(asm: _Assembler, problem, p_var, p_by_ft) -> None:
    """Optional restriction: a farm may serve at most one flight per step."""
    for (f, t), rows in sorted(p_by_ft.items()):
        flights = sorted({p_var[k][2] for k in rows})
        if len(flights) < 2:
            continue
        y = {i: asm.add_var(f"y_{f}_{i}_{t}", integer=True) for i in flights}
        asm.add_ub(f"starg_{f}_{t}", [(v, 1.0) for v in y.values()], 1.0)
        for k in rows:
            v, _, i = p_var[k][0], p_var[k][1], p_var[k][2]
            asm.add_ub(f"stlink_{f}_{i}_{t}_{k}", [(v, 1.0), (y[i], -problem.farm_capacity(f))], 0.0)


def _schedule_components(problem, base: _BaseTensor, asm: _Assembler, meta) -> list[ModelComponent]:
    """Partition variables and rows by connected farm-flight blocks."""
    n_flights = problem.coverage.n_flights
    n_farms = len(problem.farms)
    uf = _UnionFind(n_flights + n_farms)
    for i, per_t in base.by_flight.items():
        for entries in per_t.values():
            for f, _ in entries:
                uf.union(i, n_flights + f)

    var_comp = np.full(len(asm.names), -1, dtype=np.int64)
    for (i, _slot), v in meta["d_var"].items():
        var_comp[v] = uf.find(i)
    for (i, _t), v in meta["r_var"].items():
        var_comp[v] = uf.find(i)
    for (i, _t), v in meta["b_var"].items():
        var_comp[v] = uf.find(i)
    for v, _f, i, _t, _slot, _coef in meta["p_var"]:
        var_comp[v] = uf.find(i)
    for v, name in enumerate(asm.names):
        if name.startswith("y_"):
            _, f, i, t = name.split("_")
            var_comp[v] = uf.find(int(i))

    def row_root(terms) -> int:
        return int(var_comp[terms[0][0]])

    ub_comp = [row_root(terms) for terms in asm.ub_rows]
    eq_comp = [row_root(terms) for terms in asm.eq_rows]

    components = []
    for root in sorted(set(var_comp[var_comp >= 0])):
        components.append(ModelComponent(
            var_ids=np.nonzero(var_comp == root)[0],
            ub_rows=np.nonzero(np.array(ub_comp) == root)[0] if ub_comp else np.zeros(0, dtype=np.int64),
            eq_rows=np.nonzero(np.array(eq_comp) == root)[0] if eq_comp else np.zeros(0, dtype=np.int64),
        ))
    return components


def build_choice_model(problem: ChoiceProblem) -> MilpModel:
    """Choice MILP: pick k farms and k flights, then allocate power.

    All farms and flights carry selection binaries (the cardinality
    constraints are equalities, and an equipped participant may carry zero
    power), but allocation variables exist only on coverage entries whose
    slot can reach the threshold.
    """
    cov = problem.coverage
    base = _BaseTensor(problem)
    n_farms = len(problem.farms)
    n_flights = len(problem.flight_ids)
    eps = problem.threshold_mw
    asm = _Assembler()

    cand: dict[int, list[int]] = {
        i: sorted(t for t in per_t if base.m0[(i, t)] >= eps)
        for i, per_t in sorted(base.by_flight.items())
    }

    xf_var = [asm.add_var(f"xfarm_{f}", integer=True) for f in range(n_farms)]
    xi_var = [asm.add_var(f"xflt_{i}", integer=True) for i in range(n_flights)]
    w = problem.net_rate_usd_mwh * problem.dt_h
    r_var: dict[tuple[int, int], int] = {}
    b_var: dict[tuple[int, int], int] = {}
    for i in sorted(cand):
        for t in cand[i]:
            r_var[(i, t)] = asm.add_var(f"r_{i}_{t}", obj=w)
            b_var[(i, t)] = asm.add_var(f"b_{i}_{t}", integer=True)
    p_var: list[tuple[int, int, int, int, None, float]] = []
    p_by_ft: dict[tuple[int, int], list[int]] = {}
    p_by_it: dict[tuple[int, int], list[int]] = {}
    for i in sorted(cand):
        for t in cand[i]:
            for f, coef in sorted(base.by_flight[i][t]):
                v = asm.add_var(f"p_{f}_{i}_{t}")
                p_var.append((v, f, i, t, None, coef))
                p_by_ft.setdefault((f, t), []).append(len(p_var) - 1)
                p_by_it.setdefault((i, t), []).append(len(p_var) - 1)

    for v, f, i, t, _slot, _coef in p_var:
        asm.add_ub(f"plink_{f}_{i}_{t}", [(v, 1.0), (xf_var[f], -problem.farm_capacity(f))], 0.0)
    for (f, t), rows in sorted(p_by_ft.items()):
        terms = [(p_var[k][0], 1.0) for k in rows]
        terms.append((xf_var[f], -problem.farm_capacity(f)))
        asm.add_ub(f"farmcap_{f}_{t}", terms, 0.0)
    asm.add_eq("fcount", [(v, 1.0) for v in xf_var], float(problem.k_farms))
    asm.add_eq("icount", [(v, 1.0) for v in xi_var], float(problem.k_flights))
    for i in sorted(cand):
        for t in cand[i]:
            m0 = base.m0[(i, t)]
            terms = [(r_var[(i, t)], 1.0)]
            terms += [(p_var[k][0], -p_var[k][5]) for k in p_by_it.get((i, t), [])]
            asm.add_eq(f"rdef_{i}_{t}", terms, 0.0)
            asm.add_ub(f"rub_{i}_{t}", [(r_var[(i, t)], 1.0), (xi_var[i], -m0)], 0.0)
            asm.add_ub(f"bon_{i}_{t}", [(b_var[(i, t)], 1.0), (xi_var[i], -1.0)], 0.0)
            asm.add_ub(f"rlo_{i}_{t}", [(b_var[(i, t)], eps), (r_var[(i, t)], -1.0)], 0.0)
            asm.add_ub(f"rhi_{i}_{t}", [(r_var[(i, t)], 1.0), (b_var[(i, t)], -m0)], 0.0)
            if problem.cruise_cap_mw is not None:
                asm.add_ub(f"crcap_{i}_{t}", [(r_var[(i, t)], 1.0)], problem.cruise_cap_mw)

    if problem.single_target_per_farm:
        _add_single_target_rows(asm, problem, p_var, p_by_ft)

    meta = {
        "kind": "choice",
        "problem": problem,
        "xf_var": xf_var,
        "xi_var": xi_var,
        "r_var": r_var,
        "b_var": b_var,
        "p_var": p_var,
        "candidates": cand,
    }
    return asm.build(meta)


# --- solutions -----------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    """A validated outcome of either MILP.

    received holds exactly the beaming-active rows (indicator 1, power at
    or above the threshold); a (flight, t) absent from received delivers
    zero. allocations are positive transmit powers on coverage entries.
    """

    kind: str
    status: str
    z_usd: float
    gap: float
    shifts_chosen: tuple = ()          # (flight, step offset), schedule kind
    selected_farms: tuple = ()         # farm indices, choice kind
    selected_flights: tuple = ()
    allocations: tuple = ()            # (farm, flight, t, p_mw)
    received: tuple = ()               # (flight, t, r_mw)
    energy_mwh: float = 0.0
    duration_min: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "status": self.status,
            "z_usd": self.z_usd if math.isfinite(self.z_usd) else None,
            "gap": self.gap if math.isfinite(self.gap) else None,  # None: unproven
            "shifts_chosen": [list(row) for row in self.shifts_chosen],
            "selected_farms": list(self.selected_farms),
            "selected_flights": list(self.selected_flights),
            "allocations": [list(row) for row in self.allocations],
            "received": [list(row) for row in self.received],
            "energy_mwh": self.energy_mwh,
            "duration_min": self.duration_min,
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_json_dict(cls, data: dict) -> "Solution":
        z = data["z_usd"]
        gap = data["gap"]
        return cls(
            kind=data["kind"], status=data["status"],
            z_usd=-math.inf if z is None else z,
            gap=math.inf if gap is None else gap,
            shifts_chosen=tuple(tuple(row) for row in data["shifts_chosen"]),
            selected_farms=tuple(data["selected_farms"]),
            selected_flights=tuple(data["selected_flights"]),
            allocations=tuple(tuple(row) for row in data["allocations"]),
            received=tuple(tuple(row) for row in data["received"]),
            energy_mwh=data["energy_mwh"], duration_min=data["duration_min"],
        )


def _assemble_solution(problem, kind: str, status: str, gap: float,
                       shifts_chosen: dict[int, int],
                       selected_farms, selected_flights,
                       alloc: dict[tuple[int, int, int], float],
                       received: dict[tuple[int, int], float]) -> Solution:
    alloc_rows = tuple(
        (f, i, t, alloc[(f, i, t)])
        for i, t, f in sorted((i, t, f) for (f, i, t) in alloc)
    )
    received_rows = tuple((i, t, received[(i, t)]) for i, t in sorted(received))
    energy = sum(r for _, _, r in received_rows) * problem.dt_h
    z = problem.net_rate_usd_mwh * energy
    return Solution(
        kind=kind, status=status, z_usd=z, gap=gap,
        shifts_chosen=tuple(sorted(shifts_chosen.items())),
        selected_farms=tuple(sorted(selected_farms)),
        selected_flights=tuple(sorted(selected_flights)),
        allocations=alloc_rows, received=received_rows,
        energy_mwh=energy,
        duration_min=len(received_rows) * problem.dt_s / 60.0,
    )


def _solution_from_x(model: MilpModel, x: np.ndarray, status: str, gap: float) -> Solution:
    """Map a feasible variable vector back to a domain solution.

    Allocation dust below P_DUST_MW and allocations outside the chosen
    shift or a zero beaming indicator are dropped, and received power is
    recomputed from the kept allocations so the solution internally
    satisfies r = sum(coef * p) exactly.
    """
    meta = model.meta
    problem = meta["problem"]
    kind = meta["kind"]

    shifts_chosen: dict[int, int] = {}
    selected_farms: list[int] = []
    selected_flights: list[int] = []
    if kind == "schedule":
        offsets = problem.shifts.offsets
        for i in range(len(problem.flight_ids)):
            shifts_chosen[i] = 0
        for i in meta["modeled_flights"]:
            chosen = [slot for slot in range(len(offsets)) if x[meta["d_var"][(i, slot)]] > 0.5]
            shifts_chosen[i] = offsets[chosen[0]] if chosen else 0
    else:
        selected_farms = [f for f, v in enumerate(meta["xf_var"]) if x[v] > 0.5]
        selected_flights = [i for i, v in enumerate(meta["xi_var"]) if x[v] > 0.5]

    b_on = {key: x[v] > 0.5 for key, v in meta["b_var"].items()}
    alloc: dict[tuple[int, int, int], float] = {}
    received: dict[tuple[int, int], float] = {}
    for v, f, i, t, slot, coef in meta["p_var"]:
        p = float(x[v])
        if p < P_DUST_MW or not b_on.get((i, t), False):
            continue
        if kind == "schedule" and problem.shifts.offsets[slot] != shifts_chosen[i]:
            continue
        alloc[(f, i, t)] = alloc.get((f, i, t), 0.0) + p
        received[(i, t)] = received.get((i, t), 0.0) + coef * p

    if kind == "schedule":
        # a flight that carries no power is shift-indifferent: pin it to 0
        powered = {i for i, _t in received}
        for i in shifts_chosen:
            if i not in powered:
                shifts_chosen[i] = 0

    return _assemble_solution(problem, kind, status, gap, shifts_chosen,
                              selected_farms, selected_flights, alloc, received)


# --- validation ------------------------------------------------------------


def _base_entry_table(problem) -> dict[tuple[int, int, int], float]:
    """(farm, flight, base t) -> transfer coefficient, from the coverage set."""
    cov = problem.coverage
    return {
        (int(cov.farm_idx[k]), int(cov.flight_idx[k]), int(cov.t_idx[k])): float(cov.coef[k])
        for k in range(cov.n_entries)
    }


def validate_solution(problem, sol: Solution, tol: float = 1e-6) -> list[str]:
    """Check every solution invariant; returns human-readable violations.

    Run after every solve and import: a solution that fails any check is
    rejected, never silently repaired.
    """
    bad: list[str] = []
    entries = _base_entry_table(problem)
    n_farms = len(problem.farms)
    n_flights = len(problem.flight_ids)
    eps = problem.threshold_mw

    shift_of = dict(sol.shifts_chosen)
    if sol.kind == "schedule":
        if sorted(shift_of) != list(range(n_flights)):
            bad.append("shift assignment: not exactly one shift per flight")
        for i, s in sol.shifts_chosen:
            if s not in problem.shifts.offsets:
                bad.append(f"shift assignment: flight {i} shift {s} outside the admissible set")
    else:
        if len(sol.selected_farms) != problem.k_farms:
            bad.append(
                f"farm penetration cardinality: {len(sol.selected_farms)} selected, "
                f"expected {problem.k_farms}"
            )
        if len(sol.selected_flights) != problem.k_flights:
            bad.append(
                f"flight penetration cardinality: {len(sol.selected_flights)} selected, "
                f"expected {problem.k_flights}"
            )

    sel_farms = set(sol.selected_farms)
    sel_flights = set(sol.selected_flights)
    per_ft: dict[tuple[int, int], float] = {}
    for f, i, t, p in sol.allocations:
        if not (0 <= f < n_farms and 0 <= i < n_flights):
            bad.append(f"allocation indices out of range: farm {f}, flight {i}")
            continue
        if p <= 0:
            bad.append(f"allocation power must be positive: {p} at farm {f}, flight {i}, t {t}")
        cap = problem.farm_capacity(f)
        if p > cap * (1 + tol) + tol:
            bad.append(f"farm capacity link: p {p:.9g} exceeds capacity {cap:.9g} "
                       f"at farm {f}, flight {i}, t {t}")
        t_base = t - shift_of.get(i, 0) if sol.kind == "schedule" else t
        if (f, i, t_base) not in entries:
            bad.append(f"coverage gating: no coverage entry for farm {f}, flight {i}, t {t}")
        if sol.kind == "choice":
            if f not in sel_farms:
                bad.append(f"farm selection gating: allocation from unselected farm {f}")
            if i not in sel_flights:
                bad.append(f"flight selection gating: allocation to unselected flight {i}")
        per_ft[(f, t)] = per_ft.get((f, t), 0.0) + p
    for (f, t), total in sorted(per_ft.items()):
        cap = problem.farm_capacity(f)
        if total > cap * (1 + tol) + tol:
            bad.append(f"farm capacity: total dispatch {total:.9g} exceeds {cap:.9g} at farm {f}, t {t}")

    received_of = {(i, t): r for i, t, r in sol.received}
    recomputed: dict[tuple[int, int], float] = {}
    for f, i, t, p in sol.allocations:
        t_base = t - shift_of.get(i, 0) if sol.kind == "schedule" else t
        coef = entries.get((f, i, t_base))
        if coef is not None:
            recomputed[(i, t)] = recomputed.get((i, t), 0.0) + coef * p
    for key, r in sorted(received_of.items()):
        i, t = key
        expect = recomputed.get(key, 0.0)
        if abs(r - expect) > tol * max(1.0, abs(expect)):
            bad.append(f"received power definition: r {r:.9g} != sum(coef*p) {expect:.9g} "
                       f"at flight {i}, t {t}")
        if r < eps * (1 - tol):
            bad.append(f"received-power threshold: r {r:.9g} below threshold {eps:.9g} "
                       f"at flight {i}, t {t} with beaming indicator set")
        if problem.cruise_cap_mw is not None and r > problem.cruise_cap_mw * (1 + tol):
            bad.append(f"cruise power cap: r {r:.9g} exceeds {problem.cruise_cap_mw:.9g} "
                       f"at flight {i}, t {t}")
        if sol.kind == "choice" and i not in sel_flights:
            bad.append(f"flight selection gating: received power at unselected flight {i}, t {t}")
    for key in sorted(recomputed):
        if key not in received_of and recomputed[key] > tol:
            bad.append(f"beaming indicator: allocations at flight {key[0]}, t {key[1]} "
                       "without the beaming indicator set")

    if problem.single_target_per_farm:
        flights_per_ft: dict[tuple[int, int], set[int]] = {}
        for f, i, t, _ in sol.allocations:
            flights_per_ft.setdefault((f, t), set()).add(i)
        for (f, t), who in sorted(flights_per_ft.items()):
            if len(who) > 1:
                bad.append(f"single-target restriction: farm {f} serves {len(who)} flights at t {t}")

    z_expect = problem.net_rate_usd_mwh * problem.dt_h * sum(r for _, _, r in sol.received)
    if abs(sol.z_usd - z_expect) > 1e-6 * max(1.0, abs(z_expect)):
        bad.append(f"objective consistency: Z {sol.z_usd:.9g} != recomputed {z_expect:.9g}")
    return bad


def check_solution(problem, sol: Solution, tol: float = 1e-6) -> None:
    bad = validate_solution(problem, sol, tol)
    if bad:
        raise SolutionInvalidError("; ".join(bad))


# --- backends ----------------------------------------------------------------


def solve_exact(model: MilpModel, gap_tol: float = 1e-9, time_limit_s: float = 0.0,
                var_cap: int = 5000) -> Solution:
    """Branch-and-bound to proven optimality; refuses oversized models.

    The returned solution is re-validated against every invariant before
    it leaves this function.
    """
    res = milp.solve_milp(model, gap_tol=gap_tol, time_limit_s=time_limit_s, var_cap=var_cap)
    problem = model.meta["problem"]
    if res.status == "infeasible":
        return Solution(kind=model.meta["kind"], status="infeasible", z_usd=-math.inf, gap=math.inf)
    sol = _solution_from_x(model, res.x, status=res.status, gap=res.gap)
    check_solution(problem, sol)
    return sol


def solve_lp_bound(model: MilpModel) -> float:
    """Objective of the LP relaxation: an upper bound on the MILP optimum."""
    res = milp.solve_lp_relaxation(model)
    return res.z


def build_model(problem) -> MilpModel:
    if isinstance(problem, ScheduleProblem):
        return build_schedule_model(problem)
    return build_choice_model(problem)


def zero_shift_variant(problem: ScheduleProblem) -> ScheduleProblem:
    """The same instance with the shift set collapsed to {0} (baseline)."""
    return dataclasses.replace(problem, shifts=ShiftSet.build(0, problem.shifts.dt_s))


# --- greedy heuristic --------------------------------------------------------


def _greedy_rank(scores: dict[int, float], k: int) -> list[int]:
    order = sorted(scores, key=lambda idx: (-scores[idx], idx))
    return sorted(order[:k])


def solve_greedy(problem) -> Solution:
    """Feasible heuristic solution without any LP machinery.

    Schedule: flights in flight_id order pick the shift with the best
    marginal energy under current remaining capacity (ties prefer shift 0,
    then the earlier slot), then commit their allocation. Choice: the
    top-k farms and flights by capacity-weighted coverage score are
    selected, then each time step is allocated in descending-coefficient
    order; sub-threshold receivers are dropped.
    """
    if isinstance(problem, ScheduleProblem):
        return _greedy_schedule(problem)
    return _greedy_choice(problem)


def _greedy_schedule(problem: ScheduleProblem) -> Solution:
    base = _BaseTensor(problem)
    offsets = problem.shifts.offsets
    n_steps = problem.coverage.grid.n_steps
    eps = problem.threshold_mw

    remaining: dict[tuple[int, int], float] = {}
    served_by: dict[tuple[int, int], int] = {}

    def rem(f: int, t: int) -> float:
        return remaining.get((f, t), problem.farm_capacity(f))

    def simulate(i: int, s: int):
        """Energy and allocation plan for flight i under shift s, no commit."""
        energy = 0.0
        plan = []
        for t_base, entries in sorted(base.by_flight[i].items()):
            t = t_base + s
            if not 0 <= t < n_steps:
                continue
            r = 0.0
            rows = []
            for f, coef in sorted(entries, key=lambda e: (-e[1], e[0])):
                if problem.single_target_per_farm and served_by.get((f, t), i) != i:
                    continue
                avail = rem(f, t)
                if avail <= P_DUST_MW:
                    continue
                take = avail
                if problem.cruise_cap_mw is not None:
                    headroom = (problem.cruise_cap_mw - r) / coef
                    if headroom <= 0:
                        break
                    take = min(take, headroom)
                rows.append((f, take))
                r += coef * take
            if r >= eps:
                energy += r
                plan.append((t, r, rows))
        return energy, plan

    order = sorted(base.by_flight, key=lambda i: (problem.flight_ids[i], i))
    shifts_chosen = {i: 0 for i in range(len(problem.flight_ids))}
    alloc: dict[tuple[int, int, int], float] = {}
    received: dict[tuple[int, int], float] = {}
    if problem.net_rate_usd_mwh > 0.0:
        for i in order:
            best_key = None
            best_slot = 0
            best_plan = []
            for slot, s in enumerate(offsets):
                energy, plan = simulate(i, s)
                key = (-energy, 0 if s == 0 else 1, slot)
                if best_key is None or key < best_key:
                    best_key, best_slot, best_plan = key, slot, plan
            shifts_chosen[i] = offsets[best_slot]
            for t, r, rows in best_plan:
                for f, p in rows:
                    remaining[(f, t)] = rem(f, t) - p
                    served_by[(f, t)] = i
                    alloc[(f, i, t)] = alloc.get((f, i, t), 0.0) + p
                received[(i, t)] = r

    return _assemble_solution(problem, "schedule", "heuristic", math.inf, shifts_chosen,
                              [], [], alloc, received)


def _greedy_choice(problem: ChoiceProblem) -> Solution:
    base = _BaseTensor(problem)
    eps = problem.threshold_mw
    n_farms = len(problem.farms)
    n_flights = len(problem.flight_ids)

    farm_score = {f: 0.0 for f in range(n_farms)}
    flight_score = {i: 0.0 for i in range(n_flights)}
    for i, per_t in base.by_flight.items():
        for _t, entries in per_t.items():
            for f, coef in entries:
                weight = coef * problem.farm_capacity(f)
                farm_score[f] += weight
                flight_score[i] += weight
    sel_farms = _greedy_rank(farm_score, problem.k_farms)
    sel_flights = _greedy_rank(flight_score, problem.k_flights)
    sel_farm_set = set(sel_farms)
    sel_flight_set = set(sel_flights)

    alloc: dict[tuple[int, int, int], float] = {}
    received: dict[tuple[int, int], float] = {}
    if problem.net_rate_usd_mwh > 0.0:
        by_t: dict[int, list[tuple[float, int, int]]] = {}
        for i, per_t in base.by_flight.items():
            if i not in sel_flight_set:
                continue
            for t, entries in per_t.items():
                for f, coef in entries:
                    if f in sel_farm_set:
                        by_t.setdefault(t, []).append((coef, f, i))
        for t in sorted(by_t):
            remaining = {f: problem.farm_capacity(f) for _, f, _ in by_t[t]}
            taken_by_farm: dict[int, set[int]] = {}
            r_at: dict[int, float] = {}
            rows_at: dict[int, list[tuple[int, float]]] = {}
            for coef, f, i in sorted(by_t[t], key=lambda e: (-e[0], e[1], e[2])):
                avail = remaining[f]
                if avail <= P_DUST_MW:
                    continue
                if problem.single_target_per_farm and taken_by_farm.get(f) and i not in taken_by_farm[f]:
                    continue
                take = avail
                if problem.cruise_cap_mw is not None:
                    headroom = (problem.cruise_cap_mw - r_at.get(i, 0.0)) / coef
                    if headroom <= 0:
                        continue
                    take = min(take, headroom)
                remaining[f] -= take
                taken_by_farm.setdefault(f, set()).add(i)
                r_at[i] = r_at.get(i, 0.0) + coef * take
                rows_at.setdefault(i, []).append((f, take))
            for i, r in sorted(r_at.items()):
                if r < eps:
                    continue  # sub-threshold receiver dropped
                received[(i, t)] = r
                for f, p in rows_at[i]:
                    alloc[(f, i, t)] = alloc.get((f, i, t), 0.0) + p

    return _assemble_solution(problem, "choice", "heuristic", math.inf, {},
                              sel_farms, sel_flights, alloc, received)


# --- model files and sweeps --------------------------------------------------


def export_model(model: MilpModel, path, fmt: str) -> None:
    milp.export_model(model, path, fmt)


def import_solution(model: MilpModel, path) -> Solution:
    """Read a "name value" solution file, validate it, and adopt it.

    Rejects the file with the violated constraint named when it is not
    feasible for this model.
    """
    values = milp.read_solution_values(path)
    x = milp.x_from_values(model, values)
    bad = milp.check_feasibility(model, x)
    if bad:
        raise SolutionInvalidError("; ".join(bad))
    sol = _solution_from_x(model, x, status="heuristic", gap=math.inf)
    check_solution(model.meta["problem"], sol)
    return sol


@dataclass(frozen=True)
class SweepRow:
    rho_farms: float
    rho_flights: float
    solution: Solution | None
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    farm_selection_counts: tuple[int, ...]

    def scenario_count(self) -> int:
        return len(self.rows)


def penetration_sweep(base: ChoiceProblem, grid, backend: str = "exact",
                      gap_tol: float = 1e-9, time_limit_s: float = 0.0,
                      var_cap: int = 5000) -> SweepResult:
    """Solve the choice problem over a grid of (rho_farms, rho_flights).

    Per-scenario failures are recorded and the sweep continues. Farm
    selection counts aggregate how many successful scenarios picked each
    farm.
    """
    counts = [0] * len(base.farms)
    rows: list[SweepRow] = []
    for rho_f, rho_i in grid:
        scenario = dataclasses.replace(base, rho_farms=rho_f, rho_flights=rho_i)
        try:
            if backend == "greedy":
                sol = solve_greedy(scenario)
            elif backend == "exact":
                sol = solve_exact(build_choice_model(scenario), gap_tol=gap_tol,
                                  time_limit_s=time_limit_s, var_cap=var_cap)
            else:
                raise SolutionInvalidError(f"unknown sweep backend {backend!r}")
            rows.append(SweepRow(rho_f, rho_i, sol))
            for f in sol.selected_farms:
                counts[f] += 1
        except Exception as exc:  # noqa: BLE001 - per-scenario isolation is the contract
            rows.append(SweepRow(rho_f, rho_i, None, error=f"{type(exc).__name__}: {exc}"))
    return SweepResult(rows=tuple(rows), farm_selection_counts=tuple(counts))
