"""Generic mixed-integer linear programming layer.

Models are stored as dense objective + sparse constraint arrays and solved
by a deterministic best-first branch-and-bound: LP relaxations go to
scipy's HiGHS backend, branching picks the most fractional integer
variable (ties to the lowest index), and node ordering ties break on
insertion order, so re-solving an identical model reproduces the identical
solution. Models can also be written to LP-text or MPS files for external
solvers, and external solutions read back from plain "name value" lines.

Integer variables here are always binaries with [0, 1] bounds; the
branching step exploits that by fixing the variable to 0 or 1.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import DataError, SolverCapError

INT_TOL = 1e-6
BOUND_EPS = 1e-9


@dataclass
class ModelComponent:
    """A self-contained block of variables and constraint rows."""

    var_ids: np.ndarray
    ub_rows: np.ndarray
    eq_rows: np.ndarray


@dataclass
class MilpModel:
    """A maximization MILP in matrix form.

    a_ub x <= b_ub, a_eq x = b_eq, lb <= x <= ub, x[is_integer] binary.
    ``meta`` is owned by the model builder and carries whatever it needs to
    map a variable vector back into a domain solution.
    """

    obj: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    is_integer: np.ndarray
    var_names: list[str]
    a_ub: sparse.csr_matrix | None = None
    b_ub: np.ndarray | None = None
    ub_names: list[str] = field(default_factory=list)
    a_eq: sparse.csr_matrix | None = None
    b_eq: np.ndarray | None = None
    eq_names: list[str] = field(default_factory=list)
    components: list[ModelComponent] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.obj)

    @property
    def n_binary(self) -> int:
        return int(self.is_integer.sum())

    def var_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.var_names)}


@dataclass
class MilpResult:
    status: str  # optimal | bound_gap | infeasible
    z: float
    x: np.ndarray
    gap: float
    nodes: int


def _linprog_solve(obj, a_ub, b_ub, a_eq, b_eq, lb, ub):
    """Maximize obj @ x; returns (ok, z, x) with z = -inf when infeasible."""
    res = linprog(
        c=-obj,
        A_ub=a_ub, b_ub=b_ub,
        A_eq=a_eq, b_eq=b_eq,
        bounds=np.column_stack((lb, ub)),
        method="highs",
    )
    if res.status == 0:
        return True, -res.fun, res.x
    if res.status == 2:
        return False, -math.inf, None
    raise DataError(f"LP relaxation failed: {res.message}")


def solve_lp_relaxation(model: MilpModel) -> MilpResult:
    """Solve the model with integrality dropped."""
    if model.n_vars == 0:
        return MilpResult(status="optimal", z=0.0, x=np.zeros(0), gap=0.0, nodes=0)
    ok, z, x = _linprog_solve(model.obj, model.a_ub, model.b_ub, model.a_eq,
                              model.b_eq, model.lb, model.ub)
    if not ok:
        return MilpResult(status="infeasible", z=-math.inf, x=np.zeros(model.n_vars), gap=math.inf, nodes=1)
    return MilpResult(status="optimal", z=z, x=x, gap=0.0, nodes=1)


def _branch_and_bound(model: MilpModel, gap_tol: float, deadline: float | None) -> MilpResult:
    n = model.n_vars
    if n == 0:
        return MilpResult(status="optimal", z=0.0, x=np.zeros(0), gap=0.0, nodes=0)
    int_ids = np.nonzero(model.is_integer)[0]

    best_z = -math.inf
    best_x: np.ndarray | None = None
    counter = 0
    nodes = 0
    # heap of (-parent_bound, counter, lb, ub); the parent's LP value is a
    # valid upper bound on the subtree, so best-first order is safe
    heap: list = [(-math.inf, counter, model.lb.copy(), model.ub.copy())]

    def tolerance(z: float) -> float:
        return max(gap_tol * max(1.0, abs(z)), BOUND_EPS)

    while heap:
        neg_bound, _, lb, ub = heapq.heappop(heap)
        est_bound = -neg_bound
        if best_x is not None and est_bound <= best_z + tolerance(best_z):
            # every remaining node is at least as weakly bounded
            return MilpResult(status="optimal", z=best_z, x=best_x, gap=0.0, nodes=nodes)
        if deadline is not None and time.monotonic() > deadline:
            gap = math.inf if best_x is None else (est_bound - best_z) / max(1.0, abs(best_z))
            return MilpResult(
                status="bound_gap",
                z=best_z if best_x is not None else -math.inf,
                x=best_x if best_x is not None else np.zeros(n),
                gap=gap, nodes=nodes,
            )
        nodes += 1
        ok, z, x = _linprog_solve(model.obj, model.a_ub, model.b_ub, model.a_eq,
                                  model.b_eq, lb, ub)
        if not ok or (best_x is not None and z <= best_z + tolerance(best_z)):
            continue
        fracs = np.abs(x[int_ids] - np.round(x[int_ids])) if len(int_ids) else np.zeros(0)
        if len(fracs) == 0 or fracs.max() <= INT_TOL:
            if z > best_z:
                best_z = z
                best_x = x.copy()
                if len(int_ids):
                    best_x[int_ids] = np.round(best_x[int_ids])
            continue
        branch_var = int(int_ids[int(np.argmax(fracs))])
        lo_val = math.floor(x[branch_var] + INT_TOL)
        for fixed in (lo_val, lo_val + 1):
            child_lb = lb.copy()
            child_ub = ub.copy()
            child_lb[branch_var] = fixed
            child_ub[branch_var] = fixed
            if child_lb[branch_var] > model.ub[branch_var] or child_ub[branch_var] < model.lb[branch_var]:
                continue
            counter += 1
            heapq.heappush(heap, (-z, counter, child_lb, child_ub))

    if best_x is None:
        return MilpResult(status="infeasible", z=-math.inf, x=np.zeros(n), gap=math.inf, nodes=nodes)
    return MilpResult(status="optimal", z=best_z, x=best_x, gap=0.0, nodes=nodes)


def _slice_component(model: MilpModel, comp: ModelComponent) -> MilpModel:
    cols = comp.var_ids
    a_ub = b_ub = a_eq = b_eq = None
    ub_names: list[str] = []
    eq_names: list[str] = []
    if model.a_ub is not None and len(comp.ub_rows):
        a_ub = model.a_ub[comp.ub_rows][:, cols]
        b_ub = model.b_ub[comp.ub_rows]
        ub_names = [model.ub_names[r] for r in comp.ub_rows]
    if model.a_eq is not None and len(comp.eq_rows):
        a_eq = model.a_eq[comp.eq_rows][:, cols]
        b_eq = model.b_eq[comp.eq_rows]
        eq_names = [model.eq_names[r] for r in comp.eq_rows]
    return MilpModel(
        obj=model.obj[cols], lb=model.lb[cols], ub=model.ub[cols],
        is_integer=model.is_integer[cols],
        var_names=[model.var_names[c] for c in cols],
        a_ub=a_ub, b_ub=b_ub, ub_names=ub_names,
        a_eq=a_eq, b_eq=b_eq, eq_names=eq_names,
    )


def solve_milp(model: MilpModel, gap_tol: float = 1e-9, time_limit_s: float = 0.0,
               var_cap: int = 5000) -> MilpResult:
    """Solve to proven optimality (within gap_tol) by branch and bound.

    When the model carries components they are solved independently and
    their objectives summed; the variable cap applies per solved block.
    Raises SolverCapError instead of attempting an oversized instance.
    """
    deadline = time.monotonic() + time_limit_s if time_limit_s else None
    blocks = model.components if model.components else None
    if blocks is None:
        if model.n_vars > var_cap:
            raise SolverCapError(
                f"model has {model.n_vars} variables, above the exact-solver cap of {var_cap}; "
                "use the greedy backend or export the model"
            )
        return _branch_and_bound(model, gap_tol, deadline)

    x = np.zeros(model.n_vars)
    z = 0.0
    nodes = 0
    worst_gap = 0.0
    status = "optimal"
    for comp in blocks:
        if len(comp.var_ids) > var_cap:
            raise SolverCapError(
                f"model component has {len(comp.var_ids)} variables, above the exact-solver "
                f"cap of {var_cap}; use the greedy backend or export the model"
            )
        sub = _slice_component(model, comp)
        res = _branch_and_bound(sub, gap_tol, deadline)
        if res.status == "infeasible":
            return MilpResult(status="infeasible", z=-math.inf, x=np.zeros(model.n_vars),
                              gap=math.inf, nodes=nodes + res.nodes)
        if res.status == "bound_gap":
            status = "bound_gap"
            worst_gap = max(worst_gap, res.gap)
        nodes += res.nodes
        z += res.z
        x[comp.var_ids] = res.x
    return MilpResult(status=status, z=z, x=x, gap=worst_gap, nodes=nodes)


# --- model files -------------------------------------------------------


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _row_terms(a_row, var_names) -> str:
    parts = []
    for col, coef in zip(a_row.indices, a_row.data):
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        if not parts and sign == "+":
            parts.append(f"{_fmt(coef)} {var_names[col]}")
        else:
            parts.append(f"{sign} {_fmt(abs(coef))} {var_names[col]}")
    return " ".join(parts) if parts else f"0 {var_names[0]}"


def write_lp(model: MilpModel, path) -> None:
    """Write the model in CPLEX LP text format (maximization)."""
    lines = ["\\ skybeam MILP export", "Maximize"]
    if model.n_vars == 0:
        lines += [" obj: 0 zempty", "Subject To", "Bounds", " zempty = 0", "End"]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        return
    obj_terms = []
    for i, coef in enumerate(model.obj):
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        if not obj_terms and sign == "+":
            obj_terms.append(f"{_fmt(coef)} {model.var_names[i]}")
        else:
            obj_terms.append(f"{sign} {_fmt(abs(coef))} {model.var_names[i]}")
    lines.append(" obj: " + (" ".join(obj_terms) if obj_terms else f"0 {model.var_names[0]}"))
    lines.append("Subject To")
    if model.a_ub is not None:
        csr = model.a_ub.tocsr()
        for r in range(csr.shape[0]):
            lines.append(f" {model.ub_names[r]}: {_row_terms(csr[r], model.var_names)} <= {_fmt(model.b_ub[r])}")
    if model.a_eq is not None:
        csr = model.a_eq.tocsr()
        for r in range(csr.shape[0]):
            lines.append(f" {model.eq_names[r]}: {_row_terms(csr[r], model.var_names)} = {_fmt(model.b_eq[r])}")
    lines.append("Bounds")
    for i in range(model.n_vars):
        if model.is_integer[i]:
            continue
        lo, hi = model.lb[i], model.ub[i]
        if lo == 0.0 and math.isinf(hi):
            continue
        if lo == hi:
            lines.append(f" {model.var_names[i]} = {_fmt(lo)}")
        elif math.isinf(hi):
            lines.append(f" {model.var_names[i]} >= {_fmt(lo)}")
        else:
            lines.append(f" {_fmt(lo)} <= {model.var_names[i]} <= {_fmt(hi)}")
    binaries = [model.var_names[i] for i in range(model.n_vars) if model.is_integer[i]]
    if binaries:
        lines.append("Binary")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_mps(model: MilpModel, path) -> None:
    """Write the model in free MPS format with an OBJSENSE MAX section."""
    lines = ["NAME skybeam", "OBJSENSE", "    MAX", "ROWS", " N  obj"]
    for name in model.ub_names:
        lines.append(f" L  {name}")
    for name in model.eq_names:
        lines.append(f" E  {name}")
    # column-major coefficient lists
    per_col: list[list[tuple[str, float]]] = [[] for _ in range(model.n_vars)]
    for i, coef in enumerate(model.obj):
        if coef != 0.0:
            per_col[i].append(("obj", float(coef)))
    for mat, names in ((model.a_ub, model.ub_names), (model.a_eq, model.eq_names)):
        if mat is None:
            continue
        csc = mat.tocsc()
        for col in range(csc.shape[1]):
            for ptr in range(csc.indptr[col], csc.indptr[col + 1]):
                per_col[col].append((names[csc.indices[ptr]], float(csc.data[ptr])))
    lines.append("COLUMNS")
    in_integer = False
    marker = 0
    for i in range(model.n_vars):
        if bool(model.is_integer[i]) != in_integer:
            kind = "'INTORG'" if not in_integer else "'INTEND'"
            lines.append(f"    MARKER{marker} 'MARKER' {kind}")
            marker += 1
            in_integer = not in_integer
        entries = per_col[i] or [("obj", 0.0)]
        for row_name, coef in entries:
            lines.append(f"    {model.var_names[i]} {row_name} {_fmt(coef)}")
    if in_integer:
        lines.append(f"    MARKER{marker} 'MARKER' 'INTEND'")
    lines.append("RHS")
    for name, rhs in zip(model.ub_names, model.b_ub if model.b_ub is not None else []):
        if rhs != 0.0:
            lines.append(f"    rhs {name} {_fmt(rhs)}")
    for name, rhs in zip(model.eq_names, model.b_eq if model.b_eq is not None else []):
        if rhs != 0.0:
            lines.append(f"    rhs {name} {_fmt(rhs)}")
    lines.append("BOUNDS")
    for i in range(model.n_vars):
        name = model.var_names[i]
        if model.is_integer[i]:
            lines.append(f" BV bnd {name}")
            continue
        lo, hi = model.lb[i], model.ub[i]
        if lo == hi:
            lines.append(f" FX bnd {name} {_fmt(lo)}")
            continue
        if lo != 0.0:
            lines.append(f" LO bnd {name} {_fmt(lo)}")
        if not math.isinf(hi):
            lines.append(f" UP bnd {name} {_fmt(hi)}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def export_model(model: MilpModel, path, fmt: str) -> None:
    if fmt == "lp-text":
        write_lp(model, path)
    elif fmt == "mps":
        write_mps(model, path)
    else:
        raise DataError(f"unknown model format {fmt!r}; expected lp-text or mps")


def read_solution_values(path) -> dict[str, float]:
    """Parse a plain-text solution file of "name value" lines."""
    values: dict[str, float] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"solution file {path}:{lineno}: expected 'name value', got {line!r}")
            try:
                values[parts[0]] = float(parts[1])
            except ValueError as exc:
                raise DataError(f"solution file {path}:{lineno}: bad value {parts[1]!r}") from exc
    return values


def x_from_values(model: MilpModel, values: dict[str, float]) -> np.ndarray:
    """Map named values onto the model's variable vector; absent names are 0."""
    index = model.var_index()
    x = np.zeros(model.n_vars)
    for name, value in values.items():
        if name not in index:
            raise DataError(f"solution names unknown variable {name!r}")
        x[index[name]] = value
    return x


def write_solution_values(model: MilpModel, x: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for name, value in zip(model.var_names, x):
            fh.write(f"{name} {_fmt(value)}\n")


def check_feasibility(model: MilpModel, x: np.ndarray, tol: float = 1e-6) -> list[str]:
    """Names of constraints the vector violates beyond tolerance.

    Tolerances scale with the row's right-hand side so large-capacity rows
    are not rejected for harmless round-off while genuine violations are.
    """
    bad: list[str] = []
    for i in range(model.n_vars):
        scale = max(1.0, abs(model.lb[i]), abs(x[i]))
        if x[i] < model.lb[i] - tol * scale or x[i] > model.ub[i] + tol * scale:
            bad.append(f"variable bound {model.var_names[i]}: value {x[i]:.9g} "
                       f"outside [{model.lb[i]:.9g}, {model.ub[i]:.9g}]")
        if model.is_integer[i] and abs(x[i] - round(x[i])) > tol:
            bad.append(f"integrality {model.var_names[i]}: value {x[i]:.9g} is fractional")
    if model.a_ub is not None:
        lhs = model.a_ub @ x
        for r in range(len(model.b_ub)):
            scale = max(1.0, abs(model.b_ub[r]))
            if lhs[r] > model.b_ub[r] + tol * scale:
                bad.append(f"constraint {model.ub_names[r]}: lhs {lhs[r]:.9g} exceeds rhs {model.b_ub[r]:.9g}")
    if model.a_eq is not None:
        lhs = model.a_eq @ x
        for r in range(len(model.b_eq)):
            scale = max(1.0, abs(model.b_eq[r]))
            if abs(lhs[r] - model.b_eq[r]) > tol * scale:
                bad.append(f"constraint {model.eq_names[r]}: lhs {lhs[r]:.9g} != rhs {model.b_eq[r]:.9g}")
    return bad
