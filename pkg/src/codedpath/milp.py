"""0-1 integer linear programs: model container, branch-and-bound, LP export.

Two solving routes share one model type:

* ``method="bnb"``: the bundled best-first branch-and-bound. Each node solves the
  linear relaxation with 0/1 fixings as bounds; branching picks the most
  fractional variable, ties broken by variable name.
* ``method="highs"``: hands the same model to the HiGHS MIP solver shipped with
  SciPy, for the larger planning instances.

Either way the returned assignment is re-checked against every constraint.
"""
from __future__ import annotations

import heapq
import math
import re
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

SENSES = ("<=", "=", ">=")
INT_TOL = 1e-6
FEAS_TOL = 1e-6


class ModelError(ValueError):
    """Malformed model, e.g. a constraint on an undeclared variable."""


@dataclass
class Constraint:
    coefs: dict[str, float]
    sense: str
    rhs: float
    name: str = ""

    def activity(self, assignment) -> float:
        return sum(c * assignment[v] for v, c in self.coefs.items())

    def satisfied(self, assignment, tol: float = FEAS_TOL) -> bool:
        lhs = self.activity(assignment)
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class IlpModel:
    name: str = "model"
    variables: list[str] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def add_var(self, name: str) -> str:
        if name in self._index:
            raise ModelError(f"duplicate variable {name!r}")
        self._index[name] = len(self.variables)
        self.variables.append(name)
        return name

    def add_constraint(self, coefs, sense: str, rhs: float, name: str | None = None) -> Constraint:
        if sense not in SENSES:
            raise ModelError(f"bad comparator {sense!r}")
        merged: dict[str, float] = {}
        for v, c in (coefs.items() if isinstance(coefs, dict) else coefs):
            merged[v] = merged.get(v, 0.0) + float(c)
        con = Constraint(merged, sense, float(rhs), name or f"c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    def set_objective(self, coefs) -> None:
        self.objective = dict(coefs)

    def index(self, name: str) -> int:
        return self._index[name]

    def validate(self) -> None:
        if len(self._index) != len(self.variables):
            self._index = {v: k for k, v in enumerate(self.variables)}
            if len(self._index) != len(self.variables):
                raise ModelError("variable names must be unique")
        known = self._index
        for v, c in self.objective.items():
            if v not in known:
                raise ModelError(f"objective references undeclared variable {v!r}")
            if not math.isfinite(c):
                raise ModelError(f"non-finite objective coefficient on {v!r}")
        for con in self.constraints:
            if con.sense not in SENSES:
                raise ModelError(f"constraint {con.name}: bad comparator {con.sense!r}")
            for v, c in con.coefs.items():
                if v not in known:
                    raise ModelError(f"constraint {con.name} references undeclared variable {v!r}")
                if not math.isfinite(c):
                    raise ModelError(f"constraint {con.name}: non-finite coefficient")
            if not math.isfinite(con.rhs):
                raise ModelError(f"constraint {con.name}: non-finite right-hand side")

    def evaluate(self, assignment) -> float:
        return float(sum(c * assignment[v] for v, c in self.objective.items()))

    def violated(self, assignment, tol: float = FEAS_TOL) -> list[Constraint]:
        return [con for con in self.constraints if not con.satisfied(assignment, tol)]

    def arrays(self):
        """Objective vector and row-wise ``lo <= A x <= hi`` form (CSR)."""
        self.validate()
        n = len(self.variables)
        c = np.zeros(n)
        for v, coef in self.objective.items():
            c[self._index[v]] += coef
        rows, cols, vals = [], [], []
        lo = np.empty(len(self.constraints))
        hi = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for v, coef in con.coefs.items():
                rows.append(r)
                cols.append(self._index[v])
                vals.append(coef)
            lo[r] = -np.inf if con.sense == "<=" else con.rhs
            hi[r] = np.inf if con.sense == ">=" else con.rhs
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
        return c, A, lo, hi


@dataclass
class IlpSolution:
    status: str  # "optimal" | "infeasible" | "timeout"
    assignment: dict[str, int]
    objective_value: float
    nodes_explored: int
    best_bound: float = math.nan
    method: str = "bnb"

    @property
    def gap(self) -> float:
        if self.status == "optimal":
            return 0.0
        if not self.assignment or not math.isfinite(self.best_bound):
            return math.inf
        return abs(self.objective_value - self.best_bound) / max(1.0, abs(self.objective_value))

    def value(self, name: str) -> int:
        return self.assignment[name]


def solve(model: IlpModel, time_budget: float = 60.0, method: str = "bnb") -> IlpSolution:
    """Minimise ``model`` over binary variables.

    ``status == "optimal"`` means the objective is provably minimal; on
    ``"timeout"`` the best incumbent (possibly empty) and bound are returned.
    """
    model.validate()
    if method == "bnb":
        sol = _branch_and_bound(model, time_budget)
    elif method == "highs":
        sol = _highs(model, time_budget)
    else:
        raise ValueError(f"unknown method {method!r}")
    if sol.assignment:
        bad = model.violated(sol.assignment)
        if bad:
            raise RuntimeError(f"solver returned an assignment violating {bad[0].name}")
        sol.objective_value = model.evaluate(sol.assignment)
    return sol


def _relaxation(c, A_ub, b_ub, A_eq, b_eq, lb, ub):
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        bounds=np.column_stack([lb, ub]), method="highs",
    )
    if res.status == 2:
        return None, math.inf
    if res.status != 0:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    return res.x, res.fun


def _branch_and_bound(model: IlpModel, time_budget: float) -> IlpSolution:
    start = time.monotonic()
    c, A, lo, hi = model.arrays()
    n = len(model.variables)
    eq = np.isfinite(lo) & np.isfinite(hi) & (lo == hi)
    up = np.isfinite(hi) & ~eq
    dn = np.isfinite(lo) & ~eq
    A_ub = sparse.vstack([A[up], -A[dn]]).tocsr()
    b_ub = np.concatenate([hi[up], -lo[dn]])
    A_eq, b_eq = A[eq], lo[eq]
    if A_ub.shape[0] == 0:
        A_ub, b_ub = None, None
    if A_eq.shape[0] == 0:
        A_eq, b_eq = None, None
    # rank[k] orders variables by name for deterministic tie-breaking
    rank = np.empty(n, dtype=np.int64)
    rank[np.argsort(np.array(model.variables, dtype=object))] = np.arange(n)

    best_x, best_val = None, math.inf
    heap: list = []
    counter = 0
    nodes = 0
    x0, f0 = _relaxation(c, A_ub, b_ub, A_eq, b_eq, np.zeros(n), np.ones(n))
    if x0 is not None:
        heap.append((f0, counter, np.zeros(n), np.ones(n), x0))
    timed_out = False
    while heap:
        if time.monotonic() - start > time_budget:
            timed_out = True
            break
        bound, _, lb, ub, x = heapq.heappop(heap)
        nodes += 1
        if bound >= best_val - 1e-9:
            continue
        frac = np.minimum(np.abs(x), np.abs(1.0 - x))
        fractional = np.where(frac > INT_TOL)[0]
        if fractional.size == 0:
            cand = np.round(x)
            val = float(c @ cand)
            if val < best_val - 1e-12:
                best_x, best_val = cand, val
            continue
        score = frac[fractional]
        top = fractional[score >= score.max() - 1e-12]
        j = top[np.argmin(rank[top])]
        for fix in (1.0, 0.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = fix
            cx, cf = _relaxation(c, A_ub, b_ub, A_eq, b_eq, clb, cub)
            if cx is None or cf >= best_val - 1e-9:
                continue
            counter += 1
            heapq.heappush(heap, (cf, counter, clb, cub, cx))

    assignment = {} if best_x is None else {v: int(best_x[k]) for k, v in enumerate(model.variables)}
    if timed_out:
        open_bound = min((h[0] for h in heap), default=best_val)
        return IlpSolution("timeout", assignment, best_val, nodes, min(open_bound, best_val), "bnb")
    if best_x is None:
        return IlpSolution("infeasible", {}, math.inf, nodes, math.inf, "bnb")
    return IlpSolution("optimal", assignment, best_val, nodes, best_val, "bnb")


def _highs(model: IlpModel, time_budget: float) -> IlpSolution:
    c, A, lo, hi = model.arrays()
    n = len(model.variables)
    cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    res = milp(
        c, constraints=cons, integrality=np.ones(n), bounds=Bounds(np.zeros(n), np.ones(n)),
        options={"time_limit": float(time_budget), "disp": False},
    )
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    bound = float(getattr(res, "mip_dual_bound", math.nan) or math.nan)
    if res.status == 2:
        return IlpSolution("infeasible", {}, math.inf, nodes, math.inf, "highs")
    assignment = {}
    if res.x is not None:
        assignment = {v: int(round(res.x[k])) for k, v in enumerate(model.variables)}
    if res.status == 0:
        val = model.evaluate(assignment)
        return IlpSolution("optimal", assignment, val, nodes, val, "highs")
    if res.status == 1:
        val = model.evaluate(assignment) if assignment else math.inf
        return IlpSolution("timeout", assignment, val, nodes, bound, "highs")
    raise RuntimeError(f"HiGHS failed: {res.message}")


_NAME_OK = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")


def _fmt(x: float) -> str:
    return format(x, ".15g")


def _expr(coefs, order) -> list[str]:
    terms = []
    for v in order:
        coef = coefs.get(v, 0.0)
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        terms.append(f"{sign} {v}" if mag == 1.0 else f"{sign} {_fmt(mag)} {v}")
    if terms and terms[0].startswith("+ "):
        terms[0] = terms[0][2:]
    return terms


def _wrap(head: str, terms: list[str], tail: str = "", width: int = 200) -> list[str]:
    lines, cur = [], head
    for t in terms:
        if len(cur) + len(t) + 1 > width and cur.strip():
            lines.append(cur)
            cur = "   "
        cur += " " + t
    cur += tail
    lines.append(cur)
    return lines


def export_lp(model: IlpModel) -> str:
    """Render the model in CPLEX LP format (byte-deterministic)."""
    model.validate()
    for v in model.variables:
        if not _NAME_OK.match(v):
            raise ModelError(f"variable name {v!r} is not LP-safe")
    order = model.variables
    lines = [f"\\ {model.name}", "Minimize"]
    obj = _expr(model.objective, order)
    if not obj and order:
        obj = [f"0 {order[0]}"]
    lines += _wrap(" obj:", obj)
    lines.append("Subject To")
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for k, con in enumerate(model.constraints):
        terms = _expr(con.coefs, [v for v in order if v in con.coefs])
        if not terms:
            if not order:
                continue
            # keep empty rows so a constant-infeasible constraint survives the round trip
            terms = [f"0 {order[0]}"]
        name = con.name if _NAME_OK.match(con.name) else f"c{k}"
        lines += _wrap(f" {name}:", terms, f" {op[con.sense]} {_fmt(con.rhs)}")
    lines.append("Binary")
    lines += [f" {v}" for v in order]
    lines.append("End")
    return "\n".join(lines) + "\n"
