"""Exact solver for small binary integer linear programs.

Branch-and-bound over an LP relaxation solved by a dense bounded-variable
primal simplex.  Instances here are tiny (at most a few thousand variables,
tens of constraints), so clarity and determinism win over sparse-matrix
performance tricks.

Determinism contract: entering/leaving variable ties break to the lowest
variable index, branching picks the most fractional variable (ties lowest
index), and the search is best-first on the LP bound with the 0-branch
enqueued ahead of the 1-branch.  Identical problems therefore produce
identical assignments.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Constraint",
    "IlpProblem",
    "IlpSolution",
    "LpResult",
    "SolverSizeError",
    "SimplexError",
    "solve",
    "solve_lp_relaxation",
    "to_lp_text",
]

DEFAULT_VARIABLE_CAP = 100_000
INTEGRALITY_TOL = 1e-6
BOUND_PRUNE_TOL = 1e-9
_FEAS_TOL = 1e-7
_PIVOT_EPS = 1e-10
_RC_TOL = 1e-9

SENSES = ("<=", ">=", "=")


class SolverSizeError(ValueError):
    """Problem exceeds the configured variable cap."""


class SimplexError(RuntimeError):
    """The LP relaxation failed numerically; message carries diagnostics."""


@dataclass(frozen=True)
class Constraint:
    coefficients: tuple[float, ...]
    sense: str
    rhs: float


@dataclass
class IlpProblem:
    """Minimize objective . w over binary w subject to linear constraints."""

    objective: np.ndarray
    constraints: list[Constraint]
    variable_count: int

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        if self.variable_count < 1:
            raise ValueError("need at least one variable")
        if self.objective.shape != (self.variable_count,):
            raise ValueError("objective length must equal variable_count")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective has non-finite coefficients")
        for i, con in enumerate(self.constraints):
            if len(con.coefficients) != self.variable_count:
                raise ValueError(f"constraint {i} has wrong coefficient count")
            if con.sense not in SENSES:
                raise ValueError(f"constraint {i} has unknown sense {con.sense!r}")
            if not np.all(np.isfinite(con.coefficients)) or not np.isfinite(con.rhs):
                raise ValueError(f"constraint {i} has non-finite data")


@dataclass
class IlpSolution:
    status: str  # "optimal" | "infeasible"
    assignment: np.ndarray | None = None
    objective_value: float | None = None


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None = None
    value: float | None = None


def check_assignment(problem: IlpProblem, assignment: np.ndarray, tol: float = BOUND_PRUNE_TOL) -> bool:
    """Independent recheck that a 0/1 vector satisfies every constraint."""
    x = np.asarray(assignment, dtype=np.float64)
    for con in problem.constraints:
        lhs = float(np.dot(con.coefficients, x))
        if con.sense == "<=" and lhs > con.rhs + tol:
            return False
        if con.sense == ">=" and lhs < con.rhs - tol:
            return False
        if con.sense == "=" and abs(lhs - con.rhs) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# LP relaxation: bounded-variable primal simplex, two phases.
# ---------------------------------------------------------------------------

class _StandardForm:
    """Equality form A x = b with per-column bounds; slacks appended."""

    def __init__(self, problem: IlpProblem):
        v = problem.variable_count
        m = len(problem.constraints)
        n_slack = sum(1 for c in problem.constraints if c.sense != "=")
        a = np.zeros((m, v + n_slack))
        b = np.zeros(m)
        lower = np.zeros(v + n_slack)
        upper = np.concatenate([np.ones(v), np.full(n_slack, np.inf)])
        slack_col = np.full(m, -1, dtype=np.int64)
        slack = v
        for i, con in enumerate(problem.constraints):
            a[i, :v] = con.coefficients
            b[i] = con.rhs
            if con.sense == "<=":
                a[i, slack] = 1.0
                slack_col[i] = slack
                slack += 1
            elif con.sense == ">=":
                a[i, slack] = -1.0
                slack_col[i] = slack
                slack += 1
        self.a = a
        self.b = b
        self.lower = lower
        self.upper = upper
        self.n_structural = v
        self.slack_col = slack_col
        self.cost = np.concatenate([problem.objective, np.zeros(n_slack)])


def _run_simplex(a, b, cost, lower, upper, basis, at_upper, max_iter):
    """Minimize cost.x over {A x = b, lower <= x <= upper} from a feasible basis.

    basis and at_upper are mutated in place; returns the full solution vector.
    Dantzig pricing with lowest-index tie-breaks; switches to Bland's rule
    after a stall to guarantee termination.
    """
    from scipy.linalg import lu_factor, lu_solve

    m, n = a.shape
    bland = False
    stall = 0
    last_obj = np.inf
    for _ in range(max_iter):
        bvar = np.asarray(basis)
        in_basis = np.zeros(n, dtype=bool)
        in_basis[bvar] = True
        x = np.where(at_upper, upper, lower)
        x[bvar] = 0.0
        basis_mat = a[:, bvar]
        with np.errstate(all="ignore"):
            lu = lu_factor(basis_mat, check_finite=False)
            x_b = lu_solve(lu, b - a @ x, check_finite=False)
            y = lu_solve(lu, cost[bvar], trans=1, check_finite=False)
        if not (np.all(np.isfinite(x_b)) and np.all(np.isfinite(y))):
            raise SimplexError("singular basis matrix in relaxation")
        x[bvar] = x_b

        reduced = cost - a.T @ y
        movable = ~in_basis & ((upper - lower) > _PIVOT_EPS)
        favorable = np.where(at_upper, reduced > _RC_TOL, reduced < -_RC_TOL)
        candidates = np.flatnonzero(movable & favorable)
        if candidates.size == 0:
            return x
        if bland:
            enter = int(candidates[0])
        else:
            enter = int(candidates[np.argmax(np.abs(reduced[candidates]))])
        direction = -1.0 if at_upper[enter] else 1.0

        with np.errstate(all="ignore"):
            w = lu_solve(lu, a[:, enter], check_finite=False)
        if not np.all(np.isfinite(w)):
            raise SimplexError("singular basis matrix in relaxation")

        # Ratio test: entering moves by t >= 0; basics move by -t * dir * w.
        step = direction * w
        up_b = upper[bvar]
        limits = np.full(m, np.inf)
        pos_mask = step > _PIVOT_EPS
        neg_mask = (step < -_PIVOT_EPS) & np.isfinite(up_b)
        limits[pos_mask] = (x_b[pos_mask] - lower[bvar[pos_mask]]) / step[pos_mask]
        limits[neg_mask] = (up_b[neg_mask] - x_b[neg_mask]) / (-step[neg_mask])
        np.maximum(limits, 0.0, out=limits)
        min_limit = float(limits.min()) if m else np.inf

        t_flip = upper[enter] - lower[enter]
        if np.isinf(min_limit) and np.isinf(t_flip):
            raise SimplexError("unbounded improving direction in relaxation")

        if t_flip < min_limit - _PIVOT_EPS or np.isinf(min_limit):
            at_upper[enter] = not at_upper[enter]
            step_len = t_flip
        else:
            ties = np.flatnonzero(limits <= min_limit + _PIVOT_EPS)
            if bland:
                leave_pos = int(ties[np.argmin(bvar[ties])])
            else:
                # Largest pivot magnitude for stability, then lowest var index.
                order = np.lexsort((bvar[ties], -np.abs(step[ties])))
                leave_pos = int(ties[order[0]])
            leaving = basis[leave_pos]
            basis[leave_pos] = enter
            at_upper[leaving] = step[leave_pos] < 0.0
            at_upper[enter] = False
            step_len = min(min_limit, t_flip)

        obj = float(cost @ x)
        if obj < last_obj - 1e-12 or step_len > _PIVOT_EPS:
            stall = 0
        else:
            stall += 1
            if stall > 60:
                bland = True
        last_obj = min(last_obj, obj)
    raise SimplexError(f"simplex did not terminate within {max_iter} iterations")


def _solve_lp(std: _StandardForm, lower_struct, upper_struct) -> LpResult:
    """Two-phase bounded simplex on the standard form with node bounds."""
    m, n = std.a.shape
    lower = std.lower.copy()
    upper = std.upper.copy()
    lower[: std.n_structural] = lower_struct
    upper[: std.n_structural] = upper_struct

    # Phase 1 with a slack crash: a row whose own slack can absorb the
    # residual at the lower-bound corner starts with that slack basic;
    # only the remaining rows get an artificial column.
    x0 = lower.copy()
    residual = std.b - std.a @ x0
    basis = []
    art_rows = []
    for i in range(m):
        col = std.slack_col[i]
        slack_value = residual[i] * (std.a[i, col] if col >= 0 else 0.0)
        if col >= 0 and slack_value >= 0.0:
            basis.append(int(col))
        else:
            basis.append(n + len(art_rows))
            art_rows.append(i)
    n_art = len(art_rows)
    art_cols = np.zeros((m, n_art))
    for j, i in enumerate(art_rows):
        art_cols[i, j] = 1.0 if residual[i] >= 0.0 else -1.0
    a_ext = np.hstack([std.a, art_cols])
    lower_ext = np.concatenate([lower, np.zeros(n_art)])
    upper_ext = np.concatenate([upper, np.full(n_art, np.inf)])
    at_upper = np.zeros(n + n_art, dtype=bool)
    max_iter = 500 + 50 * (n + m)

    if n_art:
        cost1 = np.concatenate([np.zeros(n), np.ones(n_art)])
        x = _run_simplex(a_ext, std.b, cost1, lower_ext, upper_ext, basis, at_upper, max_iter)
        if float(cost1 @ x) > _FEAS_TOL:
            return LpResult(status="infeasible")

    # Phase 2: lock artificials at zero and minimize the true cost.
    upper_ext[n:] = 0.0
    lower_ext[n:] = 0.0
    cost2 = np.concatenate([std.cost, np.zeros(n_art)])
    x = _run_simplex(a_ext, std.b, cost2, lower_ext, upper_ext, basis, at_upper, max_iter)

    violation = float(np.max(np.abs(std.a @ x[:n] - std.b))) if m else 0.0
    bound_violation = float(
        max(np.max(lower - x[:n], initial=0.0), np.max(x[:n] - upper, initial=0.0))
    )
    if violation > _FEAS_TOL or bound_violation > _FEAS_TOL:
        raise SimplexError(
            f"relaxation solution violates constraints (row {violation:.2e}, "
            f"bound {bound_violation:.2e})"
        )
    structural = x[: std.n_structural].copy()
    return LpResult(status="optimal", x=structural, value=float(std.cost @ x[:n]))


def solve_lp_relaxation(problem: IlpProblem) -> LpResult:
    """Relax binaries to [0, 1]; the optimum lower-bounds the ILP optimum."""
    std = _StandardForm(problem)
    v = problem.variable_count
    return _solve_lp(std, np.zeros(v), np.ones(v))


# ---------------------------------------------------------------------------
# Branch and bound.
# ---------------------------------------------------------------------------

@dataclass(order=True)
class _Node:
    bound: float
    order: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)


def solve(problem: IlpProblem, variable_cap: int = DEFAULT_VARIABLE_CAP) -> IlpSolution:
    """Globally optimal binary assignment, or an infeasible verdict."""
    if problem.variable_count > variable_cap:
        raise SolverSizeError(
            f"{problem.variable_count} variables exceeds cap {variable_cap}"
        )
    std = _StandardForm(problem)
    v = problem.variable_count

    # With an all-integer objective every feasible assignment has an integer
    # value, so LP bounds round up; this prunes ties between symmetric optima.
    integer_objective = bool(
        np.all(np.abs(problem.objective - np.round(problem.objective)) < 1e-12)
    )

    def tighten(bound: float) -> float:
        return float(np.ceil(bound - BOUND_PRUNE_TOL)) if integer_objective else bound

    root = _solve_lp(std, np.zeros(v), np.ones(v))
    if root.status == "infeasible":
        return IlpSolution(status="infeasible")

    counter = itertools.count()
    heap = [_Node(tighten(root.value), next(counter), np.zeros(v), np.ones(v), root.x)]
    best_value = np.inf
    best_x = None

    while heap:
        node = heapq.heappop(heap)
        if node.bound >= best_value - BOUND_PRUNE_TOL:
            break  # best-first: no remaining node can improve
        frac = np.abs(node.x - np.round(node.x))
        if frac.max() <= INTEGRALITY_TOL:
            candidate = np.round(node.x).astype(np.int64)
            if check_assignment(problem, candidate):
                value = float(problem.objective @ candidate)
                if value < best_value - BOUND_PRUNE_TOL:
                    best_value = value
                    best_x = candidate
                continue
            # Rounding broke a tight constraint: force a decision on the
            # first still-free variable instead of fathoming.
            free = np.flatnonzero(node.upper - node.lower > 0.5)
            if free.size == 0:
                continue
            branch_var = int(free[0])
        else:
            branch_var = int(np.argmax(frac))

        for fixed_value in (0.0, 1.0):
            lo = node.lower.copy()
            hi = node.upper.copy()
            lo[branch_var] = fixed_value
            hi[branch_var] = fixed_value
            child = _solve_lp(std, lo, hi)
            if child.status != "optimal":
                continue
            bound = tighten(child.value)
            if bound >= best_value - BOUND_PRUNE_TOL:
                continue
            heapq.heappush(heap, _Node(bound, next(counter), lo, hi, child.x))

    if best_x is None:
        return IlpSolution(status="infeasible")
    return IlpSolution(status="optimal", assignment=best_x, objective_value=best_value)


def to_lp_text(problem: IlpProblem) -> str:
    """Debug dump in LP text format for cross-checking with external solvers."""
    def terms(coeffs):
        parts = []
        for j, c in enumerate(coeffs):
            if c == 0.0:
                continue
            sign = "-" if c < 0 else "+"
            parts.append(f"{sign} {abs(c):g} x{j}")
        if not parts:
            return "0 x0"
        first = parts[0].lstrip("+ ").strip()
        return " ".join([first] + parts[1:])

    lines = ["Minimize", f" obj: {terms(problem.objective)}", "Subject To"]
    for i, con in enumerate(problem.constraints):
        lines.append(f" c{i}: {terms(con.coefficients)} {con.sense} {con.rhs:g}")
    lines.append("Binary")
    lines.append(" " + " ".join(f"x{j}" for j in range(problem.variable_count)))
    lines.append("End")
    return "\n".join(lines) + "\n"
