"""Embedded LP solver: two-phase primal simplex over general variable bounds.

Rows are turned into equalities with one slack column per row (slack bounds
encode the sense), so the all-slack basis is always available; rows whose
initial slack value violates its bounds get a phase-1 artificial column.
Variables sit nonbasic at a bound, which keeps box bounds out of the row
count. The basis inverse is held densely and updated by product-form pivots,
with a full refactorization every REFACTOR_INTERVAL pivots; iterations use
Dantzig pricing and switch to Bland's rule after BLAND_STALL consecutive
degenerate steps, which rules out cycling. Integrality annotations are
ignored: solves are LP relaxations.

Row duals follow the minimization convention: '<=' rows have dual <= 0,
'>=' rows dual >= 0, '=' rows free. Reduced costs are c - A'y for every
variable, so dual objectives (rhs'y plus bound terms) certify optima.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger

from .lpmodel import (
    INF,
    SENSE_EQ,
    SENSE_GE,
    SENSE_LE,
    LinearModel,
    ModelError,
    Solution,
)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"

REFACTOR_INTERVAL = 100
BLAND_STALL = 1000
FIX_TOL = 1e-12
PIVOT_TOL = 1e-9
DEGEN_TOL = 1e-11
RATIO_TIE = 1e-9

_NB_LOWER, _NB_UPPER, _BASIC, _NB_FREE = 0, 1, 2, 3


@dataclass(frozen=True)
class SolveOptions:
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    max_iterations: int = 10_000_000
    pivot_rule: str = "dantzig-with-bland-fallback"

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.pivot_rule != "dantzig-with-bland-fallback":
            raise ValueError(f"unknown pivot rule {self.pivot_rule!r}")


class _Core:
    """Simplex over the slack-extended equality system A x = b, l <= x <= u."""

    def __init__(self, A: sp.csc_matrix, b, lb, ub, senses, options: SolveOptions):
        m = A.shape[0]
        n_struct = A.shape[1]
        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        for i, sense in enumerate(senses):
            if sense == SENSE_LE:
                slack_lb[i], slack_ub[i] = 0.0, INF
            elif sense == SENSE_GE:
                slack_lb[i], slack_ub[i] = -INF, 0.0
            else:
                slack_lb[i], slack_ub[i] = 0.0, 0.0

        self.opts = options
        self.m = m
        self.b = np.asarray(b, dtype=float)

        # nonbasic start: nearest finite bound, free variables at zero
        x_struct = np.where(lb > -INF, lb, np.where(ub < INF, ub, 0.0))
        status_struct = np.where(
            lb > -INF, _NB_LOWER, np.where(ub < INF, _NB_UPPER, _NB_FREE)
        )
        r = self.b - A @ x_struct

        clamp = np.minimum(np.maximum(r, slack_lb), slack_ub)
        resid = r - clamp
        art_rows = np.flatnonzero(np.abs(resid) > FIX_TOL)
        n_art = len(art_rows)
        # nonbasic slacks sit on the bound they were clamped to
        slack_status = np.where(resid > 0, _NB_UPPER, _NB_LOWER)

        cols = sp.hstack(
            [A, sp.identity(m, format="csc")]
            + (
                [
                    sp.csc_matrix(
                        (np.sign(resid[art_rows]), (art_rows, np.arange(n_art))),
                        shape=(m, n_art),
                    )
                ]
                if n_art
                else []
            ),
            format="csc",
        )
        self.A = cols
        self.AT = cols.T.tocsr()
        self.n = cols.shape[1]
        self.n_struct = n_struct

        self.lb = np.concatenate([lb, slack_lb, np.zeros(n_art)])
        self.ub = np.concatenate([ub, slack_ub, np.full(n_art, INF)])
        self.x = np.concatenate([x_struct, clamp, np.abs(resid[art_rows])])
        self.vstatus = np.concatenate(
            [status_struct, slack_status, np.full(n_art, _NB_LOWER)]
        ).astype(int)

        self.basis = np.empty(m, dtype=int)
        diag = np.ones(m)
        art_of_row = {int(row): n_struct + m + j for j, row in enumerate(art_rows)}
        for i in range(m):
            if i in art_of_row:
                col = art_of_row[i]
                diag[i] = np.sign(resid[i])
            else:
                col = n_struct + i
            self.basis[i] = col
            self.vstatus[col] = _BASIC
        self.Binv = np.diag(diag) if m else np.zeros((0, 0))

        self.art_cols = np.array(
            [n_struct + m + j for j in range(n_art)], dtype=int
        )
        self.c = np.zeros(self.n)
        self.d = np.zeros(self.n)
        self.fixed = (self.ub - self.lb) <= FIX_TOL
        self.iterations = 0
        self.bland = False
        self._since_refactor = 0

    # -- factorization ----------------------------------------------------

    def refactor(self):
        if self.m:
            B = self.A[:, self.basis].toarray()
            self.Binv = np.linalg.inv(B)
            xn = self.x.copy()
            xn[self.basis] = 0.0
            self.x[self.basis] = self.Binv @ (self.b - self.A @ xn)
        self._recompute_duals()
        self._since_refactor = 0

    def _recompute_duals(self):
        if self.m:
            y = self.Binv.T @ self.c[self.basis]
        else:
            y = np.zeros(0)
        self.y = y
        self.d = self.c - self.AT @ y
        self.d[self.basis] = 0.0

    # -- pivoting ----------------------------------------------------------

    def _price(self):
        tol = self.opts.optimality_tol
        score = np.full(self.n, -np.inf)
        open_nb = ~self.fixed
        mask_l = (self.vstatus == _NB_LOWER) & open_nb
        mask_u = (self.vstatus == _NB_UPPER) & open_nb
        mask_f = self.vstatus == _NB_FREE
        score[mask_l] = -self.d[mask_l]
        score[mask_u] = self.d[mask_u]
        score[mask_f] = np.abs(self.d[mask_f])
        if self.bland:
            elig = score > tol
            if not elig.any():
                return None
            return int(np.argmax(elig))
        q = int(np.argmax(score))
        if score[q] <= tol:
            return None
        return q

    def _ftran(self, q):
        s, e = self.A.indptr[q], self.A.indptr[q + 1]
        idx = self.A.indices[s:e]
        vals = self.A.data[s:e]
        if self.m == 0:
            return np.zeros(0)
        return self.Binv[:, idx] @ vals

    def _step(self):
        """One pivot or bound flip. Returns 'optimal'/'unbounded'/None."""
        q = self._price()
        if q is None:
            return "optimal"
        st = self.vstatus[q]
        sigma = 1.0 if (st == _NB_LOWER or (st == _NB_FREE and self.d[q] < 0)) else -1.0
        u = self._ftran(q)
        delta = sigma * u

        xB = self.x[self.basis]
        ratios = np.full(self.m, np.inf)
        pos = delta > PIVOT_TOL
        neg = delta < -PIVOT_TOL
        if pos.any():
            ratios[pos] = (xB[pos] - self.lb[self.basis[pos]]) / delta[pos]
        if neg.any():
            ratios[neg] = (xB[neg] - self.ub[self.basis[neg]]) / delta[neg]
        ratios = np.maximum(
            np.nan_to_num(ratios, nan=np.inf, posinf=np.inf, neginf=np.inf), 0.0
        )
        t_block = ratios.min() if self.m else np.inf

        flip = self.ub[q] - self.lb[q] if st != _NB_FREE else np.inf

        if flip <= t_block:
            if flip == np.inf:
                return "unbounded"
            self.x[self.basis] = xB - flip * delta
            self.x[q] = self.ub[q] if st == _NB_LOWER else self.lb[q]
            self.vstatus[q] = _NB_UPPER if st == _NB_LOWER else _NB_LOWER
            self.iterations += 1
            self._last_step = flip
            return None
        if not np.isfinite(t_block):
            return "unbounded"

        cand = np.flatnonzero(ratios <= t_block + RATIO_TIE)
        if self.bland:
            p = int(cand[np.argmin(self.basis[cand])])
        else:
            p = int(cand[np.argmax(np.abs(delta[cand]))])

        t = max(t_block, 0.0)
        self.x[self.basis] = xB - t * delta
        self.x[q] = self.x[q] + sigma * t
        leaving = self.basis[p]
        if delta[p] > 0:
            self.x[leaving] = self.lb[leaving]
            self.vstatus[leaving] = _NB_LOWER
        else:
            self.x[leaving] = self.ub[leaving]
            self.vstatus[leaving] = _NB_UPPER

        rho = self.Binv[p, :].copy()
        alpha = u[p]
        dq = self.d[q]
        if dq != 0.0:
            self.d -= (dq / alpha) * (self.AT @ rho)
        factor = u / alpha
        factor[p] = 0.0
        # in-place rank-1 update; the transpose view is Fortran-ordered for BLAS
        dger(-1.0, rho, factor, a=self.Binv.T, overwrite_a=1)
        self.Binv[p, :] = rho / alpha

        self.basis[p] = q
        self.vstatus[q] = _BASIC
        self.d[q] = 0.0
        self.iterations += 1
        self._last_step = t
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_INTERVAL:
            self.refactor()
        return None

    def run_phase(self, costs):
        """Iterate to optimality/unboundedness under the given cost vector."""
        self.c = costs
        self._recompute_duals()
        self.bland = False
        degen = 0
        while True:
            if self.iterations >= self.opts.max_iterations:
                return "iterlimit"
            outcome = self._step()
            if outcome is not None:
                return outcome
            if self._last_step > DEGEN_TOL:
                degen = 0
            else:
                degen += 1
                if degen >= BLAND_STALL:
                    self.bland = True


def solve(model: LinearModel, options: SolveOptions | None = None) -> Solution:
    """Solve the LP relaxation of the model; statuses per module docstring."""
    opts = options or SolveOptions()
    n = model.num_variables
    if n == 0:
        raise ModelError("model must have at least one variable")

    lb = np.array([v.lower for v in model.variables])
    ub = np.array([v.upper for v in model.variables])
    cost = np.array([v.obj for v in model.variables])

    # presolve: pin fixed variables, drop rows whose support is entirely fixed
    fixed = (ub - lb) <= FIX_TOL
    x_fixed = np.where(fixed, lb, 0.0)
    active = np.flatnonzero(~fixed)
    col_of = {int(j): jj for jj, j in enumerate(active)}

    kept_rows = []
    kept_rhs = []
    kept_senses = []
    triplets_r, triplets_c, triplets_v = [], [], []
    feas_tol = opts.feasibility_tol
    for row in model.rows:
        shift = sum(c * x_fixed[j] for j, c in row.coeffs if fixed[j])
        live = [(j, c) for j, c in row.coeffs if not fixed[j]]
        rhs = row.rhs - shift
        if not live:
            bad = (
                (row.sense == SENSE_LE and rhs < -feas_tol)
                or (row.sense == SENSE_GE and rhs > feas_tol)
                or (row.sense == SENSE_EQ and abs(rhs) > feas_tol)
            )
            if bad:
                return Solution(
                    status=INFEASIBLE,
                    objective=float("nan"),
                    primal=np.zeros(n),
                    duals=np.zeros(model.num_rows),
                    reduced_costs=np.zeros(n),
                )
            continue
        ridx = len(kept_rhs)
        kept_rows.append(row.id)
        kept_rhs.append(rhs)
        kept_senses.append(row.sense)
        for j, c in live:
            triplets_r.append(ridx)
            triplets_c.append(col_of[j])
            triplets_v.append(c)

    duals_full = np.zeros(model.num_rows)
    if len(active) == 0:
        primal = x_fixed
        reduced = _reduced_costs(model, duals_full)
        return Solution(
            status=OPTIMAL,
            objective=float(cost @ primal),
            primal=primal,
            duals=duals_full,
            reduced_costs=reduced,
        )

    m = len(kept_rhs)
    A = sp.csc_matrix(
        (triplets_v, (triplets_r, triplets_c)), shape=(m, len(active))
    )
    core = _Core(A, np.array(kept_rhs), lb[active], ub[active], kept_senses, opts)

    status = OPTIMAL
    if len(core.art_cols):
        c1 = np.zeros(core.n)
        c1[core.art_cols] = 1.0
        outcome = core.run_phase(c1)
        if outcome == "iterlimit":
            status = ITERATION_LIMIT
        elif outcome == "unbounded":
            raise RuntimeError("phase-1 subproblem reported unbounded")
        else:
            infeas = float(core.x[core.art_cols].sum())
            scale = max(1.0, float(np.abs(core.b).max()) if m else 1.0)
            if infeas > feas_tol * scale:
                return Solution(
                    status=INFEASIBLE,
                    objective=float("nan"),
                    primal=np.zeros(n),
                    duals=np.zeros(model.num_rows),
                    reduced_costs=np.zeros(n),
                    iterations=core.iterations,
                )
            core.ub[core.art_cols] = 0.0
            core.x[core.art_cols] = 0.0
            core.fixed[core.art_cols] = True

    if status == OPTIMAL:
        c2 = np.zeros(core.n)
        c2[: len(active)] = cost[active]
        outcome = core.run_phase(c2)
        if outcome == "iterlimit":
            status = ITERATION_LIMIT
        elif outcome == "unbounded":
            return Solution(
                status=UNBOUNDED,
                objective=float("nan"),
                primal=np.zeros(n),
                duals=np.zeros(model.num_rows),
                reduced_costs=np.zeros(n),
                iterations=core.iterations,
            )

    if core._since_refactor:
        core.refactor()

    primal = x_fixed.copy()
    primal[active] = core.x[: len(active)]
    for ridx, rid in enumerate(kept_rows):
        duals_full[rid] = core.y[ridx]
    reduced = _reduced_costs(model, duals_full)
    return Solution(
        status=status,
        objective=float(cost @ primal),
        primal=primal,
        duals=duals_full,
        reduced_costs=reduced,
        iterations=core.iterations,
    )


def _reduced_costs(model: LinearModel, duals: np.ndarray) -> np.ndarray:
    d = np.array([v.obj for v in model.variables])
    for row in model.rows:
        y = duals[row.id]
        if y != 0.0:
            for j, c in row.coeffs:
                d[j] -= c * y
    return d


def check_certificates(
    model: LinearModel, sol: Solution, options: SolveOptions | None = None
) -> dict:
    """Primal feasibility, strong duality and complementary slackness gauges.

    Returns a dict of violation magnitudes for an Optimal solution; tests
    assert them against the solve tolerances.
    """
    opts = options or SolveOptions()
    x = sol.primal
    y = sol.duals
    d = sol.reduced_costs

    bound_viol = 0.0
    cs_var = 0.0
    dual_obj = 0.0
    for v in model.variables:
        bound_viol = max(bound_viol, v.lower - x[v.id], x[v.id] - v.upper)
        dj = d[v.id]
        inside = (
            x[v.id] > v.lower + opts.feasibility_tol
            and x[v.id] < v.upper - opts.feasibility_tol
        )
        if inside:
            cs_var = max(cs_var, abs(dj))
        if abs(dj) > 1e-12:
            anchor = v.lower if dj > 0 else v.upper
            if not np.isfinite(anchor):
                dual_obj = -np.inf
            else:
                dual_obj += dj * anchor

    row_viol = 0.0
    cs_row = 0.0
    for row in model.rows:
        lhs = sum(c * x[j] for j, c in row.coeffs)
        slack = row.rhs - lhs
        if row.sense == SENSE_LE:
            row_viol = max(row_viol, -slack)
        elif row.sense == SENSE_GE:
            row_viol = max(row_viol, slack)
        else:
            row_viol = max(row_viol, abs(slack))
        if abs(y[row.id]) > opts.optimality_tol:
            cs_row = max(cs_row, abs(slack))
        dual_obj += y[row.id] * row.rhs

    gap = abs(sol.objective - dual_obj)
    return {
        "bound_violation": float(bound_viol),
        "row_violation": float(row_viol),
        "duality_gap": float(gap),
        "cs_variable": float(cs_var),
        "cs_row": float(cs_row),
        "dual_objective": float(dual_obj),
    }
