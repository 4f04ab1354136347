"""Decomposition solver for the aggregated per-failure relaxation.

The restricted master keeps the full flow block of one designated failure
(tau0, lowest edge id) as valid inequalities together with the edge capacity
variables, and represents every other failure through dual feasibility cuts
generated on the fly. Each iteration solves the master, skips the failures
whose capacity the master flow provably already covers (the tau0-flow filter),
solves the remaining violation subproblems, and adds one cut per violated
failure. Master objectives are nondecreasing because rows only accumulate,
and every master optimum is a valid lower bound for the full relaxation.

Subproblem solves within an iteration are independent; with
parallel_subproblems they fan out to a thread pool and the resulting cuts are
applied in ascending edge order so runs stay deterministic either way.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .formulations import Cut, VarMap, build_subproblem, cut_from_duals
from .instance import Instance, arcs, demand_matrix
from .lpmodel import SENSE_EQ, SENSE_LE, LinearModel
from .simplex import INFEASIBLE, OPTIMAL, SolveOptions, solve

CONVERGED = "Converged"
ITERATION_LIMIT = "IterationLimit"
INFEASIBLE_STATUS = "Infeasible"


class BendersError(RuntimeError):
    pass


@dataclass(frozen=True)
class BendersOptions:
    violation_tol: float = 1e-7
    max_iterations: int = 500
    parallel_subproblems: bool = False
    tau0_rule: str = "lowest-edge-id"
    filter_tol: float = 1e-9
    threads: int = 0  # 0 = auto
    verify_filtered: bool = False
    solver: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.violation_tol <= 0:
            raise ValueError("violation_tol must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.tau0_rule != "lowest-edge-id":
            raise ValueError(f"unknown tau0 rule {self.tau0_rule!r}")


@dataclass
class CutPool:
    """Per-failure cut lists; duplicates (same constant and coefficients) dropped."""

    by_failure: dict = field(default_factory=dict)
    total: int = 0

    def add(self, cut: Cut) -> bool:
        bucket = self.by_failure.setdefault(cut.failure, [])
        for existing in bucket:
            if (
                existing.constant == cut.constant
                and existing.wbar_coeffs == cut.wbar_coeffs
            ):
                return False
        bucket.append(cut)
        self.total += 1
        return True

    def all_cuts(self):
        for tau in sorted(self.by_failure):
            yield from self.by_failure[tau]


@dataclass
class MasterSolution:
    objective: float
    wbar: np.ndarray  # per edge
    flows: np.ndarray  # per (origin, arc), scenario tau0


@dataclass
class LogRecord:
    iteration: int
    master_objective: float
    n_pi_prime: int
    n_violated: int
    max_violation: float
    cuts_total: int
    elapsed_ms: int
    filtered_max_violation: float | None = None


@dataclass
class BendersResult:
    status: str
    lower_bound: float
    wbar: np.ndarray | None
    tau0: int
    iterations: int
    cuts_added: int
    log: list
    pool: CutPool
    offending_failure: int | None = None


def log_to_csv(log) -> str:
    lines = ["iter,master_obj,n_pi_prime,n_violated,max_violation,cuts_total,elapsed_ms"]
    for rec in log:
        lines.append(
            f"{rec.iteration},{rec.master_objective:.6f},{rec.n_pi_prime},"
            f"{rec.n_violated},{rec.max_violation:.9f},{rec.cuts_total},{rec.elapsed_ms}"
        )
    return "\n".join(lines) + "\n"


def build_master(instance: Instance, tau0: int):
    """Restricted master: capacity variables plus the tau0 flow block.

    The zero-inflow-at-origin rows are kept for tau0 even though they are
    redundant for the bound: they are valid for the full relaxation and make
    the master block identical to the subproblem structure.
    """
    table = arcs(instance.network)
    q = demand_matrix(instance)
    V, E, K = instance.num_nodes, instance.num_edges, instance.num_wavelengths
    totals = np.zeros(V)
    for (s, _), cnt in q.counts.items():
        totals[s] += cnt
    model = LinearModel(f"master:{instance.name}:t{tau0}")
    vm = VarMap()
    for e in range(E):
        vm.wbar[e] = model.add_variable(0.0, float(K), 1.0, name=f"wb_e{e}")
    for s in range(V):
        for a in range(table.num_arcs):
            vm.y_agg[(tau0, s, a)] = model.add_variable(
                0.0, float(totals[s]), 0.0, name=f"ya_s{s}a{a}"
            )
    for s in range(V):
        model.add_row(
            SENSE_EQ,
            float(totals[s]),
            [(vm.y_agg[(tau0, s, a)], 1.0) for a in table.out_arcs[s]],
            name=f"msrc_s{s}",
        )
    for s in range(V):
        model.add_row(
            SENSE_EQ,
            0.0,
            [(vm.y_agg[(tau0, s, a)], 1.0) for a in table.in_arcs[s]],
            name=f"mnull_s{s}",
        )
    for s in range(V):
        for v in range(V):
            if v == s:
                continue
            coeffs = [(vm.y_agg[(tau0, s, a)], 1.0) for a in table.in_arcs[v]]
            coeffs += [(vm.y_agg[(tau0, s, a)], -1.0) for a in table.out_arcs[v]]
            model.add_row(SENSE_EQ, float(q.get(s, v)), coeffs, name=f"mbal_s{s}v{v}")
    for e in range(E):
        coeffs = [(vm.y_agg[(tau0, s, 2 * e)], 1.0) for s in range(V)]
        coeffs += [(vm.y_agg[(tau0, s, 2 * e + 1)], 1.0) for s in range(V)]
        coeffs.append((vm.wbar[e], -1.0))
        model.add_row(SENSE_LE, 0.0, coeffs, name=f"mcap_e{e}")
    for s in range(V):
        model.add_row(
            SENSE_EQ,
            0.0,
            [
                (vm.y_agg[(tau0, s, 2 * tau0)], 1.0),
                (vm.y_agg[(tau0, s, 2 * tau0 + 1)], 1.0),
            ],
            name=f"mexcl_s{s}",
        )
    return model, vm


def pi_prime_filter(
    instance: Instance, master: MasterSolution, tol: float = 1e-9
) -> set[int]:
    """Failures whose arcs carry no tau0 flow; their subproblems are skipped.

    The master flow itself certifies these scenarios (it avoids the failed
    edge entirely and fits the same capacities), so their violation is zero.
    """
    skipped = set()
    for tau in instance.failures:
        fwd = master.flows[:, 2 * tau]
        bwd = master.flows[:, 2 * tau + 1]
        if (fwd <= tol).all() and (bwd <= tol).all():
            skipped.add(tau)
    return skipped


class BendersState:
    """Mutable algorithm state; iterate_once is idempotent after convergence."""

    def __init__(self, instance: Instance, options: BendersOptions | None = None):
        if not instance.failures:
            raise BendersError("instance has an empty failure set")
        opts = options or BendersOptions()
        self.instance = instance
        self.options = opts
        self.tau0 = min(instance.failures)
        self.model, self.varmap = build_master(instance, self.tau0)
        self.pool = CutPool()
        self.log: list[LogRecord] = []
        self.converged = False
        self.infeasible_failure: int | None = None
        self.stalled = False
        self.master_solution: MasterSolution | None = None
        self._arc_count = arcs(instance.network).num_arcs
        self._t0 = time.perf_counter()

    def _solve_master(self) -> MasterSolution:
        sol = solve(self.model, self.options.solver)
        if sol.status != OPTIMAL:
            if sol.status == INFEASIBLE:
                self.infeasible_failure = self.tau0
                raise BendersError(f"master infeasible (failure {self.tau0})")
            raise BendersError(f"master solve ended with status {sol.status}")
        V = self.instance.num_nodes
        wbar = np.array(
            [sol.primal[self.varmap.wbar[e]] for e in range(self.instance.num_edges)]
        )
        flows = np.zeros((V, self._arc_count))
        for (tau, s, a), vid in self.varmap.y_agg.items():
            flows[s, a] = sol.primal[vid]
        return MasterSolution(objective=sol.objective, wbar=wbar, flows=flows)

    def _solve_subproblem(self, tau: int, wbar):
        model, vm = build_subproblem(self.instance, tau, wbar)
        sol = solve(model, self.options.solver)
        return tau, sol, vm

    def iterate_once(self) -> bool:
        """Run one master/subproblem round; returns True once converged."""
        if self.converged:
            return True
        opts = self.options
        master = self._solve_master()
        self.master_solution = master

        skipped = pi_prime_filter(self.instance, master, opts.filter_tol)
        targets = [tau for tau in sorted(self.instance.failures) if tau not in skipped]

        if opts.parallel_subproblems and len(targets) > 1:
            workers = opts.threads or min(8, len(targets))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(lambda t: self._solve_subproblem(t, master.wbar), targets)
                )
        else:
            results = [self._solve_subproblem(tau, master.wbar) for tau in targets]

        violated = []
        max_violation = 0.0
        for tau, sol, vm in results:
            if sol.status == INFEASIBLE:
                self.infeasible_failure = tau
                raise BendersError(f"subproblem for failure {tau} is infeasible")
            if sol.status != OPTIMAL:
                raise BendersError(f"subproblem {tau} status {sol.status}")
            max_violation = max(max_violation, sol.objective)
            if sol.objective > opts.violation_tol:
                violated.append((tau, sol, vm))

        filtered_max = None
        if opts.verify_filtered and skipped:
            filtered_max = 0.0
            for tau in sorted(skipped):
                _, sol, _ = self._solve_subproblem(tau, master.wbar)
                filtered_max = max(filtered_max, sol.objective)

        added = 0
        for tau, sol, vm in violated:
            cut = cut_from_duals(self.instance, tau, master.wbar, sol, vm)
            if self.pool.add(cut):
                self.model.add_row(
                    SENSE_LE,
                    -cut.constant,
                    [(self.varmap.wbar[e], c) for e, c in cut.wbar_coeffs],
                    name=f"cut{self.pool.total}_t{tau}",
                )
                added += 1

        self.log.append(
            LogRecord(
                iteration=len(self.log) + 1,
                master_objective=master.objective,
                n_pi_prime=len(skipped),
                n_violated=len(violated),
                max_violation=max_violation,
                cuts_total=self.pool.total,
                elapsed_ms=int(1000 * (time.perf_counter() - self._t0)),
                filtered_max_violation=filtered_max,
            )
        )

        if not violated:
            self.converged = True
        elif added == 0:
            # every violated cut was a duplicate: numerically stuck
            self.stalled = True
        return self.converged


def solve_lp_r3_benders(
    instance: Instance, options: BendersOptions | None = None
) -> BendersResult:
    """Run the decomposition to optimality of the aggregated relaxation."""
    opts = options or BendersOptions()
    state = BendersState(instance, opts)
    status = ITERATION_LIMIT
    try:
        for _ in range(opts.max_iterations):
            if state.iterate_once():
                status = CONVERGED
                break
            if state.stalled:
                break
    except BendersError:
        if state.infeasible_failure is None:
            raise
        return BendersResult(
            status=INFEASIBLE_STATUS,
            lower_bound=float("nan"),
            wbar=None,
            tau0=state.tau0,
            iterations=len(state.log),
            cuts_added=state.pool.total,
            log=state.log,
            pool=state.pool,
            offending_failure=state.infeasible_failure,
        )
    last = state.master_solution
    return BendersResult(
        status=status,
        lower_bound=last.objective if last is not None else float("nan"),
        wbar=last.wbar if last is not None else None,
        tau0=state.tau0,
        iterations=len(state.log),
        cuts_added=state.pool.total,
        log=state.log,
        pool=state.pool,
    )
