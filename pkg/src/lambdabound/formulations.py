"""Model builders for working/backup wavelength assignment and its relaxations.

Each builder is a pure function from an instance to a LinearModel plus a
VarMap resolving every symbol of the built constraint system. Variable and
row orderings are fixed (lexicographic in the index tuples) so that repeated
builds are identical and exports are byte-stable.

Builders:
  build_ip_rwap_ppp  full working+backup model (relax flag gives its LP)
  build_ip_rwap      working-only model
  build_ip_r1        full model minus the working/backup linking rows
  build_ip_r2        backup-only model
  build_lp_r3        aggregated per-failure flow relaxation (continuous)
  build_lp_rwap_agg  single-scenario aggregation of the working-only LP
  build_subproblem   per-failure capacity-violation LP for a candidate w-bar
  cut_from_duals     dual feasibility cut for the decomposition master
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .instance import ArcTable, Instance, arcs, demand_matrix
from .lpmodel import (
    BINARY,
    CONTINUOUS,
    SENSE_EQ,
    SENSE_LE,
    LinearModel,
    Solution,
)


class FormulationError(ValueError):
    """Builder misuse or a dual point that fails its feasibility system."""


@dataclass
class VarMap:
    """Index maps from formulation symbols to model variable/row ids."""

    x: dict = field(default_factory=dict)  # (d, k, a) -> var
    w: dict = field(default_factory=dict)  # (k, e) -> var
    y: dict = field(default_factory=dict)  # (tau, d, k, a) -> var
    wbar: dict = field(default_factory=dict)  # e -> var
    y_agg: dict = field(default_factory=dict)  # (tau, s, a) -> var
    y_origin: dict = field(default_factory=dict)  # (s, a) -> var
    eps: int | None = None
    rows_source: dict = field(default_factory=dict)  # s -> row
    rows_source_in: dict = field(default_factory=dict)  # s -> row
    rows_balance: dict = field(default_factory=dict)  # (s, v) -> row
    rows_capacity: dict = field(default_factory=dict)  # e -> row
    rows_failed: dict = field(default_factory=dict)  # s -> row


@dataclass(frozen=True)
class Cut:
    """Feasibility cut over the edge capacity variables: constant + theta.wbar <= 0."""

    failure: int
    constant: float
    wbar_coeffs: tuple[tuple[int, float], ...]

    def evaluate(self, wbar) -> float:
        return self.constant + sum(c * wbar[e] for e, c in self.wbar_coeffs)


def _integrality(relax: bool) -> str:
    return CONTINUOUS if relax else BINARY


def _row_totals(instance: Instance):
    q = demand_matrix(instance)
    totals = np.zeros(instance.num_nodes)
    for (s, _), cnt in q.counts.items():
        totals[s] += cnt
    return q, totals


def _add_working_block(model, vm, instance, table: ArcTable, relax: bool):
    """Working-path variables and their flow/no-clash rows."""
    D = instance.num_requests
    K = instance.num_wavelengths
    kind = _integrality(relax)
    for d in range(D):
        for k in range(K):
            for a in range(table.num_arcs):
                vm.x[(d, k, a)] = model.add_variable(
                    0.0, 1.0, 0.0, kind, name=f"x_d{d}k{k}a{a}"
                )
    for k in range(K):
        for e in range(instance.num_edges):
            vm.w[(k, e)] = model.add_variable(
                0.0, 1.0, 1.0, kind, name=f"w_k{k}e{e}"
            )
    for d, req in enumerate(instance.requests):
        model.add_row(
            SENSE_EQ,
            1.0,
            [(vm.x[(d, k, a)], 1.0) for k in range(K) for a in table.out_arcs[req.s]],
            name=f"wsrc_d{d}",
        )
    for d, req in enumerate(instance.requests):
        model.add_row(
            SENSE_EQ,
            0.0,
            [(vm.x[(d, k, a)], 1.0) for k in range(K) for a in table.in_arcs[req.s]],
            name=f"wnull_d{d}",
        )
    for d, req in enumerate(instance.requests):
        for k in range(K):
            for v in range(instance.num_nodes):
                if v in (req.s, req.t):
                    continue
                coeffs = [(vm.x[(d, k, a)], 1.0) for a in table.in_arcs[v]]
                coeffs += [(vm.x[(d, k, a)], -1.0) for a in table.out_arcs[v]]
                model.add_row(SENSE_EQ, 0.0, coeffs, name=f"wbal_d{d}k{k}v{v}")
    for k in range(K):
        for e in range(instance.num_edges):
            coeffs = [(vm.x[(d, k, 2 * e)], 1.0) for d in range(D)]
            coeffs += [(vm.x[(d, k, 2 * e + 1)], 1.0) for d in range(D)]
            coeffs.append((vm.w[(k, e)], -1.0))
            model.add_row(SENSE_LE, 0.0, coeffs, name=f"wcap_k{k}e{e}")


def _add_backup_block(model, vm, instance, table: ArcTable, relax: bool, with_w: bool):
    """Per-failure backup variables with flow, no-clash and exclusion rows."""
    D = instance.num_requests
    K = instance.num_wavelengths
    kind = _integrality(relax)
    if with_w and not vm.w:
        for k in range(K):
            for e in range(instance.num_edges):
                vm.w[(k, e)] = model.add_variable(
                    0.0, 1.0, 1.0, kind, name=f"w_k{k}e{e}"
                )
    for tau in instance.failures:
        for d in range(D):
            for k in range(K):
                for a in range(table.num_arcs):
                    vm.y[(tau, d, k, a)] = model.add_variable(
                        0.0, 1.0, 0.0, kind, name=f"yb_t{tau}d{d}k{k}a{a}"
                    )
    for tau in instance.failures:
        for d, req in enumerate(instance.requests):
            model.add_row(
                SENSE_EQ,
                1.0,
                [
                    (vm.y[(tau, d, k, a)], 1.0)
                    for k in range(K)
                    for a in table.out_arcs[req.s]
                ],
                name=f"bsrc_t{tau}d{d}",
            )
        for d, req in enumerate(instance.requests):
            model.add_row(
                SENSE_EQ,
                0.0,
                [
                    (vm.y[(tau, d, k, a)], 1.0)
                    for k in range(K)
                    for a in table.in_arcs[req.s]
                ],
                name=f"bnull_t{tau}d{d}",
            )
        for d, req in enumerate(instance.requests):
            for k in range(K):
                for v in range(instance.num_nodes):
                    if v in (req.s, req.t):
                        continue
                    coeffs = [(vm.y[(tau, d, k, a)], 1.0) for a in table.in_arcs[v]]
                    coeffs += [(vm.y[(tau, d, k, a)], -1.0) for a in table.out_arcs[v]]
                    model.add_row(SENSE_EQ, 0.0, coeffs, name=f"bbal_t{tau}d{d}k{k}v{v}")
        for k in range(K):
            for e in range(instance.num_edges):
                coeffs = [(vm.y[(tau, d, k, 2 * e)], 1.0) for d in range(D)]
                coeffs += [(vm.y[(tau, d, k, 2 * e + 1)], 1.0) for d in range(D)]
                coeffs.append((vm.w[(k, e)], -1.0))
                model.add_row(SENSE_LE, 0.0, coeffs, name=f"bcap_t{tau}k{k}e{e}")
        for d in range(D):
            for k in range(K):
                model.add_row(
                    SENSE_EQ,
                    0.0,
                    [
                        (vm.y[(tau, d, k, 2 * tau)], 1.0),
                        (vm.y[(tau, d, k, 2 * tau + 1)], 1.0),
                    ],
                    name=f"bexcl_t{tau}d{d}k{k}",
                )


def _add_linking_block(model, vm, instance, table: ArcTable):
    """Rows tying backups to the working assignment when the failure misses it."""
    D = instance.num_requests
    K = instance.num_wavelengths
    for tau in instance.failures:
        fwd, bwd = 2 * tau, 2 * tau + 1
        for d in range(D):
            onpath = [(vm.x[(d, kk, fwd)], 1.0) for kk in range(K)]
            onpath += [(vm.x[(d, kk, bwd)], 1.0) for kk in range(K)]
            for k in range(K):
                for a in range(table.num_arcs):
                    low = [(vm.x[(d, k, a)], 1.0)]
                    low += [(vid, -c) for vid, c in onpath]
                    low.append((vm.y[(tau, d, k, a)], -1.0))
                    model.add_row(SENSE_LE, 0.0, low, name=f"lnklo_t{tau}d{d}k{k}a{a}")
            for k in range(K):
                for a in range(table.num_arcs):
                    high = [(vm.y[(tau, d, k, a)], 1.0), (vm.x[(d, k, a)], -1.0)]
                    high += [(vid, -c) for vid, c in onpath]
                    model.add_row(SENSE_LE, 0.0, high, name=f"lnkhi_t{tau}d{d}k{k}a{a}")


def build_ip_rwap_ppp(instance: Instance, relax: bool = False):
    """Full model: working + per-failure backup assignment, linked."""
    table = arcs(instance.network)
    model = LinearModel(f"rwap-ppp:{instance.name}")
    vm = VarMap()
    _add_working_block(model, vm, instance, table, relax)
    _add_backup_block(model, vm, instance, table, relax, with_w=False)
    _add_linking_block(model, vm, instance, table)
    return model, vm


def build_ip_rwap(instance: Instance, relax: bool = False):
    """Working-only model (no failures considered)."""
    table = arcs(instance.network)
    model = LinearModel(f"rwap:{instance.name}")
    vm = VarMap()
    _add_working_block(model, vm, instance, table, relax)
    return model, vm


def build_ip_r1(instance: Instance, relax: bool = False):
    """Full model with the working/backup linking rows dropped."""
    table = arcs(instance.network)
    model = LinearModel(f"r1:{instance.name}")
    vm = VarMap()
    _add_working_block(model, vm, instance, table, relax)
    _add_backup_block(model, vm, instance, table, relax, with_w=False)
    return model, vm


def build_ip_r2(instance: Instance, relax: bool = False):
    """Backup-only model: working variables and their rows removed."""
    table = arcs(instance.network)
    model = LinearModel(f"r2:{instance.name}")
    vm = VarMap()
    _add_backup_block(model, vm, instance, table, relax, with_w=True)
    return model, vm


def _aggregated_flow_rows(model, vm, instance, table, q, totals, tau, tagged):
    """Origin-aggregated flow rows for one scenario (tau None = no failure)."""
    V = instance.num_nodes
    tag = f"t{tau}" if tagged else ""

    def yv(s, a):
        return vm.y_agg[(tau, s, a)] if tagged else vm.y_origin[(s, a)]

    src, src_in, bal = {}, {}, {}
    for s in range(V):
        src[s] = model.add_row(
            SENSE_EQ,
            float(totals[s]),
            [(yv(s, a), 1.0) for a in table.out_arcs[s]],
            name=f"asrc_{tag}s{s}",
        )
    for s in range(V):
        src_in[s] = model.add_row(
            SENSE_EQ,
            0.0,
            [(yv(s, a), 1.0) for a in table.in_arcs[s]],
            name=f"anull_{tag}s{s}",
        )
    for s in range(V):
        for v in range(V):
            if v == s:
                continue
            coeffs = [(yv(s, a), 1.0) for a in table.in_arcs[v]]
            coeffs += [(yv(s, a), -1.0) for a in table.out_arcs[v]]
            bal[(s, v)] = model.add_row(
                SENSE_EQ, float(q.get(s, v)), coeffs, name=f"abal_{tag}s{s}v{v}"
            )
    return src, src_in, bal


def build_lp_r3(instance: Instance):
    """Aggregated per-failure relaxation over edge counts and origin flows."""
    if not instance.failures:
        raise FormulationError(
            "failure set is empty; use build_lp_rwap_agg for the no-failure model"
        )
    table = arcs(instance.network)
    q, totals = _row_totals(instance)
    V, E, K = instance.num_nodes, instance.num_edges, instance.num_wavelengths
    model = LinearModel(f"lp-r3:{instance.name}")
    vm = VarMap()
    for e in range(E):
        vm.wbar[e] = model.add_variable(0.0, float(K), 1.0, name=f"wb_e{e}")
    for tau in instance.failures:
        for s in range(V):
            for a in range(table.num_arcs):
                vm.y_agg[(tau, s, a)] = model.add_variable(
                    0.0, float(totals[s]), 0.0, name=f"ya_t{tau}s{s}a{a}"
                )
    for tau in instance.failures:
        _aggregated_flow_rows(model, vm, instance, table, q, totals, tau, tagged=True)
        for e in range(E):
            coeffs = [(vm.y_agg[(tau, s, 2 * e)], 1.0) for s in range(V)]
            coeffs += [(vm.y_agg[(tau, s, 2 * e + 1)], 1.0) for s in range(V)]
            coeffs.append((vm.wbar[e], -1.0))
            model.add_row(SENSE_LE, 0.0, coeffs, name=f"acap_t{tau}e{e}")
        for s in range(V):
            model.add_row(
                SENSE_EQ,
                0.0,
                [
                    (vm.y_agg[(tau, s, 2 * tau)], 1.0),
                    (vm.y_agg[(tau, s, 2 * tau + 1)], 1.0),
                ],
                name=f"aexcl_t{tau}s{s}",
            )
    return model, vm


def build_lp_rwap_agg(instance: Instance):
    """Single-scenario aggregation: working-only LP over origin flows."""
    table = arcs(instance.network)
    q, totals = _row_totals(instance)
    V, E, K = instance.num_nodes, instance.num_edges, instance.num_wavelengths
    model = LinearModel(f"lp-rwap-agg:{instance.name}")
    vm = VarMap()
    for e in range(E):
        vm.wbar[e] = model.add_variable(0.0, float(K), 1.0, name=f"wb_e{e}")
    for s in range(V):
        for a in range(table.num_arcs):
            vm.y_origin[(s, a)] = model.add_variable(
                0.0, float(totals[s]), 0.0, name=f"ya_s{s}a{a}"
            )
    _aggregated_flow_rows(model, vm, instance, table, q, totals, None, tagged=False)
    for e in range(E):
        coeffs = [(vm.y_origin[(s, 2 * e)], 1.0) for s in range(V)]
        coeffs += [(vm.y_origin[(s, 2 * e + 1)], 1.0) for s in range(V)]
        coeffs.append((vm.wbar[e], -1.0))
        model.add_row(SENSE_LE, 0.0, coeffs, name=f"acap_e{e}")
    return model, vm


def build_subproblem(instance: Instance, failed_edge: int, wbar):
    """Minimum capacity-violation LP for one failure, given candidate capacities."""
    if failed_edge not in instance.failures:
        raise FormulationError(f"edge {failed_edge} is not in the failure set")
    K = instance.num_wavelengths
    wbar = np.asarray(wbar, dtype=float)
    if wbar.shape != (instance.num_edges,):
        raise FormulationError("wbar must have one entry per edge")
    if (wbar < -1e-9).any() or (wbar > K + 1e-9).any():
        raise FormulationError("wbar entries must lie within [0, |K|]")
    table = arcs(instance.network)
    q, totals = _row_totals(instance)
    V, E = instance.num_nodes, instance.num_edges
    model = LinearModel(f"sub:{instance.name}:t{failed_edge}")
    vm = VarMap()
    for s in range(V):
        for a in range(table.num_arcs):
            vm.y_agg[(failed_edge, s, a)] = model.add_variable(
                0.0, float(totals[s]), 0.0, name=f"ya_s{s}a{a}"
            )
    vm.eps = model.add_variable(0.0, float("inf"), 1.0, name="eps")
    src, src_in, bal = _aggregated_flow_rows(
        model, vm, instance, table, q, totals, failed_edge, tagged=True
    )
    vm.rows_source = src
    vm.rows_source_in = src_in
    vm.rows_balance = bal
    for e in range(E):
        coeffs = [(vm.y_agg[(failed_edge, s, 2 * e)], 1.0) for s in range(V)]
        coeffs += [(vm.y_agg[(failed_edge, s, 2 * e + 1)], 1.0) for s in range(V)]
        coeffs.append((vm.eps, -1.0))
        vm.rows_capacity[e] = model.add_row(
            SENSE_LE, float(wbar[e]), coeffs, name=f"scap_e{e}"
        )
    for s in range(V):
        vm.rows_failed[s] = model.add_row(
            SENSE_EQ,
            0.0,
            [
                (vm.y_agg[(failed_edge, s, 2 * failed_edge)], 1.0),
                (vm.y_agg[(failed_edge, s, 2 * failed_edge + 1)], 1.0),
            ],
            name=f"sexcl_s{s}",
        )
    return model, vm


def dual_point_violation(instance, failed_edge, beta, phi, gamma, theta, psi, zeta):
    """Max violation of the subproblem's dual feasibility system.

    The system is reconstructed from the instance structure alone, so a sign
    convention bug in the solver's duals cannot hide here.
    """
    table = arcs(instance.network)
    V = instance.num_nodes
    worst = 0.0
    for s in range(V):
        for arc in table.arcs:
            u, v, e = arc.tail, arc.head, arc.edge
            lhs = theta[e] + zeta[(s, arc.id)]
            lhs += beta[s] if u == s else -gamma[(s, u)]
            lhs += phi[s] if v == s else gamma[(s, v)]
            if e == failed_edge:
                lhs += psi[s]
            worst = max(worst, lhs)
    worst = max(worst, -sum(theta) - 1.0)
    worst = max(worst, max(theta) if len(theta) else 0.0)
    worst = max(worst, max(zeta.values()) if zeta else 0.0)
    return worst


def cut_from_duals(
    instance: Instance,
    failed_edge: int,
    wbar,
    solution: Solution,
    varmap: VarMap,
    tol: float = 1e-6,
) -> Cut:
    """Turn an optimal dual point of the violation subproblem into a cut."""
    if solution.status != "Optimal":
        raise FormulationError("cut requires an Optimal subproblem solution")
    if solution.objective <= tol:
        raise FormulationError(
            "subproblem shows no violation; a cut was not warranted"
        )
    V = instance.num_nodes
    duals = solution.duals
    beta = {s: float(duals[varmap.rows_source[s]]) for s in range(V)}
    phi = {s: float(duals[varmap.rows_source_in[s]]) for s in range(V)}
    gamma = {
        (s, v): float(duals[r]) for (s, v), r in varmap.rows_balance.items()
    }
    theta = [float(duals[varmap.rows_capacity[e]]) for e in range(instance.num_edges)]
    psi = {s: float(duals[varmap.rows_failed[s]]) for s in range(V)}
    zeta = {}
    for (tau, s, a), vid in varmap.y_agg.items():
        zeta[(s, a)] = min(0.0, float(solution.reduced_costs[vid]))

    worst = dual_point_violation(
        instance, failed_edge, beta, phi, gamma, theta, psi, zeta
    )
    if worst > tol:
        raise FormulationError(
            f"dual point violates its feasibility system by {worst:.3e}"
        )

    q, totals = _row_totals(instance)
    constant = sum(totals[s] * beta[s] for s in range(V))
    constant += sum(q.get(s, v) * g for (s, v), g in gamma.items())
    constant += sum(totals[s] * z for (s, _), z in zeta.items())
    coeffs = tuple((e, th) for e, th in enumerate(theta) if th != 0.0)
    cut = Cut(failure=failed_edge, constant=float(constant), wbar_coeffs=coeffs)

    value = cut.evaluate(np.asarray(wbar, dtype=float))
    if abs(value - solution.objective) > tol * (1.0 + abs(solution.objective)):
        raise FormulationError(
            f"cut value {value:.6g} disagrees with subproblem optimum "
            f"{solution.objective:.6g}"
        )
    return cut
