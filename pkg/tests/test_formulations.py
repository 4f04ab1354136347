import dataclasses

import numpy as np
import pytest

from helpers import linprog_solve, solve_checked
from lambdabound import simplex
from lambdabound.formulations import (
    Cut,
    FormulationError,
    build_ip_r1,
    build_ip_r2,
    build_ip_rwap,
    build_ip_rwap_ppp,
    build_lp_r3,
    build_lp_rwap_agg,
    build_subproblem,
    cut_from_duals,
)
from lambdabound.instance import (
    Edge,
    Instance,
    Network,
    Request,
    gen_cycle,
    gen_random,
)
from lambdabound.lpmodel import BINARY, CONTINUOUS


def _sizes(instance):
    V = instance.num_nodes
    E = instance.num_edges
    return V, E, 2 * E, instance.num_requests, instance.num_wavelengths, len(
        instance.failures
    )


def test_full_model_counts(net4):
    V, E, A, D, K, P = _sizes(net4)
    model, vm = build_ip_rwap_ppp(net4)
    assert len(vm.x) == D * K * A == 2 * K * 10
    assert len(vm.y) == P * D * K * A
    assert len(vm.w) == K * E
    assert model.num_variables == D * K * A + K * E + P * D * K * A
    expected_rows = (
        2 * D
        + D * K * (V - 2)
        + K * E
        + 2 * P * D
        + P * D * K * (V - 2)
        + P * K * E
        + 2 * P * D * K * A
        + P * D * K
    )
    assert model.num_rows == expected_rows


def test_relaxation_counts(net4):
    V, E, A, D, K, P = _sizes(net4)
    rwap, _ = build_ip_rwap(net4)
    assert rwap.num_variables == D * K * A + K * E
    assert rwap.num_rows == 2 * D + D * K * (V - 2) + K * E

    r1, _ = build_ip_r1(net4)
    full, _ = build_ip_rwap_ppp(net4)
    assert r1.num_variables == full.num_variables
    assert r1.num_rows == full.num_rows - 2 * P * D * K * A

    r2, _ = build_ip_r2(net4)
    assert r2.num_variables == K * E + P * D * K * A
    assert r2.num_rows == 2 * P * D + P * D * K * (V - 2) + P * K * E + P * D * K
    assert r2.num_variables < r1.num_variables

    r3, _ = build_lp_r3(net4)
    assert r3.num_variables == E + P * V * A
    assert r3.num_rows == 2 * P * V + P * V * (V - 1) + P * E + P * V

    agg, _ = build_lp_rwap_agg(net4)
    assert agg.num_variables == E + V * A
    assert agg.num_rows == 2 * V + V * (V - 1) + E

    sub, _ = build_subproblem(net4, net4.failures[0], np.zeros(E))
    assert sub.num_variables == V * A + 1
    assert sub.num_rows == 2 * V + V * (V - 1) + E + V


def test_empty_failure_set_degenerates():
    inst = dataclasses.replace(gen_cycle(4, 2, 3), failures=())
    model, vm = build_ip_rwap_ppp(inst)
    assert not vm.y
    rwap, _ = build_ip_rwap(inst)
    assert model.num_variables == rwap.num_variables
    assert model.num_rows == rwap.num_rows
    with pytest.raises(FormulationError, match="lp_rwap_agg"):
        build_lp_r3(inst)


def test_relax_flag_controls_annotations():
    inst = gen_cycle(3, 1, 2)
    strict, _ = build_ip_rwap_ppp(inst, relax=False)
    relaxed, _ = build_ip_rwap_ppp(inst, relax=True)
    assert all(v.integrality == BINARY for v in strict.variables)
    assert all(v.integrality == CONTINUOUS for v in relaxed.variables)
    assert strict.num_rows == relaxed.num_rows
    assert all(
        (v.lower, v.upper) == (w.lower, w.upper)
        for v, w in zip(strict.variables, relaxed.variables)
    )


def test_ring_closed_forms():
    # one failing edge forces the long way around; the ring pins every edge.
    # k=8 keeps the wavelength-indexed models small; the value is m*n for any
    # k >= n since the capacity boxes never bind
    inst = gen_cycle(4, 2, 8)
    o2 = solve_checked(build_ip_r2(inst, relax=True)[0]).objective
    assert o2 == pytest.approx(8.0, abs=1e-6)
    o1 = solve_checked(build_ip_r1(inst, relax=True)[0]).objective
    assert o1 == pytest.approx(o2, abs=1e-6)

    for m, n in ((3, 1), (5, 3), (6, 2)):
        inst = gen_cycle(m, n, 80)
        assert solve_checked(build_lp_r3(inst)[0]).objective == pytest.approx(
            m * n, abs=1e-6
        )
        assert solve_checked(build_lp_rwap_agg(inst)[0]).objective == pytest.approx(
            n, abs=1e-6
        )


def test_single_failure_shrinks_r2():
    inst = dataclasses.replace(gen_cycle(4, 2, 2), failures=(1,))
    r1, _ = build_ip_r1(inst)
    r2, _ = build_ip_r2(inst)
    assert r2.num_variables < r1.num_variables


def test_aggregation_equalities_on_random_instance():
    inst = gen_random(6, 2, 3, 3, seed=21)
    o3 = solve_checked(build_lp_r3(inst)[0]).objective
    o2 = solve_checked(build_ip_r2(inst, relax=True)[0]).objective
    assert o3 == pytest.approx(o2, abs=1e-6)

    agg = solve_checked(build_lp_rwap_agg(inst)[0]).objective
    direct = solve_checked(build_ip_rwap(inst, relax=True)[0]).objective
    assert agg == pytest.approx(direct, abs=1e-6)


def test_no_demand_gives_zero():
    inst = gen_random(4, 1, 0, 1, seed=0)
    assert solve_checked(build_lp_rwap_agg(inst)[0]).objective == pytest.approx(0.0)
    assert solve_checked(build_lp_r3(inst)[0]).objective == pytest.approx(0.0)


def test_full_relaxation_bounded_by_oracle():
    from lambdabound.oracle import exact_rwap_ppp

    inst = gen_cycle(3, 1, 1)
    lp = solve_checked(build_ip_rwap_ppp(inst, relax=True)[0]).objective
    exact = exact_rwap_ppp(inst)
    assert exact == 3
    assert lp <= exact + 1e-6


def test_subproblem_zero_at_feasible_capacities():
    inst = gen_cycle(5, 3, 80)
    model, vm = build_lp_r3(inst)
    sol = solve_checked(model)
    wbar = np.array([sol.primal[vm.wbar[e]] for e in range(inst.num_edges)])
    for tau in inst.failures:
        sub, _ = build_subproblem(inst, tau, wbar)
        assert solve_checked(sub).objective <= 1e-7


def test_subproblem_forced_violation():
    # empty capacities push both units onto the two-hop detour
    inst = gen_cycle(3, 2, 80)
    sub, _ = build_subproblem(inst, 2, np.zeros(3))
    sol = solve_checked(sub)
    assert sol.objective == pytest.approx(2.0, abs=1e-7)
    ref = linprog_solve(sub)  # independent mini-oracle on the same LP
    assert ref.status == 0 and ref.fun == pytest.approx(2.0, abs=1e-7)


def _bridge_instance():
    # two triangles joined by one bridge; its failure splits the graph
    edges = (
        Edge(0, 0, 1), Edge(1, 1, 2), Edge(2, 0, 2),
        Edge(3, 3, 4), Edge(4, 4, 5), Edge(5, 3, 5),
        Edge(6, 2, 3),
    )
    return Instance(
        name="bridge",
        network=Network(node_labels=tuple(range(6)), edges=edges),
        num_wavelengths=2,
        requests=(Request(0, 5),),
        failures=(6,),
    )


def test_subproblem_infeasible_when_failure_disconnects():
    inst = _bridge_instance()
    sub, _ = build_subproblem(inst, 6, np.full(7, 2.0))
    assert simplex.solve(sub).status == simplex.INFEASIBLE


def test_subproblem_argument_checks():
    inst = gen_cycle(3, 1, 1)
    with pytest.raises(FormulationError, match="failure set"):
        build_subproblem(dataclasses.replace(inst, failures=(0,)), 2, np.zeros(3))
    with pytest.raises(FormulationError, match="one entry per edge"):
        build_subproblem(inst, 0, np.zeros(2))
    with pytest.raises(FormulationError, match="within"):
        build_subproblem(inst, 0, np.full(3, 99.0))


def test_cut_matches_subproblem_value():
    inst = gen_cycle(3, 2, 80)
    wbar = np.zeros(3)
    sub, vm = build_subproblem(inst, 2, wbar)
    sol = solve_checked(sub)
    cut = cut_from_duals(inst, 2, wbar, sol, vm)
    assert cut.failure == 2
    assert cut.evaluate(wbar) == pytest.approx(2.0, abs=1e-6)
    assert all(c <= 1e-9 for _, c in cut.wbar_coeffs)

    # at feasible capacities every valid cut must be satisfied
    model, vm3 = build_lp_r3(inst)
    opt = solve_checked(model)
    feas = np.array([opt.primal[vm3.wbar[e]] for e in range(3)])
    assert cut.evaluate(feas) <= 1e-6


def test_cut_requires_violation():
    inst = gen_cycle(3, 2, 80)
    wbar = np.full(3, 80.0)
    sub, vm = build_subproblem(inst, 2, wbar)
    sol = solve_checked(sub)
    assert sol.objective <= 1e-9
    with pytest.raises(FormulationError, match="no violation"):
        cut_from_duals(inst, 2, wbar, sol, vm)


def test_cut_evaluate_is_affine():
    cut = Cut(failure=1, constant=4.0, wbar_coeffs=((0, -1.0), (2, -0.5)))
    assert cut.evaluate([1.0, 9.0, 2.0]) == pytest.approx(2.0)


def test_varmap_ids_are_unique(net4):
    model, vm = build_ip_rwap_ppp(net4)
    ids = list(vm.x.values()) + list(vm.w.values()) + list(vm.y.values())
    assert len(ids) == len(set(ids)) == model.num_variables
