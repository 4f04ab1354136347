"""Command-line surface: generate, solve, validate, benchmark, export.

Exit codes are a stable contract: 0 on success, 1 when a solve reports
infeasibility (or a validation/chain check fails), 2 on usage errors. All
objective values print with fixed six decimals; benchmark output is CSV with
one record per solve.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import formulations, oracle, simplex, validator
from .benders import CONVERGED, log_to_csv, solve_lp_r3_benders
from .instance import (
    Instance,
    gen_cycle,
    gen_random,
    load_instance,
    save_instance,
)
from .lpmodel import export_lp, export_mps

LP_MODELS = ("lp-rwap", "lp-rwap-ppp", "lp-r1", "lp-r2", "lp-r3")
EXPORT_MODELS = LP_MODELS + ("ip-rwap", "ip-rwap-ppp", "ip-r1", "ip-r2")

CSV_HEADER = "name,V,E,D,model,method,objective,iterations,cuts,elapsed_ms,status,im_pct,gap_pct"


@dataclass
class RunRecord:
    name: str
    num_nodes: int
    num_edges: int
    num_requests: int
    model: str
    method: str
    objective: float | None
    iterations: int
    cuts: int | None
    elapsed_ms: int
    status: str
    im_pct: float | None = None
    gap_pct: float | None = None
    ok: bool = True

    def csv_row(self) -> str:
        def num(x, fmt="{:.6f}"):
            return "" if x is None else fmt.format(x)

        return ",".join(
            [
                self.name,
                str(self.num_nodes),
                str(self.num_edges),
                str(self.num_requests),
                self.model,
                self.method,
                num(self.objective),
                str(self.iterations),
                "" if self.cuts is None else str(self.cuts),
                str(self.elapsed_ms),
                self.status,
                num(self.im_pct, "{:.1f}"),
                num(self.gap_pct, "{:.1f}"),
            ]
        )


def _read_instance(path: str, parser) -> Instance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return load_instance(fh.read())
    except FileNotFoundError:
        parser.error(f"instance file not found: {path}")
    except ValueError as exc:
        parser.error(f"{path}: {exc}")


def _build_lp(instance: Instance, model_name: str):
    if model_name == "lp-rwap":
        return formulations.build_lp_rwap_agg(instance)[0]
    if model_name == "lp-rwap-ppp":
        return formulations.build_ip_rwap_ppp(instance, relax=True)[0]
    if model_name == "lp-r1":
        return formulations.build_ip_r1(instance, relax=True)[0]
    if model_name == "lp-r2":
        return formulations.build_ip_r2(instance, relax=True)[0]
    if model_name == "lp-r3":
        return formulations.build_lp_r3(instance)[0]
    raise ValueError(model_name)


def _solve_record(
    instance: Instance, model_name: str, method: str, log_path: str | None = None
) -> RunRecord:
    t0 = time.perf_counter()
    if method == "benders":
        res = solve_lp_r3_benders(instance)
        if log_path:
            with open(log_path, "w", encoding="utf-8") as fh:
                fh.write(log_to_csv(res.log))
        status = res.status
        objective = None if res.status == "Infeasible" else res.lower_bound
        iters, cuts = res.iterations, res.cuts_added
        ok = res.status == CONVERGED
    else:
        sol = simplex.solve(_build_lp(instance, model_name))
        status = sol.status
        objective = sol.objective if sol.status == simplex.OPTIMAL else None
        iters, cuts = sol.iterations, None
        ok = sol.status == simplex.OPTIMAL
    elapsed = int(1000 * (time.perf_counter() - t0))
    rec = RunRecord(
        name=instance.name,
        num_nodes=instance.num_nodes,
        num_edges=instance.num_edges,
        num_requests=instance.num_requests,
        model=model_name,
        method=method,
        objective=objective,
        iterations=iters,
        cuts=cuts,
        elapsed_ms=elapsed,
        status=status,
        ok=ok,
    )
    return rec


def _append_record(path: str, record: RunRecord):
    new = not os.path.exists(path)
    with open(path, "a", encoding="utf-8") as fh:
        if new:
            fh.write(CSV_HEADER + "\n")
        fh.write(record.csv_row() + "\n")


def cmd_gen(args, parser) -> int:
    try:
        if args.kind == "cycle":
            inst = gen_cycle(args.m, args.n, args.k)
        else:
            inst = gen_random(
                args.nodes, args.extra_edges, args.requests, args.k, args.seed
            )
    except ValueError as exc:
        parser.error(str(exc))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(save_instance(inst))
    print(f"wrote {args.out}")
    return 0


def cmd_solve(args, parser) -> int:
    if args.method == "benders" and args.model != "lp-r3":
        parser.error("--method benders is only valid with --model lp-r3")
    if args.iteration_log and args.method != "benders":
        parser.error("--iteration-log requires --method benders")
    instance = _read_instance(args.instance, parser)
    rec = _solve_record(instance, args.model, args.method, args.iteration_log)
    if args.record:
        _append_record(args.record, rec)
    if rec.objective is not None:
        print(f"{rec.objective:.6f}")
    if not rec.ok:
        print(f"status: {rec.status}", file=sys.stderr)
        return 1
    return 0


def cmd_validate(args, parser) -> int:
    instance = _read_instance(args.instance, parser)
    try:
        with open(args.solution, "r", encoding="utf-8") as fh:
            solution = validator.load_solution(fh.read(), instance)
        report = validator.validate(instance, solution)
    except FileNotFoundError:
        parser.error(f"solution file not found: {args.solution}")
    except validator.SolutionFormatError as exc:
        print(f"malformed solution: {exc}", file=sys.stderr)
        return 1
    verdict = "feasible" if report.feasible else "infeasible"
    print(f"{verdict}, objective {report.objective}")
    if args.lower_bound is not None:
        g = validator.gap_report(report.objective, args.lower_bound)
        print(f"gap {g.gap_percent:.1f}%")
    for v in report.violations:
        where = "working" if v.failure is None else f"failure {v.failure}"
        print(f"violation[{v.kind}] {where} request {v.request}: {v.detail}",
              file=sys.stderr)
    return 0 if report.feasible else 1


def cmd_bench(args, parser) -> int:
    names = sorted(
        f
        for f in os.listdir(args.instance_dir)
        if f.endswith(".json") and not f.endswith(".solution.json")
    )

    def run(fname: str):
        path = os.path.join(args.instance_dir, fname)
        instance = _read_instance(path, parser)
        base = _solve_record(instance, "lp-rwap", "direct")
        main = _solve_record(instance, "lp-r3", "benders")
        ub_path = os.path.splitext(path)[0] + ".ub"
        ub = None
        if os.path.exists(ub_path):
            with open(ub_path, "r", encoding="utf-8") as fh:
                ub = float(fh.read().strip())
        if base.objective and main.objective is not None:
            main.im_pct = validator.improvement(main.objective, base.objective)
        if ub is not None:
            if base.objective:
                base.gap_pct = validator.gap_report(ub, base.objective).gap_percent
            if main.objective:
                main.gap_pct = validator.gap_report(ub, main.objective).gap_percent
        return [base, main]

    threads = int(os.environ.get("LAMBDA_BOUND_THREADS", "0") or 0)
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, names))
    else:
        blocks = [run(f) for f in names]

    lines = [CSV_HEADER]
    for block in blocks:
        lines.extend(rec.csv_row() for rec in block)
    text = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {args.out} ({len(names)} instances)")
    return 0


def cmd_chain_check(args, parser) -> int:
    instance = _read_instance(args.instance, parser)
    # the ladder solves the full model, whose rows scale with |Pi||D||K||E|;
    # refuse clearly instead of grinding on a non-tiny instance
    D, K = instance.num_requests, instance.num_wavelengths
    A, P = 2 * instance.num_edges, len(instance.failures)
    full_rows = 2 * P * D * K * A
    if full_rows > args.max_rows:
        print(
            f"chain-check: full model needs ~{full_rows} linking rows "
            f"(limit {args.max_rows}); this check is meant for tiny instances",
            file=sys.stderr,
        )
        return 1
    limits = oracle.OracleLimits(
        max_simple_paths_per_pair=args.max_paths, max_assignments=args.budget
    )
    try:
        report = oracle.verify_chain(instance, limits)
    except (oracle.OracleBudgetError, oracle.OracleInfeasibleError) as exc:
        print(f"oracle: {exc}", file=sys.stderr)
        return 1
    for line in report.lines():
        print(line)
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


_EXPORT_BUILDERS = {
    "lp-rwap": lambda i: formulations.build_lp_rwap_agg(i)[0],
    "lp-rwap-ppp": lambda i: formulations.build_ip_rwap_ppp(i, relax=True)[0],
    "lp-r1": lambda i: formulations.build_ip_r1(i, relax=True)[0],
    "lp-r2": lambda i: formulations.build_ip_r2(i, relax=True)[0],
    "lp-r3": lambda i: formulations.build_lp_r3(i)[0],
    "ip-rwap": lambda i: formulations.build_ip_rwap(i, relax=False)[0],
    "ip-rwap-ppp": lambda i: formulations.build_ip_rwap_ppp(i, relax=False)[0],
    "ip-r1": lambda i: formulations.build_ip_r1(i, relax=False)[0],
    "ip-r2": lambda i: formulations.build_ip_r2(i, relax=False)[0],
}


def cmd_export(args, parser) -> int:
    instance = _read_instance(args.instance, parser)
    model = _EXPORT_BUILDERS[args.model](instance)
    text = export_lp(model) if args.format == "lp" else export_mps(model)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {args.out}")
    return 0


def cmd_oracle(args, parser) -> int:
    instance = _read_instance(args.instance, parser)
    limits = oracle.OracleLimits(
        max_simple_paths_per_pair=args.max_paths, max_assignments=args.budget
    )
    try:
        if args.mode == "rwap":
            value = oracle.exact_rwap(instance, limits)
        else:
            value = oracle.exact_rwap_ppp(instance, limits)
    except (oracle.OracleBudgetError, oracle.OracleInfeasibleError) as exc:
        print(f"oracle: {exc}", file=sys.stderr)
        return 1
    print(value)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lambdabound",
        description="Lower bounds for wavelength routing under single-link failures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    gensub = p.add_subparsers(dest="kind", required=True)
    pc = gensub.add_parser("cycle", help="ring with parallel requests end to end")
    pc.add_argument("--m", type=int, required=True, help="node count (>= 3)")
    pc.add_argument("--n", type=int, required=True, help="request count")
    pc.add_argument("--k", type=int, required=True, help="wavelength count (>= n)")
    pc.add_argument("--out", required=True)
    pr = gensub.add_parser("random", help="random 2-edge-connected instance")
    pr.add_argument("--nodes", type=int, required=True)
    pr.add_argument("--extra-edges", type=int, default=2)
    pr.add_argument("--requests", type=int, default=4)
    pr.add_argument("--k", type=int, default=0, help="0 = max(1, requests)")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="solve one relaxation of an instance")
    p.add_argument("instance")
    p.add_argument("--model", choices=LP_MODELS, required=True)
    p.add_argument("--method", choices=("direct", "benders"), default="direct")
    p.add_argument("--record", help="append a RunRecord row to this CSV")
    p.add_argument("--iteration-log",
                   help="write the per-iteration decomposition log to this CSV")

    p = sub.add_parser("validate", help="check a solution file against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--lower-bound", type=float)

    p = sub.add_parser("bench", help="solve every instance in a directory to CSV")
    p.add_argument("instance_dir")
    p.add_argument("--out", required=True)

    p = sub.add_parser("chain-check", help="oracle and relaxation-ladder check")
    p.add_argument("instance")
    p.add_argument("--max-paths", type=int, default=64)
    p.add_argument("--budget", type=int, default=10_000_000)
    p.add_argument("--max-rows", type=int, default=5000,
                   help="refuse when the full model would exceed this many linking rows")

    p = sub.add_parser("export", help="write LP or MPS text for a model")
    p.add_argument("instance")
    p.add_argument("--model", choices=EXPORT_MODELS, required=True)
    p.add_argument("--format", choices=("lp", "mps"), required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("oracle", help="exhaustive exact optimum (tiny instances)")
    p.add_argument("instance")
    p.add_argument("--mode", choices=("ppp", "rwap"), default="ppp")
    p.add_argument("--max-paths", type=int, default=64)
    p.add_argument("--budget", type=int, default=10_000_000)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen": cmd_gen,
        "solve": cmd_solve,
        "validate": cmd_validate,
        "bench": cmd_bench,
        "chain-check": cmd_chain_check,
        "export": cmd_export,
        "oracle": cmd_oracle,
    }
    if args.command == "gen" and args.kind == "random" and args.k == 0:
        args.k = max(1, args.requests)
    return handlers[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
