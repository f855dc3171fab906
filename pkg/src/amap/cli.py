"""Command-line front end: solve a MAP problem, generate random problems,
and run seeded benchmark sweeps to CSV."""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from . import fileio, solver
from .engine import InconsistentEvidenceError, forward_sample
from .fileio import ParseError, ReportRow
from .model import Assignment, BayesianNetwork, MapProblem
from .solver import AnnealSchedule, OracleCapError, SolveReport

ORACLE_CAP_ENV = "AMAP_ORACLE_CAP"


def _mix_seed(master: int, *parts: int) -> int:
    """Derive a sub-seed from the master seed and integer indices (case,
    algorithm, ...) via a fixed hash, so concurrent cases stay reproducible."""
    key = ":".join(str(p) for p in (master, *parts)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def generate_problem(net: BayesianNetwork, n_map: int, n_evid: int,
                     rng: random.Random) -> MapProblem:
    """Random problem in the style of the benchmark protocol: MAP variables
    drawn from the roots, evidence drawn from the leaves and set from one
    prior forward sample."""
    roots = list(net.roots())
    if not roots:
        raise ValueError(f"network {net.name!r} has no root variables")
    map_vars = sorted(rng.sample(roots, min(n_map, len(roots))))
    # an isolated variable is both root and leaf; keep the sets disjoint
    leaves = [v for v in net.leaves() if v not in map_vars]
    evid_vars = sorted(rng.sample(leaves, min(n_evid, len(leaves))))
    sample = forward_sample(net, rng)
    evidence = Assignment({v: sample[v] for v in evid_vars})
    return MapProblem(tuple(map_vars), evidence)


def _oracle_cap() -> int:
    raw = os.environ.get(ORACLE_CAP_ENV)
    return int(raw) if raw else solver.DEFAULT_ORACLE_CAP


def _schedule_from_args(args: argparse.Namespace) -> AnnealSchedule:
    return AnnealSchedule(t0=args.t0, alpha=args.alpha, k=args.k,
                          wait=args.wait, stop=args.stop)


def _add_schedule_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t0", type=float, default=0.99)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--k", type=float, default=0.1)
    p.add_argument("--wait", type=int, default=10)
    p.add_argument("--stop", type=int, default=20)
    p.add_argument("--restarts", type=int, default=1)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise SystemExit(f"error: cannot read {path}: {exc.strerror}")


def _run_algo(algo: str, net: BayesianNetwork, problem: MapProblem,
              schedule: AnnealSchedule, seed: int, restarts: int,
              collect_trace: bool = False) -> SolveReport:
    rng = random.Random(seed)
    if algo == "anneal":
        return solver.annealed_map(net, problem, schedule, rng,
                                   restarts=restarts, collect_trace=collect_trace)
    if algo == "oracle":
        return solver.brute_force_map(net, problem, cap=_oracle_cap())
    if algo == "hillclimb":
        return solver.hill_climb_map(net, problem, rng)
    raise ValueError(f"unknown algorithm {algo!r}")


def _write_trace(path: str, trace: List[solver.TraceRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("component,restart,sweep,temperature,current_logp,best_logp,specific_heat\n")
        for row in trace:
            fh.write(f"{row.component},{row.restart},{row.sweep},"
                     f"{row.temperature:.17g},{row.current_logp:.17g},"
                     f"{row.best_logp:.17g},{row.specific_heat:.17g}\n")


def cmd_solve(args: argparse.Namespace) -> int:
    net = fileio.parse_network(_read(args.net))
    problem = fileio.parse_problem(_read(args.problem), net)
    schedule = _schedule_from_args(args)
    report = _run_algo(args.algo, net, problem, schedule, args.seed,
                       args.restarts, collect_trace=bool(args.trace))
    for v in problem.map_vars:
        var = net.var(v)
        print(f"{var.name}={var.states[report.best[v]]}")
    prob = math.exp(report.logp)
    log10 = report.logp / math.log(10.0)
    print(f"p = {prob:.12g}")
    print(f"log10_p = {log10:.12g}")
    print(f"sweeps = {report.sweeps}")
    print(f"reheats = {report.reheats}")
    if args.trace and report.trace is not None:
        _write_trace(args.trace, report.trace)
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    net = fileio.parse_network(_read(args.net))
    rng = random.Random(args.seed)
    problem = generate_problem(net, args.map_count, args.evid_count, rng)
    text = fileio.serialize_problem(problem, net)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {args.output}: {len(problem.map_vars)} MAP variables, "
          f"{len(problem.evidence)} evidence variables")
    return 0


@dataclass
class BenchConfig:
    net_paths: List[str]
    cases: int
    map_count: int
    evid_count: int
    algos: List[str]
    seed: int
    schedule: AnnealSchedule
    restarts: int
    output: str
    workers: int = 1

    def __post_init__(self) -> None:
        if self.cases < 1:
            raise ValueError("cases must be >= 1")
        if self.map_count < 1 or self.evid_count < 0:
            raise ValueError("map-count must be >= 1 and evid-count >= 0")


def _bench_case(net_text: str, problem_text: str, algos: Sequence[str],
                schedule: AnnealSchedule, restarts: int,
                seeds: Sequence[int]) -> List[Tuple[str, float, int, int, int, int, float, Optional[bool]]]:
    """Run one case; returns per-algorithm summaries plus oracle matching.

    Re-parses inputs so the job is picklable for worker processes.
    """
    net = fileio.parse_network(net_text)
    problem = fileio.parse_problem(problem_text, net)
    oracle: Optional[SolveReport] = None
    try:
        oracle = solver.brute_force_map(net, problem, cap=_oracle_cap())
    except OracleCapError:
        oracle = None
    results = []
    for algo, seed in zip(algos, seeds):
        start = time.perf_counter()
        if algo == "oracle":
            if oracle is None:
                continue
            report = oracle
        else:
            report = _run_algo(algo, net, problem, schedule, seed, restarts)
        wall_ms = (time.perf_counter() - start) * 1000.0
        matches: Optional[bool] = None
        if oracle is not None:
            matches = report.best.as_tuple(problem.map_vars) == \
                oracle.best.as_tuple(problem.map_vars)
        results.append((algo, report.logp, report.sweeps, report.restarts_used,
                        report.best_found_sweep, report.reheats, wall_ms, matches))
    return results


def run_bench(config: BenchConfig) -> List[ReportRow]:
    rows: List[ReportRow] = []
    for net_index, net_path in enumerate(config.net_paths):
        net_text = _read(net_path)
        net = fileio.parse_network(net_text)
        jobs = []
        for case in range(config.cases):
            gen_rng = random.Random(_mix_seed(config.seed, net_index, case))
            problem = generate_problem(net, config.map_count, config.evid_count, gen_rng)
            ptext = fileio.serialize_problem(problem, net)
            seeds = [_mix_seed(config.seed, case, ai) for ai in range(len(config.algos))]
            jobs.append((net_text, ptext, config.algos, config.schedule,
                         config.restarts, seeds))
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_bench_case_star, jobs))
        else:
            results = [_bench_case(*job) for job in jobs]

        optimal = 0
        oracle_cases = 0
        mismatch_ratios: List[float] = []
        for case, case_results in enumerate(results):
            oracle_logp = next((lp for a, lp, *_ in case_results if a == "oracle"), None)
            for (algo, logp, sweeps, restarts_used, found, reheats,
                 wall_ms, matches) in case_results:
                seed = _mix_seed(config.seed, case, config.algos.index(algo))
                rows.append(ReportRow(
                    network=net.name, case_id=case, algorithm=algo, seed=seed,
                    log10_prob=logp / math.log(10.0), prob=math.exp(logp),
                    sweeps=sweeps, restarts_used=restarts_used,
                    best_found_sweep=found, reheats=reheats, wall_ms=wall_ms,
                    matches_oracle=matches))
                if algo == "anneal" and matches is not None:
                    oracle_cases += 1
                    if matches:
                        optimal += 1
                    elif oracle_logp is not None:
                        mismatch_ratios.append(math.exp(logp - oracle_logp))
        summary = (f"network={net.name} cases={config.cases} "
                   f"anneal_optimal={optimal}/{oracle_cases}")
        if mismatch_ratios:
            mean = sum(mismatch_ratios) / len(mismatch_ratios)
            summary += f" mean_ratio_on_mismatch={mean:.6g}"
        print(summary)
    return rows


def _bench_case_star(job):
    return _bench_case(*job)


def cmd_bench(args: argparse.Namespace) -> int:
    if "anneal" not in args.algos and "oracle" not in args.algos \
            and "hillclimb" not in args.algos:
        raise SystemExit(f"error: no known algorithm in {args.algos}")
    config = BenchConfig(
        net_paths=args.net, cases=args.cases, map_count=args.map_count,
        evid_count=args.evid_count, algos=args.algos, seed=args.seed,
        schedule=_schedule_from_args(args), restarts=args.restarts,
        output=args.output, workers=args.workers)
    rows = run_bench(config)
    with open(config.output, "w", encoding="utf-8") as fh:
        fh.write(fileio.write_report(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amap", description="MAP inference in discrete Bayesian networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one MAP problem")
    p_solve.add_argument("--net", required=True)
    p_solve.add_argument("--problem", required=True)
    p_solve.add_argument("--algo", choices=("anneal", "oracle", "hillclimb"),
                         default="anneal")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--trace", default=None, metavar="F.csv")
    _add_schedule_args(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_gen = sub.add_parser("gen", help="generate a random MAP problem")
    p_gen.add_argument("--net", required=True)
    p_gen.add_argument("--map-count", type=int, required=True)
    p_gen.add_argument("--evid-count", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_bench = sub.add_parser("bench", help="run a benchmark sweep to CSV")
    p_bench.add_argument("--net", action="append", required=True)
    p_bench.add_argument("--cases", type=int, required=True)
    p_bench.add_argument("--map-count", type=int, default=20)
    p_bench.add_argument("--evid-count", type=int, default=20)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--algos", type=lambda s: s.split(","),
                         default=["anneal", "oracle"])
    p_bench.add_argument("-o", "--output", required=True)
    p_bench.add_argument("--workers", type=int, default=1)
    _add_schedule_args(p_bench)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: parse failed at {exc}", file=sys.stderr)
        return 1
    except (InconsistentEvidenceError, OracleCapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
