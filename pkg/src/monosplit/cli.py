"""Command-line front end: solve problem files, run demos, self-check.

Exit codes: 0 on success/convergence, 2 when the iteration budget ran out,
1 on any error (bad file, step-bound violation, numeric failure).
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from .checks import format_report, run_checks
from .demos import DEMO_NAMES, get_demo
from .errors import MonosplitError
from .imaging import ImageGrid, write_pgm
from .minimization import primal_surrogate
from .problemio import load_problem
from .solver import (
    IterateState,
    make_policy,
    solve,
    step,
    transversality_defect,
    write_trace_csv,
    zero_schedule,
)
from .system import compute_beta, extract_solution, validate

TRACE_ENV = "SOLVER_TRACE_EVERY"


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="monosplit",
        description="Solver for coupled systems of composite monotone inclusions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a problem file")
    p_solve.add_argument("path", help="problem JSON file")
    p_solve.add_argument("--out", required=True, help="output directory")

    p_demo = sub.add_parser("demo", help="run a shipped demo")
    p_demo.add_argument("name", choices=DEMO_NAMES)
    p_demo.add_argument("--out", required=True, help="output directory")

    sub.add_parser("check", help="run the fast invariant battery")

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args.path, args.out)
        if args.command == "demo":
            return cmd_demo(args.name, args.out)
        return cmd_check()
    except MonosplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _trace_every(default):
    override = os.environ.get(TRACE_ENV)
    if override:
        return max(1, int(override))
    return default


def _run_and_write(system, init, policy, errors, tol, max_iter, trace_every,
                   out_dir, extra_summary=None):
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    status = "numeric_error"
    trace = []
    final = init
    try:
        final, trace, status = solve(system, init, policy, errors=errors,
                                     tol=tol, max_iter=max_iter,
                                     trace_every=trace_every)
    finally:
        wall = time.perf_counter() - started
        write_trace_csv(trace, os.path.join(out_dir, "trace.csv"))
        sol = extract_solution(final, system)
        with open(os.path.join(out_dir, "solution.json"), "w") as fh:
            json.dump(
                {
                    "xbar": [list(map(float, b)) for b in sol.xbar],
                    "vbar": [list(map(float, b)) for b in sol.vbar],
                    "state": {
                        "x1": [list(map(float, b)) for b in final.x1],
                        "x2": [list(map(float, b)) for b in final.x2],
                        "v1": [list(map(float, b)) for b in final.v1],
                        "v2": [list(map(float, b)) for b in final.v2],
                    },
                },
                fh,
            )
        summary = {
            "status": status,
            "iterations": final.n,
            "final_displacement":
                trace[-1].displacement if trace else None,
            "transversality_defect": transversality_defect(system, final),
            "beta": policy.beta,
            "epsilon": policy.epsilon,
            "gamma": policy.gamma_const,
            "tol": tol,
            "max_iter": max_iter,
            "wall_time_s": wall,
        }
        if extra_summary:
            summary.update(extra_summary)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
    return final, trace, status


def cmd_solve(path, out_dir):
    problem = load_problem(path)
    system = problem["system"]
    violations = validate(system)
    if violations:
        print("problem failed validation:", file=sys.stderr)
        for v in violations:
            print(f"  {v}", file=sys.stderr)
        return 1
    cfg = problem["solver"]
    beta = compute_beta(system)
    policy = make_policy(beta, epsilon=cfg["epsilon"], gamma_const=cfg["gamma"])
    init = IterateState.zeros(system.layout)
    _, _, status = _run_and_write(
        system, init, policy, problem["errors"], cfg["tol"], cfg["max_iter"],
        _trace_every(cfg["trace_every"]), out_dir,
    )
    return 0 if status == "converged" else 2


def cmd_demo(name, out_dir):
    demo = get_demo(name)
    system = demo.system
    beta = compute_beta(system)
    policy = make_policy(beta)
    init = demo.extras.get("init") or IterateState.zeros(system.layout)
    extra = {"demo": name}

    if name == "separation":
        return _run_separation(demo, policy, out_dir)

    final, trace, status = _run_and_write(
        system, init, policy, zero_schedule(), demo.tol, demo.max_iter,
        _trace_every(10), out_dir, extra_summary=extra,
    )

    if demo.oracle_solution is not None:
        err = float(np.max(np.abs(final.x1[0] - demo.oracle_solution)))
        extra["oracle_max_error"] = err
        print(f"{name}: status={status} oracle max error {err:.3e}")
    if name == "deblur":
        truth = demo.extras["truth"]
        size = demo.extras["size"]
        obs = demo.extras["observations"].observations[0]
        write_pgm(os.path.join(out_dir, "truth.pgm"), truth)
        write_pgm(os.path.join(out_dir, "observed.pgm"),
                  ImageGrid(size, size, np.clip(obs, 0.0, 1.0)))
        write_pgm(os.path.join(out_dir, "recovered.pgm"),
                  ImageGrid(size, size, np.clip(final.x1[0], 0.0, 1.0)))
        energy = primal_surrogate(demo.min_spec, final.x1, final.x2)
        extra["primal_surrogate"] = energy
        print(f"deblur: status={status} iterations={final.n} "
              f"energy={energy:.6f}")
    # refresh the summary with demo-specific fields
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path) as fh:
        summary = json.load(fh)
    summary.update(extra)
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return 0 if status == "converged" else 2


def _run_separation(demo, policy, out_dir):
    """Run the joint system and its two halves; report trajectory equality."""
    os.makedirs(out_dir, exist_ok=True)
    joint = demo.system
    primal = demo.extras["primal_only"]
    dual = demo.extras["dual_only"]
    iters = 200

    def run(system):
        states = []
        state = IterateState.zeros(system.layout)
        for it in range(iters):
            state, _ = step(system, state, policy.gamma_at(it),
                            with_transversality=False)
            states.append(state)
        return states

    joint_states = run(joint)
    primal_states = run(primal)
    dual_states = run(dual)

    identical = True
    for js, ps, ds in zip(joint_states, primal_states, dual_states):
        for a, b in zip(js.x1, ps.x1):
            identical &= a.tobytes() == b.tobytes()
        for fam in ("x2", "v1", "v2"):
            for a, b in zip(getattr(js, fam), getattr(ds, fam)):
                identical &= a.tobytes() == b.tobytes()

    final, trace, status = _run_and_write(
        joint, IterateState.zeros(joint.layout), policy, zero_schedule(),
        demo.tol, demo.max_iter, _trace_every(10), out_dir,
        extra_summary={
            "demo": "separation",
            "separation_report": "identical" if identical else "divergent",
        },
    )
    print(f"separation: trajectories "
          f"{'identical' if identical else 'DIVERGENT'}; joint solve "
          f"status={status}")
    if not identical:
        return 1
    return 0 if status == "converged" else 2


def cmd_check():
    results = run_checks()
    print(format_report(results))
    return 0 if all(passed for _, passed, _ in results) else 1


if __name__ == "__main__":
    sys.exit(main())
