"""Fast invariant battery behind the ``check`` command.

Each check is deterministic (fixed seeds throughout) and cheap; together
they cover the load-bearing identities: adjoint pairings, the inverse-
resolvent identity, prox optimality against grid search, the coupling-bound
arithmetic and the fixed-point characterization of solutions.
"""

import numpy as np

from .demos import lasso_demo, lifted_solution_state
from .imaging import gradient_op, haar_analysis_op, second_gradient_op
from .linops import (
    LinOp,
    adjoint_check,
    compose,
    dense_op,
    identity_op,
    materialize,
    operator_norm,
)
from .oracles import dense_svd_norm, grid_refine_minimize
from .prox import make_function, resolvent_of_inverse
from .system import compute_beta, fixed_point_residual

CHECK_SEED = 42


def run_checks(corrupt_adjoint=False):
    """Run the battery; returns a list of (name, passed, detail) triples.

    ``corrupt_adjoint`` is a debug hook that deliberately breaks one
    adjoint so the failure path of the battery itself can be exercised.
    """
    results = []

    def record(name, passed, detail=""):
        results.append((name, bool(passed), detail))

    rng = np.random.default_rng(CHECK_SEED)

    ops = {
        "identity(7)": identity_op(7),
        "dense(5x3)": dense_op(rng.standard_normal((5, 3))),
        "gradient(6x5)": gradient_op(6, 5),
        "second_gradient(6x5)": second_gradient_op(6, 5),
        "haar(6x4)": haar_analysis_op(6, 4),
    }
    ops["compose"] = compose(ops["dense(5x3)"], dense_op(
        rng.standard_normal((3, 4))))
    if corrupt_adjoint:
        base = ops["dense(5x3)"]
        bad = np.zeros(3)
        bad[0] = 1.0
        ops["dense(5x3)"] = LinOp(
            base.in_dim, base.out_dim, base.apply,
            lambda y, _b=base: _b.adjoint_apply(y) + bad * y[0],
            tag="corrupted",
        )
    for name, op in ops.items():
        defect = adjoint_check(op, trials=50, seed=CHECK_SEED)
        record(f"adjoint {name}", defect <= 1e-10, f"defect {defect:.2e}")

    # inverse-resolvent identity across the catalog
    entries = _catalog_samples()
    for name, fn in entries:
        worst = 0.0
        local = np.random.default_rng(CHECK_SEED + 1)
        for gamma in (0.1, 1.0, 10.0):
            for _ in range(10):
                x = local.standard_normal(fn.dim)
                lhs = np.asarray(fn.operator.resolve(gamma, x)) \
                    + gamma * resolvent_of_inverse(fn.operator, 1.0 / gamma,
                                                   x / gamma)
                worst = max(worst, float(np.max(np.abs(lhs - x))))
        record(f"inverse-resolvent {name}", worst <= 1e-12,
               f"defect {worst:.2e}")

    # prox optimality vs grid refinement (1-D cases keep this fast); boxes
    # for point-like feasible sets are centered so the set lies on the grid
    for name, fn in _catalog_samples(dims_1d=True):
        x = np.array([0.7])
        gamma = 1.0
        prox = np.asarray(fn.operator.resolve(gamma, x))
        center = np.zeros(1) if name == "indicator_zero" else x
        argmin, _ = grid_refine_minimize(
            lambda y, _f=fn: _f.value(y) + np.sum((y - x) ** 2) / (2 * gamma),
            lo=center - 3.0, hi=center + 3.0, levels=6)
        err = float(np.max(np.abs(prox - argmin)))
        record(f"prox-grid {name}", err <= 2e-3, f"error {err:.2e}")

    # coupling-bound arithmetic vs dense singular values
    demo = lasso_demo()
    beta = compute_beta(demo.system)
    by_hand = _beta_by_hand(demo.system)
    ok = by_hand - 1e-8 <= beta <= demo.system.C.nu0 \
        + 1.01 * (by_hand - demo.system.C.nu0) + 1e-8
    record("coupling bound arithmetic", ok,
           f"power {beta:.6f} vs svd {by_hand:.6f}")

    # the lifted oracle solution is a fixed point
    state = lifted_solution_state(demo)
    res = fixed_point_residual(demo.system, state, 0.25)
    record("solution is a fixed point", res <= 1e-6, f"residual {res:.2e}")

    # power iteration against the Jacobi oracle
    mat = rng.standard_normal((8, 5))
    est = operator_norm(dense_op(mat))
    ref = dense_svd_norm(mat)
    record("operator norm vs jacobi", abs(est.value - ref) <= 1e-8,
           f"power {est.value:.10f} vs jacobi {ref:.10f}")

    return results


def _catalog_samples(dims_1d=False):
    """Representative catalog instances, optionally restricted to dim 1."""
    d = 1 if dims_1d else 3
    entries = [
        ("l1", make_function("l1", {"weight": 0.8}, d)),
        ("indicator_box", make_function("indicator_box",
                                        {"lo": -0.5, "hi": 1.0}, d)),
        ("zero_function", make_function("zero_function", {}, d)),
        ("indicator_zero", make_function("indicator_zero", {}, d)),
        ("quadratic_fidelity", make_function(
            "quadratic_fidelity",
            {"terms": [{"matrix": np.eye(d), "offset": np.zeros(d),
                        "weight": 1.0}]}, d)),
        ("scaled_translated", make_function(
            "scaled_translated",
            {"inner": {"prox": "l1", "params": {"weight": 1.0}},
             "shift": 0.3, "scale": 0.5}, d)),
    ]
    if not dims_1d:
        entries.append(("group_l12", make_function(
            "group_l12", {"blocks": [[0, 1], [2]], "weight": 0.7}, 3)))
    return entries


def _beta_by_hand(spec):
    """Coupling bound evaluated with exact dense singular values."""
    layout = spec.layout
    total = 0.0
    for k in range(layout.s):
        for i in range(layout.m):
            mat = materialize(compose(spec.N[k], spec.L[k][i]))
            total += dense_svd_norm(mat) ** 2
    peak = 0.0
    for k in range(layout.s):
        peak = max(peak, dense_svd_norm(materialize(spec.N[k])) ** 2
                   + dense_svd_norm(materialize(spec.M[k])) ** 2)
    return spec.C.nu0 + float(np.sqrt(total + peak))


def format_report(results):
    lines = []
    width = max(len(name) for name, _, _ in results)
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        lines.append(f"{name:<{width}}  {status}  {detail}")
    failed = sum(1 for _, passed, _ in results if not passed)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)
