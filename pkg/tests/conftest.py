import time

import pytest

from monosplit.demos import deblur_demo, lasso_demo, qp_demo, separation_demo
from monosplit.solver import IterateState, make_policy, solve
from monosplit.system import compute_beta


def run_demo(demo, tol, max_iter, trace_every=1, errors=None):
    policy = make_policy(compute_beta(demo.system))
    init = demo.extras.get("init") or IterateState.zeros(demo.system.layout)
    started = time.perf_counter()
    final, trace, status = solve(demo.system, init, policy,
                                 errors=errors, tol=tol, max_iter=max_iter,
                                 trace_every=trace_every)
    wall = time.perf_counter() - started
    return {"demo": demo, "policy": policy, "final": final, "trace": trace,
            "status": status, "wall": wall}


@pytest.fixture(scope="session")
def lasso_run():
    return run_demo(lasso_demo(), tol=1e-8, max_iter=20000)


@pytest.fixture(scope="session")
def qp_run():
    return run_demo(qp_demo(), tol=1e-8, max_iter=50000)


@pytest.fixture(scope="session")
def separation_run():
    return run_demo(separation_demo(), tol=1e-8, max_iter=50000)


@pytest.fixture(scope="session")
def deblur_run():
    return run_demo(deblur_demo(), tol=1e-6, max_iter=20000,
                    trace_every=1000)
