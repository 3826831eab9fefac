import numpy as np
import pytest

from monosplit.demos import (
    lasso_demo,
    lifted_solution_state,
    qp_demo,
    separation_demo,
)
from monosplit.errors import NumericError, StepBoundError
from monosplit.linops import zero_op
from monosplit.minimization import MinimizationSpec, build_system
from monosplit.prox import ConvexFunction, ResolventOp, make_function, soft_threshold, zero_coupling
from monosplit.solver import (
    ERROR_FAMILIES,
    IterateState,
    geometric_schedule,
    make_policy,
    solve,
    step,
    zero_schedule,
)
from monosplit.system import SpaceLayout, SystemSpec, compute_beta


def test_make_policy_default_constant():
    pol = make_policy(2.0, epsilon=0.1)
    assert pol.gamma_const == pytest.approx(0.45)


def test_make_policy_rejects_large_epsilon():
    with pytest.raises(StepBoundError):
        make_policy(2.0, epsilon=0.4)  # 0.4 >= 1/(2+1)


def test_make_policy_accepts_valid_constant():
    pol = make_policy(np.sqrt(3.0), epsilon=0.01, gamma_const=0.5)
    assert pol.gamma_const == 0.5


def test_make_policy_rejects_gamma_outside_interval():
    with pytest.raises(StepBoundError):
        make_policy(2.0, epsilon=0.1, gamma_const=0.46)
    with pytest.raises(StepBoundError):
        make_policy(2.0, epsilon=0.1, gamma_const=0.05)


def test_policy_validates_user_sequence_on_emission():
    pol = make_policy(2.0, epsilon=0.1, gamma_seq=lambda n: 0.45 if n < 2 else 9.0)
    assert pol.gamma_at(0) == 0.45
    with pytest.raises(StepBoundError):
        pol.gamma_at(5)


def trivial_quadratic_system():
    """Everything zero except A = subgradient of half the squared norm."""
    quad = make_function(
        "quadratic_fidelity",
        {"terms": [{"matrix": np.eye(1), "offset": [0.0], "weight": 1.0}]}, 1)
    zero_fn = make_function("zero_function", {}, 1)
    return SystemSpec(
        layout=SpaceLayout((1,), (1,), (1,), (1,)),
        z=[np.zeros(1)], r=[np.zeros(1)],
        A=[quad.operator], C=zero_coupling((1,)),
        B=[zero_fn.operator], D=[zero_fn.operator],
        M=[zero_op(1, 1)], N=[zero_op(1, 1)], L=[[zero_op(1, 1)]],
    )


def test_step_hand_computed_trivial_case():
    # x1 = 1, gamma = 0.5: s11 = 1, p11 = 1/1.5 = 2/3, q11 = 2/3,
    # x1+ = 1 - 1 + 2/3 = 2/3
    spec = trivial_quadratic_system()
    state = IterateState.zeros(spec.layout)
    state.x1 = [np.array([1.0])]
    new, rec = step(spec, state, 0.5)
    np.testing.assert_allclose(new.x1[0], [2.0 / 3.0], atol=1e-15)
    assert rec.displacement == pytest.approx(1.0 / 3.0)
    assert new.n == 1


def test_step_zero_state_stays_zero():
    spec = trivial_quadratic_system()
    state = IterateState.zeros(spec.layout)
    for _ in range(5):
        state, rec = step(spec, state, 0.5)
        assert rec.displacement == 0.0
    for fam in (state.x1, state.x2, state.v1, state.v2):
        for b in fam:
            assert np.all(b == 0.0)


def test_step_at_solution_is_fixed_point():
    demo = lasso_demo()
    state = lifted_solution_state(demo)
    _, rec = step(demo.system, state, 0.3)
    assert rec.displacement <= 1e-12


def test_step_rejects_nonpositive_gamma():
    spec = trivial_quadratic_system()
    with pytest.raises(ValueError):
        step(spec, IterateState.zeros(spec.layout), 0.0)


def test_step_reports_nonfinite_block():
    spec = trivial_quadratic_system()
    bad = ResolventOp(1, lambda gamma, x: np.array([np.nan]), "bad")
    broken = SystemSpec(
        layout=spec.layout, z=spec.z, r=spec.r,
        A=[bad], C=spec.C, B=spec.B, D=spec.D,
        M=spec.M, N=spec.N, L=spec.L,
    )
    with pytest.raises(NumericError) as err:
        step(broken, IterateState.zeros(spec.layout), 0.5)
    assert "p11" in str(err.value)


def test_solve_lasso_matches_oracle():
    demo = lasso_demo()
    policy = make_policy(compute_beta(demo.system))
    final, trace, status = solve(demo.system, IterateState.zeros(demo.system.layout),
                                 policy, tol=1e-8, max_iter=20000)
    assert status == "converged"
    assert np.max(np.abs(final.x1[0] - demo.oracle_solution)) <= 1e-6


def test_solve_qp_matches_kkt_oracle():
    demo = qp_demo()
    policy = make_policy(compute_beta(demo.system))
    final, trace, status = solve(demo.system, IterateState.zeros(demo.system.layout),
                                 policy, tol=1e-8, max_iter=50000)
    assert status == "converged"
    assert np.max(np.abs(final.x1[0] - demo.oracle_solution)) <= 1e-6


def test_solve_zero_budget_returns_init():
    demo = lasso_demo()
    policy = make_policy(compute_beta(demo.system))
    init = IterateState.zeros(demo.system.layout)
    init.x1 = [np.ones(10)]
    final, trace, status = solve(demo.system, init, policy, max_iter=0)
    assert status == "max_iter"
    assert final.n == 0
    np.testing.assert_array_equal(final.x1[0], init.x1[0])
    assert trace == []


def test_solve_propagates_numeric_error_with_iteration():
    demo = lasso_demo()
    spec = demo.system
    blow_after = 3
    calls = {"n": 0}

    def unstable(gamma, x):
        calls["n"] += 1
        if calls["n"] > blow_after:
            return np.full_like(x, np.inf)
        return soft_threshold(x, gamma * 0.5)

    broken = SystemSpec(
        layout=spec.layout, z=spec.z, r=spec.r,
        A=[ResolventOp(10, unstable, "unstable")], C=spec.C,
        B=spec.B, D=spec.D, M=spec.M, N=spec.N, L=spec.L,
    )
    policy = make_policy(compute_beta(spec))
    with pytest.raises(NumericError) as err:
        solve(broken, IterateState.zeros(spec.layout), policy, max_iter=100)
    assert err.value.iteration == blow_after


def test_trace_partial_sums_nondecreasing():
    demo = lasso_demo()
    policy = make_policy(compute_beta(demo.system))
    _, trace, _ = solve(demo.system, IterateState.zeros(demo.system.layout),
                        policy, tol=1e-10, max_iter=2000, trace_every=1)
    for fam in range(4):
        sums = [rec.partial_sums[fam] for rec in trace]
        assert all(b >= a for a, b in zip(sums, sums[1:]))


def test_solve_deterministic_repeat_is_bitwise_identical():
    demo = lasso_demo()
    policy = make_policy(compute_beta(demo.system))
    errors = geometric_schedule(0.8, 0.05, seed=9)

    def run():
        return solve(demo.system, IterateState.zeros(demo.system.layout),
                     policy, errors=errors, tol=1e-9, max_iter=3000,
                     trace_every=7)

    fin_a, tr_a, st_a = run()
    fin_b, tr_b, st_b = run()
    assert st_a == st_b
    assert [r.displacement for r in tr_a] == [r.displacement for r in tr_b]
    for a, b in zip(fin_a.x1 + fin_a.x2 + fin_a.v1 + fin_a.v2,
                    fin_b.x1 + fin_b.x2 + fin_b.v1 + fin_b.v2):
        assert a.tobytes() == b.tobytes()


def test_geometric_schedule_is_summable_and_reproducible():
    sched = geometric_schedule(0.9, 0.1, seed=4)
    layout = SpaceLayout((3,), (2,), (2,), (2,))
    total = 0.0
    for n in range(200):
        errs = sched.realize(n, layout)
        assert errs is not None
        for family in ERROR_FAMILIES:
            for block in errs[family]:
                total += float(np.linalg.norm(block))
                assert np.linalg.norm(block) <= 0.1 * 0.9**n + 1e-15
    # geometric bound on the whole tail
    assert total <= 0.1 * len(ERROR_FAMILIES) / (1 - 0.9) + 1e-9
    again = sched.realize(7, layout)
    errs = sched.realize(7, layout)
    for family in ERROR_FAMILIES:
        for a, b in zip(again[family], errs[family]):
            np.testing.assert_array_equal(a, b)


def test_error_robustness_geometric_schedule_on_lasso():
    demo = lasso_demo()
    policy = make_policy(compute_beta(demo.system))
    exact, _, status_a = solve(demo.system, IterateState.zeros(demo.system.layout),
                               policy, tol=1e-10, max_iter=30000)
    noisy, _, status_b = solve(demo.system, IterateState.zeros(demo.system.layout),
                               policy, errors=geometric_schedule(0.9, 0.1, seed=0),
                               tol=1e-6, max_iter=30000)
    assert status_a == "converged" and status_b == "converged"
    assert np.max(np.abs(noisy.x1[0] - exact.x1[0])) <= 1e-5


def separation_runs(errors=None, iters=150):
    demo = separation_demo()
    policy = make_policy(compute_beta(demo.system))
    systems = {
        "joint": demo.system,
        "primal": demo.extras["primal_only"],
        "dual": demo.extras["dual_only"],
    }
    out = {}
    for name, system in systems.items():
        sched = errors if errors is not None else zero_schedule()
        state = IterateState.zeros(system.layout)
        states = []
        for it in range(iters):
            errs = sched.realize(it, system.layout)
            state, _ = step(system, state, policy.gamma_at(it), errs,
                            with_transversality=False)
            states.append(state)
        out[name] = states
    return out


@pytest.mark.parametrize("errors", [None, geometric_schedule(0.9, 0.05, seed=3)])
def test_separation_property_bitwise(errors):
    runs = separation_runs(errors)
    for js, ps in zip(runs["joint"], runs["primal"]):
        for a, b in zip(js.x1, ps.x1):
            assert a.tobytes() == b.tobytes()
    for js, ds in zip(runs["joint"], runs["dual"]):
        for fam in ("x2", "v1", "v2"):
            for a, b in zip(getattr(js, fam), getattr(ds, fam)):
                assert a.tobytes() == b.tobytes()


def augmented_lasso(mu=0.1):
    """LASSO with an extra mu||x||^2, making the primal block uniformly convex."""
    demo = lasso_demo()
    weight = demo.extras["weight"]
    n = 10

    def value(x):
        return weight * float(np.sum(np.abs(x))) + mu * float(np.sum(x * x))

    def resolve(gamma, x):
        return soft_threshold(x, gamma * weight) / (1.0 + 2.0 * gamma * mu)

    strong = ConvexFunction(n, value, ResolventOp(n, resolve, "l1+ridge"),
                            None, tag="l1_ridge")
    ms = demo.min_spec
    aug = MinimizationSpec(layout=ms.layout, f=[strong], phi=ms.phi,
                           g=ms.g, ell=ms.ell, M=ms.M, N=ms.N, L=ms.L,
                           z=ms.z, r=ms.r)
    c = demo.extras["design"].T @ demo.extras["observation"]
    oracle = soft_threshold(c, weight) / (1.0 + 2.0 * mu)
    return build_system(aug), oracle


def test_uniform_convexity_accelerates_primal_block():
    system, oracle = augmented_lasso()
    policy = make_policy(compute_beta(system))
    final, _, status = solve(system, IterateState.zeros(system.layout),
                             policy, tol=1e-12, max_iter=5000)
    assert np.linalg.norm(final.x1[0] - oracle) <= 1e-5
