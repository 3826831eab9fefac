import numpy as np
import pytest

from monosplit.errors import ConfigurationError
from monosplit.imaging import (
    GRAD_NORM_BOUND,
    ImageGrid,
    box_blur_op,
    build_app1_instance,
    gaussian_blur_op,
    gradient_op,
    haar_analysis_op,
    make_observations,
    read_pgm,
    second_gradient_op,
    write_pgm,
)
from monosplit.linops import adjoint_check, operator_norm
from monosplit.minimization import build_system
from monosplit.prox import soft_threshold
from monosplit.solver import IterateState, make_policy, solve
from monosplit.system import compute_beta, validate


def test_gradient_constant_image_is_zero():
    op = gradient_op(4, 5)
    assert np.all(op.apply(np.full(20, 3.7)) == 0.0)


def test_gradient_2x2_hand_case():
    # image (a, b; c, d): vertical diffs (c-a, d-b, 0, 0), horizontal
    # (b-a, 0, d-c, 0) under the replicate boundary
    a, b, c, d = 1.0, 2.0, 4.0, 7.0
    op = gradient_op(2, 2)
    out = op.apply(np.array([a, b, c, d]))
    np.testing.assert_allclose(out, [c - a, d - b, 0.0, 0.0,
                                     b - a, 0.0, d - c, 0.0], atol=0)


def test_gradient_adjoint_and_norm_bound():
    op = gradient_op(6, 7)
    assert adjoint_check(op, trials=100, seed=0) <= 1e-12
    est = operator_norm(op)
    assert est.value <= GRAD_NORM_BOUND * 1.01


def test_second_gradient_affine_image_vanishes_inside():
    h, w = 6, 5
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    # dyadic coefficients keep the differences exact in floating point
    img = 0.5 * yy + 0.25 * xx + 0.25
    op = second_gradient_op(h, w)
    out = op.apply(img.ravel()).reshape(4, h, w)
    # replicate boundary bends the last two rows/columns; the interior
    # second differences of an affine image are exactly zero
    assert np.all(out[:, :h - 2, :w - 2] == 0.0)


def test_second_gradient_delta_stencil():
    # delta at pixel (1, 1) of a 3x3 grid, evaluated by hand: forward
    # differencing twice anchors the (1, -2, 1) response at rows p-2..p
    # (the leading +1 falls off the grid) and the mixed channels carry the
    # (+1, -1; -1, +1) block
    op = second_gradient_op(3, 3)
    img = np.zeros((3, 3))
    img[1, 1] = 1.0
    out = op.apply(img.ravel()).reshape(4, 3, 3)
    xx_expected = np.array([[0.0, -2.0, 0.0],
                            [0.0, 1.0, 0.0],
                            [0.0, 0.0, 0.0]])
    cross_expected = np.array([[1.0, -1.0, 0.0],
                               [-1.0, 1.0, 0.0],
                               [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(out[0], xx_expected, atol=0)
    np.testing.assert_allclose(out[1], cross_expected, atol=0)
    np.testing.assert_allclose(out[2], cross_expected, atol=0)
    np.testing.assert_allclose(out[3], xx_expected.T, atol=0)


def test_second_gradient_adjoint():
    op = second_gradient_op(5, 6)
    assert adjoint_check(op, trials=100, seed=1) <= 1e-12


def test_haar_roundtrip_and_norm():
    op = haar_analysis_op(6, 4)
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.standard_normal(24)
        np.testing.assert_allclose(op.adjoint_apply(op.apply(x)), x,
                                   atol=1e-12)
    # constant image has detail coefficients exactly zero
    coeffs = op.apply(np.full(24, 2.0)).reshape(4, -1)
    assert np.all(coeffs[1:] == 0.0)
    est = operator_norm(op)
    assert abs(est.value - 1.0) <= 1e-8


def test_haar_rejects_odd_dimensions():
    with pytest.raises(ConfigurationError):
        haar_analysis_op(3, 4)


def test_blur_ops_average_and_adjoint():
    op = box_blur_op(4, 4, 3)
    # averaging preserves constants under the replicate boundary
    np.testing.assert_allclose(op.apply(np.ones(16)), np.ones(16), atol=1e-12)
    assert adjoint_check(op, trials=100, seed=3) <= 1e-12
    gauss = gaussian_blur_op(4, 4, sigma=0.8, radius=1)
    np.testing.assert_allclose(gauss.apply(np.ones(16)), np.ones(16),
                               atol=1e-12)


def constant_truth(size, value=0.4):
    return ImageGrid(size, size, np.full(size * size, value))


def test_app1_constant_truth_recovered_exactly():
    # strong first/second-order regularizers and a vanishing analysis term:
    # a constant image is in the kernel of both derivative operators and
    # fits the identity observation exactly
    size = 8
    truth = constant_truth(size)
    from monosplit.linops import identity_op

    obs = make_observations(truth, [identity_op(size * size)], [1.0], 0.0)
    ms = build_app1_instance(truth, obs, alpha=5.0, beta=5.0, gamma=1e-6)
    system = build_system(ms)
    assert validate(system) == []
    policy = make_policy(compute_beta(system))
    final, _, status = solve(system, IterateState.zeros(system.layout),
                             policy, tol=1e-9, max_iter=20000)
    assert status == "converged"
    assert np.max(np.abs(final.x1[0] - truth.pixels)) <= 1e-4


def test_app1_dominant_analysis_term_matches_closed_form():
    # with negligible derivative terms the model reduces to
    # min 0.5||x - r||^2 + gamma ||Wx||_1 whose solution for orthonormal W
    # is W* soft(W r, gamma); the box is made inactive
    size = 8
    rng = np.random.default_rng(4)
    truth = ImageGrid(size, size,
                      np.clip(0.5 + 0.1 * rng.standard_normal(size * size),
                              0.2, 0.8))
    from monosplit.linops import identity_op

    obs = make_observations(truth, [identity_op(size * size)], [1.0], 0.0)
    gamma = 0.05
    ms = build_app1_instance(truth, obs, alpha=1e-6, beta=1e-6, gamma=gamma,
                             box=(-10.0, 10.0))
    system = build_system(ms)
    policy = make_policy(compute_beta(system))
    final, _, _ = solve(system, IterateState.zeros(system.layout),
                        policy, tol=1e-7, max_iter=15000)
    haar = haar_analysis_op(size, size)
    r = obs.observations[0]
    closed = haar.adjoint_apply(soft_threshold(haar.apply(r), gamma))
    assert np.max(np.abs(final.x1[0] - closed)) <= 1e-4


def test_app1_equilibrated_objective_is_unchanged():
    from monosplit.minimization import primal_surrogate

    size = 6
    truth = constant_truth(size, 0.3)
    blur = box_blur_op(size, size, 3)
    obs = make_observations(truth, [blur], [1.0], 0.01, seed=5)
    plain = build_app1_instance(truth, obs, 0.01, 0.02, 0.005)
    fast = build_app1_instance(truth, obs, 0.01, 0.02, 0.005,
                               equilibrate=True, dense_operators=True)
    rng = np.random.default_rng(6)
    hw = size * size
    for _ in range(5):
        x = [rng.standard_normal(hw)]
        y = [rng.standard_normal(hw), rng.standard_normal(hw)]
        a = primal_surrogate(plain, x, y)
        b = primal_surrogate(fast, x, y)
        assert a == pytest.approx(b, rel=1e-10)
    assert compute_beta(build_system(fast)) < compute_beta(build_system(plain))


def test_app1_mapping_structure():
    # the composite recovery model maps onto the two-block layout with the
    # gradient/second-gradient pair on the first block and the analysis
    # operator with a plain l1 on the second
    size = 6
    truth = constant_truth(size)
    hw = size * size
    from monosplit.linops import identity_op

    obs = make_observations(truth, [identity_op(hw)], [2.0], 0.0)
    ms = build_app1_instance(truth, obs, alpha=0.3, beta=0.4, gamma=0.2,
                             box=(0.1, 0.9))
    layout = ms.layout
    assert layout.m == 1 and layout.s == 2
    assert layout.g_dims == (hw, hw)
    assert layout.y_dims == (2 * hw, hw)
    assert layout.x_dims == (4 * hw, hw)
    assert ms.f[0].tag == "indicator_box"
    assert ms.g[0].tag == "group_l12" and ms.ell[0].tag == "group_l12"
    assert ms.g[1].tag == "l1" and ms.ell[1].tag == "indicator_zero"
    # weights enter the function values
    y = np.zeros(2 * hw)
    y[0], y[hw] = 3.0, 4.0
    assert ms.g[0].value(y) == pytest.approx(0.3 * 5.0)
    e1 = np.zeros(hw)
    e1[0] = 1.0
    assert ms.g[1].value(e1) == pytest.approx(0.2)
    # operator wiring: M1 = gradient, N1 = second gradient, M2 = Haar
    # (orthonormal), N2 = L11 = L21 = identity
    np.testing.assert_allclose(
        ms.M[0].apply(truth.pixels), gradient_op(size, size).apply(truth.pixels),
        atol=0)
    np.testing.assert_allclose(
        ms.N[0].apply(truth.pixels),
        second_gradient_op(size, size).apply(truth.pixels), atol=0)
    rng = np.random.default_rng(8)
    x = rng.standard_normal(hw)
    np.testing.assert_allclose(
        ms.M[1].apply(x), haar_analysis_op(size, size).apply(x), atol=0)
    for op in (ms.N[1], ms.L[0][0], ms.L[1][0]):
        np.testing.assert_allclose(op.apply(x), x, atol=0)
    # phi carries the weighted data term
    assert ms.phi.value(truth.pixels) == pytest.approx(0.0, abs=1e-20)
    assert ms.phi.value(np.zeros(hw)) == pytest.approx(
        0.5 * 2.0 * float(np.sum(obs.observations[0] ** 2)))
    assert all(np.all(z == 0.0) for z in ms.z)
    assert all(np.all(r == 0.0) for r in ms.r)


def test_group_l12_singleton_blocks_reduce_to_soft_threshold():
    from monosplit.prox import prox_catalog

    op = prox_catalog("group_l12", {"blocks": [[0], [1], [2]], "weight": 0.6}, 3)
    rng = np.random.default_rng(9)
    for _ in range(10):
        x = rng.standard_normal(3)
        gamma = float(rng.uniform(0.1, 5.0))
        np.testing.assert_allclose(op.resolve(gamma, x),
                                   soft_threshold(x, gamma * 0.6), atol=1e-15)


def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    img = ImageGrid(5, 3, rng.uniform(0, 1, 15))
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.height == 5 and back.width == 3
    assert np.max(np.abs(back.pixels - img.pixels)) <= 0.5 / 255 + 1e-12
