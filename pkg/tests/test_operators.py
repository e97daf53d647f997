"""Benchmark operators: closed forms, multilinearity, assumption checks."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from mnolab.errors import ConfigError, ParameterError
from mnolab.operators import (
    AffinePointwiseOperator,
    CubeFunctionSampler,
    KernelOperator,
    RankOneOperator,
    build_operator,
    make_mean_functional,
    make_point_eval_functional,
    verify_assumptions,
)
from mnolab.sinecube import CubeSpec, cube_element, rescale_to_domain
from mnolab.spaces import LipschitzClassSpec


SPEC_1D = LipschitzClassSpec(d=1, gamma=1.0, lip=1.0, bound=1.0)


def make_kernel(scale=0.25, quad_n=200):
    return KernelOperator(scale, SPEC_1D, SPEC_1D, SPEC_1D, quad_n=quad_n)


ONE = lambda pts: np.ones(np.atleast_2d(pts).shape[0])  # noqa: E731
ZERO = lambda pts: np.zeros(np.atleast_2d(pts).shape[0])  # noqa: E731


class TestKernelOperator:
    def test_constant_inputs_closed_form(self):
        # The per-axis weight integrates to int_-1^1 cos(pi (y - 1) / 4) dy
        # = 4 / pi, so constant inputs give scale * (4/pi)^2 * cos(x_1).
        op = make_kernel()
        weight_integral, _ = integrate.quad(
            lambda y: np.cos(np.pi * (y - 1.0) / 4.0), -1.0, 1.0
        )
        assert_allclose(weight_integral, 4.0 / np.pi, rtol=1e-12)
        got = op.eval(ONE, ONE, np.array([0.0]))
        assert_allclose(got, 0.25 * (4.0 / np.pi) ** 2, rtol=1e-9)

    def test_zero_input_gives_zero(self):
        op = make_kernel()
        assert op.eval(ONE, ZERO, np.array([0.3])) == pytest.approx(0.0, abs=1e-14)

    def test_bilinearity(self):
        op = make_kernel()
        alpha = lambda pts: np.atleast_2d(pts)[:, 0] ** 2
        u = lambda pts: np.cos(np.atleast_2d(pts)[:, 0])
        x = np.array([0.4])
        base = op.eval(alpha, u, x)
        doubled = op.eval(alpha, lambda pts: 2.0 * u(pts), x)
        assert_allclose(doubled, 2.0 * base, rtol=1e-12)

    def test_symmetric_in_the_two_inputs(self):
        op = make_kernel()
        f = lambda pts: np.atleast_2d(pts)[:, 0]
        g = lambda pts: np.exp(np.atleast_2d(pts)[:, 0])
        x = np.array([-0.2])
        assert_allclose(op.eval(f, g, x), op.eval(g, f, x), rtol=1e-12)

    def test_not_degenerate_on_odd_symmetric_inputs(self):
        # Every truncated sine element is odd about the box center; the
        # weighted integral must still see it.
        cube = CubeSpec(d=1, eta=2.0, amplitude=1.0, J=1, r=2.0)
        alpha = rescale_to_domain(cube_element(cube, np.array([1.0])), gamma=1.0)
        op = make_kernel()
        assert abs(op.eval(alpha, alpha, np.array([0.0]))) > 1e-4

    def test_quadrature_refinement_is_stable(self):
        alpha = lambda pts: np.sin(2.0 * np.atleast_2d(pts)[:, 0])
        u = lambda pts: np.atleast_2d(pts)[:, 0] ** 3
        x = np.array([0.9])
        coarse = make_kernel(quad_n=200).eval(alpha, u, x)
        fine = make_kernel(quad_n=400).eval(alpha, u, x)
        assert_allclose(coarse, fine, rtol=0, atol=1e-10)

    def test_eval_x_batch_matches_pointwise(self):
        op = make_kernel()
        alpha = lambda pts: np.atleast_2d(pts)[:, 0] ** 2
        xs = np.array([[-0.5], [0.0], [0.7]])
        batch = op.eval_x_batch(alpha, ONE, xs)
        single = [op.eval(alpha, ONE, x) for x in xs]
        assert_allclose(batch, single, rtol=1e-13)

    def test_coefficient_tensor_matches_eval_loop(self):
        op = make_kernel()
        alphas = [ONE, lambda pts: np.atleast_2d(pts)[:, 0]]
        us = [ONE, lambda pts: np.abs(np.atleast_2d(pts)[:, 0])]
        xs = np.array([[0.0], [0.5], [1.0]])
        tensor = op.coefficient_tensor(alphas, us, xs)
        assert tensor.shape == (2, 2, 3)
        for p, alpha in enumerate(alphas):
            for k, u in enumerate(us):
                for l, x in enumerate(xs):
                    assert_allclose(tensor[p, k, l], op.eval(alpha, u, x), atol=1e-12)


class TestRankOneOperator:
    def test_point_evaluation_recovered_at_anchor(self):
        op = build_operator(
            "rank_one",
            {"functional": {"type": "point_eval", "point": [0.0]}, "phi": "cos", "x0": [0.0]},
            SPEC_1D, SPEC_1D, SPEC_1D,
        )
        alpha = lambda pts: 0.25 + 0.5 * np.atleast_2d(pts)[:, 0]
        got = op.eval(alpha, ONE, np.array([0.0]))
        assert_allclose(got, 0.25, rtol=0, atol=1e-15)

    def test_output_ignores_u(self):
        rng = np.random.default_rng(9)
        op = build_operator(
            "rank_one",
            {"functional": {"type": "constant", "value": 2.0}, "phi": "cos"},
            SPEC_1D, SPEC_1D, SPEC_1D,
        )
        x = np.array([0.3])
        base = op.eval(ONE, ONE, x)
        for _ in range(50):
            c = rng.normal()
            u = lambda pts, c=c: c * np.ones(np.atleast_2d(pts).shape[0])
            assert op.eval(ONE, u, x) == base

    def test_phi_must_be_one_at_anchor(self):
        with pytest.raises(ParameterError):
            RankOneOperator(
                lambda alpha: 1.0,
                lambda xs: np.cos(np.atleast_2d(xs)[:, 0]),
                np.array([1.0]),
                SPEC_1D, SPEC_1D, SPEC_1D,
            )

    def test_mean_functional(self):
        mean = make_mean_functional(gamma=1.0, d=1)
        assert_allclose(mean(ONE), 1.0, rtol=1e-10)
        assert_allclose(mean(lambda pts: np.atleast_2d(pts)[:, 0]), 0.0, atol=1e-12)

    def test_point_eval_functional(self):
        f = make_point_eval_functional(np.array([0.5]))
        assert f(lambda pts: np.atleast_2d(pts)[:, 0] ** 2) == pytest.approx(0.25)


class TestAffineOperator:
    def test_sum_of_point_evaluations(self):
        op = AffinePointwiseOperator(SPEC_1D, SPEC_1D, SPEC_1D)
        alpha = lambda pts: 2.0 * np.atleast_2d(pts)[:, 0]
        u = lambda pts: np.atleast_2d(pts)[:, 0] + 1.0
        x = np.array([0.25])
        assert_allclose(op.eval(alpha, u, x), 0.5 + 1.25, rtol=1e-14)

    def test_projection_clips_into_the_box(self):
        wide_v = LipschitzClassSpec(d=1, gamma=3.0, lip=1.0, bound=3.0)
        op = AffinePointwiseOperator(SPEC_1D, SPEC_1D, wide_v)
        alpha = lambda pts: np.atleast_2d(pts)[:, 0]
        got = op.eval(alpha, ZERO, np.array([2.5]))  # clipped to gamma = 1
        assert_allclose(got, 1.0, rtol=1e-14)


class TestAssumptionVerification:
    def test_kernel_declared_constants_hold(self):
        report = verify_assumptions(make_kernel(), n_pairs=60, rng_seed=0)
        assert report.ok
        assert report.max_ratio_alpha <= 1.0 + 1e-6
        assert report.max_ratio_u <= 1.0 + 1e-6
        assert report.max_abs_output <= make_kernel().spec.beta_v * (1.0 + 1e-6)
        assert report.n_pairs == 60

    def test_understated_constant_is_flagged(self):
        op = make_kernel()
        object.__setattr__(op.spec, "lip_alpha", op.spec.lip_alpha * 1e-3)
        report = verify_assumptions(op, n_pairs=20, rng_seed=1)
        assert not report.ok

    def test_custom_samplers_are_used(self):
        sampler = CubeFunctionSampler(SPEC_1D, amplitude=0.5)
        report = verify_assumptions(
            make_kernel(), n_pairs=10, rng_seed=2,
            alpha_sampler=sampler, u_sampler=sampler,
        )
        assert report.ok


class TestRegistry:
    def test_all_names_build(self):
        for name in ("kernel", "rank_one", "affine"):
            op = build_operator(name, {}, SPEC_1D, SPEC_1D, SPEC_1D)
            assert np.isfinite(op.eval(ONE, ONE, np.array([0.1])))

    def test_lattice_functional_builds(self):
        op = build_operator(
            "rank_one",
            {"functional": {"type": "lattice", "J": 3, "levels": 4}, "phi": "one"},
            SPEC_1D, SPEC_1D, SPEC_1D,
        )
        assert np.isfinite(op.eval(ONE, ONE, np.array([0.0])))

    def test_unknown_names_rejected(self):
        with pytest.raises(ConfigError):
            build_operator("spectral", {}, SPEC_1D, SPEC_1D, SPEC_1D)
        with pytest.raises(ConfigError):
            build_operator(
                "rank_one", {"functional": {"type": "sobolev"}}, SPEC_1D, SPEC_1D, SPEC_1D
            )
        with pytest.raises(ConfigError):
            build_operator("rank_one", {"phi": "sinc"}, SPEC_1D, SPEC_1D, SPEC_1D)
