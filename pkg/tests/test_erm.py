"""Hierarchical data generation, projected-GD training, generalization estimates."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mnolab.errors import ParameterError, TrainingDivergenceError
from mnolab.operators import CubeFunctionSampler, KernelOperator, build_operator
from mnolab.erm import (
    TrainOptions,
    UniformPointSampler,
    erm_train,
    estimate_generalization,
    generate_training_set,
    load_training_set,
    replace_theta,
    save_training_set,
    solve_theta_least_squares,
    suggest_learning_rate,
)
from mnolab.separable import (
    ConstructionBudget,
    build_constructive,
    with_fresh_theta,
)
from mnolab.spaces import LipschitzClassSpec


SPEC_1D = LipschitzClassSpec(d=1, gamma=1.0, lip=1.0, bound=1.0)


class FixedSampler:
    """Sampler stub always returning the same function."""

    def __init__(self, f):
        self.f = f

    def sample(self, rng):
        return self.f


def constant_operator(value=0.75):
    return build_operator(
        "rank_one",
        {"functional": {"type": "constant", "value": value}, "phi": "one"},
        SPEC_1D, SPEC_1D, SPEC_1D,
    )


def kernel_operator():
    return KernelOperator(0.25, SPEC_1D, SPEC_1D, SPEC_1D, quad_n=120)


def small_architecture(operator, P=2, H=2, N=3):
    return build_constructive(
        operator, ConstructionBudget(P=P, H=H, N=N, delta_w=0.5, delta_u=0.5)
    )


def sample_set(operator, net, n_alpha=3, n_u=2, n_x=4, sigma=0.0, seed=123):
    return generate_training_set(
        operator,
        CubeFunctionSampler(SPEC_1D, amplitude=0.5),
        CubeFunctionSampler(SPEC_1D, amplitude=0.5),
        UniformPointSampler(1.0, 1),
        net.w_sensors,
        net.u_sensors,
        n_alpha, n_u, n_x, sigma, seed,
    )


class TestGeneration:
    def test_counts(self):
        op = kernel_operator()
        net = small_architecture(op)
        data = sample_set(op, net, n_alpha=2, n_u=3, n_x=4)
        assert data.labels.shape == (2, 3, 4)
        assert data.n_samples == 24
        assert data.alpha_values.shape == (2, net.w_sensors.shape[0])

    def test_zero_noise_labels_match_the_operator(self):
        op = kernel_operator()
        net = small_architecture(op)
        alpha = lambda pts: 0.25 + 0.5 * np.atleast_2d(pts)[:, 0]
        u = lambda pts: np.cos(np.atleast_2d(pts)[:, 0])
        data = generate_training_set(
            op, FixedSampler(alpha), FixedSampler(u), UniformPointSampler(1.0, 1),
            net.w_sensors, net.u_sensors, 2, 2, 3, 0.0, 7,
        )
        for l in range(2):
            for i in range(2):
                want = op.eval_x_batch(alpha, u, data.x_points[l, i])
                assert_allclose(data.labels[l, i], want, rtol=0, atol=1e-12)

    def test_same_seed_reproduces_bytes(self):
        op = kernel_operator()
        net = small_architecture(op)
        a = sample_set(op, net, sigma=0.05, seed=99)
        b = sample_set(op, net, sigma=0.05, seed=99)
        for field in ("alpha_values", "u_values", "x_points", "labels"):
            assert getattr(a, field).tobytes() == getattr(b, field).tobytes()

    def test_different_seed_differs(self):
        op = kernel_operator()
        net = small_architecture(op)
        a = sample_set(op, net, seed=1)
        b = sample_set(op, net, seed=2)
        assert a.labels.tobytes() != b.labels.tobytes()

    def test_tier_sizes_validated(self):
        op = kernel_operator()
        net = small_architecture(op)
        with pytest.raises(ParameterError):
            sample_set(op, net, n_alpha=0)

    def test_noise_shifts_labels(self):
        op = constant_operator(0.0)
        net = small_architecture(op)
        noisy = sample_set(op, net, sigma=0.5, seed=3)
        assert np.max(np.abs(noisy.labels)) > 0.05


class TestTraining:
    def test_zero_steps_returns_initialization(self):
        op = kernel_operator()
        net = small_architecture(op)
        data = sample_set(op, net)
        result = erm_train(net, data, TrainOptions(steps=0))
        assert np.array_equal(result.net.theta, net.theta)
        assert len(result.loss_trace) == 1

    def test_gradient_descent_matches_least_squares(self):
        op = constant_operator(0.6)
        template = small_architecture(op)
        data = sample_set(op, template, n_alpha=4, n_u=2, n_x=3)
        start = with_fresh_theta(template, value=0.0)

        theta_star, oracle_loss = solve_theta_least_squares(start, data)
        lr = suggest_learning_rate(start, data)
        result = erm_train(start, data, TrainOptions(steps=3000, lr=lr, seed=0))
        assert abs(result.final_loss - oracle_loss) <= 1e-6
        assert oracle_loss <= 1e-12  # realizable target
        del theta_star

    def test_full_batch_trace_is_monotone_at_small_lr(self):
        op = kernel_operator()
        template = small_architecture(op)
        data = sample_set(op, template, sigma=0.05)
        start = with_fresh_theta(template, value=0.0)
        result = erm_train(start, data, TrainOptions(steps=50, lr=1e-3))
        trace = np.array(result.loss_trace)
        assert np.all(np.diff(trace) <= 1e-15)

    def test_theta_projection_respects_the_bound(self):
        op = constant_operator(5.0)  # optimum far outside the box
        template = small_architecture(op)
        data = sample_set(op, template)
        start = with_fresh_theta(template, value=0.0, theta_bound=0.05)
        for steps in (1, 2, 5):
            result = erm_train(start, data, TrainOptions(steps=steps, lr=0.5))
            assert np.max(np.abs(result.net.theta)) <= 0.05 + 1e-15

    def test_training_is_deterministic(self):
        op = kernel_operator()
        template = small_architecture(op)
        data = sample_set(op, template, sigma=0.05)
        start = with_fresh_theta(template, value=0.0)
        opts = TrainOptions(steps=40, lr=1e-2, batch=5, seed=11)
        first = erm_train(start, data, opts)
        second = erm_train(start, data, opts)
        assert np.array(first.loss_trace).tobytes() == np.array(second.loss_trace).tobytes()
        assert np.array_equal(first.net.theta, second.net.theta)

    def test_divergence_raises_with_trace(self):
        op = constant_operator(1.0)
        template = small_architecture(op)
        data = sample_set(op, template)
        start = with_fresh_theta(template, value=0.0)
        with pytest.raises(TrainingDivergenceError) as excinfo:
            erm_train(start, data, TrainOptions(steps=200, lr=1e6))
        assert len(excinfo.value.trace) >= 2

    def test_least_squares_solution_zeroes_the_gradient(self):
        op = kernel_operator()
        template = small_architecture(op)
        data = sample_set(op, template, n_alpha=4, n_u=2, n_x=3, sigma=0.05)
        start = with_fresh_theta(template, value=0.0)
        theta_star, _ = solve_theta_least_squares(start, data)
        # One GD step from the optimum must not move (zero gradient).
        at_opt = replace_theta(start, theta_star)
        result = erm_train(at_opt, data, TrainOptions(steps=1, lr=1e-2))
        assert_allclose(result.net.theta, theta_star, rtol=0, atol=1e-10)

    def test_suggested_learning_rate_is_positive_and_stable(self):
        op = kernel_operator()
        template = small_architecture(op)
        data = sample_set(op, template, sigma=0.05)
        start = with_fresh_theta(template, value=0.0)
        lr = suggest_learning_rate(start, data)
        assert lr > 0
        result = erm_train(start, data, TrainOptions(steps=100, lr=lr))
        assert result.final_loss <= result.loss_trace[0]


class TestGeneralizationEstimate:
    def test_exact_net_scores_zero(self):
        op = constant_operator(0.75)
        net = small_architecture(op)
        est = estimate_generalization(
            net, op,
            CubeFunctionSampler(SPEC_1D, amplitude=0.5),
            CubeFunctionSampler(SPEC_1D, amplitude=0.5),
            UniformPointSampler(1.0, 1),
            n_test_alpha=5, n_test_u=2, n_x=4, seed=21,
        )
        assert est.mean <= 1e-12

    def test_zero_net_against_constant_target(self):
        op = constant_operator(0.6)
        net = with_fresh_theta(small_architecture(op), value=0.0)
        est = estimate_generalization(
            net, op,
            CubeFunctionSampler(SPEC_1D, amplitude=0.5),
            CubeFunctionSampler(SPEC_1D, amplitude=0.5),
            UniformPointSampler(1.0, 1),
            n_test_alpha=4, n_test_u=2, n_x=3, seed=22,
        )
        assert est.mean == pytest.approx(0.36, abs=1e-12)
        assert est.stderr == pytest.approx(0.0, abs=1e-15)

    def test_doubling_groups_shrinks_the_standard_error(self):
        op = kernel_operator()
        net = with_fresh_theta(small_architecture(op), value=0.0)
        kwargs = dict(
            operator=op,
            alpha_sampler=CubeFunctionSampler(SPEC_1D, amplitude=0.5),
            u_sampler=CubeFunctionSampler(SPEC_1D, amplitude=0.5),
            x_sampler=UniformPointSampler(1.0, 1),
            n_test_u=1, n_x=4, seed=23,
        )
        small = estimate_generalization(net, n_test_alpha=60, **kwargs)
        large = estimate_generalization(net, n_test_alpha=120, **kwargs)
        ratio = large.stderr / small.stderr
        assert 0.5 <= ratio <= 0.95  # about 1/sqrt(2)


class TestPersistence:
    def test_save_load_roundtrip(self, tmp_path):
        op = kernel_operator()
        net = small_architecture(op)
        data = sample_set(op, net, sigma=0.05, seed=31)
        csv_path = tmp_path / "train.csv"
        sidecar = tmp_path / "train.json"
        save_training_set(data, csv_path, sidecar)
        again = load_training_set(csv_path, sidecar)
        for field in ("alpha_values", "u_values", "x_points", "labels",
                      "w_sensors", "u_sensors"):
            assert getattr(data, field).tobytes() == getattr(again, field).tobytes()
        assert again.sigma == data.sigma
        assert again.seed == data.seed
