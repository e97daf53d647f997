"""Truncated sine cubes: norms, enumeration, biorthogonality, calibration."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, special

from mnolab.errors import ParameterError
from mnolab.sinecube import (
    CubeSpec,
    biorthogonal_coeff,
    c_r,
    calibrate_amplitude,
    corner_coefficient_vectors,
    cube_element,
    enumerate_multiindices,
    lr_norm_sin,
    rescale_to_domain,
)
from mnolab.spaces import LipschitzClassSpec, membership_check, uniform_grid


class TestNormConstant:
    def test_one_dim_l1_is_four(self):
        assert_allclose(c_r(1, 1.0), 4.0, rtol=0, atol=1e-10)

    def test_one_dim_l2_is_sqrt_pi(self):
        assert_allclose(c_r(1, 2.0), np.sqrt(np.pi), rtol=0, atol=1e-10)

    def test_two_dim_l2(self):
        assert_allclose(c_r(2, 2.0), np.sqrt(2.0 * np.pi * np.pi), rtol=0, atol=1e-10)

    def test_fractional_exponent_against_scipy(self):
        r = 2.7
        integral, _ = integrate.quad(lambda t: abs(np.sin(t)) ** r, 0.0, 2.0 * np.pi)
        oracle = ((2.0 * np.pi) ** 1 * integral) ** (1.0 / r)
        assert_allclose(c_r(2, r), oracle, rtol=1e-8)

    def test_direct_norm_is_kappa_independent(self):
        # The L^r norm of sin(kappa . x) does not depend on kappa; the
        # shared quadrature defect of the kinked |sin|^1 integrand cancels
        # pairwise but shows up (~1e-5 at 512 nodes) against the Simpson
        # value, while |sin|^2 is a trigonometric polynomial and exact.
        for r, against_c_r in ((1.0, 5e-5), (2.0, 1e-12)):
            norms = [lr_norm_sin(k, r) for k in ([1, 1], [3, 2], [5, 1])]
            assert np.ptp(norms) < 1e-10
            assert_allclose(norms[0], c_r(2, r), rtol=against_c_r)

    def test_normalized_elements_have_unit_norm(self):
        # The r=1 defect grows like kappa^2 / n^2, so give the 1-D check a
        # finer grid; the r=2 integrand is exact on the periodic rule.
        for d, r, n_axis, tol in ((1, 1.0, 8192, 1e-6), (2, 2.0, 512, 1e-12)):
            for kappa in enumerate_multiindices(d, 4).indices:
                ratio = lr_norm_sin(kappa, r, n_per_axis=n_axis) / c_r(d, r)
                assert_allclose(ratio, 1.0, rtol=tol)


class TestEnumeration:
    def test_two_dim_first_four(self):
        enum = enumerate_multiindices(2, 4)
        assert enum.indices.tolist() == [[1, 1], [1, 2], [2, 1], [2, 2]]

    def test_two_dim_shell_two_count(self):
        enum = enumerate_multiindices(2, 4)
        shell2 = [idx for idx in enum.indices.tolist() if max(idx) == 2]
        assert len(shell2) == 2**2 - 1**2

    def test_one_dim_is_the_integers(self):
        enum = enumerate_multiindices(1, 5)
        assert enum.indices.tolist() == [[1], [2], [3], [4], [5]]

    @pytest.mark.parametrize("d", [1, 2])
    def test_position_sandwich(self, d):
        enum = enumerate_multiindices(d, 64)
        for j, kappa in enumerate(enum.indices, start=1):
            big_k = int(max(kappa))
            assert (big_k - 1) ** d <= j <= big_k**d

    def test_entries_are_positive(self):
        assert enumerate_multiindices(3, 30).indices.min() >= 1


class TestCubeElement:
    def test_single_term_value(self):
        spec = CubeSpec(d=1, eta=2.0, amplitude=1.0, J=1, r=2.0)
        u = cube_element(spec, np.array([1.0]))
        assert_allclose(u(np.array([np.pi / 2.0])), 1.0 / np.sqrt(np.pi), rtol=1e-10)

    def test_sup_bounded_by_coefficient_sum(self):
        spec = CubeSpec(d=2, eta=2.0, amplitude=1.5, J=6, r=1.0)
        u = cube_element(spec, np.ones(6))
        bound = 1.5 * np.sum(np.arange(1, 7, dtype=float) ** -2.0) / c_r(2, 1.0)
        rng = np.random.default_rng(5)
        xs = rng.uniform(0.0, 2.0 * np.pi, size=(500, 2))
        assert np.max(np.abs(u(xs))) <= bound + 1e-12

    def test_coefficients_must_lie_in_unit_cube(self):
        spec = CubeSpec(d=1, eta=2.0, amplitude=1.0, J=2, r=2.0)
        with pytest.raises(ParameterError):
            cube_element(spec, np.array([0.5, -0.25]))
        with pytest.raises(ParameterError):
            cube_element(spec, np.array([0.5, 1.25]))

    def test_decay_must_exceed_one(self):
        with pytest.raises(ParameterError):
            CubeSpec(d=1, eta=1.0, amplitude=1.0, J=1, r=2.0)

    def test_tail_bound_matches_hurwitz_zeta(self):
        spec = CubeSpec(d=1, eta=2.0, amplitude=1.0, J=1, r=2.0)
        u = cube_element(spec, np.array([1.0]))
        oracle = special.zeta(2.0, 2.0) / np.sqrt(np.pi)
        assert_allclose(u.tail_sup_bound, oracle, rtol=1e-10)

    def test_rescaled_element_matches_pullback(self):
        spec = CubeSpec(d=1, eta=2.0, amplitude=1.0, J=3, r=2.0)
        u = cube_element(spec, np.array([1.0, 0.5, 0.0]))
        f = rescale_to_domain(u, gamma=2.0)
        x = np.array([[0.4]])
        assert_allclose(f(x), u((x + 2.0) * np.pi / 2.0), rtol=0, atol=0)


class TestBiorthogonality:
    def test_normalized_basis_gives_kronecker_delta(self):
        enum = enumerate_multiindices(2, 6)
        norm = c_r(2, 1.0)
        for i, kappa_i in enumerate(enum.indices):
            u_i = lambda pts, k=kappa_i: np.sin(np.atleast_2d(pts) @ k.astype(float)) / norm
            for j, kappa_j in enumerate(enum.indices):
                got = biorthogonal_coeff(u_i, kappa_j, r=1.0, quadrature_n=64)
                assert_allclose(got, 1.0 if i == j else 0.0, rtol=0, atol=1e-10)

    def test_recovers_cube_coefficients(self):
        spec = CubeSpec(d=1, eta=2.2, amplitude=1.3, J=5, r=2.0)
        y = np.array([1.0, 0.25, 0.0, 0.8, 0.5])
        u = cube_element(spec, y)
        enum = enumerate_multiindices(1, 5)
        for j, kappa in enumerate(enum.indices, start=1):
            want = 1.3 * j ** (-2.2) * y[j - 1]
            got = biorthogonal_coeff(u, kappa, r=2.0, quadrature_n=128)
            assert_allclose(got, want, rtol=0, atol=1e-10)

    def test_frequency_outside_truncation_reads_zero(self):
        spec = CubeSpec(d=1, eta=2.2, amplitude=1.3, J=3, r=2.0)
        u = cube_element(spec, np.array([1.0, 1.0, 1.0]))
        assert_allclose(biorthogonal_coeff(u, [7], r=2.0), 0.0, rtol=0, atol=1e-10)


class TestCorners:
    def test_small_case_enumerates_the_square(self):
        corners = corner_coefficient_vectors(2)
        assert corners.shape == (4, 2)
        assert {tuple(c) for c in corners.tolist()} == {
            (0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)
        }

    def test_tail_coordinates_pinned_at_one(self):
        corners = corner_coefficient_vectors(12, max_varied=10)
        assert corners.shape == (1024, 12)
        assert np.all(corners[:, 10:] == 1.0)


class TestCalibration:
    TARGET = LipschitzClassSpec(d=1, gamma=1.0, lip=1.0, bound=1.0)

    @staticmethod
    def _corners_feasible(amplitude: float, target: LipschitzClassSpec) -> bool:
        spec = CubeSpec(d=1, eta=2.5, amplitude=amplitude, J=8, r=2.0)
        grid = uniform_grid(target.gamma, 1, 201)
        for y in corner_coefficient_vectors(8):
            element = cube_element(spec, y)
            if membership_check(rescale_to_domain(element, target.gamma), target, grid):
                return False
        return True

    def test_returned_amplitude_is_nearly_maximal(self):
        a = calibrate_amplitude(1, 2.5, 2.0, 8, self.TARGET, bisect_steps=16)
        assert a > 0
        assert self._corners_feasible(a, self.TARGET)
        # Margin to infeasibility is at most 5 percent.
        assert not self._corners_feasible(1.05 * a, self.TARGET)

    def test_doubling_the_class_doubles_the_amplitude(self):
        a1 = calibrate_amplitude(1, 2.5, 2.0, 4, self.TARGET, bisect_steps=20)
        wide = LipschitzClassSpec(d=1, gamma=1.0, lip=2.0, bound=2.0)
        a2 = calibrate_amplitude(1, 2.5, 2.0, 4, wide, bisect_steps=20)
        assert a2 >= 2.0 * a1 * (1.0 - 1e-4)

    def test_requires_decay_above_lipschitz_floor(self):
        with pytest.raises(ParameterError):
            calibrate_amplitude(1, 1.5, 2.0, 4, self.TARGET)
