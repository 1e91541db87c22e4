import numpy as np
import pytest

from hdls.consistency import (ar1_vandermonde, gram_matrix,
                              reduced_min_eigenvalue, sensitivity_gram,
                              sum_zero_basis, weight_jacobian_column)
from hdls.errors import DomainError
from hdls.model import GridPoint, family, grid_from_factors, grid_from_points
from hdls.spectra import constant_weight

IID = family("iid")
AR1 = family("ar", 1)
G1 = constant_weight(1.0)


def iid_grid(*sigma2, weights=None):
    pts = [GridPoint((), float(np.sqrt(s))) for s in sigma2]
    w = weights if weights is not None else [1.0 / len(pts)] * len(pts)
    return grid_from_points(IID, pts, w)


def ar1_grid(*alphas, sigma2=1.0):
    return grid_from_factors(AR1, [(list(alphas),
                                    [1.0 / len(alphas)] * len(alphas))],
                             [sigma2], [1.0])


class TestSumZeroBasis:
    def test_shape_rank_and_orthogonality(self):
        for j in (2, 3, 6):
            b = sum_zero_basis(j)
            assert b.shape == (j, j - 1)
            assert np.linalg.matrix_rank(b) == j - 1
            np.testing.assert_allclose(b.T @ np.ones(j), 0.0, atol=1e-14)

    def test_needs_two_atoms(self):
        with pytest.raises(DomainError):
            sum_zero_basis(1)


class TestSensitivityGram:
    def test_iid_two_atom_reduced_positive_definite(self):
        grid = iid_grid(1.0, 2.0, weights=[0.5, 0.5])
        zs = np.array([0.2 + 0.6j, 0.45 + 1.1j])  # D = J distinct points
        m = sensitivity_gram(grid, [G1], zs, c=0.5, T=256)
        b = sum_zero_basis(2)
        assert reduced_min_eigenvalue(m, b) > 0

    def test_gram_is_psd(self):
        grid = iid_grid(0.5, 1.5, 3.0, weights=[0.3, 0.4, 0.3])
        zs = np.array([0.1 + 0.5j, 0.3 + 1j, 0.5 + 1.5j])
        m = sensitivity_gram(grid, [G1], zs, c=0.25, T=256)
        evals = np.linalg.eigvalsh(m)
        assert evals.min() > -1e-14

    def test_jacobian_column_matches_fd_of_plugin_transform(self):
        # independent check: with the kernel frozen at its converged value,
        # the directional derivative of the model transform along the
        # simplex path (1-t) w0 + t e_j equals -c (v_j - w0 . v)
        from hdls.lsd import model_stieltjes, solve_fixed_point
        grid = iid_grid(1.0, 2.0, weights=[0.4, 0.6])
        z, c = 0.3 + 0.9j, 0.5
        w0 = np.array([0.4, 0.6])
        sol = solve_fixed_point(grid, G1, z, c, iters=None, T=512,
                                residual_tol=1e-13)
        k0 = sol.k_values
        v = weight_jacobian_column(grid, G1, z, c, T=512)
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1.0
            wp = (1 - h) * w0 + h * e
            wm = (1 + h) * w0 - h * e
            sp = model_stieltjes(grid.with_weights(wp), k0, G1, z, c, T=512)
            sm = model_stieltjes(grid.with_weights(wm), k0, G1, z, c, T=512)
            fd = (sp - sm) / (2 * h)
            want = -c * (v[j] - np.dot(w0, v))
            assert fd == pytest.approx(want, rel=1e-5)


class TestGramMatrix:
    def test_ar1_closed_form(self):
        # for AR(1) atoms the Gram has the closed form
        # D0 (2/(1 - a_j a_k) - 1) D0 with D0 = diag(sigma2/(1-a^2))
        grid = ar1_grid(0.2, 0.5, 0.8)
        got = gram_matrix(grid)
        alphas = np.array([0.2, 0.5, 0.8])
        d0 = np.diag(1.0 / (1.0 - alphas**2))
        core = 2.0 / (1.0 - np.outer(alphas, alphas)) - 1.0
        want = d0 @ core @ d0
        np.testing.assert_allclose(got, want, rtol=1e-10)

    def test_distinct_alphas_positive_definite(self):
        grid = ar1_grid(-0.5, 0.1, 0.45, 0.8)
        evals = np.linalg.eigvalsh(gram_matrix(grid))
        assert evals.min() > 0

    def test_duplicate_alphas_singular(self):
        grid = ar1_grid(0.5, 0.5)
        evals = np.linalg.eigvalsh(gram_matrix(grid))
        assert evals.min() == pytest.approx(0.0, abs=1e-10)

    def test_matches_direct_quadrature(self):
        from hdls.model import spectral_h
        grid = ar1_grid(0.3, -0.6)
        th = np.linspace(0, 2 * np.pi, 20_001)
        h = np.array([spectral_h(AR1, pt, th) for pt in grid.points])
        direct = np.trapezoid(h[:, None, :] * h[None, :, :], th,
                              axis=2) / (2 * np.pi)
        np.testing.assert_allclose(gram_matrix(grid), direct, rtol=1e-6)


class TestVandermonde:
    def test_structure_and_conditioning(self):
        grid = ar1_grid(0.2, 0.5, 0.8)
        v, cond = ar1_vandermonde(grid)
        np.testing.assert_allclose(v[:, 0], 1.0)
        np.testing.assert_allclose(v[:, 1], [0.2, 0.5, 0.8])
        assert np.isfinite(cond)
        assert abs(np.linalg.det(v)) > 0

    def test_non_ar1_rejected(self):
        with pytest.raises(DomainError):
            ar1_vandermonde(iid_grid(1.0, 2.0))
