"""Numerical identifiability diagnostics for the weight estimator.

The estimator is consistent when the Gram matrix of the transform's weight
sensitivities, restricted to the sum-zero subspace of the simplex, is
positive definite.  This module evaluates that matrix for a given grid and
(G, Z) design, plus the closed-form objects available for iid and AR(1)
grids: the spectral-density Gram matrix built from the autocovariance series
and the Vandermonde factor that certifies it for distinct AR coefficients.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .lsd import h_table, solve_fixed_point, theta_grid
from .model import JointSpectralGrid, autocov


def sum_zero_basis(j: int) -> np.ndarray:
    """A J x (J-1) rank-(J-1) matrix with columns orthogonal to the all-ones
    vector (columns e_1 - e_{k+1})."""
    if j < 2:
        raise DomainError("need at least two atoms")
    b = np.zeros((j, j - 1))
    b[0, :] = 1.0
    b[np.arange(1, j), np.arange(j - 1)] = -1.0
    return b


def weight_jacobian_column(grid: JointSpectralGrid, g, z: complex, c: float,
                           T: int = 512, residual_tol: float = 1e-11) -> np.ndarray:
    """Sensitivity of the model transform at one (g, z): the length-J vector
    (1/(1+K_j)) * (1/2pi) int g h_j / (c M - z)^2 dtheta evaluated at the
    converged kernel for the grid's own weights."""
    sol = solve_fixed_point(grid, g, z, c, init=None, iters=None, T=T,
                            residual_tol=residual_tol)
    nodes, quad_w = theta_grid(T)
    h_tab = h_table(grid, nodes)
    g_tab = np.asarray(g(nodes), dtype=float)
    m_tab = sol.m_values[0]               # (T+1,)
    den = (c * m_tab - z) ** 2
    integrals = ((g_tab / den) * quad_w)[None, :] @ h_tab.T  # (1, J)
    return integrals[0] / (1.0 + sol.k_values[:, 0])


def sensitivity_gram(grid: JointSpectralGrid, gs, zs, c: float,
                     T: int = 512) -> np.ndarray:
    """The J x J averaged outer-product matrix of weight sensitivities over
    the (G, Z) design, Hermitian positive semidefinite by construction."""
    gs = list(gs)
    zs = np.asarray(zs, dtype=complex)
    m = np.zeros((grid.J, grid.J), dtype=complex)
    for g in gs:
        for z in zs:
            v = weight_jacobian_column(grid, g, complex(z), c, T=T)
            m += np.outer(v, v.conj())
    m /= len(gs) * zs.size
    return 0.5 * (m + m.conj().T)


def reduced_min_eigenvalue(m: np.ndarray, b: np.ndarray) -> float:
    """Smallest eigenvalue of B* M B (Hermitian for Hermitian M)."""
    r = b.conj().T @ m @ b
    return float(np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0])


def _gamma_vectors(grid: JointSpectralGrid, tail_tol: float = 1e-14,
                   max_lag: int = 100_000):
    """Autocovariance vectors gamma_ell over the grid atoms until the series
    tail is negligible."""
    fam = grid.family
    g0 = np.array([autocov(fam, pt, 0) for pt in grid.points])
    scale = np.max(np.abs(g0))
    out = [g0]
    for ell in range(1, max_lag + 1):
        g = np.array([autocov(fam, pt, ell) for pt in grid.points])
        if np.max(np.abs(g)) < tail_tol * scale:
            break
        out.append(g)
    return out


def gram_matrix(grid: JointSpectralGrid, tail_tol: float = 1e-14) -> np.ndarray:
    """Spectral-density Gram matrix (1/2pi) int h(theta) h(theta)^T dtheta
    evaluated through its autocovariance series
    gamma_0 gamma_0^T + 2 sum_{ell>=1} gamma_ell gamma_ell^T (truncated)."""
    gammas = _gamma_vectors(grid, tail_tol)
    m = np.outer(gammas[0], gammas[0])
    for g in gammas[1:]:
        m += 2.0 * np.outer(g, g)
    return m


def ar1_vandermonde(grid: JointSpectralGrid) -> tuple[np.ndarray, float]:
    """For an AR(1) grid, the matrix with rows (1, a_j, a_j^2, ..., a_j^{J-1})
    equal to D0^{-1} [gamma_0 : ... : gamma_{J-1}], together with its
    condition number.  Nonsingular exactly when the AR coefficients are
    distinct."""
    if grid.family.kind != "ar" or grid.family.order != 1:
        raise DomainError("Vandermonde certificate applies to AR(1) grids")
    alphas = np.array([pt.params[0] for pt in grid.points])
    v = np.vander(alphas, grid.J, increasing=True)
    return v, float(np.linalg.cond(v))
