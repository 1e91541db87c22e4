"""Rotation-equivariant spectral-density-matrix estimator.

From a fitted joint spectral distribution: estimate the common eigenbasis
from the integrated periodogram under an ordering weight g0, order the grid
atoms by their integrated spectral mass, convert weights to integer
multiplicities, and assemble H(theta) with the per-atom transfer densities
placed on the ordered eigenvector blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .lsd import theta_grid
from .model import GridPoint, JointSpectralGrid, ProcessFamily, spectral_h
from .spectra import WeightFunction, constant_weight, integrated_periodogram
from .synth import PanelData


def order_key(family: ProcessFamily, point: GridPoint, g0: WeightFunction,
              T: int = 512) -> float:
    """Integrated spectral mass (1/2pi) int g0(theta) h(lambda, theta) dtheta,
    the eigenvalue the atom contributes to the integrated population
    spectral density."""
    if T < 128:
        raise DomainError("quadrature needs T >= 128")
    nodes, w = theta_grid(T)
    return float(np.dot(w, np.asarray(g0(nodes)) *
                        spectral_h(family, point, nodes)))


def estimate_basis(panel: PanelData, g0: WeightFunction) -> np.ndarray:
    """Eigenvectors of the integrated periodogram under g0, ordered by
    decreasing eigenvalue, each column phase-fixed so its first
    non-negligible entry is positive real."""
    s = integrated_periodogram(panel, g0)
    try:
        vals, vecs = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"basis eigendecomposition failed: {exc}") from exc
    vecs = vecs[:, ::-1]  # decreasing eigenvalues
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        lead = col[nz[0]] if nz.size else 1.0
        phase = lead / abs(lead) if abs(lead) > 0 else 1.0
        vecs[:, k] = col / phase
    if not np.iscomplexobj(panel.values) and np.allclose(vecs.imag, 0.0,
                                                         atol=1e-10):
        vecs = vecs.real.astype(float)
    return vecs


def round_multiplicities(weights, p: int) -> np.ndarray:
    """Nearest-integer multiplicities p_j ~ round(p * w_j), corrected by
    largest remainder (ties to the lowest index) so they sum to p exactly;
    atoms rounded to zero are pruned by the caller."""
    w = np.asarray(weights, dtype=float)
    raw = p * w
    counts = np.rint(raw).astype(int)
    diff = p - counts.sum()
    rem = raw - counts
    while diff != 0:
        stepping = 1 if diff > 0 else -1
        if diff > 0:
            order = np.argsort(-rem, kind="stable")
        else:
            eligible = counts > 0
            masked = np.where(eligible, rem, np.inf)
            order = np.argsort(masked, kind="stable")
        counts[order[0]] += stepping
        rem[order[0]] -= stepping
        diff -= stepping
    return counts


@dataclass(frozen=True)
class SdmEstimate:
    """Common eigenbasis plus ordered (atom, multiplicity) blocks."""

    family: ProcessFamily
    u_hat: np.ndarray
    ordered_atoms: tuple[tuple[GridPoint, int], ...]
    g0: WeightFunction

    def __post_init__(self):
        p = self.u_hat.shape[0]
        if sum(m for _, m in self.ordered_atoms) != p:
            raise DomainError("multiplicities must sum to the dimension")

    @property
    def p(self) -> int:
        return self.u_hat.shape[0]


def build_sdm(panel: PanelData, grid: JointSpectralGrid,
              g0: WeightFunction | None = None, T: int = 512) -> SdmEstimate:
    """Run the whole construction for a fitted grid: basis from the data,
    multiplicities from the weights, atoms ordered by decreasing integrated
    mass (ties by atom index)."""
    g0 = g0 if g0 is not None else constant_weight(1.0)
    u = estimate_basis(panel, g0)
    mults = round_multiplicities(grid.weights, panel.p)
    keep = [(j, grid.points[j], int(mults[j])) for j in range(grid.J)
            if mults[j] > 0]
    keys = {j: order_key(grid.family, pt, g0, T) for j, pt, _ in keep}
    keep.sort(key=lambda item: (-keys[item[0]], item[0]))
    ordered = tuple((pt, m) for _, pt, m in keep)
    return SdmEstimate(grid.family, u, ordered, g0)


def sdm_at(estimate: SdmEstimate, theta: float) -> np.ndarray:
    """H(theta) = U diag(h(lambda_(j), theta) I_{p_(j)}) U*."""
    diag = np.concatenate([
        np.full(m, spectral_h(estimate.family, pt, float(theta)))
        for pt, m in estimate.ordered_atoms])
    u = estimate.u_hat
    h = (u * diag[None, :]) @ u.conj().T
    return 0.5 * (h + h.conj().T)


def sdm_eigencurves(estimate: SdmEstimate, thetas) -> np.ndarray:
    """h(lambda_(j), theta) for each ordered atom over a frequency grid
    (rows follow ordered_atoms)."""
    thetas = np.asarray(thetas, dtype=float)
    return np.array([spectral_h(estimate.family, pt, thetas)
                     for pt, _ in estimate.ordered_atoms])
