"""Weighted integrated periodograms and empirical Stieltjes objects.

The central objects are S_g = (1/n) Xf W^2 Xf* (a frequency-weighted average
of periodogram outer products), its n x n dual sharing the nonzero spectrum,
and the resolvent traces of the dual: the empirical Stieltjes transform and
the per-grid-point Stieltjes kernel.  Resolvent traces are evaluated through
a single Hermitian eigendecomposition per (panel, weight function); when
p < n the p x p side is decomposed and the dual spectrum is recovered through
the push-through identity, which is algebraically exact and much cheaper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import DomainError, NumericError
from .model import GridPoint, ProcessFamily, spectral_h
from .synth import PanelData, frequencies


@dataclass(frozen=True)
class WeightFunction:
    """Nonnegative Lipschitz weight g on [0, 2pi].

    kinds: 'constant' (level), 'bspline' (one member of a clamped cubic
    basis, payload = (knots, index)), 'bump' (triangular bump of half-width
    delta at `center`).  `shift` is added pointwise everywhere.
    """

    kind: str
    shift: float = 0.0
    level: float = 1.0
    knots: tuple[float, ...] | None = None
    index: int = 0
    degree: int = 3
    center: float = 0.0
    delta: float = 0.0
    lipschitz_bound: float = field(default=0.0, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("constant", "bspline", "bump"):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if self.shift < 0:
            raise DomainError("shift must be nonnegative")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())
        if self.lipschitz_bound == 0.0:
            object.__setattr__(self, "lipschitz_bound", self._lipschitz())

    def _default_label(self) -> str:
        if self.kind == "constant":
            return f"const{self.level:g}"
        if self.kind == "bspline":
            return f"bspline{self.index}"
        return f"bump{self.center:.3f}"

    def _lipschitz(self) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "bump":
            return 1.0 / self.delta
        th = np.linspace(0.0, 2.0 * np.pi, 10001)
        v = self(th)
        return float(np.max(np.abs(np.diff(v))) / (th[1] - th[0]))

    def __call__(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        if self.kind == "constant":
            out = np.full(th.shape, self.level, dtype=float)
        elif self.kind == "bspline":
            t = np.asarray(self.knots)
            c = np.zeros(len(t) - self.degree - 1)
            c[self.index] = 1.0
            out = BSpline(t, c, self.degree, extrapolate=False)(th)
            out = np.nan_to_num(out, nan=0.0)
        else:
            d = np.abs(th - self.center)
            d = np.minimum(d, 2.0 * np.pi - d)  # periodic distance
            out = np.maximum(0.0, 1.0 - d / self.delta)
        out = out + self.shift
        if np.ndim(theta) == 0:
            return float(out)
        return out


def constant_weight(level: float = 1.0, shift: float = 0.0) -> WeightFunction:
    if level < 0:
        raise DomainError("weight level must be nonnegative")
    return WeightFunction("constant", shift=shift, level=level)


def dft_rows(panel: PanelData) -> np.ndarray:
    """Row-wise unitary DFT: entry (j, t) is
    n^{-1/2} sum_{s=1}^n X_{j,s} e^{-i s theta_t}, theta_t = 2 pi t / n."""
    x = panel.values
    n = panel.n
    t = np.arange(1, n + 1)
    f = np.fft.fft(x, axis=1)
    phase = np.exp(-2j * np.pi * t / n)
    return f[:, t % n] * phase[None, :] / np.sqrt(n)


def weighted_gram(xf: np.ndarray, g: WeightFunction | np.ndarray) -> np.ndarray:
    """(1/n) Xf W_g^2 Xf* for an already-transformed p x n matrix."""
    n = xf.shape[1]
    gv = g(frequencies(n)) if isinstance(g, WeightFunction) else np.asarray(g)
    if np.any(gv < 0):
        raise DomainError("weight function must be nonnegative")
    s = (xf * gv[None, :]) @ xf.conj().T / n
    return 0.5 * (s + s.conj().T)


def integrated_periodogram(panel: PanelData, g: WeightFunction) -> np.ndarray:
    """Hermitian PSD p x p matrix S_g = (1/n) Xf W_g^2 Xf*."""
    return weighted_gram(dft_rows(panel), g)


def dual_matrix(panel: PanelData, g: WeightFunction) -> np.ndarray:
    """The n x n dual (1/n) W_g Xf* Xf W_g sharing the nonzero spectrum of
    the integrated periodogram."""
    xf = dft_rows(panel)
    n = panel.n
    sq = np.sqrt(g(frequencies(n)))
    b = xf * sq[None, :]
    s = b.conj().T @ b / n
    return 0.5 * (s + s.conj().T)


def dual_eigenvalues(panel: PanelData, g: WeightFunction) -> np.ndarray:
    """Ascending eigenvalues of the n x n dual matrix (max(n-p, 0) of them
    vanish when p < n)."""
    try:
        return np.linalg.eigvalsh(dual_matrix(panel, g))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"dual eigendecomposition failed: {exc}") from exc


def empirical_stieltjes(eigenvalues, z):
    """(1/n) sum_j 1/(xi_j - z) for Im z > 0; z may be scalar or array."""
    xi = np.asarray(eigenvalues, dtype=float)
    zs = np.asarray(z, dtype=complex)
    if np.any(zs.imag <= 0):
        raise DomainError("empirical Stieltjes transform needs Im z > 0")
    out = np.mean(1.0 / (xi.reshape(-1, *([1] * zs.ndim)) - zs), axis=0)
    if np.ndim(z) == 0:
        return complex(out)
    return out


class SpectralDecomposition:
    """Cached eigendecomposition of one (panel, weight function) pair.

    All resolvent traces over the dual reduce to sums over eigenvalues
    weighted by diagonal loads; the loads matrix is precomputed so that
    evaluations over (grid point, z) are cheap pure reads.
    """

    def __init__(self, panel: PanelData, g: WeightFunction, mode: str = "auto"):
        if mode not in ("auto", "companion", "dual"):
            raise DomainError(f"unknown decomposition mode {mode!r}")
        xf = dft_rows(panel)
        n, p = panel.n, panel.p
        theta = frequencies(n)
        gv = np.asarray(g(theta), dtype=float)
        if np.any(gv < 0):
            raise DomainError("weight function must be nonnegative")
        b = xf * np.sqrt(gv)[None, :]
        if mode == "auto":
            mode = "companion" if p < n else "dual"
        try:
            if mode == "companion":
                s_p = b @ b.conj().T / n
                lam, v = np.linalg.eigh(0.5 * (s_p + s_p.conj().T))
                loads = np.abs(v.conj().T @ b) ** 2 / n**2
            else:
                s_d = b.conj().T @ b / n
                lam, q = np.linalg.eigh(0.5 * (s_d + s_d.conj().T))
                loads = np.abs(q.conj().T) ** 2 / n
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigendecomposition failed: {exc}") from exc
        self.mode = mode
        self.n, self.p = n, p
        self.theta = theta
        self.g_values = gv
        self.eigenvalues = lam
        self._loads = loads  # (k, n): per-eigenvalue trace weights
        self.weight = g

    def dual_spectrum(self) -> np.ndarray:
        """All n eigenvalues of the dual matrix, ascending."""
        lam = self.eigenvalues
        if self.mode == "companion":
            lam = np.r_[np.zeros(self.n - self.p), lam]
        return np.sort(lam)

    def s_hat(self, z):
        """Empirical Stieltjes transform (1/n) trace of the dual resolvent."""
        zs = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(zs.imag <= 0):
            raise DomainError("empirical Stieltjes transform needs Im z > 0")
        core = np.sum(1.0 / (self.eigenvalues[:, None] - zs[None, :]), axis=0)
        if self.mode == "companion":
            core = core - (self.n - self.p) / zs
        out = core / self.n
        if np.ndim(z) == 0:
            return complex(out[0])
        return out

    def k_hat_from_d(self, d: np.ndarray, z):
        """Kernel trace (1/n) tr[R(z) diag(d)] for a nonnegative diagonal d
        sampled at the DFT frequencies."""
        zs = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(zs.imag <= 0):
            raise DomainError("Stieltjes kernel needs Im z > 0")
        load = self._loads @ d  # (k,)
        core = np.sum(load[:, None] / (self.eigenvalues[:, None] - zs[None, :]),
                      axis=0)
        if self.mode == "companion":
            # push-through identity for the dual resolvent when p < n
            out = -(d.sum() / self.n - core) / zs
        else:
            out = core
        if np.ndim(z) == 0:
            return complex(out[0])
        return out

    def k_hat(self, family: ProcessFamily, point: GridPoint, z):
        d = self.g_values * spectral_h(family, point, self.theta)
        return self.k_hat_from_d(d, z)


def stieltjes_kernel(panel: PanelData, g: WeightFunction,
                     family: ProcessFamily, point: GridPoint, z):
    """One-shot kernel evaluation
    (1/n) trace[(dual - z)^{-1} W_g Psi*(lambda) Psi(lambda) W_g]."""
    return SpectralDecomposition(panel, g).k_hat(family, point, z)


@dataclass(frozen=True)
class EmpiricalTransforms:
    """Tables of the empirical transform and kernel over (g, z, grid point),
    plus the dual spectra, for one panel and one candidate grid."""

    weights: tuple[WeightFunction, ...]
    z_points: np.ndarray
    s_hat: np.ndarray            # (|G|, |Z|) complex
    k_hat: np.ndarray            # (|G|, J, |Z|) complex
    eigenvalues: tuple[np.ndarray, ...]  # per g, all n dual eigenvalues
    aspect: float
    n: int

    @property
    def n_weights(self) -> int:
        return len(self.weights)


def empirical_transforms(panel: PanelData, gs, grid, z_points,
                         mode: str = "auto") -> EmpiricalTransforms:
    """Build the (g, z, grid point) tables used by the fitting stage."""
    zs = np.asarray(z_points, dtype=complex)
    if np.any(zs.imag <= 0):
        raise DomainError("all z points must have Im z > 0")
    gs = tuple(gs)
    s_tab = np.empty((len(gs), zs.size), dtype=complex)
    k_tab = np.empty((len(gs), grid.J, zs.size), dtype=complex)
    spectra = []
    for gi, g in enumerate(gs):
        dec = SpectralDecomposition(panel, g, mode=mode)
        s_tab[gi] = dec.s_hat(zs)
        for j, pt in enumerate(grid.points):
            k_tab[gi, j] = dec.k_hat(grid.family, pt, zs)
        spectra.append(dec.dual_spectrum())
    return EmpiricalTransforms(gs, zs, s_tab, k_tab, tuple(spectra),
                               panel.aspect, panel.n)


def symmetrized_autocov(panel: PanelData, tau: int) -> np.ndarray:
    """S_{n,tau} = (1/2n) sum_t (Y_t Y_{t+tau}* + Y_{t+tau} Y_t*)."""
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    if tau >= panel.n:
        raise DomainError(f"tau = {tau} must be smaller than n = {panel.n}")
    y = panel.values
    a = y[:, : panel.n - tau]
    b = y[:, tau:]
    m = a @ b.conj().T
    return (m + m.conj().T) / (2.0 * panel.n)


def export_dual_spectra_csv(transforms: EmpiricalTransforms, path) -> None:
    """Per-weight-function dual eigenvalue vectors (columns: g-id, index,
    eigenvalue)."""
    import csv as _csv
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["g", "index", "eigenvalue"])
        for g, xi in zip(transforms.weights, transforms.eigenvalues):
            for j, val in enumerate(xi):
                w.writerow([g.label, j, f"{val:.17g}"])


def export_transforms_csv(transforms: EmpiricalTransforms, path) -> None:
    """Long-format table: g-id, z-re, z-im, value-re, value-im, grid-point-id
    (empty id rows carry the transform, numbered rows the kernel)."""
    import csv as _csv
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["g", "z_re", "z_im", "value_re", "value_im", "grid_point"])
        for gi, g in enumerate(transforms.weights):
            for zi, z in enumerate(transforms.z_points):
                v = transforms.s_hat[gi, zi]
                w.writerow([g.label, z.real, z.imag, v.real, v.imag, ""])
                for j in range(transforms.k_hat.shape[1]):
                    v = transforms.k_hat[gi, j, zi]
                    w.writerow([g.label, z.real, z.imag, v.real, v.imag, j])
