"""Synthetic panel generation.

Two samplers are provided: a time-domain recursion/convolution sampler for
the linear process itself, and an exact frequency-domain sampler built from
the circulant approximation of the lag operator, whose columns are
independent complex Gaussians scaled by the transfer function.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, ParseError
from .model import (GridPoint, JointSpectralGrid, ProcessFamily,
                    transfer_psi, validate_point)

IDENTITY = "identity"
RANDOM_ORTHOGONAL = "random_orthogonal"


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based (Philox) generator for a named substream of `seed`.

    Distinct paths give statistically independent streams, so replicates and
    bootstrap draws can run in any order or in parallel with bit-identical
    results.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PanelData:
    """A p x n data panel (rows are coordinates, columns are time points)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DomainError(f"panel must be a 2-d array, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def aspect(self) -> float:
        return self.p / self.n

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


@dataclass(frozen=True)
class SimSpec:
    """Everything needed to draw one synthetic panel."""

    family: ProcessFamily
    grid: JointSpectralGrid
    p: int
    n: int
    basis: str = IDENTITY
    burn_in: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise DomainError("p and n must be positive")
        if self.burn_in < 0:
            raise DomainError("burn_in must be nonnegative")
        if self.basis not in (IDENTITY, RANDOM_ORTHOGONAL):
            raise DomainError(f"unknown basis {self.basis!r}")
        if self.grid.family != self.family:
            raise DomainError("grid family does not match spec family")


def assign_counts(weights, p: int) -> np.ndarray:
    """Eigenvalue multiplicities floor(p*w_j) with the remaining mass handed
    out by largest fractional part (ties to the lowest index)."""
    w = np.asarray(weights, dtype=float)
    raw = p * w
    counts = np.floor(raw).astype(int)
    rem = raw - counts
    short = p - counts.sum()
    if short > 0:
        # stable sort on -rem keeps the lowest index first among ties
        order = np.argsort(-rem, kind="stable")
        counts[order[:short]] += 1
    return counts


def assigned_points(spec: SimSpec) -> list[GridPoint]:
    """Grid point of every coordinate, in row order (contiguous blocks that
    follow the grid's atom order)."""
    counts = assign_counts(spec.grid.weights, spec.p)
    out: list[GridPoint] = []
    for pt, k in zip(spec.grid.points, counts):
        out.extend([pt] * int(k))
    return out


def _filter_taps(fam: ProcessFamily, point: GridPoint):
    """lfilter numerator/denominator for the coordinate recursion."""
    if fam.kind == "iid":
        return [1.0], [1.0]
    if fam.kind == "ma":
        return [1.0, *point.params], [1.0]
    if fam.kind == "ar":
        return [1.0], [1.0, *(-a for a in point.params)]
    a, b = point.params
    return [1.0, b], [1.0, -a]


def simulate_time_domain(spec: SimSpec) -> PanelData:
    """Draw a real p x n panel of the linear process with Gaussian
    innovations; AR/ARMA coordinates run a burned-in recursion, MA
    coordinates a direct convolution."""
    rng = rng_stream(spec.seed, 0)
    counts = assign_counts(spec.grid.weights, spec.p)
    burn = spec.burn_in
    out = np.empty((spec.p, spec.n))
    row = 0
    for pt, k in zip(spec.grid.points, counts):
        if k == 0:
            continue
        validate_point(spec.family, pt)
        z = rng.standard_normal((int(k), spec.n + burn)) * pt.sigma
        b, a = _filter_taps(spec.family, pt)
        x = lfilter(b, a, z, axis=1)
        out[row:row + k] = x[:, burn:]
        row += int(k)
    if spec.basis == RANDOM_ORTHOGONAL:
        u = random_orthogonal(spec.p, rng_stream(spec.seed, 1))
        out = u @ out
    return PanelData(out)


def frequencies(n: int) -> np.ndarray:
    """DFT frequencies theta_t = 2 pi t / n for t = 1..n."""
    return 2.0 * np.pi * np.arange(1, n + 1) / n


def simulate_circulant(spec: SimSpec) -> PanelData:
    """Exact frequency-domain sampler: column t (in the eigenbasis) is
    diag(psi(lambda_k, theta_t)) applied to an iid standard complex Gaussian
    vector, columns independent."""
    rng = rng_stream(spec.seed, 0)
    pts = assigned_points(spec)
    theta = frequencies(spec.n)
    re = rng.standard_normal((spec.p, spec.n))
    im = rng.standard_normal((spec.p, spec.n))
    z = (re + 1j * im) / np.sqrt(2.0)
    psi = np.empty((spec.p, spec.n), dtype=complex)
    cache: dict[GridPoint, np.ndarray] = {}
    for k, pt in enumerate(pts):
        if pt not in cache:
            cache[pt] = transfer_psi(spec.family, pt, theta)
        psi[k] = cache[pt]
    out = psi * z
    if spec.basis == RANDOM_ORTHOGONAL:
        u = random_orthogonal(spec.p, rng_stream(spec.seed, 1))
        out = u @ out
    return PanelData(out)


def random_orthogonal(p: int, rng) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
    R diagonal sign fixed."""
    if p < 1:
        raise DomainError("p must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = rng_stream(int(rng), 0)
    m = rng.standard_normal((p, p))
    q, r = np.linalg.qr(m)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d[None, :]


def export_csv(panel: PanelData, path, header: bool = False) -> None:
    """One row per coordinate; complex panels are written as paired
    re/im columns."""
    v = panel.values
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        if panel.is_complex:
            if header:
                w.writerow([f"t{t}_{part}" for t in range(1, panel.n + 1)
                            for part in ("re", "im")])
            for row in v:
                w.writerow([f"{x:.17g}" for pair in zip(row.real, row.imag)
                            for x in pair])
        else:
            if header:
                w.writerow([f"t{t}" for t in range(1, panel.n + 1)])
            for row in v:
                w.writerow([f"{x:.17g}" for x in row])


def import_csv(path, complex_pairs: bool = False) -> PanelData:
    """Strict reader for panels written by export_csv (no header/id
    detection; see cli.ingest_csv for the tolerant reader)."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ParseError(f"row {i + 1}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no numeric rows")
    arr = np.asarray(rows)
    if complex_pairs:
        if arr.shape[1] % 2:
            raise ParseError("complex panel needs an even column count")
        arr = arr[:, 0::2] + 1j * arr[:, 1::2]
    return PanelData(arr)
