"""Bootstrap model selection across candidate process families.

Every candidate is fitted to the panel, B synthetic panels are drawn from
the fitted spectral distribution (fresh Haar basis per replicate), and each
replicate is scored by the squared distance between the sorted eigenvalues
of its symmetrized autocovariance and those of the data.  Candidates are
ranked by mean loss per lag.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fit import FitOptions, FitResult, make_config, optimize
from .model import JointSpectralGrid
from .spectra import empirical_transforms, symmetrized_autocov
from .synth import RANDOM_ORTHOGONAL, PanelData, SimSpec, simulate_time_domain

PRECEDES = " ≺ "  # separator in ranking strings ("a < b" in loss order)


def eigenvalue_loss(h_star: np.ndarray, h_s: np.ndarray) -> float:
    """Squared Euclidean distance between descending-sorted eigenvalue
    vectors of two Hermitian matrices."""
    a = np.asarray(h_star)
    b = np.asarray(h_s)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    ea = np.sort(np.linalg.eigvalsh(a))[::-1]
    eb = np.sort(np.linalg.eigvalsh(b))[::-1]
    return float(np.sum((ea - eb) ** 2))


@dataclass(frozen=True)
class Candidate:
    """A named family with its candidate grid; the grid weights are either
    refitted on the panel or used as given (fit=None)."""

    label: str
    grid: JointSpectralGrid


@dataclass(frozen=True)
class SelectionConfig:
    candidates: tuple[Candidate, ...]
    B: int = 500
    taus: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    weights: tuple = ()                  # weight functions for the fits
    z_points: np.ndarray | None = None
    fit_options: FitOptions | None = FitOptions()  # None: use grid weights as-is
    burn_in: int = 1000
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "taus", tuple(int(t) for t in self.taus))
        if self.B < 1:
            raise DomainError("B must be >= 1")
        if any(t < 0 for t in self.taus):
            raise DomainError("lags must be nonnegative")
        if not self.candidates:
            raise DomainError("need at least one candidate")


@dataclass
class SelectionReport:
    labels: tuple[str, ...]
    taus: tuple[int, ...]
    losses: np.ndarray               # (n_candidates, n_taus, B)
    fitted: list[FitResult | None]

    @property
    def mean_loss(self) -> np.ndarray:
        return self.losses.mean(axis=2)

    def ranking(self, tau: int) -> str:
        """Candidates ordered by increasing mean loss at this lag."""
        ti = self.taus.index(tau)
        order = np.argsort(self.mean_loss[:, ti], kind="stable")
        return PRECEDES.join(self.labels[i] for i in order)

    def best(self, tau: int) -> str:
        return self.ranking(tau).split(PRECEDES)[0]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "taus": list(self.taus),
            "mean_loss": self.mean_loss.tolist(),
            "rankings": {str(t): self.ranking(t) for t in self.taus},
            "losses": self.losses.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def fit_candidates(panel: PanelData, config: SelectionConfig) -> list[FitResult | None]:
    """Refit every candidate grid on the panel (shared transforms per
    candidate grid); None entries when fitting is disabled."""
    if config.fit_options is None:
        return [None] * len(config.candidates)
    if not config.weights:
        raise DomainError("fitting candidates requires weight functions")
    out = []
    for ci, cand in enumerate(config.candidates):
        opts = FitOptions(**{**config.fit_options.__dict__,
                             "seed": config.seed + 7919 * ci})
        cfg = make_config(cand.grid, config.weights, config.z_points, opts)
        transforms = empirical_transforms(panel, cfg.weights, cand.grid,
                                          cfg.z_points)
        out.append(optimize(cfg, transforms))
    return out


def bootstrap_scores(panel: PanelData, config: SelectionConfig) -> SelectionReport:
    """Fit candidates, simulate B replicates each, and score the symmetrized
    autocovariances against the panel's own at every requested lag."""
    h_s = {t: symmetrized_autocov(panel, t) for t in config.taus}
    fitted = fit_candidates(panel, config)
    grids = [f.grid if f is not None else cand.grid
             for f, cand in zip(fitted, config.candidates)]
    losses = np.empty((len(config.candidates), len(config.taus), config.B))

    def one(ci: int, b: int) -> np.ndarray:
        # replicate stream keyed by (candidate, replicate)
        spec = SimSpec(grids[ci].family, grids[ci], panel.p, panel.n,
                       basis=RANDOM_ORTHOGONAL, burn_in=config.burn_in,
                       seed=_replicate_seed(config.seed, ci, b))
        pb = simulate_time_domain(spec)
        return np.array([eigenvalue_loss(symmetrized_autocov(pb, t), h_s[t])
                         for t in config.taus])

    jobs = [(ci, b) for ci in range(len(config.candidates))
            for b in range(config.B)]
    if config.threads and config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda ab: one(*ab), jobs))
    else:
        results = [one(*ab) for ab in jobs]
    for (ci, b), vec in zip(jobs, results):
        losses[ci, :, b] = vec
    return SelectionReport(tuple(c.label for c in config.candidates),
                           config.taus, losses, fitted)


def _replicate_seed(seed: int, ci: int, b: int) -> int:
    # distinct, deterministic 63-bit child seeds per (candidate, replicate)
    return (seed * 1_000_003 + ci * 524_287 + b) % (2**63 - 1)


def ranking_table(reports) -> dict[int, list[tuple[str, float]]]:
    """Percentage of per-replicate loss orderings, pooled over the supplied
    reports, keyed by lag."""
    if isinstance(reports, SelectionReport):
        reports = [reports]
    reports = list(reports)
    if not reports:
        raise DomainError("need at least one report")
    taus = reports[0].taus
    labels = reports[0].labels
    out: dict[int, list[tuple[str, float]]] = {}
    for ti, tau in enumerate(taus):
        counts: dict[str, int] = {}
        total = 0
        for rep in reports:
            if rep.taus != taus or rep.labels != labels:
                raise DomainError("reports disagree in candidates or lags")
            for b in range(rep.losses.shape[2]):
                order = np.argsort(rep.losses[:, ti, b], kind="stable")
                key = PRECEDES.join(labels[i] for i in order)
                counts[key] = counts.get(key, 0) + 1
                total += 1
        table = [(k, 100.0 * v / total) for k, v in
                 sorted(counts.items(), key=lambda kv: -kv[1])]
        out[tau] = table
    return out


def ranking_table_csv(table: dict[int, list[tuple[str, float]]], path) -> None:
    """Wide CSV: one row per ordering, one percentage column per lag."""
    import csv
    orderings: list[str] = []
    for rows in table.values():
        for key, _ in rows:
            if key not in orderings:
                orderings.append(key)
    taus = sorted(table.keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ordering", *[f"lag{t}" for t in taus]])
        for key in orderings:
            row = [key]
            for t in taus:
                pct = dict(table[t]).get(key, 0.0)
                row.append(f"{pct:.1f}")
            w.writerow(row)
