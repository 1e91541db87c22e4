"""Figure rendering for the CLI report paths.

Every function takes plot-ready arrays and writes a PNG next to the
delimited output; nothing here is needed by the numerical modules.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def step_cdf_plot(cdfs: dict, path, true_cdfs: dict | None = None):
    """Estimated (and optionally true) step cdfs, one panel per factor."""
    n = len(cdfs)
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 3.2), squeeze=False)
    for ax, (name, cdf) in zip(axes[0], cdfs.items()):
        xs = np.r_[cdf.atoms[0] - 0.1 * (np.ptp(cdf.atoms) + 1), cdf.atoms,
                   cdf.atoms[-1] + 0.1 * (np.ptp(cdf.atoms) + 1)]
        ys = np.r_[0.0, np.cumsum(cdf.weights), 1.0]
        ax.step(xs, ys, where="post", label="estimate")
        if true_cdfs and name in true_cdfs:
            t = true_cdfs[name]
            txs = np.r_[xs[0], t.atoms, xs[-1]]
            tys = np.r_[0.0, np.cumsum(t.weights), 1.0]
            ax.step(txs, tys, where="post", ls="--", label="true")
            ax.legend(fontsize=8)
        ax.set_title(name)
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("atom")
        ax.set_ylabel("cdf")
    return _finish(fig, path)


def density_plot(xs, density, path, title="limiting spectral density"):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, density)
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title(title)
    return _finish(fig, path)


def loss_trace_plot(trace, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogy(np.arange(len(trace)), trace)
    ax.set_xlabel("accepted iterate")
    ax.set_ylabel("discrepancy")
    ax.set_title("optimization trace")
    return _finish(fig, path)


def pve_plot(pve, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    k = np.arange(1, len(pve) + 1)
    ax.plot(k[:50], np.asarray(pve)[:50], marker="o", ms=3)
    ax.set_xlabel("factor index")
    ax.set_ylabel("proportion of variation explained")
    ax.set_title("scree plot")
    return _finish(fig, path)


def corr_hist_plot(correlations, path, bins=80):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(correlations, bins=bins, density=True)
    ax.set_xlabel("pairwise correlation")
    ax.set_ylabel("density")
    ax.set_title("pairwise correlations")
    return _finish(fig, path)


def ranking_plot(table: dict, path):
    """Stacked percentage bars of loss orderings per lag."""
    taus = sorted(table.keys())
    orderings: list[str] = []
    for rows in table.values():
        for key, _ in rows:
            if key not in orderings:
                orderings.append(key)
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(taus)), 3.6))
    bottom = np.zeros(len(taus))
    for key in orderings:
        vals = np.array([dict(table[t]).get(key, 0.0) for t in taus])
        ax.bar([str(t) for t in taus], vals, bottom=bottom, label=key)
        bottom += vals
    ax.set_xlabel("lag")
    ax.set_ylabel("percent of replicates")
    ax.legend(fontsize=6, loc="center left", bbox_to_anchor=(1.0, 0.5))
    return _finish(fig, path)


def sdm_plot(thetas, eigencurves, multiplicities, path):
    """Per-atom spectral densities h(lambda_(j), theta) of the estimator."""
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    for row, m in zip(np.asarray(eigencurves), multiplicities):
        ax.plot(thetas, row, label=f"multiplicity {m}")
    ax.set_xlabel("frequency")
    ax.set_ylabel("spectral density")
    ax.legend(fontsize=8)
    ax.set_title("estimated spectral density eigenvalues")
    return _finish(fig, path)
