"""Command-line surface and data pipeline.

Subcommands: simulate | estimate | lsd | sdm | select | corrhist.  All
numeric outputs are CSV, all structured outputs JSON; report paths also
render matplotlib figures next to the delimited files unless --no-plot is
given.  Logging level comes from the HDLS_LOG environment variable
(error, info, debug).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fit as fitmod
from . import lsd as lsdmod
from . import plots
from .errors import DomainError, ParseError
from .model import grid_from_config
from .modelsel import (Candidate, SelectionConfig, bootstrap_scores,
                       ranking_table, ranking_table_csv)
from .sdm import build_sdm, sdm_at, sdm_eigencurves
from .spectra import constant_weight, empirical_transforms
from .synth import (PanelData, SimSpec, export_csv, import_csv,
                    simulate_circulant, simulate_time_domain)

log = logging.getLogger("hdls")


# ------------------------------------------------------------ preprocessing ---

def ingest_csv(path) -> PanelData:
    """Tolerant panel reader: rows are series; an optional header row and an
    optional leading identifier column are auto-detected by non-numeric
    cells."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ParseError(f"{path}: empty file")

    def numeric(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    header = any(not numeric(c) for c in rows[0][1:]) or (
        len(rows[0]) == 1 and not numeric(rows[0][0]) and len(rows) > 1)
    data = rows[1:] if header else rows
    if not data:
        raise ParseError(f"{path}: no data rows")
    id_col = not numeric(data[0][0])
    width = len(data[0])
    values = []
    for i, row in enumerate(data):
        rownum = i + 2 if header else i + 1
        if len(row) != width:
            raise ParseError(
                f"{path}: row {rownum} has {len(row)} cells, expected {width}")
        cells = row[1:] if id_col else row
        parsed = []
        for j, cell in enumerate(cells):
            colnum = j + 2 if id_col else j + 1
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell at row {rownum}, "
                    f"column {colnum}: {cell!r}") from None
        values.append(parsed)
    if not values or not values[0]:
        raise ParseError(f"{path}: no numeric columns")
    arr = np.asarray(values)
    constant = np.nonzero(arr.std(axis=1) == 0)[0]
    for idx in constant:
        log.warning("row %d is constant", idx + 1)
    return PanelData(arr)


def log_returns(panel: PanelData) -> PanelData:
    """First differences of logs along time; every entry must be positive."""
    v = panel.values
    if np.iscomplexobj(v):
        raise DomainError("log returns need a real panel")
    bad = np.argwhere(v <= 0)
    if bad.size:
        i, j = bad[0]
        raise DomainError(f"nonpositive entry at row {i + 1}, column {j + 1}")
    return PanelData(np.diff(np.log(v), axis=1))


def remove_factors(panel: PanelData, s: int) -> PanelData:
    """Row-mean-centered panel minus its s leading singular-value terms."""
    if not 0 <= s <= min(panel.p, panel.n):
        raise DomainError(f"s must lie in [0, {min(panel.p, panel.n)}]")
    centered = panel.values - panel.values.mean(axis=1, keepdims=True)
    if s == 0:
        return PanelData(centered)
    u, sv, vt = np.linalg.svd(centered, full_matrices=False)
    residual = centered - (u[:, :s] * sv[:s]) @ vt[:s]
    return PanelData(residual)


def pve(panel: PanelData) -> np.ndarray:
    """Proportion of variation explained by each factor: normalized squared
    singular values of the centered panel."""
    centered = panel.values - panel.values.mean(axis=1, keepdims=True)
    sv = np.linalg.svd(centered, compute_uv=False)
    lam = sv**2
    total = lam.sum()
    if total == 0:
        return np.zeros_like(lam)
    return lam / total


# ----------------------------------------------------------------- helpers ---

@dataclass
class RunConfig:
    """One CLI invocation."""

    command: str
    config: str | None = None
    input: str | None = None
    output: str = "."
    seed: int = 0
    threads: int | None = None
    kappa: int | None = None
    gfamily: str | None = None
    tau: tuple[int, ...] | None = None
    plot: bool = True
    complex_input: bool = False


def _load_json(path) -> dict:
    if path is None:
        raise DomainError("this subcommand needs --config")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _weight_list(spec: dict, cfg: RunConfig):
    name = cfg.gfamily or spec.get("gfamily", "bspline8")
    shift = spec.get("gshift", 0.05)
    if name == "constant":
        return fitmod.weight_family(name)
    return fitmod.weight_family(name, shift=shift,
                                delta=spec.get("gdelta", np.pi / 4))


def _fit_options(spec: dict, cfg: RunConfig) -> fitmod.FitOptions:
    keys = ("kappa", "fixed_point_iters", "theta_nodes", "max_iters",
            "explore_iters", "tol", "n_starts")
    opts = {k: spec[k] for k in keys if k in spec}
    if cfg.kappa is not None:
        opts["kappa"] = cfg.kappa
    opts["seed"] = cfg.seed
    return fitmod.FitOptions(**opts)


def _z_points(spec: dict) -> np.ndarray:
    if "z" in spec:
        return np.array([complex(re, im) for re, im in spec["z"]])
    return fitmod.default_z_grid()


def _load_panel(cfg: RunConfig) -> PanelData:
    if cfg.input is None:
        raise DomainError("this subcommand needs --input")
    if cfg.complex_input:
        return import_csv(cfg.input, complex_pairs=True)
    return ingest_csv(cfg.input)


# -------------------------------------------------------------- subcommands ---

def _cmd_simulate(cfg: RunConfig) -> int:
    spec = _load_json(cfg.config)
    grid = grid_from_config(spec["grid"])
    sim = SimSpec(grid.family, grid, int(spec["p"]), int(spec["n"]),
                  basis=spec.get("basis", "identity"),
                  burn_in=int(spec.get("burn_in", 1000)), seed=cfg.seed)
    sampler = spec.get("sampler", "time")
    if sampler == "time":
        panel = simulate_time_domain(sim)
    elif sampler == "circulant":
        panel = simulate_circulant(sim)
    else:
        raise DomainError(f"unknown sampler {sampler!r}")
    out = _outdir(cfg)
    export_csv(panel, out / "panel.csv", header=spec.get("header", False))
    log.info("wrote %s (%d x %d)", out / "panel.csv", panel.p, panel.n)
    return 0


def _preprocess(panel: PanelData, spec: dict, cfg: RunConfig, out: Path) -> PanelData:
    pp = spec.get("preprocess", {})
    if pp.get("log_returns", False):
        panel = log_returns(panel)
    s = int(pp.get("remove_factors", 0))
    if pp.get("log_returns", False) or s > 0 or pp.get("pve", False):
        ratios = pve(panel)
        with open(out / "pve.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["factor", "pve"])
            for k, r in enumerate(ratios, start=1):
                w.writerow([k, f"{r:.10g}"])
        if cfg.plot:
            plots.pve_plot(ratios, out / "pve.png")
    if s > 0:
        panel = remove_factors(panel, s)
    return panel


def _cmd_estimate(cfg: RunConfig) -> int:
    spec = _load_json(cfg.config)
    out = _outdir(cfg)
    panel = _preprocess(_load_panel(cfg), spec, cfg, out)
    grid = grid_from_config(spec["grid"])
    weights = _weight_list(spec, cfg)
    fconfig = fitmod.make_config(grid, weights, _z_points(spec),
                                 _fit_options(spec, cfg))
    log.info("computing empirical transforms (p=%d, n=%d, %d weights)",
             panel.p, panel.n, len(weights))
    transforms = empirical_transforms(panel, weights, grid, fconfig.z_points)
    result = fitmod.optimize(fconfig, transforms)
    with open(out / "fit_result.json", "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    cdfs = result.marginal_cdfs() if grid.factors is not None else {}
    for name, cdf in cdfs.items():
        with open(out / f"cdf_{name}.csv", "w", encoding="utf-8",
                  newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "cdf"])
            for x, y in zip(cdf.atoms, np.cumsum(cdf.weights)):
                w.writerow([f"{x:.10g}", f"{y:.10g}"])
    if cfg.plot:
        if cdfs:
            plots.step_cdf_plot(cdfs, out / "cdf.png")
        plots.loss_trace_plot(result.loss_trace, out / "loss_trace.png")
    log.info("final loss %.6g after %d accepted iterates",
             result.final_loss, len(result.loss_trace))
    return 0


def _cmd_lsd(cfg: RunConfig) -> int:
    spec = _load_json(cfg.config)
    out = _outdir(cfg)
    grid = grid_from_config(spec["grid"])
    weights = _weight_list(spec, cfg)
    c = float(spec["c"])
    zs = _z_points(spec)
    iters = spec.get("iters")  # null: residual-driven
    solutions = [lsdmod.solve_fixed_point(grid, g, zs, c, init=None,
                                          iters=iters,
                                          T=spec.get("theta_nodes", 512))
                 for g in weights]
    lsdmod.export_solution_csv(solutions, out / "transforms.csv")
    dens_spec = spec.get("density", {})
    xs = np.linspace(dens_spec.get("x_min", 0.0), dens_spec.get("x_max", 6.0),
                     int(dens_spec.get("points", 200)))
    eps = float(dens_spec.get("eps", 0.01))
    dens = {g.label: lsdmod.density_on_grid(grid, g, c, xs, eps=eps)
            for g in weights}
    with open(out / "density.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", *dens.keys()])
        for i, x in enumerate(xs):
            w.writerow([f"{x:.10g}", *[f"{dens[k][i]:.10g}" for k in dens]])
    if cfg.plot:
        first = next(iter(dens))
        plots.density_plot(xs, dens[first], out / "density.png",
                           title=f"LSD density ({first})")
    return 0


def _cmd_sdm(cfg: RunConfig) -> int:
    spec = _load_json(cfg.config)
    out = _outdir(cfg)
    panel = _load_panel(cfg)
    grid = grid_from_config(spec["grid"])
    g0 = constant_weight(1.0) if spec.get("g0", "constant") == "constant" \
        else _weight_list(spec, cfg)[0]
    estimate = build_sdm(panel, grid, g0)
    u = estimate.u_hat
    with open(out / "u_hat.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        for row in u:
            if np.iscomplexobj(u):
                w.writerow([f"{x.real:.17g}" for x in row] +
                           [f"{x.imag:.17g}" for x in row])
            else:
                w.writerow([f"{x:.17g}" for x in row])
    thetas = np.linspace(0, 2 * np.pi, int(spec.get("theta_points", 9)))
    with open(out / "sdm.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "i", "j", "re", "im"])
        for th in thetas:
            h = sdm_at(estimate, th)
            for i in range(h.shape[0]):
                for j in range(h.shape[1]):
                    w.writerow([f"{th:.10g}", i, j,
                                f"{h[i, j].real:.10g}",
                                f"{np.imag(h[i, j]):.10g}"])
    with open(out / "atoms.json", "w", encoding="utf-8") as fh:
        json.dump([{"params": list(pt.params), "sigma2": pt.sigma2,
                    "multiplicity": m}
                   for pt, m in estimate.ordered_atoms], fh, indent=2)
    if cfg.plot:
        dense = np.linspace(0, 2 * np.pi, 256)
        plots.sdm_plot(dense, sdm_eigencurves(estimate, dense),
                       [m for _, m in estimate.ordered_atoms],
                       out / "sdm.png")
    return 0


def _cmd_select(cfg: RunConfig) -> int:
    spec = _load_json(cfg.config)
    out = _outdir(cfg)
    panel = _preprocess(_load_panel(cfg), spec, cfg, out)
    candidates = tuple(Candidate(c["label"], grid_from_config(c["grid"]))
                       for c in spec["candidates"])
    taus = cfg.tau or tuple(spec.get("taus", (0, 1, 2, 3, 4, 5)))
    fit_spec = spec.get("fit")
    sel = SelectionConfig(
        candidates=candidates,
        B=int(spec.get("B", 500)),
        taus=taus,
        weights=tuple(_weight_list(spec, cfg)) if fit_spec is not None else (),
        z_points=_z_points(spec) if fit_spec is not None else None,
        fit_options=_fit_options(fit_spec, cfg) if fit_spec is not None else None,
        burn_in=int(spec.get("burn_in", 1000)),
        seed=cfg.seed,
        threads=cfg.threads,
    )
    report = bootstrap_scores(panel, sel)
    report.save(out / "report.json")
    table = ranking_table(report)
    ranking_table_csv(table, out / "ranking.csv")
    if cfg.plot:
        plots.ranking_plot(table, out / "ranking.png")
    for t in report.taus:
        log.info("lag %d best candidate: %s", t, report.best(t))
    return 0


def _cmd_corrhist(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    panel = _load_panel(cfg)
    corr = np.corrcoef(panel.values)
    iu = np.triu_indices(panel.p, k=1)
    vals = corr[iu]
    with open(out / "correlations.csv", "w", encoding="utf-8",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "correlation"])
        for i, j, v in zip(iu[0], iu[1], vals):
            w.writerow([int(i) + 1, int(j) + 1, f"{v:.10g}"])
    if cfg.plot:
        plots.corr_hist_plot(vals, out / "corrhist.png")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "lsd": _cmd_lsd,
    "sdm": _cmd_sdm,
    "select": _cmd_select,
    "corrhist": _cmd_corrhist,
}


def run(cfg: RunConfig) -> int:
    """Dispatch one subcommand; returns the process exit status."""
    if cfg.command not in _COMMANDS:
        raise DomainError(f"unknown subcommand {cfg.command!r}")
    if cfg.input is not None and not os.path.exists(cfg.input):
        raise DomainError(f"input path does not exist: {cfg.input}")
    if cfg.config is not None and not os.path.exists(cfg.config):
        raise DomainError(f"config path does not exist: {cfg.config}")
    return _COMMANDS[cfg.command](cfg)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hdls",
        description="Spectral estimation for high-dimensional linear time series")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--input", help="input panel CSV")
        sp.add_argument("--output", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--kappa", type=int, choices=(1, 2), default=None)
        sp.add_argument("--gfamily",
                        choices=("bspline4", "bspline8", "bspline12",
                                 "constant", "narrowband"), default=None)
        sp.add_argument("--tau", type=str, default=None,
                        help="comma-separated lag list")
        sp.add_argument("--no-plot", dest="plot", action="store_false")
        sp.add_argument("--complex-input", action="store_true",
                        help="input CSV stores re/im column pairs")
    return p


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(
        os.environ.get("HDLS_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    ns = _parser().parse_args(argv)
    taus = None
    if ns.tau:
        taus = tuple(int(t) for t in ns.tau.split(","))
    cfg = RunConfig(command=ns.command, config=ns.config, input=ns.input,
                    output=ns.output, seed=ns.seed, threads=ns.threads,
                    kappa=ns.kappa, gfamily=ns.gfamily, tau=taus,
                    plot=ns.plot, complex_input=ns.complex_input)
    try:
        return run(cfg)
    except Exception as exc:  # single-line machine-readable failure
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
