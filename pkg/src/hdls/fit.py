"""Estimation of the joint spectral distribution.

Fits mixture weights on a prespecified grid of candidate eigenvalue tuples
by minimizing the summed L^kappa gap between the empirical Stieltjes
transforms and the model transforms implied by the weights, over a set of
weight functions G and complex evaluation points Z.  The empirical kernel is
computed once per (panel, g); every candidate weight vector only pays for
the cheap fixed-point recombination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .lsd import batched_model_stieltjes, h_table, theta_grid
from .model import PRODUCT, JointSpectralGrid, expand_product_weights
from .spectra import EmpiricalTransforms, WeightFunction, constant_weight
from .synth import rng_stream

FD_STEP = 1e-5


# ---------------------------------------------------------------- z grid ---

def _clean_z(z_points) -> np.ndarray:
    """Reflect points into the upper half-plane and deduplicate."""
    zs = np.asarray(z_points, dtype=complex).ravel()
    if np.any(zs.imag == 0):
        raise DomainError("z points must have nonzero imaginary part")
    zs = zs.real + 1j * np.abs(zs.imag)
    key = np.round(zs.real, 12) + 1j * np.round(zs.imag, 12)
    _, idx = np.unique(key, return_index=True)
    return zs[np.sort(idx)]


def default_z_grid() -> np.ndarray:
    """Evaluation grid: real parts 0.1..0.5 (5 points) crossed with 25
    imaginary parts equally spaced on [-2, 2], reflected into the upper
    half-plane and deduplicated; the zero row moves to the neighboring
    spacing 1/6 and merges with it."""
    res = np.linspace(0.1, 0.5, 5)
    ims = np.linspace(-2.0, 2.0, 25)
    spacing = ims[1] - ims[0]
    pos = np.abs(ims)
    pos[pos == 0] = spacing
    pos = np.unique(np.round(pos, 12))
    return np.array([x + 1j * y for x in res for y in pos])


# ------------------------------------------------------- weight families ---

def bspline_weights(count: int, shift: float = 0.05) -> list[WeightFunction]:
    """Clamped cubic B-spline basis of `count` members on [0, 2pi], each
    lifted by `shift`; the unshifted members form a partition of unity."""
    degree = 3
    if count < degree + 1:
        raise DomainError(f"a cubic basis needs at least {degree + 1} members")
    interior = np.linspace(0.0, 2.0 * np.pi, count - degree + 1)[1:-1]
    knots = tuple(np.r_[[0.0] * (degree + 1), interior,
                        [2.0 * np.pi] * (degree + 1)])
    return [WeightFunction("bspline", shift=shift, knots=knots, index=i,
                           degree=degree, label=f"bspline{count}_{i}")
            for i in range(count)]


def narrowband_weights(delta: float, shift: float = 0.05) -> list[WeightFunction]:
    """2pi/delta triangular bumps of half-width delta at equally spaced
    centers, each with unit mass before the shift."""
    if not (0 < delta < np.pi):
        raise DomainError("delta must lie in (0, pi)")
    n = 2.0 * np.pi / delta
    if abs(n - round(n)) > 1e-9:
        raise DomainError(f"2*pi/delta = {n} is not an integer")
    n = int(round(n))
    return [WeightFunction("bump", shift=shift, center=k * delta, delta=delta,
                           label=f"bump{n}_{k}")
            for k in range(n)]


_WEIGHT_FAMILIES = ("bspline4", "bspline8", "bspline12", "constant",
                    "narrowband")


def weight_family(name: str, shift: float = 0.05,
                  delta: float = np.pi / 4) -> list[WeightFunction]:
    """Named weight families used by the CLI."""
    if name == "constant":
        return [constant_weight(1.0)]
    if name.startswith("bspline"):
        return bspline_weights(int(name.removeprefix("bspline")), shift)
    if name == "narrowband":
        return narrowband_weights(delta, shift)
    raise DomainError(f"unknown weight family {name!r}; "
                      f"choose from {_WEIGHT_FAMILIES}")


# --------------------------------------------------------------- step cdf ---

@dataclass(frozen=True)
class StepCdf:
    """Finite mixture of point masses, kept sorted by atom."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.size != w.size or a.size == 0:
            raise DomainError("atoms and weights must have equal positive length")
        order = np.argsort(a, kind="stable")
        object.__setattr__(self, "atoms", a[order])
        object.__setattr__(self, "weights", w[order])

    def cdf(self, x: float) -> float:
        return float(self.weights[self.atoms <= x].sum())


def d_l2(f: StepCdf, g: StepCdf) -> float:
    """L2 distance between two step cdfs, sqrt of the exact piecewise
    integral of (F - G)^2 over the hull of both supports."""
    xs = np.unique(np.concatenate([f.atoms, g.atoms]))
    total = 0.0
    for left, right in zip(xs[:-1], xs[1:]):
        gap = f.cdf(left) - g.cdf(left)
        total += gap * gap * (right - left)
    return float(np.sqrt(total))


# ------------------------------------------------------------- fit config ---

@dataclass(frozen=True)
class FitOptions:
    """Fit settings independent of the candidate grid."""

    kappa: int = 1
    fixed_point_iters: int = 4
    theta_nodes: int = 512
    max_iters: int = 150
    explore_iters: int | None = None  # short first pass for all starts
    tol: float = 1e-8
    n_starts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kappa not in (1, 2):
            raise DomainError("kappa must be 1 or 2")
        if self.fixed_point_iters < 1:
            raise DomainError("fixed_point_iters must be >= 1")


@dataclass(frozen=True)
class FitConfig:
    """Grid, weight functions, z points and optimizer settings for one fit."""

    grid: JointSpectralGrid
    weights: tuple[WeightFunction, ...]
    z_points: np.ndarray = field(compare=False)
    options: FitOptions = FitOptions()

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "z_points", _clean_z(self.z_points))
        if not self.weights:
            raise DomainError("at least one weight function is required")

    @property
    def kappa(self) -> int:
        return self.options.kappa


def make_config(grid: JointSpectralGrid, weights, z_points=None,
                options: FitOptions | None = None) -> FitConfig:
    if z_points is None:
        z_points = default_z_grid()
    return FitConfig(grid, tuple(weights), np.asarray(z_points, dtype=complex),
                     options or FitOptions())


@dataclass
class FitResult:
    """Estimated weights plus the optimization trace."""

    grid: JointSpectralGrid          # atoms with the fitted weights
    omega_hat: np.ndarray            # full weights over the expanded atoms
    factor_weights: list[np.ndarray] | None
    loss_trace: list[float]
    final_loss: float
    transforms: EmpiricalTransforms

    def marginal_cdfs(self) -> dict[str, StepCdf]:
        """Per-factor step cdfs keyed 'coeff0', 'coeff1', ..., 'sigma2'."""
        out = {}
        n_coeff = 0
        for role, values, weights in self.grid.marginals():
            key = f"coeff{n_coeff}" if role == "coeff" else "sigma2"
            if role == "coeff":
                n_coeff += 1
            out[key] = StepCdf(values, weights)
        return out

    def to_dict(self) -> dict:
        from .model import grid_to_config
        return {
            "grid": grid_to_config(self.grid),
            "omega_hat": self.omega_hat.tolist(),
            "factor_weights": ([w.tolist() for w in self.factor_weights]
                               if self.factor_weights is not None else None),
            "loss_trace": list(self.loss_trace),
            "final_loss": self.final_loss,
        }


# ----------------------------------------------------------- the objective ---

class _FitEngine:
    """Precomputed tables for batched objective evaluation."""

    def __init__(self, config: FitConfig, transforms: EmpiricalTransforms):
        if transforms.k_hat.shape[:2] != (len(config.weights), config.grid.J):
            raise DomainError("transforms do not match the config grid/weights")
        nodes, quad_w = theta_grid(config.options.theta_nodes)
        self.h_tab = h_table(config.grid, nodes)
        self.g_tabs = [np.asarray(g(nodes), dtype=float)
                       for g in config.weights]
        self.quad_w = quad_w
        self.z = transforms.z_points
        self.c = transforms.aspect
        self.s_hat = transforms.s_hat
        self.k_init = transforms.k_hat
        self.kappa = config.options.kappa
        self.iters = config.options.fixed_point_iters
        self.grid = config.grid

    def losses(self, omegas: np.ndarray) -> np.ndarray:
        """Objective for a batch of full weight vectors, shape (B, J)."""
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        out = np.zeros(omegas.shape[0])
        for gi, g_tab in enumerate(self.g_tabs):
            s_model = batched_model_stieltjes(
                self.h_tab, g_tab, self.quad_w, self.k_init[gi], self.z,
                self.c, omegas, self.iters)
            gaps = np.abs(self.s_hat[gi][None, :] - s_model)
            if self.kappa == 2:
                gaps = gaps**2
            out += gaps.sum(axis=1)
        if not np.all(np.isfinite(out)):
            bad = omegas[~np.isfinite(out)][0]
            raise NumericError(f"non-finite objective at omega = {bad}")
        return out


def discrepancy(config: FitConfig, transforms: EmpiricalTransforms,
                omega) -> float:
    """Sum over (z, g) of |S_hat - S_model(omega)|^kappa for one full weight
    vector on the simplex."""
    w = np.asarray(omega, dtype=float)
    if w.size != config.grid.J:
        raise DomainError(f"omega must have length {config.grid.J}")
    return float(_FitEngine(config, transforms).losses(w[None, :])[0])


# ---------------------------------------------------------------- simplex ---

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.max(np.nonzero(u - css / idx > 0)[0]) + 1
    out = np.maximum(v - css[rho - 1] / rho, 0.0)
    return out / out.sum()


class _Parameterization:
    """Maps optimizer parameters to full atom weights (FULL: identity;
    PRODUCT: concatenated factor simplices expanded by outer product)."""

    def __init__(self, grid: JointSpectralGrid):
        self.grid = grid
        if grid.structure == PRODUCT:
            self.sizes = list(grid.factor_sizes)
        else:
            self.sizes = [grid.J]
        self.dim = sum(self.sizes)
        self.offsets = np.r_[0, np.cumsum(self.sizes)]

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([project_simplex(part) for part in self.split(x)])

    def expand(self, xs: np.ndarray) -> np.ndarray:
        """Parameters (B, dim) to full weights (B, J)."""
        xs = np.atleast_2d(xs)
        if self.grid.structure != PRODUCT:
            return xs
        return np.stack([expand_product_weights(self.split(x)) for x in xs])

    def uniform(self) -> np.ndarray:
        return np.concatenate([np.full(s, 1.0 / s) for s in self.sizes])

    def random(self, rng) -> np.ndarray:
        return np.concatenate([rng.dirichlet(np.ones(s)) for s in self.sizes])


def _central_grad(engine, par, x, f0):
    """Central finite differences on the parameter coordinates, one batched
    objective call."""
    dim = x.size
    batch = np.repeat(x[None, :], 2 * dim, axis=0)
    for k in range(dim):
        batch[2 * k, k] += FD_STEP
        batch[2 * k + 1, k] -= FD_STEP
    vals = engine.losses(par.expand(batch))
    return (vals[0::2] - vals[1::2]) / (2.0 * FD_STEP)


def _minimize_start(engine, par, x0, max_iters, tol):
    """One descent run on the (possibly concatenated) simplex: SLSQP with the
    batched central-difference gradient; the trace collects the running
    best objective (the accepted iterates)."""
    from scipy.optimize import minimize

    trace: list[float] = []
    best = [np.inf]

    def fun(x):
        f = float(engine.losses(par.expand(np.asarray(x, dtype=float)[None, :]))[0])
        if f < best[0]:
            best[0] = f
            trace.append(f)
        return f

    def jac(x):
        return _central_grad(engine, par, np.asarray(x, dtype=float), None)

    constraints = []
    for a, b in zip(par.offsets[:-1], par.offsets[1:]):
        row = np.zeros(par.dim)
        row[a:b] = 1.0
        constraints.append({
            "type": "eq",
            "fun": (lambda x, a=a, b=b: float(np.sum(x[a:b]) - 1.0)),
            "jac": (lambda x, row=row: row),
        })
    res = minimize(fun, np.asarray(x0, dtype=float), method="SLSQP", jac=jac,
                   bounds=[(0.0, 1.0)] * par.dim, constraints=constraints,
                   options={"maxiter": max_iters, "ftol": tol})
    x = par.project(np.asarray(res.x, dtype=float))
    f = float(engine.losses(par.expand(x[None, :]))[0])
    if f < best[0]:
        trace.append(f)
    return x, min(f, best[0]), trace


def optimize(config: FitConfig, transforms: EmpiricalTransforms) -> FitResult:
    """Minimize the discrepancy over the simplex (or the concatenation of
    factor simplices in product mode) with multi-start: the uniform vector
    plus Dirichlet(1) draws, each polished by a projected descent run using
    central finite-difference gradients."""
    engine = _FitEngine(config, transforms)
    par = _Parameterization(config.grid)
    opts = config.options
    rng = rng_stream(opts.seed, 9000)
    starts = [par.uniform()] + [par.random(rng) for _ in range(opts.n_starts)]

    first_pass = opts.explore_iters if opts.explore_iters is not None \
        else opts.max_iters
    runs = [_minimize_start(engine, par, x0, first_pass, opts.tol)
            for x0 in starts]
    best = min(range(len(runs)), key=lambda i: runs[i][1])
    x, f, trace = runs[best]
    if opts.explore_iters is not None and opts.explore_iters < opts.max_iters:
        x, f2, more = _minimize_start(engine, par, x,
                                      opts.max_iters - opts.explore_iters,
                                      opts.tol)
        trace = trace + [v for v in more if v < f]
        f = min(f, f2)

    x = par.project(x)
    full = par.expand(x[None, :])[0]
    full = np.where(full < 0, 0.0, full)
    full = full / full.sum()
    if config.grid.structure == PRODUCT:
        factor_weights = [w.copy() for w in par.split(x)]
        grid = config.grid.with_factor_weights(factor_weights)
    else:
        factor_weights = None
        grid = config.grid.with_weights(full)
    return FitResult(grid, full, factor_weights, trace, f, transforms)
