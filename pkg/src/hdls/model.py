"""Process families, grid points and joint spectral distributions.

A coordinate process is a scalar linear filter x_t = sigma * sum_l f_l z_{t-l}
applied to unit-variance white noise.  A grid point bundles the filter
parameters with the innovation scale sigma; a joint spectral grid carries a
finite list of such points together with mixture weights on the simplex.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SIMPLEX_TOL = 1e-12
COEFF_TAIL_TOL = 1e-14

_FAMILY_KINDS = ("iid", "ma", "ar", "arma11")


@dataclass(frozen=True)
class ProcessFamily:
    """Parametric family of scalar transfer functions.

    kind is one of 'iid', 'ma', 'ar', 'arma11'.  For 'ma' and 'ar' the order
    q gives the number of coefficients; 'arma11' always takes two parameters
    (ar coefficient, ma coefficient); 'iid' takes none.
    """

    kind: str
    order: int = 0

    def __post_init__(self):
        if self.kind not in _FAMILY_KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")
        if self.kind in ("ma", "ar") and self.order < 1:
            raise DomainError(f"{self.kind} family needs order >= 1")
        if self.kind == "iid" and self.order != 0:
            raise DomainError("iid family has no order")
        if self.kind == "arma11" and self.order not in (0, 1):
            raise DomainError("arma11 family has fixed order (1,1)")

    @property
    def n_params(self) -> int:
        if self.kind == "iid":
            return 0
        if self.kind == "arma11":
            return 2
        return self.order

    @property
    def label(self) -> str:
        if self.kind == "iid":
            return "Ind"
        if self.kind == "arma11":
            return "ARMA(1,1)"
        return f"{self.kind.upper()}({self.order})"


def family(kind: str, order: int = 0) -> ProcessFamily:
    """Convenience constructor, accepting e.g. ('ar', 1) or ('iid',)."""
    return ProcessFamily(kind, order)


IID = ProcessFamily("iid")


def _ar_coefficients(fam: ProcessFamily, params) -> np.ndarray:
    if fam.kind == "ar":
        return np.asarray(params, dtype=float)
    if fam.kind == "arma11":
        return np.asarray(params[:1], dtype=float)
    return np.zeros(0)


def _ma_coefficients(fam: ProcessFamily, params) -> np.ndarray:
    if fam.kind == "ma":
        return np.asarray(params, dtype=float)
    if fam.kind == "arma11":
        return np.asarray(params[1:], dtype=float)
    return np.zeros(0)


def is_stationary(fam: ProcessFamily, params) -> bool:
    """True when the AR characteristic polynomial has all roots outside the
    unit circle (always true for pure MA / iid)."""
    ar = _ar_coefficients(fam, params)
    if ar.size == 0:
        return True
    # reversed polynomial z^q - a_1 z^{q-1} - ... - a_q has leading
    # coefficient 1 (numerically safe) and reciprocal roots, so the
    # condition becomes: all roots strictly inside the unit circle
    roots = np.roots(np.r_[1.0, -ar])
    return bool(np.all(np.abs(roots) < 1.0 - 1e-12))


@dataclass(frozen=True)
class GridPoint:
    """Candidate eigenvalue tuple: filter parameters plus innovation scale.

    sigma is the innovation standard deviation; sigma**2 is the corresponding
    eigenvalue of the innovation covariance.
    """

    params: tuple[float, ...]
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        for v in self.params:
            if not np.isfinite(v) or abs(v) >= 1.0:
                raise DomainError(
                    f"coefficient {v} outside the open box (-1, 1)")

    @property
    def sigma2(self) -> float:
        return self.sigma**2


def validate_point(fam: ProcessFamily, point: GridPoint) -> None:
    """Reject points whose parameter count or stationarity is wrong."""
    if len(point.params) != fam.n_params:
        raise DomainError(
            f"{fam.label} expects {fam.n_params} parameters, "
            f"got {len(point.params)}")
    if not is_stationary(fam, point.params):
        raise DomainError(f"nonstationary point {point.params} for {fam.label}")


def transfer_coeff(fam: ProcessFamily, point: GridPoint, ell: int) -> float:
    """Lag-ell filter coefficient f_ell; f_0 = 1 for every family."""
    if ell < 0:
        raise DomainError(f"lag must be nonnegative, got {ell}")
    validate_point(fam, point)
    if ell == 0:
        return 1.0
    if fam.kind == "iid":
        return 0.0
    if fam.kind == "ma":
        return point.params[ell - 1] if ell <= fam.order else 0.0
    if fam.kind == "arma11":
        a, b = point.params
        return float(a ** (ell - 1) * (a + b))
    # ar(q): f_l = sum_k a_k f_{l-k}
    return float(transfer_coeffs(fam, point, ell)[ell])


def transfer_coeffs(fam: ProcessFamily, point: GridPoint, max_ell: int) -> np.ndarray:
    """Vector (f_0, ..., f_max_ell) computed by the defining recursion."""
    validate_point(fam, point)
    f = np.zeros(max_ell + 1)
    f[0] = 1.0
    if fam.kind == "iid" or max_ell == 0:
        return f
    if fam.kind == "ma":
        q = fam.order
        upto = min(q, max_ell)
        f[1:upto + 1] = point.params[:upto]
        return f
    if fam.kind == "arma11":
        a, b = point.params
        ells = np.arange(1, max_ell + 1)
        f[1:] = a ** (ells - 1) * (a + b)
        return f
    ar = np.asarray(point.params)
    q = fam.order
    for ell in range(1, max_ell + 1):
        k = min(ell, q)
        f[ell] = np.dot(ar[:k], f[ell - np.arange(1, k + 1)])
    return f


def _coeff_decay_rate(fam: ProcessFamily, params) -> float:
    """Geometric envelope rate of |f_ell| (0 for finite filters)."""
    ar = _ar_coefficients(fam, params)
    if ar.size == 0:
        return 0.0
    roots = np.roots(np.r_[1.0, -ar])
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def _coeff_horizon(fam: ProcessFamily, point: GridPoint) -> int:
    """Lag beyond which the geometric envelope of f_ell drops under the tail
    tolerance."""
    if fam.kind == "iid":
        return 0
    if fam.kind == "ma":
        return fam.order
    r = _coeff_decay_rate(fam, point.params)
    if r <= 0:
        return fam.n_params
    # envelope C r^L < tol with a safety factor for the constant C
    L = int(np.ceil(np.log(COEFF_TAIL_TOL / 10.0) / np.log(r))) + 5
    return max(L, 8)


def transfer_psi(fam: ProcessFamily, point: GridPoint, theta) -> complex | np.ndarray:
    """Frequency response psi(lambda, theta) = sigma * sum_l f_l e^{i l theta},
    evaluated in closed form per family."""
    validate_point(fam, point)
    th = np.asarray(theta, dtype=float)
    e = np.exp(1j * th)
    s = point.sigma
    if fam.kind == "iid":
        out = np.broadcast_to(s + 0j, th.shape).copy()
    elif fam.kind == "ma":
        acc = np.ones_like(e)
        ek = np.ones_like(e)
        for b in point.params:
            ek = ek * e
            acc = acc + b * ek
        out = s * acc
    elif fam.kind == "arma11":
        a, b = point.params
        out = s * (1.0 + b * e) / (1.0 - a * e)
    else:  # ar(q)
        acc = np.ones_like(e)
        ek = np.ones_like(e)
        for a in point.params:
            ek = ek * e
            acc = acc - a * ek
        out = s / acc
    if np.ndim(theta) == 0:
        return complex(out)
    return out


def spectral_h(fam: ProcessFamily, point: GridPoint, theta) -> float | np.ndarray:
    """Unnormalized spectral density h = |psi|^2 (the per-coordinate spectral
    density up to a 1/(2 pi) factor)."""
    psi = transfer_psi(fam, point, theta)
    out = np.abs(psi) ** 2
    if np.ndim(theta) == 0:
        return float(out)
    return out


def autocov(fam: ProcessFamily, point: GridPoint, ell: int) -> float:
    """Lag-ell autocovariance of the coordinate process.

    AR(1) uses the exact closed form sigma^2 a^ell / (1 - a^2); other
    families use the truncated coefficient convolution
    gamma_ell = sigma^2 sum_k f_k f_{k+ell}.
    """
    if ell < 0:
        raise DomainError(f"lag must be nonnegative, got {ell}")
    validate_point(fam, point)
    s2 = point.sigma2
    if fam.kind == "iid":
        return s2 if ell == 0 else 0.0
    if fam.kind == "ar" and fam.order == 1:
        a = point.params[0]
        return s2 * a**ell / (1.0 - a * a)
    L = _coeff_horizon(fam, point) + ell
    f = transfer_coeffs(fam, point, L)
    return float(s2 * np.dot(f[: L + 1 - ell], f[ell:]))


def parseval_gamma0(fam: ProcessFamily, point: GridPoint, quad_points: int) -> float:
    """Numerical check value (1/2pi) * integral of h over [0, 2pi], computed
    by the trapezoid rule; should agree with autocov at lag 0."""
    if quad_points < 64:
        raise DomainError("quad_points must be at least 64")
    th = np.linspace(0.0, 2.0 * np.pi, quad_points + 1)
    h = spectral_h(fam, point, th)
    return float(np.trapezoid(h, th) / (2.0 * np.pi))


@dataclass(frozen=True)
class GridFactor:
    """One marginal of a product-structured joint spectral grid."""

    role: str  # 'coeff' for a filter-coefficient factor, 'sigma2' for the innovation variance
    values: tuple[float, ...]
    weights: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if self.role not in ("coeff", "sigma2"):
            raise DomainError(f"unknown factor role {self.role!r}")
        if len(self.values) != w.size:
            raise DomainError("factor values and weights disagree in length")
        _check_simplex(w)

    @property
    def size(self) -> int:
        return len(self.values)


def _check_simplex(w: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    if np.any(w < -tol):
        raise DomainError(f"negative weight {w.min()}")
    if abs(w.sum() - 1.0) > max(tol, 1e-12 * w.size):
        raise DomainError(f"weights sum to {w.sum()}, not 1")


FULL = "full"
PRODUCT = "product"


@dataclass(frozen=True)
class JointSpectralGrid:
    """Finite mixture of point masses over candidate eigenvalue tuples.

    In PRODUCT structure the atoms are the Cartesian product of per-factor
    grids and the weight of an atom is the product of its factor weights; in
    FULL structure the weights live directly on the expanded atom list.
    Factor metadata is retained in both cases whenever the grid was built
    from factors, so marginal distributions stay well defined.
    """

    family: ProcessFamily
    points: tuple[GridPoint, ...]
    weights: np.ndarray = field(compare=False)
    structure: str = FULL
    factors: tuple[GridFactor, ...] | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "points", tuple(self.points))
        if self.structure not in (FULL, PRODUCT):
            raise DomainError(f"unknown structure {self.structure!r}")
        if len(self.points) != w.size:
            raise DomainError("points and weights disagree in length")
        if self.structure == PRODUCT and self.factors is None:
            raise DomainError("product structure requires factors")
        _check_simplex(w)
        for pt in self.points:
            validate_point(self.family, pt)
        if self.factors is not None:
            expect = int(np.prod([f.size for f in self.factors]))
            if expect != len(self.points):
                raise DomainError("factor sizes do not match the atom count")

    @property
    def J(self) -> int:
        return len(self.points)

    @property
    def factor_sizes(self) -> tuple[int, ...]:
        if self.factors is None:
            raise DomainError("grid has no factor structure")
        return tuple(f.size for f in self.factors)

    def with_weights(self, weights) -> "JointSpectralGrid":
        """Same atoms, new FULL weights."""
        return JointSpectralGrid(self.family, self.points,
                                 np.asarray(weights, dtype=float),
                                 FULL, self.factors)

    def with_factor_weights(self, factor_weights) -> "JointSpectralGrid":
        """Same atoms, new per-factor weights (PRODUCT structure)."""
        if self.factors is None:
            raise DomainError("grid has no factor structure")
        new_factors = tuple(
            GridFactor(f.role, f.values, np.asarray(w, dtype=float))
            for f, w in zip(self.factors, factor_weights))
        full = expand_product_weights([f.weights for f in new_factors])
        return JointSpectralGrid(self.family, self.points, full,
                                 PRODUCT, new_factors)

    def marginals(self) -> list[tuple[str, np.ndarray, np.ndarray]]:
        """Per-factor (role, atom values, marginal weights) implied by the
        current full weights."""
        if self.factors is None:
            raise DomainError("grid has no factor structure")
        shape = self.factor_sizes
        w = self.weights.reshape(shape)
        out = []
        for k, f in enumerate(self.factors):
            axes = tuple(i for i in range(len(shape)) if i != k)
            out.append((f.role, np.asarray(f.values), w.sum(axis=axes)))
        return out


def expand_product_weights(factor_weights) -> np.ndarray:
    """Outer product of factor weight vectors, flattened in C order."""
    full = np.array([1.0])
    for w in factor_weights:
        full = np.multiply.outer(full, np.asarray(w, dtype=float)).ravel()
    return full


def _points_from_factor_values(fam: ProcessFamily, combos) -> list[GridPoint]:
    pts = []
    for combo in combos:
        *coeffs, s2 = combo
        if s2 <= 0:
            raise DomainError(f"innovation variance must be positive, got {s2}")
        pts.append(GridPoint(tuple(coeffs), float(np.sqrt(s2))))
    return pts


def grid_from_factors(fam: ProcessFamily,
                      coeff_factors: list[tuple[list[float], list[float]]],
                      sigma2_values, sigma2_weights,
                      structure: str = PRODUCT) -> JointSpectralGrid:
    """Build a grid from per-coefficient grids plus an innovation-variance
    grid.  coeff_factors is a list of (values, weights), one per filter
    coefficient, ordered as the family's parameter vector; sigma2 values are
    eigenvalues of the innovation covariance (variances, not scales).
    """
    if len(coeff_factors) != fam.n_params:
        raise DomainError(
            f"{fam.label} needs {fam.n_params} coefficient factors, "
            f"got {len(coeff_factors)}")
    factors = [GridFactor("coeff", vals, np.asarray(w, dtype=float))
               for vals, w in coeff_factors]
    factors.append(GridFactor("sigma2", sigma2_values,
                              np.asarray(sigma2_weights, dtype=float)))
    combos = list(itertools.product(*[f.values for f in factors]))
    points = _points_from_factor_values(fam, combos)
    full = expand_product_weights([f.weights for f in factors])
    return JointSpectralGrid(fam, points, full, structure, tuple(factors))


def grid_from_points(fam: ProcessFamily, points, weights) -> JointSpectralGrid:
    """FULL grid over an explicit atom list (no factor structure)."""
    return JointSpectralGrid(fam, tuple(points),
                             np.asarray(weights, dtype=float), FULL, None)


def grid_to_config(grid: JointSpectralGrid) -> dict:
    """JSON-ready description (family, order, per-factor values/weights,
    structure mode)."""
    if grid.factors is None:
        return {
            "family": grid.family.kind,
            "order": grid.family.order,
            "structure": grid.structure,
            "points": [{"params": list(pt.params), "sigma2": pt.sigma2}
                       for pt in grid.points],
            "weights": grid.weights.tolist(),
        }
    return {
        "family": grid.family.kind,
        "order": grid.family.order,
        "structure": grid.structure,
        "factors": [{"role": f.role, "values": list(f.values),
                     "weights": f.weights.tolist()} for f in grid.factors],
        "weights": grid.weights.tolist(),
    }


def grid_from_config(cfg: dict) -> JointSpectralGrid:
    fam = ProcessFamily(cfg["family"], cfg.get("order", 0))
    structure = cfg.get("structure", PRODUCT)
    if "factors" in cfg:
        factors = cfg["factors"]
        coeff = [(f["values"], f["weights"]) for f in factors
                 if f["role"] == "coeff"]
        sig = [f for f in factors if f["role"] == "sigma2"]
        if len(sig) != 1:
            raise DomainError("config needs exactly one sigma2 factor")
        grid = grid_from_factors(fam, coeff, sig[0]["values"],
                                 sig[0]["weights"], structure)
        if "weights" in cfg and structure == FULL:
            grid = grid.with_weights(cfg["weights"])
        return grid
    points = [GridPoint(tuple(p["params"]), float(np.sqrt(p["sigma2"])))
              for p in cfg["points"]]
    return grid_from_points(fam, points, cfg["weights"])


def save_grid(grid: JointSpectralGrid, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(grid_to_config(grid), fh, indent=2)


def load_grid(path) -> JointSpectralGrid:
    with open(path, encoding="utf-8") as fh:
        return grid_from_config(json.load(fh))
