"""Joint type distributions on V x K = [0,1] x (0,1].

Every distribution exposes vectorized closed forms (or exact piecewise formulas
for tabulated meshes) for the joint density g(v,k), the conditional density
g(v|k) and cdf G(v|k), and the marginals g_k and G_v. Objects are immutable
after construction.
"""

import csv
import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats
from scipy.interpolate import RegularGridInterpolator

from leontief_mech.config import DEFAULT_NUMERICS, DISTRIBUTION_FAMILIES, NumericConfig
from leontief_mech.errors import DistributionError, DomainError
from leontief_mech.quadrature import Quadrature

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

LN2 = math.log(2.0)
TABULATED_HEADER = ("v", "k", "density")
# Evaluation points used to compare the two routes to G_v during validation
MARGINAL_CHECK_POINTS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class TypePoint:
    """An agent type: per-unit bundle value ``v`` and good-1/good-2 ratio ``k``."""

    v: float
    k: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.v <= 1.0:
            msg = f"Value v must lie in [0, 1], got {self.v}"
            raise DomainError(msg)
        if not 0.0 < self.k <= 1.0:
            msg = f"Ratio k must lie in (0, 1], got {self.k}"
            raise DomainError(msg)


class Distribution(ABC):
    """Joint distribution of (v, k) with strictly positive density."""

    family: str = "abstract"

    def __init__(self, config: NumericConfig = DEFAULT_NUMERICS) -> None:
        self.config = config
        self.k_floor = config.k_floor

    # -- closed forms, no domain checks -------------------------------------------------
    @abstractmethod
    def joint(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        """g(v, k), broadcast over arrays."""

    @abstractmethod
    def cond_density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        """g(v | k), broadcast over arrays."""

    @abstractmethod
    def cond_cdf(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        """G(v | k), broadcast over arrays."""

    @abstractmethod
    def marginal_k(self, k: ArrayLike) -> FloatArray:
        """g_k(k)."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Spec dictionary accepted by ``build_distribution``."""

    @property
    def k_support(self) -> tuple[float, float]:
        """Range over which ratio integrals are taken."""
        return 0.0, 1.0

    def k_rule(self) -> tuple[FloatArray, FloatArray]:
        """Quadrature nodes and weights for integrals over the ratio support."""
        lo, hi = self.k_support
        return Quadrature.simpson_rule(lo, hi, self.config.quad_nodes_1d)

    def integrate_k(self, func: Callable[[FloatArray], ArrayLike]) -> FloatArray:
        """Integrate ``func(k)`` (last axis indexed by k) over the ratio support."""
        nodes, weights = self.k_rule()
        return np.asarray(np.asarray(func(nodes), dtype=float) @ weights)

    def integrate_v(self, func: Callable[[float], float], upper: float = 1.0) -> float:
        """Accurate 1-D integral over values in [0, upper] (adaptive for closed forms)."""
        return Quadrature.adaptive(func, 0.0, upper)

    def marginal_v_cdf(self, p: ArrayLike) -> FloatArray:
        """G_v(p) = integral over k of g_k(k) G(p|k)."""
        pts = np.asarray(p, dtype=float)
        return self.integrate_k(lambda k: self.marginal_k(k) * self.cond_cdf(pts[..., None], k))

    def marginal_v_density(self, p: ArrayLike) -> FloatArray:
        """g_v(p) = integral over k of g(p, k)."""
        pts = np.asarray(p, dtype=float)
        return self.integrate_k(lambda k: self.joint(pts[..., None], k))

    # -- checked accessors ---------------------------------------------------------------
    def check_domain(self, v: ArrayLike, k: ArrayLike) -> None:
        """Raise DomainError unless v in [0,1] and k in [k_floor, 1]."""
        va = np.asarray(v, dtype=float)
        ka = np.asarray(k, dtype=float)
        if np.any(~np.isfinite(va)) or np.any(va < 0.0) or np.any(va > 1.0):
            msg = f"Value outside [0, 1]: {va[(va < 0) | (va > 1) | ~np.isfinite(va)].ravel()[:3]}"
            raise DomainError(msg)
        if np.any(~np.isfinite(ka)) or np.any(ka < self.k_floor) or np.any(ka > 1.0):
            msg = f"Ratio outside [{self.k_floor}, 1]: {ka[(ka < self.k_floor) | (ka > 1) | ~np.isfinite(ka)].ravel()[:3]}"
            raise DomainError(msg)

    def density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        self.check_domain(v, k)
        return self.joint(v, k)

    def conditional_density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        self.check_domain(v, k)
        return self.cond_density(v, k)

    def conditional_cdf(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        self.check_domain(v, k)
        return self.cond_cdf(v, k)

    def positivity_mesh(self) -> tuple[FloatArray, FloatArray]:
        """Mesh on which strict positivity is checked (values above 0)."""
        n = self.config.quad_nodes_2d
        return np.linspace(0.0, 1.0, n)[1:], np.linspace(self.k_floor, 1.0, n)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"


class UniformDistribution(Distribution):
    """g(v, k) = 1 on the unit square."""

    family = "Uniform"

    def joint(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return np.ones(np.broadcast(np.asarray(v), np.asarray(k)).shape)

    def cond_density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return self.joint(v, k)

    def cond_cdf(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(np.asarray(v), np.asarray(k)).shape).copy()

    def marginal_k(self, k: ArrayLike) -> FloatArray:
        return np.ones(np.shape(k))

    def marginal_v_cdf(self, p: ArrayLike) -> FloatArray:
        return np.asarray(p, dtype=float).copy()

    def marginal_v_density(self, p: ArrayLike) -> FloatArray:
        return np.ones(np.shape(p))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family}


class PowerRatioDistribution(Distribution):
    """g(v, k) = v^k / ln 2, so g(v|k) = (k+1) v^k and G(v|k) = v^(k+1)."""

    family = "Example1"

    def joint(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return np.power(np.asarray(v, dtype=float), np.asarray(k, dtype=float)) / LN2

    def cond_density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        ka = np.asarray(k, dtype=float)
        return (ka + 1.0) * np.power(np.asarray(v, dtype=float), ka)

    def cond_cdf(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return np.power(np.asarray(v, dtype=float), np.asarray(k, dtype=float) + 1.0)

    def marginal_k(self, k: ArrayLike) -> FloatArray:
        return 1.0 / ((np.asarray(k, dtype=float) + 1.0) * LN2)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family}


class LinearRatioDistribution(Distribution):
    """g(v, k) = (2/3)(v + 2k), so g(v|k) = (v + 2k)/(0.5 + 2k)."""

    family = "Example2"

    def joint(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return (2.0 / 3.0) * (np.asarray(v, dtype=float) + 2.0 * np.asarray(k, dtype=float))

    def cond_density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        ka = np.asarray(k, dtype=float)
        return (np.asarray(v, dtype=float) + 2.0 * ka) / (0.5 + 2.0 * ka)

    def cond_cdf(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        va = np.asarray(v, dtype=float)
        ka = np.asarray(k, dtype=float)
        return (0.5 * va * va + 2.0 * ka * va) / (0.5 + 2.0 * ka)

    def marginal_k(self, k: ArrayLike) -> FloatArray:
        return (1.0 + 4.0 * np.asarray(k, dtype=float)) / 3.0

    def marginal_v_cdf(self, p: ArrayLike) -> FloatArray:
        pa = np.asarray(p, dtype=float)
        return pa * pa / 3.0 + 2.0 * pa / 3.0

    def marginal_v_density(self, p: ArrayLike) -> FloatArray:
        return (2.0 / 3.0) * (np.asarray(p, dtype=float) + 1.0)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family}


@dataclass(frozen=True)
class Marginal:
    """A 1-D distribution on [0, 1] backed by a frozen scipy.stats distribution."""

    name: str
    params: dict[str, float] = field(default_factory=dict)
    _frozen: Any = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_frozen", self._build())

    def _build(self) -> Any:
        if self.name == "uniform":
            return stats.uniform(loc=0.0, scale=1.0)
        if self.name == "truncnorm":
            loc = float(self.params.get("loc", 0.5))
            scale = float(self.params.get("scale", 0.25))
            if scale <= 0:
                msg = f"truncnorm scale must be positive, got {scale}"
                raise DistributionError(msg)
            return stats.truncnorm((0.0 - loc) / scale, (1.0 - loc) / scale, loc=loc, scale=scale)
        if self.name == "beta":
            a = float(self.params.get("a", 1.0))
            b = float(self.params.get("b", 1.0))
            if a < 1.0 or b < 1.0:
                msg = f"beta marginal needs a, b >= 1 for a bounded density, got a={a}, b={b}"
                raise DistributionError(msg)
            return stats.beta(a, b)
        msg = f"Unknown marginal family: {self.name!r} (expected uniform, truncnorm or beta)"
        raise DistributionError(msg)

    def pdf(self, x: ArrayLike) -> FloatArray:
        return np.asarray(self._frozen.pdf(np.asarray(x, dtype=float)), dtype=float)

    def cdf(self, x: ArrayLike) -> FloatArray:
        return np.asarray(self._frozen.cdf(np.asarray(x, dtype=float)), dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.name, **self.params}

    @classmethod
    def from_dict(cls, raw: dict[str, Any] | str) -> "Marginal":
        if isinstance(raw, str):
            return cls(raw)
        params = {key: float(value) for key, value in raw.items() if key != "family"}
        return cls(str(raw.get("family", "uniform")), params)


class IndependentProductDistribution(Distribution):
    """g(v, k) = g_v(v) g_k(k) for independent value and ratio marginals."""

    family = "IndependentProduct"

    def __init__(self, value_marginal: Marginal, ratio_marginal: Marginal, config: NumericConfig = DEFAULT_NUMERICS) -> None:
        super().__init__(config)
        self.value_marginal = value_marginal
        self.ratio_marginal = ratio_marginal

    def joint(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return self.value_marginal.pdf(v) * self.ratio_marginal.pdf(k)

    def cond_density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return np.broadcast_to(self.value_marginal.pdf(v), np.broadcast(np.asarray(v), np.asarray(k)).shape).copy()

    def cond_cdf(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return np.broadcast_to(self.value_marginal.cdf(v), np.broadcast(np.asarray(v), np.asarray(k)).shape).copy()

    def marginal_k(self, k: ArrayLike) -> FloatArray:
        return self.ratio_marginal.pdf(k)

    def marginal_v_cdf(self, p: ArrayLike) -> FloatArray:
        return self.value_marginal.cdf(p)

    def marginal_v_density(self, p: ArrayLike) -> FloatArray:
        return self.value_marginal.pdf(p)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "v": self.value_marginal.to_dict(), "k": self.ratio_marginal.to_dict()}


class TabulatedDistribution(Distribution):
    """Density tabulated on a rectangular (v, k) mesh, bilinear between nodes.

    The table is renormalized once at construction. All integrals over v at a
    fixed k are exact for the bilinear interpolant, so conditionals integrate to 1
    up to rounding.
    """

    family = "TabulatedGrid"

    def __init__(
        self,
        v_nodes: ArrayLike,
        k_nodes: ArrayLike,
        values: ArrayLike,
        config: NumericConfig = DEFAULT_NUMERICS,
        source: str | None = None,
    ) -> None:
        super().__init__(config)
        self.v_nodes = np.asarray(v_nodes, dtype=float)
        self.k_nodes = np.asarray(k_nodes, dtype=float)
        table = np.asarray(values, dtype=float)
        self.source = source
        self._check_mesh(table)
        self.k_floor = max(config.k_floor, float(self.k_nodes[0]))

        row_mass = np.trapezoid(table, self.v_nodes, axis=1)
        total = float(np.trapezoid(row_mass, self.k_nodes))
        if not total > 0.0:
            msg = f"Tabulated density has non-positive total mass {total}"
            raise DistributionError(msg)
        if abs(total - 1.0) > config.normalization_tol:
            logger.info("Renormalizing tabulated density (raw mass %.6g)", total)
        self.values = table / total
        self._row_mass = row_mass / total
        self._row_cumulative = Quadrature.cumulative_trapezoid(self.values, self.v_nodes, axis=1)
        self._interp = RegularGridInterpolator((self.k_nodes, self.v_nodes), self.values, method="linear")

    def _check_mesh(self, table: FloatArray) -> None:
        if self.v_nodes.ndim != 1 or self.k_nodes.ndim != 1 or len(self.v_nodes) < 2 or len(self.k_nodes) < 2:
            msg = "Tabulated mesh needs at least two v and two k nodes"
            raise DistributionError(msg)
        if table.shape != (len(self.k_nodes), len(self.v_nodes)):
            msg = f"Density table shape {table.shape} does not match mesh ({len(self.k_nodes)}, {len(self.v_nodes)})"
            raise DistributionError(msg)
        if np.any(np.diff(self.v_nodes) <= 0) or np.any(np.diff(self.k_nodes) <= 0):
            msg = "Tabulated mesh nodes must be strictly ascending"
            raise DistributionError(msg)
        if self.v_nodes[0] != 0.0 or self.v_nodes[-1] != 1.0:
            msg = f"Tabulated v mesh must span [0, 1], got [{self.v_nodes[0]}, {self.v_nodes[-1]}]"
            raise DistributionError(msg)
        if self.k_nodes[0] <= 0.0 or self.k_nodes[-1] != 1.0:
            msg = f"Tabulated k mesh must span [k0, 1] with k0 > 0, got [{self.k_nodes[0]}, {self.k_nodes[-1]}]"
            raise DistributionError(msg)
        if not np.all(np.isfinite(table)):
            msg = "Tabulated density contains non-finite values"
            raise DistributionError(msg)

    @property
    def k_support(self) -> tuple[float, float]:
        return float(self.k_nodes[0]), 1.0

    def k_rule(self) -> tuple[FloatArray, FloatArray]:
        return Quadrature.gauss_rule(self.k_nodes)

    def integrate_v(self, func: Callable[[float], float], upper: float = 1.0) -> float:
        cut = self.v_nodes[self.v_nodes < upper]
        nodes = np.append(cut, upper) if upper > 0.0 else np.asarray([0.0])
        if len(nodes) < 2:
            return 0.0
        vec = np.vectorize(func, otypes=[float])
        return float(Quadrature.gauss_cells(vec, nodes).sum())

    def _k_cell(self, k: FloatArray) -> tuple[NDArray[np.intp], FloatArray]:
        kc = np.clip(k, self.k_nodes[0], self.k_nodes[-1])
        j = np.clip(np.searchsorted(self.k_nodes, kc, side="right") - 1, 0, len(self.k_nodes) - 2)
        t = (kc - self.k_nodes[j]) / (self.k_nodes[j + 1] - self.k_nodes[j])
        return j, t

    def _rows_cumulative(self, rows: NDArray[np.intp], v: FloatArray) -> FloatArray:
        nodes = self.v_nodes
        x = np.clip(v, 0.0, 1.0)
        i = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 2)
        dx = x - nodes[i]
        left = self.values[rows, i]
        slope = (self.values[rows, i + 1] - left) / (nodes[i + 1] - nodes[i])
        return np.asarray(self._row_cumulative[rows, i] + left * dx + 0.5 * slope * dx * dx)

    def joint(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        va, ka = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(k, dtype=float))
        pts = np.stack([np.clip(ka, self.k_nodes[0], 1.0).ravel(), np.clip(va, 0.0, 1.0).ravel()], axis=-1)
        return np.asarray(self._interp(pts).reshape(va.shape))

    def marginal_k(self, k: ArrayLike) -> FloatArray:
        return np.asarray(np.interp(np.asarray(k, dtype=float), self.k_nodes, self._row_mass))

    def cond_density(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        return self.joint(v, k) / self.marginal_k(k)

    def cond_cdf(self, v: ArrayLike, k: ArrayLike) -> FloatArray:
        va, ka = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(k, dtype=float))
        j, t = self._k_cell(ka)
        mass = (1.0 - t) * self._rows_cumulative(j, va) + t * self._rows_cumulative(j + 1, va)
        return np.asarray(mass / self.marginal_k(ka))

    def positivity_mesh(self) -> tuple[FloatArray, FloatArray]:
        return self.v_nodes, self.k_nodes

    def mesh_notes(self) -> list[str]:
        """Non-fatal mesh irregularities (uneven spacing)."""
        notes = []
        for axis, nodes in (("v", self.v_nodes), ("k", self.k_nodes)):
            steps = np.diff(nodes)
            if np.ptp(steps) > 1e-9 * float(steps.mean()):
                notes.append(f"{axis} mesh is unevenly spaced (steps {steps.min():.6g}..{steps.max():.6g})")
        return notes

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "path": self.source}

    @classmethod
    def from_csv(cls, path: Path, config: NumericConfig = DEFAULT_NUMERICS) -> "TabulatedDistribution":
        """Load a ``v,k,density`` CSV on a rectangular mesh."""
        if not path.exists():
            msg = f"Tabulated density file not found: {path}"
            raise FileNotFoundError(msg)
        with path.open(newline="") as handle:
            reader = csv.reader(handle)
            header = tuple(cell.strip() for cell in next(reader, []))
            if header != TABULATED_HEADER:
                msg = f"Expected CSV header {','.join(TABULATED_HEADER)}, got {','.join(header)}"
                raise DistributionError(msg)
            try:
                rows = [tuple(float(cell) for cell in row) for row in reader if row]
            except ValueError as e:
                msg = f"Non-numeric entry in {path}: {e}"
                raise DistributionError(msg) from e
        if any(len(row) != 3 for row in rows):
            msg = f"Every row of {path} must have three columns"
            raise DistributionError(msg)
        data = np.asarray(rows, dtype=float)
        v_nodes = np.unique(data[:, 0])
        k_nodes = np.unique(data[:, 1])
        if len(data) != len(v_nodes) * len(k_nodes):
            msg = f"Mesh in {path} is not rectangular: {len(data)} rows for {len(v_nodes)}x{len(k_nodes)} nodes"
            raise DistributionError(msg)
        table = np.full((len(k_nodes), len(v_nodes)), np.nan)
        table[np.searchsorted(k_nodes, data[:, 1]), np.searchsorted(v_nodes, data[:, 0])] = data[:, 2]
        if np.any(np.isnan(table)):
            msg = f"Mesh in {path} has duplicate or missing (v, k) cells"
            raise DistributionError(msg)
        return cls(v_nodes, k_nodes, table, config=config, source=str(path))


BUILTIN_FAMILIES: dict[str, type[Distribution]] = {
    UniformDistribution.family: UniformDistribution,
    PowerRatioDistribution.family: PowerRatioDistribution,
    LinearRatioDistribution.family: LinearRatioDistribution,
}
FAMILIES = DISTRIBUTION_FAMILIES


def build_distribution(
    spec: dict[str, Any], config: NumericConfig = DEFAULT_NUMERICS, base_dir: Path | None = None
) -> Distribution:
    """Build a distribution from its config spec (``{"family": ..., ...}``)."""
    family = spec.get("family")
    if family in BUILTIN_FAMILIES:
        return BUILTIN_FAMILIES[family](config)
    if family == IndependentProductDistribution.family:
        return IndependentProductDistribution(
            Marginal.from_dict(spec.get("v", "uniform")), Marginal.from_dict(spec.get("k", "uniform")), config
        )
    if family == TabulatedDistribution.family:
        if "path" not in spec:
            msg = "TabulatedGrid distribution needs a 'path' to a v,k,density CSV"
            raise DistributionError(msg)
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return TabulatedDistribution.from_csv(path, config)
    msg = f"Unknown distribution family {family!r}; expected one of {', '.join(FAMILIES)}"
    raise DistributionError(msg)


def density(d: Distribution, t: TypePoint) -> float:
    """g(v, k) at a single type."""
    return float(d.density(t.v, t.k))


def conditional_cdf(d: Distribution, v: float, k: float) -> float:
    """G(v | k) at a single point."""
    return float(d.conditional_cdf(v, k))


class Marginals(NamedTuple):
    """Marginal accessors: the value cdf G_v and the ratio density g_k."""

    cdf_v: Callable[[ArrayLike], FloatArray]
    density_k: Callable[[ArrayLike], FloatArray]


def marginals(d: Distribution) -> Marginals:
    return Marginals(d.marginal_v_cdf, d.marginal_k)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of ``validate``; failures are reported, never raised."""

    family: str
    positivity_failures: list[tuple[float, float, float]]
    positivity_failure_count: int
    joint_normalization_error: float
    conditional_normalization_error: float
    conditional_worst_k: float
    marginal_k_error: float
    marginal_v_error: float
    mesh_notes: list[str]
    normalization_tol: float
    marginal_tol: float

    @property
    def passed(self) -> bool:
        return (
            self.positivity_failure_count == 0
            and self.joint_normalization_error <= self.normalization_tol
            and self.conditional_normalization_error <= self.normalization_tol
            and self.marginal_k_error <= self.marginal_tol
            and self.marginal_v_error <= self.marginal_tol
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "passed": self.passed,
            "positivity_failures": [list(item) for item in self.positivity_failures],
            "positivity_failure_count": self.positivity_failure_count,
            "joint_normalization_error": self.joint_normalization_error,
            "conditional_normalization_error": self.conditional_normalization_error,
            "conditional_worst_k": self.conditional_worst_k,
            "marginal_k_error": self.marginal_k_error,
            "marginal_v_error": self.marginal_v_error,
            "mesh_notes": list(self.mesh_notes),
        }


def validate(d: Distribution) -> ValidationReport:
    """Check positivity, normalization of joint and conditionals, and marginal consistency."""
    config = d.config
    v_mesh, k_mesh = d.positivity_mesh()
    grid = d.joint(v_mesh[None, :], k_mesh[:, None])
    bad_k, bad_v = np.nonzero(~(grid > 0.0))
    failures = [(float(v_mesh[i]), float(k_mesh[j]), float(grid[j, i])) for j, i in zip(bad_k, bad_v, strict=True)]

    k_lo, _ = d.k_support
    cond_k = np.linspace(max(d.k_floor, k_lo), 1.0, config.condition_k_nodes)
    cond_errors = np.asarray(
        [abs(d.integrate_v(lambda v, kk=kk: float(d.cond_density(v, kk))) - 1.0) for kk in cond_k]
    )
    worst = int(np.argmax(cond_errors))

    row_mass = d.integrate_k(lambda k: np.asarray([d.integrate_v(lambda v, kk=kk: float(d.joint(v, kk))) for kk in k]))
    joint_error = abs(float(row_mass) - 1.0)
    marginal_k_error = abs(float(d.integrate_k(d.marginal_k)) - 1.0)

    marginal_v_error = 0.0
    for p in MARGINAL_CHECK_POINTS:
        via_marginal = float(d.marginal_v_cdf(p))
        via_joint = float(
            d.integrate_k(
                lambda k, p=p: np.asarray([d.integrate_v(lambda v, kk=kk: float(d.joint(v, kk)), upper=p) for kk in k])
            )
        )
        marginal_v_error = max(marginal_v_error, abs(via_marginal - via_joint))

    notes = d.mesh_notes() if isinstance(d, TabulatedDistribution) else []
    report = ValidationReport(
        family=d.family,
        positivity_failures=failures[: config.max_witnesses],
        positivity_failure_count=len(failures),
        joint_normalization_error=joint_error,
        conditional_normalization_error=float(cond_errors[worst]),
        conditional_worst_k=float(cond_k[worst]),
        marginal_k_error=marginal_k_error,
        marginal_v_error=marginal_v_error,
        mesh_notes=notes,
        normalization_tol=config.normalization_tol,
        marginal_tol=config.marginal_tol,
    )
    logger.info("Validated %s: passed=%s", d.family, report.passed)
    return report
