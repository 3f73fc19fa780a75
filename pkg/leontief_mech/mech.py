"""Mechanisms: outcomes, Leontief utility, the named price mechanisms and grid mechanisms."""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from leontief_mech.config import DEFAULT_NUMERICS, NumericConfig
from leontief_mech.curves import ThresholdCurve
from leontief_mech.dist import TypePoint
from leontief_mech.errors import DomainError, InvalidCurveError, MechanismError, MonotonicityError
from leontief_mech.quadrature import Quadrature

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

POSTED_PRICE = "posted_price"
RATIO_DEPENDENT = "ratio_dependent"
GRID = "grid"
RAW_GRID = "raw_grid"
GRID_CSV_HEADER = ("v", "k", "f1", "f2", "p")
PAYMENT_WARN_BOUND = 1.0


@dataclass(frozen=True)
class Outcome:
    """A consumption bundle (a1, a2) and the transfer t paid by the agent."""

    a1: float
    a2: float
    t: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.a1 <= 1.0 and 0.0 <= self.a2 <= 1.0):
            msg = f"Quantities must lie in [0, 1], got a1={self.a1}, a2={self.a2}"
            raise DomainError(msg)


NULL_OUTCOME = Outcome(0.0, 0.0, 0.0)


def utility(t: TypePoint, o: Outcome) -> float:
    """v min(a1/k, a2) - t."""
    return t.v * min(o.a1 / t.k, o.a2) - o.t


def utility_values(v: ArrayLike, k: ArrayLike, a1: ArrayLike, a2: ArrayLike, t: ArrayLike) -> FloatArray:
    """Vectorized Leontief utility, broadcast over all arguments."""
    return np.asarray(np.asarray(v) * np.minimum(np.asarray(a1) / np.asarray(k), np.asarray(a2)) - np.asarray(t))


@dataclass(frozen=True, eq=False)
class Mesh:
    """Rectangular type mesh: ``v`` values by ``k`` ratios, arrays indexed [k, v]."""

    v: FloatArray
    k: FloatArray

    def __post_init__(self) -> None:
        v = np.asarray(self.v, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if v.ndim != 1 or k.ndim != 1 or len(v) < 2 or len(k) < 1:
            msg = "Mesh needs at least two v nodes and one k node"
            raise DomainError(msg)
        if np.any(np.diff(v) <= 0) or np.any(np.diff(k) <= 0):
            msg = "Mesh nodes must be strictly ascending"
            raise DomainError(msg)
        if v[0] < 0.0 or v[-1] > 1.0 or k[0] <= 0.0 or k[-1] > 1.0:
            msg = "Mesh must lie inside [0, 1] x (0, 1]"
            raise DomainError(msg)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "k", k)

    @classmethod
    def regular(cls, n: int, k_floor: float = DEFAULT_NUMERICS.k_floor, nk: int | None = None) -> "Mesh":
        """``n`` values on [0, 1] and ``nk`` (default ``n``) ratios on [k_floor, 1]."""
        return cls(np.linspace(0.0, 1.0, n), np.linspace(k_floor, 1.0, nk or n))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.k), len(self.v)

    def same_as(self, other: "Mesh") -> bool:
        return bool(np.array_equal(self.v, other.v) and np.array_equal(self.k, other.k))


class Mechanism(ABC):
    """A direct mechanism: type (v, k) -> outcome (a1, a2, t)."""

    kind: str = "abstract"

    @abstractmethod
    def outcome_grid(self, mesh: Mesh) -> tuple[FloatArray, FloatArray, FloatArray]:
        """(a1, a2, t) arrays of shape (len(k), len(v)) at every mesh type."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """JSON-ready description with a ``kind`` tag."""

    def default_mesh(self, n: int, k_floor: float = DEFAULT_NUMERICS.k_floor) -> Mesh:
        return Mesh.regular(n, k_floor)

    def outcome(self, t: TypePoint) -> Outcome:
        a1, a2, p = self.outcome_grid(Mesh(np.asarray([0.0, t.v]) if t.v > 0 else np.asarray([0.0, 1.0]), np.asarray([t.k])))
        col = 1 if t.v > 0 else 0
        return Outcome(float(a1[0, col]), float(a2[0, col]), float(p[0, col]))

    def truthful_utility(self, mesh: Mesh) -> FloatArray:
        a1, a2, p = self.outcome_grid(mesh)
        return utility_values(mesh.v[None, :], mesh.k[:, None], a1, a2, p)

    def zero_type_payments(self, mesh: Mesh) -> FloatArray | None:
        """p(0, k) per mesh ratio, or None when v = 0 is not on the mesh."""
        if mesh.v[0] != 0.0:
            return None
        return self.outcome_grid(mesh)[2][:, 0]


class ThresholdPriceMechanism(Mechanism):
    """Sell the bundle (k, 1) at price ``price(k)`` to types with v > price(k)."""

    @abstractmethod
    def price(self, k: ArrayLike) -> FloatArray:
        """Threshold price for each ratio."""

    def outcome_grid(self, mesh: Mesh) -> tuple[FloatArray, FloatArray, FloatArray]:
        prices = self.price(mesh.k)[:, None]
        sold = mesh.v[None, :] > prices
        a2 = sold.astype(float)
        return a2 * mesh.k[:, None], a2, np.where(sold, prices, 0.0)

    def to_grid(self, mesh: Mesh) -> "GridMechanism":
        """Exact step-row grid representation on ``mesh`` with p(0,1) = 0."""
        return GridMechanism.from_thresholds(mesh.v, mesh.k, self.price(mesh.k))


@dataclass(frozen=True, eq=False)
class PostedPrice(ThresholdPriceMechanism):
    rho_star: float
    kind: str = field(default=POSTED_PRICE, init=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho_star <= 1.0:
            msg = f"Posted price must lie in [0, 1], got {self.rho_star}"
            raise DomainError(msg)

    def price(self, k: ArrayLike) -> FloatArray:
        return np.full(np.shape(k), float(self.rho_star))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "rho_star": float(self.rho_star)}


@dataclass(frozen=True, eq=False)
class RatioDependentPrice(ThresholdPriceMechanism):
    """Price psi(k) per reported ratio. Build through ``make_ratio_dependent`` to validate psi."""

    psi: ThresholdCurve
    kind: str = field(default=RATIO_DEPENDENT, init=False)

    def price(self, k: ArrayLike) -> FloatArray:
        return self.psi(k)

    @property
    def is_posted_price(self) -> bool:
        return self.psi.is_constant(DEFAULT_NUMERICS.curve_tol)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "psi": self.psi.to_rows()}


def make_ratio_dependent(psi: ThresholdCurve, tol: float = DEFAULT_NUMERICS.curve_tol) -> RatioDependentPrice:
    """Validate psi nondecreasing with (k/k') psi(k') <= psi(k), then wrap it as a mechanism."""
    values, ks = psi.values, psi.k
    outside = np.flatnonzero((values < -tol) | (values > 1.0 + tol))
    if len(outside):
        k0 = float(ks[outside[0]])
        msg = f"Price {values[outside[0]]:.6g} outside [0, 1]"
        raise InvalidCurveError(msg, (k0, k0))
    i, j = np.triu_indices(len(psi), k=1)
    falling = values[i] - values[j]
    scaled = (ks[i] / ks[j]) * values[j] - values[i]
    for violation, label in ((falling, "psi decreases"), (scaled, "(k/k') psi(k') exceeds psi(k)")):
        bad = np.flatnonzero(violation > tol)
        if len(bad):
            worst = bad[np.argmax(violation[bad])]
            msg = f"{label} by {violation[worst]:.3g}"
            raise InvalidCurveError(msg, (float(ks[i[worst]]), float(ks[j[worst]])))
    return RatioDependentPrice(psi)


def _check_mesh_arrays(v_nodes: FloatArray, k_nodes: FloatArray, *grids: FloatArray) -> None:
    Mesh(v_nodes, k_nodes)
    for grid in grids:
        if grid.shape != (len(k_nodes), len(v_nodes)):
            msg = f"Grid shape {grid.shape} does not match mesh ({len(k_nodes)}, {len(v_nodes)})"
            raise MechanismError(msg)
        if not np.all(np.isfinite(grid)):
            msg = "Grid mechanism values must be finite"
            raise MechanismError(msg)


def _warn_large_payments(p: FloatArray) -> None:
    if np.any(np.abs(p) > PAYMENT_WARN_BOUND):
        logger.warning("Stored payments exceed the value bound: max |p| = %.6g", float(np.abs(p).max()))


@dataclass(frozen=True, eq=False)
class GridMechanism(Mechanism):
    """Non-wasteful mechanism on a mesh: stores f2 and p, with f1 = k f2.

    Rows are either steps (``thresholds`` given: f2 = 1{v > rho_j}) or
    piecewise-linear between v nodes. Cumulative allocations are exact for both.
    Step-row payments interpolate separately on each side of the jump.
    """

    v_nodes: FloatArray
    k_nodes: FloatArray
    f2: FloatArray
    p: FloatArray
    thresholds: FloatArray | None = None
    kind: str = field(default=GRID, init=False)
    cumulative: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("v_nodes", "k_nodes", "f2", "p"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        _check_mesh_arrays(self.v_nodes, self.k_nodes, self.f2, self.p)
        if np.any(self.f2 < 0.0) or np.any(self.f2 > 1.0):
            msg = "Allocations f2 must lie in [0, 1]"
            raise MechanismError(msg)
        if self.thresholds is None:
            cumulative = Quadrature.cumulative_trapezoid(self.f2, self.v_nodes, axis=1)
        else:
            rho = np.asarray(self.thresholds, dtype=float)
            object.__setattr__(self, "thresholds", rho)
            if rho.shape != self.k_nodes.shape:
                msg = f"Need one threshold per ratio row, got {rho.shape}"
                raise MechanismError(msg)
            if not np.array_equal(self.f2, (self.v_nodes[None, :] > rho[:, None]).astype(float)):
                msg = "Step rows must satisfy f2 = 1{v > threshold}"
                raise MechanismError(msg)
            cumulative = np.maximum(0.0, self.v_nodes[None, :] - rho[:, None])
        object.__setattr__(self, "cumulative", cumulative)
        _warn_large_payments(self.p)

    @classmethod
    def from_thresholds(
        cls, v_nodes: ArrayLike, k_nodes: ArrayLike, thresholds: ArrayLike, p00: float = 0.0
    ) -> "GridMechanism":
        """Step mechanism: f2 = 1{v > rho_j}, p = p00 + rho_j above the threshold."""
        v = np.asarray(v_nodes, dtype=float)
        rho = np.asarray(thresholds, dtype=float)
        f2 = (v[None, :] > rho[:, None]).astype(float)
        return cls(v, np.asarray(k_nodes, dtype=float), f2, p00 + f2 * rho[:, None], rho)

    @property
    def mesh(self) -> Mesh:
        return Mesh(self.v_nodes, self.k_nodes)

    @property
    def f1(self) -> FloatArray:
        return np.asarray(self.k_nodes[:, None] * self.f2)

    @property
    def p00(self) -> float:
        """p(0, 1); requires v = 0 and k = 1 on the mesh."""
        if self.v_nodes[0] != 0.0 or self.k_nodes[-1] != 1.0:
            msg = "p(0,1) is only defined when the mesh contains v = 0 and k = 1"
            raise MechanismError(msg)
        return float(self.p[-1, 0])

    @property
    def is_step(self) -> bool:
        return self.thresholds is not None

    def default_mesh(self, n: int, k_floor: float = DEFAULT_NUMERICS.k_floor) -> Mesh:
        return self.mesh

    def outcome_grid(self, mesh: Mesh) -> tuple[FloatArray, FloatArray, FloatArray]:
        if not mesh.same_as(self.mesh):
            msg = "Grid mechanisms are only defined on their own mesh"
            raise MechanismError(msg)
        return self.f1, self.f2, self.p

    def truthful_utility(self, mesh: Mesh) -> FloatArray:
        self.outcome_grid(mesh)
        return np.asarray(mesh.v[None, :] * self.f2 - self.p)

    def outcome(self, t: TypePoint) -> Outcome:
        i = np.flatnonzero(self.v_nodes == t.v)
        j = np.flatnonzero(self.k_nodes == t.k)
        if not len(i) or not len(j):
            msg = f"Type ({t.v}, {t.k}) is not a mesh node"
            raise DomainError(msg)
        return Outcome(float(self.f1[j[0], i[0]]), float(self.f2[j[0], i[0]]), float(self.p[j[0], i[0]]))

    def cumulative_at(self, row: int, at: ArrayLike) -> FloatArray:
        """Exact integral from 0 to ``at`` of f2(., k_row)."""
        x = np.asarray(at, dtype=float)
        if self.thresholds is not None:
            return np.asarray(np.maximum(0.0, np.clip(x, 0.0, self.v_nodes[-1]) - self.thresholds[row]))
        return Quadrature.piecewise_linear_cumulative(self.v_nodes, self.f2[row], self.cumulative[row], x)

    def total_allocation(self) -> FloatArray:
        """Integral of f2 over the v mesh, one value per ratio row."""
        return np.asarray(self.cumulative[:, -1])

    def grid_rows(self) -> list[tuple[float, float, float, float, float]]:
        f1 = self.f1
        return [
            (float(v), float(k), float(f1[j, i]), float(self.f2[j, i]), float(self.p[j, i]))
            for j, k in enumerate(self.k_nodes)
            for i, v in enumerate(self.v_nodes)
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "v_nodes": self.v_nodes.tolist(),
            "k_nodes": self.k_nodes.tolist(),
            "f2": self.f2.tolist(),
            "p": self.p.tolist(),
            "thresholds": None if self.thresholds is None else self.thresholds.tolist(),
        }


@dataclass(frozen=True, eq=False)
class RawGridMechanism(Mechanism):
    """Mesh mechanism with independent f1, f2 and p (possibly wasteful)."""

    v_nodes: FloatArray
    k_nodes: FloatArray
    f1: FloatArray
    f2: FloatArray
    p: FloatArray
    kind: str = field(default=RAW_GRID, init=False)

    def __post_init__(self) -> None:
        for name in ("v_nodes", "k_nodes", "f1", "f2", "p"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        _check_mesh_arrays(self.v_nodes, self.k_nodes, self.f1, self.f2, self.p)
        if np.any((self.f1 < 0.0) | (self.f1 > 1.0) | (self.f2 < 0.0) | (self.f2 > 1.0)):
            msg = "Allocations must lie in [0, 1]"
            raise MechanismError(msg)
        _warn_large_payments(self.p)

    @property
    def mesh(self) -> Mesh:
        return Mesh(self.v_nodes, self.k_nodes)

    def default_mesh(self, n: int, k_floor: float = DEFAULT_NUMERICS.k_floor) -> Mesh:
        return self.mesh

    def outcome_grid(self, mesh: Mesh) -> tuple[FloatArray, FloatArray, FloatArray]:
        if not mesh.same_as(self.mesh):
            msg = "Grid mechanisms are only defined on their own mesh"
            raise MechanismError(msg)
        return self.f1, self.f2, self.p

    def grid_rows(self) -> list[tuple[float, float, float, float, float]]:
        return [
            (float(v), float(k), float(self.f1[j, i]), float(self.f2[j, i]), float(self.p[j, i]))
            for j, k in enumerate(self.k_nodes)
            for i, v in enumerate(self.v_nodes)
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "v_nodes": self.v_nodes.tolist(),
            "k_nodes": self.k_nodes.tolist(),
            "f1": self.f1.tolist(),
            "f2": self.f2.tolist(),
            "p": self.p.tolist(),
        }


def payment_from_allocation(
    v_nodes: ArrayLike,
    f2: ArrayLike,
    p00: float = 0.0,
    thresholds: ArrayLike | None = None,
    config: NumericConfig = DEFAULT_NUMERICS,
) -> FloatArray:
    """p(v,k) = p00 + v f2(v,k) - integral_0^v f2(t,k) dt on the mesh.

    Rows are piecewise-linear (trapezoid cumulative) unless ``thresholds`` marks
    them as steps at rho_j.
    """
    v = np.asarray(v_nodes, dtype=float)
    alloc = np.asarray(f2, dtype=float)
    drops = np.diff(alloc, axis=1)
    if np.any(drops < -config.curve_tol):
        j, i = np.unravel_index(int(np.argmin(drops)), drops.shape)
        msg = f"Allocation decreases in v at row {j} between v={v[i]:.6g} and v={v[i + 1]:.6g}"
        raise MonotonicityError(msg)
    if thresholds is None:
        cumulative = Quadrature.cumulative_trapezoid(alloc, v, axis=1)
    else:
        cumulative = np.maximum(0.0, v[None, :] - np.asarray(thresholds, dtype=float)[:, None])
    return np.asarray(p00 + v[None, :] * alloc - cumulative)


def mechanism_from_allocation(
    v_nodes: ArrayLike, k_nodes: ArrayLike, f2: ArrayLike, p00: float = 0.0, config: NumericConfig = DEFAULT_NUMERICS
) -> GridMechanism:
    """Grid mechanism with piecewise-linear rows and payments from the payment identity."""
    p = payment_from_allocation(v_nodes, f2, p00, config=config)
    return GridMechanism(np.asarray(v_nodes, dtype=float), np.asarray(k_nodes, dtype=float), np.asarray(f2, dtype=float), p)


def non_wasteful_reduction(m: RawGridMechanism) -> GridMechanism:
    """Replace (f1, f2) by (k f2', f2') with f2' = min(f1/k, f2); payments unchanged."""
    reduced = np.minimum(m.f1 / m.k_nodes[:, None], m.f2)
    return GridMechanism(m.v_nodes, m.k_nodes, reduced, m.p.copy())


def mechanism_from_dict(raw: dict[str, Any]) -> Mechanism:
    """Rebuild a mechanism from ``to_dict`` output.

    Ratio-dependent curves are not validated here, so hand-edited files reach the
    IC checkers intact.
    """
    kind = raw.get("kind")
    try:
        if kind == POSTED_PRICE:
            return PostedPrice(float(raw["rho_star"]))
        if kind == RATIO_DEPENDENT:
            return RatioDependentPrice(ThresholdCurve.from_rows(raw["psi"], name="psi"))
        if kind == GRID:
            thresholds = raw.get("thresholds")
            return GridMechanism(
                np.asarray(raw["v_nodes"], dtype=float),
                np.asarray(raw["k_nodes"], dtype=float),
                np.asarray(raw["f2"], dtype=float),
                np.asarray(raw["p"], dtype=float),
                None if thresholds is None else np.asarray(thresholds, dtype=float),
            )
        if kind == RAW_GRID:
            return RawGridMechanism(
                *(np.asarray(raw[key], dtype=float) for key in ("v_nodes", "k_nodes", "f1", "f2", "p"))
            )
    except KeyError as e:
        msg = f"Mechanism of kind {kind!r} is missing field {e}"
        raise MechanismError(msg) from e
    msg = f"Unknown mechanism kind {kind!r}; expected one of {POSTED_PRICE}, {RATIO_DEPENDENT}, {GRID}, {RAW_GRID}"
    raise MechanismError(msg)


def load_mechanism(path: Path) -> Mechanism:
    if not path.exists():
        msg = f"Mechanism file not found: {path}"
        raise FileNotFoundError(msg)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        msg = f"Invalid mechanism JSON in {path}: {e.msg}"
        raise MechanismError(msg) from e
    if not isinstance(raw, dict):
        msg = f"Mechanism JSON in {path} must be an object"
        raise MechanismError(msg)
    return mechanism_from_dict(raw)
