"""Conditional virtual valuations, their zero curve, and the A / B / B' verdicts."""

import logging
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from leontief_mech.curves import ThresholdCurve
from leontief_mech.dist import Distribution, TabulatedDistribution, TypePoint
from leontief_mech.errors import ConditionNotMetError, DegenerateDensityError, NonUniqueRootError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ZeroCurve = ThresholdCurve

ZERO_CURVE_NAME = "phi_inv_zero"
CONDITION_A = "A"
CONDITION_B = "B"
CONDITION_B_PRIME = "Bprime"
REGULARITY = "Regularity"


class Witness(NamedTuple):
    """Where a condition fails and by how much."""

    location: tuple[float, ...]
    magnitude: float


@dataclass(frozen=True)
class ConditionVerdict:
    """Result of a condition check; ``holds`` is true iff there are no witnesses."""

    condition: str
    witnesses: list[Witness] = field(default_factory=list)
    margin: float = float("inf")
    violation_count: int = 0

    @property
    def holds(self) -> bool:
        return not self.witnesses

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "holds": self.holds,
            "margin": self.margin,
            "violation_count": self.violation_count,
            "witnesses": [{"location": list(w.location), "magnitude": w.magnitude} for w in self.witnesses],
        }


def revenue_curve(d: Distribution, v: ArrayLike, k: ArrayLike) -> FloatArray:
    """W(v, k) = v (1 - G(v|k)): revenue of posting price v to ratio k."""
    va = np.asarray(v, dtype=float)
    return np.asarray(va * (1.0 - d.cond_cdf(va, k)))


def virtual_density(d: Distribution, v: ArrayLike, k: ArrayLike) -> FloatArray:
    """phi(v,k) g(v|k) = v g(v|k) - (1 - G(v|k)), the negative v-derivative of W."""
    va = np.asarray(v, dtype=float)
    return np.asarray(va * d.cond_density(va, k) - (1.0 - d.cond_cdf(va, k)))


def phi_values(d: Distribution, v: ArrayLike, k: ArrayLike) -> FloatArray:
    """Vectorized phi(v,k) without domain checks; -inf where the density vanishes."""
    va, ka = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(k, dtype=float))
    g = d.cond_density(va, ka)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = va - (1.0 - d.cond_cdf(va, ka)) / g
    return np.asarray(np.where(va >= 1.0, 1.0, out))


def phi(d: Distribution, t: TypePoint) -> float:
    """phi(v,k) = v - (1 - G(v|k)) / g(v|k)."""
    d.check_domain(t.v, t.k)
    if isinstance(d, TabulatedDistribution) and not float(d.cond_density(t.v, t.k)) > 0.0:
        msg = f"Conditional density vanishes at (v={t.v}, k={t.k})"
        raise DegenerateDensityError(msg)
    return float(phi_values(d, t.v, t.k))


def _sign_scan_nodes(d: Distribution) -> FloatArray:
    count = round(1.0 / d.config.sign_scan_step) + 1
    return np.linspace(0.0, 1.0, max(count, 3))


def phi_zero(d: Distribution, k: float) -> float:
    """The unique v in (0,1) with phi(v,k) = 0.

    Roots are bracketed from a sign scan of phi*g and refined by bisection. The
    product is used instead of phi so the bracket end v=0 stays finite.
    """
    d.check_domain(0.0, k)
    nodes = _sign_scan_nodes(d)
    h = virtual_density(d, nodes, k)
    crossings = np.flatnonzero(np.diff((h >= 0.0).astype(np.int8)) != 0)
    if len(crossings) != 1:
        locations = ", ".join(f"{nodes[i]:.4g}" for i in crossings[:5])
        msg = f"phi(., k={k:.6g}) changes sign {len(crossings)} times (near v = {locations})"
        raise NonUniqueRootError(msg)
    i = int(crossings[0])
    if h[i + 1] == 0.0:
        root = float(nodes[i + 1])
    else:
        root = float(
            optimize.bisect(lambda v: float(virtual_density(d, v, k)), nodes[i], nodes[i + 1], xtol=d.config.root_tol)
        )
    if isinstance(d, TabulatedDistribution) and not float(d.cond_density(root, k)) > 0.0:
        msg = f"Conditional density vanishes at the zero of phi (v={root:.6g}, k={k:.6g})"
        raise DegenerateDensityError(msg)
    return root


def condition_k_grid(d: Distribution, nodes: int | None = None) -> FloatArray:
    """Equally spaced ratios on [k_floor, 1] used by the condition checks."""
    count = nodes or d.config.condition_k_nodes
    return np.linspace(max(d.k_floor, d.k_support[0]), 1.0, count)


def zero_curve(d: Distribution, k: ArrayLike | None = None) -> ThresholdCurve:
    """phi_k^{-1}(0) sampled on ``k`` (default: the condition grid)."""
    grid = condition_k_grid(d) if k is None else np.asarray(k, dtype=float)
    values = np.asarray([phi_zero(d, float(kk)) for kk in grid])
    logger.debug("Zero curve on %d ratios: [%.6g, %.6g]", len(grid), values.min(), values.max())
    return ThresholdCurve(grid, values, ZERO_CURVE_NAME)


def _witnesses(locations: list[tuple[float, ...]], magnitudes: FloatArray, limit: int) -> list[Witness]:
    order = np.argsort(-magnitudes, kind="stable")[:limit]
    return [Witness(tuple(float(x) for x in locations[i]), float(magnitudes[i])) for i in order]


def check_condition_a(d: Distribution, grid: int | None = None) -> ConditionVerdict:
    """phi(v,k) g(v|k) strictly increasing in v at every ratio of the condition grid.

    Args:
        d: Distribution to classify.
        grid: Number of v nodes (defaults to ``condition_v_nodes``).

    Returns:
        Verdict whose margin is the smallest consecutive difference seen.
    """
    config = d.config
    v = np.linspace(0.0, 1.0, grid or config.condition_v_nodes)
    k = condition_k_grid(d)
    h = virtual_density(d, v[None, :], k[:, None])
    steps = np.diff(h, axis=1)
    bad_k, bad_v = np.nonzero(~(steps > config.strict_eps))
    locations = [(float(v[i]), float(v[i + 1]), float(k[j])) for j, i in zip(bad_k, bad_v, strict=True)]
    magnitudes = config.strict_eps - steps[bad_k, bad_v]
    margin = float(np.nanmin(steps)) if np.isfinite(steps).any() else float("-inf")
    verdict = ConditionVerdict(
        CONDITION_A, _witnesses(locations, np.nan_to_num(magnitudes, nan=np.inf), config.max_witnesses), margin, len(locations)
    )
    logger.info("Condition A for %s: holds=%s (margin %.3g)", d.family, verdict.holds, margin)
    return verdict


def _require_condition_a(d: Distribution, condition_a: ConditionVerdict | None) -> None:
    verdict = condition_a if condition_a is not None else check_condition_a(d)
    if not verdict.holds:
        raise ConditionNotMetError(verdict)


def _pairs(curve: ThresholdCurve) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    return np.triu_indices(len(curve), k=1)


def check_condition_b(
    d: Distribution, curve: ThresholdCurve | None = None, condition_a: ConditionVerdict | None = None
) -> ConditionVerdict:
    """(k/k') z(k') <= z(k) <= z(k') for every pair k < k' of the zero curve z."""
    _require_condition_a(d, condition_a)
    z = curve if curve is not None else zero_curve(d)
    i, j = _pairs(z)
    rising = z.values[j] - z.values[i]
    scaled = z.values[i] - (z.k[i] / z.k[j]) * z.values[j]
    violation = np.maximum(-rising, -scaled)
    bad = np.flatnonzero(violation > d.config.strict_eps)
    locations = [(float(z.k[i[n]]), float(z.k[j[n]])) for n in bad]
    margin = float(np.minimum(rising, scaled).min()) if len(i) else float("inf")
    verdict = ConditionVerdict(CONDITION_B, _witnesses(locations, violation[bad], d.config.max_witnesses), margin, len(bad))
    logger.info("Condition B for %s: holds=%s (margin %.3g)", d.family, verdict.holds, margin)
    return verdict


def check_condition_b_prime(
    d: Distribution, curve: ThresholdCurve | None = None, condition_a: ConditionVerdict | None = None
) -> ConditionVerdict:
    """z(k) > z(k') for every pair k < k' (zero curve strictly decreasing)."""
    _require_condition_a(d, condition_a)
    z = curve if curve is not None else zero_curve(d)
    i, j = _pairs(z)
    drop = z.values[i] - z.values[j]
    bad = np.flatnonzero(~(drop > d.config.strict_eps))
    locations = [(float(z.k[i[n]]), float(z.k[j[n]])) for n in bad]
    margin = float(drop.min()) if len(i) else float("inf")
    verdict = ConditionVerdict(
        CONDITION_B_PRIME, _witnesses(locations, d.config.strict_eps - drop[bad], d.config.max_witnesses), margin, len(bad)
    )
    logger.info("Condition B' for %s: holds=%s (margin %.3g)", d.family, verdict.holds, margin)
    return verdict


def check_regularity(d: Distribution, grid: int | None = None) -> ConditionVerdict:
    """phi(v,k) strictly increasing in v for v > 0; informational only."""
    config = d.config
    v = np.linspace(0.0, 1.0, grid or config.condition_v_nodes)[1:]
    k = condition_k_grid(d)
    values = phi_values(d, v[None, :], k[:, None])
    steps = np.diff(values, axis=1)
    bad_k, bad_v = np.nonzero(~(steps > config.strict_eps))
    locations = [(float(v[i]), float(v[i + 1]), float(k[j])) for j, i in zip(bad_k, bad_v, strict=True)]
    magnitudes = np.nan_to_num(config.strict_eps - steps[bad_k, bad_v], nan=np.inf)
    finite = steps[np.isfinite(steps)]
    margin = float(finite.min()) if finite.size else float("-inf")
    return ConditionVerdict(REGULARITY, _witnesses(locations, magnitudes, config.max_witnesses), margin, len(locations))
