"""Optimal mechanism constructors, the improvement transforms, and optimality certificates."""

import concurrent.futures
import itertools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy import optimize

from leontief_mech.curves import ThresholdCurve
from leontief_mech.dist import Distribution, IndependentProductDistribution
from leontief_mech.errors import ImprovementError, PreconditionError, SearchSizeError
from leontief_mech.mech import GridMechanism, Mechanism, PostedPrice, RatioDependentPrice, make_ratio_dependent
from leontief_mech.quadrature import Quadrature
from leontief_mech.verify import C1, C2, check_characterization, expected_revenue, virtual_surplus_by_ratio
from leontief_mech.virtual import (
    ConditionVerdict,
    check_condition_a,
    check_condition_b,
    check_condition_b_prime,
    condition_k_grid,
    phi_zero,
    revenue_curve,
    virtual_density,
    zero_curve,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# Revenue slack allowed between the coarse oracle and a candidate mechanism
COARSE_GRID_TOL = 5e-3
# Gauss-Legendre sub-cells per oracle ratio cell
ORACLE_SUBCELLS = 4
# Refined maxima closer than this are reported once
MAXIMIZER_MERGE_TOL = 1e-6

PATH_CONDITION_B = "ratio-dependent (condition B)"
PATH_CONDITION_B_PRIME = "posted price (condition B')"
PATH_INDEPENDENT = "posted price (independent types)"


@dataclass(frozen=True)
class ThresholdMechanismSpec:
    """Step allocation with threshold rho(k) per ratio, plus the proof quantities that produced it."""

    rho: ThresholdCurve
    beta: FloatArray | None = None
    k_star: float | None = None
    v_star: float | None = None
    case: int | None = None

    def __post_init__(self) -> None:
        if np.any(self.rho.values < 0.0) or np.any(self.rho.values > 1.0):
            msg = "Thresholds must lie in [0, 1]"
            raise ValueError(msg)

    def mechanism(self, v_nodes: FloatArray) -> GridMechanism:
        return GridMechanism.from_thresholds(v_nodes, self.rho.k, self.rho.values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rho": self.rho.to_rows(),
            "beta": None if self.beta is None else np.asarray(self.beta).tolist(),
            "k_star": self.k_star,
            "v_star": self.v_star,
            "case": self.case,
        }


def golden_section_max(func: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Maximizer of a unimodal ``func`` on [a, b] to within ``tol``."""
    dist = b - a
    if dist <= tol:
        return (a + b) / 2.0
    c = b - INV_PHI * dist
    d = a + INV_PHI * dist
    fc, fd = func(c), func(d)
    for _ in range(math.ceil(math.log(tol / dist) / math.log(INV_PHI))):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = func(d)
    return (a + b) / 2.0


@dataclass(frozen=True)
class PostedPriceSearch:
    rho: float
    revenue: float
    near_optimal: tuple[float, ...] = field(default_factory=tuple)


def _price_revenue(d: Distribution, rho: float) -> float:
    return float(rho * (1.0 - float(d.marginal_v_cdf(rho))))


def posted_price_search(d: Distribution) -> PostedPriceSearch:
    """Global scan of rho (1 - G_v(rho)) followed by golden-section refinement of each local maximum."""
    config = d.config
    scan = np.linspace(0.0, 1.0, config.price_scan_nodes)
    values = scan * (1.0 - d.marginal_v_cdf(scan))
    padded = np.concatenate([[-np.inf], values, [-np.inf]])
    peaks = np.flatnonzero((padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:]))

    def slope(x: float) -> float:
        return float(1.0 - d.marginal_v_cdf(x) - x * d.marginal_v_density(x))

    candidates: list[tuple[float, float]] = [(float(scan[i]), float(values[i])) for i in peaks]
    for i in peaks:
        lo, hi = float(scan[max(i - 1, 0)]), float(scan[min(i + 1, len(scan) - 1)])
        rho = golden_section_max(lambda x: _price_revenue(d, x), lo, hi, config.price_tol)
        if slope(lo) > 0.0 > slope(hi):
            polished = float(optimize.brentq(slope, lo, hi, xtol=config.price_tol))
            if _price_revenue(d, polished) >= _price_revenue(d, rho):
                rho = polished
        candidates.append((rho, _price_revenue(d, rho)))
        logger.debug("Local price maximum near %.6g refined to %.12g", scan[i], rho)

    candidates.sort()
    best_revenue = max(revenue for _, revenue in candidates)
    best_rho = next(rho for rho, revenue in candidates if revenue == best_revenue)
    near: list[float] = []
    for rho, revenue in candidates:
        if revenue >= best_revenue - config.near_optimal_tol and all(abs(rho - r) > MAXIMIZER_MERGE_TOL for r in near):
            near.append(rho)
    if len(near) > 1:
        logger.info("Posted-price revenue has %d near-optimal maximizers: %s", len(near), near)
    return PostedPriceSearch(best_rho, best_revenue, tuple(near))


def solve_posted_price(d: Distribution) -> PostedPrice:
    """Posted price maximizing rho (1 - G_v(rho))."""
    search = posted_price_search(d)
    logger.info("Optimal posted price for %s: %.12g (revenue %.12g)", d.family, search.rho, search.revenue)
    return PostedPrice(min(max(search.rho, 0.0), 1.0))


def _require(verdict: ConditionVerdict) -> None:
    if not verdict.holds:
        witness = verdict.witnesses[0] if verdict.witnesses else None
        msg = f"Condition {verdict.condition} does not hold (margin {verdict.margin:.3g}, witness {witness})"
        raise PreconditionError(msg, witness)


def solve_condition_b(d: Distribution) -> RatioDependentPrice:
    """Ratio-dependent price psi(k) = phi_k^{-1}(0)."""
    verdict_a = check_condition_a(d)
    _require(verdict_a)
    curve = zero_curve(d)
    _require(check_condition_b(d, curve, verdict_a))
    projected = np.maximum.accumulate(curve.values)
    if np.any(projected != curve.values):
        lift = float((projected - curve.values).max())
        logger.warning("Zero curve is not monotone to rounding; lifted by at most %.3g", lift)
    return make_ratio_dependent(ThresholdCurve(curve.k, projected, "psi"), tol=d.config.strict_eps)


def lemma3_improve(m: GridMechanism, d: Distribution) -> ThresholdMechanismSpec:
    """Step allocation at rho(k) = 1 - integral of f2(., k), which earns weakly more per ratio."""
    _require(check_condition_a(d))
    tol = d.config.ic_tol
    before = check_characterization(m, tol=tol, config=d.config)
    for family in (C1, C2):
        result = before.family(family)
        if result.max_violation > tol:
            msg = f"Allocation violates {family} by {result.max_violation:.3g}"
            raise PreconditionError(msg, result.witness)

    beta = 1.0 - m.total_allocation()
    spec = ThresholdMechanismSpec(ThresholdCurve(m.k_nodes, np.clip(beta, 0.0, 1.0), "rho"), beta=beta)
    improved = spec.mechanism(m.v_nodes)

    after = check_characterization(improved, tol=tol, config=d.config)
    for family in (C1, C2):
        if after.family(family).max_violation > tol:
            msg = f"Step allocation violates {family}"
            raise ImprovementError(msg)
    loss = virtual_surplus_by_ratio(m, d) - virtual_surplus_by_ratio(improved, d)
    if np.any(loss > d.config.strict_eps):
        j = int(np.argmax(loss))
        msg = f"Step allocation loses {loss[j]:.3g} of virtual surplus at k={m.k_nodes[j]:.6g}"
        raise ImprovementError(msg)
    return spec


def _k_star(d: Distribution, rho: ThresholdCurve) -> float:
    """Smallest k where rho(k) reaches the zero curve; ties within root_tol count as reached."""
    config = d.config

    def gap(k: float) -> float:
        return float(rho(k)) - phi_zero(d, k)

    lo, hi = d.k_floor, 1.0
    while hi - lo > config.root_tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) >= -config.root_tol:
            hi = mid
        else:
            lo = mid
    return hi


def classify_threshold_curve(spec: ThresholdMechanismSpec, d: Distribution) -> ThresholdMechanismSpec:
    """Annotate ``spec`` with where rho meets the zero curve and the posted price that follows.

    Case 1: rho(1) at or below the zero curve, price rho(1). Case 3: rho(k_floor)
    at or above it, price rho(k_floor). Case 2: the curves cross at k*, price
    v* = rho(k*).
    """
    verdict_a = check_condition_a(d)
    _require(verdict_a)
    _require(check_condition_b_prime(d, condition_a=verdict_a))
    rho = spec.rho
    if np.any(np.diff(rho.values) < -d.config.strict_eps):
        j = int(np.argmin(np.diff(rho.values)))
        msg = f"Threshold curve decreases between k={rho.k[j]:.6g} and k={rho.k[j + 1]:.6g}"
        raise PreconditionError(msg, (float(rho.k[j]), float(rho.k[j + 1])))

    k_floor = d.k_floor
    rho_top, rho_floor = float(rho(1.0)), float(rho(k_floor))
    if rho_top <= phi_zero(d, 1.0):
        case, k_star, price = 1, 1.0, rho_top
    elif rho_floor >= phi_zero(d, k_floor):
        case, k_star, price = 3, k_floor, rho_floor
    else:
        case = 2
        k_star = _k_star(d, rho)
        price = float(rho(k_star))
    logger.info("Threshold curve falls in case %d; posted price %.12g (k*=%.6g)", case, price, k_star)
    return ThresholdMechanismSpec(rho, spec.beta, k_star=k_star, v_star=price, case=case)


def theorem2_improve(spec: ThresholdMechanismSpec, d: Distribution) -> PostedPrice:
    """Collapse a nondecreasing threshold curve to one posted price earning weakly more per ratio."""
    annotated = classify_threshold_curve(spec, d)
    price = annotated.v_star if annotated.v_star is not None else float(annotated.rho.values[0])
    rho = spec.rho
    ks = np.union1d(rho.k[rho.k >= d.k_floor], condition_k_grid(d))
    loss = revenue_curve(d, rho(ks), ks) - revenue_curve(d, np.full_like(ks, price), ks)
    if np.any(loss > d.config.strict_eps):
        j = int(np.argmax(loss))
        msg = f"Posted price {price:.6g} loses {loss[j]:.3g} of revenue at k={ks[j]:.6g}"
        raise ImprovementError(msg)
    return PostedPrice(price)


def _positive_virtual_rows(d: Distribution, k: FloatArray) -> FloatArray:
    """Per-ratio integral of max(phi, 0) g(v|k) dv, from the sign changes of phi g."""
    config = d.config
    v = np.linspace(0.0, 1.0, round(1.0 / config.sign_scan_step) + 1)
    h = virtual_density(d, v[None, :], k[:, None])
    positive = h >= 0.0
    rows, cells = np.nonzero(positive[:, 1:] != positive[:, :-1])
    lo, hi = v[cells].copy(), v[cells + 1].copy()
    ks = k[rows]
    rising = positive[rows, cells + 1]
    lo_sign = np.where(rising, -1.0, 1.0)
    for _ in range(math.ceil(math.log2(config.sign_scan_step / config.root_tol)) + 1):
        mid = 0.5 * (lo + hi)
        same = np.sign(virtual_density(d, mid, ks)) == lo_sign
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    roots = 0.5 * (lo + hi)
    contribution = np.where(rising, 1.0, -1.0) * revenue_curve(d, roots, ks)
    totals = np.bincount(rows, weights=contribution, minlength=len(k))
    # positive stretches touching v = 0 or v = 1 close at W(0) = W(1) = 0
    return np.asarray(totals)


def pointwise_bound(d: Distribution) -> float:
    """Integral of max(phi, 0) g(v|k) g_k(k): revenue bound ignoring the cross-ratio constraints."""
    bound = float(d.integrate_k(lambda k: _positive_virtual_rows(d, k) * d.marginal_k(k)))
    logger.info("Pointwise revenue bound for %s: %.12g", d.family, bound)
    return bound


@dataclass(frozen=True)
class OracleResult:
    """Best nondecreasing step thresholds on a coarse (k, rho) mesh."""

    revenue: float
    rho: FloatArray
    k_nodes: FloatArray
    rho_mesh: FloatArray
    mesh_bound: float
    evaluated: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "revenue": self.revenue,
            "rho": self.rho.tolist(),
            "k_nodes": self.k_nodes.tolist(),
            "rho_nodes": len(self.rho_mesh),
            "mesh_bound": self.mesh_bound,
            "evaluated": self.evaluated,
        }


def _cell_revenue(d: Distribution, edges: FloatArray, rho_mesh: FloatArray) -> FloatArray:
    """A[i, r] = integral over ratio cell i of W(rho_r, k) g_k(k) dk."""
    table = np.empty((len(edges) - 1, len(rho_mesh)))
    for i in range(len(edges) - 1):
        ks, weights = Quadrature.gauss_rule(np.linspace(edges[i], edges[i + 1], ORACLE_SUBCELLS + 1))
        table[i] = (revenue_curve(d, rho_mesh[:, None], ks[None, :]) * d.marginal_k(ks)[None, :]) @ weights
    return table


def oracle_best_threshold(d: Distribution, k_nodes: int = 5, rho_nodes: int = 31) -> OracleResult:
    """Exhaustive search over nondecreasing threshold vectors, piecewise constant in k."""
    config = d.config
    if not 2 <= k_nodes <= config.oracle_max_k_nodes or not 2 <= rho_nodes <= config.oracle_max_rho_nodes:
        msg = (
            f"Oracle size {k_nodes}x{rho_nodes} outside the supported "
            f"{config.oracle_max_k_nodes}x{config.oracle_max_rho_nodes}"
        )
        raise SearchSizeError(msg)
    edges = np.linspace(d.k_support[0], 1.0, k_nodes + 1)
    rho_mesh = np.linspace(0.0, 1.0, rho_nodes)
    table = _cell_revenue(d, edges, rho_mesh)

    def best_from(first: int) -> tuple[float, tuple[int, ...], int]:
        tails = np.asarray(list(itertools.combinations_with_replacement(range(first, rho_nodes), k_nodes - 1)), dtype=np.intp)
        totals = table[0, first] + table[np.arange(1, k_nodes)[None, :], tails].sum(axis=1)
        idx = int(np.argmax(totals))
        return float(totals[idx]), (first, *map(int, tails[idx])), len(tails)

    firsts = range(rho_nodes)
    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
            groups = list(executor.map(best_from, firsts))
    else:
        groups = [best_from(first) for first in firsts]
    revenue, best, _ = max(groups, key=lambda g: g[0])
    evaluated = sum(g[2] for g in groups)
    logger.info("Oracle searched %d threshold vectors; best revenue %.12g", evaluated, revenue)
    return OracleResult(revenue, rho_mesh[list(best)], edges[:-1], rho_mesh, float(table.max(axis=1).sum()), evaluated)


@dataclass(frozen=True)
class SolverChoice:
    path: str
    mechanism: Mechanism
    verdicts: tuple[ConditionVerdict, ...] = ()


def choose_optimal(d: Distribution) -> SolverChoice:
    """Pick the optimal mechanism family from the distribution's verdicts and solve it."""
    if isinstance(d, IndependentProductDistribution):
        return SolverChoice(PATH_INDEPENDENT, solve_posted_price(d))
    verdict_a = check_condition_a(d)
    _require(verdict_a)
    curve = zero_curve(d)
    verdict_b = check_condition_b(d, curve, verdict_a)
    if verdict_b.holds:
        return SolverChoice(PATH_CONDITION_B, solve_condition_b(d), (verdict_a, verdict_b))
    verdict_b_prime = check_condition_b_prime(d, curve, verdict_a)
    if verdict_b_prime.holds:
        return SolverChoice(PATH_CONDITION_B_PRIME, solve_posted_price(d), (verdict_a, verdict_b, verdict_b_prime))
    msg = "Neither condition B nor condition B' holds; no closed-form optimum applies"
    raise PreconditionError(msg, verdict_b.witnesses[0] if verdict_b.witnesses else None)


@dataclass(frozen=True)
class OptimalityCertificate:
    path: str
    candidate_revenue: float
    pointwise_bound: float
    oracle: OracleResult
    revenue_tol: float

    @property
    def bound_gap(self) -> float:
        return self.pointwise_bound - self.candidate_revenue

    @property
    def oracle_gap(self) -> float:
        return self.candidate_revenue - self.oracle.revenue

    @property
    def passed(self) -> bool:
        return self.bound_gap >= -self.revenue_tol and self.oracle_gap >= -COARSE_GRID_TOL

    def to_dict(self) -> dict[str, Any]:
        return {
            "path": self.path,
            "passed": self.passed,
            "candidate_revenue": self.candidate_revenue,
            "pointwise_bound": self.pointwise_bound,
            "oracle_best": self.oracle.revenue,
            "gaps": {"bound_minus_candidate": self.bound_gap, "candidate_minus_oracle": self.oracle_gap},
            "grid": {"k_nodes": len(self.oracle.k_nodes), "rho_nodes": len(self.oracle.rho_mesh)},
            "oracle": self.oracle.to_dict(),
        }


def certify(d: Distribution, k_nodes: int = 5, rho_nodes: int = 31) -> OptimalityCertificate:
    """Compare the chosen optimum with the pointwise bound and the threshold oracle."""
    choice = choose_optimal(d)
    certificate = OptimalityCertificate(
        choice.path,
        expected_revenue(choice.mechanism, d),
        pointwise_bound(d),
        oracle_best_threshold(d, k_nodes, rho_nodes),
        d.config.revenue_tol,
    )
    logger.info("Certificate for %s: passed=%s", d.family, certificate.passed)
    return certificate
