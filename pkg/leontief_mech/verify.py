"""Incentive checks (direct deviations and the monotonicity characterization) and revenue functionals."""

import concurrent.futures
import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from leontief_mech.config import DEFAULT_NUMERICS, NumericConfig
from leontief_mech.dist import Distribution, TypePoint
from leontief_mech.errors import MechanismError
from leontief_mech.mech import GridMechanism, Mechanism, Mesh, RawGridMechanism, ThresholdPriceMechanism, utility
from leontief_mech.quadrature import Quadrature
from leontief_mech.virtual import revenue_curve, virtual_density

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DIRECT = "Direct"
CHARACTERIZATION = "Characterization"
PAIRWISE_IC = "pairwise-IC"
IR = "IR"
IR_ZERO_PAYMENT = "IR-p00"
C1 = "C1"
C2 = "C2"
C3 = "C3"
PAYMENT_IDENTITY = "payment-identity"
REPORT_CSV_HEADER = ("family", "max_violation", "witness_v", "witness_k", "witness_v2", "witness_k2")
DEFAULT_VERIFY_GRID = 50
# Gauss-Legendre cells used on [threshold, 1] for step-row virtual surplus
SURPLUS_CELLS = 16


@dataclass(frozen=True)
class FamilyResult:
    """Worst violation of one constraint family; witness is (v, k) or (v, k, v', k')."""

    family: str
    max_violation: float
    witness: tuple[float, ...] | None = None
    violations: int = 0

    def row(self) -> list[float | str | None]:
        witness = list(self.witness or ())
        witness += [None] * (4 - len(witness))
        return [self.family, self.max_violation, *witness]


@dataclass(frozen=True)
class VerificationReport:
    mode: str
    results: tuple[FamilyResult, ...]
    tol: float
    mesh_shape: tuple[int, int]

    @property
    def passed(self) -> bool:
        return all(result.max_violation <= self.tol for result in self.results)

    @property
    def worst(self) -> FamilyResult | None:
        return max(self.results, key=lambda r: r.max_violation, default=None)

    def family(self, name: str) -> FamilyResult:
        for result in self.results:
            if result.family == name:
                return result
        msg = f"Report has no {name!r} family (has {', '.join(r.family for r in self.results)})"
        raise KeyError(msg)

    def merged(self, other: "VerificationReport") -> "VerificationReport":
        return VerificationReport(self.mode, self.results + other.results, max(self.tol, other.tol), self.mesh_shape)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "tol": self.tol,
            "mesh": list(self.mesh_shape),
            "families": {
                r.family: {
                    "max_violation": r.max_violation,
                    "witness": None if r.witness is None else list(r.witness),
                    "violations": r.violations,
                }
                for r in self.results
            },
        }


def _family(name: str, violation: FloatArray, witness_of: Callable[[int], tuple[float, ...]], tol: float) -> FamilyResult:
    flat = np.asarray(violation, dtype=float).ravel()
    if flat.size == 0:
        return FamilyResult(name, 0.0)
    worst = int(np.argmax(flat))
    magnitude = max(0.0, float(flat[worst]))
    return FamilyResult(name, magnitude, witness_of(worst) if magnitude > 0.0 else None, int(np.count_nonzero(flat > tol)))


def _resolve(m: Mechanism, mesh: Mesh | None, config: NumericConfig) -> Mesh:
    return mesh if mesh is not None else m.default_mesh(DEFAULT_VERIFY_GRID, config.k_floor)


def check_ic_direct(
    m: Mechanism, mesh: Mesh | None = None, tol: float | None = None, config: NumericConfig = DEFAULT_NUMERICS
) -> VerificationReport:
    """Largest gain from any misreport between mesh types.

    Deviations are taken over the deduplicated menu of outcomes, so step
    mechanisms only compare against a handful of bundles per type.
    """
    grid = _resolve(m, mesh, config)
    tol = config.ic_tol if tol is None else tol
    a1, a2, t = m.outcome_grid(grid)
    truthful = m.truthful_utility(grid)
    flat = np.stack([a1.ravel(), a2.ravel(), t.ravel()], axis=1)
    menu, first = np.unique(flat, axis=0, return_index=True)
    nv = len(grid.v)
    logger.debug("Direct IC on %dx%d mesh against %d distinct outcomes", nv, len(grid.k), len(menu))

    def row_gains(j: int) -> tuple[float, int, int, int]:
        u = grid.v[:, None] * np.minimum(menu[None, :, 0] / grid.k[j], menu[None, :, 1]) - menu[None, :, 2]
        best = np.argmax(u, axis=1)
        gains = u[np.arange(nv), best] - truthful[j]
        i = int(np.argmax(gains))
        return float(gains[i]), j, i, int(best[i])

    rows = range(len(grid.k))
    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(row_gains, rows))
    else:
        results = [row_gains(j) for j in rows]

    count = sum(1 for r in results if r[0] > tol)
    gain, j, i, o = max(results, key=lambda r: r[0])
    target_j, target_i = divmod(int(first[o]), nv)
    witness = (float(grid.v[i]), float(grid.k[j]), float(grid.v[target_i]), float(grid.k[target_j]))
    result = FamilyResult(PAIRWISE_IC, max(0.0, gain), witness if gain > 0.0 else None, count)
    if gain > tol:
        logger.info("Direct IC violated: gain %.3g at %s", gain, witness)
    return VerificationReport(DIRECT, (result,), tol, grid.shape)


def check_ir(
    m: Mechanism, mesh: Mesh | None = None, tol: float | None = None, config: NumericConfig = DEFAULT_NUMERICS
) -> VerificationReport:
    """Truthful utility >= 0 at every mesh type, plus the p(0,1) <= 0 shortcut when available."""
    grid = _resolve(m, mesh, config)
    tol = config.ic_tol if tol is None else tol
    utilities = m.truthful_utility(grid)
    nv = len(grid.v)

    def at(index: int) -> tuple[float, ...]:
        j, i = divmod(index, nv)
        return float(grid.v[i]), float(grid.k[j])

    results = [_family(IR, -utilities, at, tol)]
    zero_payments = m.zero_type_payments(grid)
    if zero_payments is not None and grid.k[-1] == 1.0:
        p01 = float(zero_payments[-1])
        results.append(FamilyResult(IR_ZERO_PAYMENT, max(0.0, p01), (0.0, 1.0) if p01 > 0.0 else None, int(p01 > tol)))
    return VerificationReport(DIRECT, tuple(results), tol, grid.shape)


def _as_grid(m: Mechanism, mesh: Mesh | None, config: NumericConfig) -> GridMechanism:
    if isinstance(m, GridMechanism):
        return m
    if isinstance(m, ThresholdPriceMechanism):
        return m.to_grid(_resolve(m, mesh, config))
    msg = f"Characterization needs a non-wasteful mechanism, got {m.kind}"
    raise MechanismError(msg)


def check_characterization(
    m: Mechanism, mesh: Mesh | None = None, tol: float | None = None, config: NumericConfig = DEFAULT_NUMERICS
) -> VerificationReport:
    """Monotonicity (C1), the two cross-ratio cumulative inequalities (C2, C3) and the payment identity."""
    gm = _as_grid(m, mesh, config)
    tol = config.ic_tol if tol is None else tol
    v, k, f2, cum = gm.v_nodes, gm.k_nodes, gm.f2, gm.cumulative
    nv = len(v)

    drops = f2[:, :-1] - f2[:, 1:]

    def c1_witness(index: int) -> tuple[float, ...]:
        j, i = divmod(index, nv - 1)
        return float(v[i]), float(k[j]), float(v[i + 1]), float(k[j])

    lo, hi = np.triu_indices(len(k), k=1)
    c2 = cum[hi] - cum[lo]

    def c2_witness(index: int) -> tuple[float, ...]:
        pair, i = divmod(index, nv)
        return float(v[i]), float(k[lo[pair]]), float(v[i]), float(k[hi[pair]])

    c3 = np.empty_like(c2)
    for pair, (j, jj) in enumerate(zip(lo, hi, strict=True)):
        c3[pair] = gm.cumulative_at(int(j), v * (k[j] / k[jj])) - cum[jj]

    def c3_witness(index: int) -> tuple[float, ...]:
        pair, i = divmod(index, nv)
        j, jj = lo[pair], hi[pair]
        return float(v[i]), float(k[jj]), float(v[i] * k[j] / k[jj]), float(k[j])

    expected = gm.p00 + v[None, :] * f2 - cum
    mismatch = np.abs(gm.p - expected)

    def at(index: int) -> tuple[float, ...]:
        j, i = divmod(index, nv)
        return float(v[i]), float(k[j])

    results = (
        _family(C1, drops, c1_witness, tol),
        _family(C2, c2, c2_witness, tol),
        _family(C3, c3, c3_witness, tol),
        _family(PAYMENT_IDENTITY, mismatch, at, tol),
    )
    return VerificationReport(CHARACTERIZATION, results, tol, gm.mesh.shape)


@dataclass(frozen=True)
class Equivalence:
    direct: VerificationReport
    characterization: VerificationReport

    @property
    def agree(self) -> bool:
        return self.direct.passed == self.characterization.passed


def compare_checks(
    m: Mechanism, mesh: Mesh | None = None, tol: float | None = None, config: NumericConfig = DEFAULT_NUMERICS
) -> Equivalence:
    """Run the direct and characterization checks on the same mesh."""
    grid = _resolve(m, mesh, config)
    result = Equivalence(check_ic_direct(m, grid, tol, config), check_characterization(m, grid, tol, config))
    if not result.agree:
        direct_worst = result.direct.worst
        char_worst = result.characterization.worst
        logger.warning(
            "Direct IC (passed=%s, gain %.3g) and characterization (passed=%s, %s %.3g) disagree",
            result.direct.passed,
            direct_worst.max_violation if direct_worst else 0.0,
            result.characterization.passed,
            char_worst.family if char_worst else "-",
            char_worst.max_violation if char_worst else 0.0,
        )
    return result


def equivalence_check(
    m: Mechanism, mesh: Mesh | None = None, tol: float | None = None, config: NumericConfig = DEFAULT_NUMERICS
) -> bool:
    """True when the direct check and the characterization reach the same verdict."""
    return compare_checks(m, mesh, tol, config).agree


def _unit_gauss_rule() -> tuple[FloatArray, FloatArray]:
    return Quadrature.gauss_rule(np.linspace(0.0, 1.0, SURPLUS_CELLS + 1))


def _step_surplus(d: Distribution, thresholds: FloatArray, k: FloatArray) -> FloatArray:
    """Integral of phi g(v|k) over (threshold, 1] for each (threshold, k) pair."""
    rho = np.clip(thresholds, 0.0, 1.0)
    u, w = _unit_gauss_rule()
    width = (1.0 - rho)[:, None]
    points = rho[:, None] + width * u[None, :]
    return np.asarray((virtual_density(d, points, k[:, None]) * w[None, :]).sum(axis=1) * width[:, 0])


def _linear_row_integral(values: FloatArray, v_nodes: FloatArray, weight: Callable[[FloatArray], FloatArray]) -> float:
    def integrand(x: FloatArray) -> FloatArray:
        return np.interp(x, v_nodes, values) * weight(x)

    return float(Quadrature.gauss_cells(integrand, v_nodes).sum())


def _extended_linear(x: FloatArray, xs: FloatArray, ys: FloatArray) -> FloatArray:
    """Piecewise-linear interpolant of (xs, ys) continued linearly past both ends."""
    if len(xs) == 1:
        return np.full_like(x, ys[0])
    left = ys[0] + (x - xs[0]) * (ys[1] - ys[0]) / (xs[1] - xs[0])
    right = ys[-1] + (x - xs[-1]) * (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    return np.where(x < xs[0], left, np.where(x > xs[-1], right, np.interp(x, xs, ys)))


def _step_row_revenue(d: Distribution, v_nodes: FloatArray, payments: FloatArray, rho: float, k: float) -> float:
    """E[p | k] for a step row: payments interpolate separately on each side of the jump at ``rho``."""
    below = v_nodes <= rho
    sides = ((below, float(v_nodes[0]), rho), (~below, rho, float(v_nodes[-1])))
    if all(np.ptp(payments[mask]) == 0.0 for mask, _, _ in sides if mask.any()):
        edges = d.cond_cdf(np.asarray([v_nodes[0], rho, v_nodes[-1]]), k)
        masses = np.diff(edges)
        return float(sum(payments[mask][0] * mass for (mask, _, _), mass in zip(sides, masses, strict=True) if mask.any()))
    total = 0.0
    for mask, lo, hi in sides:
        if hi <= lo or not mask.any():
            continue
        xs, ys = v_nodes[mask], payments[mask]
        breaks = np.unique(np.concatenate(([lo], xs[(xs > lo) & (xs < hi)], [hi])))
        total += float(
            Quadrature.gauss_cells(lambda x, xs=xs, ys=ys: _extended_linear(x, xs, ys) * d.cond_density(x, k), breaks).sum()
        )
    return total


def _grid_k_nodes(m: Mechanism) -> FloatArray:
    if isinstance(m, (GridMechanism, RawGridMechanism)):
        return m.k_nodes
    msg = f"Mechanism kind {m.kind} has no ratio grid"
    raise MechanismError(msg)


def _rows_over_k(d: Distribution, k_nodes: FloatArray, rows: FloatArray) -> float:
    return float(d.integrate_k(lambda k: np.interp(k, k_nodes, rows) * d.marginal_k(k)))


def revenue_by_ratio(m: Mechanism, d: Distribution, k: ArrayLike | None = None) -> FloatArray:
    """Conditional expected payment E[p(v,k) | k] per ratio (grid rows, or ``k`` for price mechanisms)."""
    if isinstance(m, ThresholdPriceMechanism):
        ks = np.asarray(k, dtype=float)
        return revenue_curve(d, np.clip(m.price(ks), 0.0, 1.0), ks)
    if isinstance(m, GridMechanism) and m.thresholds is not None:
        rho = np.clip(m.thresholds, 0.0, 1.0)
        return np.asarray(
            [_step_row_revenue(d, m.v_nodes, m.p[j], float(rho[j]), float(kk)) for j, kk in enumerate(m.k_nodes)]
        )
    if isinstance(m, (GridMechanism, RawGridMechanism)):
        return np.asarray(
            [
                _linear_row_integral(m.p[j], m.v_nodes, lambda x, kk=kk: d.cond_density(x, kk))
                for j, kk in enumerate(m.k_nodes)
            ]
        )
    msg = f"Cannot integrate payments of mechanism kind {m.kind}"
    raise MechanismError(msg)


def expected_revenue(m: Mechanism, d: Distribution) -> float:
    """Integral of p(v,k) against the joint density."""
    if isinstance(m, ThresholdPriceMechanism):
        return float(d.integrate_k(lambda k: revenue_by_ratio(m, d, k) * d.marginal_k(k)))
    rows = revenue_by_ratio(m, d)
    return _rows_over_k(d, _grid_k_nodes(m), rows)


def virtual_surplus_by_ratio(m: Mechanism, d: Distribution, k: ArrayLike | None = None) -> FloatArray:
    """Integral over v of phi(v,k) f2(v,k) g(v|k) per ratio."""
    if isinstance(m, ThresholdPriceMechanism):
        ks = np.asarray(k, dtype=float)
        return _step_surplus(d, m.price(ks), ks)
    if isinstance(m, GridMechanism) and m.thresholds is not None:
        return _step_surplus(d, m.thresholds, m.k_nodes)
    if isinstance(m, (GridMechanism, RawGridMechanism)):
        f2 = m.f2 if isinstance(m, GridMechanism) else np.minimum(m.f1 / m.k_nodes[:, None], m.f2)
        return np.asarray(
            [
                _linear_row_integral(f2[j], m.v_nodes, lambda x, kk=kk: virtual_density(d, x, kk))
                for j, kk in enumerate(m.k_nodes)
            ]
        )
    msg = f"Cannot evaluate the allocation of mechanism kind {m.kind}"
    raise MechanismError(msg)


def virtual_surplus(m: Mechanism, d: Distribution) -> float:
    """Integral of phi f2 g(v|k) g_k(k): revenue of an IC mechanism with p(0,1) = 0."""
    if isinstance(m, ThresholdPriceMechanism):
        return float(d.integrate_k(lambda k: virtual_surplus_by_ratio(m, d, k) * d.marginal_k(k)))
    rows = virtual_surplus_by_ratio(m, d)
    return _rows_over_k(d, _grid_k_nodes(m), rows)


def deviation_gain(m: Mechanism, t: TypePoint, report: TypePoint) -> float:
    """Utility gained by type ``t`` when reporting ``report`` instead of the truth."""
    return utility(t, m.outcome(report)) - utility(t, m.outcome(t))


def zero_value_payment_spread(m: Mechanism, mesh: Mesh | None = None, config: NumericConfig = DEFAULT_NUMERICS) -> float:
    """max over mesh ratios of |p(0,k) - p(0,1)|."""
    grid = _resolve(m, mesh, config)
    payments = m.zero_type_payments(grid)
    if payments is None or grid.k[-1] != 1.0:
        msg = "Zero-value payments need v = 0 and k = 1 on the mesh"
        raise MechanismError(msg)
    return float(np.abs(payments - payments[-1]).max())
