"""Seeded random mechanism families for property checks and ``lmech verify --random``."""

import numpy as np
from numpy.typing import ArrayLike

from leontief_mech.curves import ThresholdCurve
from leontief_mech.mech import GridMechanism, RatioDependentPrice, RawGridMechanism

# Range of the first price of a random ratio-dependent curve
FIRST_PRICE_RANGE = (0.05, 0.95)
# A perturbed price is the previous one scaled by a factor in this range
PERTURB_SCALE = (0.3, 0.9)
WASTE_SCALE = 0.5


def random_ratio_dependent_curve(rng: np.random.Generator, k_nodes: ArrayLike) -> ThresholdCurve:
    """Random psi on ``k_nodes`` with psi nondecreasing and psi(k)/k nonincreasing."""
    k = np.asarray(k_nodes, dtype=float)
    psi = np.empty_like(k)
    psi[0] = rng.uniform(*FIRST_PRICE_RANGE)
    for j in range(1, len(k)):
        ceiling = min(1.0, psi[j - 1] * k[j] / k[j - 1])
        psi[j] = rng.uniform(psi[j - 1], ceiling)
    return ThresholdCurve(k, psi, name="psi")


def perturb_curve(rng: np.random.Generator, curve: ThresholdCurve) -> ThresholdCurve:
    """Break monotonicity: one price drops strictly below its predecessor."""
    if len(curve) < 2:
        msg = "Need at least two curve points to perturb"
        raise ValueError(msg)
    values = curve.values.copy()
    j = int(rng.integers(1, len(values)))
    values[j] = values[j - 1] * rng.uniform(*PERTURB_SCALE)
    return ThresholdCurve(curve.k, values, name=curve.name)


def random_mechanisms(
    rng: np.random.Generator, k_nodes: ArrayLike, count: int, perturbed: bool = False
) -> list[RatioDependentPrice]:
    """``count`` random ratio-dependent mechanisms, valid or deliberately broken."""
    mechanisms = []
    for _ in range(count):
        curve = random_ratio_dependent_curve(rng, k_nodes)
        if perturbed:
            curve = perturb_curve(rng, curve)
        mechanisms.append(RatioDependentPrice(curve))
    return mechanisms


def random_monotone_allocation(rng: np.random.Generator, v_nodes: ArrayLike, k_nodes: ArrayLike) -> np.ndarray:
    """f2 nondecreasing in v per row and pointwise nonincreasing in k (so C1 and C2 hold)."""
    nv = len(np.asarray(v_nodes))
    rows = []
    previous = np.ones(nv)
    for _ in range(len(np.asarray(k_nodes))):
        row = np.minimum(previous, np.sort(rng.uniform(0.0, 1.0, nv)) * rng.uniform(0.5, 1.0))
        rows.append(row)
        previous = row
    return np.asarray(rows)


def add_waste(rng: np.random.Generator, m: GridMechanism) -> RawGridMechanism:
    """Wasteful copy of ``m``: extra good 1 or good 2 handed out at random types."""
    f1 = m.f1.copy()
    f2 = m.f2.copy()
    extra = rng.uniform(0.0, WASTE_SCALE, f2.shape)
    pick = rng.integers(0, 3, f2.shape)
    f1 = np.where(pick == 1, np.minimum(1.0, f1 + extra), f1)
    f2 = np.where(pick == 2, np.minimum(1.0, f2 + extra), f2)
    return RawGridMechanism(m.v_nodes, m.k_nodes, f1, f2, m.p.copy())


def add_idle_waste(rng: np.random.Generator, m: GridMechanism) -> RawGridMechanism:
    """Wasteful copy of ``m`` whose bundles keep their value for every type.

    Only types with f2 = 0 receive extra, and only of one good, so min(f1/k, f2)
    stays zero there and the copy is IC exactly when ``m`` is.
    """
    idle = m.f2 == 0.0
    extra = rng.uniform(0.0, WASTE_SCALE, m.f2.shape)
    first_good = rng.integers(0, 2, m.f2.shape) == 0
    f1 = np.where(idle & first_good, extra, m.f1)
    f2 = np.where(idle & ~first_good, extra, m.f2)
    return RawGridMechanism(m.v_nodes, m.k_nodes, f1, f2, m.p.copy())
