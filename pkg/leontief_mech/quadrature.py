"""Numerical integration helpers shared by the distribution and revenue code."""

from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

# Gauss-Legendre order used per mesh cell for smooth cell integrals
GAUSS_ORDER = 8
# scipy.integrate.quad absolute/relative tolerances for validation-grade integrals
ADAPTIVE_EPSABS = 1e-13
ADAPTIVE_EPSREL = 1e-12
ADAPTIVE_LIMIT = 200

FloatArray = NDArray[np.float64]


class Quadrature:
    """Composite Simpson, trapezoid and adaptive rules on [a, b] meshes."""

    @staticmethod
    def nodes(a: float, b: float, n: int) -> FloatArray:
        """Equally spaced nodes on [a, b]; ``n`` is bumped to the next odd count for Simpson."""
        if n < 3:
            msg = f"Need at least 3 quadrature nodes, got {n}"
            raise ValueError(msg)
        if n % 2 == 0:
            n += 1
        return np.linspace(a, b, n)

    @staticmethod
    def simpson_rule(a: float, b: float, n: int) -> tuple[FloatArray, FloatArray]:
        """Nodes and weights of the composite Simpson rule on [a, b]."""
        xs = Quadrature.nodes(a, b, n)
        h = (b - a) / (len(xs) - 1)
        weights = np.full(len(xs), 2.0)
        weights[1::2] = 4.0
        weights[0] = weights[-1] = 1.0
        return xs, weights * h / 3.0

    @staticmethod
    def gauss_rule(nodes: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Flattened per-cell Gauss-Legendre rule over a (possibly uneven) mesh."""
        points, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
        half = 0.5 * (nodes[1:] - nodes[:-1])[:, None]
        xs = nodes[:-1, None] + half * (points[None, :] + 1.0)
        return xs.ravel(), (half * weights[None, :]).ravel()

    @staticmethod
    def simpson(values: ArrayLike, nodes: ArrayLike, axis: int = -1) -> FloatArray:
        """Composite Simpson integral of sampled values along ``axis``."""
        return np.asarray(integrate.simpson(np.asarray(values, dtype=float), x=np.asarray(nodes, dtype=float), axis=axis))

    @staticmethod
    def integrate(func: Callable[[FloatArray], FloatArray], a: float, b: float, n: int) -> float:
        """Composite Simpson integral of a vectorized function on [a, b]."""
        if b <= a:
            return 0.0
        xs = Quadrature.nodes(a, b, n)
        return float(Quadrature.simpson(func(xs), xs))

    @staticmethod
    def adaptive(func: Callable[[float], float], a: float, b: float) -> float:
        """Adaptive QUADPACK integral, used where the integrand has endpoint singularities."""
        if b <= a:
            return 0.0
        value, _abserr = integrate.quad(func, a, b, epsabs=ADAPTIVE_EPSABS, epsrel=ADAPTIVE_EPSREL, limit=ADAPTIVE_LIMIT)
        return float(value)

    @staticmethod
    def cumulative_trapezoid(values: ArrayLike, nodes: ArrayLike, axis: int = -1) -> FloatArray:
        """Running trapezoid integral from the first node, starting at 0."""
        return np.asarray(
            integrate.cumulative_trapezoid(
                np.asarray(values, dtype=float), x=np.asarray(nodes, dtype=float), axis=axis, initial=0.0
            )
        )

    @staticmethod
    def piecewise_linear_cumulative(
        nodes: FloatArray, values: FloatArray, cumulative: FloatArray, at: ArrayLike
    ) -> FloatArray:
        """Integral from nodes[0] to ``at`` of the piecewise-linear interpolant of ``values``.

        ``cumulative`` is the trapezoid cumulative at the nodes. Inside a cell the
        integral is the exact quadratic, so the result agrees with the trapezoid rule
        at every node. Points beyond the mesh are clamped to its ends.
        """
        x = np.clip(np.asarray(at, dtype=float), nodes[0], nodes[-1])
        idx = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 2)
        left = nodes[idx]
        width = nodes[idx + 1] - left
        slope = (values[idx + 1] - values[idx]) / width
        dx = x - left
        return np.asarray(cumulative[idx] + values[idx] * dx + 0.5 * slope * dx * dx)

    @staticmethod
    def gauss_cells(func: Callable[[FloatArray], FloatArray], nodes: FloatArray) -> FloatArray:
        """Integral of ``func`` over each mesh cell [nodes[i], nodes[i+1]] by Gauss-Legendre.

        ``func`` receives a (cells, GAUSS_ORDER) array and must return the same shape.
        """
        points, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
        half = 0.5 * (nodes[1:] - nodes[:-1])[:, None]
        xs = nodes[:-1, None] + half * (points[None, :] + 1.0)
        return np.asarray((func(xs) * weights[None, :]).sum(axis=1) * half[:, 0])
