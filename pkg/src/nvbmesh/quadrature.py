"""Gaussian quadrature on the reference triangle (0,0)-(1,0)-(0,1).

Rules are conical products of Gauss-Legendre (collapsed direction) and
Gauss-Jacobi with weight (1-x) (radial direction): positive weights, strictly
interior points, exact for all polynomials up to the requested total degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = ["TriangleRule", "triangle_rule"]


@dataclass(frozen=True)
class TriangleRule:
    """Points (n, 2) and weights (n,) on the reference triangle; weights sum to 1/2."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self) -> int:
        return len(self.weights)

    def map_to(self, A, B, C):
        """Physical quadrature points and weights for triangle(s) (A, B, C).

        Accepts single corners of shape (2,) or stacked corners (m, 2) and
        returns points of shape (..., n, 2) with weights scaled by |T| / (1/2).
        """
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        C = np.asarray(C, dtype=float)
        xi = self.points[:, 0]
        eta = self.points[:, 1]
        pts = (
            A[..., None, :]
            + xi[:, None] * (B - A)[..., None, :]
            + eta[:, None] * (C - A)[..., None, :]
        )
        det = (B[..., 0] - A[..., 0]) * (C[..., 1] - A[..., 1]) - (C[..., 0] - A[..., 0]) * (
            B[..., 1] - A[..., 1]
        )
        w = np.abs(det)[..., None] * self.weights
        return pts, w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Rule exact for all monomials x**a * y**b with a + b <= degree."""
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    n = max(1, (degree + 2) // 2)  # smallest n with 2n-1 >= degree in both directions
    xg, wg = roots_legendre(n)
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    # map both 1d rules to [0, 1]; the Jacobi weight (1-x) absorbs the cone Jacobian
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    xj = 0.5 * (xj + 1.0)
    wj = 0.25 * wj
    # x = xi * (1 - eta), y = eta
    xi, eta = np.meshgrid(xg, xj, indexing="ij")
    pts = np.column_stack([(xi * (1.0 - eta)).ravel(), eta.ravel()])
    wts = np.outer(wg, wj).ravel()
    return TriangleRule(points=pts, weights=wts, degree=degree)
