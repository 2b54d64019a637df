"""Checkerboard interface solution u = r**gamma * mu(theta) on (-1,1)^2.

The diffusion coefficient equals a1 on the first/third quadrants and a2 on
the second/fourth; u is harmonic in each quadrant and the parameters
(R, rho, sigma) with R = a1/a2 solve the coupled trigonometric system

    R     = -tan((pi/2 - sigma) * gamma) * cot(rho * gamma)
    1 / R = -tan(rho * gamma) * cot(sigma * gamma)
    R     = -tan(sigma * gamma) * cot((pi/2 - rho) * gamma)

subject to 0 < gamma < 2,
max(0, pi*gamma - pi) < 2*gamma*rho < min(pi*gamma, pi) and
max(0, pi - pi*gamma) < -2*gamma*sigma < min(pi, 2*pi - pi*gamma).

Small gamma makes the solution arbitrarily rough (u is barely in H^1), which
is what makes this family a demanding grading benchmark.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, KelloggError
from .singular import Cutoff, PiecewiseCosAngular, SingularTerm

__all__ = ["KelloggSolution", "kellogg_residual", "kellogg_solve", "kellogg_mu", "kellogg_term"]

_PI = math.pi


@dataclass(frozen=True)
class KelloggSolution:
    gamma: float
    ratio: float  # R = a1 / a2
    rho: float
    sigma: float
    residual: float  # sup norm of the three defining identities
    iterations: int

    def inequalities_ok(self) -> bool:
        g, rho, sig = self.gamma, self.rho, self.sigma
        if not (0.0 < g < 2.0):
            return False
        lo1, hi1 = max(0.0, _PI * g - _PI), min(_PI * g, _PI)
        lo2, hi2 = max(0.0, _PI - _PI * g), min(_PI, 2.0 * _PI - _PI * g)
        return lo1 < 2.0 * g * rho < hi1 and lo2 < -2.0 * g * sig < hi2


def kellogg_residual(x, gamma: float) -> np.ndarray:
    R, rho, sig = x
    return np.array(
        [
            R + math.tan((_PI / 2.0 - sig) * gamma) / math.tan(rho * gamma),
            1.0 / R + math.tan(rho * gamma) / math.tan(sig * gamma),
            R + math.tan(sig * gamma) / math.tan((_PI / 2.0 - rho) * gamma),
        ]
    )


def _jacobian(x, gamma: float) -> np.ndarray:
    R, rho, sig = x
    g = gamma
    sec2 = lambda t: 1.0 / math.cos(t) ** 2  # noqa: E731
    csc2 = lambda t: 1.0 / math.sin(t) ** 2  # noqa: E731
    cot = lambda t: 1.0 / math.tan(t)  # noqa: E731
    return np.array(
        [
            [1.0, -g * math.tan((_PI / 2 - sig) * g) * csc2(rho * g), -g * sec2((_PI / 2 - sig) * g) * cot(rho * g)],
            [-1.0 / R**2, g * sec2(rho * g) * cot(sig * g), -g * math.tan(rho * g) * csc2(sig * g)],
            [1.0, g * math.tan(sig * g) * csc2((_PI / 2 - rho) * g), g * sec2(sig * g) * cot((_PI / 2 - rho) * g)],
        ]
    )


def kellogg_solve(gamma: float, x0=None, max_iter: int = 100, rtol: float = 1e-12) -> KelloggSolution:
    """Damped Newton iteration for (R, rho, sigma) at the given exponent.

    The default start exploits the checkerboard symmetry: rho sits at pi/4 and
    sigma at the midpoint of its admissible interval, sigma = pi/4 - pi/(2*gamma),
    with R = cot(pi*gamma/4)**2.  (A naive start such as sigma = -pi/(4*gamma)
    puts a tangent pole between the iterate and the root and Newton stalls.)
    Convergence is measured against max(1, |R|) because for small gamma the
    identities subtract terms of size R, leaving a floating-point floor
    proportional to R * eps.
    """
    if not (0.0 < gamma < 2.0):
        raise ConfigError("kellogg exponent must satisfy 0 < gamma < 2")
    if x0 is None:
        x0 = (1.0 / math.tan(_PI * gamma / 4.0) ** 2, _PI / 4.0, _PI / 4.0 - _PI / (2.0 * gamma))
    x = np.asarray(x0, dtype=float)
    r = kellogg_residual(x, gamma)
    norm = float(np.max(np.abs(r)))
    trace = [norm]
    it = 0
    for it in range(1, max_iter + 1):
        if norm <= rtol * max(1.0, abs(x[0])):
            break
        try:
            dx = np.linalg.solve(_jacobian(x, gamma), -r)
        except np.linalg.LinAlgError as exc:
            raise KelloggError(f"singular Jacobian after {it} iterations", trace) from exc
        step = 1.0
        improved = False
        for _ in range(50):
            xn = x + step * dx
            rn = kellogg_residual(xn, gamma)
            nn = float(np.max(np.abs(rn)))
            if math.isfinite(nn) and nn < norm:
                x, r, norm = xn, rn, nn
                improved = True
                break
            step *= 0.5
        trace.append(norm)
        if not improved:
            raise KelloggError(
                f"Newton stalled at residual {norm:.3e} after {it} iterations", trace
            )
    else:
        raise KelloggError(
            f"no convergence after {max_iter} iterations (residual {norm:.3e})", trace
        )
    sol = KelloggSolution(
        gamma=float(gamma),
        ratio=float(x[0]),
        rho=float(x[1]),
        sigma=float(x[2]),
        residual=norm,
        iterations=it,
    )
    if not sol.inequalities_ok():
        raise KelloggError(
            f"converged to a branch violating the admissibility inequalities: {sol}", trace
        )
    return sol


def kellogg_mu(theta, sol: KelloggSolution):
    """Angular factor mu(theta), theta in [0, 2*pi), selected by quadrant."""
    g, rho, sig = sol.gamma, sol.rho, sol.sigma
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    t = np.atleast_1d(np.mod(theta, 2.0 * _PI))
    out = np.empty_like(t)
    q1 = t <= _PI / 2
    q2 = (t > _PI / 2) & (t <= _PI)
    q3 = (t > _PI) & (t < 1.5 * _PI)
    q4 = t >= 1.5 * _PI
    out[q1] = math.cos((_PI / 2 - sig) * g) * np.cos((t[q1] - _PI / 2 + rho) * g)
    out[q2] = math.cos(rho * g) * np.cos((t[q2] - _PI + sig) * g)
    out[q3] = math.cos(sig * g) * np.cos((t[q3] - _PI - rho) * g)
    out[q4] = math.cos((_PI / 2 - rho) * g) * np.cos((t[q4] - 1.5 * _PI - sig) * g)
    return float(out[0]) if scalar else out


def _mu_angular(sol: KelloggSolution) -> PiecewiseCosAngular:
    g, rho, sig = sol.gamma, sol.rho, sol.sigma
    breakpoints = [0.0, _PI / 2, _PI, 1.5 * _PI, 2.0 * _PI]
    groups = [
        [(math.cos((_PI / 2 - sig) * g), g, (-_PI / 2 + rho) * g)],
        [(math.cos(rho * g), g, (-_PI + sig) * g)],
        [(math.cos(sig * g), g, (-_PI - rho) * g)],
        [(math.cos((_PI / 2 - rho) * g), g, (-1.5 * _PI - sig) * g)],
    ]
    return PiecewiseCosAngular(breakpoints, groups)


def kellogg_term(
    sol: KelloggSolution,
    center: tuple[float, float] = (0.0, 0.0),
    c: float = 1.0,
    cutoff: Cutoff | None = None,
) -> SingularTerm:
    """The interface solution r**gamma * mu(theta) packaged as a singular term."""
    return SingularTerm(
        c=c,
        k=0,
        gamma=sol.gamma,
        center=center,
        angular=_mu_angular(sol),
        cutoff=cutoff if cutoff is not None else Cutoff(),
    )
