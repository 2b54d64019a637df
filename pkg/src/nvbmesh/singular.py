"""Point-singular terms c * ln(r)**k * r**gamma * g(theta) * chi(r) and their gradients.

Angular profiles g are 2*pi-periodic and piecewise smooth on a breakpoint
partition of [0, 2*pi]; cutoffs chi are either identically one or a radial
polynomial smoothstep with a prescribed number of continuous derivatives.
Evaluation is vectorized and pure; all objects are immutable after
construction and safe for unrestricted parallel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, SingularityError
from .mesh import Mesh

__all__ = [
    "AngularFunction",
    "SinAngular",
    "PiecewiseCosAngular",
    "Cutoff",
    "SingularTerm",
    "preset_poisson_corner",
    "SumFunction",
    "FunctionPart",
    "bound_check",
    "BoundCheck",
    "check_jump_alignment",
]

_TWO_PI = 2.0 * math.pi


class AngularFunction:
    """Piecewise-smooth profile on [0, 2*pi] with g(0) == g(2*pi).

    ``pieces`` maps each interval [breakpoints[i], breakpoints[i+1]] to a pair
    of vectorized callables (g, dg).  Continuity across breakpoints and the
    periodic seam is enforced at construction.
    """

    def __init__(self, breakpoints, pieces, *, tol: float = 1e-10):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or len(bp) < 2 or bp[0] != 0.0 or abs(bp[-1] - _TWO_PI) > 1e-15:
            raise ConfigError("breakpoints must run from 0 to 2*pi")
        if np.any(np.diff(bp) <= 0):
            raise ConfigError("breakpoints must be strictly increasing")
        if len(pieces) != len(bp) - 1:
            raise ConfigError("need one (g, dg) pair per breakpoint interval")
        self.breakpoints = bp
        self.pieces = tuple(pieces)
        for i in range(1, len(bp) - 1):
            left = float(self.pieces[i - 1][0](bp[i]))
            right = float(self.pieces[i][0](bp[i]))
            if abs(left - right) > tol:
                raise ConfigError(f"angular profile is discontinuous at theta={bp[i]}")
        seam = abs(float(self.pieces[0][0](0.0)) - float(self.pieces[-1][0](_TWO_PI)))
        if seam > tol:
            raise ConfigError("angular profile must satisfy g(0) == g(2*pi)")

    def _piece_index(self, theta: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, theta, side="right") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def _eval(self, theta, which: int):
        theta = np.asarray(theta, dtype=float)
        scalar = theta.ndim == 0
        theta = np.atleast_1d(theta)
        out = np.empty_like(theta)
        idx = self._piece_index(theta)
        for i, fns in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = fns[which](theta[sel])
        return out[0] if scalar else out

    def g(self, theta):
        return self._eval(theta, 0)

    def dg(self, theta):
        return self._eval(theta, 1)

    def interior_jump_angles(self, tol: float = 1e-9) -> list[float]:
        """Breakpoint angles where dg jumps (includes the 0/2*pi seam once)."""
        out = []
        bp = self.breakpoints
        for i in range(1, len(bp) - 1):
            if abs(float(self.pieces[i - 1][1](bp[i])) - float(self.pieces[i][1](bp[i]))) > tol:
                out.append(float(bp[i]))
        if abs(float(self.pieces[-1][1](_TWO_PI)) - float(self.pieces[0][1](0.0))) > tol:
            out.append(0.0)
        return out


class SinAngular(AngularFunction):
    """g(t) = sin(pi t / omega) on [0, omega], extended by zero up to 2*pi.

    The zero extension keeps the profile continuous (sin(pi) = 0) and
    periodic; for a corner of interior angle omega only t <= omega is ever
    evaluated inside the domain.
    """

    def __init__(self, omega: float):
        if not (0.0 < omega <= _TWO_PI):
            raise ConfigError("corner angle omega must lie in (0, 2*pi]")
        self.omega = float(omega)
        w = math.pi / self.omega
        pieces = [(lambda t, w=w: np.sin(w * t), lambda t, w=w: w * np.cos(w * t))]
        if self.omega < _TWO_PI:
            bp = [0.0, self.omega, _TWO_PI]
            pieces.append((lambda t: np.zeros_like(np.asarray(t, float)),
                           lambda t: np.zeros_like(np.asarray(t, float))))
        else:
            bp = [0.0, _TWO_PI]
        super().__init__(bp, pieces)


class PiecewiseCosAngular(AngularFunction):
    """Trigonometric-polynomial pieces: g|piece_i(t) = sum_j a_j * cos(w_j t + phi_j)."""

    def __init__(self, breakpoints, coeff_groups):
        pieces = []
        for group in coeff_groups:
            terms = [(float(a), float(w), float(phi)) for (a, w, phi) in group]

            def g(t, terms=terms):
                t = np.asarray(t, dtype=float)
                return sum(a * np.cos(w * t + phi) for a, w, phi in terms)

            def dg(t, terms=terms):
                t = np.asarray(t, dtype=float)
                return sum(-a * w * np.sin(w * t + phi) for a, w, phi in terms)

            pieces.append((g, dg))
        super().__init__(breakpoints, pieces)
        self.coeff_groups = tuple(tuple(g) for g in coeff_groups)


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff: identically one, or a C^order smoothstep ramp 1 -> 0 on [r1, r2]."""

    kind: str = "one"  # "one" | "smooth"
    r1: float = 0.0
    r2: float = 0.0
    order: int = 2

    def __post_init__(self):
        if self.kind not in ("one", "smooth"):
            raise ConfigError(f"unknown cutoff kind {self.kind!r}")
        if self.kind == "smooth":
            if not (0.0 < self.r1 < self.r2):
                raise ConfigError("smooth cutoff needs 0 < r1 < r2")
            if self.order < 1:
                raise ConfigError("cutoff order must be >= 1")
            m = self.order
            # generalized smoothstep S_m: [0,1] -> [0,1] with m flat derivatives
            # at both ends; chi = 1 - S_m((r - r1) / (r2 - r1))
            coeffs = np.zeros(2 * m + 2)
            for k in range(m + 1):
                coeffs[m + 1 + k] = math.comb(m + k, k) * math.comb(2 * m + 1, m - k) * (-1) ** k
            poly = np.polynomial.Polynomial(coeffs)
            object.__setattr__(self, "_poly", poly)
            object.__setattr__(self, "_dpoly", poly.deriv())

    def chi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "one":
            return np.ones_like(r)
        t = np.clip((r - self.r1) / (self.r2 - self.r1), 0.0, 1.0)
        return 1.0 - self._poly(t)

    def dchi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "one":
            return np.zeros_like(r)
        t = (r - self.r1) / (self.r2 - self.r1)
        inside = (t > 0.0) & (t < 1.0)
        out = np.zeros_like(r)
        out[inside] = -self._dpoly(t[inside]) / (self.r2 - self.r1)
        return out


@dataclass(frozen=True)
class SingularTerm:
    """One term c * ln(r)**k * r**gamma * g(theta) * chi(r) around ``center``.

    ``theta`` is measured counterclockwise from ``reference_direction`` (a
    unit vector; default +x) and lies in [0, 2*pi).  The value at the center
    is 0 (gamma > 0 dominates any log power); the gradient is singular there
    when gamma <= 1 and requesting it raises :class:`SingularityError`.
    """

    c: float
    k: int
    gamma: float
    center: tuple[float, float]
    angular: AngularFunction
    cutoff: Cutoff = field(default_factory=Cutoff)
    reference_direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ConfigError("singular exponent gamma must be positive")
        if self.k < 0 or int(self.k) != self.k:
            raise ConfigError("log power k must be a nonnegative integer")
        dx, dy = self.reference_direction
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            raise ConfigError("reference direction must be a nonzero vector")
        object.__setattr__(self, "reference_direction", (dx / norm, dy / norm))
        object.__setattr__(self, "_alpha", math.atan2(dy, dx))

    @property
    def singular_centers(self) -> tuple[tuple[float, float], ...]:
        return (self.center,)

    def _polar(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx = x - self.center[0]
        dy = y - self.center[1]
        r = np.hypot(dx, dy)
        theta = np.mod(np.arctan2(dy, dx) - self._alpha, _TWO_PI)
        return r, theta

    def _radial(self, r):
        """(ln r)**k * r**gamma, with the removable limit 0 at r = 0."""
        with np.errstate(divide="ignore", invalid="ignore"):
            rad = np.where(r > 0.0, np.log(np.where(r > 0.0, r, 1.0)) ** self.k * r**self.gamma, 0.0)
        return rad

    def value(self, x, y):
        r, theta = self._polar(x, y)
        return self.c * self._radial(r) * self.angular.g(theta) * self.cutoff.chi(r)

    def __call__(self, x, y):
        return self.value(x, y)

    def grad(self, x, y):
        """Cartesian gradient; raises :class:`SingularityError` at the center."""
        r, theta = self._polar(x, y)
        if np.any(r == 0.0):
            raise SingularityError("gradient requested at a singular center (r = 0)")
        lr = np.log(r)
        rad = lr**self.k * r**self.gamma
        drad = r ** (self.gamma - 1.0) * (
            self.gamma * lr**self.k + (self.k * lr ** (self.k - 1) if self.k > 0 else 0.0)
        )
        g = self.angular.g(theta)
        dg = self.angular.dg(theta)
        chi = self.cutoff.chi(r)
        dchi = self.cutoff.dchi(r)
        du_dr = self.c * g * (drad * chi + rad * dchi)
        du_dt = self.c * rad * dg * chi
        phi = theta + self._alpha
        cos, sin = np.cos(phi), np.sin(phi)
        gx = du_dr * cos - du_dt * sin / r
        gy = du_dr * sin + du_dt * cos / r
        return gx, gy


def preset_poisson_corner(
    omega: float,
    center: tuple[float, float] = (0.0, 0.0),
    c: float = 1.0,
    cutoff: Cutoff | None = None,
    reference_direction: tuple[float, float] = (1.0, 0.0),
) -> SingularTerm:
    """Leading corner mode r**(pi/omega) * sin(pi*theta/omega) of a Dirichlet corner
    with interior angle omega (reentrant corners omega > pi give exponents < 1)."""
    if not (0.0 < omega <= _TWO_PI):
        raise ConfigError("corner angle omega must lie in (0, 2*pi]")
    return SingularTerm(
        c=c,
        k=0,
        gamma=math.pi / omega,
        center=center,
        angular=SinAngular(omega),
        cutoff=cutoff if cutoff is not None else Cutoff(),
        reference_direction=reference_direction,
    )


@dataclass(frozen=True)
class FunctionPart:
    """A smooth (regular) summand given by vectorized value/gradient callables."""

    name: str
    _value: object
    _grad: object
    singular_centers: tuple = ()

    def value(self, x, y):
        return self._value(np.asarray(x, float), np.asarray(y, float))

    def grad(self, x, y):
        return self._grad(np.asarray(x, float), np.asarray(y, float))


class SumFunction:
    """Sum of singular terms and/or smooth parts, with pooled singular centers."""

    def __init__(self, parts):
        self.parts = tuple(parts)
        centers: list[tuple[float, float]] = []
        for p in self.parts:
            for ctr in getattr(p, "singular_centers", ()):
                if ctr not in centers:
                    centers.append(ctr)
        self.singular_centers = tuple(centers)

    def value(self, x, y):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(x, np.asarray(y)).shape, dtype=float)
        for p in self.parts:
            out = out + p.value(x, y)
        return out

    def grad(self, x, y):
        gx = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=float)
        gy = np.zeros_like(gx)
        for p in self.parts:
            px, py = p.grad(x, y)
            gx = gx + px
            gy = gy + py
        return gx, gy


@dataclass
class BoundCheck:
    """Empirical constants for |u| <= C r**gb and |grad u| <= C r**(gb-1)."""

    gamma_bar: float
    radii: np.ndarray
    value_ratio_by_radius: np.ndarray
    grad_ratio_by_radius: np.ndarray

    @property
    def value_constant(self) -> float:
        return float(np.max(self.value_ratio_by_radius))

    @property
    def grad_constant(self) -> float:
        return float(np.max(self.grad_ratio_by_radius))


def bound_check(
    term: SingularTerm,
    gamma_bar: float,
    sample_count: int = 64,
    radii=None,
) -> BoundCheck:
    """Sample |u| / r**gamma_bar and |grad u| / r**(gamma_bar - 1) on shrinking circles.

    With gamma_bar <= gamma/2 (or <= gamma when k = 0) the ratios stay bounded
    as r -> 0; the per-radius maxima let callers check stabilization (or
    divergence, as a negative control).
    """
    if radii is None:
        radii = np.logspace(-1, -8, 15)
    radii = np.asarray(radii, dtype=float)
    thetas = np.linspace(0.0, _TWO_PI, sample_count, endpoint=False) + 1e-4
    vr = np.empty_like(radii)
    gr = np.empty_like(radii)
    cx, cy = term.center
    for i, r in enumerate(radii):
        x = cx + r * np.cos(thetas)
        y = cy + r * np.sin(thetas)
        vr[i] = np.max(np.abs(term.value(x, y))) / r**gamma_bar
        gx, gy = term.grad(x, y)
        gr[i] = np.max(np.hypot(gx, gy)) / r ** (gamma_bar - 1.0)
    return BoundCheck(gamma_bar=gamma_bar, radii=radii,
                      value_ratio_by_radius=vr, grad_ratio_by_radius=gr)


def check_jump_alignment(mesh: Mesh, term: SingularTerm, *, angle_tol: float = 1e-9) -> list[float]:
    """Angles (world frame) where dg jumps but no initial-mesh edge leaves the center.

    Gradient jumps of a singular term must run along edges of the initial
    triangulation; returns the offending ray angles (empty when aligned).
    The term's center must be a vertex of the mesh.
    """
    vx = mesh.vertex_coords()
    cx, cy = term.center
    d = np.hypot(vx[:, 0] - cx, vx[:, 1] - cy)
    vid = int(np.argmin(d))
    if d[vid] > 1e-12:
        raise ConfigError(f"singular center {term.center} is not a mesh vertex")
    edge_angles = []
    for (a, b) in mesh.edge_map:
        for u, v in ((a, b), (b, a)):
            if u == vid:
                ang = math.atan2(vx[v, 1] - cy, vx[v, 0] - cx)
                edge_angles.append(ang % _TWO_PI)
    offending = []
    for jump in term.angular.interior_jump_angles():
        world = (jump + term._alpha) % _TWO_PI
        ok = any(
            min(abs(world - ea), _TWO_PI - abs(world - ea)) <= angle_tol for ea in edge_angles
        )
        if not ok:
            offending.append(world)
    return offending
