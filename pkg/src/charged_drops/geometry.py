"""Shape representations and purely geometric quantities.

Star-shaped planar regions are stored as truncated Fourier series of the
radial perturbation: the boundary is {center + R (1 + phi(theta)) e^(i theta)}
with phi(theta) = a0 + sum_k (a_k cos k theta + b_k sin k theta).  All
boundary integrals use the trapezoidal rule on a uniform theta grid, which
is spectrally accurate for smooth periodic integrands and exact for
band-limited ones.  Annuli and balls are primitives carrying their radii.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _nm_minimize


class InvalidShapeError(ValueError):
    """A shape violates its invariants (e.g. the boundary is not a graph)."""


# ---------------------------------------------------------------------------
# Fourier curves
# ---------------------------------------------------------------------------

@dataclass
class FourierCurve:
    """Star-shaped planar region r(theta) = R (1 + phi(theta)) about center.

    a[k-1], b[k-1] are the cos/sin coefficients of mode k >= 1; a0 is the
    constant mode.  n_samples is the uniform quadrature grid size and must
    resolve quartic products of the highest retained mode (>= 4K + 4).
    """

    base_radius: float
    center: tuple[float, float] = (0.0, 0.0)
    a0: float = 0.0
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()
    n_samples: int = 1024

    def __post_init__(self):
        if self.base_radius <= 0:
            raise InvalidShapeError("base_radius must be positive")
        k = max(len(self.a), len(self.b), 2)
        self.a = tuple(self.a) + (0.0,) * (k - len(self.a))
        self.b = tuple(self.b) + (0.0,) * (k - len(self.b))
        self.center = (float(self.center[0]), float(self.center[1]))
        if self.n_samples < 4 * k + 4:
            raise InvalidShapeError(
                f"n_samples={self.n_samples} aliases mode {k}; need >= {4 * k + 4}")
        self._grid = None
        if np.min(1.0 + self.phi()) <= 0.0:
            raise InvalidShapeError("1 + phi must stay positive (radial graph)")

    @property
    def n_modes(self) -> int:
        return len(self.a)

    @property
    def dim(self) -> int:
        return 2

    def thetas(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * math.pi, self.n_samples, endpoint=False)

    def _samples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # exact spectral evaluation of phi, phi', phi'' on the grid
        if self._grid is None:
            t = self.thetas()
            k = np.arange(1, self.n_modes + 1, dtype=float)
            kt = np.outer(t, k)
            ck, sk = np.cos(kt), np.sin(kt)
            a = np.asarray(self.a)
            b = np.asarray(self.b)
            phi = self.a0 + ck @ a + sk @ b
            dphi = ck @ (k * b) - sk @ (k * a)
            ddphi = -(ck @ (k ** 2 * a) + sk @ (k ** 2 * b))
            self._grid = (phi, dphi, ddphi)
        return self._grid

    def phi(self) -> np.ndarray:
        return self._samples()[0]

    def phi_dot(self) -> np.ndarray:
        return self._samples()[1]

    def phi_ddot(self) -> np.ndarray:
        return self._samples()[2]

    def phi_at(self, theta: np.ndarray) -> np.ndarray:
        k = np.arange(1, self.n_modes + 1, dtype=float)
        kt = np.multiply.outer(theta, k)
        return (self.a0 + np.cos(kt) @ np.asarray(self.a)
                + np.sin(kt) @ np.asarray(self.b))

    def radius_at(self, theta: np.ndarray) -> np.ndarray:
        return self.base_radius * (1.0 + self.phi_at(theta))

    def is_circle(self) -> bool:
        return self.a0 == 0.0 and not any(self.a) and not any(self.b)

    def max_radius(self) -> float:
        return self.base_radius * float(1.0 + np.max(self.phi()))

    def min_radius(self) -> float:
        return self.base_radius * float(1.0 + np.min(self.phi()))

    def translated(self, dx: float, dy: float) -> "FourierCurve":
        return FourierCurve(self.base_radius,
                            (self.center[0] + dx, self.center[1] + dy),
                            self.a0, self.a, self.b, self.n_samples)

    def scaled(self, s: float) -> "FourierCurve":
        return FourierCurve(self.base_radius * s,
                            (self.center[0] * s, self.center[1] * s),
                            self.a0, self.a, self.b, self.n_samples)

    def with_coeffs(self, a0: float, a, b) -> "FourierCurve":
        return FourierCurve(self.base_radius, self.center, a0, tuple(a),
                            tuple(b), self.n_samples)

    def to_json(self) -> dict:
        return {"dim": 2, "center": list(self.center),
                "base_radius": self.base_radius,
                "coeffs": {"a0": self.a0, "a": list(self.a), "b": list(self.b)}}

    @staticmethod
    def from_json(obj: dict) -> "FourierCurve":
        c = obj["coeffs"]
        return FourierCurve(obj["base_radius"], tuple(obj.get("center", (0, 0))),
                            c.get("a0", 0.0), tuple(c.get("a", ())),
                            tuple(c.get("b", ())),
                            obj.get("n_samples", 1024))


def circle(radius: float = 1.0, center: tuple[float, float] = (0.0, 0.0),
           n_samples: int = 1024) -> FourierCurve:
    return FourierCurve(radius, center, n_samples=n_samples)


# ---------------------------------------------------------------------------
# annuli, balls, configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusSpec:
    """B_r_out minus B_r_in(offset) in dimension 2 or 3; r_in = 0 is a ball."""

    dim: int
    r_in: float
    r_out: float
    offset: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidShapeError("dim must be 2 or 3")
        if self.r_in < 0 or self.r_out <= 0:
            raise InvalidShapeError("radii must satisfy 0 <= r_in, 0 < r_out")
        off = tuple(float(x) for x in self.offset) or (0.0,) * self.dim
        if len(off) != self.dim:
            raise InvalidShapeError("offset dimension mismatch")
        object.__setattr__(self, "offset", off)
        if self.r_in + self.offset_norm > self.r_out + 1e-12:
            raise InvalidShapeError("inner ball must stay inside the outer ball")
        if self.volume <= 0:
            raise InvalidShapeError("annulus must have positive volume")

    @property
    def offset_norm(self) -> float:
        return math.hypot(*self.offset)

    @property
    def is_ball(self) -> bool:
        return self.r_in == 0.0

    @property
    def volume(self) -> float:
        if self.dim == 2:
            return math.pi * (self.r_out ** 2 - self.r_in ** 2)
        return 4.0 / 3.0 * math.pi * (self.r_out ** 3 - self.r_in ** 3)

    def to_json(self) -> dict:
        return {"dim": self.dim, "r_in": self.r_in, "r_out": self.r_out,
                "offset": list(self.offset)}

    @staticmethod
    def from_json(obj: dict) -> "AnnulusSpec":
        return AnnulusSpec(obj["dim"], obj["r_in"], obj["r_out"],
                           tuple(obj.get("offset", ())))


def ball(radius: float, dim: int = 2) -> AnnulusSpec:
    return AnnulusSpec(dim, 0.0, radius)


def centered_annulus(r_in: float, r_out: float, dim: int = 2) -> AnnulusSpec:
    return AnnulusSpec(dim, r_in, r_out)


def unit_area_annulus(r: float) -> AnnulusSpec:
    """The 2D annulus with inner radius r and area pi (outer sqrt(1 + r^2))."""
    return AnnulusSpec(2, r, math.sqrt(1.0 + r * r))


@dataclass(frozen=True)
class Component:
    """One connected piece of a configuration: an outer boundary with holes.

    position places the component in the plane; None means the component
    is regarded as arbitrarily far from every other one, so interaction
    energies between components vanish by construction.
    """

    outer: object
    holes: tuple = ()
    position: tuple[float, float] | None = None

    def bounding_radius(self) -> float:
        if isinstance(self.outer, AnnulusSpec):
            return self.outer.r_out
        return self.outer.max_radius() + math.hypot(*self.outer.center)


@dataclass(frozen=True)
class Configuration:
    """A disjoint union of components, each a shape with optional holes."""

    components: tuple[Component, ...]
    dim: int = 2

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        for c in comps:
            if isinstance(c.outer, AnnulusSpec) and c.holes:
                raise InvalidShapeError("annulus primitives carry their own hole")
            for h in c.holes:
                if not _hole_inside(c.outer, h):
                    raise InvalidShapeError("hole not strictly inside its component")
        placed = [c for c in comps if c.position is not None]
        for i in range(len(placed)):
            for j in range(i + 1, len(placed)):
                ci, cj = placed[i], placed[j]
                dist = math.hypot(ci.position[0] - cj.position[0],
                                  ci.position[1] - cj.position[1])
                if dist <= ci.bounding_radius() + cj.bounding_radius():
                    raise InvalidShapeError(
                        "components overlap (bounding circles intersect)")


def _hole_inside(outer: FourierCurve, hole: FourierCurve) -> bool:
    # bounding-circle test only; exact curve-curve intersection is out of scope
    sep = math.hypot(hole.center[0] - outer.center[0],
                     hole.center[1] - outer.center[1])
    return sep + hole.max_radius() < outer.min_radius()


# ---------------------------------------------------------------------------
# geometric quantities
# ---------------------------------------------------------------------------

def area(shape) -> float:
    """Enclosed area: (R^2/2) int (1 + phi)^2 for curves, closed form otherwise."""
    if isinstance(shape, AnnulusSpec):
        return shape.volume
    if isinstance(shape, Configuration):
        return sum(area(c.outer) - sum(area(h) for h in c.holes)
                   for c in shape.components)
    rho = 1.0 + shape.phi()
    w = 2.0 * math.pi / shape.n_samples
    return 0.5 * shape.base_radius ** 2 * float(np.sum(rho ** 2)) * w


def perimeter(shape) -> float:
    """Boundary length (2D) or area (3D); holes and inner radii included."""
    if isinstance(shape, AnnulusSpec):
        if shape.dim == 2:
            return 2.0 * math.pi * (shape.r_in + shape.r_out)
        return 4.0 * math.pi * (shape.r_in ** 2 + shape.r_out ** 2)
    if isinstance(shape, Configuration):
        return sum(perimeter(c.outer) + sum(perimeter(h) for h in c.holes)
                   for c in shape.components)
    rho = 1.0 + shape.phi()
    drho = shape.phi_dot()
    w = 2.0 * math.pi / shape.n_samples
    return shape.base_radius * float(np.sum(np.sqrt(drho ** 2 + rho ** 2))) * w


def barycenter(curve: FourierCurve) -> tuple[float, float]:
    """Area barycenter from the boundary moment integral (R^3/3) int rho^3 e^(i t)."""
    rho = 1.0 + curve.phi()
    t = curve.thetas()
    w = 2.0 * math.pi / curve.n_samples
    m = curve.base_radius ** 3 / 3.0 * w
    mx = m * float(np.sum(rho ** 3 * np.cos(t)))
    my = m * float(np.sum(rho ** 3 * np.sin(t)))
    a = area(curve)
    return (curve.center[0] + mx / a, curve.center[1] + my / a)


def symmetric_difference(a: FourierCurve, b: FourierCurve) -> float:
    """|A Δ B| for two radial graphs about the same center."""
    if a.center != b.center:
        raise InvalidShapeError(
            "symmetric_difference needs a common center; translate first")
    n = max(a.n_samples, b.n_samples)
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    ra = a.radius_at(t)
    rb = b.radius_at(t)
    return 0.5 * float(np.sum(np.abs(ra ** 2 - rb ** 2))) * (2.0 * math.pi / n)


# --- rasterized symmetric difference against an offset ball ----------------

class _CurveRaster:
    """Membership of a curve's region on a shape-local square grid.

    The grid is anchored at the curve's center, so the same curve
    translated anywhere rasterizes identically.  Candidate ball centers
    are expressed relative to the curve center.  Pixels are kept sorted
    by radius: for a ball B_s(x), pixels with r < min(s - |x|, rho_min)
    lie in both regions and pixels with r > max(rho_max, s + |x|) in
    neither, so only the slice in between can disagree and the count
    over that slice equals the count over the full grid.
    """

    def __init__(self, curve: FourierCurve, half_extent: float, resolution: int):
        self.h = 2.0 * half_extent / resolution
        axis = ((np.arange(resolution) + 0.5) * self.h - half_extent).astype(np.float32)
        x = np.broadcast_to(axis[:, None], (resolution, resolution)).ravel()
        y = np.broadcast_to(axis[None, :], (resolution, resolution)).ravel()
        r = np.hypot(x, y)
        psi = np.arctan2(y, x)
        inside = r <= (curve.base_radius
                       * (1.0 + curve.phi_at(psi.astype(np.float64)))).astype(np.float32)
        order = np.argsort(r)
        self.x = x[order]
        self.y = y[order]
        self.r = r[order]
        self.inside = inside[order]
        self.rho_min = curve.min_radius()
        self.rho_max = curve.max_radius()

    def sym_diff_ball(self, cx: float, cy: float, s: float) -> float:
        xnorm = math.hypot(cx, cy)
        lo = min(s - xnorm, self.rho_min) - 4.0 * self.h
        hi = max(self.rho_max, s + xnorm) + 4.0 * self.h
        i0, i1 = np.searchsorted(self.r, np.asarray((lo, hi), dtype=np.float32))
        dx = self.x[i0:i1] - np.float32(cx)
        dy = self.y[i0:i1] - np.float32(cy)
        in_ball = dx * dx + dy * dy <= np.float32(s * s)
        return float(np.count_nonzero(self.inside[i0:i1] ^ in_ball)) * self.h ** 2


def _init_simplex(x0: tuple[float, float], scale: float) -> np.ndarray:
    p = np.asarray(x0, dtype=float)
    return np.array([p, p + (scale, 0.0), p + (0.0, scale)])


def sym_diff_vs_ball(curve: FourierCurve, ball_center: tuple[float, float],
                     ball_radius: float, resolution: int = 2048) -> float:
    """Rasterized |E Δ B_s(x)|; resolution is the pixel count per axis."""
    rel = (ball_center[0] - curve.center[0], ball_center[1] - curve.center[1])
    half = max(curve.max_radius(),
               math.hypot(*rel) + ball_radius) * 1.05 + 2.0 * ball_radius / resolution
    raster = _CurveRaster(curve, half, resolution)
    return raster.sym_diff_ball(rel[0], rel[1], ball_radius)


def asymmetry(curve: FourierCurve, resolution: int = 2048) -> float:
    """min over x of |E Δ B(x)| against the ball of equal area.

    Coarse 5x5 grid around the barycenter (spacing R/4), then
    derivative-free refinement; the same-center candidate is also
    evaluated spectrally, which caps the result by the centered
    symmetric difference.
    """
    a_val = area(curve)
    s = math.sqrt(a_val / math.pi)
    bc = barycenter(curve)
    rel_bc = (bc[0] - curve.center[0], bc[1] - curve.center[1])
    r0 = curve.base_radius
    reach = math.hypot(*rel_bc) + 0.75 * r0
    half = max(curve.max_radius(), reach + s) * 1.05
    raster = _CurveRaster(curve, half, resolution)

    spacing = r0 / 4.0
    best_val, best_x = math.inf, rel_bc
    for i in range(-2, 3):
        for j in range(-2, 3):
            x = (rel_bc[0] + i * spacing, rel_bc[1] + j * spacing)
            v = raster.sym_diff_ball(x[0], x[1], s)
            if v < best_val:
                best_val, best_x = v, x

    res = _nm_minimize(lambda p: raster.sym_diff_ball(p[0], p[1], s),
                       x0=np.asarray(best_x), method="Nelder-Mead",
                       options={"xatol": 1e-6 * r0, "fatol": raster.h ** 2,
                                "maxfev": 90,
                                "initial_simplex": _init_simplex(best_x, spacing)})
    refined = min(best_val, float(res.fun))

    # spectral evaluation of the same-center candidate (exact for graphs)
    centered = symmetric_difference(
        curve, FourierCurve(s, curve.center, n_samples=curve.n_samples))
    return min(refined, centered)


# ---------------------------------------------------------------------------
# mass rescaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassBudget:
    """Target area/volume m, normalized against the unit ball measure."""

    m: float
    dim: int = 2

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be positive")

    @property
    def reference(self) -> float:
        return math.pi if self.dim == 2 else 4.0 * math.pi / 3.0


def rescale_mass(params, budget: MassBudget):
    """Map (lambda, Q) at mass m to the equivalent unit-mass parameters.

    Minimizing lambda P + W + Q V_alpha over sets of area m equals
    sqrt(pi/m) times the minimum at area pi with lambda(m) = lambda m/pi
    and Q(m) = Q (m/pi)^((3+alpha)/2).  Returns (new_params, prefactor).
    """
    from .energies import EnergyParams

    if params.dim != 2:
        raise ValueError("mass rescaling is the planar (dim=2) identity map")
    ratio = budget.m / math.pi
    new = EnergyParams(lam=params.lam * ratio,
                       Q=params.Q * ratio ** (0.5 * (3.0 + params.alpha)),
                       alpha=params.alpha, dim=params.dim, quad=params.quad)
    return new, math.sqrt(math.pi / budget.m)


# ---------------------------------------------------------------------------
# shape (de)serialization
# ---------------------------------------------------------------------------

def shape_to_json(shape) -> dict:
    return shape.to_json()


def shape_from_json(obj: dict):
    """Dispatch on the JSON schema: curves carry coeffs, annuli carry radii."""
    if "coeffs" in obj:
        return FourierCurve.from_json(obj)
    if "r_out" in obj:
        return AnnulusSpec.from_json(obj)
    raise InvalidShapeError(f"unrecognized shape JSON with keys {sorted(obj)}")


def load_shape(path: str):
    with open(path) as f:
        return shape_from_json(json.load(f))
