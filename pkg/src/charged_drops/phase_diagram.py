"""Ball/annulus threshold, cell classification, and non-existence certificates.

The uncharged threshold lambda_bar is the unique zero of the strictly
decreasing gap g(lambda) = 2 pi (lambda + 1) - f_lambda(r_lambda) between
the ball energy and the optimal annulus energy; balls win above, annuli
below, and the zero is known a priori to lie in (0, sqrt(2)/2].

A (lambda, Q) cell is classified by direct energy comparison between the
ball, the optimal charged annulus, and a family of far-separated
multi-annulus competitors, against the explicit lower bound valid for
every connected set:

    2D:  F >= min_{d >= 2} [ 2 lambda d + 4 pi / d + Q pi^2 d^(alpha-2) ]
    3D:  F >= min_{d >= 2} [ pi sqrt(lambda) d + Q (4 pi / 3)^2 d^(alpha-3) ]

(2D: perimeter >= 2 diam, diam * bending >= 4 pi, Riesz >= |E|^2 /
diam^(2-alpha); 3D: lambda P + W >= 2 sqrt(lambda P W) and
diam <= (2/pi) sqrt(P W), so lambda P + W >= pi sqrt(lambda) diam.)
A disconnected competitor strictly below that bound, beyond the
numerical error budget, certifies that no minimizer exists.  Everything
else is a heuristic label: BALL or ANNULUS when one candidate wins by
more than the combined error, UNKNOWN otherwise.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .annulus import (annulus_riesz_table, f_lambda, golden_section,
                      optimal_charged_annulus, r_lambda)
from .quadrature import riesz_radial, unit_ball_riesz

SQRT2_OVER_2 = math.sqrt(2.0) / 2.0

BALL = "BALL"
ANNULUS = "ANNULUS"
NONEXISTENCE_CERTIFIED = "NONEXISTENCE_CERTIFIED"
UNKNOWN = "UNKNOWN"


# ---------------------------------------------------------------------------
# the uncharged threshold
# ---------------------------------------------------------------------------

def energy_gap(lam: float) -> float:
    """g(lambda) = 2 pi (lambda + 1) - f_lambda(r_lambda); positive iff annuli win."""
    return 2.0 * math.pi * (lam + 1.0) - f_lambda(lam, r_lambda(lam))


@dataclass(frozen=True)
class ThresholdResult:
    lambda_bar: float
    bracket: tuple[float, float]
    residual: float

    def to_json(self) -> dict:
        return {"lambda_bar": self.lambda_bar, "bracket": list(self.bracket),
                "residual": self.residual}


def lambda_bar(tolerance: float = 1e-10) -> ThresholdResult:
    """Bisection for the zero of the gap on (0, sqrt(2)/2].

    The gap is strictly decreasing (its derivative is 2 pi (1 - r - sqrt(1+r^2))
    evaluated at the optimal annulus, negative since r + sqrt(1+r^2) > 1),
    positive for small lambda and non-positive at sqrt(2)/2, so the root
    is unique and bracketed a priori.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    lo, hi = 1e-6, SQRT2_OVER_2
    while energy_gap(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise ArithmeticError("no positive gap found at tiny lambda")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if energy_gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tolerance and abs(energy_gap(0.5 * (lo + hi))) <= tolerance:
            break
    root = 0.5 * (lo + hi)
    return ThresholdResult(root, (lo, hi), abs(energy_gap(root)))


_LAMBDA_BAR_CACHE: list[float] = []


def lambda_bar_value() -> float:
    if not _LAMBDA_BAR_CACHE:
        _LAMBDA_BAR_CACHE.append(lambda_bar(1e-12).lambda_bar)
    return _LAMBDA_BAR_CACHE[0]


# ---------------------------------------------------------------------------
# connected lower bounds
# ---------------------------------------------------------------------------

def _minimize_over_diameter(fn, lo: float = 2.0) -> float:
    """Minimize a convex diameter bound over [lo, infinity)."""
    hi = 2.0 * lo
    for _ in range(200):
        if fn(hi) > fn(0.5 * hi) or hi > 1e12:
            break
        hi *= 2.0
    d, val = golden_section(fn, lo, hi, tol=1e-10 * hi)
    return min(val, fn(lo))


def connected_lower_bound_2d(lam: float, Q: float, alpha: float) -> float:
    """min over d >= 2 of 2 lambda d + 4 pi / d + Q pi^2 d^(alpha-2).

    Valid for every connected planar set of area pi.  Degenerates to zero
    when lambda = 0 (the infimum is approached as d grows); the
    lambda = Q = 0 corner carries no information and is rejected.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    if lam < 0 or Q < 0 or (lam == 0 and Q == 0):
        raise ValueError("need lambda, Q >= 0 and not both zero")
    if lam == 0.0:
        return 0.0

    def bound(d: float) -> float:
        return 2.0 * lam * d + 4.0 * math.pi / d + Q * math.pi ** 2 * d ** (alpha - 2.0)

    return _minimize_over_diameter(bound)


def connected_lower_bound_3d(lam: float, Q: float, alpha: float) -> float:
    """min over d >= 2 of pi sqrt(lambda) d + Q (4 pi / 3)^2 d^(alpha-3)."""
    if not 0.0 < alpha < 3.0:
        raise ValueError("alpha must lie in (0, 3)")
    if lam < 0 or Q < 0 or (lam == 0 and Q == 0):
        raise ValueError("need lambda, Q >= 0 and not both zero")
    if lam == 0.0:
        return 0.0
    vol = 4.0 * math.pi / 3.0

    def bound(d: float) -> float:
        return math.pi * math.sqrt(lam) * d + Q * vol ** 2 * d ** (alpha - 3.0)

    return _minimize_over_diameter(bound)


# ---------------------------------------------------------------------------
# disconnected competitors
# ---------------------------------------------------------------------------

def competitor_multi_annuli_2d(n_pieces: int, outer_radius: float, lam: float,
                               Q: float, alpha: float) -> float:
    """Energy of n identical annuli of outer radius R, total area pi.

    Each piece has area pi / n, so its inner radius is sqrt(R^2 - 1/n).
    Pieces sit arbitrarily far apart: interaction between distinct pieces
    vanishes in the limit, making the value a strict upper bound for the
    infimum over such configurations (up to the quadrature error of the
    single-annulus Riesz term).
    """
    if n_pieces < 2 or int(n_pieces) != n_pieces:
        raise ValueError("need an integer number of pieces >= 2")
    if outer_radius ** 2 <= 1.0 / n_pieces:
        raise ValueError("outer radius too small: inner radius would be imaginary")
    n = int(n_pieces)
    r_in = math.sqrt(outer_radius ** 2 - 1.0 / n)
    per_perimeter = 2.0 * math.pi * (r_in + outer_radius)
    per_bending = 2.0 * math.pi * (1.0 / r_in + 1.0 / outer_radius)
    if Q > 0:
        table = annulus_riesz_table(alpha)
        per_riesz = table.annulus_value(r_in, outer_radius)
    else:
        per_riesz = 0.0
    return n * (lam * per_perimeter + per_bending + Q * per_riesz)


def _shell_volume_thickness(R: float, n: int) -> float:
    """Thickness h with n shells of inner radius R holding total volume |B_1|."""
    return (R ** 3 + 1.0 / n) ** (1.0 / 3.0) - R


_SHELL_RIESZ_CACHE: dict[tuple, float] = {}


def competitor_multi_shells_3d(n_pieces: int, inner_radius: float, lam: float,
                               Q: float, alpha: float) -> float:
    """Energy of n identical spherical shells of inner radius R, total volume |B_1|."""
    if n_pieces < 2 or int(n_pieces) != n_pieces:
        raise ValueError("need an integer number of pieces >= 2")
    n = int(n_pieces)
    R = inner_radius
    h = _shell_volume_thickness(R, n)
    per_area = 4.0 * math.pi * (R ** 2 + (R + h) ** 2)
    per_bending = 8.0 * math.pi
    per_riesz = 0.0
    if Q > 0:
        key = (round(R, 12), n, round(alpha, 14))
        per_riesz = _SHELL_RIESZ_CACHE.get(key)
        if per_riesz is None:
            per_riesz, _ = riesz_radial(R, R + h, alpha, 3, rel_tol=1e-6)
            if len(_SHELL_RIESZ_CACHE) < 100000:
                _SHELL_RIESZ_CACHE[key] = per_riesz
    return n * (lam * per_area + per_bending + Q * per_riesz)


@dataclass(frozen=True)
class Certificate:
    certified: bool
    witness_n: int | None
    witness_radius: float | None
    competitor_energy: float | None
    lower_bound: float
    margin: float

    def to_json(self) -> dict:
        return {"certified": self.certified, "witness_N": self.witness_n,
                "witness_R": self.witness_radius,
                "competitor_energy": self.competitor_energy,
                "lower_bound": self.lower_bound, "margin": self.margin}


def _radius_grid(seed: float, floor: float, n_points: int) -> np.ndarray:
    grid = seed * np.logspace(-0.8, 0.8, n_points)
    return np.maximum(grid, floor)


def nonexistence_certificate_2d(lam: float, Q: float, alpha: float,
                                n_max: int = 64,
                                n_radii: int = 32) -> Certificate:
    """Search far-separated multi-annulus competitors below the connected bound.

    A minimizer, if it exists, is connected, hence obeys the connected
    lower bound; a disconnected competitor strictly below that bound
    (beyond the error budget of its Riesz term) rules minimizers out.
    Radii follow the regime split of the construction: outer radius near
    one when the perimeter weight is at least one, otherwise near
    (Q / (N^2 lambda))^(1/(3-alpha)) but never below lambda^(-1/2).
    """
    if not 1.0 < alpha < 2.0:
        raise ValueError("the 2D certificate needs alpha in (1, 2)")
    if lam <= 0 or Q <= 0:
        raise ValueError("the certificate regime needs positive lambda and Q")
    bound = connected_lower_bound_2d(lam, Q, alpha)
    best = (math.inf, None, None)
    for n in range(2, n_max + 1):
        if lam >= 1.0:
            seed = 1.0
            floor = math.sqrt(1.0 / n) * (1.0 + 1e-9)
        else:
            seed = (Q / (n * n * lam)) ** (1.0 / (3.0 - alpha))
            floor = lam ** -0.5
        for R in _radius_grid(seed, max(floor, math.sqrt(1.0 / n) * (1 + 1e-9)),
                              n_radii):
            e = competitor_multi_annuli_2d(n, float(R), lam, Q, alpha)
            if e < best[0]:
                best = (e, n, float(R))
    err = 1e-6 * best[0] + 1e-9
    certified = best[0] + err < bound
    return Certificate(certified, best[1], best[2], best[0], bound,
                       bound - best[0])


def nonexistence_certificate_3d(lam: float, Q: float, alpha: float,
                                n_max: int = 256,
                                n_radii: int = 32) -> Certificate:
    """3D analogue with shell competitors of inner radius near lambda^(-1/2)."""
    if not 2.0 < alpha < 3.0:
        raise ValueError("the 3D certificate needs alpha in (2, 3)")
    if lam <= 0 or Q <= 0:
        raise ValueError("the certificate regime needs positive lambda and Q")
    bound = connected_lower_bound_3d(lam, Q, alpha)
    best = (math.inf, None, None)
    n_star = max(2, int(round(lam ** ((3.0 - alpha) / 4.0) * math.sqrt(Q))))
    n_lo = max(2, n_star // 8)
    n_hi = min(n_max, max(n_star * 8, 16))
    n_values = sorted(set(int(round(x)) for x in
                          np.geomspace(n_lo, n_hi, num=min(48, n_hi - n_lo + 1))))
    for n in n_values:
        seed = lam ** -0.5
        for R in _radius_grid(seed, 1e-6, n_radii):
            e = competitor_multi_shells_3d(n, float(R), lam, Q, alpha)
            if e < best[0]:
                best = (e, n, float(R))
    err = 1e-5 * best[0] + 1e-9
    certified = best[0] + err < bound
    return Certificate(certified, best[1], best[2], best[0], bound,
                       bound - best[0])


# ---------------------------------------------------------------------------
# cell classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseCell:
    lam: float
    Q: float
    alpha: float
    dim: int
    ball_energy: float
    annulus_energy: float
    annulus_r: float
    competitor: Certificate | None
    lower_bound: float
    classification: str
    note: str = ""
    conditions: dict = field(default_factory=dict)

    def csv_row(self) -> list:
        comp = self.competitor
        return [repr(self.lam), repr(self.Q), repr(self.alpha), self.dim,
                repr(self.ball_energy), repr(self.annulus_energy),
                repr(self.annulus_r),
                comp.witness_n if comp else "",
                repr(comp.witness_radius) if comp else "",
                repr(comp.competitor_energy) if comp else "",
                repr(self.lower_bound), self.classification]


CSV_HEADER = ["lambda", "Q", "alpha", "dim", "ball_energy", "annulus_energy",
              "annulus_r", "competitor_N", "competitor_R", "competitor_energy",
              "lower_bound", "classification"]


def classify_cell(lam: float, Q: float, alpha: float,
                  certificate_search: bool = True) -> PhaseCell:
    """Label one planar (lambda, Q) cell by direct energy comparison.

    The label is heuristic except for NONEXISTENCE_CERTIFIED, which rests
    on the explicit connected lower bound.  Recorded side conditions note
    which sufficient regimes (threshold side, charge-scaling envelopes
    with unit surrogate constants) the cell satisfies.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if Q < 0:
        raise ValueError("Q must be non-negative")
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    lbar = lambda_bar_value()
    v_ball = unit_ball_riesz(alpha, 2)
    ball_energy = 2.0 * math.pi * (lam + 1.0) + Q * v_ball
    table = annulus_riesz_table(alpha) if Q > 0 else None
    opt = optimal_charged_annulus(lam, Q, alpha,
                                  g=(table.g if table else None))
    bound = connected_lower_bound_2d(lam, Q, alpha)
    cert = None
    if certificate_search and Q > 0 and 1.0 < alpha < 2.0:
        cert = nonexistence_certificate_2d(lam, Q, alpha)
    err = 1e-6 * (abs(ball_energy) + abs(opt.energy)) * (1.0 if Q > 0 else 1e-6)
    if cert is not None and cert.certified:
        label = NONEXISTENCE_CERTIFIED
    elif ball_energy < opt.energy - err:
        label = BALL
    elif opt.energy < ball_energy - err:
        label = ANNULUS
    else:
        label = UNKNOWN
    conditions = {
        "lambda_above_threshold": lam > lbar,
        "ball_small_charge_envelope": lam > lbar and Q <= (lam - lbar),
        "annulus_small_charge_envelope": lam <= lbar
        and Q <= lam ** (0.5 * (3.0 + alpha)),
    }
    return PhaseCell(lam, Q, alpha, 2, ball_energy, opt.energy, opt.r_star,
                     cert, bound, label, conditions=conditions)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanGrid:
    lambda_range: tuple[float, float]
    q_range: tuple[float, float]
    n_lambda: int
    n_q: int

    def lambdas(self) -> np.ndarray:
        lo, hi = self.lambda_range
        return np.geomspace(lo, hi, self.n_lambda)

    def qs(self) -> np.ndarray:
        lo, hi = self.q_range
        return np.geomspace(lo, hi, self.n_q)


def scan(grid: ScanGrid, alpha: float, threads: int | None = None) -> list[PhaseCell]:
    """classify_cell over a log-log grid, row-major in (lambda, Q).

    Cell failures never abort the scan; they are recorded as UNKNOWN
    cells with the error message in the note.  Output order is by cell
    index regardless of execution order, so runs are reproducible.
    """
    if min(grid.lambda_range) <= 0 or min(grid.q_range) <= 0:
        raise ValueError("scan ranges must be positive")
    if grid.n_lambda < 1 or grid.n_q < 1:
        raise ValueError("resolution must be positive")
    pairs = [(lam, q) for lam in grid.lambdas() for q in grid.qs()]
    if threads is None:
        threads = int(os.environ.get("CHARGED_DROPS_THREADS", "1"))
    # warm shared caches before any parallel section
    lambda_bar_value()
    unit_ball_riesz(alpha, 2)
    annulus_riesz_table(alpha)

    def one(pair):
        lam, q = pair
        try:
            return classify_cell(float(lam), float(q), alpha)
        except Exception as exc:  # recorded, never fatal for the scan
            return PhaseCell(float(lam), float(q), alpha, 2, math.nan, math.nan,
                             math.nan, None, math.nan, UNKNOWN,
                             note=f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]


def write_scan_csv(cells: list[PhaseCell], path: str) -> None:
    """Atomic CSV dump of a scan in the schema order of CSV_HEADER."""
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for cell in cells:
            writer.writerow(cell.csv_row())
    os.replace(tmp, path)
