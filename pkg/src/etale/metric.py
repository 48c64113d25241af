"""Word-metric geometry of the fibers: growth statistics, four-point
hyperbolicity defects, overlap constants, and the band estimate for
convolutions against sphere-supported functions.

Every fiber of an action groupoid carries the word metric
``d(x, y) = length(x^-1 y)`` of the group backend, so fiberwise
quantities are computed at the group level once and are identical
across units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import CcFunction, convolve
from .errors import BudgetError, NonComposableError, PreconditionError
from .model import GroupoidElement, GroupoidModel

DEFAULT_QUADRUPLE_BUDGET = 100_000_000


def length(model: GroupoidModel, g: GroupoidElement) -> int:
    return model.length(g)


def fiber_distance(model: GroupoidModel, x: GroupoidElement, y: GroupoidElement) -> int:
    """Distance ``length(x^-1 y)`` between elements of a common range fiber."""
    if x.unit != y.unit:
        raise NonComposableError("fiber distance needs elements with a common range unit")
    return model.backend.length(model.backend.mul(model.backend.inv(x.word), y.word))


# -- growth -----------------------------------------------------------------

@dataclass
class GrowthReport:
    """Sphere/ball counts with certified exponential envelopes.

    ``envelope_r`` certifies ``sphere(k) <= envelope_r**k`` and
    ``(fit_d, fit_r)`` certify ``ball(k) >= fit_d * fit_r**k`` on
    ``k_min <= k <= k_max``.  ``sphere_ratio`` is the consecutive
    sphere-count ratio when it is exactly constant on the tail
    (integer arithmetic), which pins the growth rate itself rather
    than a finite-range envelope.
    """

    k_min: int
    k_max: int
    sphere_counts: list
    ball_counts: list
    envelope_r: float
    fit_d: float
    fit_r: float
    sphere_ratio: float | None
    ratio_stabilized: bool
    saturated: bool
    subexponential: bool
    certified_upper: bool
    certified_lower: bool

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["sphere_counts"] = [int(c) for c in self.sphere_counts]
        out["ball_counts"] = [int(c) for c in self.ball_counts]
        return out

    def csv_rows(self):
        rows = [("k", "sup_sphere", "inf_ball")]
        for k in range(self.k_max + 1):
            rows.append((k, int(self.sphere_counts[k]), int(self.ball_counts[k])))
        return rows


def growth_stats(model: GroupoidModel, K: int, k_min: int = 1) -> GrowthReport:
    """Growth data of the fibers up to radius K with certified envelopes."""
    if not 1 <= k_min < K:
        raise ValueError("need 1 <= k_min < K")
    spheres = [model.sphere_count(k) for k in range(K + 1)]
    balls = [model.ball_count(k) for k in range(K + 1)]

    log_env = max(math.log(spheres[k]) / k for k in range(k_min, K + 1) if spheres[k] > 0)
    envelope_r = math.exp(log_env)
    certified_upper = all(
        spheres[k] <= math.exp(log_env * k) * (1 + 1e-9) for k in range(k_min, K + 1))

    ks = np.arange(k_min, K + 1, dtype=float)
    log_balls = np.array([math.log(balls[k]) for k in range(k_min, K + 1)])
    slope, intercept = np.polyfit(ks, log_balls, 1)
    fit_r = math.exp(slope)
    # pull the prefactor down until the lower envelope is certified
    fit_d = min(math.exp(math.log(balls[k]) - slope * k) for k in range(k_min, K + 1))
    certified_lower = all(
        balls[k] >= fit_d * math.exp(slope * k) * (1 - 1e-9) for k in range(k_min, K + 1))

    saturated = any(spheres[k] == 0 for k in range(1, K + 1))
    ratio_stabilized = False
    sphere_ratio = None
    lo = max(k_min, 1)
    if not saturated and K - lo >= 2:
        ratios = {Fraction(spheres[k + 1], spheres[k]) for k in range(lo, K)}
        if len(ratios) == 1:
            ratio_stabilized = True
            sphere_ratio = float(next(iter(ratios)))

    subexponential = saturated or (ratio_stabilized and sphere_ratio <= 1.0) or fit_r <= 1.0
    return GrowthReport(
        k_min=k_min, k_max=K, sphere_counts=spheres, ball_counts=balls,
        envelope_r=envelope_r, fit_d=fit_d, fit_r=fit_r,
        sphere_ratio=sphere_ratio, ratio_stabilized=ratio_stabilized,
        saturated=saturated, subexponential=subexponential,
        certified_upper=certified_upper, certified_lower=certified_lower)


# -- hyperbolicity ----------------------------------------------------------

@dataclass
class DeltaEstimate:
    """Four-point hyperbolicity defect over an exhaustive ball scan."""

    delta: float
    radius: int
    unit: int
    n_points: int
    quadruples: int
    exhaustive: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def distance_matrix(model: GroupoidModel, points) -> np.ndarray:
    backend = model.backend
    words = [g.word for g in points]
    inv_words = [backend.inv(w) for w in words]
    n = len(words)
    D = np.zeros((n, n), dtype=np.int16)
    for i in range(n):
        wi = inv_words[i]
        for j in range(i + 1, n):
            d = backend.length(backend.mul(wi, words[j]))
            D[i, j] = d
            D[j, i] = d
    return D


def hyperbolicity_delta(model: GroupoidModel, u: int, radius: int,
                        quad_budget: int = DEFAULT_QUADRUPLE_BUDGET) -> DeltaEstimate:
    """Largest four-point defect over all quadruples in the radius-``radius``
    ball of the fiber at ``u``: the excess of the largest pair-sum over the
    second largest.  Zero on trees and on any 0-hyperbolic fiber."""
    points = model.ball(u, radius)
    n = len(points)
    if n ** 4 > quad_budget:
        raise BudgetError(
            f"{n}^4 quadruples exceed budget {quad_budget}",
            required=n ** 4, budget=quad_budget)
    D = distance_matrix(model, points)
    best = 0
    scanned = 0
    # pairing (i,j)+(k,l) vs the two cross pairings; i <= j by symmetry
    for i in range(n):
        Dj = D[i:].astype(np.int32)
        s_ab = D[i, i:][:, None, None] + D[None, :, :].astype(np.int32)
        s_ac = D[i][None, :, None] + Dj[:, None, :]
        s_ad = D[i][None, None, :] + Dj[:, :, None]
        defect = s_ab - np.maximum(s_ac, s_ad)
        best = max(best, int(defect.max()))
        scanned += (n - i) * n * n
    return DeltaEstimate(delta=float(max(0, best)), radius=radius, unit=u,
                         n_points=n, quadruples=scanned)


def overlap_constant(model: GroupoidModel, delta: float) -> int:
    """Ball count at radius ``ceil(2*delta + 1)``: bounds how many elements
    of a fiber can sit in a common thin neighborhood."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    radius = math.ceil(2 * delta + 1)
    return int(model.ball_count(radius))


# -- band estimate ----------------------------------------------------------

@dataclass
class BandReport:
    """Support-band and fiberwise l1 control for a convolution product."""

    k: int
    n: int
    unit: int
    overlap: float
    band: tuple
    rows: list = field(default_factory=list)  # (m, l1_mass, bound, ok)
    outside_mass: float = 0.0
    passed: bool = False

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["band"] = list(self.band)
        out["rows"] = [list(r) for r in self.rows]
        return out


def band_check(f: CcFunction, g: CcFunction, k: int, n: int, u: int,
               C: float, tol: float = 1e-9) -> BandReport:
    """Check that ``f * g`` vanishes outside word lengths ``|k-n| .. k+n``
    and that each length slice has range-fiber l1 mass at most
    ``C * |f|_l1`` on the fiber at ``u``.

    Preconditions: ``supp f`` inside the length-k sphere, ``supp g``
    inside the length-n sphere, ``|g| <= 1`` pointwise.
    """
    model = f.model
    for x in f.support():
        if model.length(x) != k:
            raise PreconditionError(f"support of f must sit at word length {k}")
    for x in g.support():
        if model.length(x) != n:
            raise PreconditionError(f"support of g must sit at word length {n}")
    if g.max_abs() > 1 + 1e-12:
        raise PreconditionError("g must be bounded by 1 in absolute value")

    h = convolve(f, g)
    lo, hi = abs(k - n), k + n
    outside = sum(abs(v) for x, v in h.items() if not lo <= model.length(x) <= hi)
    base = f.fiber_l1(u)
    bound = C * base
    rows = []
    ok_all = True
    for m in range(lo, hi + 1):
        mass = h.length_slice(m).fiber_l1(u)
        ok = mass <= bound + tol * max(1.0, bound)
        ok_all = ok_all and ok
        rows.append((m, mass, bound, ok))
    passed = ok_all and outside == 0.0
    return BandReport(k=k, n=n, unit=u, overlap=C, band=(lo, hi),
                      rows=rows, outside_mass=outside, passed=passed)
