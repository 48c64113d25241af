"""Reduced-norm estimates for the convolution algebra.

``reduced_norm_at_unit`` compresses left convolution by ``f`` onto the
radius-L ball of a source fiber (matrix ``M[y, y'] = f(y y'^-1)``) and
estimates the largest singular value by deterministic power iteration.
Compressions only grow with L, so the estimates form a nondecreasing
trace of lower bounds.

``power_sequence_norm`` squares ``f^* * f`` repeatedly by convolution
and reports ``|h_n|_2 ^ (1/(2*2^n))``, which climbs to the same norm
from the algebra side.  Sphere-symmetric functions on free backends
are squared in a radial representation (one coefficient per sphere,
exact product expansion), which keeps the support size linear in the
radius instead of exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .algebra import CcFunction, convolve, involution, length_weighted, lp_norm
from .errors import BudgetError
from .model import FreeGroup, GroupoidModel, MeasureContext

DEFAULT_POWER_BUDGET = 10_000_000
DEFAULT_LADDER = (4, 6, 8, 10, 12)


# -- power iteration --------------------------------------------------------

def _largest_singular_value(M, max_iter: int, tol: float):
    """Power iteration on ``M^H M`` from the normalized all-ones vector."""
    n = M.shape[1]
    if n == 0:
        return 0.0, 0, 0.0, True
    v = np.full(n, 1.0 / math.sqrt(n), dtype=M.dtype if M.dtype.kind == "c" else float)
    Mh = M.conj().T if M.dtype.kind == "c" else M.T
    rho = 0.0
    residual = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        z = Mh @ w
        rho = float(np.real(np.vdot(v, z)))
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return 0.0, it, 0.0, True
        residual = float(np.linalg.norm(z - rho * v))
        v = z / nz
        if residual <= tol * max(1.0, rho):
            return math.sqrt(max(rho, 0.0)), it, residual, True
    return math.sqrt(max(rho, 0.0)), max_iter, residual, False


@dataclass
class NormEstimate:
    """Largest-L truncated-norm estimate with its full ladder trace."""

    value: float
    L: int
    unit: int
    iterations: int
    residual: float
    converged: bool
    trace: list = field(default_factory=list)  # rows: (L, value, iterations, residual, converged)
    monotone: bool = True
    units_checked: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["trace"] = [list(r) for r in self.trace]
        return out

    def csv_rows(self):
        rows = [("L", "value", "iterations", "residual", "converged")]
        rows.extend(self.trace)
        return rows


def _truncation_ladder(L: int, ladder) -> list[int]:
    if ladder is not None:
        out = sorted({int(x) for x in ladder})
        if not out or out[-1] != L:
            raise ValueError("ladder must be nonempty and end at L")
        return out
    return sorted({min(x, L) for x in DEFAULT_LADDER} | {L})


def _truncated_matrix(f: CcFunction, u: int, L: int, budget=None):
    """Sparse matrix of left convolution by f on the radius-L ball of the
    source fiber at ``u``."""
    model = f.model
    backend = model.backend
    basis = model.source_ball(u, L, budget=budget)
    index = {g: i for i, g in enumerate(basis)}
    by_unit: dict[int, list] = {}
    for j, y in enumerate(basis):
        by_unit.setdefault(y.unit, []).append((j, y.word))

    nnz_cap = sum(len(by_unit.get(model.source_unit(a), ())) for a in f.support())
    rows = np.empty(nnz_cap, dtype=np.int64)
    cols = np.empty(nnz_cap, dtype=np.int64)
    vals = np.empty(nnz_cap, dtype=complex)
    ptr = 0
    mul = backend.mul
    get = index.get
    for a, va in f.items():
        group = by_unit.get(model.source_unit(a))
        if not group:
            continue
        ra, aw = a.unit, a.word
        for j, yw in group:
            i = get((ra, mul(aw, yw)))
            if i is not None:
                rows[ptr] = i
                cols[ptr] = j
                vals[ptr] = va
                ptr += 1
    n = len(basis)
    vals = vals[:ptr]
    if np.all(vals.imag == 0):
        vals = vals.real.copy()
    return sp.csr_matrix((vals, (rows[:ptr], cols[:ptr])), shape=(n, n))


def reduced_norm_at_unit(f: CcFunction, u: int, L: int, max_iter: int = 2000,
                         tol: float = 1e-10, ladder=None, budget=None) -> NormEstimate:
    """Truncated-convolution norm of ``f`` on the source fiber at ``u``,
    over an increasing ladder of truncation radii ending at L."""
    trace = []
    for Lk in _truncation_ladder(L, ladder):
        M = _truncated_matrix(f, u, Lk, budget=budget)
        value, iters, residual, converged = _largest_singular_value(M, max_iter, tol)
        trace.append((Lk, value, iters, residual, converged))
    monotone = all(b[1] >= a[1] - 1e-8 for a, b in zip(trace, trace[1:]))
    last = trace[-1]
    return NormEstimate(value=last[1], L=last[0], unit=u, iterations=last[2],
                        residual=last[3], converged=last[4], trace=trace,
                        monotone=monotone, units_checked=[u])


def reduced_norm(f: CcFunction, L: int, max_iter: int = 2000, tol: float = 1e-10,
                 ladder=None, budget=None, seed: int = 0,
                 unit_cap: int = 64) -> NormEstimate:
    """Largest truncated-norm estimate over units (all units, or a seeded
    sample when the unit space is larger than ``unit_cap``)."""
    model = f.model
    if model.units <= unit_cap:
        units = list(range(model.units))
    else:
        rng = np.random.default_rng(seed)
        units = sorted(rng.choice(model.units, size=unit_cap, replace=False).tolist())
    best = None
    for u in units:
        est = reduced_norm_at_unit(f, u, L, max_iter=max_iter, tol=tol,
                                   ladder=ladder, budget=budget)
        if best is None or est.value > best.value:
            best = est
    best.units_checked = units
    return best


# -- radial representation on free backends ---------------------------------

def radial_profile_of(f: CcFunction):
    """Per-sphere coefficients of ``f`` when it is sphere-symmetric over
    every fiber of a free backend; None otherwise.  Integer-valued
    profiles are returned as ints so later arithmetic stays exact."""
    model = f.model
    if not isinstance(model.backend, FreeGroup):
        return None
    if not f.data:
        return []
    top = f.max_length()
    values = [None] * (top + 1)
    counts = [0] * (top + 1)
    for g, v in f.items():
        l = len(g.word)
        if values[l] is None:
            values[l] = v
        elif values[l] != v:
            return None
        counts[l] += 1
    coeffs = []
    for l in range(top + 1):
        if values[l] is None:
            coeffs.append(0)
            continue
        if counts[l] != model.units * model.sphere_count(l):
            return None
        coeffs.append(values[l])
    if all(isinstance(c, int) or (c.imag == 0 and float(c.real).is_integer()) for c in coeffs):
        return [int(c.real) if not isinstance(c, int) else c for c in coeffs]
    if all(not isinstance(c, complex) or c.imag == 0 for c in coeffs):
        return [float(c.real) if isinstance(c, complex) else float(c) for c in coeffs]
    return coeffs


def radial_convolve(rank: int, c1, c2, budget=None):
    """Sphere-coefficient expansion of the convolution of two radial
    functions on a rank-``rank`` free group.

    The product of a length-m and a length-n word has length m+n-2c
    after cancelling c letters; for fixed reduced output there are
    exactly 1, (q-1)q^(c-1), q^min(m,n) or (q+1)q^(m-1) factorizations
    (no, partial, one-sided full, or symmetric full cancellation),
    where q = 2*rank - 1.
    """
    if not c1 or not c2:
        return []
    if budget is not None:
        cost = len(c1) * len(c2) * min(len(c1), len(c2))
        if cost > budget:
            raise BudgetError(f"radial convolution cost {cost} exceeds budget {budget}",
                              required=cost, budget=budget)
    q = 2 * rank - 1
    out = [0] * (len(c1) + len(c2) - 1)
    for m, a in enumerate(c1):
        if a == 0:
            continue
        for n, b in enumerate(c2):
            if b == 0:
                continue
            ab = a * b
            top = min(m, n)
            for c in range(top + 1):
                if c == 0:
                    N = 1
                elif c < top:
                    N = (q - 1) * q ** (c - 1)
                elif m == n:
                    N = (q + 1) * q ** (m - 1)
                else:
                    N = q ** top
                out[m + n - 2 * c] += ab * N
    return out


def _radial_log_l2(backend: FreeGroup, coeffs, logscale: float) -> float:
    total = 0
    for l, c in enumerate(coeffs):
        if c != 0:
            total += abs(c) ** 2 * backend.sphere_count(l)
    if total == 0:
        return float("-inf")
    return 0.5 * math.log(total) + logscale


# -- power sequence ---------------------------------------------------------

@dataclass
class PowerSeq:
    """Normalized L2 norms of iterated convolution squares of ``f^* * f``."""

    entries: list  # rows: (n, value)
    n_max: int
    method: str

    def values(self) -> list[float]:
        return [v for _, v in self.entries]

    def to_dict(self) -> dict:
        return {"entries": [list(r) for r in self.entries],
                "n_max": self.n_max, "method": self.method}

    def csv_rows(self):
        return [("n", "value")] + [list(r) for r in self.entries]


def power_sequence_norm(f: CcFunction, n_max: int, mu: MeasureContext,
                        budget: int = DEFAULT_POWER_BUDGET) -> PowerSeq:
    """Square ``h = f^* * f`` by convolution ``n_max`` times and report
    ``|h_n|_2 ^ (1/(2*2^n))`` for each n."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    model = f.model
    profile = radial_profile_of(f)
    entries = []
    if profile is not None:
        backend = model.backend
        star = [c.conjugate() if isinstance(c, complex) else c for c in profile]
        h = radial_convolve(backend.rank, star, profile, budget=budget)
        logscale = 0.0
        for n in range(1, n_max + 1):
            h = radial_convolve(backend.rank, h, h, budget=budget)
            logscale *= 2
            if h and not isinstance(h[0], int):
                peak = max(abs(c) for c in h)
                if peak > 1e120 or (peak != 0 and peak < 1e-120):
                    h = [c / peak for c in h]
                    logscale += math.log(peak)
            log_norm = _radial_log_l2(backend, h, logscale)
            value = 0.0 if log_norm == float("-inf") else math.exp(log_norm / (2 * 2 ** n))
            entries.append((n, value))
        return PowerSeq(entries=entries, n_max=n_max, method="radial")

    h = convolve(involution(f), f, budget=budget)
    for n in range(1, n_max + 1):
        try:
            h = convolve(h, h, budget=budget)
        except BudgetError as exc:
            raise BudgetError(f"power sequence exceeded budget at n={n}: {exc}",
                              required=exc.required, budget=exc.budget) from exc
        value = lp_norm(h, 2, mu) ** (1.0 / (2 * 2 ** n))
        entries.append((n, value))
    return PowerSeq(entries=entries, n_max=n_max, method="sparse")


# -- norm bound -------------------------------------------------------------

@dataclass
class NormBoundReport:
    """Truncated norm of ``alpha^k`` on the k-sphere against the overlap
    bound ``2 C (k+1) |f|_q`` with q the conjugate exponent of p."""

    alpha: float
    k: int
    p: float
    q: float
    overlap: float
    L: int
    lhs: float
    rhs: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_norm_bound(model: GroupoidModel, mu: MeasureContext, alpha: float,
                      k: int, p: float, C: float, L: int = 6,
                      max_iter: int = 2000, tol: float = 1e-10,
                      budget=None) -> NormBoundReport:
    """Check the representation-norm bound on ``f = alpha^k * (k-sphere
    indicator)``: any truncated lower estimate must stay below
    ``2 C (k+1) |f|_q``."""
    if p < 2:
        raise ValueError("p must be >= 2")
    q = p / (p - 1.0)
    f = length_weighted(model, alpha, k, budget=budget)
    est = reduced_norm(f, L, max_iter=max_iter, tol=tol, budget=budget)
    rhs = 2.0 * C * (k + 1) * lp_norm(f, q, mu)
    passed = est.value <= rhs * (1 + 1e-9)
    return NormBoundReport(alpha=alpha, k=k, p=p, q=q, overlap=C, L=L,
                           lhs=est.value, rhs=rhs, passed=passed)
