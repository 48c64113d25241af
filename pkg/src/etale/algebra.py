"""Compactly supported functions on a groupoid model: the convolution
*-algebra, fiberwise norms, and the pairing against a kernel state.

A ``CcFunction`` is a finitely supported map from groupoid elements to
complex numbers, stored sparsely.  Convolution sums over composable
pairs, ``(f * g)(x) = sum_{x = y z} f(y) g(z)``; the involution is
``f^*(x) = conj(f(x^-1))``.
"""
from __future__ import annotations

import json

from .errors import BudgetError, ModelError
from .model import GroupoidElement, GroupoidModel, MeasureContext


class CcFunction:
    """Sparse compactly supported function on a groupoid model."""

    __slots__ = ("model", "data")

    def __init__(self, model: GroupoidModel, data=None):
        self.model = model
        self.data: dict[GroupoidElement, complex] = {}
        if data:
            for key, value in data.items():
                value = complex(value)
                if value != 0:
                    self.data[GroupoidElement(*key)] = value

    # -- container basics ---------------------------------------------------

    def value(self, g) -> complex:
        return self.data.get(g, 0j)

    def items(self):
        return self.data.items()

    def support(self):
        return self.data.keys()

    def __len__(self) -> int:
        return len(self.data)

    def __eq__(self, other) -> bool:
        return (isinstance(other, CcFunction) and other.model is self.model
                and other.data == self.data)

    def __repr__(self) -> str:
        return f"CcFunction({len(self.data)} points)"

    def copy(self) -> "CcFunction":
        out = CcFunction(self.model)
        out.data = dict(self.data)
        return out

    # -- linear structure ---------------------------------------------------

    def __add__(self, other: "CcFunction") -> "CcFunction":
        _same_model(self, other)
        out = dict(self.data)
        for key, value in other.data.items():
            s = out.get(key, 0j) + value
            if s == 0:
                out.pop(key, None)
            else:
                out[key] = s
        result = CcFunction(self.model)
        result.data = out
        return result

    def __neg__(self) -> "CcFunction":
        result = CcFunction(self.model)
        result.data = {k: -v for k, v in self.data.items()}
        return result

    def __sub__(self, other: "CcFunction") -> "CcFunction":
        return self + (-other)

    def __mul__(self, scalar) -> "CcFunction":
        scalar = complex(scalar)
        result = CcFunction(self.model)
        if scalar != 0:
            result.data = {k: v * scalar for k, v in self.data.items()}
        return result

    __rmul__ = __mul__

    # -- support geometry ---------------------------------------------------

    def max_length(self) -> int:
        return max((self.model.length(g) for g in self.data), default=0)

    def max_abs(self) -> float:
        return max((abs(v) for v in self.data.values()), default=0.0)

    def length_slice(self, m: int) -> "CcFunction":
        """Pointwise product with the indicator of word length exactly m."""
        result = CcFunction(self.model)
        result.data = {g: v for g, v in self.data.items() if self.model.length(g) == m}
        return result

    def fiber_l1(self, u: int) -> float:
        """l1 mass on the range fiber at ``u``."""
        return sum(abs(v) for g, v in self.data.items() if g.unit == u)


def _same_model(f: CcFunction, g: CcFunction) -> None:
    if f.model is not g.model:
        raise ModelError("functions live on different models")


# -- constructors -----------------------------------------------------------

def delta(model: GroupoidModel, g: GroupoidElement, value=1.0) -> CcFunction:
    return CcFunction(model, {g: value})


def unit_indicator(model: GroupoidModel) -> CcFunction:
    """Indicator of the unit space; the identity for convolution."""
    return CcFunction(model, {model.unit_element(u): 1.0 for u in range(model.units)})


def sphere_indicator(model: GroupoidModel, k: int, budget=None) -> CcFunction:
    """Indicator of word length exactly k, over every fiber."""
    out = CcFunction(model)
    for u in range(model.units):
        for g in model.sphere(u, k, budget=budget):
            out.data[g] = 1.0 + 0j
    return out


def length_weighted(model: GroupoidModel, alpha: float, k: int, budget=None) -> CcFunction:
    """The function ``alpha^k`` on the length-k sphere of every fiber."""
    return sphere_indicator(model, k, budget=budget) * (alpha ** k)


# -- *-algebra operations ---------------------------------------------------

def convolve(f: CcFunction, g: CcFunction, budget=None) -> CcFunction:
    """Convolution product, summing over composable factorizations."""
    _same_model(f, g)
    model = f.model
    backend = model.backend
    by_range: dict[int, list] = {}
    for b, vb in g.data.items():
        by_range.setdefault(b.unit, []).append((b, vb))
    acc: dict[GroupoidElement, complex] = {}
    for a, va in f.data.items():
        u = model.source_unit(a)
        for b, vb in by_range.get(u, ()):
            # composable by construction: source(a) == range(b)
            key = GroupoidElement(a.unit, backend.mul(a.word, b.word))
            acc[key] = acc.get(key, 0j) + va * vb
        if budget is not None and len(acc) > budget:
            raise BudgetError(
                f"convolution support exceeded budget {budget}",
                required=len(acc), budget=budget)
    result = CcFunction(model)
    result.data = {k: v for k, v in acc.items() if v != 0}
    return result


def involution(f: CcFunction) -> CcFunction:
    """The adjoint ``f^*(x) = conj(f(x^-1))``."""
    result = CcFunction(f.model)
    result.data = {f.model.inverse(g): v.conjugate() for g, v in f.data.items()}
    return result


def i_norm(f: CcFunction) -> float:
    """Max over units of the larger of the range- and source-fiber l1 masses."""
    by_range: dict[int, float] = {}
    by_source: dict[int, float] = {}
    model = f.model
    for g, v in f.data.items():
        a = abs(v)
        by_range[g.unit] = by_range.get(g.unit, 0.0) + a
        s = model.source_unit(g)
        by_source[s] = by_source.get(s, 0.0) + a
    return max(max(by_range.values(), default=0.0), max(by_source.values(), default=0.0))


def lp_norm(f: CcFunction, p: float, mu: MeasureContext) -> float:
    """Fiberwise l^p norm integrated against the unit-space weights."""
    if p < 1:
        raise ValueError("p must be >= 1")
    total = 0.0
    for g, v in f.data.items():
        total += mu.weight(g.unit) * abs(v) ** p
    return total ** (1.0 / p)


def omega_pairing(f: CcFunction, phi, mu: MeasureContext) -> complex:
    """The state-like pairing ``sum_u mu(u) sum_{x in G^u} f(x) phi(x)``."""
    model = f.model
    total = 0j
    for g, v in f.data.items():
        total += mu.weight(g.unit) * v * phi.evaluate(model, g)
    return total


def prune(f: CcFunction, tol: float = 0.0) -> CcFunction:
    """Drop entries of magnitude at most ``tol``."""
    result = CcFunction(f.model)
    result.data = {g: v for g, v in f.data.items() if abs(v) > tol}
    return result


# -- serialization ----------------------------------------------------------

def function_to_json(f: CcFunction) -> list[dict]:
    backend = f.model.backend
    entries = []
    for g, v in f.data.items():
        entries.append({
            "unit": g.unit,
            "word": backend.word_to_json(g.word),
            "re": v.real,
            "im": v.imag,
        })
    entries.sort(key=lambda e: (e["unit"], len(str(e["word"])), str(e["word"])))
    return entries


def function_from_json(model: GroupoidModel, entries) -> CcFunction:
    backend = model.backend
    out = CcFunction(model)
    for entry in entries:
        try:
            u = int(entry["unit"])
            word = backend.word_from_json(entry["word"])
            value = complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed function entry {entry!r}: {exc}") from exc
        if not 0 <= u < model.units:
            raise ModelError(f"unit {u} out of range")
        key = GroupoidElement(u, word)
        s = out.data.get(key, 0j) + value
        if s == 0:
            out.data.pop(key, None)
        else:
            out.data[key] = s
    return out


def save_function(f: CcFunction, path) -> None:
    with open(path, "w") as fh:
        json.dump(function_to_json(f), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_function(model: GroupoidModel, path) -> CcFunction:
    with open(path) as fh:
        return function_from_json(model, json.load(fh))
