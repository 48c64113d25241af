"""Finite truncation models of etale groupoids over a finite unit space.

The groupoid is an action groupoid: elements are pairs ``(unit, word)``
where ``word`` is a group element acting on the unit space from the
right.  The range of ``(u, w)`` is ``u`` and the source is ``u . w``.
Two backends supply the group arithmetic:

* ``FreeGroup(rank)`` -- exact reduced-word arithmetic, words stored as
  tuples of signed letters (``1, -1, 2, -2, ...``);
* ``FiniteGroup(table, generators)`` -- a multiplication table of order
  at most 256 with a designated symmetric generating set.

All enumeration (spheres and balls of the word metric, fiber by fiber)
is deterministic: free words in length-lexicographic order with the
letter order ``a < A < b < B < ...``, finite elements in breadth-first
discovery order.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import BudgetError, ModelError, NonComposableError

Word = Union[tuple, int]

DEFAULT_ENUMERATION_BUDGET = 5_000_000

MAX_FINITE_ORDER = 256


class GroupoidElement(NamedTuple):
    """A groupoid element ``(range unit, group word)``."""

    unit: int
    word: Word


def letter_label(letter: int) -> str:
    if letter > 0:
        return chr(ord("a") + letter - 1)
    return chr(ord("A") - letter - 1)


def parse_letter(token: str, rank: int) -> int:
    if len(token) == 1 and "a" <= token <= "z":
        letter = ord(token) - ord("a") + 1
    elif len(token) == 1 and "A" <= token <= "Z":
        letter = -(ord(token) - ord("A") + 1)
    else:
        raise ModelError(f"bad word token {token!r}")
    if abs(letter) > rank:
        raise ModelError(f"token {token!r} outside rank-{rank} alphabet")
    return letter


@dataclass(frozen=True)
class FreeGroup:
    """Free group of the given rank with reduced-word arithmetic."""

    rank: int
    _spheres: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.rank < 1:
            raise ModelError("free group rank must be >= 1")

    @property
    def identity(self) -> Word:
        return ()

    def letters(self) -> list[int]:
        out = []
        for i in range(1, self.rank + 1):
            out.extend((i, -i))
        return out

    def mul(self, a: tuple, b: tuple) -> tuple:
        i, j = len(a), 0
        nb = len(b)
        while i > 0 and j < nb and a[i - 1] == -b[j]:
            i -= 1
            j += 1
        return a[:i] + b[j:]

    def inv(self, a: tuple) -> tuple:
        return tuple(-x for x in reversed(a))

    def length(self, w: tuple) -> int:
        return len(w)

    def sphere_count(self, k: int) -> int:
        if k < 0:
            return 0
        if k == 0:
            return 1
        d = self.rank
        return 2 * d * (2 * d - 1) ** (k - 1)

    def ball_count(self, k: int) -> int:
        return sum(self.sphere_count(j) for j in range(k + 1))

    @property
    def max_radius(self):
        return None

    def sphere_words(self, k: int) -> list:
        """Words of length exactly k, length-lexicographic (a < A < b < B)."""
        if not self._spheres:
            self._spheres.append([()])
        letters = self.letters()
        while len(self._spheres) <= k:
            prev = self._spheres[-1]
            nxt = []
            for w in prev:
                last = w[-1] if w else 0
                for letter in letters:
                    if letter != -last:
                        nxt.append(w + (letter,))
            self._spheres.append(nxt)
        return self._spheres[k]

    def word_to_json(self, w: tuple) -> str:
        return " ".join(letter_label(x) for x in w)

    def word_from_json(self, data) -> tuple:
        if not isinstance(data, str):
            raise ModelError(f"free-group word must be a string, got {data!r}")
        word: tuple = ()
        for token in data.split():
            word = self.mul(word, (parse_letter(token, self.rank),))
        return word


class FiniteGroup:
    """Finite group given by a multiplication table plus a generating set.

    The table is validated (associativity, identity, inverses) and the
    word metric is precomputed by breadth-first search over the
    symmetric closure of ``generators``.
    """

    def __init__(self, table, generators: Sequence[int]):
        table = np.asarray(table, dtype=np.int64)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ModelError("multiplication table must be square")
        n = table.shape[0]
        if n < 1 or n > MAX_FINITE_ORDER:
            raise ModelError(f"finite group order must be in 1..{MAX_FINITE_ORDER}")
        if table.min() < 0 or table.max() >= n:
            raise ModelError("table entries out of range")
        # associativity, row by row to bound memory
        for i in range(n):
            if not np.array_equal(table[table[i]], table[i][table]):
                raise ModelError(f"table is not associative (row {i})")
        eye = np.arange(n)
        ids = [e for e in range(n) if np.array_equal(table[e], eye) and np.array_equal(table[:, e], eye)]
        if len(ids) != 1:
            raise ModelError("table has no two-sided identity")
        self.identity = int(ids[0])
        inv = np.argmax(table == self.identity, axis=1)
        if not (np.array_equal(table[eye, inv], np.full(n, self.identity))
                and np.array_equal(table[inv, eye], np.full(n, self.identity))):
            raise ModelError("table has an element without a two-sided inverse")
        self.table = table
        self.order = n
        self.inverse = inv
        gens = []
        for g in generators:
            g = int(g)
            if not 0 <= g < n:
                raise ModelError(f"generator {g} out of range")
            for h in (g, int(inv[g])):
                if h not in gens:
                    gens.append(h)
        if not gens:
            raise ModelError("finite backend needs a nonempty generating set")
        self.given_generators = tuple(int(g) for g in generators)
        self.generators = tuple(gens)
        # BFS word metric from the identity
        dist = np.full(n, -1, dtype=np.int64)
        dist[self.identity] = 0
        order_found = [self.identity]
        frontier = [self.identity]
        while frontier:
            nxt = []
            for e in frontier:
                for g in self.generators:
                    f = int(table[e, g])
                    if dist[f] < 0:
                        dist[f] = dist[e] + 1
                        order_found.append(f)
                        nxt.append(f)
            frontier = nxt
        if dist.min() < 0:
            raise ModelError("generators do not generate the group")
        self.dist = dist
        self._spheres = [[e for e in order_found if dist[e] == k]
                         for k in range(int(dist.max()) + 1)]

    def letters(self) -> list[int]:
        return list(self.generators)

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return int(self.inverse[a])

    def length(self, w: int) -> int:
        return int(self.dist[w])

    def sphere_count(self, k: int) -> int:
        if 0 <= k < len(self._spheres):
            return len(self._spheres[k])
        return 0

    def ball_count(self, k: int) -> int:
        return sum(self.sphere_count(j) for j in range(k + 1))

    @property
    def max_radius(self) -> int:
        return len(self._spheres) - 1

    def sphere_words(self, k: int) -> list:
        if 0 <= k < len(self._spheres):
            return list(self._spheres[k])
        return []

    def word_to_json(self, w: int) -> int:
        return int(w)

    def word_from_json(self, data) -> int:
        w = int(data)
        if not 0 <= w < self.order:
            raise ModelError(f"element id {w} out of range")
        return w


Backend = Union[FreeGroup, FiniteGroup]


def _check_perm(perm, units: int) -> list[int]:
    p = [int(x) for x in perm]
    if sorted(p) != list(range(units)):
        raise ModelError(f"action entry {perm!r} is not a permutation of {units} units")
    return p


def _inverse_perm(p: list[int]) -> list[int]:
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x] = i
    return out


class GroupoidModel:
    """Action groupoid over ``units`` points with a given group backend.

    ``action`` assigns to each generator a permutation of the unit
    space (the right action of that generator).  Use :func:`build_model`
    rather than this constructor.
    """

    def __init__(self, backend: Backend, units: int, action: Sequence[Sequence[int]]):
        if units < 1:
            raise ModelError("unit space must be nonempty")
        self.backend = backend
        self.units = units
        self.action = [list(map(int, p)) for p in action]
        if isinstance(backend, FreeGroup):
            if len(self.action) != backend.rank:
                raise ModelError(f"expected {backend.rank} action permutations, got {len(self.action)}")
            self._letter_perm: dict[int, list[int]] = {}
            for i, perm in enumerate(self.action, start=1):
                p = _check_perm(perm, units)
                self._letter_perm[i] = p
                self._letter_perm[-i] = _inverse_perm(p)
        else:
            gens = backend.given_generators
            if len(self.action) != len(gens):
                raise ModelError(f"expected {len(gens)} action permutations, got {len(self.action)}")
            perm_of: dict[int, list[int]] = {backend.identity: list(range(units))}
            for g, perm in zip(gens, self.action):
                p = _check_perm(perm, units)
                if g in perm_of and perm_of[g] != p:
                    raise ModelError(f"conflicting action for generator {g}")
                perm_of[g] = p
            for g in backend.generators:
                if g not in perm_of:
                    gi = backend.inv(g)
                    if gi not in perm_of:
                        raise ModelError(f"no action given for generator {g} or its inverse")
                    perm_of[g] = _inverse_perm(perm_of[gi])
            # extend along the BFS tree, then verify the extension is a
            # right action: perm(e.g) == perm(g) o perm(e) for all e, g
            for k in range(1, backend.max_radius + 1):
                for e in backend.sphere_words(k):
                    if e in perm_of:
                        continue
                    for g in backend.generators:
                        prev = backend.mul(e, backend.inv(g))
                        if backend.length(prev) == k - 1 and prev in perm_of:
                            pe, pg = perm_of[prev], perm_of[g]
                            perm_of[e] = [pg[pe[u]] for u in range(units)]
                            break
                    else:
                        raise ModelError("BFS extension of the action failed")
            for e in range(backend.order):
                pe = perm_of[e]
                for g in backend.generators:
                    pg = perm_of[g]
                    if perm_of[backend.mul(e, g)] != [pg[pe[u]] for u in range(units)]:
                        raise ModelError("action permutations are not compatible with the multiplication table")
            self._elem_perm = [perm_of[e] for e in range(backend.order)]

    # -- groupoid structure -------------------------------------------------

    def act(self, u: int, w: Word) -> int:
        """Move unit ``u`` by the right action of ``w``."""
        if isinstance(self.backend, FreeGroup):
            for letter in w:
                u = self._letter_perm[letter][u]
            return u
        return self._elem_perm[w][u]

    def unit_element(self, u: int) -> GroupoidElement:
        if not 0 <= u < self.units:
            raise ModelError(f"unit {u} out of range")
        return GroupoidElement(u, self.backend.identity)

    def source_unit(self, g: GroupoidElement) -> int:
        return self.act(g.unit, g.word)

    def compose(self, g: GroupoidElement, h: GroupoidElement) -> GroupoidElement:
        if self.source_unit(g) != h.unit:
            raise NonComposableError(f"source of {g} is {self.source_unit(g)}, not {h.unit}")
        return GroupoidElement(g.unit, self.backend.mul(g.word, h.word))

    def inverse(self, g: GroupoidElement) -> GroupoidElement:
        return GroupoidElement(self.source_unit(g), self.backend.inv(g.word))

    def length(self, g: GroupoidElement) -> int:
        return self.backend.length(g.word)

    def is_unit(self, g: GroupoidElement) -> bool:
        return self.backend.length(g.word) == 0

    # -- enumeration --------------------------------------------------------

    def _charge(self, k: int, budget) -> None:
        if budget is None:
            budget = DEFAULT_ENUMERATION_BUDGET
        required = self.backend.ball_count(k)
        if required > budget:
            raise BudgetError(
                f"ball of radius {k} needs {required} elements, budget is {budget}",
                required=required, budget=budget)

    def sphere(self, u: int, k: int, budget=None) -> list[GroupoidElement]:
        """Range-fiber sphere: elements of word length k with range ``u``."""
        if not 0 <= u < self.units:
            raise ModelError(f"unit {u} out of range")
        self._charge(k, budget)
        return [GroupoidElement(u, w) for w in self.backend.sphere_words(k)]

    def ball(self, u: int, k: int, budget=None) -> list[GroupoidElement]:
        """Range-fiber ball: word length <= k, ordered by length then word order."""
        if not 0 <= u < self.units:
            raise ModelError(f"unit {u} out of range")
        self._charge(k, budget)
        out = []
        for j in range(k + 1):
            out.extend(GroupoidElement(u, w) for w in self.backend.sphere_words(j))
        return out

    def source_ball(self, u: int, k: int, budget=None) -> list[GroupoidElement]:
        """Source-fiber ball (all elements with source ``u``), as inverses of ball(u, k)."""
        return [self.inverse(g) for g in self.ball(u, k, budget)]

    def sphere_count(self, k: int) -> int:
        """Number of elements of length k in any fiber (fibers are isomorphic)."""
        return self.backend.sphere_count(k)

    def ball_count(self, k: int) -> int:
        return self.backend.ball_count(k)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        if isinstance(self.backend, FreeGroup):
            backend = {"free": self.backend.rank}
        else:
            backend = {"finite": {
                "order": self.backend.order,
                "table": self.backend.table.tolist(),
                "generators": list(self.backend.given_generators),
            }}
        return {"backend": backend, "units": self.units, "action": [list(p) for p in self.action]}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def build_model(backend: Backend, units: int, action: Sequence[Sequence[int]]) -> GroupoidModel:
    """Validate and assemble an action-groupoid model."""
    return GroupoidModel(backend, units, action)


def group_model(backend: Backend) -> GroupoidModel:
    """Degenerate one-unit model: the group itself."""
    n_perms = backend.rank if isinstance(backend, FreeGroup) else len(backend.given_generators)
    return GroupoidModel(backend, 1, [[0]] * n_perms)


def model_from_dict(data: dict) -> GroupoidModel:
    try:
        spec = data["backend"]
        units = int(data["units"])
        action = data["action"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model data: {exc}") from exc
    if "free" in spec:
        backend: Backend = FreeGroup(int(spec["free"]))
    elif "finite" in spec:
        fin = spec["finite"]
        try:
            backend = FiniteGroup(fin["table"], fin["generators"])
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed finite backend: {exc}") from exc
        if "order" in fin and int(fin["order"]) != backend.order:
            raise ModelError("declared order does not match the table")
    else:
        raise ModelError("backend must be 'free' or 'finite'")
    return build_model(backend, units, action)


def load_model(path) -> GroupoidModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model: GroupoidModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class MeasureContext:
    """Invariant probability weights on the unit space."""

    weights: tuple

    TOL = 1e-12

    @classmethod
    def uniform(cls, model: GroupoidModel) -> "MeasureContext":
        return cls(tuple([1.0 / model.units] * model.units))

    @classmethod
    def from_weights(cls, model: GroupoidModel, weights: Iterable[float]) -> "MeasureContext":
        mc = cls(tuple(float(x) for x in weights))
        mc.validate(model)
        return mc

    def weight(self, u: int) -> float:
        return self.weights[u]

    def validate(self, model: GroupoidModel) -> None:
        if len(self.weights) != model.units:
            raise ModelError("measure has wrong number of weights")
        if any(w < 0 for w in self.weights):
            raise ModelError("measure weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > self.TOL:
            raise ModelError("measure weights must sum to 1")
        if isinstance(model.backend, FreeGroup):
            perms = [model._letter_perm[i] for i in range(1, model.backend.rank + 1)]
        else:
            perms = [model._elem_perm[g] for g in model.backend.generators]
        for p in perms:
            for u in range(model.units):
                if abs(self.weights[p[u]] - self.weights[u]) > self.TOL:
                    raise ModelError("measure is not invariant under the action")
