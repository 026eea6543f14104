"""Concrete countable amenable groups and their right Følner families.

Three group models are provided: free abelian groups ``Z^d``, finite groups
given by a multiplication table, and the discrete Heisenberg group.  Each
model exposes normal-form arithmetic and a finite presentation (generators
plus relator words) so that unitary representations can be checked against
it.

Heisenberg elements are stored as the upper-triangular integer matrix
``[[1, a, c], [0, 1, b], [0, 0, 1]]`` and written ``(a, b, c)``; with
``x = (1, 0, 0)``, ``y = (0, 1, 0)`` and ``z = x y x^-1 y^-1 = (0, 0, 1)`` one
has ``(a, b, c) = x^a y^b z^(c - a b)``.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GroupElement",
    "GroupModel",
    "GroupError",
    "ZdGroup",
    "HeisenbergGroup",
    "FiniteGroup",
    "symmetric_group",
    "cyclic_group",
    "FolnerFamily",
    "BoxFamily",
    "HeisenbergBoxFamily",
    "WholeGroupFamily",
    "folner_family",
    "multiply",
    "inverse",
    "folner_set",
    "folner_defect",
    "Word",
]

# A word is a sequence of (generator index, exponent) pairs.
Word = tuple[tuple[int, int], ...]


class GroupError(ValueError):
    """Raised on malformed group data or mixing elements of different models."""


@dataclass(frozen=True, order=True)
class GroupElement:
    model_tag: str
    coords: tuple[int, ...]

    def __repr__(self) -> str:
        return f"{self.model_tag}{self.coords}"


def invert_word(word: Word) -> Word:
    return tuple((i, -e) for i, e in reversed(word))


class GroupModel(ABC):
    """A finitely generated group with normal-form elements."""

    kind: str
    tag: str

    @property
    @abstractmethod
    def generators(self) -> tuple[GroupElement, ...]: ...

    @property
    @abstractmethod
    def relations(self) -> tuple[Word, ...]: ...

    @property
    @abstractmethod
    def identity(self) -> GroupElement: ...

    @abstractmethod
    def _mul(self, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]: ...

    @abstractmethod
    def _inv(self, a: tuple[int, ...]) -> tuple[int, ...]: ...

    @abstractmethod
    def _check_coords(self, coords: tuple[int, ...]) -> None: ...

    @abstractmethod
    def normal_form_word(self, g: GroupElement) -> Word:
        """A word in the generators that evaluates to ``g``."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, radius: int = 5) -> GroupElement: ...

    def element(self, coords: Iterable[int]) -> GroupElement:
        c = tuple(int(v) for v in coords)
        self._check_coords(c)
        return GroupElement(self.tag, c)

    def _own(self, g: GroupElement) -> None:
        if g.model_tag != self.tag:
            raise GroupError(f"element {g!r} does not belong to group {self.tag}")

    def multiply(self, g: GroupElement, h: GroupElement) -> GroupElement:
        self._own(g)
        self._own(h)
        return GroupElement(self.tag, self._mul(g.coords, h.coords))

    def inverse(self, g: GroupElement) -> GroupElement:
        self._own(g)
        return GroupElement(self.tag, self._inv(g.coords))

    def power(self, g: GroupElement, n: int) -> GroupElement:
        base = g if n >= 0 else self.inverse(g)
        out = self.identity
        for _ in range(abs(n)):
            out = self.multiply(out, base)
        return out

    def evaluate_word(self, word: Word) -> GroupElement:
        out = self.identity
        for i, e in word:
            out = self.multiply(out, self.power(self.generators[i], e))
        return out

    def describe(self) -> dict:
        """Serializable description used by the experiment config."""
        return {"kind": self.kind}


class ZdGroup(GroupModel):
    kind = "zd"

    def __init__(self, d: int):
        if d < 1:
            raise GroupError("Z^d needs d >= 1")
        self.d = int(d)
        self.tag = f"Z^{self.d}"
        self._gens = tuple(
            GroupElement(self.tag, tuple(int(i == j) for j in range(self.d))) for i in range(self.d)
        )
        self._rels = tuple(
            ((i, 1), (j, 1), (i, -1), (j, -1)) for i, j in itertools.combinations(range(self.d), 2)
        )

    @property
    def generators(self):
        return self._gens

    @property
    def relations(self):
        return self._rels

    @property
    def identity(self):
        return GroupElement(self.tag, (0,) * self.d)

    def _mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def _inv(self, a):
        return tuple(-x for x in a)

    def _check_coords(self, coords):
        if len(coords) != self.d:
            raise GroupError(f"Z^{self.d} element needs {self.d} coordinates, got {coords}")

    def normal_form_word(self, g):
        self._own(g)
        return tuple((i, c) for i, c in enumerate(g.coords) if c)

    def sample(self, rng, radius=5):
        return GroupElement(self.tag, tuple(int(v) for v in rng.integers(-radius, radius + 1, self.d)))

    def describe(self):
        return {"kind": self.kind, "dim": self.d}


class HeisenbergGroup(GroupModel):
    """Discrete Heisenberg group in upper-triangular matrix coordinates."""

    kind = "heisenberg"
    tag = "H3"

    # z = x y x^-1 y^-1
    CENTER_WORD: Word = ((0, 1), (1, 1), (0, -1), (1, -1))

    def __init__(self):
        self._gens = (GroupElement(self.tag, (1, 0, 0)), GroupElement(self.tag, (0, 1, 0)))
        z, zi = self.CENTER_WORD, invert_word(self.CENTER_WORD)
        self._rels = (
            ((0, 1),) + z + ((0, -1),) + zi,
            ((1, 1),) + z + ((1, -1),) + zi,
        )

    @property
    def generators(self):
        return self._gens

    @property
    def relations(self):
        return self._rels

    @property
    def identity(self):
        return GroupElement(self.tag, (0, 0, 0))

    @property
    def center(self) -> GroupElement:
        return GroupElement(self.tag, (0, 0, 1))

    def _mul(self, a, b):
        return (a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1])

    def _inv(self, a):
        return (-a[0], -a[1], -a[2] + a[0] * a[1])

    def _check_coords(self, coords):
        if len(coords) != 3:
            raise GroupError(f"Heisenberg element needs 3 coordinates, got {coords}")

    def center_exponent(self, g: GroupElement) -> int:
        """Exponent ``e`` with ``g = x^a y^b z^e``."""
        a, b, c = g.coords
        return c - a * b

    def normal_form_word(self, g):
        self._own(g)
        a, b, _ = g.coords
        e = self.center_exponent(g)
        zw = self.CENTER_WORD if e >= 0 else invert_word(self.CENTER_WORD)
        word = []
        if a:
            word.append((0, a))
        if b:
            word.append((1, b))
        return tuple(word) + zw * abs(e)

    def sample(self, rng, radius=5):
        return GroupElement(self.tag, tuple(int(v) for v in rng.integers(-radius, radius + 1, 3)))


class FiniteGroup(GroupModel):
    """A finite group given by its multiplication table.

    ``table[i][j]`` is the index of the product of elements ``i`` and ``j``.
    The presentation is the Schreier-type one read off a breadth-first
    spanning tree of the right Cayley graph, which is complete: a
    representation satisfying every relator is a homomorphism.
    """

    kind = "finite"

    def __init__(self, table: Sequence[Sequence[int]], generators: Sequence[int], name: str | None = None):
        t = np.asarray(table, dtype=np.int64)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] == 0:
            raise GroupError("multiplication table must be a nonempty square array")
        n = t.shape[0]
        if t.min() < 0 or t.max() >= n:
            raise GroupError("table entries must lie in [0, |G|)")
        for row in itertools.chain(t, t.T):
            if len(set(row.tolist())) != n:
                raise GroupError("multiplication table is not a Latin square")
        # t[t][i, j, l] = (i j) l and t[:, t][i, j, l] = i (j l)
        if not np.array_equal(t[t], t[:, t]):
            raise GroupError("multiplication table is not associative")
        ids = [e for e in range(n) if np.array_equal(t[e], np.arange(n))]
        if not ids or not np.array_equal(t[:, ids[0]], np.arange(n)):
            raise GroupError("multiplication table has no two-sided identity")
        self.table = t
        self.size = n
        self._e = ids[0]
        self._invs = tuple(int(np.nonzero(t[i] == self._e)[0][0]) for i in range(n))
        gens = [int(g) for g in generators]
        if any(not 0 <= g < n for g in gens):
            raise GroupError("generator index out of range")
        self.name = name or f"G{n}"
        self.tag = f"finite:{self.name}"
        self._gens = tuple(GroupElement(self.tag, (g,)) for g in gens)
        self._words, self._rels = self._spanning_tree(gens)

    def _spanning_tree(self, gens):
        words: dict[int, Word] = {self._e: ()}
        queue = deque([self._e])
        tree_edges = set()
        while queue:
            g = queue.popleft()
            for si, s in enumerate(gens):
                h = int(self.table[g, s])
                if h not in words:
                    words[h] = words[g] + ((si, 1),)
                    tree_edges.add((g, si))
                    queue.append(h)
        if len(words) != self.size:
            raise GroupError(f"generators span only {len(words)} of {self.size} elements")
        rels = []
        for g in sorted(words):
            for si, s in enumerate(gens):
                if (g, si) in tree_edges:
                    continue
                h = int(self.table[g, s])
                rels.append(words[g] + ((si, 1),) + invert_word(words[h]))
        return words, tuple(rels)

    @property
    def generators(self):
        return self._gens

    @property
    def relations(self):
        return self._rels

    @property
    def identity(self):
        return GroupElement(self.tag, (self._e,))

    @property
    def elements(self) -> tuple[GroupElement, ...]:
        return tuple(GroupElement(self.tag, (i,)) for i in range(self.size))

    def _mul(self, a, b):
        return (int(self.table[a[0], b[0]]),)

    def _inv(self, a):
        return (self._invs[a[0]],)

    def _check_coords(self, coords):
        if len(coords) != 1 or not 0 <= coords[0] < self.size:
            raise GroupError(f"finite-group index must lie in [0, {self.size}), got {coords}")

    def normal_form_word(self, g):
        self._own(g)
        return self._words[g.coords[0]]

    def sample(self, rng, radius=5):
        return GroupElement(self.tag, (int(rng.integers(self.size)),))

    def describe(self):
        return {
            "kind": self.kind,
            "name": self.name,
            "table": self.table.tolist(),
            "generators": [g.coords[0] for g in self._gens],
        }


def symmetric_group(n: int) -> tuple[FiniteGroup, list[tuple[int, ...]]]:
    """``S_n`` with product ``(p q)(i) = p(q(i))``, generated by a transposition and an n-cycle.

    Returns the group and the permutations indexed like its elements.
    """
    perms = sorted(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    table = [[index[tuple(p[q[i]] for i in range(n))] for q in perms] for p in perms]
    gens = []
    if n > 1:
        swap = list(range(n))
        swap[0], swap[1] = 1, 0
        gens.append(index[tuple(swap)])
        if n > 2:
            gens.append(index[tuple((i + 1) % n for i in range(n))])
    else:
        gens.append(0)
    return FiniteGroup(table, gens, name=f"S{n}"), perms


def cyclic_group(n: int) -> FiniteGroup:
    table = [[(i + j) % n for j in range(n)] for i in range(n)]
    return FiniteGroup(table, [1 % n], name=f"C{n}")


def multiply(g: GroupElement, h: GroupElement, model: GroupModel) -> GroupElement:
    return model.multiply(g, h)


def inverse(g: GroupElement, model: GroupModel) -> GroupElement:
    return model.inverse(g)


# ---------------------------------------------------------------------------
# Følner families


class FolnerFamily(ABC):
    """An indexed family of finite sets ``F_1, F_2, ...`` with right-translation defects.

    Every ``F_k`` factors as an ordered product ``A_1 A_2 ... A_r`` of sets,
    where ``(a_1, ..., a_r) -> a_1 ... a_r`` is a bijection onto ``F_k``.  Each
    ``A_j`` is a prefix of a fixed infinite enumeration (a *sequence*), so
    sums over ``F_k`` for consecutive ``k`` can be accumulated incrementally.
    """

    rule: str

    def __init__(self, model: GroupModel):
        self.model = model
        self._seq_cache: dict[tuple, list[GroupElement]] = {}

    @staticmethod
    def _check_index(k: int) -> None:
        if int(k) < 1:
            raise GroupError(f"Følner index must be >= 1, got {k}")

    @abstractmethod
    def size(self, k: int) -> int: ...

    @abstractmethod
    def factors(self, k: int) -> tuple[tuple[tuple, int], ...]:
        """Ordered ``(sequence key, prefix length)`` pairs whose product is ``F_k``."""

    @abstractmethod
    def _sequence_item(self, key: tuple, i: int) -> GroupElement: ...

    @abstractmethod
    def _defect_intersection(self, k: int, g: GroupElement) -> int:
        """``|F_k ∩ F_k g|`` by a closed-form count."""

    def sequence(self, key: tuple, length: int) -> list[GroupElement]:
        seq = self._seq_cache.setdefault(key, [])
        while len(seq) < length:
            seq.append(self._sequence_item(key, len(seq)))
        return seq[:length]

    def factor_sets(self, k: int) -> list[list[GroupElement]]:
        self._check_index(k)
        return [self.sequence(key, n) for key, n in self.factors(k)]

    def elements(self, k: int) -> list[GroupElement]:
        """``F_k`` enumerated as the ordered product of its factors."""
        out = [self.model.identity]
        for part in self.factor_sets(k):
            out = [self.model.multiply(g, h) for g in out for h in part]
        return out

    def set(self, k: int) -> frozenset[GroupElement]:
        return frozenset(self.elements(k))

    def defect(self, k: int, g: GroupElement) -> Fraction:
        """Exact ``|F_k Δ F_k g| / |F_k|``."""
        self._check_index(k)
        self.model._own(g)
        n = self.size(k)
        # right translation is a bijection, so |F g| = |F|
        return Fraction(2 * (n - self._defect_intersection(k, g)), n)

    def defect_by_enumeration(self, k: int, g: GroupElement, method: str = "symdiff") -> Fraction:
        """Brute-force defect from the explicit sets."""
        F = self.set(k)
        Fg = frozenset(self.model.multiply(h, g) for h in F)
        if method == "symdiff":
            num = len(F ^ Fg)
        elif method == "inclusion":
            num = len(F) + len(Fg) - 2 * len(F & Fg)
        else:
            raise ValueError(f"unknown method {method!r}")
        return Fraction(num, len(F))

    def max_generator_defect(self, k: int) -> Fraction:
        return max(self.defect(k, g) for g in self.model.generators)

    def describe(self) -> dict:
        return {"rule": self.rule}


class BoxFamily(FolnerFamily):
    """``F_k = [0, k)^d`` in ``Z^d``."""

    rule = "box"

    def __init__(self, model: ZdGroup):
        super().__init__(model)
        self.d = model.d

    def size(self, k):
        self._check_index(k)
        return k**self.d

    def factors(self, k):
        return tuple((("axis", i), k) for i in range(self.d))

    def _sequence_item(self, key, i):
        axis = key[1]
        return GroupElement(self.model.tag, tuple(i if j == axis else 0 for j in range(self.d)))

    def _defect_intersection(self, k, g):
        out = 1
        for c in g.coords:
            out *= max(0, k - abs(c))
        return out


class HeisenbergBoxFamily(FolnerFamily):
    """``F_k = {(a, b, c) : 0 <= a, b < k, 0 <= c < k^2}``.

    Factors as the plane ``{(a, b, 0)}`` times the central segment
    ``{(0, 0, c)}``, since ``(a, b, 0)(0, 0, c) = (a, b, c)``.  The plane is
    enumerated in square shells so that its first ``k^2`` entries are exactly
    the ``k x k`` square.
    """

    rule = "box"

    def size(self, k):
        self._check_index(k)
        return k**4

    def factors(self, k):
        return (("plane",), k * k), (("center",), k * k)

    def _sequence_item(self, key, i):
        tag = self.model.tag
        if key == ("center",):
            return GroupElement(tag, (0, 0, i))
        s = math.isqrt(i)
        r = i - s * s
        # shell s: (s, 0..s) then (0..s-1, s)
        if r <= s:
            return GroupElement(tag, (s, r, 0))
        return GroupElement(tag, (r - s - 1, s, 0))

    def _defect_intersection(self, k, g):
        p, q, r = g.coords
        K = k * k
        nb = max(0, k - abs(q))
        if nb == 0:
            return 0
        total = 0
        for a in range(max(0, -p), min(k, k - p)):
            total += max(0, K - abs(r + a * q))
        return nb * total


class WholeGroupFamily(FolnerFamily):
    """``F_k = G`` for every ``k`` (finite groups)."""

    rule = "whole"

    def size(self, k):
        self._check_index(k)
        return self.model.size

    def factors(self, k):
        return ((("all",), self.model.size),)

    def _sequence_item(self, key, i):
        return GroupElement(self.model.tag, (i,))

    def _defect_intersection(self, k, g):
        return self.model.size


def folner_family(model: GroupModel) -> FolnerFamily:
    """The shipped Følner family for a group model."""
    if isinstance(model, ZdGroup):
        return BoxFamily(model)
    if isinstance(model, HeisenbergGroup):
        return HeisenbergBoxFamily(model)
    if isinstance(model, FiniteGroup):
        return WholeGroupFamily(model)
    raise GroupError(f"no Følner family for {model!r}")


def folner_set(F: FolnerFamily, k: int) -> frozenset[GroupElement]:
    return F.set(k)


def folner_defect(F: FolnerFamily, k: int, g: GroupElement) -> Fraction:
    return F.defect(k, g)
