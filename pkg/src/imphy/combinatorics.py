"""Exact binomials, combinadic rank/unrank and index selection.

Patterns are ordered lexicographically on their increasing position lists,
so rank 0 of (4, 2) is {0, 1} and rank 5 is {2, 3}.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from pathlib import Path

import numpy as np

from .constellation import bits_to_int, int_to_bits, parse_bits
from .errors import DomainError, UsageError


def binomial(n: int, k: int) -> int:
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"binomial needs 0 <= k <= n, got n={n}, k={k}")
    return comb(n, k)


def floor_log2(value: int) -> int:
    if value < 1:
        raise DomainError("floor_log2 of a non-positive integer")
    return value.bit_length() - 1


def index_bits(n: int, k: int) -> int:
    """floor(log2 C(n, k)), computed on the exact integer."""
    return floor_log2(binomial(n, k))


@dataclass(frozen=True)
class ActivationPattern:
    n: int
    k: int
    active: tuple[int, ...]

    def __post_init__(self):
        act = tuple(int(a) for a in self.active)
        object.__setattr__(self, "active", act)
        if len(act) != self.k or self.k > self.n:
            raise DomainError(f"pattern {act} does not have k={self.k} entries out of n={self.n}")
        if any(a < 0 or a >= self.n for a in act):
            raise DomainError(f"pattern {act} has positions outside [0, {self.n})")
        if any(b <= a for a, b in zip(act, act[1:])):
            raise DomainError(f"pattern {act} is not strictly increasing")

    @classmethod
    def from_positions(cls, n: int, positions) -> "ActivationPattern":
        pos = tuple(sorted(int(p) for p in positions))
        return cls(n, len(pos), pos)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(self.active)] = True
        return m


def unrank(rank: int, n: int, k: int) -> ActivationPattern:
    total = binomial(n, k)
    if not 0 <= rank < total:
        raise DomainError(f"rank {rank} outside [0, {total})")
    active = []
    start = 0
    for slots in range(k, 0, -1):
        # walk candidate first elements; each fixes C(n - c - 1, slots - 1) subsets
        c = start
        while True:
            block = comb(n - c - 1, slots - 1)
            if rank < block:
                break
            rank -= block
            c += 1
        active.append(c)
        start = c + 1
    return ActivationPattern(n, k, tuple(active))


def rank(pattern: ActivationPattern) -> int:
    n, k = pattern.n, pattern.k
    r = 0
    prev = -1
    for i, a in enumerate(pattern.active):
        slots = k - i
        for c in range(prev + 1, a):
            r += comb(n - c - 1, slots - 1)
        prev = a
    return r


@dataclass(frozen=True, eq=False)
class IndexSelector:
    """Maps p1 index bits to one of 2**p1 activation patterns."""
    n: int
    k: int
    mode: str = "combinadic"
    table: tuple[ActivationPattern, ...] | None = None
    _lookup: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        binomial(self.n, self.k)
        if self.mode not in ("combinadic", "lookup"):
            raise UsageError(f"unknown index selection mode {self.mode!r}")
        if self.mode == "lookup":
            if self.table is None:
                raise UsageError("lookup mode needs a table")
            table = tuple(self.table)
            if len(table) != 1 << self.p1:
                raise UsageError(f"lookup table has {len(table)} entries, need {1 << self.p1}")
            if len(set(p.active for p in table)) != len(table):
                raise UsageError("lookup table patterns are not distinct")
            for p in table:
                if (p.n, p.k) != (self.n, self.k):
                    raise UsageError(f"table pattern {p.active} is not a ({self.n},{self.k}) pattern")
            object.__setattr__(self, "table", table)
            lookup = {p.active: i for i, p in enumerate(table)}
        else:
            lookup = None
        object.__setattr__(self, "_lookup", lookup)

    @property
    def p1(self) -> int:
        return index_bits(self.n, self.k)

    @property
    def size(self) -> int:
        return 1 << self.p1

    def pattern(self, value: int) -> ActivationPattern:
        if not 0 <= value < self.size:
            raise DomainError(f"index value {value} outside [0, {self.size})")
        if self.mode == "lookup":
            return self.table[value]
        return unrank(value, self.n, self.k)

    def value_of(self, pattern: ActivationPattern) -> int | None:
        """Inverse of ``pattern``; None when the pattern is outside the codebook."""
        if self.mode == "lookup":
            return self._lookup.get(pattern.active)
        r = rank(pattern)
        return r if r < self.size else None

    def patterns(self) -> list[ActivationPattern]:
        return _patterns(self)

    def masks(self) -> np.ndarray:
        """(2**p1, n) boolean matrix of the legal patterns, in bit order."""
        return _masks(self)

    @classmethod
    def from_file(cls, path) -> "IndexSelector":
        return load_lookup_table(path)


@lru_cache(maxsize=None)
def _patterns(sel: IndexSelector) -> list[ActivationPattern]:
    return [sel.pattern(v) for v in range(sel.size)]


@lru_cache(maxsize=None)
def _masks(sel: IndexSelector) -> np.ndarray:
    m = np.array([p.mask for p in _patterns(sel)], dtype=bool).reshape(sel.size, sel.n)
    m.setflags(write=False)
    return m


def select_pattern(bits, selector: IndexSelector) -> ActivationPattern:
    bits = parse_bits(bits)
    if bits.size != selector.p1:
        raise UsageError(f"expected {selector.p1} index bits, got {bits.size}")
    return selector.pattern(bits_to_int(bits))


def pattern_bits(pattern: ActivationPattern, selector: IndexSelector) -> np.ndarray:
    value = selector.value_of(pattern)
    if value is None:
        raise DomainError(f"pattern {pattern.active} is not produced by this selector")
    return int_to_bits(value, selector.p1)


def load_lookup_table(path) -> IndexSelector:
    """Read ``{N, K, entries: [{bits, positions}]}`` and build a lookup selector."""
    doc = json.loads(Path(path).read_text())
    return lookup_from_dict(doc)


def lookup_from_dict(doc: dict) -> IndexSelector:
    try:
        n, k, entries = int(doc["N"]), int(doc["K"]), doc["entries"]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"lookup table document is missing {exc}") from None
    p1 = index_bits(n, k)
    slots: list[ActivationPattern | None] = [None] * (1 << p1)
    for e in entries:
        b = parse_bits(e["bits"])
        if b.size != p1:
            raise UsageError(f"entry bits {e['bits']!r} should have {p1} bits")
        v = bits_to_int(b)
        if slots[v] is not None:
            raise UsageError(f"bits {e['bits']!r} appear twice")
        pat = ActivationPattern.from_positions(n, e["positions"])
        if pat.k != k:
            raise UsageError(f"entry {e['positions']} does not activate K={k} positions")
        slots[v] = pat
    if any(s is None for s in slots):
        raise UsageError(f"lookup table needs all {1 << p1} bit patterns")
    return IndexSelector(n, k, "lookup", tuple(slots))


def lookup_to_dict(selector: IndexSelector) -> dict:
    return {
        "N": selector.n,
        "K": selector.k,
        "entries": [
            {"bits": "".join(map(str, int_to_bits(v, selector.p1))), "positions": list(p.active)}
            for v, p in enumerate(selector.patterns())
        ],
    }
