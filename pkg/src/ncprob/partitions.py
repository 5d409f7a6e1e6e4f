"""Set partitions of {1..n}, non-crossing/interval families, nesting forests
and linear-extension counts.

Blocks use 1-based ground-set labels.  A partition is canonical when every
block is sorted and blocks are listed by increasing minimum; all constructors
here return canonical partitions, so equality is structural.

The nesting (cover) order on a non-crossing partition: U covers V when some
pair i, j in U satisfies i < v < j for every v in V.  Outer blocks are the
minimal elements, so a linear extension enumerates blocks outermost-first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

from .errors import SizeCapError, UnsupportedStructureError

ENUMERATION_CAP = 12   # NC(12) = 208012 is the desk-scale ceiling
BRUTE_FORCE_CAP = 9    # 9! permutations per partition is the oracle ceiling

SPECIES_FAMILIES = ("all", "noncrossing", "interval")


@dataclass(frozen=True)
class Partition:
    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = sorted(i for b in self.blocks for i in b)
        if seen != list(range(1, self.n + 1)):
            raise UnsupportedStructureError(
                f"blocks do not partition 1..{self.n}: {self.blocks}")
        for b in self.blocks:
            if list(b) != sorted(b):
                raise UnsupportedStructureError(f"block not sorted: {b}")
        mins = [b[0] for b in self.blocks]
        if mins != sorted(mins):
            raise UnsupportedStructureError(
                "blocks not listed by increasing minimum")

    @staticmethod
    def make(n, blocks) -> "Partition":
        """Canonicalize arbitrary block input (sorts within and across)."""
        blks = sorted(tuple(sorted(b)) for b in blocks)
        return Partition(n, tuple(blks))

    def __len__(self):
        return len(self.blocks)

    def is_noncrossing(self) -> bool:
        return not _has_crossing(self.blocks)

    def is_interval(self) -> bool:
        return all(b[-1] - b[0] + 1 == len(b) for b in self.blocks)


def _has_crossing(blocks) -> bool:
    # a < c < b < d with a,b in one block and c,d in another
    for u, v in itertools.combinations(blocks, 2):
        for a, b in itertools.combinations(u, 2):
            for c, dd in itertools.combinations(v, 2):
                if a < c < b < dd or c < a < dd < b:
                    return True
    return False


def _all_partitions(n):
    # restricted-growth enumeration; block creation order = order of minima,
    # so the output is already canonical
    def rec(i, blocks):
        if i > n:
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(1, [])


def _noncrossing_partitions(lo, hi):
    """Non-crossing partitions of the integer interval {lo..hi}."""
    if lo > hi:
        yield ()
        return
    rest = list(range(lo + 1, hi + 1))
    for mask in range(1 << len(rest)):
        first = [lo] + [rest[i] for i in range(len(rest)) if mask >> i & 1]
        # remaining elements split into gaps between consecutive legs of the
        # first block; each gap is partitioned independently (anything that
        # straddled a gap boundary would cross the first block)
        gaps = []
        for a, b in zip(first, first[1:] + [hi + 1]):
            gaps.append((a + 1, b - 1))
        sub = [_noncrossing_partitions(a, b) for a, b in gaps]
        for combo in itertools.product(*sub):
            blocks = [tuple(first)]
            for c in combo:
                blocks.extend(c)
            yield tuple(blocks)


def _interval_partitions(n):
    # compositions of n: cut set of {1..n-1}
    for mask in range(1 << (n - 1)):
        blocks, start = [], 1
        for i in range(1, n):
            if mask >> (i - 1) & 1:
                blocks.append(tuple(range(start, i + 1)))
                start = i + 1
        blocks.append(tuple(range(start, n + 1)))
        yield tuple(blocks)


@lru_cache(maxsize=None)
def enumerate_partitions(n: int, species: str = "all") -> tuple[Partition, ...]:
    """All partitions of {1..n} in the given family, canonical order.

    species: "all" | "noncrossing" | "interval".  Hard cap n <= 12.
    """
    if not 1 <= n <= ENUMERATION_CAP:
        raise SizeCapError(f"partition enumeration needs 1 <= n <= "
                           f"{ENUMERATION_CAP}, got {n}")
    if species not in SPECIES_FAMILIES:
        raise UnsupportedStructureError(f"unknown partition family {species!r}")
    if species == "all":
        raw = _all_partitions(n)
    elif species == "noncrossing":
        raw = (tuple(sorted(bs)) for bs in _noncrossing_partitions(1, n))
    else:
        raw = _interval_partitions(n)
    canon = sorted({tuple(sorted(tuple(b) for b in bs)) for bs in raw})
    return tuple(Partition(n, bs) for bs in canon)


_builtin_enumerate = enumerate


def enumerate(n: int, species: str = "all"):  # noqa: A001 - spec-fixed name
    """Alias mandated by the public API; see enumerate_partitions."""
    return enumerate_partitions(n, species)


@dataclass(frozen=True)
class NestingForest:
    """parent[i] = index of the innermost block nesting block i, or -1."""
    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...] = field(compare=False)

    @property
    def roots(self):
        return tuple(i for i, p in _builtin_enumerate(self.parent) if p < 0)

    def subtree_sizes(self):
        sizes = [1] * len(self.parent)
        # children always have larger minima than parents in a canonical
        # non-crossing partition, so a reverse sweep accumulates bottom-up
        for i in range(len(self.parent) - 1, -1, -1):
            p = self.parent[i]
            if p >= 0:
                sizes[p] += sizes[i]
        return sizes


def _nests(u, v) -> bool:
    # u covers v: some two legs of u flank all of v
    return u[0] < v[0] and v[-1] < u[-1] and any(
        i < v[0] and v[-1] < j for i, j in zip(u, u[1:]))


def nesting_forest(p: Partition) -> NestingForest:
    """Cover-relation forest of a non-crossing partition."""
    if not p.is_noncrossing():
        raise UnsupportedStructureError(
            "nesting forest is only defined for non-crossing partitions")
    m = len(p.blocks)
    parent = [-1] * m
    for i in range(m):
        # among blocks nesting i, the innermost one is the direct parent;
        # for non-crossing partitions those blocks form a chain, and the
        # innermost has the largest minimum
        best = -1
        for j in range(m):
            if j != i and _nests(p.blocks[j], p.blocks[i]):
                if best < 0 or p.blocks[j][0] > p.blocks[best][0]:
                    best = j
        parent[i] = best
    children = [[] for _ in range(m)]
    for i, q in _builtin_enumerate(parent):
        if q >= 0:
            children[q].append(i)
    return NestingForest(tuple(parent), tuple(tuple(c) for c in children))


def order_count(p: Partition) -> int:
    """Number of linear extensions o(p) of the nesting order, outer-first.

    Hook-length product for forests: |p|! / prod over blocks of the size of
    the subtree hanging below that block.
    """
    sizes = nesting_forest(p).subtree_sizes()
    num = factorial(len(p.blocks))
    for s in sizes:
        num, rem = divmod(num, s)
        assert rem == 0, "hook product must divide the factorial"
    return num


def order_count_bruteforce(p: Partition) -> int:
    """Exhaustive permutation-scan oracle for order_count (|p| <= 9)."""
    forest = nesting_forest(p)
    m = len(p.blocks)
    if m > BRUTE_FORCE_CAP:
        raise SizeCapError(f"brute-force order count capped at |p| <= "
                           f"{BRUTE_FORCE_CAP}, got {m}")
    edges = [(q, i) for i, q in _builtin_enumerate(forest.parent) if q >= 0]
    count = 0
    for perm in itertools.permutations(range(m)):
        # perm[i] = label assigned to block i; parents must come first
        if all(perm[a] < perm[b] for a, b in edges):
            count += 1
    return count
