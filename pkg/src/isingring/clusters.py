"""Combinatorics of spin configurations on the ring.

Aligned/frustrated bond sets, connected components of the +1 and -1 site
sets, and edge/vertex boundaries of site subsets. Bonds are canonically
oriented pairs (i, i mod n + 1) for i = 1..n; at n=2 this yields the two
distinct bonds (1,2) and (2,1) of the doubled-edge ring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .model import Configuration, _rotated_bits

Bond = tuple


def ring_bond(i: int, n: int) -> Bond:
    """Canonical bond with lower endpoint i (1-based); wraps as (n, 1)."""
    return (i, i % n + 1)


@dataclass(frozen=True)
class RingGraph:
    """The cycle graph on sites 1..n (a doubled edge pair when n=2)."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("ring graph needs n >= 2")

    @property
    def edges(self) -> tuple:
        return tuple(ring_bond(i, self.n) for i in range(1, self.n + 1))


@dataclass(frozen=True)
class FlipSet:
    """A subset of sites, bit-packed like Configuration (bit b <-> site b+1)."""

    mask: int
    n: int

    def __post_init__(self):
        if not 0 <= self.mask < (1 << self.n):
            raise ValueError(f"mask {self.mask} out of range for n={self.n}")

    @classmethod
    def from_sites(cls, sites: Iterable[int], n: int) -> "FlipSet":
        mask = 0
        for s in sites:
            if not 1 <= s <= n:
                raise ValueError(f"site {s} out of range 1..{n}")
            mask |= 1 << (s - 1)
        return cls(mask, n)

    @classmethod
    def arc(cls, start: int, length: int, n: int) -> "FlipSet":
        """Arc of ``length`` consecutive sites beginning at 1-based ``start``."""
        if not 1 <= length <= n:
            raise ValueError(f"arc length {length} out of range 1..{n}")
        mask = 0
        for k in range(length):
            mask |= 1 << ((start - 1 + k) % n)
        return cls(mask, n)

    @property
    def sites(self) -> tuple:
        return tuple(b + 1 for b in range(self.n) if (self.mask >> b) & 1)

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def arc_witness(self):
        """(start, length) when the set is a connected arc; (1, n) for the full ring; None otherwise."""
        if self.mask == 0:
            return None
        full = (1 << self.n) - 1
        if self.mask == full:
            return (1, self.n)
        boundary = self.mask ^ _rotated_bits(self.mask, self.n)
        if boundary.bit_count() != 2:
            return None
        # start = the member site whose predecessor is outside
        for b in range(self.n):
            prev = (b - 1) % self.n
            if (self.mask >> b) & 1 and not (self.mask >> prev) & 1:
                return (b + 1, self.size)
        return None


def is_connected(flipset: FlipSet, graph: RingGraph) -> bool:
    """True iff the set induces a connected subgraph: a nonempty arc or the full ring."""
    if flipset.n != graph.n:
        raise ValueError("flip set and graph sizes differ")
    return flipset.mask != 0 and flipset.arc_witness() is not None


def edge_boundary(flipset: FlipSet, graph: RingGraph) -> frozenset:
    """Ring bonds with exactly one endpoint in the set."""
    if flipset.n != graph.n:
        raise ValueError("flip set and graph sizes differ")
    n = graph.n
    cut = flipset.mask ^ _rotated_bits(flipset.mask, n)
    return frozenset(ring_bond(b + 1, n) for b in range(n) if (cut >> b) & 1)


def vertex_boundary(flipset: FlipSet, graph: RingGraph) -> frozenset:
    """Member sites with at least one ring neighbor outside the set."""
    if flipset.n != graph.n:
        raise ValueError("flip set and graph sizes differ")
    n = graph.n
    out = []
    for b in range(n):
        if not (flipset.mask >> b) & 1:
            continue
        nxt = (b + 1) % n
        prv = (b - 1) % n
        if not (flipset.mask >> nxt) & 1 or not (flipset.mask >> prv) & 1:
            out.append(b + 1)
    return frozenset(out)


@dataclass(frozen=True)
class ClusterDecomposition:
    """Connected components of the +1 and -1 site sets of one configuration.

    Components are site tuples in arc order (wrapping the seam where needed)
    and are listed sorted by their smallest site label, which fixes the
    component indices used in tests.
    """

    n: int
    plus_components: tuple
    minus_components: tuple
    aligned_bonds: frozenset
    frustrated_bonds: frozenset

    @property
    def plus_count(self) -> int:
        return len(self.plus_components)

    @property
    def minus_count(self) -> int:
        return len(self.minus_components)

    def components(self) -> tuple:
        """All components, plus first, each sorted by smallest site."""
        return self.plus_components + self.minus_components


def decompose(config: Configuration) -> ClusterDecomposition:
    """Maximal-arc decomposition of a configuration into aligned components."""
    n = config.n
    bits = config.bits
    cut = bits ^ _rotated_bits(bits, n)  # bit b set iff bond (b+1, b+2) is frustrated
    frustrated = frozenset(ring_bond(b + 1, n) for b in range(n) if (cut >> b) & 1)
    aligned = frozenset(ring_bond(b + 1, n) for b in range(n) if not (cut >> b) & 1)

    if cut == 0:
        sites = tuple(range(1, n + 1))
        if (bits & 1) == 1:
            return ClusterDecomposition(n, (sites,), (), aligned, frustrated)
        return ClusterDecomposition(n, (), (sites,), aligned, frustrated)

    # Each frustrated bond (b+1, b+2) ends a component at site b+1; the next
    # component starts at site b+2. Walk the ring between consecutive cuts.
    cut_positions = [b for b in range(n) if (cut >> b) & 1]
    plus, minus = [], []
    for k, b in enumerate(cut_positions):
        start = (b + 1) % n  # 0-based start site of the component after this cut
        nxt = cut_positions[(k + 1) % len(cut_positions)]
        length = (nxt - start) % n + 1
        sites = tuple((start + t) % n + 1 for t in range(length))
        if (bits >> start) & 1:
            plus.append(sites)
        else:
            minus.append(sites)
    plus.sort(key=min)
    minus.sort(key=min)
    return ClusterDecomposition(n, tuple(plus), tuple(minus), aligned, frustrated)
