"""Exact finite permutation groups via deterministic stabilizer chains.

Everything here is deterministic: base points are chosen in ascending
numeric order, orbits are traversed breadth-first with generators in list
order, and no randomization is used anywhere, so group data (orders,
strong generating sets, search results) is reproducible bit for bit.

Composition convention: ``(p * q)(x) == p(q(x))`` (apply ``q`` first).
"""

from __future__ import annotations

import itertools
import re
from typing import Iterable, Iterator, Optional, Sequence

from .errors import BudgetExceededError


class Permutation:
    """A permutation of {0, ..., n-1} stored as its image array."""

    __slots__ = ("images",)

    def __init__(self, images: Sequence[int]):
        images = tuple(images)
        n = len(images)
        seen = [False] * n
        for i in images:
            if not isinstance(i, int) or not (0 <= i < n) or seen[i]:
                raise ValueError(f"not a permutation of 0..{n - 1}: {images!r}")
            seen[i] = True
        object.__setattr__(self, "images", images)

    def __setattr__(self, name, value):
        raise AttributeError("Permutation is immutable")

    @property
    def degree(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(n))

    @classmethod
    def from_cycles(cls, text: str, degree: int | None = None) -> "Permutation":
        """Parse cycle notation like ``"(0 1 2)(3 4)"`` (commas allowed)."""
        stripped = text.strip()
        if stripped in ("", "()"):
            return cls.identity(degree or 0)
        if not re.fullmatch(r"(\s*\([\d\s,]*\)\s*)+", stripped):
            raise ValueError(f"cannot parse cycle notation: {text!r}")
        cycles = []
        for body in re.findall(r"\(([\d\s,]*)\)", stripped):
            pts = [int(tok) for tok in re.split(r"[,\s]+", body.strip()) if tok]
            if len(pts) != len(set(pts)):
                raise ValueError(f"repeated point in cycle: {body!r}")
            if pts:
                cycles.append(pts)
        n = max((max(c) for c in cycles if c), default=-1) + 1
        if degree is not None:
            if degree < n:
                raise ValueError(f"cycle point exceeds degree {degree}")
            n = degree
        images = list(range(n))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                images[a] = b
        return cls(images)

    def __call__(self, point: int) -> int:
        return self.images[point]

    def act_tuple(self, pts: Sequence[int]) -> tuple:
        return tuple(self.images[p] for p in pts)

    def act_set(self, pts: Iterable[int]) -> frozenset:
        return frozenset(self.images[p] for p in pts)

    def __mul__(self, other: "Permutation") -> "Permutation":
        if self.degree != other.degree:
            raise ValueError("degree mismatch in composition")
        oi = other.images
        si = self.images
        return Permutation(tuple(si[oi[i]] for i in range(len(si))))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.images)
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(inv)

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def extended(self, n: int) -> "Permutation":
        if n < self.degree:
            raise ValueError("cannot shrink a permutation")
        return Permutation(self.images + tuple(range(self.degree, n)))

    def cycles(self) -> list[list[int]]:
        out, seen = [], set()
        for i in range(len(self.images)):
            if i in seen or self.images[i] == i:
                continue
            cyc, j = [i], self.images[i]
            seen.add(i)
            while j != i:
                seen.add(j)
                cyc.append(j)
                j = self.images[j]
            out.append(cyc)
        return out

    def cycle_string(self) -> str:
        cycs = self.cycles()
        if not cycs:
            return "()"
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cycs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and self.images == other.images

    def __hash__(self) -> int:
        return hash(self.images)

    def __repr__(self) -> str:
        return f"Permutation({self.cycle_string()}, n={self.degree})"


class _Level:
    __slots__ = ("beta", "gens", "transversal")

    def __init__(self, beta: int, ident: Permutation):
        self.beta = beta
        self.gens: list[Permutation] = []
        self.transversal: dict[int, Permutation] = {beta: ident}


class PermGroup:
    """Finite permutation group with a base and strong generating set.

    The chain carries one level per point of a deterministic base: an
    optional caller-supplied prefix followed by the remaining support in
    ascending order.  Redundant levels (trivial fundamental orbit) are kept
    internally but omitted from the public ``base``.
    """

    def __init__(
        self,
        degree: int,
        generators: Iterable[Permutation] = (),
        base_prefix: Sequence[int] = (),
    ):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.degree = degree
        gens = []
        for g in generators:
            if not isinstance(g, Permutation):
                g = Permutation(g)
            if g.degree != degree:
                raise ValueError(
                    f"generator degree {g.degree} does not match group degree {degree}"
                )
            if not g.is_identity() and g not in gens:
                gens.append(g)
        self.generators: list[Permutation] = gens
        self._ident = Permutation.identity(degree)

        support = sorted(
            {i for g in gens for i in range(degree) if g.images[i] != i}
        )
        base_order = [p for p in base_prefix]
        for p in base_prefix:
            if not (0 <= p < degree):
                raise ValueError(f"base point {p} out of range")
        base_order += [p for p in support if p not in set(base_prefix)]
        self._levels = [_Level(b, self._ident) for b in base_order]
        for g in gens:
            self._store(g)
        self._run()
        self._order = 1
        for lv in self._levels:
            self._order *= len(lv.transversal)

    # -- chain construction ------------------------------------------------
    # A generator is stored at the deepest level whose earlier base points
    # it all fixes; the generating set of level i is everything stored at
    # levels >= i.

    def _store(self, g: Permutation) -> int:
        for j, lv in enumerate(self._levels):
            if g.images[lv.beta] != lv.beta:
                if g not in lv.gens:
                    lv.gens.append(g)
                return j
        raise AssertionError("nonidentity element fixing the whole base")

    def _gens_for(self, i: int) -> list[Permutation]:
        return [g for lv in self._levels[i:] for g in lv.gens]

    def _sift(self, g: Permutation, start: int = 0):
        for i in range(start, len(self._levels)):
            lv = self._levels[i]
            x = g.images[lv.beta]
            if x == lv.beta:
                continue
            u = lv.transversal.get(x)
            if u is None:
                return g, i
            g = u.inverse() * g
        return g, len(self._levels)

    def _rebuild_orbit(self, i: int):
        lv = self._levels[i]
        gens = self._gens_for(i)
        lv.transversal = {lv.beta: self._ident}
        queue = [lv.beta]
        while queue:
            x = queue.pop(0)
            ux = lv.transversal[x]
            for s in gens:
                y = s.images[x]
                if y not in lv.transversal:
                    lv.transversal[y] = s * ux
                    queue.append(y)

    def _run(self):
        """Verify the Schreier condition level by level, deepest first.

        Adding a residue at level j makes levels above j suspect again; the
        walk jumps to j and re-descends, so every level is re-verified
        against the final generating sets.
        """
        i = len(self._levels) - 1
        while i >= 0:
            self._rebuild_orbit(i)
            lv = self._levels[i]
            gens = self._gens_for(i)
            new_level = None
            for x in sorted(lv.transversal):
                ux = lv.transversal[x]
                for s in gens:
                    usx = lv.transversal[s.images[x]]
                    schreier = usx.inverse() * s * ux
                    if schreier.is_identity():
                        continue
                    res, _ = self._sift(schreier, i + 1)
                    if res.is_identity():
                        continue
                    new_level = self._store(res)
                    self._rebuild_orbit(new_level)
                    break
                if new_level is not None:
                    break
            if new_level is not None:
                i = new_level
            else:
                i -= 1

    # -- queries -----------------------------------------------------------

    @property
    def order(self) -> int:
        return self._order

    @property
    def base(self) -> list[int]:
        return [lv.beta for lv in self._levels if len(lv.transversal) > 1]

    @property
    def strong_generators(self) -> list[Permutation]:
        out = []
        for lv in self._levels:
            for g in lv.gens:
                if g not in out:
                    out.append(g)
        return out

    def contains(self, p: Permutation) -> bool:
        if p.degree != self.degree:
            return False
        res, _ = self._sift(p)
        return res.is_identity()

    __contains__ = contains

    def is_subgroup_of(self, other: "PermGroup") -> bool:
        return self.degree == other.degree and all(
            g in other for g in self.generators
        )

    def orbit(self, pts):
        """Orbit of a point or a tuple of points (componentwise action)."""
        single = isinstance(pts, int)
        start = (pts,) if single else tuple(pts)
        for p in start:
            if not (0 <= p < self.degree):
                raise ValueError(f"point {p} out of range")
        seen = {start}
        queue = [start]
        while queue:
            t = queue.pop(0)
            for g in self.generators:
                img = g.act_tuple(t)
                if img not in seen:
                    seen.add(img)
                    queue.append(img)
        if single:
            return {t[0] for t in seen}
        return seen

    def elements(self, limit: int = 2_000_000) -> Iterator[Permutation]:
        """Iterate all elements (product over transversals)."""
        if self.order > limit:
            raise BudgetExceededError(
                f"refusing to enumerate {self.order} group elements"
            )

        def rec(i: int, acc: Permutation) -> Iterator[Permutation]:
            if i == len(self._levels):
                yield acc
                return
            for x in sorted(self._levels[i].transversal):
                yield from rec(i + 1, acc * self._levels[i].transversal[x])

        yield from rec(0, self._ident)

    def transporter(self, src: Sequence[int], dst: Sequence[int], budget: int = 200_000):
        """Some g in the group with g(src) == dst componentwise, or None."""
        src, dst = tuple(src), tuple(dst)
        if len(src) != len(dst):
            raise ValueError("length mismatch")
        memo = {src: self._ident}
        queue = [src]
        nodes = 0
        while queue:
            t = queue.pop(0)
            if t == dst:
                return memo[t]
            for g in self.generators:
                img = g.act_tuple(t)
                if img not in memo:
                    nodes += 1
                    if nodes > budget:
                        raise BudgetExceededError("transporter orbit too large", nodes)
                    memo[img] = g * memo[t]
                    queue.append(img)
        return memo.get(dst)

    def __repr__(self) -> str:
        return f"PermGroup(degree={self.degree}, order={self.order})"

    # -- stabilizers ---------------------------------------------------------

    def stabilizer_pointwise(self, points: Iterable[int]) -> "PermGroup":
        pts = sorted(set(points))
        for p in pts:
            if not (0 <= p < self.degree):
                raise ValueError(f"point {p} out of range")
        rebuilt = PermGroup(self.degree, self.generators, base_prefix=pts)
        gens = []
        for lv in rebuilt._levels[len(pts):]:
            gens.extend(lv.gens)
        return PermGroup(self.degree, gens)

    def stabilizer_setwise(self, points: Iterable[int], budget: int = 500_000) -> "PermGroup":
        pts = sorted(set(points))
        for p in pts:
            if not (0 <= p < self.degree):
                raise ValueError(f"point {p} out of range")
        aset = frozenset(pts)
        rebuilt = PermGroup(self.degree, self.generators, base_prefix=pts)
        counter = [0, budget]
        gens = _setwise_generators(rebuilt._levels, aset, self._ident, counter)
        return PermGroup(self.degree, gens)


def _consistent(beta: int, img: int, aset: frozenset) -> bool:
    return (beta in aset) == (img in aset)


def _setwise_leaf_search(levels, i, acc, aset, counter):
    """First chain element below level i extending acc and respecting aset."""
    if i == len(levels):
        return acc
    counter[0] += 1
    if counter[0] > counter[1]:
        raise BudgetExceededError("setwise stabilizer search budget exhausted", counter[0])
    lv = levels[i]
    for x in sorted(lv.transversal):
        img = acc.images[x]
        if not _consistent(lv.beta, img, aset):
            continue
        found = _setwise_leaf_search(levels, i + 1, acc * lv.transversal[x], aset, counter)
        if found is not None:
            return found
    return None


def _setwise_generators(levels, aset, ident, counter):
    """Generators of the setwise stabilizer along a stabilizer chain.

    The stabilizer is generated by the setwise stabilizer inside the
    point stabilizer of the first base point together with one coset
    representative per admissible first-level image.
    """
    if not levels:
        return []
    gens = _setwise_generators(levels[1:], aset, ident, counter)
    lv = levels[0]
    for x in sorted(lv.transversal):
        if x == lv.beta:
            continue
        if not _consistent(lv.beta, ident.images[x], aset):
            continue
        rep = _setwise_leaf_search(levels, 1, lv.transversal[x], aset, counter)
        if rep is not None:
            gens = gens + [rep]
    return gens


# -- module-level operations ---------------------------------------------


def group_from_generators(
    gens: Sequence[Permutation], degree: int | None = None
) -> PermGroup:
    """Build a group with exact order from a list of permutations."""
    gens = list(gens)
    if degree is None:
        if not gens:
            raise ValueError("degree required for an empty generating set")
        degree = gens[0].degree
    return PermGroup(degree, gens)


def orbit(G: PermGroup, pts):
    return G.orbit(pts)


def pointwise_stabilizer(G: PermGroup, A: Iterable[int]) -> PermGroup:
    return G.stabilizer_pointwise(A)


def setwise_stabilizer(G: PermGroup, A: Iterable[int], budget: int = 500_000) -> PermGroup:
    return G.stabilizer_setwise(A, budget)


def subgroup_join(G: PermGroup, H1: PermGroup, H2: PermGroup) -> PermGroup:
    """Subgroup of G generated by the union of two subgroups' generators."""
    for H in (H1, H2):
        if not H.is_subgroup_of(G):
            raise ValueError("input is not a subgroup of the ambient group")
    return PermGroup(G.degree, H1.generators + H2.generators)


def is_normal_finite_index(H1: PermGroup, H2: PermGroup) -> tuple[bool, int]:
    """Whether H1 is normal in H2, together with the exact index [H2:H1]."""
    if not H1.is_subgroup_of(H2):
        raise ValueError("H1 is not a subgroup of H2")
    normal = all(
        (g * h * g.inverse()) in H1
        for g in H2.generators
        for h in H1.generators
    )
    index = H2.order // H1.order
    return normal, index


class RestrictionQuotient:
    """The restriction homomorphism of a setwise stabilizer onto a set K.

    ``setwise`` is G_{K}, ``kernel`` is G_(K), and ``image`` is the induced
    permutation group on K (points relabeled to 0..|K|-1 in sorted order).
    ``preimage(l)`` lifts an image element back to the window group.
    """

    def __init__(self, G: PermGroup, K: Iterable[int], budget: int = 500_000):
        self.k_points = tuple(sorted(set(K)))
        for p in self.k_points:
            if not (0 <= p < G.degree):
                raise ValueError(f"point {p} out of range")
        idx = {p: i for i, p in enumerate(self.k_points)}
        m = len(self.k_points)
        self.setwise = G.stabilizer_setwise(self.k_points, budget)
        self.kernel = G.stabilizer_pointwise(self.k_points)
        self._m = m
        self._window_degree = G.degree

        def restrict(s: Permutation) -> Permutation:
            return Permutation(tuple(idx[s.images[p]] for p in self.k_points))

        self.image = PermGroup(m, [restrict(s) for s in self.setwise.generators])
        ext_gens = [
            Permutation(
                tuple(idx[s.images[p]] for p in self.k_points)
                + tuple(m + s.images[i] for i in range(G.degree))
            )
            for s in self.setwise.generators
        ]
        self._ext = PermGroup(m + G.degree, ext_gens, base_prefix=range(m))

    def preimage(self, l: Permutation) -> Optional[Permutation]:
        """An element of the setwise stabilizer restricting to l on K."""
        if l.degree != self._m:
            raise ValueError("degree mismatch with K")
        acc = Permutation.identity(self._m + self._window_degree)
        for lv in self._ext._levels:
            if lv.beta >= self._m:
                break
            target = l.images[lv.beta]
            need = acc.inverse().images[target]
            u = lv.transversal.get(need)
            if u is None:
                return None
            acc = acc * u
        for b in range(self._m):
            if acc.images[b] != l.images[b]:
                return None
        return Permutation(tuple(acc.images[self._m + i] - self._m for i in range(self._window_degree)))


def restriction_quotient(G: PermGroup, K: Iterable[int], budget: int = 500_000):
    """(image on K, kernel G_(K)) of the restriction homomorphism on G_{K}."""
    rq = RestrictionQuotient(G, K, budget)
    return rq.image, rq.kernel


def symmetric_group(n: int) -> PermGroup:
    if n <= 1:
        return PermGroup(max(n, 0))
    gens = [Permutation.from_cycles("(0 1)", n)]
    if n > 2:
        gens.append(Permutation(tuple(range(1, n)) + (0,)))
    return PermGroup(n, gens)


def intersect_small(A: PermGroup, B: PermGroup, limit: int = 100_000) -> PermGroup:
    """Intersection by enumerating the smaller group. Small degrees only."""
    if A.degree != B.degree:
        raise ValueError("degree mismatch")
    small, big = (A, B) if A.order <= B.order else (B, A)
    gens = [g for g in small.elements(limit) if g in big and not g.is_identity()]
    return PermGroup(A.degree, gens)


def all_permutations(n: int) -> Iterator[Permutation]:
    for images in itertools.permutations(range(n)):
        yield Permutation(images)
