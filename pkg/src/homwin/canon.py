"""Canonical labeling of small colored relational structures.

Iterative color refinement over the relation family followed by
individualization backtracking.  The canonical form is the
lexicographically least relational encoding over all discrete leaves of
the search tree; automorphisms discovered along the way prune sibling
branches, which keeps highly symmetric inputs tractable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import BudgetExceededError


@dataclass
class RelStructure:
    """n elements, unary colors, plus named binary/ternary relations."""

    n: int
    unary: list = field(default_factory=list)       # hashable color per element
    binary: dict = field(default_factory=dict)      # name -> set[(x, y)]
    ternary: dict = field(default_factory=dict)     # name -> set[(x, y, z)]

    def validate(self):
        if len(self.unary) != self.n:
            raise ValueError("unary color list length mismatch")
        for rel in self.binary.values():
            for x, y in rel:
                if not (0 <= x < self.n and 0 <= y < self.n):
                    raise ValueError("binary tuple out of range")
        for rel in self.ternary.values():
            for t in rel:
                if len(t) != 3 or not all(0 <= x < self.n for x in t):
                    raise ValueError("ternary tuple out of range")


def _initial_colors(s: RelStructure) -> list[int]:
    palette = sorted(set(map(repr, s.unary)))
    lookup = {c: i for i, c in enumerate(palette)}
    return [lookup[repr(c)] for c in s.unary]


def _refine(s: RelStructure, colors: list[int]) -> list[int]:
    """1-dimensional refinement until the partition stabilizes."""
    bnames = sorted(s.binary)
    tnames = sorted(s.ternary)
    while True:
        sigs = []
        for x in range(s.n):
            sig = [colors[x]]
            for name in bnames:
                rel = s.binary[name]
                outs = sorted(colors[y] for (a, y) in rel if a == x)
                ins = sorted(colors[a] for (a, y) in rel if y == x)
                sig.append((tuple(outs), tuple(ins)))
            for name in tnames:
                rel = s.ternary[name]
                roles = [[], [], []]
                for t in rel:
                    for pos in range(3):
                        if t[pos] == x:
                            roles[pos].append(tuple(colors[t[k]] for k in range(3) if k != pos))
                sig.append(tuple(tuple(sorted(r)) for r in roles))
            sigs.append(tuple(sig))
        palette = sorted(set(sigs))
        lookup = {c: i for i, c in enumerate(palette)}
        new = [lookup[sig] for sig in sigs]
        if new == colors:
            return colors
        colors = new


def _adjacency_index(s: RelStructure):
    bnames = sorted(s.binary)
    tnames = sorted(s.ternary)
    b_by_first = {name: {} for name in bnames}
    for name in bnames:
        for x, y in s.binary[name]:
            b_by_first[name].setdefault(x, []).append(y)
    return bnames, tnames, b_by_first


def _encode(s: RelStructure, order: list[int]) -> tuple:
    """Relational encoding under a discrete labeling (element -> position)."""
    pos = [0] * s.n
    for p, x in enumerate(order):
        pos[x] = p
    enc = [s.n, tuple(repr(s.unary[x]) for x in order)]
    for name in sorted(s.binary):
        enc.append((name, tuple(sorted((pos[x], pos[y]) for x, y in s.binary[name]))))
    for name in sorted(s.ternary):
        enc.append(
            (name, tuple(sorted((pos[x], pos[y], pos[z]) for x, y, z in s.ternary[name])))
        )
    return tuple(enc)


def _cells(colors: list[int]) -> dict[int, list[int]]:
    cells: dict[int, list[int]] = {}
    for x, c in enumerate(colors):
        cells.setdefault(c, []).append(x)
    return cells


@dataclass
class CanonResult:
    labeling: list[int]          # element order achieving the canonical form
    encoding: tuple
    canonical_bytes: bytes
    automorphisms: list          # generators discovered during the search
    nodes: int


def canonical_form(s: RelStructure, budget: int = 200_000) -> CanonResult:
    s.validate()
    if s.n == 0:
        enc = _encode(s, [])
        return CanonResult([], enc, repr(enc).encode(), [], 0)

    base_colors = _refine(s, _initial_colors(s))
    best: dict = {"enc": None, "order": None}
    autos: list[tuple] = []
    first_leaf: dict = {"order": None, "enc": None}
    counter = [0]

    def leaf_order(colors):
        return sorted(range(s.n), key=lambda x: (colors[x], x))

    def descend(colors, fixed: tuple):
        counter[0] += 1
        if counter[0] > budget:
            raise BudgetExceededError("canonical-form search budget exhausted", counter[0])
        cells = _cells(colors)
        target = None
        for c in sorted(cells):
            if len(cells[c]) > 1:
                target = cells[c]
                break
        if target is None:
            order = leaf_order(colors)
            enc = _encode(s, order)
            if first_leaf["order"] is None:
                first_leaf["order"] = order
                first_leaf["enc"] = enc
            elif enc == first_leaf["enc"]:
                ref = first_leaf["order"]
                perm = [0] * s.n
                for p, x in enumerate(order):
                    perm[ref[p]] = x
                if any(perm[i] != i for i in range(s.n)) and tuple(perm) not in autos:
                    autos.append(tuple(perm))
            if best["enc"] is None or enc < best["enc"]:
                best["enc"] = enc
                best["order"] = order
            return
        tried: list[int] = []
        for y in target:
            if _pruned_by_autos(y, tried, autos, fixed):
                continue
            tried.append(y)
            child = list(colors)
            child[y] = -1  # individualize: strictly least color
            child = _normalize(child)
            descend(_refine(s, child), fixed + (y,))

    descend(base_colors, ())
    enc = best["enc"]
    blob = repr(enc).encode()
    return CanonResult(best["order"], enc, blob, [list(a) for a in autos], counter[0])


def _normalize(colors: list[int]) -> list[int]:
    palette = sorted(set(colors))
    lookup = {c: i for i, c in enumerate(palette)}
    return [lookup[c] for c in colors]


def _pruned_by_autos(y: int, tried: list[int], autos: list[tuple], fixed: tuple) -> bool:
    """Skip y if a discovered automorphism fixing the current path maps an
    already-tried candidate to it."""
    if not tried or not autos:
        return False
    stab = [a for a in autos if all(a[f] == f for f in fixed)]
    if not stab:
        return False
    seen = set(tried)
    frontier = list(tried)
    while frontier:
        x = frontier.pop()
        for a in stab:
            z = a[x]
            if z == y:
                return True
            if z not in seen:
                seen.add(z)
                frontier.append(z)
    return False


def digest(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()
