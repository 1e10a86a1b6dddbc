"""The windowed lattice of finite Galois-closed sets.

Nodes are closures of small generating sets plus the definable closure of
the empty set at the bottom; the depth of a node is its distance from the
bottom in the Hasse diagram, and the level sets collect the nodes of
bounded depth.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import BudgetExceededError
from .kinds import Window, kind_of
from .specs import StructureSpec
from .structures import ClosedSet, acl, dcl0


@dataclass
class ClosureLattice:
    spec: StructureSpec
    window: Window
    nodes: list          # ClosedSet, sorted by (size, points); nodes[0] is bottom
    bottom: ClosedSet
    hasse_edges: list    # (i, j) with nodes[i] covered by nodes[j]
    depth: dict          # node index -> Hasse distance from bottom
    max_generators: int

    def node_index(self, points) -> int | None:
        pts = tuple(sorted(points))
        return self._by_points.get(pts)

    def __post_init__(self):
        self._by_points = {n.points: i for i, n in enumerate(self.nodes)}

    def meet(self, K1: ClosedSet, K2: ClosedSet) -> ClosedSet:
        pts = tuple(sorted(set(K1.points) & set(K2.points)))
        idx = self.node_index(pts)
        if idx is not None:
            return self.nodes[idx]
        return ClosedSet(pts)

    def join(self, K1: ClosedSet, K2: ClosedSet) -> ClosedSet:
        return acl(self.spec, self.window, set(K1.points) | set(K2.points))


def build_lattice(
    spec: StructureSpec, w: Window, max_generators: int, max_nodes: int = 20_000
) -> ClosureLattice:
    if max_generators < 1:
        raise ValueError("max_generators must be >= 1")
    bottom = dcl0(spec, w)
    seen = {bottom.points: bottom}
    for size in range(1, max_generators + 1):
        for combo in itertools.combinations(range(w.n), size):
            c = acl(spec, w, combo)
            seen.setdefault(c.points, c)
            if len(seen) > max_nodes:
                raise BudgetExceededError(f"lattice exceeds {max_nodes} nodes")
    order = sorted(seen, key=lambda t: (len(t), t))
    # bottom first even if same size as other nodes
    order.remove(bottom.points)
    order.insert(0, bottom.points)
    nodes = [seen[p] for p in order]
    sets = [set(n.points) for n in nodes]
    edges = []
    for i, a in enumerate(sets):
        for j, b in enumerate(sets):
            if i != j and a < b:
                if not any(
                    k != i and k != j and a < sets[k] and sets[k] < b
                    for k in range(len(sets))
                ):
                    edges.append((i, j))
    # BFS distance from the bottom along covers
    depth = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for (a, b) in edges:
                if a == i and b not in depth:
                    depth[b] = depth[i] + 1
                    nxt.append(b)
        frontier = nxt
    # nodes incomparable with the bottom chain start their own components;
    # give them depth by set size as a fallback (does not occur for the
    # catalog closures, where bottom is contained in every node or empty)
    for i in range(len(nodes)):
        depth.setdefault(i, len(nodes[i].points))
    return ClosureLattice(spec, w, nodes, nodes[0], edges, depth, max_generators)


def level_set(lat: ClosureLattice, k: int) -> list[ClosedSet]:
    """Nodes other than the bottom at Hasse distance at most k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [
        n
        for i, n in enumerate(lat.nodes)
        if n.points != lat.bottom.points and lat.depth[i] <= k
    ]


def compute_kM(spec: StructureSpec, w: Window) -> int:
    """Length of the longest strict chain of singleton closures.

    Closures equal to the definable closure of the empty set are excluded
    from chains, so the bottom of the lattice never pads the count.
    """
    if w.n == 0:
        raise ValueError("window is empty")
    bottom = dcl0(spec, w).points
    closures = sorted(
        {acl(spec, w, (p,)).points for p in w.points} - {bottom},
        key=lambda t: (len(t), t),
    )
    best = {}
    for i, c in enumerate(closures):
        cset = set(c)
        best[i] = 1
        for j in range(i):
            if set(closures[j]) < cset:
                best[i] = max(best[i], best[j] + 1)
    return max(best.values(), default=0)


def union_coverage(lat: ClosureLattice, k: int) -> bool:
    """Whether the level-k nodes cover every window point."""
    covered = set()
    for n in level_set(lat, k):
        covered |= set(n.points)
    return covered == set(lat.window.points)


def to_dot(lat: ClosureLattice) -> str:
    lines = ["digraph lattice {", "  rankdir=BT;"]
    for i, n in enumerate(lat.nodes):
        label = "{" + ",".join(str(p) for p in n.points) + "}"
        shape = "doublecircle" if n.points == lat.bottom.points else "ellipse"
        lines.append(f'  n{i} [label="{label}", shape={shape}];')
    for a, b in lat.hasse_edges:
        lines.append(f"  n{a} -> n{b};")
    lines.append("}")
    return "\n".join(lines)
