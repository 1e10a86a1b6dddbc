"""Public operations on catalog structures and their windows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import SpecError
from .kinds import (
    Window,
    build_window_cached,
    kind_of,
)
from .perm import PermGroup
from .specs import StructureSpec


@dataclass(frozen=True)
class ClosedSet:
    """A Galois-closed set of window points, remembering its generators."""

    points: tuple
    generated_by: tuple = ()

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, p):
        return p in self.points


def build_window(spec: StructureSpec, level: int) -> Window:
    return build_window_cached(spec, level)


def acl(spec: StructureSpec, w: Window, A: Iterable[int]) -> ClosedSet:
    gens = tuple(sorted(set(A)))
    kind = kind_of(spec)
    if not gens:
        return ClosedSet(tuple(kind.dcl0(w)), ())
    return ClosedSet(kind.acl(w, gens), gens)


def dcl0(spec: StructureSpec, w: Window) -> ClosedSet:
    return ClosedSet(tuple(kind_of(spec).dcl0(w)), ())


def hull_iso_extends(spec: StructureSpec, w: Window, q: dict) -> Optional[dict]:
    """An isomorphism of the closures of dom(q) and cod(q) extending q, if any."""
    if len(set(q.values())) != len(q):
        return None
    for p in list(q) + list(q.values()):
        if not (0 <= p < w.n):
            raise ValueError(f"point {p} outside window")
    return kind_of(spec).hull_map(w, q)


def same_orbit(
    spec: StructureSpec,
    w: Window,
    a: Sequence[int],
    b: Sequence[int],
    params: Iterable[int] = (),
) -> bool:
    """Orbit equivalence of tuples over pointwise-fixed parameters.

    Decided through the closure oracles, i.e. with the semantics of the
    ambient countable structure rather than of the finite window group.
    """
    a, b = tuple(a), tuple(b)
    if len(a) != len(b):
        raise ValueError("tuple length mismatch")
    params = tuple(sorted(set(params)))
    kind = kind_of(spec)
    if kind.exact_type_keys:
        return kind.type_key(w, params + a) == kind.type_key(w, params + b)
    q = {p: p for p in params}
    for x, y in zip(a, b):
        if q.get(x, y) != y:
            return False
        q[x] = y
    return hull_iso_extends(spec, w, q) is not None


def aut_closed(spec: StructureSpec, w: Window, K: ClosedSet) -> PermGroup:
    """Self-isomorphism group of the induced structure on a closed set,
    as a permutation group on positions of sorted(K)."""
    kind = kind_of(spec)
    pts = tuple(sorted(K.points))
    if acl(spec, w, pts).points != pts:
        raise ValueError("point set is not closed")
    return kind.aut_closed_group(w, pts)


def window_group(spec: StructureSpec, w: Window) -> PermGroup:
    return w.group()


def closed_sets_up_to(spec: StructureSpec, w: Window, gen_size: int) -> list[ClosedSet]:
    """All closures of at most gen_size window points (deduplicated),
    including the closure of the empty set."""
    import itertools

    seen = {}
    empty = acl(spec, w, ())
    seen[empty.points] = empty
    for size in range(1, gen_size + 1):
        for combo in itertools.combinations(range(w.n), size):
            c = acl(spec, w, combo)
            if c.points not in seen:
                seen[c.points] = c
    return [seen[k] for k in sorted(seen, key=lambda t: (len(t), t))]


def same_orbit_class_count(spec: StructureSpec, w: Window, n: int) -> int:
    """Number of same_orbit classes of n-tuples over empty parameters."""
    import itertools

    kind = kind_of(spec)
    if kind.exact_type_keys:
        keys = {kind.type_key(w, t) for t in itertools.product(range(w.n), repeat=n)}
        return len(keys)
    G = w.group()
    seen = set()
    classes = 0
    for t in itertools.product(range(w.n), repeat=n):
        if t in seen:
            continue
        classes += 1
        seen |= G.orbit(t)
    return classes


# ---------------------------------------------------------------------------
# empirical closure oracle


def empirical_acl(
    spec: StructureSpec, levels: Sequence[int], A: Iterable[int]
) -> ClosedSet:
    """Falsifier for the closure oracle: points of the base window whose
    orbit size over A (counted through same_orbit) is the same in every
    window of the given levels.

    Growth windows are the base window enriched with fresh witnesses of
    each realized point type over A (one per type per level step), so a
    point outside the closure sees its type count grow while closure
    points keep a constant count.
    """
    levels = sorted(set(levels))
    if not levels:
        raise ValueError("need at least one level")
    base_level = levels[0]
    base = build_window(spec, base_level)
    A = tuple(sorted(set(A)))
    for p in A:
        if not (0 <= p < base.n):
            raise ValueError(f"point {p} outside the smallest window")
    kind = kind_of(spec)

    def counts_at(rounds: int) -> dict:
        w = _augmented_window(spec, base, A, rounds)
        buckets: dict = {}
        for y in range(w.n):
            buckets.setdefault(kind.type_key(w, A + (y,)), 0)
            buckets[kind.type_key(w, A + (y,))] += 1
        return {
            x: buckets[kind.type_key(w, A + (x,))] for x in range(base.n)
        }

    if kind.exact_type_keys:
        series = [counts_at(l - base_level) for l in levels]
    else:
        # finite structures: orbits are exact already, nothing grows
        G = base.group().stabilizer_pointwise(A)
        series = [{x: len(G.orbit(x)) for x in range(base.n)} for _ in levels]
    stable = [
        x
        for x in range(base.n)
        if all(series[i][x] == series[0][x] for i in range(len(series)))
    ]
    return ClosedSet(tuple(sorted(stable)), A)


def _augmented_window(spec: StructureSpec, base: Window, A: tuple, rounds: int):
    kind = kind_of(spec)
    if rounds <= 0:
        return base
    if spec.kind == "vector_space":
        return build_window(spec, base.level + rounds)
    w = base.clone()
    reps: dict = {}
    for x in range(base.n):
        key = kind.type_key(base, A + (x,))
        if x not in A and key not in reps:
            reps[key] = x
    for _ in range(rounds):
        for key in sorted(reps):
            x = reps[key]
            codes = {a: kind.pair_code(w, x, a) for a in A}
            kind.extend_point(w, codes)
    return w
