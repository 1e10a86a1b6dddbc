"""Weak-elimination-of-imaginaries testing by orbit alternation.

For closed sets A and B and a tuple c, the alternation orbit is the least
set containing c and closed under orbit equivalence over A and over B; it
is always contained in the orbit over A∩B, and weak elimination predicts
equality.  On a finite window the alternation may get stuck for lack of
intermediate points, so the check runs in an enriched ambient window and,
when a strict inclusion appears, tries to repair it by adjoining age-legal
bridge points.  Bridges and enrichment only enable genuine orbit moves,
so they never manufacture a CONSISTENT verdict; a strict inclusion that
no bridge can fix is reported as FAIL.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import BudgetExceededError
from .kinds import Window, _stable_seed, kind_of
from .specs import StructureSpec
from .structures import ClosedSet, acl, build_window, closed_sets_up_to


@dataclass(frozen=True)
class WeiParams:
    gen_size: int = 2
    tuple_len: int = 2
    level: int = 2
    ambient_margin: int = 2
    enrich_points: int = 8
    max_bridge_points: int = 300


@dataclass
class WeiWitness:
    A: ClosedSet
    B: ClosedSet
    c: tuple
    alternation_orbit: set
    reference_orbit: set


@dataclass
class WeiVerdict:
    outcome: str                 # "FAIL" or "CONSISTENT"
    params: WeiParams
    witness: WeiWitness | None = None
    ambient_points: int = 0
    bridges_added: int = 0

    @property
    def failed(self) -> bool:
        return self.outcome == "FAIL"


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        while p != self.parent[p]:
            self.parent[p] = self.parent[self.parent[p]]
            p = self.parent[p]
        self.parent[x] = p
        return p

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


class _TupleSpace:
    """All tuples of bounded length over an ambient window, with per-closed-set
    orbit-class arrays (recomputed when the window grows).

    For binary-coded kinds the marked type of (params, x, y) factors exactly
    through the types of (params, x) and (params, y) together with the codes
    between x and y and their equality flag, so class arrays for pairs are
    assembled with array arithmetic from the singleton classes.
    """

    def __init__(self, spec: StructureSpec, w: Window, max_len: int, level_n: int | None = None):
        self.spec = spec
        self.kind = kind_of(spec)
        self.w = w
        self.max_len = max_len
        self.level_n = level_n if level_n is not None else w.n
        if max_len > 2 and hasattr(self.kind, "pair_code"):
            raise ValueError("tuple lengths above 2 are not supported here")
        self._grown_to = -1
        self._arrays: dict = {}
        self._refresh()

    def _refresh(self):
        if self.w.n == self._grown_to:
            return
        n = self.w.n
        self.tuples = [(x,) for x in range(n)]
        if self.max_len >= 2:
            self.tuples += [(x, y) for x in range(n) for y in range(n)]
        self._index = {t: i for i, t in enumerate(self.tuples)}
        self._lens_np = np.array([len(t) for t in self.tuples], dtype=np.int64)
        self._level_mask = np.array(
            [all(x < self.level_n for x in t) for t in self.tuples], dtype=bool
        )
        self._arrays.clear()
        self._grown_to = n
        if hasattr(self.kind, "pair_code"):
            mat = np.zeros((n, n), dtype=np.int64)
            for a in range(n):
                for b in range(n):
                    if a != b:
                        mat[a, b] = self.kind.pair_code(self.w, a, b)
            self._code_mat = mat

    @property
    def lens(self):
        self._refresh()
        return self._lens_np

    @property
    def level_mask(self):
        self._refresh()
        return self._level_mask

    def classes(self, params: tuple):
        self._refresh()
        arr = self._arrays.get(params)
        if arr is not None:
            return arr
        n = self.w.n
        kind = self.kind
        if hasattr(kind, "pair_code"):
            ids: dict = {}
            singles = np.array(
                [ids.setdefault(kind.type_key(self.w, params + (x,)), len(ids)) for x in range(n)],
                dtype=np.int64,
            )
            parts = [singles]
            if self.max_len >= 2:
                xs, ys = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
                xs, ys = xs.ravel(), ys.ravel()
                k = len(ids)
                comp = (
                    ((singles[xs] * k + singles[ys]) * 2 + (xs == ys))
                    * (self._code_mat.max() + 1)
                    + self._code_mat[xs, ys]
                ) * (self._code_mat.max() + 1) + self._code_mat[ys, xs]
                _, inv = np.unique(comp, return_inverse=True)
                parts.append(inv + k)
            arr = np.concatenate(parts)
        elif self.spec.kind == "finite":
            stab = self.w.group().stabilizer_pointwise(params)
            arr = np.empty(len(self.tuples), dtype=np.int64)
            seen: dict = {}
            nxt = 0
            for i, t in enumerate(self.tuples):
                if t in seen:
                    arr[i] = seen[t]
                    continue
                for o in stab.orbit(t):
                    seen[o] = nxt
                arr[i] = nxt
                nxt += 1
        else:
            ids = {}
            arr = np.array(
                [
                    ids.setdefault(kind.type_key(self.w, params + t), len(ids))
                    for t in self.tuples
                ],
                dtype=np.int64,
            )
        self._arrays[params] = arr
        return arr

    def index(self):
        self._refresh()
        return self._index

    def scan_order(self):
        """Tuple indices in (length, lex) order for deterministic reporting."""
        self._refresh()
        return sorted(range(len(self.tuples)), key=lambda i: (len(self.tuples[i]), self.tuples[i]))


def _roots(space: _TupleSpace, pa, pb):
    """Per-tuple alternation component labels for parameter sets pa, pb."""
    ca = space.classes(pa)
    cb = space.classes(pb)
    na = int(ca.max()) + 1
    nb = int(cb.max()) + 1
    edges = np.unique(ca * nb + cb)
    rows = edges // nb
    cols = edges % nb + na
    data = np.ones(len(edges), dtype=np.int8)
    graph = coo_matrix(
        (np.concatenate([data, data]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(na + nb, na + nb),
    )
    _, labels = connected_components(graph, directed=False)
    return labels[ca]


def _strict_exists(space: _TupleSpace, pa, pb, inter):
    # tuples drawn from the level window; ambient-only tuples serve as
    # alternation intermediates, not as failure witnesses
    mask = space.level_mask
    roots = _roots(space, pa, pb)[mask]
    cr = space.classes(inter)[mask]
    lens = space.lens[mask]
    nr = int(roots.max()) + 1
    nc = int(cr.max()) + 1
    cells = (lens * nc + cr)
    joint = np.unique(cells * nr + roots).size
    plain = np.unique(cells).size
    return joint > plain


def _first_strict(space: _TupleSpace, pa, pb, inter):
    """Least tuple whose alternation component is strictly inside its
    reference class; None if none."""
    if not _strict_exists(space, pa, pb, inter):
        return None
    mask = space.level_mask
    roots = _roots(space, pa, pb)
    cr = space.classes(inter)
    byref: dict = {}
    for i, t in enumerate(space.tuples):
        if mask[i]:
            byref.setdefault((len(t), int(cr[i])), set()).add(int(roots[i]))
    broken = {key for key, rs in byref.items() if len(rs) > 1}
    for i in space.scan_order():
        t = space.tuples[i]
        if mask[i] and (len(t), int(cr[i])) in broken:
            return t
    return None


def _component(space: _TupleSpace, pa: tuple, pb: tuple, c: tuple) -> set:
    roots = _roots(space, pa, pb)
    root = roots[space.index()[c]]
    return {
        t
        for i, t in enumerate(space.tuples)
        if len(t) == len(c) and roots[i] == root
    }


def alternation_orbit(
    spec: StructureSpec, w: Window, A: ClosedSet, B: ClosedSet, c: tuple
) -> set:
    """Least fixpoint of closing {c} under orbit moves over A and over B."""
    c = tuple(c)
    for p in c:
        if not (0 <= p < w.n):
            raise ValueError(f"point {p} outside window")
    space = _TupleSpace(spec, w, len(c))
    return _component(space, tuple(sorted(A.points)), tuple(sorted(B.points)), c)


def reference_orbit(spec: StructureSpec, w: Window, params, c: tuple) -> set:
    kind = kind_of(spec)
    params = tuple(sorted(params))
    key = kind.type_key(w, params + tuple(c))
    return {
        t
        for t in itertools.product(range(w.n), repeat=len(c))
        if kind.type_key(w, params + t) == key
    }


def _enriched_ambient(spec: StructureSpec, params: WeiParams) -> Window:
    w = build_window(spec, params.level + params.ambient_margin).clone()
    kind = kind_of(spec)
    if spec.kind == "vector_space" or not kind.exact_type_keys:
        return w
    rng = random.Random(_stable_seed("wei-enrich", spec.canonical_json(), params.level))
    for _ in range(params.enrich_points):
        codes = kind.random_extension(w, rng)
        if codes is None:
            break
        kind.extend_point(w, codes)
    level_n = build_window(spec, params.level).n
    _fill_profile_gaps(spec, w, level_n, rng)
    return w


def _fill_profile_gaps(spec, w: Window, level_n: int, rng, rounds: int = 3):
    """Twin every point that is the unique realizer of some profile over a
    small parameter set of the level window.

    A pinned parameter point whose profile over another closed set is
    unique has a one-element alternation component; a full twin (same
    codes to every existing point) provides a second realizer of all of
    its profiles at once without introducing any new rare profile.
    """
    kind = kind_of(spec)
    subsets = [(a,) for a in range(level_n)] + [
        (a, b) for a in range(level_n) for b in range(a + 1, level_n)
    ]
    for _ in range(rounds):
        rare = set()
        for S in subsets:
            census: dict = {}
            for z in range(w.n):
                if z not in S:
                    census.setdefault(
                        tuple(kind.pair_code(w, z, s) for s in S), []
                    ).append(z)
            for zs in census.values():
                if len(zs) == 1:
                    rare.add(zs[0])
        if not rare:
            break
        for z in sorted(rare):
            codes = {x: kind.pair_code(w, z, x) for x in range(w.n) if x != z}
            codes[z] = kind.twin_code(w, z)
            kind.extend_point(w, codes)


def wei_check(spec: StructureSpec, params: WeiParams = WeiParams()) -> WeiVerdict:
    """Scan all closed A, B of bounded generator size and all short tuples;
    FAIL on the first unrepairable strict inclusion, else CONSISTENT."""
    if params.gen_size < 1 or params.tuple_len < 1 or params.level < 0:
        raise ValueError("parameters must be positive")
    level_w = build_window(spec, params.level)
    closed = closed_sets_up_to(spec, level_w, params.gen_size)
    ambient = _enriched_ambient(spec, params)
    space = _TupleSpace(spec, ambient, params.tuple_len, level_n=level_w.n)
    bridges = 0

    pending = []
    for i in range(len(closed)):
        for j in range(i, len(closed)):
            A, B = closed[i], closed[j]
            sa, sb = set(A.points), set(B.points)
            if sa <= sb or sb <= sa:
                # orbit moves over the larger set refine those over the
                # smaller; the component always matches the reference
                continue
            pending.append(
                (A, B, tuple(sorted(sa)), tuple(sorted(sb)), acl(spec, level_w, sa & sb).points)
            )

    # round structure: scan everything against one snapshot of the ambient,
    # then apply all bridge specs in one batch, so the class caches are
    # rebuilt once per round instead of once per bridge
    all_pairs = pending
    clean_at = space.w.n
    while True:
        stuck = []
        for entry in pending:
            A, B, pa, pb, inter = entry
            c = _first_strict(space, pa, pb, inter)
            if c is not None:
                stuck.append((entry, c, _bridge_specs(spec, space, pa, pb, inter, c)))
        if not stuck:
            if pending is all_pairs and clean_at == space.w.n:
                return WeiVerdict(
                    "CONSISTENT", params, None, ambient_points=space.w.n, bridges_added=bridges
                )
            # bridge points introduce new tuples, which can split previously
            # verified pairs; confirm everything against the final window
            pending = all_pairs
            clean_at = space.w.n
            continue
        progressed = False
        for (entry, c, specs) in stuck:
            A, B, pa, pb, inter = entry
            for ta, tb in specs:
                added = _build_bridge(spec, space.w, pa, pb, ta, tb)
                if added:
                    bridges += added
                    progressed = True
                    break
            if bridges > params.max_bridge_points:
                raise BudgetExceededError("wei bridge budget exhausted", bridges)
        if not progressed:
            (entry, c, _specs) = stuck[0]
            A, B, pa, pb, inter = entry
            alt = _component(space, pa, pb, c)
            cr = space.classes(inter)
            ref_id = cr[space.index()[c]]
            ref = {
                t
                for k, t in enumerate(space.tuples)
                if len(t) == len(c) and cr[k] == ref_id
            }
            witness = WeiWitness(A, B, c, alt, ref)
            return WeiVerdict(
                "FAIL", params, witness, ambient_points=space.w.n, bridges_added=bridges
            )
        pending = [entry for (entry, _c, _s) in stuck]


def _component_reps(space: _TupleSpace, pa, pb, inter, c):
    """Map each alternation component of c's reference class to the tuples
    it contains."""
    cr = space.classes(inter)
    roots = _roots(space, pa, pb)
    ref_id = cr[space.index()[c]]
    mask = space.level_mask
    comps: dict = {}
    for i, t in enumerate(space.tuples):
        if mask[i] and len(t) == len(c) and cr[i] == ref_id:
            comps.setdefault(int(roots[i]), []).append(t)
    return comps


def _bridge_specs(spec, space: _TupleSpace, pa, pb, inter, c):
    """Candidate (ta, tb) prescriptions for a bridge joining c's component
    to another component of its reference class."""
    kind = kind_of(spec)
    if not kind.exact_type_keys or spec.kind == "vector_space":
        # the ambient is complete (full linear space) or orbits are exact
        return []
    comps = _component_reps(space, pa, pb, inter, c)
    roots = _roots(space, pa, pb)
    my_root = int(roots[space.index()[c]])
    others = sorted((r for r in comps if r != my_root), key=lambda r: comps[r][0])
    mine = comps[my_root]
    specs = []
    for other_root in others:
        specs.extend(
            itertools.chain(
                itertools.product(mine[:4], comps[other_root][:4]),
                itertools.product(comps[other_root][:4], mine[:4]),
            )
        )
    return specs


def _build_bridge(spec, w: Window, pa, pb, ta, tb):
    """Add fresh points forming a tuple with ta's type over A and tb's type
    over B; returns the number of points added, 0 if inconsistent.

    Relations to points outside the prescription are drawn from a seeded
    generator, which keeps bridge points profile-typical instead of
    piling up rare default profiles.
    """
    kind = kind_of(spec)
    ln = len(ta)
    binding = {}
    for j in range(ln):
        if ta[j] in pa:
            binding[j] = ta[j]
        if tb[j] in pb:
            if j in binding and binding[j] != tb[j]:
                return 0
            binding.setdefault(j, tb[j])
    for i in range(ln):
        for j in range(i + 1, ln):
            if (ta[i] == ta[j]) != (tb[i] == tb[j]):
                return 0
    for i in range(ln):
        for j in range(ln):
            if i != j and ta[i] != ta[j]:
                if kind.pair_code(w, ta[i], ta[j]) != kind.pair_code(w, tb[i], tb[j]):
                    return 0
    rollback = w.n
    placed: dict = {}
    for j in range(ln):
        if j in placed:
            continue
        if j in binding:
            placed[j] = binding[j]
            continue
        dup = next((i for i in range(j) if ta[i] == ta[j]), None)
        if dup is not None:
            placed[j] = placed[dup]
            continue
        codes = {}
        ok = True
        for a in pa:
            codes[a] = kind.pair_code(w, ta[j], a)
        for b in pb:
            cb_ = kind.pair_code(w, tb[j], b)
            if b in codes and codes[b] != cb_:
                ok = False
                break
            codes[b] = cb_
        p = None
        if ok:
            for i in range(j):
                if placed[i] >= rollback and placed[i] not in codes:
                    codes[placed[i]] = kind.pair_code(w, ta[j], ta[i])
            # fill the unprescribed relations by cloning the realizer, so
            # bridge points carry typical profiles instead of fresh rare ones
            merged = {
                x: kind.pair_code(w, ta[j], x)
                for x in range(rollback)
                if x != ta[j]
            }
            merged.update(codes)
            if kind._codes_admissible(w, merged):
                p = kind.extend_point(w, merged)
            if p is None:
                # the clone profile may clash with the prescription (order
                # constraints, class constraints); the bare prescription
                # decides validity
                p = kind.extend_point(w, codes)
        if p is None:
            _truncate(kind, w, rollback)
            return 0
        placed[j] = p
    built = tuple(placed[j] for j in range(ln))
    # a successful construction must actually land in both prescribed
    # classes (a pinned prescription, e.g. a parameter point's own tuple,
    # cannot be cloned and shows up here as a key mismatch)
    if kind.type_key(w, pa + built) != kind.type_key(w, pa + ta) or kind.type_key(
        w, pb + built
    ) != kind.type_key(w, pb + tb):
        _truncate(kind, w, rollback)
        return 0
    return w.n - rollback


def _truncate(kind, w: Window, n: int):
    """Drop points >= n from a working ambient window."""
    if w.n == n:
        return
    if "adj" in w.payload:
        w.payload["adj"] = {
            k: v for k, v in w.payload["adj"].items() if k[0] < n and k[1] < n
        }
    if "order" in w.payload:
        w.payload["order"] = [p for p in w.payload["order"] if p < n]
        w.payload["pos"] = {p: i for i, p in enumerate(w.payload["order"])}
    if "cls" in w.payload:
        w.payload["cls"] = w.payload["cls"][:n]
    for p in range(n, w.n):
        w.labels.pop(p, None)
    w.n = n
    w._structure = None
    w._group = None


def sandwich_scan(Gw, lat, H):
    """Lattice nodes sandwiched by H, with the uniqueness report."""
    from .genstab import sandwich_nodes

    nodes = sandwich_nodes(Gw, lat, H)
    minimal = [
        n
        for n in nodes
        if not any(set(m.points) < set(n.points) for m in nodes)
    ]
    least = minimal[0] if len(minimal) == 1 else None
    return {"nodes": nodes, "minimal": minimal, "unique_least": least}
