"""Catalog machinery: window builders and per-kind oracles.

Each catalog kind supplies, for its windows: deterministic construction,
the exact Galois-closure oracle, marked-configuration type keys (which
decide orbit equivalence over parameters), automorphism groups of closed
sets, the window's automorphism group, and the age bookkeeping the outer
and orbital modules need.

Windows of the free relational kinds are built by greedy one-point
realization of missing age types, up to size ``TYPE_HORIZON``: the orbit
machinery reads configurations on at most four points (pairs of atoms
over singleton hulls), so realizing every age type of that size makes the
realized-configuration census independent of the window level from level
2 on, while keeping windows small.
"""

from __future__ import annotations

import hashlib
import itertools
import random
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import BudgetExceededError, SpecError
from .perm import PermGroup, Permutation, symmetric_group
from .specs import FiniteStructure, StructureSpec, _prime_power

TYPE_HORIZON = 4

# extra free points appended per level beyond the horizon, so windows keep
# growing strictly with the level
_SPREAD_PER_LEVEL = 1

_MAX_WINDOW_POINTS = 5000


# ---------------------------------------------------------------------------
# small finite fields


_IRREDUCIBLE = {
    # q: coefficients of x^k = c_0 + c_1 x + ... over GF(p)
    4: (1, 1),
    8: (1, 1, 0),
    9: (2, 0),
    16: (1, 1, 0, 0),
    25: (2, 0),
    27: (2, 1, 0),
}


class GF:
    """GF(q) with elements encoded as ints 0..q-1 (base-p digit vectors)."""

    def __init__(self, q: int):
        pk = _prime_power(q)
        if pk is None:
            raise SpecError(f"{q} is not a prime power")
        self.q = q
        self.p, self.k = pk
        if self.k > 1 and q not in _IRREDUCIBLE:
            raise SpecError(f"unsupported field size {q}")
        self._mul = [[self._mul_slow(a, b) for b in range(q)] for a in range(q)]
        self._add = [[self._add_slow(a, b) for b in range(q)] for a in range(q)]
        self._inv = [0] * q
        for a in range(1, q):
            for b in range(1, q):
                if self._mul[a][b] == 1:
                    self._inv[a] = b
                    break

    def _digits(self, a):
        out = []
        for _ in range(self.k):
            out.append(a % self.p)
            a //= self.p
        return out

    def _undigits(self, ds):
        out = 0
        for d in reversed(ds):
            out = out * self.p + d
        return out

    def _add_slow(self, a, b):
        da, db = self._digits(a), self._digits(b)
        return self._undigits([(x + y) % self.p for x, y in zip(da, db)])

    def _mul_slow(self, a, b):
        if self.k == 1:
            return (a * b) % self.p
        da, db = self._digits(a), self._digits(b)
        prod = [0] * (2 * self.k - 1)
        for i, x in enumerate(da):
            for j, y in enumerate(db):
                prod[i + j] = (prod[i + j] + x * y) % self.p
        red = _IRREDUCIBLE[self.q]
        for deg in range(2 * self.k - 2, self.k - 1, -1):
            c = prod[deg]
            if c:
                prod[deg] = 0
                for i, r in enumerate(red):
                    prod[deg - self.k + i] = (prod[deg - self.k + i] + c * r) % self.p
        return self._undigits(prod[: self.k])

    def add(self, a, b):
        return self._add[a][b]

    def sub(self, a, b):
        return self._add[a][self.neg(b)]

    def neg(self, a):
        for b in range(self.q):
            if self._add[a][b] == 0:
                return b
        raise AssertionError

    def mul(self, a, b):
        return self._mul[a][b]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError
        return self._inv[a]

    def units(self):
        return range(1, self.q)

    def primitive(self):
        for a in range(2, self.q):
            x, n = a, 1
            while x != 1:
                x = self._mul[x][a]
                n += 1
            if n == self.q - 1:
                return a
        return 1

    def frobenius_maps(self):
        """All field automorphisms as element maps."""
        maps = []
        for i in range(self.k):
            e = self.p ** i
            maps.append(tuple(self._pow(a, e) for a in range(self.q)))
        return maps

    def _pow(self, a, e):
        out = 1
        for _ in range(e):
            out = self._mul[out][a]
        return out


def vec_add(f: GF, u, v):
    return tuple(f.add(a, b) for a, b in zip(u, v))


def vec_scale(f: GF, c, u):
    return tuple(f.mul(c, a) for a in u)


def solve_over(f: GF, basis, v):
    """Coefficients expressing v over basis (list of vectors), or None."""
    if not basis:
        return None if any(v) else ()
    dim = len(v)
    rows = [list(b) + [0] * len(basis) for b in basis]
    for i in range(len(basis)):
        rows[i][dim + i] = 1
    aug = [list(v), rows]
    # gaussian elimination on basis rows, tracking combinations
    mat = [row[:] for row in rows]
    pivots = []
    col = 0
    r = 0
    while r < len(mat) and col < dim:
        sel = None
        for rr in range(r, len(mat)):
            if mat[rr][col] != 0:
                sel = rr
                break
        if sel is None:
            col += 1
            continue
        mat[r], mat[sel] = mat[sel], mat[r]
        inv = f.inv(mat[r][col])
        mat[r] = [f.mul(inv, x) for x in mat[r]]
        for rr in range(len(mat)):
            if rr != r and mat[rr][col] != 0:
                c = mat[rr][col]
                mat[rr] = [f.sub(x, f.mul(c, y)) for x, y in zip(mat[rr], mat[r])]
        pivots.append(col)
        r += 1
        col += 1
    # reduce v
    vv = list(v)
    coeffs = [0] * len(basis)
    for i, col in enumerate(pivots):
        if vv[col] != 0:
            c = vv[col]
            for j in range(dim):
                vv[j] = f.sub(vv[j], f.mul(c, mat[i][j]))
            for j in range(len(basis)):
                coeffs[j] = f.add(coeffs[j], f.mul(c, mat[i][dim + j]))
    if any(vv):
        return None
    return tuple(coeffs)


def span_vectors(f: GF, gens):
    """All vectors in the span of gens (includes the zero vector)."""
    if not gens:
        return []
    dim = len(gens[0])
    basis = []
    for v in gens:
        if solve_over(f, basis, v) is None:
            basis.append(v)
    out = []
    for coeffs in itertools.product(range(f.q), repeat=len(basis)):
        v = tuple(0 for _ in range(dim))
        for c, b in zip(coeffs, basis):
            v = vec_add(f, v, vec_scale(f, c, b))
        out.append(v)
    return sorted(set(out))


# ---------------------------------------------------------------------------
# windows


@dataclass
class Window:
    """A finite deterministic approximation of a catalog structure."""

    spec: StructureSpec
    level: int
    n: int
    labels: dict
    payload: dict
    kind: "Kind" = field(repr=False, default=None)
    _structure: FiniteStructure | None = field(default=None, repr=False)
    _group: PermGroup | None = field(default=None, repr=False)

    @property
    def points(self):
        return range(self.n)

    @property
    def structure(self) -> FiniteStructure:
        if self._structure is None:
            self._structure = self.kind.relational_view(self)
        return self._structure

    def group(self) -> PermGroup:
        if self._group is None:
            self._group = self.kind.window_group(self)
        return self._group

    def clone(self) -> "Window":
        import copy

        return Window(
            spec=self.spec,
            level=self.level,
            n=self.n,
            labels=dict(self.labels),
            payload=copy.deepcopy(self.payload),
            kind=self.kind,
        )


def _stable_seed(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


# ---------------------------------------------------------------------------
# kind base class


class Kind:
    name: str
    has_algebraicity = False
    exact_type_keys = True

    # binary kinds define: codes(), pair_code(w, a, b), default_code,
    # symmetric (bool), valid_matrix(m, codefn)

    def build(self, spec: StructureSpec, level: int) -> Window:
        raise NotImplementedError

    def relational_view(self, w: Window) -> FiniteStructure:
        raise NotImplementedError

    def acl(self, w: Window, pts) -> tuple:
        raise NotImplementedError

    def dcl0(self, w: Window) -> tuple:
        return ()

    def type_key(self, w: Window, pts: tuple):
        raise NotImplementedError

    def hull_map(self, w: Window, q: dict):
        raise NotImplementedError

    def aut_closed_group(self, w: Window, pts: tuple) -> PermGroup:
        raise NotImplementedError

    def window_group(self, w: Window) -> PermGroup:
        raise NotImplementedError

    def code_equivalences(self, spec) -> list:
        """Self-equivalences of the age as code maps (identity omitted)."""
        return []

    def extend_point(self, w: Window, codes: dict):
        """Append a point with prescribed codes to some existing points and
        default relations elsewhere; returns the new point or None if the
        prescription is inconsistent with the age."""
        raise NotImplementedError

    def random_extension(self, w: Window, rng) -> dict | None:
        """Age-admissible codes for a generic fresh point."""
        return None


# ---------------------------------------------------------------------------
# binary-coded kinds (everything except vector_space / finite)


class BinaryKind(Kind):
    """Kinds whose structure is a total code on unordered or ordered pairs."""

    symmetric = True

    def _codes_admissible(self, w, codes):
        return True

    def random_extension(self, w, rng):
        avail = self.codes(w.spec)
        for _ in range(500):
            codes = {q: rng.choice(avail) for q in range(w.n)}
            if self._codes_admissible(w, codes):
                return codes
        return {q: avail[0] for q in range(w.n)}

    def twin_code(self, w, z):
        """Code between a point and its full twin."""
        return self.default_code(w.spec) if hasattr(self, "default_code") else self.codes(w.spec)[0]

    def codes(self, spec) -> tuple:
        raise NotImplementedError

    def pair_code(self, w: Window, a: int, b: int) -> int:
        raise NotImplementedError

    def valid_matrix(self, spec, m: int, code) -> bool:
        """Whether the full code matrix on m points lies in the age."""
        return True

    # -- identity closure ---------------------------------------------------

    def acl(self, w, pts):
        out = sorted(set(pts))
        for p in out:
            if not (0 <= p < w.n):
                raise ValueError(f"point {p} outside window")
        return tuple(out)

    def type_key(self, w, pts):
        seen = {}
        pat = []
        support = []
        for p in pts:
            if not (0 <= p < w.n):
                raise ValueError(f"point {p} outside window")
            if p not in seen:
                seen[p] = len(support)
                support.append(p)
            pat.append(seen[p])
        rel = tuple(
            self.pair_code(w, support[i], support[j])
            for i in range(len(support))
            for j in range(len(support))
            if i != j
        )
        return (tuple(pat), rel)

    def hull_map(self, w, q):
        dom = tuple(sorted(q))
        cod = tuple(q[p] for p in dom)
        if len(set(cod)) != len(cod):
            return None
        if self.type_key(w, dom) != self.type_key(w, cod):
            return None
        return dict(q)

    def aut_closed_group(self, w, pts):
        pts = tuple(sorted(pts))
        perms = _code_automorphisms(self, w, pts)
        idx = {p: i for i, p in enumerate(pts)}
        gens = [Permutation(tuple(idx[img[p]] for p in pts)) for img in perms]
        return PermGroup(len(pts), gens)

    def window_group(self, w):
        perms = _code_automorphisms(self, w, tuple(w.points))
        gens = [Permutation(tuple(img[p] for p in w.points)) for img in perms]
        return PermGroup(w.n, gens)


def _code_automorphisms(kind: BinaryKind, w: Window, pts: tuple, budget: int = 400_000):
    """All code-preserving bijections of pts, as dicts."""
    m = len(pts)
    # crude color refinement to cut the search
    colors = {}
    for p in pts:
        profile = sorted(kind.pair_code(w, p, q) for q in pts if q != p)
        colors[p] = tuple(profile)
    out = []
    counter = [0]

    def rec(i, assigned, used):
        counter[0] += 1
        if counter[0] > budget:
            raise BudgetExceededError("automorphism search budget exhausted", counter[0])
        if i == m:
            out.append(dict(assigned))
            return
        p = pts[i]
        for cand in pts:
            if cand in used or colors[cand] != colors[p]:
                continue
            ok = True
            for pp, img in assigned.items():
                if (
                    kind.pair_code(w, p, pp) != kind.pair_code(w, cand, img)
                    or kind.pair_code(w, pp, p) != kind.pair_code(w, img, cand)
                ):
                    ok = False
                    break
            if ok:
                assigned[p] = cand
                used.add(cand)
                rec(i + 1, assigned, used)
                del assigned[p]
                used.discard(cand)

    rec(0, {}, set())
    return out


# -- age-type enumeration for binary kinds ---------------------------------


def _canon_matrix(m: int, code, perms=None):
    """Least encoding of a full code matrix over point relabelings.

    Returns (key, perm) with perm the relabeling achieving the minimum
    (perm[i] = original point placed at position i).
    """
    best = None
    best_perm = None
    for perm in perms if perms is not None else itertools.permutations(range(m)):
        enc = tuple(
            code(perm[i], perm[j]) for i in range(m) for j in range(m) if i != j
        )
        if best is None or enc < best:
            best = enc
            best_perm = perm
    return best, best_perm


@lru_cache(maxsize=None)
def _perms_of(m: int):
    return tuple(itertools.permutations(range(m)))


@lru_cache(maxsize=None)
def _canon_tables(m: int):
    """Per permutation, the flat (m*m layout) source indices of its encoding."""
    tables = []
    for perm in itertools.permutations(range(m)):
        tables.append(
            (
                perm,
                tuple(
                    perm[i] * m + perm[j]
                    for i in range(m)
                    for j in range(m)
                    if i != j
                ),
            )
        )
    return tuple(tables)


def _canon_flat(m: int, flat):
    """Least encoding of a flat m*m code matrix; returns (key, perm)."""
    best = None
    best_perm = None
    for perm, table in _canon_tables(m):
        enc = tuple(flat[t] for t in table)
        if best is None or enc < best:
            best = enc
            best_perm = perm
    return best, best_perm


def age_types_binary(kind: BinaryKind, spec, m: int):
    """Canonical code matrices of all age members of size m."""
    if m == 1:
        return [{}]
    smaller = age_types_binary(kind, spec, m - 1)
    codes = kind.codes(spec)
    seen = {}
    for base in smaller:
        for pattern in itertools.product(codes, repeat=m - 1):
            mat = dict(base)
            ok = True
            for i, c in enumerate(pattern):
                if kind.symmetric:
                    mat[(i, m - 1)] = c
                else:
                    # directed kinds fix the reverse code by the pairing
                    mat[(i, m - 1)] = c
            def codefn(a, b, mat=mat):
                if a == b:
                    raise AssertionError
                if kind.symmetric:
                    return mat[(min(a, b), max(a, b))]
                c = mat[(min(a, b), max(a, b))]
                if a < b:
                    return c
                return kind.transpose_code(c)
            if not kind.valid_matrix(spec, m, codefn):
                continue
            key, perm = _canon_matrix(m, codefn, _perms_of(m))
            if key not in seen:
                canon = {}
                for i in range(m):
                    for j in range(i + 1, m):
                        canon[(i, j)] = codefn(perm[i], perm[j])
                seen[key] = canon
    return [seen[k] for k in sorted(seen)]


# ---------------------------------------------------------------------------
# concrete binary kinds


class PureSetKind(BinaryKind):
    name = "pure_set"

    def codes(self, spec):
        return (0,)

    def transpose_code(self, c):
        return c

    def pair_code(self, w, a, b):
        return 0

    def build(self, spec, level):
        n = level + 2
        return Window(spec, level, n, {i: f"p{i}" for i in range(n)}, {}, kind=self)

    def relational_view(self, w):
        return FiniteStructure(w.n, (), {})

    def window_group(self, w):
        return symmetric_group(w.n)

    def aut_closed_group(self, w, pts):
        return symmetric_group(len(pts))

    def extend_point(self, w, codes):
        p = w.n
        w.n += 1
        w.labels[p] = f"p{p}"
        w._structure = None
        w._group = None
        return p


class DloKind(BinaryKind):
    name = "dlo"
    symmetric = False

    def codes(self, spec):
        return (1, 2)  # 1: first argument earlier, 2: later

    def transpose_code(self, c):
        return 3 - c

    def pair_code(self, w, a, b):
        pos = w.payload["pos"]
        return 1 if pos[a] < pos[b] else 2

    def valid_matrix(self, spec, m, code):
        # the directed codes must define a transitive tournament
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    if a != b != c != a:
                        if code(a, b) == 1 and code(b, c) == 1 and code(a, c) != 1:
                            return False
        return True

    def build(self, spec, level):
        n = level + 2
        order = list(range(n))
        payload = {"order": order, "pos": {p: i for i, p in enumerate(order)}}
        labels = {p: f"q{i}" for i, p in enumerate(order)}
        return Window(spec, level, n, labels, payload, kind=self)

    def relational_view(self, w):
        pos = w.payload["pos"]
        lt = frozenset(
            (a, b) for a in w.points for b in w.points if a != b and pos[a] < pos[b]
        )
        return FiniteStructure(w.n, (("lt", 2),), {"lt": lt})

    def window_group(self, w):
        return PermGroup(w.n)

    def aut_closed_group(self, w, pts):
        return PermGroup(len(pts))

    def extend_point(self, w, codes):
        # codes: existing point -> 1 (new point earlier) or 2 (later)
        pos = w.payload["pos"]
        order = w.payload["order"]
        lower = [pos[p] for p, c in codes.items() if c == 2]
        upper = [pos[p] for p, c in codes.items() if c == 1]
        lo = max(lower, default=-1)
        hi = min(upper, default=len(order))
        if lo >= hi:
            return None
        p = w.n
        w.n += 1
        order.insert(lo + 1, p)
        w.payload["pos"] = {pt: i for i, pt in enumerate(order)}
        w.labels[p] = f"q{p}"
        w._structure = None
        w._group = None
        return p

    def code_equivalences(self, spec):
        return [{1: 2, 2: 1}]

    def random_extension(self, w, rng):
        order = w.payload["order"]
        pos = rng.randrange(len(order) + 1)
        return {p: (2 if i < pos else 1) for i, p in enumerate(order)}

    def twin_code(self, w, z):
        return 2  # the twin sits immediately after its original


class EquivalenceKind(BinaryKind):
    name = "equivalence"

    def codes(self, spec):
        return (0, 1)  # 1: same class

    def transpose_code(self, c):
        return c

    def pair_code(self, w, a, b):
        cls = w.payload["cls"]
        return 1 if cls[a] == cls[b] else 0

    def valid_matrix(self, spec, m, code):
        c = spec.classes
        # same-class must be transitive with at most c classes
        parent = list(range(m))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a in range(m):
            for b in range(m):
                if a != b and code(a, b) == 1:
                    parent[find(a)] = find(b)
        for a in range(m):
            for b in range(m):
                if a != b and code(a, b) != (1 if find(a) == find(b) else 0):
                    return False
        return len({find(x) for x in range(m)}) <= c

    def build(self, spec, level):
        c = spec.classes
        cls = []
        for p in range(c * (level + 2)):
            cls.append(p // 2 if p < 2 * c else (p - 2 * c) % c)
        n = len(cls)
        labels = {p: f"c{cls[p]}_{p}" for p in range(n)}
        return Window(spec, level, n, labels, {"cls": cls}, kind=self)

    def relational_view(self, w):
        cls = w.payload["cls"]
        same = frozenset(
            (a, b) for a in w.points for b in w.points if a != b and cls[a] == cls[b]
        )
        return FiniteStructure(w.n, (("same", 2),), {"same": same})

    def window_group(self, w):
        cls = w.payload["cls"]
        c = w.spec.classes
        members = [sorted(p for p in w.points if cls[p] == i) for i in range(c)]
        gens = []
        first = members[0]
        if len(first) >= 2:
            images = list(range(w.n))
            images[first[0]], images[first[1]] = first[1], first[0]
            gens.append(Permutation(images))
            images = list(range(w.n))
            for a, b in zip(first, first[1:] + first[:1]):
                images[a] = b
            gens.append(Permutation(images))
        # rotate the classes (all classes have equal size)
        images = list(range(w.n))
        for i in range(c):
            for a, b in zip(members[i], members[(i + 1) % c]):
                images[a] = b
        gens.append(Permutation(images))
        G = PermGroup(w.n, gens)
        size = len(first)
        expected = (_factorial(size) ** c) * _factorial(c)
        assert G.order == expected, "equivalence window group construction broken"
        return G

    def random_extension(self, w, rng):
        cls = w.payload["cls"]
        target = rng.randrange(w.spec.classes)
        return {p: (1 if cls[p] == target else 0) for p in range(w.n)}

    def twin_code(self, w, z):
        return 1  # the twin joins its original's class

    def extend_point(self, w, codes):
        cls = w.payload["cls"]
        c = w.spec.classes
        target = None
        for p, code in codes.items():
            if code == 1:
                if target is not None and target != cls[p]:
                    return None
                target = cls[p]
        for p, code in codes.items():
            if code == 0 and cls[p] == target and target is not None:
                return None
        if target is None:
            taken = {cls[p] for p, code in codes.items() if code == 0}
            free = [i for i in range(c) if i not in taken]
            if not free:
                return None
            target = free[0]
        p = w.n
        w.n += 1
        cls.append(target)
        w.labels[p] = f"c{target}_{p}"
        w._structure = None
        w._group = None
        return p


def _factorial(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


class GraphLikeKind(BinaryKind):
    """Free relational kinds built by greedy age-type realization."""

    def default_code(self, spec):
        raise NotImplementedError

    def pair_code(self, w, a, b):
        if a == b:
            raise AssertionError("pair code of equal points")
        return w.payload["adj"].get((min(a, b), max(a, b)), self.default_code(w.spec))

    def transpose_code(self, c):
        return c

    def build(self, spec, level):
        if level > 0:
            w = build_window_cached(spec, level - 1).clone()
            w.level = level
        else:
            w = Window(spec, 0, 0, {}, {"adj": {}, "realized": {}}, kind=self)
        if level == TYPE_HORIZON - 2 and len(age_types_binary(self, spec, TYPE_HORIZON)) > 20:
            # type-rich ages (many-colored graphs): greedy one-type-per-point
            # realization packs poorly, so seed a pseudorandom batch first
            # and let completion fill the few remaining gaps
            self._batch(w, max(0, 15 - w.n))
        self._complete(w, min(level + 2, TYPE_HORIZON))
        if level > 2:
            self._spread(w, level)
        if w.n > _MAX_WINDOW_POINTS:
            raise BudgetExceededError(f"window of {w.n} points exceeds the cap")
        return w

    def _batch(self, w, count):
        rng = random.Random(_stable_seed(self.name, w.spec.canonical_json(), "batch"))
        codes_avail = self.codes(w.spec)
        for _ in range(count):
            for _try in range(500):
                codes = {q: rng.choice(codes_avail) for q in range(w.n)}
                if self._codes_admissible(w, codes):
                    break
            else:
                codes = {q: self.default_code(w.spec) for q in range(w.n)}
            self._add_point(w, codes)

    def _code_matrix(self, w):
        default = self.default_code(w.spec)
        n = w.n
        mat = [[default] * n for _ in range(n)]
        for (a, b), c in w.payload["adj"].items():
            mat[a][b] = c
            mat[b][a] = c
        return mat

    def _register_subsets(self, w, p):
        """Record canonically-aligned witnesses of all small subsets through p."""
        realized = w.payload["realized"]
        mat = self._code_matrix(w)
        if () not in realized:
            realized[()] = (p,)
        for size in range(2, TYPE_HORIZON + 1):
            rng = range(size)
            for combo in itertools.combinations(range(p), size - 1):
                pts = combo + (p,)
                flat = tuple(
                    mat[pts[i]][pts[j]] if i != j else 0
                    for i in rng
                    for j in rng
                )
                key, perm = _canon_flat(size, flat)
                if key not in realized:
                    realized[key] = tuple(pts[i] for i in perm)

    def _add_point(self, w, codes: dict):
        p = w.n
        w.n += 1
        adj = w.payload["adj"]
        for q, c in codes.items():
            if c != self.default_code(w.spec):
                adj[(min(p, q), max(p, q))] = c
        w.labels[p] = f"p{p}"
        w._structure = None
        w._group = None
        self._register_subsets(w, p)
        return p

    def _complete(self, w, horizon):
        realized = w.payload["realized"]
        for m in range(1, horizon + 1):
            for mat in age_types_binary(self, w.spec, m):
                def codefn(a, b, mat=mat):
                    return mat[(min(a, b), max(a, b))] if a != b else None
                key, _ = _canon_matrix(m, codefn, _perms_of(m)) if m > 1 else ((), (0,))
                if m == 1:
                    if w.n == 0:
                        self._add_point(w, {})
                    continue
                if key in realized:
                    continue
                subkey, subperm = _canon_matrix(
                    m - 1, codefn, _perms_of(m - 1)
                ) if m > 2 else ((), (0,))
                witness = realized[subkey]
                # witness[i] realizes position i of the canonical sub-matrix;
                # the new point's pattern follows the sub-alignment
                codes = {}
                for i in range(m - 1):
                    codes[witness[i]] = codefn(subperm[i], m - 1)
                self._add_point(w, codes)
                assert key in realized, "type realization failed"

    def _spread(self, w, lv):
        rng = random.Random(_stable_seed(self.name, w.spec.canonical_json(), lv))
        codes_avail = self.codes(w.spec)
        for _ in range(_SPREAD_PER_LEVEL):
            for _try in range(500):
                codes = {q: rng.choice(codes_avail) for q in range(w.n)}
                if self._codes_admissible(w, codes):
                    break
            else:
                codes = {q: self.default_code(w.spec) for q in range(w.n)}
            self._add_point(w, codes)

    def _codes_admissible(self, w, codes):
        return True

    def relational_view(self, w):
        raise NotImplementedError

    def extend_point(self, w, codes):
        if not self._codes_admissible(w, codes):
            return None
        p = w.n
        w.n += 1
        adj = w.payload["adj"]
        for q, c in codes.items():
            if c != self.default_code(w.spec):
                adj[(min(p, q), max(p, q))] = c
        w.labels[p] = f"p{p}"
        w._structure = None
        w._group = None
        return p


class RandomGraphKind(GraphLikeKind):
    name = "random_graph"

    def codes(self, spec):
        return (0, 1)

    def default_code(self, spec):
        return 0

    def relational_view(self, w):
        edges = set()
        for (a, b), c in w.payload["adj"].items():
            if c == 1:
                edges.add((a, b))
                edges.add((b, a))
        return FiniteStructure(w.n, (("edge", 2),), {"edge": frozenset(edges)})

    def code_equivalences(self, spec):
        return [{0: 1, 1: 0}]


class HensonKind(GraphLikeKind):
    name = "henson"

    def codes(self, spec):
        return (0, 1)

    def default_code(self, spec):
        return 0

    def valid_matrix(self, spec, m, code):
        if m < spec.m:
            return True
        for clique in itertools.combinations(range(m), spec.m):
            if all(code(a, b) == 1 for a, b in itertools.combinations(clique, 2)):
                return False
        return True

    def _codes_admissible(self, w, codes):
        # a new point must not complete a forbidden clique
        neighbors = [q for q, c in codes.items() if c == 1]
        need = w.spec.m - 1
        if len(neighbors) < need:
            return True
        for clique in itertools.combinations(neighbors, need):
            if all(
                self.pair_code(w, a, b) == 1 for a, b in itertools.combinations(clique, 2)
            ):
                return False
        return True

    def random_extension(self, w, rng):
        # grow the neighborhood greedily; uniform code sampling is almost
        # never admissible once the window has a few dozen points
        pts = list(range(w.n))
        rng.shuffle(pts)
        codes = {q: 0 for q in range(w.n)}
        neighbors: list[int] = []
        for q in pts:
            if rng.random() >= 0.4:
                continue
            test = neighbors + [q]
            if len(test) >= w.spec.m - 1 and any(
                all(self.pair_code(w, a, b) == 1 for a, b in itertools.combinations(cl, 2))
                for cl in itertools.combinations(test, w.spec.m - 1)
                if q in cl
            ):
                continue
            neighbors.append(q)
            codes[q] = 1
        return codes

    def relational_view(self, w):
        return RandomGraphKind.relational_view(self, w)


class ColoredGraphKind(GraphLikeKind):
    name = "colored_graph"

    def codes(self, spec):
        return tuple(range(1, spec.colors + 1))

    def default_code(self, spec):
        return 1

    def relational_view(self, w):
        rels = {f"color{c}": set() for c in self.codes(w.spec)}
        for a in w.points:
            for b in w.points:
                if a != b:
                    rels[f"color{self.pair_code(w, a, b)}"].add((a, b))
        return FiniteStructure(
            w.n,
            tuple((f"color{c}", 2) for c in self.codes(w.spec)),
            {name: frozenset(rel) for name, rel in rels.items()},
        )

    def code_equivalences(self, spec):
        out = []
        colors = self.codes(spec)
        for perm in itertools.permutations(colors):
            mapping = dict(zip(colors, perm))
            if any(mapping[c] != c for c in colors):
                out.append(mapping)
        return out


# ---------------------------------------------------------------------------
# vector spaces


class VectorSpaceKind(Kind):
    name = "vector_space"
    has_algebraicity = True

    def field(self, spec) -> GF:
        return _field_cache(spec.q)

    def dim(self, w: Window) -> int:
        return w.payload["dim"]

    def build(self, spec, level):
        # dimension level+2: the orbit census reads four-point
        # configurations, whose linear-dependency patterns need dim >= 4
        # to stabilize across consecutive levels
        f = self.field(spec)
        dim = level + 2
        n = f.q ** dim
        if n > _MAX_WINDOW_POINTS:
            raise BudgetExceededError(f"window of {n} points exceeds the cap")
        return self.build_dim(spec, dim, level)

    def build_dim(self, spec, dim, level=None):
        f = self.field(spec)
        n = f.q ** dim
        vectors = [self._vector_of(f, i, dim) for i in range(n)]
        labels = {i: "(" + ",".join(map(str, v)) + ")" for i, v in enumerate(vectors)}
        payload = {"dim": dim, "vectors": vectors}
        return Window(spec, level if level is not None else dim - 2, n, labels, payload, kind=self)

    @staticmethod
    def _vector_of(f, index, dim):
        out = []
        for _ in range(dim):
            out.append(index % f.q)
            index //= f.q
        return tuple(out)

    @staticmethod
    def point_of(f, v):
        out = 0
        for c in reversed(v):
            out = out * f.q + c
        return out

    def relational_view(self, w):
        f = self.field(w.spec)
        vectors = w.payload["vectors"]
        add = set()
        for a in w.points:
            for b in w.points:
                s = vec_add(f, vectors[a], vectors[b])
                add.add((a, b, self.point_of(f, s)))
        rels = {"add": frozenset(add)}
        sig = [("add", 3)]
        for c in range(2, f.q):
            pairs = frozenset(
                (a, self.point_of(f, vec_scale(f, c, vectors[a]))) for a in w.points
            )
            rels[f"scale{c}"] = pairs
            sig.append((f"scale{c}", 2))
        return FiniteStructure(w.n, tuple(sig), rels)

    def acl(self, w, pts):
        f = self.field(w.spec)
        vectors = w.payload["vectors"]
        for p in pts:
            if not (0 <= p < w.n):
                raise ValueError(f"point {p} outside window")
        gens = [vectors[p] for p in sorted(set(pts))]
        if not gens:
            return (0,)
        return tuple(sorted(self.point_of(f, v) for v in span_vectors(f, gens)))

    def dcl0(self, w):
        return (0,)

    def type_key(self, w, pts):
        f = self.field(w.spec)
        vectors = w.payload["vectors"]
        seen = {}
        pat = []
        indep: list = []
        key = []
        for p in pts:
            if not (0 <= p < w.n):
                raise ValueError(f"point {p} outside window")
            if p in seen:
                pat.append(seen[p])
                continue
            seen[p] = len(seen)
            pat.append(seen[p])
            v = vectors[p]
            coeffs = solve_over(f, indep, v) if indep else (None if any(v) else ())
            if coeffs is None:
                indep.append(v)
                key.append(("n",))
            else:
                key.append(("d", coeffs))
        return (tuple(pat), tuple(key))

    def hull_map(self, w, q):
        f = self.field(w.spec)
        vectors = w.payload["vectors"]
        dom = tuple(sorted(q))
        cod = tuple(q[p] for p in dom)
        if len(set(cod)) != len(cod):
            return None
        if self.type_key(w, dom) != self.type_key(w, cod):
            return None
        # extend linearly on the span
        basis, images = [], []
        for p in dom:
            if solve_over(f, basis, vectors[p]) is None:
                basis.append(vectors[p])
                images.append(vectors[q[p]])
        out = {}
        for coeffs in itertools.product(range(f.q), repeat=len(basis)):
            src = tuple(0 for _ in range(len(vectors[0])))
            dst = src
            for c, b, im in zip(coeffs, basis, images):
                src = vec_add(f, src, vec_scale(f, c, b))
                dst = vec_add(f, dst, vec_scale(f, c, im))
            out[self.point_of(f, src)] = self.point_of(f, dst)
        if not basis:
            out[0] = 0
        return out

    def aut_closed_group(self, w, pts):
        f = self.field(w.spec)
        vectors = w.payload["vectors"]
        pts = tuple(sorted(pts))
        span = set(pts)
        basis = []
        for p in pts:
            if solve_over(f, basis, vectors[p]) is None:
                basis.append(vectors[p])
        if {self.point_of(f, v) for v in span_vectors(f, basis)} | {0} != set(pts) | {0}:
            raise ValueError("point set is not a subspace")
        idx = {p: i for i, p in enumerate(pts)}
        r = len(basis)
        gens = []
        if r:
            candidates = [vectors[p] for p in pts if p != 0]
            for images in itertools.permutations(candidates, r):
                ok = True
                b2 = []
                for v in images:
                    if solve_over(f, b2, v) is None:
                        b2.append(v)
                    else:
                        ok = False
                        break
                if not ok:
                    continue
                mapping = {}
                for coeffs in itertools.product(range(f.q), repeat=r):
                    src = tuple(0 for _ in vectors[0])
                    dst = src
                    for c, b, im in zip(coeffs, basis, images):
                        src = vec_add(f, src, vec_scale(f, c, b))
                        dst = vec_add(f, dst, vec_scale(f, c, im))
                    mapping[self.point_of(f, src)] = self.point_of(f, dst)
                gens.append(Permutation(tuple(idx[mapping[p]] for p in pts)))
        return PermGroup(len(pts), gens)

    def window_group(self, w):
        f = self.field(w.spec)
        dim = self.dim(w)
        vectors = w.payload["vectors"]
        if dim == 0:
            return PermGroup(1)
        mats = []
        for i in range(dim):
            for j in range(dim):
                if i != j:
                    mats.append(("transvection", i, j))
        mats.append(("scale", 0, f.primitive()))
        gens = []
        for kind_, a, b in mats:
            def apply(v, kind_=kind_, a=a, b=b):
                if kind_ == "transvection":
                    out = list(v)
                    out[a] = f.add(out[a], v[b])
                    return tuple(out)
                out = list(v)
                out[a] = f.mul(b, out[a])
                return tuple(out)
            gens.append(
                Permutation(tuple(self.point_of(f, apply(vectors[p])) for p in w.points))
            )
        G = PermGroup(w.n, gens)
        expected = 1
        for i in range(dim):
            expected *= f.q ** dim - f.q ** i
        assert G.order == expected, "GL window group construction broken"
        return G


# ---------------------------------------------------------------------------
# explicit finite structures

# In a finite structure every orbit is finite, so the Galois closure of any
# set is the whole domain; orbit questions are answered by the actual
# automorphism group rather than by type keys.


class FiniteKind(Kind):
    name = "finite"
    has_algebraicity = True
    exact_type_keys = False

    def build(self, spec, level):
        n = spec.domain
        rels = {name: frozenset(tuples) for name, arity, tuples in spec.relations}
        sig = tuple((name, arity) for name, arity, _ in spec.relations)
        structure = FiniteStructure(n, sig, rels)
        w = Window(spec, level, n, {i: f"p{i}" for i in range(n)}, {}, kind=self)
        w._structure = structure
        return w

    def relational_view(self, w):
        return w._structure

    def acl(self, w, pts):
        for p in pts:
            if not (0 <= p < w.n):
                raise ValueError(f"point {p} outside window")
        return tuple(range(w.n))

    def dcl0(self, w):
        G = w.group()
        return tuple(p for p in w.points if all(g.images[p] == p for g in G.generators))

    def type_key(self, w, pts):
        raise NotImplementedError("finite structures answer orbit queries by group search")

    def hull_map(self, w, q):
        dom = tuple(sorted(q))
        cod = tuple(q[p] for p in dom)
        if len(set(cod)) != len(cod):
            return None
        g = w.group().transporter(dom, cod)
        if g is None:
            return None
        return {p: g.images[p] for p in w.points}

    def aut_closed_group(self, w, pts):
        pts = tuple(sorted(pts))
        struct = w.structure.induced(pts)
        perms = _structure_automorphisms(struct)
        return PermGroup(len(pts), perms)

    def window_group(self, w):
        return PermGroup(w.n, _structure_automorphisms(w.structure))


def _structure_automorphisms(struct: FiniteStructure, budget: int = 300_000):
    """All automorphisms of a small relational structure."""
    n = struct.domain_size
    profiles = []
    for x in range(n):
        prof = []
        for name, arity in struct.signature:
            cnt = [0] * arity
            for t in struct.relations[name]:
                for pos, val in enumerate(t):
                    if val == x:
                        cnt[pos] += 1
            prof.append(tuple(cnt))
        profiles.append(tuple(prof))
    rel_items = [(name, struct.relations[name]) for name, _ in struct.signature]
    out = []
    counter = [0]

    def consistent(assigned):
        pts = set(assigned)
        for name, rel in rel_items:
            for t in rel:
                if all(x in pts for x in t):
                    if tuple(assigned[x] for x in t) not in rel:
                        return False
        return True

    def rec(i, assigned, used):
        counter[0] += 1
        if counter[0] > budget:
            raise BudgetExceededError("automorphism search budget exhausted", counter[0])
        if i == n:
            out.append(Permutation(tuple(assigned[x] for x in range(n))))
            return
        for cand in range(n):
            if cand in used or profiles[cand] != profiles[i]:
                continue
            assigned[i] = cand
            used.add(cand)
            if consistent(assigned):
                rec(i + 1, assigned, used)
            del assigned[i]
            used.discard(cand)

    rec(0, {}, set())
    return out


# ---------------------------------------------------------------------------
# registry


from functools import lru_cache as _lru_cache


@_lru_cache(maxsize=None)
def _field_cache(q: int) -> GF:
    return GF(q)


_KINDS = {
    "pure_set": PureSetKind(),
    "dlo": DloKind(),
    "random_graph": RandomGraphKind(),
    "henson": HensonKind(),
    "colored_graph": ColoredGraphKind(),
    "equivalence": EquivalenceKind(),
    "vector_space": VectorSpaceKind(),
    "finite": FiniteKind(),
}


def kind_of(spec: StructureSpec) -> Kind:
    return _KINDS[spec.kind]


@_lru_cache(maxsize=None)
def build_window_cached(spec: StructureSpec, level: int) -> Window:
    """Deterministic window, shared across callers; treat as read-only."""
    if level < 0:
        raise ValueError("level must be >= 0")
    return kind_of(spec).build(spec, level)
