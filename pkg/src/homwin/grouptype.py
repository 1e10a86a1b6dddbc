"""Abstract isomorphism types of small finite groups.

Groups are compared through the canonical form of their multiplication
tables, so the test is exact (no invariant-only heuristics).  Intended for
the small quotients and kernels this project produces, not for large
groups.
"""

from __future__ import annotations

import math

from .canon import RelStructure, canonical_form, digest
from .errors import BudgetExceededError
from .perm import PermGroup

_ELEMENT_LIMIT = 400


def _element_list(G: PermGroup):
    if G.order > _ELEMENT_LIMIT:
        raise BudgetExceededError(
            f"group of order {G.order} too large for abstract-type analysis"
        )
    return list(G.elements())


def _element_order(p, limit=10_000):
    q = p
    k = 1
    while not q.is_identity():
        q = q * p
        k += 1
        if k > limit:
            raise AssertionError("element order runaway")
    return k


def cayley_digest(G: PermGroup) -> str:
    """Canonical digest of the multiplication table; equal iff isomorphic."""
    elems = _element_list(G)
    index = {g: i for i, g in enumerate(elems)}
    n = len(elems)
    table = {(i, j, index[elems[i] * elems[j]]) for i in range(n) for j in range(n)}
    s = RelStructure(n=n, unary=[0] * n, ternary={"mul": table})
    return digest(canonical_form(s, budget=400_000).canonical_bytes)


def groups_isomorphic(A: PermGroup, B: PermGroup) -> bool:
    if A.order != B.order:
        return False
    if A.order == 1:
        return True
    return cayley_digest(A) == cayley_digest(B)


def describe_group(G: PermGroup) -> dict:
    """Order, abelian flag, and a human-readable name for small groups."""
    elems = _element_list(G)
    n = len(elems)
    abelian = all(a * b == b * a for a in G.generators for b in G.generators)
    profile = sorted(_element_order(g) for g in elems)
    cyclic = n in profile
    name = None
    if n == 1:
        name = "1"
    elif cyclic:
        name = f"C{n}"
    elif abelian and n == 4:
        name = "C2 x C2"
    else:
        for k in range(3, 8):
            if math.factorial(k) == n and _is_symmetric_profile(profile, k):
                name = f"Sym({k})"
                break
    if name is None:
        name = f"group of order {n}"
    return {
        "order": n,
        "abelian": abelian,
        "cyclic": cyclic,
        "element_orders": profile,
        "name": name,
    }


def _is_symmetric_profile(profile, k):
    from .perm import symmetric_group

    sym = symmetric_group(k)
    ref = sorted(_element_order(g) for g in sym.elements())
    return profile == ref
