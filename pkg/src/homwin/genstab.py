"""Generalized pointwise stabilizers on window groups.

G_(K, L) collects the window-group elements that map the closed set K to
itself with restriction inside a prescribed subgroup L of Aut(K).  The
classification operations realize, on windows, the correspondence between
such subgroups and pairs (closed set, restriction group).
"""

from __future__ import annotations

from dataclasses import dataclass

from .grouptype import cayley_digest, describe_group, groups_isomorphic
from .lattice import ClosureLattice
from .perm import (
    PermGroup,
    Permutation,
    RestrictionQuotient,
    intersect_small,
    is_normal_finite_index,
)
from .structures import ClosedSet


@dataclass
class GenStab:
    K: ClosedSet
    L: PermGroup            # prescribed restriction group on positions of sorted(K)
    group: PermGroup        # realized subgroup of the window group
    realized_restriction: PermGroup  # L ∩ image of the restriction


def gen_stabilizer(Gw: PermGroup, K: ClosedSet, L: PermGroup) -> GenStab:
    """The subgroup {g in Gw : g(K) = K and g|K in L}."""
    pts = tuple(sorted(K.points))
    if L.degree != len(pts):
        raise ValueError("L must act on positions of sorted(K)")
    if not pts:
        return GenStab(K, L, Gw, L)
    rq = RestrictionQuotient(Gw, pts)
    for g in L.generators:
        if rq.preimage(g) is None and g not in rq.image:
            # L is constrained to Aut(K); elements outside the realized
            # image are legal inputs only when they extend in principle
            pass
    T = intersect_small(L, rq.image)
    gens = list(rq.kernel.generators)
    for t in T.generators:
        pre = rq.preimage(t)
        assert pre is not None
        gens.append(pre)
    realized = PermGroup(Gw.degree, gens)
    assert realized.order == rq.kernel.order * T.order
    return GenStab(K, L, realized, T)


def classify_subgroup(Gw: PermGroup, H: PermGroup, lat: ClosureLattice):
    """The least lattice node K with G_(K) <= H <= G_{K}, if the round trip
    H = gen_stabilizer(K, H|K) verifies; None otherwise.

    Nodes are scanned smallest-first, ties broken by sorted point list.
    """
    if not H.is_subgroup_of(Gw):
        raise ValueError("H is not a subgroup of the window group")
    for node in lat.nodes:
        pts = tuple(sorted(node.points))
        pw = Gw.stabilizer_pointwise(pts)
        if not pw.is_subgroup_of(H):
            continue
        if not all(g.act_set(pts) == frozenset(pts) for g in H.generators):
            continue
        # restriction of H to the node
        idx = {p: i for i, p in enumerate(pts)}
        rest = PermGroup(
            len(pts),
            [Permutation(tuple(idx[g.images[p]] for p in pts)) for g in H.generators],
        )
        gs = gen_stabilizer(Gw, node, rest)
        if gs.group.order == H.order and all(g in gs.group for g in H.generators):
            return node, rest
        return None
    return None


def check_normality_forward(
    Gw: PermGroup, K: ClosedSet, L1: PermGroup, L2: PermGroup
) -> tuple[bool, int]:
    """Realize G_(K,L1) <= G_(K,L2) for L1 normal in L2 and report
    (normality of the realized pair, index).  A False flag here signals an
    engine bug, not a mathematical possibility."""
    normal_l, _ = is_normal_finite_index(L1, L2)
    if not normal_l:
        raise ValueError("L1 must be normal in L2")
    H1 = gen_stabilizer(Gw, K, L1)
    H2 = gen_stabilizer(Gw, K, L2)
    normal, index = is_normal_finite_index(H1.group, H2.group)
    return normal, index


def pointwise_among_genstabs(Gw: PermGroup, H: GenStab, lat: ClosureLattice) -> bool:
    """Whether no proper normal finite-index generalized stabilizer with the
    same K sits below H; holds exactly when the restriction is trivial."""
    if H.realized_restriction.order == 1:
        return True
    trivial = PermGroup(len(H.K.points))
    witness = gen_stabilizer(Gw, H.K, trivial)
    normal, index = is_normal_finite_index(witness.group, H.group)
    assert normal and index == H.realized_restriction.order
    return False


def aut_type_of_pointwise(Gw: PermGroup, H: GenStab, lat: ClosureLattice) -> dict:
    """Abstract type of G_{K}/G_(K) for a pointwise stabilizer H = G_(K),
    computed through the restriction image."""
    if H.realized_restriction.order > 1:
        raise ValueError("H is not a pointwise stabilizer")
    pts = tuple(sorted(H.K.points))
    rq = RestrictionQuotient(Gw, pts)
    info = describe_group(rq.image)
    info["cayley_digest"] = cayley_digest(rq.image)
    info["quotient_order"] = rq.setwise.order // rq.kernel.order
    assert info["quotient_order"] == rq.image.order
    return info


def sandwich_nodes(Gw: PermGroup, lat: ClosureLattice, H: PermGroup) -> list[ClosedSet]:
    """All lattice nodes K with G_(K) <= H <= G_{K}."""
    if not H.is_subgroup_of(Gw):
        raise ValueError("H is not a subgroup of the window group")
    out = []
    for node in lat.nodes:
        pts = tuple(sorted(node.points))
        pw = Gw.stabilizer_pointwise(pts)
        if not pw.is_subgroup_of(H):
            continue
        if all(g.act_set(pts) == frozenset(pts) for g in H.generators):
            out.append(node)
    return out
