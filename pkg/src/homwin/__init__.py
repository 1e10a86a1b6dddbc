"""Window-scale invariants of automorphism groups of homogeneous structures.

The library builds finite, deterministic windows of the classical countable
homogeneous structures (pure sets, dense linear orders, random and Henson
graphs, colored graphs, equivalence structures, vector spaces over finite
fields), and computes on them: Galois-closure lattices, generalized
stabilizers, orbit-alternation tests for weak elimination of imaginaries,
expanded orbital structures with canonical fingerprints, and outer
automorphism groups of the associated automorphism groups.
"""

__version__ = "0.1.0"

DIGEST_VERSION = "sha256/v1"
