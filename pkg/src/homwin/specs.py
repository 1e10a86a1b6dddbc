"""Structure specifications and finite relational structures."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import SpecError

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23)


def _prime_power(q: int):
    """(p, k) with q == p**k, or None."""
    if q < 2:
        return None
    for p in _PRIMES:
        if q % p == 0:
            k = 0
            while q % p == 0:
                q //= p
                k += 1
            return (p, k) if q == 1 else None
    return None


@dataclass(frozen=True)
class StructureSpec:
    """A catalog entry: one countable homogeneous structure (or an explicit
    finite structure) to build windows of."""

    kind: str
    m: int | None = None          # henson: forbidden clique size
    colors: int | None = None     # colored_graph
    classes: int | None = None    # equivalence
    q: int | None = None          # vector_space: field size
    domain: int | None = None     # finite
    relations: tuple = ()         # finite: ((name, arity, tuples), ...)

    KINDS = (
        "pure_set",
        "dlo",
        "random_graph",
        "henson",
        "colored_graph",
        "equivalence",
        "vector_space",
        "finite",
    )

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise SpecError(f"unknown kind {self.kind!r}")
        if self.kind == "henson":
            if not isinstance(self.m, int) or self.m < 3:
                raise SpecError("henson requires m >= 3")
        if self.kind == "colored_graph":
            if not isinstance(self.colors, int) or self.colors < 2:
                raise SpecError("colored_graph requires colors >= 2")
        if self.kind == "equivalence":
            if not isinstance(self.classes, int) or self.classes < 2:
                raise SpecError("equivalence requires classes >= 2")
        if self.kind == "vector_space":
            if not isinstance(self.q, int) or _prime_power(self.q) is None:
                raise SpecError("vector_space requires q a prime power")
        if self.kind == "finite":
            if not isinstance(self.domain, int) or self.domain < 0:
                raise SpecError("finite requires a nonnegative domain size")
            for name, arity, tuples in self.relations:
                for t in tuples:
                    if len(t) != arity:
                        raise SpecError(f"tuple {t} violates arity of {name}")
                    if any(not (0 <= x < self.domain) for x in t):
                        raise SpecError(f"tuple {t} out of domain in {name}")

    # -- serialization -----------------------------------------------------

    _ALLOWED_KEYS = {
        "pure_set": set(),
        "dlo": set(),
        "random_graph": set(),
        "henson": {"m"},
        "colored_graph": {"colors"},
        "equivalence": {"classes"},
        "vector_space": {"q"},
        "finite": {"domain", "relations"},
    }

    @classmethod
    def from_dict(cls, data: dict) -> "StructureSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise SpecError("spec must be an object with a 'kind' key")
        kind = data["kind"]
        if kind not in cls.KINDS:
            raise SpecError(f"unknown kind {kind!r}")
        extra = set(data) - {"kind"} - cls._ALLOWED_KEYS[kind]
        if extra:
            raise SpecError(f"unknown keys for kind {kind!r}: {sorted(extra)}")
        missing = cls._ALLOWED_KEYS[kind] - set(data)
        if missing:
            raise SpecError(f"missing keys for kind {kind!r}: {sorted(missing)}")
        kwargs: dict[str, Any] = {"kind": kind}
        for key in cls._ALLOWED_KEYS[kind]:
            if key == "relations":
                rels = data["relations"]
                if not isinstance(rels, dict):
                    raise SpecError("relations must be an object")
                packed = []
                for name in sorted(rels):
                    tuples = [tuple(t) for t in rels[name]]
                    arity = len(tuples[0]) if tuples else 1
                    packed.append((name, arity, tuple(sorted(tuples))))
                kwargs["relations"] = tuple(packed)
            else:
                kwargs[key] = data[key]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        for key in self._ALLOWED_KEYS[self.kind]:
            if key == "relations":
                out["relations"] = {
                    name: [list(t) for t in tuples]
                    for name, arity, tuples in self.relations
                }
            else:
                out[key] = getattr(self, key)
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def spec_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def short_name(self) -> str:
        params = self._ALLOWED_KEYS[self.kind]
        if not params:
            return self.kind
        if self.kind == "finite":
            return f"finite({self.domain})"
        val = next(getattr(self, key) for key in sorted(params))
        return f"{self.kind}({val})"


def spec_from_json(text: str) -> StructureSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"invalid JSON: {e}") from None
    return StructureSpec.from_dict(data)


@dataclass
class FiniteStructure:
    """A finite relational structure on domain {0, ..., n-1}."""

    domain_size: int
    signature: tuple  # ((name, arity), ...)
    relations: dict   # name -> frozenset of tuples

    def __post_init__(self):
        arities = dict(self.signature)
        for name, rel in self.relations.items():
            arity = arities[name]
            for t in rel:
                if len(t) != arity:
                    raise ValueError(f"tuple {t} violates arity of {name}")
                if any(not (0 <= x < self.domain_size) for x in t):
                    raise ValueError(f"tuple {t} out of domain in {name}")

    def induced(self, points: Sequence[int]) -> "FiniteStructure":
        pts = list(points)
        index = {p: i for i, p in enumerate(pts)}
        rels = {}
        for name, rel in self.relations.items():
            rels[name] = frozenset(
                tuple(index[x] for x in t) for t in rel if all(x in index for x in t)
            )
        return FiniteStructure(len(pts), self.signature, rels)

    def encode(self) -> tuple:
        return (
            self.domain_size,
            self.signature,
            tuple((name, tuple(sorted(self.relations[name]))) for name, _ in self.signature),
        )
