"""Finite transformation sets and a group-axiom checker.

Two element kinds are supported:

* ``"permutation"``: an index array ``p`` (0-based) acting as ``x -> x[p]``,
  i.e. ``(x_1..x_n) -> (x_{p_1}..x_{p_n})``.
* ``"sign_flip"``: a vector ``s`` in {-1,+1}^n acting as ``x -> s * x``.

Composition follows maps: ``compose(g, h)`` is ``g∘h``, apply ``h`` first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations, permutations, product
from math import comb, factorial
from typing import Iterable

import numpy as np

PERMUTATION = "permutation"
SIGN_FLIP = "sign_flip"
MAX_WITNESSES = 3

__all__ = [
    "PERMUTATION",
    "SIGN_FLIP",
    "TransformationGroup",
    "GroupCheckReport",
    "check_group",
    "compose",
    "transform_all",
    "inverse",
    "identity_element",
    "full_permutation_group",
    "sign_flip_group",
    "cyclic_group",
    "balanced_permutations",
    "group_from_name",
]


def _element_kind(e: np.ndarray) -> str:
    if np.all(np.abs(e) == 1):
        return SIGN_FLIP
    if np.array_equal(np.sort(e), np.arange(e.size)):
        return PERMUTATION
    raise ValueError(
        f"element {e.tolist()} is neither a 0-based permutation nor a sign vector"
    )


def compose(g, h, kind: str) -> np.ndarray:
    """Return ``g∘h`` (apply ``h`` first, then ``g``)."""
    g = np.asarray(g)
    h = np.asarray(h)
    if kind == PERMUTATION:
        # g(h(x)) = (x[h])[g] = x[h[g]]
        return h[g]
    if kind == SIGN_FLIP:
        return g * h
    raise ValueError(f"unknown element kind {kind!r}")


def inverse(g, kind: str) -> np.ndarray:
    g = np.asarray(g)
    if kind == PERMUTATION:
        return np.argsort(g)
    if kind == SIGN_FLIP:
        return g.copy()
    raise ValueError(f"unknown element kind {kind!r}")


def identity_element(n: int, kind: str) -> np.ndarray:
    if kind == PERMUTATION:
        return np.arange(n)
    if kind == SIGN_FLIP:
        return np.ones(n, dtype=np.int64)
    raise ValueError(f"unknown element kind {kind!r}")


def transform_all(kind: str, elements: np.ndarray, x) -> np.ndarray:
    """Apply each row of ``elements`` to ``x``; returns ``(len(elements), n)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != elements.shape[-1]:
        raise ValueError(f"data has length {x.shape[-1]}, expected {elements.shape[-1]}")
    if kind == PERMUTATION:
        return x[..., elements]
    if kind == SIGN_FLIP:
        return x[..., None, :] * elements
    raise ValueError(f"unknown element kind {kind!r}")


@dataclass(frozen=True, eq=False)
class TransformationGroup:
    """A finite set of transformations of R^n, not necessarily a group.

    ``elements`` is a read-only ``(|G|, n)`` int64 array of canonical encodings.
    Membership in the set is exact (tuple hashing), never tolerance-based.
    """

    n: int
    kind: str
    elements: np.ndarray
    label: str = "custom"
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        elems = np.array(self.elements, dtype=np.int64)
        if elems.ndim != 2 or elems.shape[0] == 0 or elems.shape[1] != self.n:
            raise ValueError(f"elements must be a non-empty (k, {self.n}) array")
        elems.setflags(write=False)
        object.__setattr__(self, "elements", elems)
        lookup = {}
        for i, e in enumerate(elems):
            key = tuple(e.tolist())
            if key in lookup:
                raise ValueError(f"duplicate element {list(key)}")
            lookup[key] = i
        object.__setattr__(self, "_lookup", lookup)

    @classmethod
    def from_elements(cls, elements: Iterable, label: str = "custom") -> "TransformationGroup":
        """Build from raw elements, inferring the kind of each one.

        Mixed kinds (permutations together with sign vectors) are rejected.
        """
        rows = [np.asarray(e, dtype=np.int64) for e in elements]
        if not rows:
            raise ValueError("a transformation set needs at least one element")
        n = rows[0].size
        if any(r.ndim != 1 or r.size != n for r in rows):
            raise ValueError("all elements must be 1-d with the same length")
        kinds = {_element_kind(r) for r in rows}
        if len(kinds) > 1:
            raise ValueError("cannot mix permutations and sign-flip vectors in one set")
        return cls(n, kinds.pop(), np.stack(rows), label)

    def __len__(self) -> int:
        return self.elements.shape[0]

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, g) -> bool:
        return tuple(np.asarray(g).tolist()) in self._lookup

    def index_of(self, g) -> int | None:
        return self._lookup.get(tuple(np.asarray(g).tolist()))

    def compose(self, g, h) -> np.ndarray:
        return compose(g, h, self.kind)

    def inverse(self, g) -> np.ndarray:
        return inverse(g, self.kind)

    def identity(self) -> np.ndarray:
        return identity_element(self.n, self.kind)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Every transform of ``x``: row ``i`` is ``elements[i]`` applied to x."""
        return transform_all(self.kind, self.elements, x)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "label": self.label,
            "elements": self.elements.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransformationGroup":
        group = cls.from_elements(data["elements"], label=data.get("label", "custom"))
        if "kind" in data and data["kind"] != group.kind:
            raise ValueError(f"declared kind {data['kind']!r} but elements are {group.kind!r}")
        if "n" in data and int(data["n"]) != group.n:
            raise ValueError(f"declared n={data['n']} but elements have length {group.n}")
        return group

    def __repr__(self):
        return f"TransformationGroup(label={self.label!r}, kind={self.kind!r}, n={self.n}, size={len(self)})"


@dataclass(frozen=True)
class GroupCheckReport:
    has_identity: bool
    closed: bool
    has_inverses: bool
    # (g, h) pairs with g∘h outside the set, as lists of ints
    closure_witnesses: tuple = ()
    # elements whose inverse is missing
    inverse_witnesses: tuple = ()

    @property
    def is_group(self) -> bool:
        return self.has_identity and self.closed and self.has_inverses

    @property
    def failed_axioms(self) -> list[str]:
        failed = []
        if not self.has_identity:
            failed.append("identity")
        if not self.closed:
            failed.append("closure")
        if not self.has_inverses:
            failed.append("inverses")
        return failed

    def to_dict(self) -> dict:
        return {
            "is_group": self.is_group,
            "has_identity": self.has_identity,
            "closed": self.closed,
            "has_inverses": self.has_inverses,
            "closure_witnesses": [list(map(list, w)) for w in self.closure_witnesses],
            "inverse_witnesses": [list(w) for w in self.inverse_witnesses],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroupCheckReport":
        return cls(
            has_identity=data["has_identity"],
            closed=data["closed"],
            has_inverses=data["has_inverses"],
            closure_witnesses=tuple(
                (tuple(g), tuple(h)) for g, h in data.get("closure_witnesses", [])
            ),
            inverse_witnesses=tuple(tuple(g) for g in data.get("inverse_witnesses", [])),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _closure_witnesses(group: TransformationGroup, limit: int) -> list[tuple]:
    """Search for pairs (g, h) in the set with g∘h outside it.

    Grows the semigroup generated by a greedily chosen generating subset A of
    the set, by right-multiplying every reached element by every generator.
    Everything reached is a product of set members; if the set is closed,
    every product stays inside, and once each member has been reached the
    set equals the generated semigroup, so closure holds. Cost is
    O(|G| * |A|) compositions with |A| typically O(log |G|), instead of
    checking all |G|^2 pairs.
    """
    members = group._lookup
    kind = group.kind
    reached: dict[tuple, np.ndarray] = {}
    gens: list[np.ndarray] = []
    witnesses: list[tuple] = []
    seen_pairs = set()

    def expand(queue):
        # queue items: (element, generators it still has to be multiplied by)
        while queue:
            x, todo = queue.pop()
            for a in todo:
                y = compose(x, a, kind)
                key = tuple(y.tolist())
                if key in members:
                    if key not in reached:
                        reached[key] = y
                        queue.append((y, gens))
                    continue
                pair = (tuple(x.tolist()), tuple(a.tolist()))
                if pair not in seen_pairs:
                    seen_pairs.add(pair)
                    witnesses.append(pair)
                    if len(witnesses) >= limit:
                        return

    for e in group.elements:
        key = tuple(e.tolist())
        if key in reached:
            continue
        gens.append(e)
        queue = [(x, [e]) for x in list(reached.values())]
        reached[key] = e
        queue.append((e, gens))
        expand(queue)
        if len(witnesses) >= limit:
            break
    return witnesses


def check_group(group: TransformationGroup) -> GroupCheckReport:
    """Check the identity, closure and inverse axioms on a transformation set."""
    if not isinstance(group, TransformationGroup):
        group = TransformationGroup.from_elements(group)
    has_identity = group.identity() in group
    closure = _closure_witnesses(group, MAX_WITNESSES)
    missing_inverse = []
    for g in group.elements:
        if group.inverse(g) not in group:
            missing_inverse.append(tuple(g.tolist()))
            if len(missing_inverse) >= MAX_WITNESSES:
                break
    return GroupCheckReport(
        has_identity=has_identity,
        closed=not closure,
        has_inverses=not missing_inverse,
        closure_witnesses=tuple(closure),
        inverse_witnesses=tuple(missing_inverse),
    )


# -- constructors -------------------------------------------------------------


def full_permutation_group(n: int) -> TransformationGroup:
    """All ``n!`` permutations of ``n`` positions."""
    if n < 1:
        raise ValueError("n must be positive")
    if factorial(n) > 5_000_000:
        raise ValueError(f"{n}! permutations is too many to hold in memory")
    elems = np.array(list(permutations(range(n))), dtype=np.int64)
    return TransformationGroup(n, PERMUTATION, elems, f"perms:{n}")


def sign_flip_group(n: int) -> TransformationGroup:
    """All ``2**n`` sign-flip vectors."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > 22:
        raise ValueError(f"2^{n} sign vectors is too many to hold in memory")
    elems = np.array(list(product((1, -1), repeat=n)), dtype=np.int64)
    return TransformationGroup(n, SIGN_FLIP, elems, f"sign-flips:{n}")


def cyclic_group(generator, kind: str = PERMUTATION) -> TransformationGroup:
    """The cyclic group generated by a single element."""
    g = np.asarray(generator, dtype=np.int64)
    e = identity_element(g.size, kind)
    elems = [e]
    x = g
    while not np.array_equal(x, e):
        elems.append(x)
        x = compose(g, x, kind)
    return TransformationGroup(g.size, kind, np.stack(elems), "cyclic")


def balanced_permutations(n_cases: int, n_controls: int) -> TransformationGroup:
    """Permutations that swap exactly half the cases with half the controls.

    Positions ``0..n_cases-1`` are cases, the rest controls. A permutation
    ``p`` qualifies when exactly ``n_cases/2`` case positions receive a value
    from a control position (and hence the same number of control positions
    receive a case value). The identity is never included. The result is an
    unvalidated element set; it is not a group.
    """
    if n_cases < 1 or n_controls < 1:
        raise ValueError("group sizes must be positive")
    if n_cases != n_controls or n_cases % 2:
        raise ValueError("balanced permutations need equal, even group sizes")
    n = n_cases + n_controls
    half = n_cases // 2
    total = comb(n_cases, half) * comb(n_controls, half) * factorial(n_cases) * factorial(n_controls)
    if total > 5_000_000:
        raise ValueError(f"{total} balanced permutations is too many to hold in memory")
    cases = list(range(n_cases))
    controls = list(range(n_cases, n))
    blocks = []
    # case slots receive the kept case values plus `half` incoming control values
    for kept in combinations(cases, n_cases - half):
        for incoming in combinations(controls, half):
            case_vals = list(kept) + list(incoming)
            control_vals = [i for i in cases if i not in kept] + [
                i for i in controls if i not in incoming
            ]
            pc = np.array(list(permutations(case_vals)), dtype=np.int64)
            pk = np.array(list(permutations(control_vals)), dtype=np.int64)
            blocks.append(
                np.hstack([np.repeat(pc, len(pk), axis=0), np.tile(pk, (len(pc), 1))])
            )
    return TransformationGroup(
        n, PERMUTATION, np.vstack(blocks), f"balanced-perms:{n_cases},{n_controls}"
    )


def group_from_name(spec: str) -> TransformationGroup:
    """Parse ``perms:N``, ``sign-flips:N`` or ``balanced-perms:A,B``."""
    name, _, arg = spec.partition(":")
    try:
        if name == "perms":
            return full_permutation_group(int(arg))
        if name == "sign-flips":
            return sign_flip_group(int(arg))
        if name == "balanced-perms":
            a, b = (int(v) for v in arg.split(","))
            return balanced_permutations(a, b)
    except (TypeError, ValueError) as exc:
        if "invalid literal" in str(exc) or "unpack" in str(exc):
            raise ValueError(f"malformed group spec {spec!r}") from exc
        raise
    raise ValueError(
        f"unknown group spec {spec!r}; expected perms:N, sign-flips:N or balanced-perms:A,B"
    )
