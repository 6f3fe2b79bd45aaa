"""Randomization schemes: finite, weighted sets of treatment assignment patterns.

A pattern is a length-``n`` vector of 0/1 treatment indicators. Internally each
pattern is stored as an integer code whose most significant bit is unit 1, so
``"1100"`` has code 12. Schemes keep their codes sorted; ``patterns[i]`` and
``weights[i]`` refer to the same assignment.

Schemes with ``n`` above :data:`MAX_ENUMERABLE_N` are sampling-only: they can
draw patterns and test membership but refuse to enumerate.
"""

from __future__ import annotations

import json
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import EmptySchemeError, EnumerationError

__all__ = [
    "MAX_ENUMERABLE_N",
    "RandomizationScheme",
    "as_pattern",
    "pattern_to_string",
    "pattern_code",
    "codes_to_patterns",
    "forced_balance_scheme",
    "bernoulli_scheme",
    "custom_scheme",
    "covariate_balanced_scheme",
    "ltt_scheme",
    "sample_pattern",
    "scheme_from_name",
]

MAX_ENUMERABLE_N = 24
WEIGHT_TOL = 1e-12


def as_pattern(w, n: int | None = None) -> np.ndarray:
    """Coerce ``w`` (0/1 string, sequence or array) to a uint8 pattern vector."""
    if isinstance(w, str):
        s = w.strip()
        if not s or any(c not in "01" for c in s):
            raise ValueError(f"pattern string must contain only 0 and 1, got {w!r}")
        arr = np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        raw = np.asarray(w)
        if raw.ndim != 1 or raw.size == 0:
            raise ValueError("pattern must be a non-empty 1-d sequence")
        if not np.all((raw == 0) | (raw == 1)):
            raise ValueError("pattern entries must be exactly 0 or 1")
        arr = raw.astype(np.uint8)
    if n is not None and arr.size != n:
        raise ValueError(f"pattern has length {arr.size}, expected {n}")
    return arr


def pattern_to_string(w) -> str:
    return "".join("1" if b else "0" for b in as_pattern(w))


def pattern_code(w) -> int:
    code = 0
    for b in as_pattern(w):
        code = (code << 1) | int(b)
    return code


def codes_to_patterns(codes, n: int) -> np.ndarray:
    """Expand integer codes to an ``(len(codes), n)`` uint8 matrix."""
    codes = np.asarray(codes, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8)


def _popcount(x: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(x).astype(np.int64)
    x = x.astype(np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


def _all_codes(n: int) -> np.ndarray:
    if n > MAX_ENUMERABLE_N:
        raise EnumerationError(
            f"cannot enumerate 2^{n} patterns (limit n={MAX_ENUMERABLE_N}); "
            "use Monte Carlo p-values instead"
        )
    return np.arange(1 << n, dtype=np.int64)


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    # repr() gives the shortest decimal that round-trips, so 0.1 -> 1/10.
    return Fraction(repr(float(x)))


class RandomizationScheme:
    """A declared set of admissible assignment patterns with selection weights.

    Use the module-level constructors rather than instantiating directly.
    ``weights=None`` means uniform (each pattern has probability ``1/R``).
    """

    def __init__(
        self,
        n: int,
        label: str,
        *,
        size: int,
        codes: np.ndarray | None = None,
        enumerate_codes: Callable[[], np.ndarray] | None = None,
        weights: Sequence[Fraction] | None = None,
        weight_fn: Callable[[np.ndarray], list[Fraction]] | None = None,
        member: Callable[[np.ndarray], bool] | None = None,
        sampler: Callable[[np.random.Generator], np.ndarray] | None = None,
    ):
        if n < 1:
            raise ValueError("n must be a positive integer")
        if size < 1:
            raise EmptySchemeError(f"scheme {label!r} has no patterns")
        self.n = int(n)
        self.label = label
        self.size = int(size)
        self._codes = None
        if codes is not None:
            self._codes = np.asarray(codes, dtype=np.int64)
            self._codes.setflags(write=False)
        self._enumerate_codes = enumerate_codes
        self._weights = tuple(weights) if weights is not None else None
        self._weight_fn = weight_fn
        self._member = member
        self._sampler = sampler
        self._patterns = None
        self._index = None
        self._probs = None

    # -- enumeration -------------------------------------------------------

    @property
    def enumerable(self) -> bool:
        return self.n <= MAX_ENUMERABLE_N

    def _require_enumerable(self):
        if not self.enumerable:
            raise EnumerationError(
                f"scheme {self.label!r} with n={self.n} exceeds the enumeration "
                f"limit n={MAX_ENUMERABLE_N}; use Monte Carlo p-values instead"
            )

    @property
    def codes(self) -> np.ndarray:
        if self._codes is None:
            self._require_enumerable()
            codes = np.sort(np.asarray(self._enumerate_codes(), dtype=np.int64))
            if codes.size != self.size:
                raise AssertionError(
                    f"enumerated {codes.size} patterns, expected {self.size}"
                )
            codes.setflags(write=False)
            self._codes = codes
        return self._codes

    @property
    def patterns(self) -> np.ndarray:
        """``(R, n)`` uint8 matrix of all patterns, in code order."""
        if self._patterns is None:
            pats = codes_to_patterns(self.codes, self.n)
            pats.setflags(write=False)
            self._patterns = pats
        return self._patterns

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        return iter(self.patterns)

    # -- weights -----------------------------------------------------------

    @property
    def is_uniform(self) -> bool:
        return self._weights is None and self._weight_fn is None

    @property
    def weights(self) -> tuple[Fraction, ...]:
        """Exact selection probability of each pattern, aligned with ``codes``."""
        if self.is_uniform:
            return (Fraction(1, self.size),) * self.size
        if self._weights is None:
            self._weights = tuple(self._weight_fn(self.patterns))
        return self._weights

    @property
    def probabilities(self) -> np.ndarray:
        if self._probs is None:
            if self.is_uniform:
                probs = np.full(self.size, 1.0 / self.size)
            else:
                probs = np.array([float(w) for w in self.weights])
                probs /= probs.sum()
            probs.setflags(write=False)
            self._probs = probs
        return self._probs

    # -- membership --------------------------------------------------------

    def index_of(self, w) -> int | None:
        """Position of pattern ``w`` in ``codes``, or None if not a member."""
        w = as_pattern(w, self.n)
        code = pattern_code(w)
        codes = self.codes
        i = int(np.searchsorted(codes, code))
        if i < codes.size and codes[i] == code:
            return i
        return None

    def contains(self, w) -> bool:
        w = as_pattern(w)
        if w.size != self.n:
            return False
        if self._member is not None:
            return bool(self._member(w))
        return self.index_of(w) is not None

    __contains__ = contains

    def weight_of(self, w) -> Fraction:
        i = self.index_of(w)
        if i is None:
            return Fraction(0)
        return self.weights[i]

    # -- sampling ----------------------------------------------------------

    def sample_indices(self, rng: np.random.Generator, size: int | None = None):
        """Draw pattern indices (into ``codes``) according to the weights."""
        if self.is_uniform:
            return rng.integers(self.size, size=size)
        return rng.choice(self.size, size=size, p=self.probabilities)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if not self.enumerable:
            if self._sampler is None:
                raise EnumerationError(f"scheme {self.label!r} has no sampler")
            return self._sampler(rng)
        return self.patterns[int(self.sample_indices(rng))].copy()

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "label": self.label,
            "patterns": [pattern_to_string(p) for p in self.patterns],
            "weights": [f"{w.numerator}/{w.denominator}" for w in self.weights],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "RandomizationScheme":
        patterns = data["patterns"]
        scheme = custom_scheme(patterns, data.get("weights"), label=data.get("label", "custom"))
        if "n" in data and int(data["n"]) != scheme.n:
            raise ValueError(f"declared n={data['n']} but patterns have length {scheme.n}")
        return scheme

    @classmethod
    def from_json(cls, text: str) -> "RandomizationScheme":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, RandomizationScheme):
            return NotImplemented
        return (
            self.n == other.n
            and self.label == other.label
            and self.size == other.size
            and np.array_equal(self.codes, other.codes)
            and self.weights == other.weights
        )

    def __hash__(self):
        return hash((self.n, self.label, self.size))

    def __repr__(self):
        kind = "uniform" if self.is_uniform else "weighted"
        return f"RandomizationScheme(label={self.label!r}, n={self.n}, R={self.size}, {kind})"


# -- constructors -------------------------------------------------------------


def forced_balance_scheme(n: int) -> RandomizationScheme:
    """All patterns with exactly ``n/2`` treated units, uniformly weighted."""
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise ValueError(f"forced balance needs an even n >= 2, got {n!r}")
    n = int(n)
    half = n // 2

    def enumerate_codes():
        codes = _all_codes(n)
        return codes[_popcount(codes) == half]

    def sampler(rng):
        w = np.zeros(n, dtype=np.uint8)
        w[rng.choice(n, size=half, replace=False)] = 1
        return w

    return RandomizationScheme(
        n,
        "forced-balance",
        size=comb(n, half),
        enumerate_codes=enumerate_codes,
        member=lambda w: int(w.sum()) == half,
        sampler=sampler,
    )


def bernoulli_scheme(n: int, exclude_constants: bool = False) -> RandomizationScheme:
    """Every pattern in {0,1}^n, optionally without all-zeros and all-ones."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if exclude_constants and n < 2:
        raise EmptySchemeError("excluding the constant patterns leaves nothing for n=1")
    full = (1 << n) - 1

    def enumerate_codes():
        codes = _all_codes(n)
        if exclude_constants:
            codes = codes[1:-1]
        return codes

    def member(w):
        return not exclude_constants or 0 < int(w.sum()) < n

    def sampler(rng):
        while True:
            w = rng.integers(0, 2, size=n, dtype=np.uint8)
            if member(w):
                return w

    return RandomizationScheme(
        n,
        "bernoulli-nc" if exclude_constants else "bernoulli",
        size=(1 << n) - 2 if exclude_constants else full + 1,
        enumerate_codes=enumerate_codes,
        member=member,
        sampler=sampler,
    )


def custom_scheme(
    patterns: Iterable,
    weights: Sequence | None = None,
    *,
    label: str = "custom",
) -> RandomizationScheme:
    """A scheme over an explicit list of patterns.

    Patterns may be 0/1 strings or sequences. Weights, if given, must be
    positive and sum to 1 within 1e-12; they are stored as exact fractions
    and renormalized to sum to exactly 1.
    """
    rows = [as_pattern(p) for p in patterns]
    if not rows:
        raise EmptySchemeError("a scheme needs at least one pattern")
    n = rows[0].size
    if any(r.size != n for r in rows):
        raise ValueError("all patterns must have the same length")
    if n > MAX_ENUMERABLE_N:
        raise ValueError(f"explicit patterns are limited to n <= {MAX_ENUMERABLE_N}")
    codes = np.array([pattern_code(r) for r in rows], dtype=np.int64)
    if np.unique(codes).size != codes.size:
        raise ValueError("patterns must be pairwise distinct")
    order = np.argsort(codes, kind="stable")

    fracs = None
    if weights is not None:
        fracs = [_to_fraction(x) for x in weights]
        if len(fracs) != len(rows):
            raise ValueError(f"got {len(fracs)} weights for {len(rows)} patterns")
        if any(f <= 0 for f in fracs):
            raise ValueError("weights must be strictly positive")
        total = sum(fracs)
        if abs(float(total) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {float(total)!r}, not 1")
        fracs = [fracs[i] / total for i in order]
        if len(set(fracs)) == 1:
            fracs = None

    return RandomizationScheme(n, label, size=len(rows), codes=codes[order], weights=fracs)


def _stratum_masks(stratum, n: int) -> tuple[np.ndarray, int, int]:
    s = as_pattern(stratum, n)
    if int(s.sum()) != n // 2:
        raise ValueError(f"stratum must mark exactly n/2={n // 2} units, got {int(s.sum())}")
    mask_a = pattern_code(s)
    mask_b = ((1 << n) - 1) ^ mask_a
    return s, mask_a, mask_b


def covariate_balanced_scheme(
    n: int, stratum, mode: str = "uniform"
) -> RandomizationScheme:
    """Bernoulli-style design with equal treated counts in two strata.

    ``stratum`` marks the ``n/2`` units of stratum A with 1s. The admissible
    patterns are those treating the same number ``l`` of units in each
    stratum; there are ``sum_l C(n/2, l)**2`` of them.

    ``mode="uniform"`` weights every pattern equally. ``mode="sequential"``
    uses the law of the two-step procedure (independent fair coins within
    stratum A, then ``l`` units of stratum B chosen at random), which gives
    pattern ``w`` probability ``2**(-n/2) / C(n/2, l(w))``.
    """
    if not isinstance(n, (int, np.integer)) or n < 4 or n % 4:
        raise ValueError(f"covariate balancing needs n divisible by 4, got {n!r}")
    if mode not in ("uniform", "sequential"):
        raise ValueError(f"mode must be 'uniform' or 'sequential', got {mode!r}")
    n = int(n)
    half = n // 2
    s, mask_a, mask_b = _stratum_masks(stratum, n)
    idx_a = np.flatnonzero(s == 1)
    idx_b = np.flatnonzero(s == 0)
    size = sum(comb(half, l) ** 2 for l in range(half + 1))

    def enumerate_codes():
        codes = _all_codes(n)
        return codes[_popcount(codes & mask_a) == _popcount(codes & mask_b)]

    def member(w):
        return int(w[idx_a].sum()) == int(w[idx_b].sum())

    def sequential_weights(patterns):
        ls = patterns[:, idx_a].sum(axis=1)
        return [Fraction(1, (1 << half) * comb(half, int(l))) for l in ls]

    l_probs = np.array([comb(half, l) ** 2 for l in range(half + 1)], dtype=float) / size

    def sampler(rng):
        w = np.zeros(n, dtype=np.uint8)
        if mode == "sequential":
            w[idx_a] = rng.integers(0, 2, size=half, dtype=np.uint8)
            l = int(w[idx_a].sum())
        else:
            l = int(rng.choice(half + 1, p=l_probs))
            w[rng.choice(idx_a, size=l, replace=False)] = 1
        w[rng.choice(idx_b, size=l, replace=False)] = 1
        return w

    return RandomizationScheme(
        n,
        f"covariate-{mode}",
        size=size,
        enumerate_codes=enumerate_codes,
        weight_fn=sequential_weights if mode == "sequential" else None,
        member=member,
        sampler=sampler,
    )


def ltt_scheme(m: int) -> RandomizationScheme:
    """Tea-tasting design: ``2m`` cups, ``m`` of them milk-first (coded 1)."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    scheme = forced_balance_scheme(2 * int(m))
    scheme.label = "ltt"
    return scheme


def sample_pattern(scheme: RandomizationScheme, rng: np.random.Generator) -> np.ndarray:
    """Draw one pattern from ``scheme`` according to its weights."""
    return scheme.sample(rng)


def scheme_from_name(name: str, n: int, stratum=None) -> RandomizationScheme:
    """Build a built-in scheme from its CLI/config name."""
    if name == "forced-balance":
        return forced_balance_scheme(n)
    if name == "bernoulli":
        return bernoulli_scheme(n)
    if name == "bernoulli-nc":
        return bernoulli_scheme(n, exclude_constants=True)
    if name == "ltt":
        if n % 2:
            raise ValueError("ltt scheme needs an even number of cups")
        return ltt_scheme(n // 2)
    if name in ("covariate-uniform", "covariate-sequential"):
        if stratum is None:
            # default strata: first half of the units is stratum A
            stratum = "1" * (n // 2) + "0" * (n - n // 2)
        return covariate_balanced_scheme(n, stratum, mode=name.split("-", 1)[1])
    raise ValueError(
        f"unknown scheme {name!r}; expected one of forced-balance, bernoulli, "
        "bernoulli-nc, ltt, covariate-uniform, covariate-sequential"
    )
