"""Test statistics ``T(w, y)`` comparing a 0/1 assignment with responses.

Every statistic broadcasts over leading axes: ``w`` of shape ``(R, n)`` and
``y`` of shape ``(n,)`` give ``R`` values, ``(B, 1, n)`` against ``(R, n)``
gives a ``(B, R)`` block. The engine relies on this to score a whole scheme
(or every transform of the data) in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groups import PERMUTATION, SIGN_FLIP, TransformationGroup

__all__ = [
    "StatisticSpec",
    "STATISTIC_NAMES",
    "stat_fisher_match",
    "stat_diff_sums",
    "stat_centered_diff",
    "stat_abs_mean_diff",
    "apply_transformation",
]

UPPER = "upper"
TWO_SIDED = "two_sided"


def _pair(w, y):
    w = np.asarray(w)
    y = np.asarray(y, dtype=float)
    if w.shape[-1] != y.shape[-1]:
        raise ValueError(f"length mismatch: w has {w.shape[-1]} units, y has {y.shape[-1]}")
    return w, y


def _scalar(x):
    return x.item() if np.ndim(x) == 0 else x


def stat_fisher_match(w, y):
    """Number of positions where both ``w`` and ``y`` are 1."""
    w = np.asarray(w)
    y = np.asarray(y)
    if w.shape[-1] != y.shape[-1]:
        raise ValueError(f"length mismatch: w has {w.shape[-1]} units, y has {y.shape[-1]}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("fisher-match needs a binary response vector")
    return _scalar(np.sum((w == 1) & (y == 1), axis=-1))


def stat_diff_sums(w, y):
    """Sum of treated responses minus sum of untreated responses."""
    w, y = _pair(w, y)
    return _scalar(np.sum(np.where(w == 1, y, -y), axis=-1))


def stat_centered_diff(w, y):
    """:func:`stat_diff_sums` applied to ``y - mean(y)``.

    Constant patterns score exactly 0 (up to rounding), so all-treated and
    all-control assignments can never be significant.
    """
    w, y = _pair(w, y)
    yc = y - y.mean(axis=-1, keepdims=True)
    return _scalar(np.sum(np.where(w == 1, yc, -yc), axis=-1))


def stat_abs_mean_diff(w, y):
    """Absolute difference between the treated and untreated group means."""
    w, y = _pair(w, y)
    treated = w == 1
    n1 = treated.sum(axis=-1)
    n0 = w.shape[-1] - n1
    if np.any(n1 == 0) or np.any(n0 == 0):
        raise ValueError("mean difference is undefined when one group is empty")
    s1 = np.sum(np.where(treated, y, 0.0), axis=-1)
    s0 = np.sum(np.where(treated, 0.0, y), axis=-1)
    return _scalar(np.abs(s1 / n1 - s0 / n0))


_KINDS = {
    "fisher_match": stat_fisher_match,
    "diff_sums": stat_diff_sums,
    "centered_diff": stat_centered_diff,
    "abs_mean_diff": stat_abs_mean_diff,
}
STATISTIC_NAMES = {k.replace("_", "-"): k for k in _KINDS}


@dataclass(frozen=True)
class StatisticSpec:
    """A named statistic and its sidedness.

    Two-sided testing is done on the statistic itself: the score becomes
    ``|centered_diff|``, so large values in either direction count as
    extreme. ``fisher_match`` is upper-only; ``abs_mean_diff`` is already
    symmetric and scores the same either way.
    """

    kind: str
    sidedness: str = UPPER

    def __post_init__(self):
        kind = STATISTIC_NAMES.get(self.kind, self.kind)
        if kind not in _KINDS:
            raise ValueError(
                f"unknown statistic {self.kind!r}; expected one of {sorted(STATISTIC_NAMES)}"
            )
        side = self.sidedness.replace("-", "_")
        if side not in (UPPER, TWO_SIDED):
            raise ValueError(f"sidedness must be 'upper' or 'two-sided', got {self.sidedness!r}")
        if kind == "fisher_match" and side == TWO_SIDED:
            raise ValueError("fisher-match is an upper-tail statistic only")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "sidedness", side)

    @classmethod
    def parse(cls, name: str, sided: str = UPPER) -> "StatisticSpec":
        return cls(name, sided)

    @property
    def name(self) -> str:
        return self.kind.replace("_", "-")

    def __call__(self, w, y):
        if self.sidedness == TWO_SIDED and self.kind in ("diff_sums", "centered_diff"):
            return _scalar(np.abs(stat_centered_diff(w, y)))
        return _KINDS[self.kind](w, y)

    def to_dict(self) -> dict:
        return {"kind": self.name, "sidedness": self.sidedness.replace("_", "-")}


def apply_transformation(g, x, kind: str | None = None) -> np.ndarray:
    """Apply one permutation or sign-flip element ``g`` to data ``x``.

    ``kind`` is inferred when omitted: vectors of +-1 are sign flips, 0-based
    index arrays are permutations. The input is never modified.
    """
    g = np.asarray(g)
    x = np.asarray(x)
    if g.shape[-1] != x.shape[-1]:
        raise ValueError(f"length mismatch: element has {g.shape[-1]} entries, data has {x.shape[-1]}")
    if kind is None:
        kind = TransformationGroup.from_elements([g]).kind
    if kind == PERMUTATION:
        return x[..., g].copy()
    if kind == SIGN_FLIP:
        return x * g
    raise ValueError(f"unknown element kind {kind!r}")
