"""Exact and Monte Carlo p-values for randomization and group invariance tests.

Two procedures share the threshold rule "reject iff ``T_obs > T^(k)``" with
``k = ceil((1 - alpha) * R)``:

* :func:`randomization_test` scores every pattern of the declared design
  against the fixed responses. Validity comes from the physical random
  assignment, so any finite pattern set works, group or not.
* :func:`group_invariance_test` scores every transform ``g x`` of the data.
  Validity needs ``G g = G`` for all ``g``, so the transformation set must be
  a group; anything else is refused.

p-values are exact :class:`fractions.Fraction` counts. The p-value counts
ties with ``>=`` and the threshold rule uses a strict ``>``, each exactly as
written; when all statistic values are distinct the two agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from fractions import Fraction
from typing import Callable

import numpy as np

from .exceptions import DesignViolationError, GroupStructureError
from .groups import PERMUTATION, TransformationGroup, check_group, transform_all
from .schemes import RandomizationScheme, as_pattern, pattern_to_string
from .statistics import StatisticSpec

__all__ = [
    "EXACT",
    "MONTE_CARLO",
    "TestReport",
    "as_level",
    "rejection_count",
    "randomization_pvalue",
    "randomization_test",
    "group_invariance_test",
    "group_invariance_test_unsafe",
    "monte_carlo_pvalue",
    "attainable_alphas",
    "min_pvalue",
    "pvalue_counts",
]

EXACT = "exact_enumeration"
MONTE_CARLO = "monte_carlo"

# float levels this close below j/R are treated as j/R, so 1/70 typed as a float still
# selects the 1/70 rejection region
_LEVEL_SNAP = 1e-9


def as_level(alpha) -> Fraction:
    """Convert a significance level to an exact fraction in (0, 1).

    Floats are read through their shortest decimal form (0.05 -> 1/20);
    strings like ``"1/254"`` are parsed exactly.
    """
    if isinstance(alpha, Fraction):
        a = alpha
    elif isinstance(alpha, str):
        a = Fraction(alpha.strip())
    elif isinstance(alpha, (int, np.integer)):
        a = Fraction(int(alpha))
    else:
        a = Fraction(repr(float(alpha)))
    if not 0 < a < 1:
        raise ValueError(f"alpha must lie strictly between 0 and 1, got {alpha!r}")
    return a


def rejection_count(alpha, size: int) -> int:
    """``floor(alpha * size)``: how many of ``size`` equally likely outcomes may reject."""
    a = as_level(alpha)
    x = a * size
    j = math.floor(x)
    if isinstance(alpha, (float, np.floating)) and (j + 1) - x < _LEVEL_SNAP:
        j += 1
    return j


def _frac_dict(f: Fraction) -> dict:
    return {"num": f.numerator, "den": f.denominator}


@dataclass(frozen=True)
class TestReport:
    """Outcome of one test.

    ``threshold_index`` is the 1-based order statistic index ``k`` and
    ``threshold_value`` the value ``T^(k)``. ``valid`` is False only for
    reports from :func:`group_invariance_test_unsafe`.
    """

    __test__ = False

    observed_T: float
    p_value: Fraction
    size: int
    threshold_index: int
    threshold_value: float
    reject: bool
    alpha: Fraction
    method: str = EXACT
    valid: bool = True
    design: str = ""

    @property
    def p_float(self) -> float:
        return float(self.p_value)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_value"] = _frac_dict(self.p_value)
        d["p_value_float"] = float(self.p_value)
        d["alpha"] = _frac_dict(self.alpha)
        d["R_or_G_size"] = d.pop("size")
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        return cls(
            observed_T=d["observed_T"],
            p_value=Fraction(d["p_value"]["num"], d["p_value"]["den"]),
            size=d["R_or_G_size"],
            threshold_index=d["threshold_index"],
            threshold_value=d["threshold_value"],
            reject=d["reject"],
            alpha=Fraction(d["alpha"]["num"], d["alpha"]["den"]),
            method=d["method"],
            valid=d["valid"],
            design=d.get("design", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "TestReport":
        return cls.from_dict(json.loads(text))


def _as_statistic(stat) -> Callable:
    if isinstance(stat, str):
        return StatisticSpec(stat)
    if callable(stat):
        return stat
    raise TypeError(f"statistic must be a StatisticSpec, name or callable, got {stat!r}")


def _responses(y) -> np.ndarray:
    # binary responses (a tea taster's guess) may be given as a 0/1 string
    if isinstance(y, str):
        return as_pattern(y)
    y = np.asarray(y)
    if not np.all(np.isfinite(y)):
        raise ValueError("responses must be finite")
    return y


def _scheme_statistics(scheme, w_obs, y, stat):
    """Score every pattern; return (values, observed index)."""
    stat = _as_statistic(stat)
    w_obs = as_pattern(w_obs)
    y = _responses(y)
    if w_obs.size != scheme.n or y.shape[-1] != scheme.n:
        raise ValueError(
            f"scheme has n={scheme.n} but w has {w_obs.size} units and y has {y.shape[-1]}"
        )
    idx = scheme.index_of(w_obs)
    if idx is None:
        raise DesignViolationError(
            f"observed assignment {pattern_to_string(w_obs)} is not a pattern of the declared "
            f"scheme {scheme.label!r}; the scheme must be fixed before treatments are assigned"
        )
    values = np.asarray(stat(scheme.patterns, y), dtype=float)
    return values, idx


def randomization_pvalue(scheme: RandomizationScheme, w_obs, y, stat) -> Fraction:
    """Exact p-value: the design probability of scoring at least the observed value.

    For a uniform scheme this is ``|{w : T(w, y) >= T(w_obs, y)}| / R``;
    otherwise the same set is weighted by the scheme's pattern probabilities.
    """
    values, idx = _scheme_statistics(scheme, w_obs, y, stat)
    hits = values >= values[idx]
    if scheme.is_uniform:
        return Fraction(int(hits.sum()), scheme.size)
    return sum((w for w, h in zip(scheme.weights, hits) if h), Fraction(0))


def _threshold_report(values, t_obs, alpha, *, design, valid=True, counts=None) -> TestReport:
    """Threshold decision and p-value over ``values``, each repeated ``counts`` times."""
    values = np.asarray(values, dtype=float)
    counts = np.ones(values.size, dtype=np.int64) if counts is None else np.asarray(counts)
    size = int(counts.sum())
    k = size - rejection_count(alpha, size)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(counts[order])
    threshold = float(values[order][np.searchsorted(cum, k)])
    return TestReport(
        observed_T=float(t_obs),
        p_value=Fraction(int(counts[values >= t_obs].sum()), size),
        size=size,
        threshold_index=k,
        threshold_value=threshold,
        reject=bool(t_obs > threshold),
        alpha=as_level(alpha),
        method=EXACT,
        valid=valid,
        design=design,
    )


def randomization_test(scheme: RandomizationScheme, w_obs, y, stat, alpha) -> TestReport:
    """Randomization test of "responses independent of assignment".

    Sorts ``T(w, y)`` over all patterns and rejects iff the observed value is
    strictly above the ``ceil((1 - alpha) R)``-th smallest. Defined for
    uniform schemes; for weighted ones use :func:`randomization_pvalue`.
    """
    if not scheme.is_uniform:
        raise ValueError(
            "the threshold rule assumes uniform pattern weights; "
            "use randomization_pvalue for weighted schemes"
        )
    values, idx = _scheme_statistics(scheme, w_obs, y, stat)
    return _threshold_report(values, values[idx], alpha, design=scheme.label)


def _default_labels(group: TransformationGroup) -> np.ndarray:
    if group.kind == PERMUTATION:
        # cases first: the first half of the positions form the "treated" block
        labels = np.zeros(group.n, dtype=np.uint8)
        labels[: group.n // 2] = 1
        return labels
    return np.ones(group.n, dtype=np.uint8)


@lru_cache(maxsize=16)
def _cached_check(group: TransformationGroup):
    # groups are immutable, so one validation per object suffices
    return check_group(group)


@lru_cache(maxsize=16)
def _induced_labelings(group: TransformationGroup, labels: bytes):
    """Distinct labelings ``L[g^-1]`` over a permutation group, with multiplicities."""
    lab = np.frombuffer(labels, dtype=np.uint8)
    inv = np.argsort(group.elements, axis=1)
    induced = lab[inv]
    unique, counts = np.unique(induced, axis=0, return_counts=True)
    return unique, counts


def _group_statistics(group, x, stat, labels):
    """Return (values, multiplicities, observed value) of ``T(g x)`` over the set.

    For permutation sets and built-in statistics, ``T(L, x[g])`` is computed
    as ``T(L[g^-1], x)``: the built-in statistics depend only on which values
    carry which label, so both are the same number, and evaluating each
    distinct induced labeling once keeps mathematically tied values exactly
    tied (summing in permuted order would not).
    """
    stat = _as_statistic(stat)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != group.n:
        raise ValueError(f"data must be a vector of length {group.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    labels = _default_labels(group) if labels is None else as_pattern(labels, group.n)
    if group.kind == PERMUTATION and isinstance(stat, StatisticSpec):
        unique, counts = _induced_labelings(group, labels.tobytes())
        values = np.asarray(stat(np.vstack([labels[None, :], unique]), x), dtype=float)
        return values[1:], counts, values[0]
    values = np.asarray(stat(labels, np.vstack([x[None, :], group.apply(x)])), dtype=float)
    return values[1:], None, values[0]


def group_invariance_test(
    group: TransformationGroup, x, stat, alpha, labels=None
) -> TestReport:
    """Group invariance (permutation / sign-flip) test of ``x``.

    The statistic is ``T(x) = stat(labels, x)``; ``labels`` defaults to
    "first half of the positions" for permutations and all ones (a plain sum)
    for sign flips. Rejects iff ``T(x) > T^(k)`` over ``{T(g x) : g in G}``.

    Raises :class:`GroupStructureError` if ``group`` fails any group axiom.
    """
    report = _cached_check(group)
    if not report.is_group:
        witness = ""
        if report.closure_witnesses:
            g, h = report.closure_witnesses[0]
            witness = f"; e.g. {list(g)} o {list(h)} is not in the set"
        elif report.inverse_witnesses:
            witness = f"; e.g. {list(report.inverse_witnesses[0])} has no inverse in the set"
        raise GroupStructureError(
            f"{group.label!r} is not a group (fails: {', '.join(report.failed_axioms)}){witness}",
            report,
        )
    values, counts, t_obs = _group_statistics(group, x, stat, labels)
    return _threshold_report(values, t_obs, alpha, design=group.label, counts=counts)


def group_invariance_test_unsafe(elements, x, stat, alpha, labels=None) -> TestReport:
    """Same computation as :func:`group_invariance_test` without the group check.

    Exists to reproduce what goes wrong with non-group transformation sets;
    the report is marked ``valid=False``.
    """
    if not isinstance(elements, TransformationGroup):
        elements = TransformationGroup.from_elements(elements)
    values, counts, t_obs = _group_statistics(elements, x, stat, labels)
    return _threshold_report(
        values, t_obs, alpha, design=elements.label, valid=False, counts=counts
    )


def monte_carlo_pvalue(
    source, observed, stat, m: int, rng: np.random.Generator, *, y=None, labels=None
) -> Fraction:
    """``(1 + #{j : T_j >= T_obs}) / (m + 1)`` from ``m`` uniform random draws.

    ``source`` is a scheme (``observed`` is the assignment, ``y`` the
    responses) or a group (``observed`` is the data vector). Counting the
    observed value once keeps the p-value valid at every ``m``.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError("m must be a positive integer")
    stat = _as_statistic(stat)
    if isinstance(source, RandomizationScheme):
        if y is None:
            raise ValueError("responses y are required for a scheme")
        w_obs = as_pattern(observed, source.n)
        if not source.contains(w_obs):
            raise DesignViolationError(
                f"observed assignment {pattern_to_string(w_obs)} is not a pattern of "
                f"scheme {source.label!r}"
            )
        if source.enumerable:
            draws = source.patterns[source.sample_indices(rng, m)]
        else:
            draws = np.stack([source.sample(rng) for _ in range(m)])
        values = np.asarray(stat(np.vstack([w_obs[None, :], draws]), _responses(y)), dtype=float)
    elif isinstance(source, TransformationGroup):
        x = np.asarray(observed, dtype=float)
        labels = _default_labels(source) if labels is None else as_pattern(labels, source.n)
        picks = source.elements[rng.integers(len(source), size=m)]
        data = np.vstack([x[None, :], transform_all(source.kind, picks, x)])
        values = np.asarray(stat(labels, data), dtype=float)
    else:
        raise TypeError("source must be a RandomizationScheme or TransformationGroup")
    return Fraction(1 + int(np.count_nonzero(values[1:] >= values[0])), m + 1)


def attainable_alphas(scheme: RandomizationScheme, stat, y) -> list[Fraction]:
    """Every rejection probability the test can attain given responses ``y``.

    One level per distinct statistic value ``t``: ``|{w : T(w, y) >= t}| / R``.
    The trivial level 1 is always included.
    """
    if not scheme.is_uniform:
        raise ValueError("attainable levels are defined for uniform schemes")
    values = np.asarray(_as_statistic(stat)(scheme.patterns, _responses(y)), dtype=float)
    ordered = np.sort(values)
    distinct = np.unique(ordered)
    # number of values >= t, for each distinct t
    at_least = ordered.size - np.searchsorted(ordered, distinct, side="left")
    return sorted(Fraction(int(c), scheme.size) for c in at_least)


def min_pvalue(scheme: RandomizationScheme) -> Fraction:
    """Smallest p-value the design can produce: ``1/R`` (smallest weight if weighted)."""
    if scheme.is_uniform:
        return Fraction(1, scheme.size)
    return min(scheme.weights)


def pvalue_counts(scheme: RandomizationScheme, obs_indices, Y, stat) -> np.ndarray:
    """Vectorized numerators of :func:`randomization_pvalue` for a uniform scheme.

    Row ``b`` of ``Y`` holds responses observed under pattern
    ``scheme.patterns[obs_indices[b]]``; the result is
    ``#{w : T(w, Y[b]) >= T(w_obs_b, Y[b])}`` for each row.
    """
    stat = _as_statistic(stat)
    Y = np.asarray(Y, dtype=float)
    obs_indices = np.asarray(obs_indices)
    values = np.asarray(stat(scheme.patterns, Y[:, None, :]), dtype=float)
    t_obs = values[np.arange(values.shape[0]), obs_indices]
    return np.count_nonzero(values >= t_obs[:, None], axis=1)
