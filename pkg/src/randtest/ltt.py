"""The tea-tasting experiment: ``2m`` cups, ``m`` prepared milk-first.

The experimenter's true order ``truth`` is drawn uniformly from the
``C(2m, m)`` balanced patterns; the taster's ``guess`` is scored by the number
of milk-first cups identified. Milk-first is coded as 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from .engine import TestReport, randomization_pvalue, randomization_test
from .schemes import as_pattern, ltt_scheme
from .statistics import StatisticSpec, stat_fisher_match

__all__ = [
    "LttOutcome",
    "ltt_count_distribution",
    "ltt_level_table",
    "ltt_run",
    "ltt_run_free_guess",
    "ltt_outcome",
]

FISHER_MATCH = StatisticSpec("fisher_match")


def ltt_count_distribution(m: int) -> list[int]:
    """Number of true orders giving exactly ``j`` correct picks, for ``j = 0..m``.

    ``count(j) = C(m, j) * C(m, m - j)``; the counts sum to ``C(2m, m)``.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    return [comb(m, j) * comb(m, m - j) for j in range(m + 1)]


def ltt_level_table(m: int) -> dict[int, Fraction]:
    """Exact level of the rule "reject if at least ``j`` picks are correct"."""
    counts = ltt_count_distribution(m)
    total = comb(2 * m, m)
    return {j: Fraction(sum(counts[j:]), total) for j in range(m + 1)}


@dataclass(frozen=True)
class LttOutcome:
    m: int
    correct_milk_first: int
    p_value: Fraction
    level_table: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "correct_milk_first": self.correct_milk_first,
            "p_value": {"num": self.p_value.numerator, "den": self.p_value.denominator},
            "level_table": {
                str(j): {"num": f.numerator, "den": f.denominator}
                for j, f in self.level_table.items()
            },
        }


def _cups(truth, guess):
    truth = as_pattern(truth)
    guess = as_pattern(guess)
    if truth.size != guess.size:
        raise ValueError(f"truth has {truth.size} cups but guess has {guess.size}")
    if truth.size % 2:
        raise ValueError("the experiment needs an even number of cups")
    return truth, guess, truth.size // 2


def ltt_run(truth, guess, alpha) -> TestReport:
    """Test a taster who knows there are ``m`` cups of each kind.

    Both ``truth`` and ``guess`` must mark exactly ``m`` of the ``2m`` cups.
    """
    truth, guess, m = _cups(truth, guess)
    if int(guess.sum()) != m:
        raise ValueError(
            f"guess marks {int(guess.sum())} cups but the taster was told there are {m}; "
            "use ltt_run_free_guess for unrestricted guesses"
        )
    return randomization_test(ltt_scheme(m), truth, guess, FISHER_MATCH, alpha)


def ltt_run_free_guess(truth, guess, alpha) -> TestReport:
    """Test a taster whose guess may mark any number of cups.

    The reference set is still the experimenter's ``C(2m, m)`` balanced
    orders; only the truth is randomized, so the level is unaffected by how
    the guess was formed.
    """
    truth, guess, m = _cups(truth, guess)
    return randomization_test(ltt_scheme(m), truth, guess, FISHER_MATCH, alpha)


def ltt_outcome(truth, guess) -> LttOutcome:
    truth, guess, m = _cups(truth, guess)
    return LttOutcome(
        m=m,
        correct_milk_first=int(stat_fisher_match(truth, guess)),
        p_value=randomization_pvalue(ltt_scheme(m), truth, guess, FISHER_MATCH),
        level_table=ltt_level_table(m),
    )
