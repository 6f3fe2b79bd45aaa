"""Monte Carlo size and power of randomization tests under two designs.

Each replication draws an assignment from the design, draws responses from
the outcome model (shifted by ``effect`` for treated units under the
alternative), and computes the exact enumeration p-value. Every
(test, arm, replication) triple has its own Philox stream keyed by
``SeedSequence(seed, spawn_key=(test, arm, replication))``, so results do not
depend on chunking or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from .engine import as_level, min_pvalue, pvalue_counts, rejection_count
from .exceptions import EnumerationError
from .schemes import RandomizationScheme, scheme_from_name
from .statistics import StatisticSpec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "SimConfig",
    "SimRow",
    "SimTable",
    "ResolutionSummary",
    "simulate",
    "resolution_report",
    "alpha_label",
    "PAPER_ALPHAS",
]

NULL, ALTERNATIVE = 0, 1
CHUNK = 1000
PAPER_ALPHAS = ("1/254", "0.005", "0.01", "0.02", "0.05")
NULL_MODELS = ("halfnormal", "normal")


def alpha_label(a: Fraction) -> str:
    """Render a level as a decimal when it terminates, else as ``num/den``."""
    den = a.denominator
    for p in (2, 5):
        while den % p == 0:
            den //= p
    if den == 1:
        return format(Decimal(a.numerator) / Decimal(a.denominator), "f")
    return f"{a.numerator}/{a.denominator}"


@dataclass(frozen=True)
class SimConfig:
    """One simulation experiment; the defaults reproduce the n=8 study."""

    n: int = 8
    scheme_a: str = "forced-balance"
    scheme_b: str = "bernoulli-nc"
    effect: float = 2.0
    null_model: str = "halfnormal"
    alpha_grid: tuple = PAPER_ALPHAS
    replications: int = 10_000
    seed: int = 0
    statistic: str = "centered-diff"
    stratum: str | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.null_model not in NULL_MODELS:
            raise ValueError(f"null_model must be one of {NULL_MODELS}, got {self.null_model!r}")
        alphas = [as_level(a) for a in self.alpha_grid]
        if not alphas or any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("alpha_grid must be non-empty and strictly increasing")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "alpha_grid", tuple(alpha_label(a) for a in alphas))
        StatisticSpec(self.statistic)

    @property
    def alphas(self) -> list[Fraction]:
        return [as_level(a) for a in self.alpha_grid]

    def schemes(self) -> list[RandomizationScheme]:
        return [scheme_from_name(name, self.n, self.stratum) for name in (self.scheme_a, self.scheme_b)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha_grid"] = list(self.alpha_grid)
        if d["stratum"] is None:
            del d["stratum"]
        return d

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "SimConfig":
        data = dict(data.get("simulation", data))
        data.update({k: v for k, v in overrides.items() if v is not None})
        if "alpha_grid" in data:
            data["alpha_grid"] = tuple(data["alpha_grid"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, **overrides) -> "SimConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
        return cls.from_dict(data, **overrides)


@dataclass(frozen=True)
class SimRow:
    test: str
    alpha: str
    size: float
    power: float
    se_size: float
    se_power: float


@dataclass(frozen=True)
class SimTable:
    rows: tuple
    replications: int
    config: dict = field(default_factory=dict)

    def lookup(self, test: str, alpha) -> SimRow:
        label = alpha_label(as_level(alpha))
        for row in self.rows:
            if row.test == test and row.alpha == label:
                return row
        raise KeyError((test, label))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["test", "alpha", "size", "power", "se_size", "se_power"])
        for r in self.rows:
            writer.writerow([r.test, r.alpha, repr(r.size), repr(r.power), repr(r.se_size), repr(r.se_power)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "SimTable":
        return cls(tuple(SimRow(**r) for r in d["rows"]), d["replications"], d.get("config", {}))


def _stream(seed: int, test: int, arm: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(test, arm, rep))))


def _draw_responses(rng, w, effect, null_model):
    z = rng.standard_normal(w.size)
    y = np.abs(z) if null_model == "halfnormal" else z
    return y + effect * w


def _chunk_counts(args):
    """p-value numerators for replications ``start..stop`` of one (test, arm)."""
    config, test, arm, start, stop = args
    scheme = config.schemes()[test]
    stat = StatisticSpec(config.statistic)
    effect = config.effect if arm == ALTERNATIVE else 0.0
    patterns = scheme.patterns
    obs = np.empty(stop - start, dtype=np.int64)
    Y = np.empty((stop - start, scheme.n))
    for i, rep in enumerate(range(start, stop)):
        rng = _stream(config.seed, test, arm, rep)
        obs[i] = scheme.sample_indices(rng)
        Y[i] = _draw_responses(rng, patterns[obs[i]], effect, config.null_model)
    return pvalue_counts(scheme, obs, Y, stat)


def simulate(config: SimConfig, workers: int = 1) -> SimTable:
    """Estimate size and power for both designs over ``config.alpha_grid``.

    A replication rejects at level ``alpha`` when its p-value ``c/R`` is at
    most ``alpha``. Output is bit-identical for any ``workers`` value.
    """
    schemes = config.schemes()
    for s in schemes:
        if not s.enumerable:
            raise EnumerationError(
                f"scheme {s.label!r} at n={s.n} is too large to enumerate per replication; "
                "use engine.monte_carlo_pvalue instead"
            )
        if not s.is_uniform:
            raise ValueError(f"scheme {s.label!r} is weighted; power simulation needs uniform schemes")
    reps = config.replications
    jobs = [
        (config, t, arm, start, min(start + CHUNK, reps))
        for t in range(len(schemes))
        for arm in (NULL, ALTERNATIVE)
        for start in range(0, reps, CHUNK)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_counts, jobs))
    else:
        parts = [_chunk_counts(job) for job in jobs]

    counts = {}
    for job, part in zip(jobs, parts):
        counts.setdefault((job[1], job[2]), []).append(part)

    rows = []
    for t, scheme in enumerate(schemes):
        null_c = np.concatenate(counts[(t, NULL)])
        alt_c = np.concatenate(counts[(t, ALTERNATIVE)])
        for a in config.alphas:
            cutoff = rejection_count(a, scheme.size)
            size = int(np.count_nonzero(null_c <= cutoff)) / reps
            power = int(np.count_nonzero(alt_c <= cutoff)) / reps
            rows.append(
                SimRow(
                    test=scheme.label,
                    alpha=alpha_label(a),
                    size=size,
                    power=power,
                    se_size=math.sqrt(size * (1 - size) / reps),
                    se_power=math.sqrt(power * (1 - power) / reps),
                )
            )
    return SimTable(tuple(rows), reps, config.to_dict())


@dataclass(frozen=True)
class ResolutionSummary:
    size: int
    min_pvalue: Fraction
    spacing: Fraction

    def to_dict(self) -> dict:
        return {
            "R": self.size,
            "min_pvalue": {"num": self.min_pvalue.numerator, "den": self.min_pvalue.denominator},
            "spacing": {"num": self.spacing.numerator, "den": self.spacing.denominator},
        }


def resolution_report(scheme: RandomizationScheme) -> ResolutionSummary:
    """Number of patterns, smallest p-value and grid spacing of attainable levels."""
    if not scheme.enumerable:
        raise EnumerationError(f"scheme {scheme.label!r} at n={scheme.n} is not enumerable")
    return ResolutionSummary(scheme.size, min_pvalue(scheme), Fraction(1, scheme.size))


def with_overrides(config: SimConfig, **kwargs) -> SimConfig:
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})
