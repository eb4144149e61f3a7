"""Weight algebras for lattice computations.

Three semirings, all over negative log probabilities:

- :class:`TropicalWeight` -- (min, +): Viterbi / shortest path.
- :class:`LogWeight` -- (logsumexp, +): marginalization.
- :class:`ExpectationWeight` -- pairs of (path mass, expected edit-operation
  counts): marginalization that simultaneously accumulates the sufficient
  statistics needed by EM.

All weights are immutable values; operations are pure, total and safe to
use from multiple threads.  The classes are hand-rolled with __slots__
because weight construction dominates lattice runtime.
"""

from __future__ import annotations

import math
from typing import Mapping

INF = math.inf
_log1p = math.log1p
_exp = math.exp


def log_plus(a: float, b: float) -> float:
    """Stable -ln(e^-a + e^-b) for negative log inputs.

    Never overflows: the exponentiated difference is always <= 1.
    """
    if a > b:
        a, b = b, a
    if a == INF:
        return INF
    return a - _log1p(_exp(a - b))


class TropicalWeight:
    """Negative log probability under (min, +)."""

    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = value

    @classmethod
    def zero(cls) -> "TropicalWeight":
        return _TROPICAL_ZERO

    @classmethod
    def one(cls) -> "TropicalWeight":
        return _TROPICAL_ONE

    @classmethod
    def from_neglog(cls, neglog: float) -> "TropicalWeight":
        return cls(neglog)

    def plus(self, other: "TropicalWeight") -> "TropicalWeight":
        return self if self.value <= other.value else other

    def times(self, other: "TropicalWeight") -> "TropicalWeight":
        if self.value == 0.0:
            return other
        if other.value == 0.0:
            return self
        return TropicalWeight(self.value + other.value)

    def is_zero(self) -> bool:
        return self.value == INF

    @property
    def neglog(self) -> float:
        return self.value

    def __eq__(self, other) -> bool:
        return isinstance(other, TropicalWeight) and self.value == other.value

    def __hash__(self) -> int:
        return hash(("tropical", self.value))

    def __repr__(self) -> str:
        return f"TropicalWeight({self.value!r})"


class LogWeight:
    """Negative log probability under (logsumexp, +)."""

    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = value

    @classmethod
    def zero(cls) -> "LogWeight":
        return _LOG_ZERO

    @classmethod
    def one(cls) -> "LogWeight":
        return _LOG_ONE

    @classmethod
    def from_neglog(cls, neglog: float) -> "LogWeight":
        return cls(neglog)

    def plus(self, other: "LogWeight") -> "LogWeight":
        a, b = self.value, other.value
        if a > b:
            a, b = b, a
        if a == INF:
            return _LOG_ZERO
        return LogWeight(a - _log1p(_exp(a - b)))

    def times(self, other: "LogWeight") -> "LogWeight":
        if self.value == 0.0:
            return other
        if other.value == 0.0:
            return self
        return LogWeight(self.value + other.value)

    def is_zero(self) -> bool:
        return self.value == INF

    @property
    def neglog(self) -> float:
        return self.value

    def __eq__(self, other) -> bool:
        return isinstance(other, LogWeight) and self.value == other.value

    def __hash__(self) -> int:
        return hash(("log", self.value))

    def __repr__(self) -> str:
        return f"LogWeight({self.value!r})"


class ExpectationWeight:
    """Path mass plus expected edit-operation counts.

    Semantically a pair (p, v): p is the total mass of a bundle of paths
    (kept as a negative log), v maps edit-op ids to the mass-weighted count
    sums over those paths.  Internally v is stored divided by the mass (the
    conditional expectation E[count | bundle], field ``counts``).  That
    keeps every stored number bounded by path length, so nothing underflows
    even when the mass itself drops below the smallest positive double; the
    two encodings are algebraically interchangeable.

    For a complete lattice total, ``counts`` therefore *is* the vector of
    normalized expected counts the E-step wants.
    """

    __slots__ = ("p", "counts")

    def __init__(self, p: float, counts: Mapping[int, float] = {}):
        self.p = p
        self.counts = counts

    @classmethod
    def zero(cls) -> "ExpectationWeight":
        return _EXP_ZERO

    @classmethod
    def one(cls) -> "ExpectationWeight":
        return _EXP_ONE

    @classmethod
    def from_neglog(cls, neglog: float) -> "ExpectationWeight":
        return cls(neglog)

    @classmethod
    def from_vector(cls, p: float, v: Mapping[int, float]) -> "ExpectationWeight":
        """Build from the raw (mass, mass-weighted counts) pair."""
        if p == INF:
            return _EXP_ZERO
        mass = _exp(-p)
        return cls(p, {k: x / mass for k, x in v.items() if x != 0.0})

    def vector(self) -> dict[int, float]:
        """The raw mass-weighted count vector v = counts * e^-p."""
        if self.p == INF:
            return {}
        mass = _exp(-self.p)
        return {k: x * mass for k, x in self.counts.items() if x != 0.0}

    def plus(self, other: "ExpectationWeight") -> "ExpectationWeight":
        a, b = self.p, other.p
        if a == INF:
            return other
        if b == INF:
            return self
        if a > b:
            lo, hi = b, a
        else:
            lo, hi = a, b
        total = lo - _log1p(_exp(lo - hi))
        # Convex combination of the per-mass expectations, weighted by the
        # relative masses; both factors are <= 1 so nothing overflows.  A
        # side whose weight is below 1e-30 cannot move any count visibly,
        # so the dominant side's vector is reused as is.
        w1 = _exp(total - a)
        w2 = _exp(total - b)
        if w2 < 1e-30:
            if w1 == 1.0:
                return ExpectationWeight(total, self.counts)
            counts = {k: w1 * x for k, x in self.counts.items()}
            return ExpectationWeight(total, counts)
        if w1 < 1e-30:
            if w2 == 1.0:
                return ExpectationWeight(total, other.counts)
            counts = {k: w2 * x for k, x in other.counts.items()}
            return ExpectationWeight(total, counts)
        counts = {k: w1 * x for k, x in self.counts.items()}
        for k, x in other.counts.items():
            y = counts.get(k, 0.0) + w2 * x
            if y != 0.0:
                counts[k] = y
        return ExpectationWeight(total, counts)

    def times(self, other: "ExpectationWeight") -> "ExpectationWeight":
        sp, op = self.p, other.p
        if sp == INF or op == INF:
            return _EXP_ZERO
        if sp == 0.0 and not self.counts:
            return other
        if op == 0.0 and not other.counts:
            return self
        if not other.counts:
            counts = self.counts
        elif not self.counts:
            counts = other.counts
        else:
            counts = dict(self.counts)
            for k, x in other.counts.items():
                counts[k] = counts.get(k, 0.0) + x
        return ExpectationWeight(sp + op, counts)

    def is_zero(self) -> bool:
        return self.p == INF

    @property
    def neglog(self) -> float:
        return self.p

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExpectationWeight):
            return NotImplemented
        if self.p == INF and other.p == INF:
            return True
        return self.p == other.p and dict(self.counts) == dict(other.counts)

    def __repr__(self) -> str:
        return f"ExpectationWeight(p={self.p!r}, counts={dict(self.counts)!r})"


_TROPICAL_ZERO = TropicalWeight(INF)
_TROPICAL_ONE = TropicalWeight(0.0)
_LOG_ZERO = LogWeight(INF)
_LOG_ONE = LogWeight(0.0)
_EXP_ZERO = ExpectationWeight(INF)
_EXP_ONE = ExpectationWeight(0.0)


def arc_weight_with_basis(op_id: int, neg_log_p: float) -> ExpectationWeight:
    """Expectation weight for one emission arc: mass e^-neg_log_p and a basis
    vector marking one traversal of edit operation ``op_id``."""
    if neg_log_p == INF:
        return _EXP_ZERO
    return ExpectationWeight(neg_log_p, {op_id: 1.0})
