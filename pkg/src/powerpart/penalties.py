"""Penalty encodings that turn linear constraints into QUBO terms.

Three encodings are provided:

* ``equality_penalty``: ``(a.x - b)**2``.
* ``inequality_penalty``: the real-valued approximate encoding
  ``(alpha_K (a.x - c) - sum_i 2**i z_i)**2`` with ``alpha_K = (2**K - 1/2) / (b - c)``.
  A binary ``x`` satisfies ``a.x <= b`` exactly when some slack ``z`` brings
  the penalty to at most 1/4.
* ``integer_slack_penalty``: exact encoding for integer data.

``degree_reduction`` adds the pairwise gadget ``M(x_i, x_j, z)``.
``min_slack_value`` solves the slack sub-problem in closed form.
"""

from __future__ import annotations

import math
from collections.abc import Hashable, Sequence
from dataclasses import dataclass

import numpy as np

from .qubo import QuadraticModel

__all__ = [
    "MAX_SLACK_BITS",
    "DegenerateRangeError",
    "ParameterError",
    "AliasingError",
    "LinearConstraint",
    "SlackEncoding",
    "lower_bound",
    "equality_penalty",
    "inequality_penalty",
    "integer_slack_penalty",
    "degree_reduction",
    "min_slack_value",
    "min_slack_values",
]

# Slack scale grows like 2**K; beyond this the squared coefficients lose
# too much float64 precision to be trusted.
MAX_SLACK_BITS = 20


class DegenerateRangeError(ValueError):
    """The constraint range ``b - c`` is empty or too small to encode."""


class ParameterError(ValueError):
    """An encoding parameter (such as K) is out of range."""


class AliasingError(ValueError):
    """A variable meant to be fresh already carries terms."""


@dataclass(frozen=True)
class LinearConstraint:
    variables: tuple
    coefficients: tuple
    bound: float
    sense: str = "<="

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.variables) != len(self.coefficients):
            raise ValueError("variables and coefficients differ in length")
        if self.sense not in ("==", "<="):
            raise ValueError(f"sense must be '==' or '<=', got {self.sense!r}")
        if not all(math.isfinite(c) for c in self.coefficients):
            raise ValueError("coefficients must be finite")
        if not any(c != 0.0 for c in self.coefficients):
            raise ValueError("constraint needs at least one nonzero coefficient")

    def lhs(self, x) -> float:
        return float(np.dot(self.coefficients, np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class SlackEncoding:
    """K slack bits mapping ``[lower, bound]`` onto ``[0, 2**K - 1/2]``."""

    K: int
    lower: float
    bound: float

    def __post_init__(self):
        if not (isinstance(self.K, (int, np.integer)) and 1 <= self.K <= MAX_SLACK_BITS):
            raise ParameterError(f"K must be an integer in 1..{MAX_SLACK_BITS}, got {self.K!r}")
        if not self.bound > self.lower:
            raise DegenerateRangeError(
                f"empty range: bound {self.bound!r} must exceed lower bound {self.lower!r}"
            )

    @property
    def alpha(self) -> float:
        return (2.0**self.K - 0.5) / (self.bound - self.lower)

    @property
    def max_slack(self) -> int:
        return 2**self.K - 1

    def scaled(self, raw):
        return self.alpha * (np.asarray(raw, dtype=float) - self.lower)


def lower_bound(a) -> float:
    """Minimum of ``a.x`` over binary ``x``: the sum of the negative entries."""
    a = np.asarray(a, dtype=float)
    return float(a[a < 0].sum())


def equality_penalty(constraint: LinearConstraint, model: QuadraticModel, scale: float = 1.0):
    if constraint.sense != "==":
        raise ValueError("equality_penalty needs an equality constraint")
    model.add_squared(
        zip(constraint.coefficients, constraint.variables), -constraint.bound, scale
    )


def _slack_names(slack_names, prefix, count):
    if slack_names is None:
        return [(prefix, i) for i in range(count)]
    names = list(slack_names)
    if len(names) != count:
        raise ValueError(f"need {count} slack names, got {len(names)}")
    return names


def inequality_penalty(
    constraint: LinearConstraint,
    K: int,
    model: QuadraticModel,
    slack_names: Sequence[Hashable] | None = None,
    scale: float = 1.0,
) -> SlackEncoding:
    """Add the approximate penalty for ``a.x <= b`` using ``K`` fresh slack bits.

    Slack bits are registered in ``model.registry`` (under ``slack_names`` or
    ``("slack", i)``).  Returns the encoding so callers can reproduce the
    scaled residual.
    """
    if constraint.sense != "<=":
        raise ValueError("inequality_penalty needs an at-most constraint")
    enc = SlackEncoding(K, lower_bound(constraint.coefficients), constraint.bound)
    names = _slack_names(slack_names, "slack", K)
    for name in names:
        model.registry.add(name)
    alpha = enc.alpha
    terms = [(alpha * a, v) for a, v in zip(constraint.coefficients, constraint.variables)]
    terms += [(-(2.0**i), z) for i, z in enumerate(names)]
    model.add_squared(terms, -alpha * enc.lower, scale)
    return enc


def _is_integral(value: float) -> bool:
    return float(value).is_integer()


def integer_slack_bits(span: int) -> tuple[int, list[int]]:
    """Number of slack bits and their weights for an exact range ``0..span``.

    Bits ``0..I-2`` carry ``2**i``; the top bit carries ``span - 2**(I-1) + 1``
    so that the reachable set is exactly ``{0, ..., span}``.
    """
    if span < 1:
        raise DegenerateRangeError(f"integer range {span} is below 1")
    I = 0
    while 2**I - 1 < span:
        I += 1
    weights = [2**i for i in range(I - 1)] + [span - 2 ** (I - 1) + 1]
    return I, weights


def integer_slack_penalty(
    constraint: LinearConstraint,
    model: QuadraticModel,
    slack_names: Sequence[Hashable] | None = None,
    scale: float = 1.0,
) -> list[int]:
    """Exact slack encoding of ``a.x <= b`` for integer ``a`` and ``b``.

    Returns the slack bit weights.  The penalty is zero for some slack
    assignment exactly when the constraint holds.
    """
    if constraint.sense != "<=":
        raise ValueError("integer_slack_penalty needs an at-most constraint")
    if not (all(_is_integral(a) for a in constraint.coefficients) and _is_integral(constraint.bound)):
        raise ValueError("integer_slack_penalty needs integer data; use inequality_penalty")
    c = lower_bound(constraint.coefficients)
    span = int(constraint.bound - c)
    if constraint.bound < c:
        raise DegenerateRangeError("bound below the lower bound of a.x: constraint infeasible")
    I, weights = integer_slack_bits(span)
    names = _slack_names(slack_names, "islack", I)
    for name in names:
        model.registry.add(name)
    terms = list(zip(constraint.coefficients, constraint.variables))
    terms += [(-float(w), z) for w, z in zip(weights, names)]
    model.add_squared(terms, -c, scale)
    return weights


def degree_reduction(model: QuadraticModel, xi, xj, z, scale: float = 1.0, check_fresh: bool = True):
    """Add ``scale * (x_i x_j - 2 z (x_i + x_j) + 3 z)``; zero iff ``z == x_i x_j``."""
    if xi == xj:
        raise ValueError("degree reduction needs two distinct variables")
    if z in (xi, xj):
        raise AliasingError(f"{z!r} cannot stand for a product it is part of")
    if z not in model.registry:
        model.registry.add(z)
    elif check_fresh and model.has_terms(z):
        raise AliasingError(f"{z!r} already appears in the model")
    model.add_term(scale, xi, xj)
    model.add_term(-2.0 * scale, z, xi)
    model.add_term(-2.0 * scale, z, xj)
    model.add_term(3.0 * scale, z)


def min_slack_values(scaled, K: int):
    """Vectorised closed-form slack minimisation.

    For a scaled residual ``s`` the best slack integer is ``s`` rounded
    half-to-even and clamped to ``[0, 2**K - 1]``.
    """
    s = np.asarray(scaled, dtype=float)
    zhat = np.clip(np.rint(s), 0, 2**K - 1)
    return zhat.astype(np.int64), (s - zhat) ** 2


def min_slack_value(encoding: SlackEncoding, raw: float) -> tuple[int, float]:
    zhat, pen = min_slack_values(encoding.scaled(raw), encoding.K)
    return int(zhat), float(pen)
