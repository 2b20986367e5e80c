"""Input laws for the matrix entries and the counter-based uniform stream.

Every draw is a pure function of ``(seed, n, replicate, coordinate)``: the
Philox key holds ``(seed, n)``, the replicate index sits in the third counter
word, and coordinate ``c`` consumes raw outputs ``2c`` and ``2c + 1``.  No
generator state is shared, so scheduling cannot change the samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

U64 = 2**64
VERIFY_SAMPLES = 10**6
VERIFY_SIGMAS = 5.0


def counter_uniforms(seed: int, n: int, replicate: int, count: int) -> np.ndarray:
    """``count`` pairs of uniforms on the open interval (0, 1); shape ``(count, 2)``."""
    if not 0 <= seed < U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    key = np.array([seed, n], dtype=np.uint64)
    counter = np.array([0, 0, replicate, 0], dtype=np.uint64)
    raw = np.random.Philox(key=key, counter=counter).random_raw(2 * count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return u.reshape(count, 2)


def _gaussian(u: np.ndarray) -> np.ndarray:
    return np.sqrt(-2.0 * np.log(u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])


def _rademacher(u: np.ndarray) -> np.ndarray:
    return np.where(u[:, 0] < 0.5, -1.0, 1.0)


def _uniform(u: np.ndarray) -> np.ndarray:
    return math.sqrt(3.0) * (2.0 * u[:, 0] - 1.0)


# P(X = high) solves p(1-p) = 1/9, which makes E X^4 = 1/(p(1-p)) - 3 = 6
_TWO_POINT_P = (1.0 - math.sqrt(5.0) / 3.0) / 2.0
_TWO_POINT_HIGH = math.sqrt((1.0 - _TWO_POINT_P) / _TWO_POINT_P)
_TWO_POINT_LOW = -math.sqrt(_TWO_POINT_P / (1.0 - _TWO_POINT_P))


def _two_point(u: np.ndarray) -> np.ndarray:
    return np.where(u[:, 0] < _TWO_POINT_P, _TWO_POINT_HIGH, _TWO_POINT_LOW)


@dataclass(frozen=True)
class InputLaw:
    """A mean-zero, unit-variance law with all moments finite.

    ``sampler`` maps an array of uniform pairs, shape ``(m, 2)``, to ``m`` draws.
    """

    name: str
    sampler: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    fourth_moment: float
    moment_bound_note: str = ""

    def sample(self, seed: int, n: int, replicate: int, count: int) -> np.ndarray:
        return self.sampler(counter_uniforms(seed, n, replicate, count))


@dataclass(frozen=True)
class MomentCheck:
    name: str
    order: int
    estimate: float
    target: float
    stderr: float

    @property
    def passed(self) -> bool:
        return abs(self.estimate - self.target) <= VERIFY_SIGMAS * self.stderr


def verify_law(law: InputLaw, samples: int = VERIFY_SAMPLES, seed: int = 0) -> list[MomentCheck]:
    """Estimate ``E X``, ``E X^2`` and ``E X^4`` from ``samples`` draws."""
    x = law.sample(seed, 0, 0, samples)
    checks = []
    for order, target in ((1, 0.0), (2, 1.0), (4, law.fourth_moment)):
        y = x**order
        checks.append(
            MomentCheck(law.name, order, float(y.mean()), target, float(y.std() / math.sqrt(samples)))
        )
    return checks


LAWS: dict[str, InputLaw] = {}


def register_law(law: InputLaw, verify: bool = True) -> InputLaw:
    if verify:
        bad = [c for c in verify_law(law) if not c.passed]
        if bad:
            raise ValueError(f"law {law.name!r} fails its moment checks: {bad}")
    LAWS[law.name] = law
    return law


def get_law(name: str) -> InputLaw:
    try:
        return LAWS[name]
    except KeyError:
        raise ValueError(f"unknown input law {name!r}; known: {sorted(LAWS)}") from None


for _law in (
    InputLaw("gaussian", _gaussian, 3.0, "all absolute moments finite"),
    InputLaw("rademacher", _rademacher, 1.0, "bounded by 1"),
    InputLaw("uniform", _uniform, 9.0 / 5.0, "bounded by sqrt(3)"),
    InputLaw("two_point", _two_point, 6.0, "bounded; asymmetric, E X^3 != 0"),
):
    register_law(_law)
