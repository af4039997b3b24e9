"""Complex numbers carried as (log-magnitude, phase).

Kernel values at the spectral edge involve factors like ``exp(-n z)`` with
``n`` up to 1e16, far outside the range of a double.  Internally the
vectorised code passes around *complex logarithms* ``L = log|v| + i arg v``;
``ScaledComplex`` is the scalar, user-facing wrapper of one such number.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def reduce_phase(phase):
    """Map a phase (scalar or array) into (-pi, pi]."""
    p = np.remainder(np.asarray(phase, dtype=float) + math.pi, TWO_PI) - math.pi
    p = np.where(p == -math.pi, math.pi, p)
    return p if p.ndim else float(p)


def log_add(a, b):
    """Complex log of ``exp(a) + exp(b)`` without overflow."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    swap = a.real < b.real
    hi = np.where(swap, b, a)
    lo = np.where(swap, a, b)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        out = hi + np.log1p(np.exp(lo - hi))
    out = np.where(np.isneginf(hi.real), lo, out)
    return out if out.ndim else complex(out)


def log_one_plus(a):
    """Complex log of ``1 + exp(a)``."""
    return log_add(np.zeros_like(np.asarray(a, dtype=complex)), a)


def log_one_minus(a):
    """Complex log of ``1 - exp(a)``."""
    return log_add(np.zeros_like(np.asarray(a, dtype=complex)), np.asarray(a, dtype=complex) + 1j * math.pi)


@dataclass(frozen=True)
class ScaledComplex:
    """A complex value ``exp(log_abs) * exp(1j * phase)``.

    ``log_abs`` may be ``-inf`` (the value zero).  The phase is always kept
    reduced to (-pi, pi].
    """

    log_abs: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "log_abs", float(self.log_abs))
        object.__setattr__(self, "phase", reduce_phase(self.phase) if math.isfinite(self.phase) else 0.0)

    @classmethod
    def from_log(cls, log_value: complex) -> "ScaledComplex":
        log_value = complex(log_value)
        return cls(log_value.real, log_value.imag)

    @classmethod
    def from_complex(cls, value: complex) -> "ScaledComplex":
        value = complex(value)
        if value == 0:
            return cls(-math.inf, 0.0)
        # numpy here: abs() and cmath.phase raise on subnormal parts
        return cls(math.log(np.hypot(value.real, value.imag)), float(np.arctan2(value.imag, value.real)))

    @property
    def log(self) -> complex:
        """Complex logarithm (principal phase)."""
        return complex(self.log_abs, self.phase)

    @property
    def value(self) -> complex:
        """The plain complex value; overflows to inf if out of range."""
        if self.log_abs == -math.inf:
            return 0j
        with np.errstate(over="ignore"):
            return complex(np.exp(self.log))

    @property
    def abs(self) -> float:
        return math.exp(self.log_abs) if self.log_abs < 709.0 else math.inf

    @property
    def is_zero(self) -> bool:
        return self.log_abs == -math.inf

    def conjugate(self) -> "ScaledComplex":
        return ScaledComplex(self.log_abs, -self.phase)

    def __mul__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        return ScaledComplex(self.log_abs + other.log_abs, self.phase + other.phase)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        if other.is_zero:
            raise ZeroDivisionError("division by a zero ScaledComplex")
        return ScaledComplex(self.log_abs - other.log_abs, self.phase - other.phase)

    def __neg__(self):
        return ScaledComplex(self.log_abs, self.phase + math.pi)

    def __add__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return ScaledComplex.from_log(log_add(self.log, other.log))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        return self + (-other)

    def isclose(self, other, rel: float = 1e-12) -> bool:
        """Relative closeness ``|a - b| <= rel * max(|a|, |b|)``."""
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        scale = max(self.log_abs, other.log_abs)
        a = cmath.exp(complex(self.log_abs - scale, self.phase))
        b = cmath.exp(complex(other.log_abs - scale, other.phase))
        return abs(a - b) <= rel

    def to_json(self) -> dict:
        return {"log_abs": self.log_abs, "phase": self.phase}
