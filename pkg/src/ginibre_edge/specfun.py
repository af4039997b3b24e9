"""Special functions behind the Ginibre kernels.

The central object is the regularised upper incomplete gamma ratio

    Q(n, n*zeta) = Gamma(n, n*zeta) / Gamma(n),

for integer ``n`` and complex ``zeta`` close to the positive real axis.  Three
backends are provided:

``direct_sum``
    the exact identity ``Q(n, x) = exp(-x) * sum_{l<n} x**l / l!`` evaluated by
    a Horner recursion (or through the complementary series when ``|x| < n``);
    only offered for ``n <= DIRECT_SUM_CUTOFF``.
``bulk_asymptotic``
    the uniform expansion in terms of ``erfc(sqrt(n) * mu(zeta))`` with
    ``mu(zeta) = sqrt(zeta - log(zeta) - 1)``, used when ``n|zeta-1|^2`` is
    small.
``saddle_asymptotic``
    the saddle point form ``exp(-n f(w)) / (sqrt(2 pi n) w)`` with
    ``w = zeta - 1`` and ``f(w) = w - log(1 + w)``, used when ``n|zeta-1|^2``
    is large.

All asymptotic formulas take ``w = zeta - 1`` as their argument so that
callers working at ``n ~ 1e16`` never form ``1 + tiny`` in floating point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .scaled import ScaledComplex, log_add, log_one_minus, log_one_plus

__all__ = [
    "DIRECT_SUM_CUTOFF",
    "SADDLE_THRESHOLD",
    "ERROR_CONSTANT",
    "DomainError",
    "RegimeError",
    "GammaRatioResult",
    "erfc",
    "erfc_scaled",
    "mu",
    "incgamma_ratio",
    "xmlog1p",
    "mu_from_offset",
    "log_gamma_ratio_direct",
    "log_gamma_ratio_asymptotic",
    "gamma_ratio_leading",
]

DIRECT_SUM_CUTOFF = 100_000
SADDLE_THRESHOLD = 64.0
ERROR_CONSTANT = 10.0

_SQRT2 = math.sqrt(2.0)
_SERIES_RADIUS = 0.2
_SERIES_TERMS = 32


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class RegimeError(ValueError):
    """No evaluation backend is valid for the requested arguments."""


@dataclass(frozen=True)
class GammaRatioResult:
    value: ScaledComplex
    backend: str
    est_rel_error: float


def erfc(x: float) -> float:
    """Complementary error function of a real argument."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"erfc needs a finite argument, got {x}")
    return float(special.erfc(x))


def erfc_scaled(z: complex) -> ScaledComplex:
    """``exp(z**2) * erfc(z)`` for ``|arg z| < 3 pi / 4``."""
    z = complex(z)
    if z != 0 and abs(cmath.phase(z)) >= 0.75 * math.pi:
        raise DomainError(f"erfc_scaled requires |arg z| < 3pi/4, got arg={cmath.phase(z):.4f}")
    return ScaledComplex.from_complex(complex(special.erfcx(z)))


def xmlog1p(w):
    """``w - log(1 + w)`` accurate for small complex ``w``."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < _SERIES_RADIUS
    # sum_{k>=2} (-1)^k w^k / k, Horner in w starting from the top term
    acc = np.zeros_like(w)
    for k in range(_SERIES_TERMS, 1, -1):
        acc = acc * w + ((-1.0) ** k) / k
    series = acc * w * w
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = w - np.log1p(w)
    out = np.where(small, series, direct)
    return out if out.ndim else complex(out)


def _ratio_minus_one_over_w(w):
    """``(r - 1) / w`` with ``r = 2 (w - log(1+w)) / w**2``."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < _SERIES_RADIUS
    # 2 * sum_{k>=3} (-1)^k w^{k-3} / k
    acc = np.zeros_like(w)
    for k in range(_SERIES_TERMS + 3, 2, -1):
        acc = acc * w + ((-1.0) ** k) / k
    series = 2.0 * acc
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (2.0 * xmlog1p(w) / (w * w) - 1.0) / w
    return np.where(small, series, direct)


def mu_from_offset(w):
    """``mu(1 + w)`` on the branch with ``mu(1 + w) = w / sqrt(2) + O(w^2)``."""
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 1.0 + w * _ratio_minus_one_over_w(w)
    out = w * np.sqrt(r) / _SQRT2
    return out if out.ndim else complex(out)


def mu(zeta: complex) -> complex:
    """``sqrt(zeta - Log zeta - 1)`` on the branch analytic at ``zeta = 1``.

    The branch satisfies ``mu(1 + w) = w / sqrt(2) + O(|w|^2)``; in
    particular ``mu(t) < 0`` for real ``0 < t < 1``.
    """
    zeta = complex(zeta)
    if zeta.imag == 0 and zeta.real <= 0:
        raise DomainError(f"mu is undefined on (-inf, 0], got {zeta}")
    return complex(mu_from_offset(zeta - 1.0))


def _c0(w):
    """First Temme coefficient ``1/w - 1/(sqrt(2) mu(1+w))``, regular at 0."""
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = _ratio_minus_one_over_w(w)
        sr = np.sqrt(1.0 + w * q)
        return q / (sr * (sr + 1.0))


def _erfc_side(u):
    """True on the half plane ``Re u >= 0``, where ``erfc(u)`` has no
    constant term.  For ``pi/2 < |arg u| < 3pi/4`` the term ``2`` in
    ``erfc(u) = 2 - erfc(-u)`` is subdominant but not negligible, so the
    reflected form is used there."""
    return np.real(u) >= 0


def log_gamma_ratio_asymptotic(n: float, w, backend: str = "auto"):
    """Complex log of ``Q(n, n(1+w))`` from the uniform asymptotics.

    Parameters
    ----------
    n : float
        Size parameter (need not be integral).
    w : array_like of complex
        Offset ``zeta - 1``; ``Re(1 + w) > 0`` is assumed.
    backend : {"auto", "bulk", "saddle"}
        ``auto`` picks ``saddle`` where ``n|w|^2 >= SADDLE_THRESHOLD``.

    Returns
    -------
    logq : ndarray of complex
    saddle : ndarray of bool
        Which entries used the saddle form.
    """
    w = np.asarray(w, dtype=complex)
    n = float(n)
    nf = n * xmlog1p(w)  # = n mu^2
    if backend == "auto":
        saddle = n * np.abs(w) ** 2 >= SADDLE_THRESHOLD
    elif backend in ("saddle", "saddle_asymptotic"):
        saddle = np.ones(w.shape, dtype=bool)
    elif backend in ("bulk", "bulk_asymptotic"):
        saddle = np.zeros(w.shape, dtype=bool)
    else:
        raise ValueError(f"unknown asymptotic backend {backend!r}")

    u = math.sqrt(n) * mu_from_offset(w)
    direct_side = _erfc_side(u) | (u == 0)
    norm = 1.0 / math.sqrt(2.0 * math.pi * n)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # saddle: Q ~ [1 +] exp(-n f) / (sqrt(2 pi n) w)
        log_sad = -nf + np.log(norm / np.where(w == 0, 1.0, w))
        log_sad = np.where(direct_side, log_sad, log_one_plus(log_sad))

        # bulk: Q ~ erfc(u)/2 + exp(-u^2) c0 / sqrt(2 pi n)
        c0 = _c0(w)
        uu = np.where(direct_side, u, -u)
        bracket = 0.5 * special.erfcx(uu) + np.where(direct_side, 1.0, -1.0) * c0 * norm
        log_bulk = -nf + np.log(bracket)
        log_bulk = np.where(direct_side, log_bulk, log_one_minus(log_bulk))

    return np.where(saddle, log_sad, log_bulk), saddle


def log_gamma_ratio_direct(n: int, x):
    """Complex log of ``exp(-x) sum_{l<n} x^l / l!`` by exact summation.

    ``x`` is the full argument ``n * zeta`` (array_like of complex).
    Cost is ``O(n)`` vectorised passes.
    """
    n = int(n)
    x = np.asarray(x, dtype=complex)
    if n == 1:
        return -x
    out = np.empty(x.shape, dtype=complex)
    ax = np.abs(x)
    top = ax >= n - 1
    lg = math.lgamma(n)

    if np.any(top):
        xt = x[top]
        h = np.ones_like(xt)
        for j in range(1, n):
            h = 1.0 + (j / xt) * h
        with np.errstate(divide="ignore", invalid="ignore"):
            out[top] = -xt + (n - 1) * np.log(xt) - lg + np.log(h)

    bot = ~top
    if np.any(bot):
        xb = x[bot]
        term = np.ones_like(xb)
        s = np.ones_like(xb)
        k = 1
        while True:
            term = term * xb / (n + k)
            s = s + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(s)) or k > 100 * n + 1000:
                break
            k += 1
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = n * np.log(xb) - xb - math.lgamma(n + 1) + np.log(s)
        logp = np.where(xb == 0, -np.inf, logp)
        out[bot] = log_one_minus(logp)
    return out


def gamma_ratio_leading(n: int, zeta: complex) -> complex:
    """Leading erfc form ``zeta mu erfc(sqrt(n) mu) / (sqrt(2) (zeta - 1))``.

    Kept for comparison with the refined bulk backend; its relative error is
    ``O(|zeta - 1| + 1/sqrt(n))``.
    """
    zeta = complex(zeta)
    w = zeta - 1.0
    if w == 0:
        return 0.5 + 0j
    m = mu(zeta)
    return complex(zeta * m * special.erfc(math.sqrt(n) * m) / (_SQRT2 * w))


def incgamma_ratio(n: int, zeta: complex, backend: str | None = None) -> GammaRatioResult:
    """``Gamma(n, n zeta) / Gamma(n)`` with the backend recorded.

    ``backend=None`` uses ``direct_sum`` for ``n <= DIRECT_SUM_CUTOFF`` and the
    asymptotic forms otherwise.  Asymptotic backends require ``Re zeta > 0``.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    n = int(n)
    zeta = complex(zeta)
    if zeta == 0:
        return GammaRatioResult(ScaledComplex(0.0, 0.0), "direct_sum", 0.0)

    if backend is None:
        backend = "direct_sum" if n <= DIRECT_SUM_CUTOFF else "asymptotic"

    if backend == "direct_sum":
        if n > DIRECT_SUM_CUTOFF:
            raise RegimeError(f"direct_sum is capped at n <= {DIRECT_SUM_CUTOFF}, got n={n}")
        x = n * zeta
        logq = complex(log_gamma_ratio_direct(n, np.array([x]))[0])
        err = 1e-15 * (n + abs(x))
        return GammaRatioResult(ScaledComplex.from_log(logq), "direct_sum", err)

    if zeta.real <= 0:
        raise RegimeError(f"asymptotic backends need Re(zeta) > 0, got {zeta}")
    w = zeta - 1.0
    nw2 = n * abs(w) ** 2
    if backend == "asymptotic":
        mode = "saddle" if nw2 >= SADDLE_THRESHOLD else "bulk"
    elif backend in ("bulk_asymptotic", "saddle_asymptotic"):
        mode = backend.split("_")[0]
    else:
        raise ValueError(f"unknown backend {backend!r}")
    logq, _ = log_gamma_ratio_asymptotic(n, np.array([w]), mode)
    if mode == "saddle":
        err = ERROR_CONSTANT / max(1.0, nw2)
    else:
        err = ERROR_CONSTANT / n
    return GammaRatioResult(ScaledComplex.from_log(complex(logq[0])), f"{mode}_asymptotic", err)
