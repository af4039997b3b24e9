"""Ginibre correlation kernels and the edge rescaling.

Points are handled in two ways.  The public scalar functions take absolute
complex coordinates, which is what finite-n (n <= 1e5) work needs.  The
vectorised ``log_*`` functions take *offsets* ``dz = z - 1``: at n ~ 1e16 the
edge sits at ``1 + O(1e-8)`` and forming ``z`` itself would throw away half of
the significant digits of ``|z|^2 - 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .scaled import ScaledComplex, reduce_phase
from .specfun import (
    DIRECT_SUM_CUTOFF,
    RegimeError,
    log_gamma_ratio_asymptotic,
    log_gamma_ratio_direct,
)

ENVELOPE_SAFETY = 100.0


class GammaPositivityError(ValueError):
    """The edge scale gamma_n is not positive for this n."""

    def __init__(self, n, value):
        self.n = n
        self.value = value
        super().__init__(
            f"gamma_n <= 0 for n={n:g} (gamma_n={value:.6g}); minimal n ≈ {min_gamma_positive_n():.3g}"
        )


class ValidityError(ValueError):
    """Asymptotic formula requested outside its region of validity."""


# ---------------------------------------------------------------------------
# edge scaling


def _gamma_formula(n: float) -> float:
    ln = math.log(n)
    return 0.5 * (ln - 5.0 * math.log(ln) - math.log(2.0 * math.pi**4))


@lru_cache(maxsize=None)
def min_gamma_positive_n() -> float:
    """Smallest real n above 3 at which gamma_n turns positive."""
    root = optimize.brentq(lambda s: _gamma_formula(math.exp(s)), 6.0, 60.0, xtol=1e-12)
    return math.exp(root)


def gamma_n(n: float) -> float:
    """Edge scale ``(log n - 5 log log n - log(2 pi^4)) / 2``."""
    if n < 3:
        raise ValueError(f"gamma_n needs n >= 3, got {n}")
    g = _gamma_formula(float(n))
    if g <= 0:
        raise GammaPositivityError(n, g)
    return g


def alpha_n(n: float) -> float:
    """Spectral-radius scale ``log n - 2 log log n - log(2 pi)`` (may be <= 0)."""
    ln = math.log(n)
    return ln - 2.0 * math.log(ln) - math.log(2.0 * math.pi)


def _check_t_range(n, t):
    if abs(t) > math.sqrt(math.log(n)) / 10:
        warnings.warn(
            f"|t|={abs(t):.3g} exceeds sqrt(log n)/10={math.sqrt(math.log(n)) / 10:.3g}; "
            "error terms are not uniform there",
            stacklevel=3,
        )


def edge_offset(n: float, t: float) -> float:
    """``sqrt(gamma/4n) + t/sqrt(4 gamma n)``, i.e. the edge point minus 1."""
    g = gamma_n(n)
    return math.sqrt(g / (4.0 * n)) + t / math.sqrt(4.0 * g * n)


def edge_point(n: float, t: float) -> complex:
    """Left boundary ``1 + sqrt(gamma/4n) + t/sqrt(4 gamma n)`` of A(t)."""
    _check_t_range(n, t)
    return complex(1.0 + edge_offset(n, t), 0.0)


def edge_offsets(n: float, x, y):
    """Offsets ``z - 1`` of rescaled points ``(x, y)`` (vectorised)."""
    g = gamma_n(n)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    re = math.sqrt(g / (4.0 * n)) + x / math.sqrt(4.0 * g * n)
    im = y / (g * n) ** 0.25
    return re + 1j * im


@dataclass(frozen=True)
class EdgeCoords:
    n: float
    gamma: float
    x: float
    y: float

    @property
    def offset(self) -> complex:
        return complex(edge_offsets(self.n, self.x, self.y))

    def to_plane(self) -> complex:
        return to_plane(self.n, self.x, self.y)


def to_plane(n: float, x: float, y: float) -> complex:
    """Absolute point with rescaled coordinates ``(x, y)``."""
    return 1.0 + complex(edge_offsets(n, x, y))


def rescale(n: float, z: complex) -> EdgeCoords:
    """Inverse of ``to_plane``.

    The absolute point only resolves x to about ``eps * sqrt(4 gamma n)``;
    :func:`rescale_offset` keeps full precision.
    """
    return rescale_offset(n, complex(z) - 1.0)


def rescale_offset(n: float, dz: complex) -> EdgeCoords:
    """Rescaled coordinates of the point ``1 + dz``."""
    g = gamma_n(n)
    dz = complex(dz)
    x = (dz.real - math.sqrt(g / (4.0 * n))) * math.sqrt(4.0 * g * n)
    y = dz.imag * (g * n) ** 0.25
    return EdgeCoords(n, g, x, y)


# ---------------------------------------------------------------------------
# kernel values


@dataclass(frozen=True)
class KernelValue:
    value: ScaledComplex
    kind: str
    backend: str


@dataclass(frozen=True)
class BlockKernelValue:
    entries: tuple

    def as_array(self) -> np.ndarray:
        return np.array([[e.value for e in row] for row in self.entries])


def choose_backend(n, backend=None) -> str:
    if backend is None:
        return "direct" if n <= DIRECT_SUM_CUTOFF else "asymptotic"
    if backend not in ("direct", "asymptotic"):
        raise ValueError(f"backend must be 'direct' or 'asymptotic', got {backend!r}")
    if backend == "direct" and n > DIRECT_SUM_CUTOFF:
        raise RegimeError(f"direct summation is capped at n <= {DIRECT_SUM_CUTOFF}")
    return backend


def _log_q(n, dz, dw_conj, backend, terms=None):
    """log Q(m, n z conj(w)) for offsets, with ``m = terms`` (default n)."""
    m = n if terms is None else terms
    if backend == "direct":
        zeta = (1.0 + dz) * (1.0 + dw_conj)
        return log_gamma_ratio_direct(m, n * zeta)
    w = dz + dw_conj + dz * dw_conj
    if np.any((1.0 + w).real <= 0):
        raise RegimeError("asymptotic kernel needs Re(z conj w) > 0")
    # Q(m, n(1+w)) = Q(m, m(1+w')) with w' = (n w + n - m) / m
    if m != n:
        w = (n * w + (n - m)) / m
    logq, _ = log_gamma_ratio_asymptotic(m, w)
    # reduced phase keeps log Q(conj w) = conj log Q(w) exact after the large
    # gauge phase is added
    return logq.real + 1j * reduce_phase(logq.imag)


def log_ktilde(n, dz, dw, backend=None, gauge=False):
    """Complex log of ``Ktilde_n(1+dz, 1+dw)`` (broadcasting).

    With ``gauge=True`` the unimodular factor
    ``exp(i n (Im dz - Im dw))`` is removed.  It is a diagonal similarity of
    every Nystrom matrix, so determinants and traces are unchanged, and at
    large n it is the only part of the phase that cannot be computed
    accurately.
    """
    backend = choose_backend(n, backend)
    dz, dw = np.broadcast_arrays(np.asarray(dz, dtype=complex), np.asarray(dw, dtype=complex))
    dwc = np.conj(dw)
    d = dz - dw
    w = dz + dwc + dz * dwc
    im_phase = (dz * dwc).imag if gauge else w.imag
    expo = -0.5 * n * (d.real**2 + d.imag**2) + 1j * n * im_phase
    return math.log(n / math.pi) + expo + _log_q(n, dz, dwc, backend)


def _log_erfc_abs_im(n, dz):
    """log erfc(sqrt(2n) |Im z|)."""
    a = math.sqrt(2.0 * n) * np.abs(np.imag(dz))
    return -(a**2) + np.log(special.erfcx(a))


def log_s(n, dz, dw, backend=None, terms=None):
    """Complex log of the real-Ginibre kernel ``S_n(1+dz, 1+dw)``.

    ``S_n = Phi_n * Ktilde_n`` is assembled with the two O(n) exponents
    combined analytically into ``exp(-n (z - conj w)^2 / 2)``.  ``terms`` is
    the length of the truncated exponential sum.  The default ``n - 1`` is the
    exact kernel of the n x n real Ginibre ensemble; ``terms=n`` gives
    ``Phi_n * Ktilde_n`` literally.
    """
    backend = choose_backend(n, backend)
    if terms is None:
        terms = n - 1
    dz, dw = np.broadcast_arrays(np.asarray(dz, dtype=complex), np.asarray(dw, dtype=complex))
    dwc = np.conj(dw)
    diff = dz - dwc  # z - conj(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (
            math.log(n**1.5 / math.sqrt(2.0 * math.pi))
            + 0.5j * math.pi
            + np.log(-diff)
            - 0.5 * n * diff**2
            + 0.5 * (_log_erfc_abs_im(n, dz) + _log_erfc_abs_im(n, dw))
            + _log_q(n, dz, dwc, backend, terms)
        )
    return np.where(diff == 0, -np.inf + 0j, out)


def log_phi(n, dz, dw):
    """Complex log of ``Phi_n(1+dz, 1+dw)``."""
    dz, dw = np.broadcast_arrays(np.asarray(dz, dtype=complex), np.asarray(dw, dtype=complex))
    dwc = np.conj(dw)
    d = dz - dw
    w = dz + dwc + dz * dwc
    diff = dz - dwc
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (
            0.5 * n * (d.real**2 + d.imag**2)
            - 1j * n * w.imag
            + math.log(math.sqrt(math.pi / 2.0))
            + 0.5j * math.pi
            + 0.5 * math.log(n)
            + np.log(-diff)
            - 0.5 * n * diff**2
            + 0.5 * (_log_erfc_abs_im(n, dz) + _log_erfc_abs_im(n, dw))
        )
    return np.where(diff == 0, -np.inf + 0j, out)


def _scalar(logv) -> ScaledComplex:
    return ScaledComplex.from_log(complex(np.asarray(logv).reshape(-1)[0]))


def ktilde(n, z: complex, w: complex, backend=None) -> KernelValue:
    """``(n/pi) exp(-n(|z|^2+|w|^2)/2) K_n(z, w)`` at absolute points."""
    backend = choose_backend(n, backend)
    logv = log_ktilde(n, complex(z) - 1.0, complex(w) - 1.0, backend)
    return KernelValue(_scalar(logv), "ktilde", backend)


def s_n(n, z: complex, w: complex, backend=None, terms=None) -> KernelValue:
    backend = choose_backend(n, backend)
    return KernelValue(_scalar(log_s(n, complex(z) - 1.0, complex(w) - 1.0, backend, terms)), "s_n", backend)


def phi_n(n, z: complex, w: complex) -> KernelValue:
    return KernelValue(_scalar(log_phi(n, complex(z) - 1.0, complex(w) - 1.0)), "phi_n", "closed_form")


def k_cc(n, z: complex, w: complex, backend=None, terms=None) -> BlockKernelValue:
    """2x2 matrix kernel ``[[S(z,w), -i S(z,w*)], [-i S(z*,w), S(w,z)]]``."""
    z, w = complex(z), complex(w)
    mi = ScaledComplex(0.0, -0.5 * math.pi)
    e11 = s_n(n, z, w, backend, terms).value
    e12 = mi * s_n(n, z, w.conjugate(), backend, terms).value
    e21 = mi * s_n(n, z.conjugate(), w, backend, terms).value
    e22 = s_n(n, w, z, backend, terms).value
    return BlockKernelValue(((e11, e12), (e21, e22)))


def k_point_correlation(n, points, backend=None, marginal=False) -> float:
    """``det[Ktilde_n(z_i, z_j)]``, the k-point correlation function.

    With ``marginal=True`` the value is multiplied by ``(n-k)!/n!``, giving
    the density of the k-th marginal of the joint eigenvalue law.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    k = len(pts)
    if not 1 <= k <= 12:
        raise ValueError(f"k must be in [1, 12], got {k}")
    if k > n:
        return 0.0
    dz = pts - 1.0
    logm = log_ktilde(n, dz[:, None], dz[None, :], backend)
    shift = np.max(logm.real)
    sign, logdet = np.linalg.slogdet(np.exp(logm - shift))
    value = (sign * np.exp(logdet + k * shift)).real
    if marginal:
        value *= math.exp(math.lgamma(n - k + 1) - math.lgamma(n + 1))
    return float(value)


# ---------------------------------------------------------------------------
# closed-form surrogates in rescaled coordinates


def _check_close_region(n, x1, y1, x2, y2):
    lim = math.sqrt(math.log(n)) / 2
    if abs(x1) + abs(x2) + y1 * y1 + y2 * y2 > lim:
        raise ValidityError(f"|x| + |y|^2 exceeds sqrt(log n)/2 = {lim:.3g}")
    if abs(y1 - y2) >= n ** (0.1 - 0.25):
        raise ValidityError(f"|y1 - y2| must be below n^(-3/20) = {n ** -0.15:.3g}")


def ktilde_asym_close(n, x1, y1, x2, y2, check=True) -> float:
    """Main term of ``|Ktilde_n(z,w)|^2 / (4 (gamma n)^{3/2})`` near the diagonal."""
    g = gamma_n(n)
    if check:
        _check_close_region(n, x1, y1, x2, y2)
    dy2 = (y1 - y2) ** 2
    return g * math.exp(-x1 - x2 - y1 * y1 - y2 * y2) / (math.pi * (g + math.sqrt(n / g) * dy2))


def _abs2_from_offset(dz: complex) -> float:
    return 1.0 + 2.0 * dz.real + abs(dz) ** 2


def ktilde_envelope(n, x1, y1, x2, y2, bound="uniform", c=1.0, safety=ENVELOPE_SAFETY, check=True) -> float:
    """Envelope for ``|Ktilde_n(z,w)|^2 / (gamma n)^{3/2}``, times ``safety``.

    ``bound="uniform"`` is ``|z|^2 |w|^2 exp(-(x1+y1^2)/3 - (x2+y2^2)/3)``,
    valid for ``x_i + y_i^2 >= 0``.  ``bound="far"`` is
    ``gamma exp(-x1-y1^2-x2-y2^2) / (gamma + sqrt(n/gamma)(y1-y2)^2)`` and
    additionally needs ``|y1 - y2| >= c n^{-1/4}``.
    """
    g = gamma_n(n)
    if bound == "uniform":
        if check and (x1 + y1 * y1 < 0 or x2 + y2 * y2 < 0):
            raise ValidityError("uniform envelope needs x_i + y_i^2 >= 0")
        dz, dw = edge_offsets(n, [x1, x2], [y1, y2])
        main = _abs2_from_offset(complex(dz)) * _abs2_from_offset(complex(dw))
        main *= math.exp(-(x1 + y1 * y1) / 3 - (x2 + y2 * y2) / 3)
    elif bound == "far":
        if check:
            if abs(x1) + abs(x2) + y1 * y1 + y2 * y2 > math.sqrt(math.log(n)) / 2:
                raise ValidityError("far envelope needs |x| + |y|^2 <= sqrt(log n)/2")
            if abs(y1 - y2) < c * n**-0.25:
                raise ValidityError("far envelope needs |y1 - y2| >= C n^{-1/4}")
        main = g * math.exp(-x1 - x2 - y1 * y1 - y2 * y2) / (g + math.sqrt(n / g) * (y1 - y2) ** 2)
    else:
        raise ValueError(f"unknown bound {bound!r}")
    return safety * main


def ktilde_edge(n, x1, y1, x2, y2, backend="asymptotic") -> KernelValue:
    """``Ktilde_n`` at rescaled coordinates, evaluated from exact offsets."""
    dz = edge_offsets(n, x1, y1)
    dw = edge_offsets(n, x2, y2)
    return KernelValue(_scalar(log_ktilde(n, dz, dw, backend)), "ktilde", backend)


def diag_intensity_rescaled(n, x, y, backend="asymptotic"):
    """``Ktilde_n(z,z) / (2 (gamma n)^{3/4})`` on rescaled coordinates."""
    g = gamma_n(n)
    dz = edge_offsets(n, x, y)
    logk = log_ktilde(n, dz, dz, backend)
    return np.exp(logk.real - math.log(2.0) - 0.75 * math.log(g * n))
