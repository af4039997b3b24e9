"""Finite-n identities of the complex Ginibre kernel, checked by quadrature.

``K_n(z, w) = sum_{l<n} (n z conj(w))^l / l!`` satisfies

    (n/pi) int e^{-n|z|^2} K_n(z, z) d^2z = n
    (n/pi) int e^{-n|z|^2} K_n(w1, z) K_n(z, w2) d^2z = K_n(w1, w2)

The second integrand oscillates with magnitude up to ``e^{n|w1-w2|^2/4}``
times the result, so it is evaluated in multiprecision rather than in doubles.
"""

from __future__ import annotations

import math

import gmpy2
import numpy as np

from . import kernel as K
from .fredholm import gauss_legendre


def kn(n, z, w) -> complex:
    """``K_n(z, w)`` in double precision (moderate n and |z w| only)."""
    x = n * complex(z) * complex(w).conjugate()
    out, term = 0j, 1 + 0j
    for j in range(n):
        out += term
        term *= x / (j + 1)
    return out


def mass_identity(n, radius=2.0, order=None) -> float:
    """``int_{|z| <= radius} Ktilde_n(z, z) d^2z`` by radial Gauss-Legendre."""
    if order is None:
        order = max(200, int(20 * radius * math.sqrt(n)))
    r, wr = gauss_legendre(0.0, radius, order)
    dens = np.exp(K.log_ktilde(n, r - 1.0, r - 1.0, "direct").real)
    return float(2.0 * math.pi * np.sum(wr * r * dens))


def _laguerre_rule(m, prec):
    """Gauss-Laguerre nodes and weights refined to ``prec`` bits."""
    x0, _ = np.polynomial.laguerre.laggauss(m)
    nodes, weights = [], []
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        tol = gmpy2.mpfr(2) ** (10 - prec)
        for x in x0:
            x = gmpy2.mpfr(float(x))
            for _ in range(100):
                p0, p1 = gmpy2.mpfr(1), 1 - x
                for k in range(1, m):
                    p0, p1 = p1, ((2 * k + 1 - x) * p1 - k * p0) / (k + 1)
                step = p1 / (m * (p1 - p0) / x)
                x -= step
                if abs(step) < tol * x:
                    break
            # L_{m+1}(x) for the weight formula
            p0, p1 = gmpy2.mpfr(1), 1 - x
            for k in range(1, m + 1):
                p0, p1 = p1, ((2 * k + 1 - x) * p1 - k * p0) / (k + 1)
            nodes.append(x)
            weights.append(x / ((m + 1) ** 2 * p1**2))
    return nodes, weights


class ReproducingQuadrature:
    """Product rule for ``(n/pi) int e^{-n|z|^2} f(z) d^2z`` that is exact
    whenever f is a polynomial of degree < n in z and < n in conj(z).

    Angular: trapezoid with n points.  Radial: Gauss-Laguerre in
    ``t = n r^2`` with ``ceil(n/2)`` points.  Arithmetic is done with
    ``prec`` bits.
    """

    def __init__(self, n, prec=140):
        self.n, self.prec = n, prec
        m = max(1, (n + 1) // 2)
        t, wt = _laguerre_rule(m, prec)
        with self._ctx():
            pi2 = 2 * gmpy2.const_pi()
            angles = [gmpy2.mpc(gmpy2.cos(pi2 * j / n), gmpy2.sin(pi2 * j / n)) for j in range(n)]
            self.nodes = [gmpy2.sqrt(tk / n) * a for tk in t for a in angles]
            self.weights = [wk / n for wk in wt for _ in angles]

    def _ctx(self):
        return gmpy2.context(gmpy2.get_context(), precision=self.prec)

    def _kn(self, z, w):
        x = self.n * z * w.conjugate()
        out, term = gmpy2.mpc(0), gmpy2.mpc(1)
        for j in range(1, self.n + 1):
            out += term
            term = term * x / j
        return out

    def reproduce(self, w1, w2) -> tuple:
        """(quadrature value, exact ``K_n(w1, w2)``)."""
        with self._ctx():
            a, b = gmpy2.mpc(complex(w1)), gmpy2.mpc(complex(w2))
            total = gmpy2.mpc(0)
            for z, wk in zip(self.nodes, self.weights):
                total += wk * self._kn(a, z) * self._kn(z, b)
            return complex(total), complex(self._kn(a, b))


def random_disk_points(rng, count, radius=1.0):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    return r * np.exp(2j * math.pi * rng.uniform(0.0, 1.0, count))


def cauchy_schwarz_violations(n, z, w, backend=None, slack=1e-12) -> int:
    """Pairs with ``|Ktilde(z,w)|^2 > Ktilde(z,z) Ktilde(w,w) (1 + slack)``."""
    dz, dw = np.asarray(z) - 1.0, np.asarray(w) - 1.0
    off = 2.0 * K.log_ktilde(n, dz, dw, backend).real
    diag = K.log_ktilde(n, dz, dz, backend).real + K.log_ktilde(n, dw, dw, backend).real
    return int(np.count_nonzero(off > diag + math.log1p(slack)))


def hermitian_defect(n, z, w, backend=None) -> float:
    """``max |Ktilde(z,w) - conj Ktilde(w,z)| / |Ktilde(z,w)|``."""
    dz, dw = np.asarray(z) - 1.0, np.asarray(w) - 1.0
    a = K.log_ktilde(n, dz, dw, backend)
    b = np.conj(K.log_ktilde(n, dw, dz, backend))
    return float(np.max(np.abs(np.expm1(b - a))))


def kernel_identities(n, pairs=20, seed=0) -> dict:
    """All finite-n checks as a JSON-ready dict (``n <= 1e5``)."""
    rng = np.random.default_rng(seed)
    mass = mass_identity(n)
    out = {"n": n, "mass": mass, "mass_rel_error": abs(mass - n) / n}
    z, w = random_disk_points(rng, 1000, 1.5), random_disk_points(rng, 1000, 1.5)
    out["cauchy_schwarz_violations"] = cauchy_schwarz_violations(n, z, w)
    out["hermitian_defect"] = hermitian_defect(n, z, w)
    if n <= 200:
        quad = ReproducingQuadrature(n)
        errs = []
        for w1, w2 in zip(random_disk_points(rng, pairs), random_disk_points(rng, pairs)):
            q, e = quad.reproduce(w1, w2)
            errs.append(abs(q - e) / abs(e))
        out["reproducing_max_rel_error"] = max(errs)
    return out
