"""Sampling Ginibre matrices and reading off extreme eigenvalue statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from . import kernel as K
from .fredholm import EdgeWindow, KINDS

GAUSSIAN_METHOD = "ziggurat"
BIT_GENERATOR = "Philox"


def rng_for(master_seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(master_seed, trial)``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(trial)])
    return np.random.Generator(np.random.Philox(ss))


def sample_ginibre(n: int, kind: str, seed: int, trial: int = 0) -> np.ndarray:
    """n x n Ginibre matrix with ``E|x_ij|^2 = 1/n``.

    Complex entries have independent real and imaginary parts of variance
    ``1/(2n)``.  numpy's ``standard_normal`` uses the ziggurat method.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_for(seed, trial)
    if kind == "real":
        return rng.standard_normal((n, n)) / math.sqrt(n)
    parts = rng.standard_normal((2, n, n)) / math.sqrt(2.0 * n)
    return parts[0] + 1j * parts[1]


def spectrum(matrix, kind: str | None = None) -> np.ndarray:
    """All eigenvalues via LAPACK ``geev``.

    Real input goes through the real Schur form: real eigenvalues come out
    with imaginary part exactly zero and complex ones in exact conjugate
    pairs.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("spectrum needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if kind == "real" and np.iscomplexobj(a):
        raise ValueError("real kind needs a real matrix")
    try:
        return linalg.eigvals(a, check_finite=False, overwrite_a=False).astype(complex)
    except linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigenvalue solver did not converge: {exc}") from exc


@dataclass(frozen=True)
class SpectrumSummary:
    n: int
    kind: str
    max_re: float
    spectral_radius: float
    max_real_eig: float | None
    n_real_eigs: int | None
    max_re_nonreal: float | None
    rescaled_max_re: float | None
    rescaled_radius: float | None
    seed: int | None = None

    def to_json(self) -> dict:
        return asdict(self)


def rescale_max_re(n, value):
    g = K.gamma_n(n)
    return ((value - 1.0) - math.sqrt(g / (4.0 * n))) * math.sqrt(4.0 * g * n)


def rescale_radius(n, value):
    a = K.alpha_n(n)
    if a <= 0:
        raise ValueError(f"alpha_n <= 0 for n={n}")
    return ((value - 1.0) - math.sqrt(a / (4.0 * n))) * math.sqrt(4.0 * n * a)


def unrescale_radius(n, g):
    a = K.alpha_n(n)
    return 1.0 + math.sqrt(a / (4.0 * n)) + g / math.sqrt(4.0 * n * a)


def extreme_stats(eigs, n: int, kind: str, seed: int | None = None) -> SpectrumSummary:
    eigs = np.asarray(eigs, dtype=complex)
    if eigs.size == 0:
        raise ValueError("empty spectrum")
    max_re = float(np.max(eigs.real))
    radius = float(np.max(np.abs(eigs)))
    max_real = n_real = max_nonreal = None
    if kind == "real":
        real_mask = eigs.imag == 0
        n_real = int(np.count_nonzero(real_mask))
        max_real = float(np.max(eigs.real[real_mask])) if n_real else None
        max_nonreal = float(np.max(eigs.real[~real_mask])) if n_real < eigs.size else None
    try:
        resc_max = rescale_max_re(n, max_re)
    except (K.GammaPositivityError, ValueError):
        resc_max = None
    resc_rad = rescale_radius(n, radius) if n >= 3 and K.alpha_n(n) > 0 else None
    return SpectrumSummary(int(n), kind, max_re, radius, max_real, n_real, max_nonreal, resc_max, resc_rad, seed)


def count_in_window(eigs, window: EdgeWindow, kind: str, n: int | None = None) -> int:
    """Eigenvalues with real part at or beyond the window threshold.

    The real kind counts conjugate pairs once (strict upper half plane).
    Rescaled windows need ``n``.
    """
    eigs = np.asarray(eigs, dtype=complex)
    if window.mode == "absolute":
        s = window.threshold
    else:
        if n is None:
            raise ValueError("rescaled windows need n")
        s = 1.0 + K.edge_offset(n, window.threshold)
    sel = eigs.real >= s
    if kind == "real":
        sel &= eigs.imag > 0
    return int(np.count_nonzero(sel))
