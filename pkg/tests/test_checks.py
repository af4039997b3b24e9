import math

import numpy as np
import pytest

from ginibre_edge import checks as C


def test_kn_small_n():
    assert C.kn(1, 0.3, 0.7) == 1
    z, w = 0.4 + 0.2j, -0.1 + 0.5j
    x = 3 * z * w.conjugate()
    assert C.kn(3, z, w) == pytest.approx(1 + x + x * x / 2, rel=1e-15)


@pytest.mark.parametrize("n", [10, 50])
def test_mass_identity(n):
    assert C.mass_identity(n) == pytest.approx(n, rel=1e-8)


def test_mass_on_small_disk_is_partial():
    # for n = 1 the density is (1/pi) e^{-|z|^2}
    assert C.mass_identity(1, radius=1.0, order=60) == pytest.approx(1 - math.exp(-1), rel=1e-12)


def test_reproducing_rule_is_exact_for_small_n():
    quad = C.ReproducingQuadrature(8, prec=100)
    for w1, w2 in [(0.3 + 0.1j, -0.2 + 0.6j), (0.9, 0.9j), (0.0, 0.5)]:
        q, e = quad.reproduce(w1, w2)
        assert abs(q - e) <= 1e-14 * abs(e)


def test_laguerre_rule_integrates_polynomials():
    nodes, weights = C._laguerre_rule(5, 100)
    # int_0^inf t^k e^{-t} dt = k!, exact for k < 10
    for k in range(10):
        assert float(sum(w * x**k for x, w in zip(nodes, weights))) == pytest.approx(math.factorial(k), rel=1e-14)


def test_random_disk_points_stay_inside():
    p = C.random_disk_points(np.random.default_rng(0), 500, 1.5)
    assert p.shape == (500,) and np.all(np.abs(p) <= 1.5)


def test_kernel_checks_report():
    out = C.kernel_identities(10, pairs=3, seed=1)
    assert out["mass_rel_error"] < 1e-8
    assert out["cauchy_schwarz_violations"] == 0
    assert out["hermitian_defect"] < 1e-12
    assert out["reproducing_max_rel_error"] < 1e-12
    assert "reproducing_max_rel_error" not in C.kernel_identities(300, pairs=1)
