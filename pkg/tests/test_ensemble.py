import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ginibre_edge import ensemble as E
from ginibre_edge import kernel as K
from ginibre_edge.fredholm import EdgeWindow


def test_sampling_is_deterministic():
    a = E.sample_ginibre(30, "complex", seed=7, trial=3)
    assert np.array_equal(a, E.sample_ginibre(30, "complex", seed=7, trial=3))
    assert not np.array_equal(a, E.sample_ginibre(30, "complex", seed=7, trial=4))
    assert not np.array_equal(a, E.sample_ginibre(30, "complex", seed=8, trial=3))


def test_real_entries_are_real():
    a = E.sample_ginibre(20, "real", seed=1)
    assert a.dtype == np.float64


@pytest.mark.parametrize("kind", ["complex", "real"])
def test_entry_variance(kind):
    n = 400
    a = E.sample_ginibre(n, kind, seed=2)
    assert np.mean(np.abs(a) ** 2) * n == pytest.approx(1.0, rel=0.1)
    if kind == "complex":
        assert np.var(a.real) * 2 * n == pytest.approx(1.0, rel=0.1)
        assert np.var(a.imag) * 2 * n == pytest.approx(1.0, rel=0.1)


def test_bad_arguments():
    with pytest.raises(ValueError):
        E.sample_ginibre(5, "quaternion", seed=0)
    with pytest.raises(ValueError):
        E.sample_ginibre(0, "real", seed=0)
    with pytest.raises(ValueError):
        E.spectrum(np.ones((2, 3)))
    with pytest.raises(ValueError):
        E.spectrum(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        E.spectrum(np.eye(2, dtype=complex), kind="real")


def test_one_by_one_spectrum():
    a = E.sample_ginibre(1, "complex", seed=5)
    assert E.spectrum(a)[0] == a[0, 0]


def test_companion_matrix():
    eig = np.sort_complex(E.spectrum(np.array([[0.0, -1.0], [1.0, 0.0]])))
    assert np.allclose(eig, [-1j, 1j], atol=1e-15)


def test_similarity_invariance():
    n = 50
    a = E.sample_ginibre(n, "complex", seed=11)
    rng = np.random.default_rng(0)
    p = np.eye(n) + 0.1 * rng.normal(size=(n, n))
    b = p @ a @ np.linalg.inv(p)
    ea, eb = np.sort_complex(E.spectrum(a)), np.sort_complex(E.spectrum(b))
    # match each eigenvalue to its nearest partner
    d = np.abs(ea[:, None] - eb[None, :]).min(axis=1)
    assert np.max(d) < 1e-8


def test_trace_equals_eigenvalue_sum():
    a = E.sample_ginibre(80, "complex", seed=3)
    assert np.sum(E.spectrum(a)) == pytest.approx(np.trace(a), abs=1e-10)


@settings(max_examples=20)
@given(st.integers(2, 60), st.integers(0, 2**32))
def test_real_spectra_closed_under_conjugation(n, seed):
    e = E.spectrum(E.sample_ginibre(n, "real", seed=seed), "real")
    nonreal = e[e.imag != 0]
    assert np.array_equal(np.sort_complex(nonreal), np.sort_complex(np.conj(nonreal)))
    assert (n - np.count_nonzero(e.imag == 0)) % 2 == 0


def test_extreme_stats_example():
    s = E.extreme_stats([1 + 1j, 1 - 1j, 0.5], 3, "real")
    assert s.max_re == 1.0
    assert s.spectral_radius == pytest.approx(math.sqrt(2))
    assert s.max_real_eig == 0.5 and s.n_real_eigs == 1
    assert s.max_re_nonreal == 1.0
    assert s.rescaled_max_re is None
    assert E.extreme_stats([1j, -1j], 2, "real").max_real_eig is None
    with pytest.raises(ValueError):
        E.extreme_stats([], 3, "complex")


def test_rescaled_fields_by_regime():
    s = E.extreme_stats([1.001], int(1e6), "complex")
    assert s.rescaled_radius is not None and s.rescaled_max_re is None
    s = E.extreme_stats([1.0001], int(1e9), "complex")
    assert s.rescaled_max_re is not None


def test_max_re_rescaling_inverts_edge_point():
    n = 1e12
    for x in (-2.0, 0.0, 1.5):
        v = 1.0 + K.edge_offset(n, x)
        assert E.rescale_max_re(n, v) == pytest.approx(x, abs=1e-3)


@given(st.floats(-5, 5), st.sampled_from([200, 1000, 10**6]))
def test_radius_round_trip(g, n):
    assert E.rescale_radius(n, E.unrescale_radius(n, g)) == pytest.approx(g, abs=1e-12 * max(1, abs(g)) * math.sqrt(n))


def test_radius_rescaling_needs_positive_alpha():
    with pytest.raises(ValueError):
        E.rescale_radius(5, 1.0)


def test_count_in_window():
    e = np.array([1.2 + 0.1j, 1.2 - 0.1j, 1.3, 0.2])
    w = EdgeWindow.absolute(1.1)
    assert E.count_in_window(e, w, "complex") == 3
    assert E.count_in_window(e, w, "real") == 1
    assert E.count_in_window(np.array([], dtype=complex), w, "complex") == 0
    assert E.count_in_window(e, EdgeWindow.absolute(-10.0), "complex") == 4
    with pytest.raises(ValueError):
        E.count_in_window(e, EdgeWindow.rescaled(0.0), "complex")


def test_count_in_rescaled_window():
    n = 1e12
    s = 1.0 + K.edge_offset(n, 0.0)
    e = np.array([s + 1e-9, s - 1e-9])
    assert E.count_in_window(e, EdgeWindow.rescaled(0.0), "complex", n=n) == 1


def test_summary_json():
    s = E.extreme_stats(E.spectrum(E.sample_ginibre(10, "real", seed=0)), 10, "real", seed=0)
    d = s.to_json()
    assert d["n"] == 10 and d["seed"] == 0 and set(d) >= {"max_re", "spectral_radius"}


def test_kostlan_radius_law_small_n():
    # for n = 2 the squared moduli are distributed as Gamma(1)/2 and Gamma(2)/2
    radii = [np.max(np.abs(E.spectrum(E.sample_ginibre(2, "complex", seed=9, trial=k)))) for k in range(4000)]
    r = 1.0
    exact = (1 - math.exp(-2 * r * r)) * (1 - math.exp(-2 * r * r) * (1 + 2 * r * r))
    emp = np.mean(np.array(radii) <= r)
    assert abs(emp - exact) < 4 * math.sqrt(exact * (1 - exact) / 4000)
