"""Acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line before asserting.
The Monte Carlo spectra are sampled once per module and shared.
"""

import cmath
import math
import time

import numpy as np
import pytest

from ginibre_edge import checks as C
from ginibre_edge import ensemble as E
from ginibre_edge import fredholm as F
from ginibre_edge import harness as H
from ginibre_edge import kernel as K
from ginibre_edge import specfun as S

ABS_THRESHOLDS = (1.10, 1.15, 1.20)
N_GRID = (1e10, 1e12, 1e14, 1e16)
TS = (-1.0, 0.0, 1.0, 2.0)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


def mc_config(n, kind, trials, experiment="gumbel", **kw):
    return H.ExperimentConfig(n=n, kind=kind, trials=trials, master_seed=7, experiment=experiment, **kw)


@pytest.fixture(scope="module")
def complex_spectra():
    return H.collect_spectra(mc_config(200, "complex", 10_000, windows=[F.EdgeWindow.absolute(1.1)]))


@pytest.fixture(scope="module")
def real_spectra():
    return H.collect_spectra(mc_config(200, "real", 10_000, windows=[F.EdgeWindow.absolute(1.1)]))


def strictly_decreasing(xs):
    return all(a > b for a, b in zip(xs, xs[1:]))


def test_criterion_1_kernel_mass(report):
    t0 = time.perf_counter()
    errs = {n: abs(C.mass_identity(n) - n) / n for n in (10, 50, 200)}
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-8 and elapsed < 10
    report(1, ok, f"rel errors {', '.join(f'n={n}: {e:.1e}' for n, e in errs.items())}; {elapsed:.1f}s")
    assert ok


def test_criterion_2_reproducing_property(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    quad = C.ReproducingQuadrature(50)
    worst = 0.0
    for w1, w2 in zip(C.random_disk_points(rng, 20), C.random_disk_points(rng, 20)):
        q, e = quad.reproduce(w1, w2)
        worst = max(worst, abs(q - e) / abs(e))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    report(2, ok, f"max rel error {worst:.1e} over 20 pairs; {elapsed:.1f}s")
    assert ok


def _zeta_grid():
    pts = [complex(t) for t in np.linspace(1.05, 2.0, 20)]
    for r in np.linspace(0.01, 0.2, 8):
        for ph in np.linspace(0, 2 * math.pi, 24, endpoint=False):
            z = 1 + r * cmath.exp(1j * ph)
            if abs(cmath.phase(z)) <= math.pi / 6:
                pts.append(z)
    return pts


def test_criterion_3_incomplete_gamma_backends(report):
    t0 = time.perf_counter()
    pts = _zeta_grid()
    ratios = {}
    for n in (100, 1000, 10_000):
        worst = 0.0
        for z in pts:
            a = S.incgamma_ratio(n, z, "asymptotic").value.log
            d = S.incgamma_ratio(n, z, "direct_sum").value.log
            worst = max(worst, abs(cmath.exp(a - d) - 1))
        ratios[n] = worst / (5 / math.sqrt(n))
    elapsed = time.perf_counter() - t0
    ok = max(ratios.values()) <= 1 and elapsed < 60
    report(3, ok, f"max error / (5 n^-1/2): {', '.join(f'n={n}: {r:.3f}' for n, r in ratios.items())}; "
                  f"{len(pts)} points; {elapsed:.1f}s")
    assert ok


def _gumbel_rows(kind, spectra):
    cfg = mc_config(200, kind, 10_000, windows=[F.EdgeWindow.absolute(s) for s in ABS_THRESHOLDS])
    return H.run_experiment(cfg, spectra=spectra).rows


def _fmt_rows(rows):
    return "; ".join(f"s={r.threshold:.2f} mc={r.mc_estimate:.4f} fred={r.fredholm_value:.6f} "
                     f"se={r.mc_stderr:.1e} z={r.z_score:+.2f}" for r in rows)


def test_criterion_4_mc_vs_fredholm_complex(report, complex_spectra):
    rows = _gumbel_rows("complex", complex_spectra)
    # the binomial standard error can only be <= 0.005 at 1e4 trials
    ok = all(abs(r.z_score) <= 3 and r.mc_stderr <= 0.005 for r in rows)
    report(4, ok, _fmt_rows(rows))
    assert ok


def test_criterion_5_mc_vs_fredholm_real(report, real_spectra):
    rows = _gumbel_rows("real", real_spectra)
    ok = all(abs(r.z_score) <= 3 for r in rows)
    report(5, ok, _fmt_rows(rows))
    assert ok


def test_criterion_6_largest_real_eigenvalue(report):
    cfg = mc_config(1000, "real", 4000, experiment="real_max", ts=[1.0, 2.0])
    rows = H.run_experiment(cfg).rows
    gaps = [abs(r.mc_estimate - r.limit_value) for r in rows]
    ok = max(gaps) <= 0.02
    report(6, ok, "; ".join(f"t={r.threshold:g} mc={r.mc_estimate:.4f} limit={r.limit_value:.4f}" for r in rows))
    assert ok


@pytest.fixture(scope="module")
def drift_rows():
    return {kind: H.drift_table(N_GRID, TS, kind) for kind in F.KINDS}


def test_criterion_7_gumbel_drift(report, drift_rows):
    problems = []
    for kind, rows in drift_rows.items():
        norm = [r.normalized_deviation for r in rows]
        if max(norm) > 10 * min(norm):
            problems.append(f"{kind}: normalised deviation spans {min(norm):.2g}..{max(norm):.2g}")
        for t in TS:
            devs = [r.deviation for r in rows if r.t == t]
            if not strictly_decreasing(devs):
                problems.append(f"{kind} t={t:g}: deviations {', '.join(f'{d:.3g}' for d in devs)}")
    ok = not problems
    report(7, ok, "monotone and bounded" if ok else " | ".join(problems))
    assert ok, problems


def test_criterion_8_trace_diagnostic(report):
    detail, ok = [], True
    for kind in F.KINDS:
        traces = [F.trace_diagnostic(n, 0.0, kind)[0] for n in N_GRID]
        devs = [abs(t - 1.0) for t in traces]
        ok &= strictly_decreasing(devs)
        detail.append(f"{kind}: " + ", ".join(f"{t:.4f}" for t in traces))
    report(8, ok, "traces at t=0 " + "; ".join(detail))
    assert ok


POISSON_WINDOW = F.EdgeWindow.absolute(0.97)


def test_criterion_9_poisson_counting(report, complex_spectra):
    cfg = mc_config(200, "complex", 10_000, experiment="poisson_count", windows=[POISSON_WINDOW])
    rows = {r.label: r for r in H.run_experiment(cfg, spectra=complex_spectra).rows}
    mean, lap = rows["mean_count"], rows["laplace_c=1"]
    tau = mean.fredholm_value
    finite_ok = 0.5 <= tau <= 1.5 and abs(mean.z_score) <= 3 and abs(lap.z_score) <= 3

    gv = 1 - math.exp(-1)
    target = math.exp(-gv)
    devs, norms = [], []
    for n in N_GRID:
        rep = F.gap_probability(n, F.EdgeWindow.rescaled(0.0), "complex", g=lambda z: np.full(np.shape(z), gv))
        d = abs(rep.probability - target)
        devs.append(d)
        norms.append(d * math.log(n) / math.log(math.log(n)) ** 2)
    limit_ok = strictly_decreasing(devs) and max(norms) <= 10 * min(norms)
    ok = finite_ok and limit_ok
    report(9, ok, f"tau={tau:.4f} mean={mean.mc_estimate:.4f} (z={mean.z_score:+.2f}); "
                  f"E e^-N={lap.mc_estimate:.4f} fred={lap.fredholm_value:.4f} (z={lap.z_score:+.2f}); "
                  f"Laplace deviations {', '.join(f'{d:.3f}' for d in devs)}")
    assert ok


def test_criterion_10_property_suite(report):
    failures = []
    rng = np.random.default_rng(10)

    ops = []
    for kind, s in (("complex", 1.0), ("complex", 1.1), ("real", 1.0), ("real", 1.1)):
        grid = F.build_grid(200, F.EdgeWindow.absolute(s, orders=(12, 24)), kind)
        ops.append(F.nystrom_operator(200, grid))
    grid = F.build_grid(1e12, F.EdgeWindow.rescaled(1.0, orders=(16, 12)), "complex")
    ops.append(F.nystrom_operator(1e12, grid))
    for op in ops:
        rep = F.fredholm_det(op)
        if abs(rep.fredholm_det - rep.det2 * math.exp(-rep.trace)) > 1e-10 * max(rep.fredholm_det, 1e-300):
            failures.append("det = det2 exp(-tr)")
        if abs(rep.fredholm_det - math.exp(-rep.trace)) > F.det_trace_bound(rep.hs_norm, rep.trace):
            failures.append("det-trace bound")

    for n, backend, scale in ((200, "direct", 1.0), (1e12, "asymptotic", 1e-5)):
        dz = (rng.normal(size=1000) + 1j * rng.normal(size=1000)) * scale
        dw = (rng.normal(size=1000) + 1j * rng.normal(size=1000)) * scale
        if C.cauchy_schwarz_violations(n, 1 + dz, 1 + dw, backend) > 0:
            failures.append(f"Cauchy-Schwarz at n={n:g}")
        if C.hermitian_defect(n, 1 + dz, 1 + dw, backend) > 1e-12:
            failures.append(f"Hermitian symmetry at n={n:g}")

    for n in (1e10, 1e16):
        for x, y in rng.uniform(-3, 3, size=(50, 2)):
            c = K.rescale_offset(n, complex(K.edge_offsets(n, x, y)))
            if abs(c.x - x) > 1e-12 or abs(c.y - y) > 1e-12:
                failures.append("edge rescaling round trip")
                break
    for g in rng.uniform(-4, 4, 50):
        if abs(E.rescale_radius(1000, E.unrescale_radius(1000, g)) - g) > 1e-12:
            failures.append("radius rescaling round trip")
            break

    for seed in range(20):
        e = E.spectrum(E.sample_ginibre(40, "real", seed), "real")
        nonreal = e[e.imag != 0]
        if not np.array_equal(np.sort_complex(nonreal), np.sort_complex(nonreal.conj())):
            failures.append("conjugation closure")

    for logn in np.linspace(math.log(K.min_gamma_positive_n()) + 0.01, 200, 60):
        g = K.gamma_n(math.exp(logn))
        v = -g / 2 + logn / 4 - 0.25 * math.log(2) - math.log(math.pi) - 1.25 * math.log(logn)
        if abs(v) > 1e-12:
            failures.append("gamma_n identity")
            break

    for delta in np.linspace(0.0, 0.99, 34):
        for t in 1 + delta + np.geomspace(1e-9, 1e3, 40):
            if S.mu(t).real ** 2 < delta * (1 - delta) * (t - 1) / 2 * (1 - 1e-12):
                failures.append("mu inequality")
                break

    ok = not failures
    report(10, ok, "all properties hold" if ok else ", ".join(sorted(set(failures))))
    assert ok
