"""Monte Carlo experiments and their comparison against Fredholm values and limits."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special
from threadpoolctl import threadpool_limits

from . import __version__
from . import ensemble as E
from . import fredholm as F
from . import kernel as K

SCHEMA_VERSION = 1
EXPERIMENTS = ("gumbel", "poisson_count", "radius", "real_max")
LAPLACE_CS = (0.5, 1.0, 2.0)


class SchemaError(ValueError):
    """Result file has an unexpected schema version or layout."""


@dataclass
class ExperimentConfig:
    n: int
    kind: str
    trials: int
    master_seed: int
    experiment: str
    windows: list = field(default_factory=list)
    ts: list = field(default_factory=list)
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        self.n = int(self.n)
        if self.kind not in F.KINDS:
            raise ValueError(f"kind must be one of {F.KINDS}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be >= 1")
        self.trials = int(self.trials)
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.windows = [w if isinstance(w, F.EdgeWindow) else F.EdgeWindow.from_json(w) for w in self.windows]
        self.ts = [float(t) for t in self.ts]
        for w in self.windows:
            if w.mode == "rescaled":
                K.gamma_n(self.n)
        if self.experiment in ("gumbel", "poisson_count") and not self.windows:
            raise ValueError(f"{self.experiment} needs at least one window")
        if self.experiment in ("radius", "real_max") and not self.ts:
            raise ValueError(f"{self.experiment} needs thresholds ts")
        if self.experiment == "real_max" and self.kind != "real":
            raise ValueError("real_max needs kind='real'")
        if self.experiment == "radius" and (self.n < 3 or K.alpha_n(self.n) <= 0):
            raise ValueError("radius experiment needs alpha_n > 0")

    def to_json(self) -> dict:
        d = asdict(self)
        d["windows"] = [w.to_json() for w in self.windows]
        return d

    @classmethod
    def from_json(cls, d) -> "ExperimentConfig":
        return cls(**d)

    def hash(self) -> str:
        d = self.to_json()
        d.pop("output", None)
        d.pop("workers", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ComparisonRow:
    threshold: float
    mc_estimate: float
    mc_stderr: float
    fredholm_value: float | None
    limit_value: float | None
    z_score: float | None
    label: str = ""

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    samples: dict
    gaussian_method: str = E.GAUSSIAN_METHOD
    bit_generator: str = E.BIT_GENERATOR
    schema_version: int = SCHEMA_VERSION
    config_hash: str = ""
    package_version: str = __version__

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "package_version": self.package_version,
            "config": self.config.to_json(),
            "config_hash": self.config_hash or self.config.hash(),
            "gaussian_method": self.gaussian_method,
            "bit_generator": self.bit_generator,
            "rows": [r.to_json() for r in self.rows],
            "samples": self.samples,
        }


# ---------------------------------------------------------------------------
# statistics


class StepFunction:
    """Right-continuous empirical CDF."""

    def __init__(self, samples):
        s = np.sort(np.asarray(samples, dtype=float))
        if s.size == 0:
            raise ValueError("empirical_cdf needs at least one sample")
        self.sorted = s

    def __call__(self, x):
        return np.searchsorted(self.sorted, x, side="right") / self.sorted.size


def empirical_cdf(samples) -> StepFunction:
    return StepFunction(samples)


def ks_distance(samples, target_cdf) -> float:
    """``sup |F_emp - F|`` using both one-sided gaps at the sample points."""
    s = np.sort(np.asarray(samples, dtype=float))
    m = s.size
    if m == 0:
        raise ValueError("ks_distance needs at least one sample")
    f = np.asarray([target_cdf(v) for v in s], dtype=float)
    upper = np.arange(1, m + 1) / m - f
    lower = f - np.arange(0, m) / m
    return float(max(np.max(upper), np.max(lower)))


def binomial_stderr(k, trials) -> float:
    """Standard error of a proportion, with ``(k + 1/2)/(N + 1)`` as plug-in.

    The shrunken plug-in keeps the error positive when no or all trials hit.
    """
    p = (k + 0.5) / (trials + 1.0)
    return math.sqrt(p * (1.0 - p) / trials)


def _row(threshold, k, trials, fred, limit, label=""):
    est = k / trials
    se = binomial_stderr(k, trials)
    z = None if fred is None else (est - fred) / se
    return ComparisonRow(float(threshold), est, se, fred, limit, z, label)


# ---------------------------------------------------------------------------
# trials


def _trial(args):
    n, kind, seed, trial = args
    with threadpool_limits(1):
        eigs = E.spectrum(E.sample_ginibre(n, kind, seed, trial), kind)
    return trial, eigs


def iter_spectra(cfg: ExperimentConfig, spectra=None):
    """Yield ``(trial, eigenvalues)`` in trial order.

    ``spectra`` (a sequence of eigenvalue arrays indexed by trial, e.g. from
    :func:`collect_spectra` with the same n, kind, seed) skips the sampling.
    """
    if spectra is not None:
        if len(spectra) < cfg.trials:
            raise ValueError(f"need {cfg.trials} cached spectra, got {len(spectra)}")
        for i in range(cfg.trials):
            yield i, spectra[i]
        return
    jobs = [(cfg.n, cfg.kind, cfg.master_seed, i) for i in range(cfg.trials)]
    if cfg.workers == 1:
        for j in jobs:
            yield _trial(j)
        return
    with ProcessPoolExecutor(cfg.workers) as pool:
        yield from pool.map(_trial, jobs, chunksize=16)


def collect_spectra(cfg: ExperimentConfig) -> list:
    return [eigs for _, eigs in iter_spectra(cfg)]


def _window_threshold(n, w):
    return w.threshold if w.mode == "absolute" else 1.0 + K.edge_offset(n, w.threshold)


def _limit_for_window(n, w, kind):
    if w.mode == "rescaled":
        return F.gumbel_limit_cdf(w.threshold, kind)
    return None


def run_gumbel_experiment(cfg: ExperimentConfig, spectra=None) -> ExperimentResult:
    """P(no eigenvalue in each window) by MC, Fredholm determinant and limit.

    For the real kind the maximum is over non-real eigenvalues, matching the
    Pfaffian gap probability; the largest real eigenvalue is recorded too.
    """
    if cfg.experiment != "gumbel":
        raise ValueError("config is not a gumbel experiment")
    max_re, max_real, max_nonreal = [], [], []
    for _, eigs in iter_spectra(cfg, spectra):
        st = E.extreme_stats(eigs, cfg.n, cfg.kind)
        max_re.append(st.max_re)
        if cfg.kind == "real":
            max_real.append(st.max_real_eig)
            max_nonreal.append(st.max_re_nonreal)
    stat = np.asarray(max_nonreal if cfg.kind == "real" else max_re, dtype=float)
    stat = np.where(np.isnan(stat), -np.inf, stat)
    rows = []
    for w in cfg.windows:
        s = _window_threshold(cfg.n, w)
        k = int(np.count_nonzero(stat < s))
        fred = _fredholm_or_none(cfg.n, w, cfg.kind)
        rows.append(_row(w.threshold, k, cfg.trials, fred, _limit_for_window(cfg.n, w, cfg.kind), "gap_probability"))
    samples = {"max_re": max_re}
    if cfg.kind == "real":
        samples["max_real_eig"] = max_real
        samples["max_re_nonreal"] = max_nonreal
    return _result(cfg, rows, samples)


def _fredholm_or_none(n, w, kind, g=None):
    if w.mode == "absolute" and n > 100_000:
        return None
    return F.gap_probability(n, w, kind, g=g).probability


def run_real_max_experiment(cfg: ExperimentConfig, spectra=None) -> ExperimentResult:
    """P(largest real eigenvalue <= 1 + t/sqrt(n)) against ``1 - erfc(t)/4``."""
    vals = []
    for _, eigs in iter_spectra(cfg, spectra):
        vals.append(E.extreme_stats(eigs, cfg.n, "real").max_real_eig)
    v = np.asarray([-np.inf if x is None else x for x in vals])
    rows = []
    for t in cfg.ts:
        k = int(np.count_nonzero(v <= 1.0 + t / math.sqrt(cfg.n)))
        rows.append(_row(t, k, cfg.trials, None, 1.0 - 0.25 * float(special.erfc(t)), "real_max_cdf"))
    return _result(cfg, rows, {"max_real_eig": vals})


def complex_radius_cdf(n, r) -> float:
    """Exact ``P(rho <= r)`` for complex Ginibre: moduli squared are
    independent Gamma(k, 1)/n, k = 1..n."""
    ks = np.arange(1, n + 1)
    return float(np.exp(np.sum(np.log(special.gammainc(ks, n * r * r)))))


def run_radius_experiment(cfg: ExperimentConfig, spectra=None) -> ExperimentResult:
    """Rescaled spectral radius against ``exp(-(beta/2) e^{-t})``."""
    vals = []
    for _, eigs in iter_spectra(cfg, spectra):
        vals.append(E.extreme_stats(eigs, cfg.n, cfg.kind).rescaled_radius)
    v = np.asarray(vals, dtype=float)
    rows = []
    for t in cfg.ts:
        k = int(np.count_nonzero(v <= t))
        exact = complex_radius_cdf(cfg.n, E.unrescale_radius(cfg.n, t)) if cfg.kind == "complex" else None
        rows.append(_row(t, k, cfg.trials, exact, F.gumbel_limit_cdf(t, cfg.kind), "radius_cdf"))
    return _result(cfg, rows, {"rescaled_radius": vals})


def run_poisson_experiment(cfg: ExperimentConfig, spectra=None) -> ExperimentResult:
    """Eigenvalue counts in each window (upper half plane for the real kind).

    Rows per window: mean count against the trace, variance, second factorial
    moment ratio, and ``E exp(-c count)`` for ``c in LAPLACE_CS`` against the
    Fredholm value with ``g = (1 - e^{-c})`` on the window.
    """
    if cfg.experiment != "poisson_count":
        raise ValueError("config is not a poisson_count experiment")
    counts = {i: [] for i in range(len(cfg.windows))}
    for _, eigs in iter_spectra(cfg, spectra):
        for i, w in enumerate(cfg.windows):
            counts[i].append(E.count_in_window(eigs, w, cfg.kind, cfg.n))
    rows = []
    for i, w in enumerate(cfg.windows):
        c = np.asarray(counts[i], dtype=float)
        N = cfg.trials
        mean = float(c.mean())
        var = float(c.var(ddof=1)) if N > 1 else 0.0
        se_mean = math.sqrt(max(var, mean, 1.0 / N) / N)
        base = F.gap_probability(cfg.n, w, cfg.kind)
        tau = base.trace if cfg.kind == "complex" else 0.5 * base.trace
        lim_mean = math.exp(-w.threshold) if w.mode == "rescaled" else None
        rows.append(ComparisonRow(w.threshold, mean, se_mean, tau, lim_mean, (mean - tau) / se_mean, "mean_count"))
        rows.append(ComparisonRow(w.threshold, var, float("nan"), None, lim_mean, None, "variance"))
        fact2 = float(np.mean(c * (c - 1))) / mean**2 if mean > 0 else float("nan")
        rows.append(ComparisonRow(w.threshold, fact2, float("nan"), None, 1.0 if w.mode == "rescaled" else None, None, "factorial_moment_ratio_2"))
        for cc in LAPLACE_CS:
            e = np.exp(-cc * c)
            est = float(e.mean())
            se = float(e.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
            se = max(se, binomial_stderr(0, N) * (1 - math.exp(-cc)))
            gval = 1.0 - math.exp(-cc)
            fred = F.gap_probability(cfg.n, w, cfg.kind, g=lambda z, gv=gval: np.full(np.shape(z), gv)).probability
            lim = None
            if w.mode == "rescaled":
                lim = F.poisson_laplace_functional(lambda x, y, t0=w.threshold, c0=cc: c0 if x >= t0 else 0.0, w.threshold, cfg.kind)
            rows.append(ComparisonRow(w.threshold, est, se, fred, lim, (est - fred) / se, f"laplace_c={cc:g}"))
    return _result(cfg, rows, {f"counts_{i}": counts[i] for i in counts})


def run_experiment(cfg: ExperimentConfig, spectra=None) -> ExperimentResult:
    return {
        "gumbel": run_gumbel_experiment,
        "poisson_count": run_poisson_experiment,
        "radius": run_radius_experiment,
        "real_max": run_real_max_experiment,
    }[cfg.experiment](cfg, spectra)


def _result(cfg, rows, samples):
    return ExperimentResult(cfg, rows, samples, config_hash=cfg.hash())


# ---------------------------------------------------------------------------
# drift


@dataclass
class DriftRow:
    n: float
    t: float
    det: float
    limit: float
    deviation: float
    normalized_deviation: float
    trace: float
    hs_norm: float
    series_bound: float


def drift_table(ns, ts, kind, window_kw=None) -> list:
    """Finite-n gap probabilities on A(t) against the Gumbel limit."""
    rows = []
    for n in ns:
        K.gamma_n(n)
        for t in ts:
            rep = F.gap_probability(n, F.EdgeWindow.rescaled(t, **(window_kw or {})), kind)
            lim = F.gumbel_limit_cdf(t, kind)
            dev = abs(rep.probability - lim)
            ln = math.log(n)
            rows.append(DriftRow(float(n), float(t), rep.probability, lim, dev, dev * ln / math.log(ln) ** 2,
                                 rep.trace, rep.hs_norm, rep.series_bound))
    return rows


# ---------------------------------------------------------------------------
# persistence


def atomic_write_text(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_result(result: ExperimentResult, path):
    atomic_write_text(path, _dumps(result.to_json()))


def load_result(path) -> ExperimentResult:
    with open(path) as fh:
        d = json.load(fh)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"schema version {d.get('schema_version')!r} != {SCHEMA_VERSION}")
    try:
        cfg = ExperimentConfig.from_json(d["config"])
        rows = [ComparisonRow(**r) for r in d["rows"]]
        return ExperimentResult(cfg, rows, d["samples"], d["gaussian_method"], d["bit_generator"],
                                d["schema_version"], d["config_hash"], d["package_version"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed result file: {exc}") from exc


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def samples_csv(result: ExperimentResult) -> str:
    """One line per trial: ``trial, seed, <recorded statistics>``."""
    keys = sorted(result.samples)
    cols = [result.samples[k] for k in keys]
    seed = result.config.master_seed
    rows = [[i, seed, *[c[i] for c in cols]] for i in range(result.config.trials)]
    return _csv_text(["trial", "seed", *keys], rows)


def comparison_csv(rows) -> str:
    return _csv_text(["threshold", "mc", "stderr", "fredholm", "limit", "z", "label"],
                     [[r.threshold, r.mc_estimate, r.mc_stderr, r.fredholm_value, r.limit_value, r.z_score, r.label] for r in rows])


def drift_csv(rows) -> str:
    return _csv_text(["n", "t", "det", "limit", "dev", "normdev"],
                     [[r.n, r.t, r.det, r.limit, r.deviation, r.normalized_deviation] for r in rows])
