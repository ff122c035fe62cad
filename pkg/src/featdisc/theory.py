"""Correctness and robustness of a single discrete bin.

A bin holds sorted values ``v``, ground truth ``lam = lambda(v)`` and a noise
level ``sigma``; observations are ``o ~ N(lam, sigma**2)``.  Under common
discretization every value in the bin is predicted by the bin mean of ``o``.
Under local linear encoding the bin is predicted by a linear fit in ``v``.

* correctness  = E[ mean_i (lam_i - p_i)**2 ]
* robustness   = Var[ mean_i p_i ]

Closed forms provided here:

* ``analytic_correctness_cd``: population variance of ``lam`` (the
  noise-free part of the correctness);
* ``analytic_robustness_cd``: ``sigma**2 / |B|**2``;
* ``exact_robustness``: ``sigma**2 / |B|``.  All ``p_i`` equal the same bin
  mean, so the variance of their average is that of one mean of ``|B|``
  independent draws.  The Monte-Carlo estimators converge to this value, not
  to ``analytic_robustness_cd``; both are reported side by side.

Monte-Carlo trials are generated in fixed-size chunks, each chunk seeded from
``(seed, chunk_number)``, and accumulated with ``math.fsum`` so results do not
depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CHUNK = 8192
EXACT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TheoryBin:
    values: np.ndarray
    truth: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        truth = np.asarray(self.truth, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("a bin needs at least one value")
        if truth.shape != values.shape:
            raise ValueError("truth must align with values")
        if np.any(np.diff(values) < 0):
            raise ValueError("values must be sorted ascending")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "truth", truth)

    @property
    def size(self) -> int:
        return self.values.size

    @classmethod
    def from_function(cls, values, fn: Callable, sigma: float = 0.0) -> "TheoryBin":
        values = np.sort(np.asarray(values, dtype=np.float64))
        return cls(values, fn(values), sigma)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    degenerate: bool = False


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    std_error: float
    trials: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.estimate - target) <= n_se * self.std_error


def _mean(x) -> float:
    return math.fsum(x) / len(x)


def population_variance(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    m = _mean(x)
    return math.fsum((x - m) ** 2) / x.size


def _observation_chunks(b: TheoryBin, trials: int, seed: int):
    for c, start in enumerate(range(0, trials, CHUNK)):
        m = min(CHUNK, trials - start)
        if b.sigma == 0:
            yield np.broadcast_to(b.truth, (m, b.size))
        else:
            rng = np.random.default_rng([seed, c])
            yield b.truth + b.sigma * rng.standard_normal((m, b.size))


# --- fits and predictions ---------------------------------------------------

def fit_lle_bin(b: TheoryBin, observations, rule: str = "uncentered") -> LinearFit:
    """Per-bin linear fit ``p_i = v_i * slope + intercept``.

    ``rule="uncentered"`` uses slope = sum(v*o) / sum(v**2) and
    intercept = mean(o - v*slope).  ``rule="ols"`` is ordinary least squares
    with intercept (centered slope), which is the fit an
    ``alpha*e_a + beta*e_b`` lookup can realize inside one bin.
    """
    v = b.values
    o = np.asarray(observations, dtype=np.float64)
    if rule == "uncentered":
        denom = math.fsum(v * v)
        if denom == 0:
            return LinearFit(0.0, _mean(o), degenerate=True)
        slope = math.fsum(v * o) / denom
    elif rule == "ols":
        vc = v - _mean(v)
        denom = math.fsum(vc * vc)
        if denom == 0:
            return LinearFit(0.0, _mean(o), degenerate=True)
        slope = math.fsum(vc * (o - _mean(o))) / denom
    else:
        raise ValueError(f"unknown fit rule {rule!r}")
    return LinearFit(slope, _mean(o - v * slope))


def _bin_mean_predictions(b: TheoryBin, obs: np.ndarray, encoder: str) -> np.ndarray:
    """Per-trial predictions (trials, |B|) for a chunk of observations."""
    if encoder == "CD":
        return np.repeat(obs.mean(axis=1, keepdims=True), b.size, axis=1)
    if encoder == "LLE":
        v = b.values
        denom = float(v @ v)
        slope = obs @ v / denom if denom > 0 else np.zeros(obs.shape[0])
        intercept = (obs - slope[:, None] * v).mean(axis=1)
        return slope[:, None] * v + intercept[:, None]
    raise ValueError(f"unknown encoder {encoder!r}")


# --- Monte-Carlo estimators --------------------------------------------------

def _std_error(samples: np.ndarray) -> float:
    if samples.size < 2:
        return 0.0
    shifted = samples - samples[0]
    m = _mean(shifted)
    var = math.fsum((shifted - m) ** 2) / (samples.size - 1)
    return math.sqrt(var / samples.size)


def mc_correctness(b: TheoryBin, encoder: str = "CD", trials: int = 10_000, seed: int = 0) -> EstimatorResult:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    per_trial = []
    for obs in _observation_chunks(b, trials, seed):
        p = _bin_mean_predictions(b, obs, encoder)
        per_trial.append(((b.truth - p) ** 2).mean(axis=1))
    errs = np.concatenate(per_trial)
    return EstimatorResult(_mean(errs), _std_error(errs), trials)


def mc_correctness_cd(b: TheoryBin, trials: int = 10_000, seed: int = 0) -> EstimatorResult:
    return mc_correctness(b, "CD", trials, seed)


def _jackknife_variance(x: np.ndarray) -> tuple[float, float]:
    """Sample variance (ddof=1) and its delete-one jackknife standard error."""
    n = x.size
    d = x - x[0]  # exact zeros when every trial agrees
    m = _mean(d)
    dev = d - m
    q = math.fsum(dev * dev)
    var = q / (n - 1)
    if n < 3:
        return var, math.inf
    loo = (q - dev * dev * n / (n - 1)) / (n - 2)
    loo_mean = _mean(loo)
    se = math.sqrt((n - 1) / n * math.fsum((loo - loo_mean) ** 2))
    return var, se


def mc_robustness(b: TheoryBin, encoder: str = "CD", trials: int = 100_000, seed: int = 0) -> EstimatorResult:
    """Variance across trials of the bin-mean prediction ``mean_i p_i``."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    means = np.concatenate([
        _bin_mean_predictions(b, obs, encoder).mean(axis=1) for obs in _observation_chunks(b, trials, seed)
    ])
    var, se = _jackknife_variance(means)
    return EstimatorResult(var, se, trials)


# --- closed forms ------------------------------------------------------------

def analytic_correctness_cd(b: TheoryBin) -> float:
    return population_variance(b.truth)


def analytic_robustness_cd(b: TheoryBin) -> float:
    return b.sigma**2 / b.size**2


def exact_robustness(b: TheoryBin) -> float:
    return b.sigma**2 / b.size


def lle_slope(b: TheoryBin, rule: str = "ols") -> float | None:
    """Slope applied to the centered values; None when undefined."""
    v, lam = b.values, b.truth
    if rule == "uncentered":
        denom = math.fsum(v * v)
        return None if denom == 0 else math.fsum(v * lam) / denom
    if rule == "ols":
        vc = v - _mean(v)
        denom = math.fsum(vc * vc)
        return None if denom == 0 else math.fsum(vc * (lam - _mean(lam))) / denom
    raise ValueError(f"unknown slope rule {rule!r}")


def analytic_correctness_lle(b: TheoryBin, rule: str = "ols") -> float:
    """Mean squared residual of ``lam`` after removing its mean and a slope
    times the centered values.

    ``rule="ols"`` uses the least-squares slope (the best line through the
    bin).  ``rule="uncentered"`` uses the uncentered ratio sum(v*lam)/sum(v**2)
    with the centered multiplier; it can exceed the CD value when the bin is
    far from the origin.  An undefined slope falls back to the CD value (see
    ``lle_degenerate``).
    """
    slope = lle_slope(b, rule)
    if slope is None:
        return analytic_correctness_cd(b)
    resid = (b.truth - _mean(b.truth)) - slope * (b.values - _mean(b.values))
    return math.fsum(resid * resid) / b.size


def lle_degenerate(b: TheoryBin, rule: str = "ols") -> bool:
    return lle_slope(b, rule) is None


# --- lemma verifiers ---------------------------------------------------------

def between_group_variance(first, second) -> float:
    """Variance of two equal-size sub-bin means around their pooled mean."""
    m1, m2 = _mean(first), _mean(second)
    m = (m1 + m2) / 2
    return ((m1 - m) ** 2 + (m2 - m) ** 2) / 2


@dataclass
class Lemma1Report:
    bins_checked: int = 0
    mean_coarse: float = 0.0
    mean_fine: float = 0.0
    max_decomposition_error: float = 0.0
    equality_splits: int = 0
    strict_splits: int = 0
    violations: int = 0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.max_decomposition_error <= 1e-9


def verify_lemma1(values, truth, k_small: int, k_large: int) -> Lemma1Report:
    """Split each of ``k_small`` equal-occupancy bins into equal halves and
    check that mean correctness does not increase and that
    ``V = (V1 + V2) / 2 + BGV`` holds.
    """
    if k_large != 2 * k_small:
        raise ValueError("k_large must be twice k_small")
    values = np.asarray(values, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    lam = truth[order]
    report = Lemma1Report()
    coarse, fine = [], []
    for i, chunk in enumerate(np.array_split(np.arange(lam.size), k_small)):
        if chunk.size < 2 or chunk.size % 2:
            report.notes.append(f"bin {i}: occupancy {chunk.size} cannot be halved, skipped")
            continue
        whole = lam[chunk]
        h = chunk.size // 2
        first, second = whole[:h], whole[h:]
        v, v1, v2 = population_variance(whole), population_variance(first), population_variance(second)
        bgv = between_group_variance(first, second)
        report.max_decomposition_error = max(report.max_decomposition_error, abs(v - ((v1 + v2) / 2 + bgv)))
        coarse.append(v)
        fine.extend([v1, v2])
        if bgv == 0:
            report.equality_splits += 1
        else:
            report.strict_splits += 1
        if (v1 + v2) / 2 > v + EXACT_TOL:
            report.violations += 1
    report.bins_checked = len(coarse)
    if coarse:
        report.mean_coarse = math.fsum(coarse) / len(coarse)
        report.mean_fine = math.fsum(fine) / len(fine)
        if report.mean_fine > report.mean_coarse + EXACT_TOL:
            report.violations += 1
    return report


@dataclass
class Lemma3Report:
    bins: int = 0
    violations: int = 0
    uncentered_violations: int = 0
    max_uncentered_excess: float = 0.0
    degenerate: int = 0
    equalities: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0


def verify_lemma3(bins) -> Lemma3Report:
    """LLE correctness never exceeds CD correctness on any bin.

    The verdict uses the least-squares slope; violations of the uncentered-slope
    variant are counted alongside for comparison.
    """
    report = Lemma3Report()
    for b in bins:
        report.bins += 1
        cd = analytic_correctness_cd(b)
        lle = analytic_correctness_lle(b, "ols")
        uncentered = analytic_correctness_lle(b, "uncentered")
        report.degenerate += lle_degenerate(b, "ols")
        if lle > cd + EXACT_TOL:
            report.violations += 1
        if abs(lle - cd) <= EXACT_TOL:
            report.equalities += 1
        if uncentered > cd + EXACT_TOL:
            report.uncentered_violations += 1
            report.max_uncentered_excess = max(report.max_uncentered_excess, uncentered - cd)
    return report


# --- random ground-truth functions -------------------------------------------

def random_truth_function(rng: np.random.Generator):
    """Draw a polynomial (degree <= 3, coefficients U(-2, 2)), a sinusoid
    (amplitude U(0.5, 2), frequency U(0.5, 5), phase U(0, 2pi)) or a step
    function (1-4 breakpoints U(-3, 3), heights U(-2, 2)).
    """
    family = ("polynomial", "sinusoid", "step")[rng.integers(3)]
    if family == "polynomial":
        coef = rng.uniform(-2, 2, size=rng.integers(1, 4) + 1)
        return family, lambda v: np.polyval(coef, v)
    if family == "sinusoid":
        a, w, phi = rng.uniform(0.5, 2), rng.uniform(0.5, 5), rng.uniform(0, 2 * np.pi)
        return family, lambda v: a * np.sin(w * v + phi)
    breaks = np.sort(rng.uniform(-3, 3, size=rng.integers(1, 5)))
    heights = rng.uniform(-2, 2, size=breaks.size + 1)
    return family, lambda v: heights[np.searchsorted(breaks, v, side="right")]


def random_field(rng: np.random.Generator, n: int = 400):
    """Sorted values ~ U(-3, 3) and a random truth; returns (family, values, truth)."""
    family, fn = random_truth_function(rng)
    values = np.sort(rng.uniform(-3, 3, size=n))
    return family, values, fn(values)


def random_bin(rng: np.random.Generator, sigma: float = 0.0) -> TheoryBin:
    """A bin of 2-50 sorted values on a random sub-interval of (-3, 3)."""
    family, fn = random_truth_function(rng)
    lo = rng.uniform(-3, 2.5)
    hi = rng.uniform(lo + 0.05, 3)
    values = np.sort(rng.uniform(lo, hi, size=rng.integers(2, 51)))
    return TheoryBin(values, fn(values), sigma)


# --- campaigns -----------------------------------------------------------------

def lemma1_campaign(n_fields: int = 100, seed: int = 0, n: int = 400, k_small: int = 10):
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(n_fields):
        family, values, truth = random_field(rng, n)
        reports.append((family, verify_lemma1(values, truth, k_small, 2 * k_small)))
    return reports


def lemma3_campaign(n_bins: int = 100, seed: int = 0) -> Lemma3Report:
    rng = np.random.default_rng(seed)
    return verify_lemma3([random_bin(rng) for _ in range(n_bins)])


@dataclass(frozen=True)
class RobustnessCell:
    size: int
    sigma: float
    closed_form: float
    exact: float
    cd: EstimatorResult
    lle: EstimatorResult

    @property
    def closed_form_match_cd(self) -> bool:
        return self.cd.within(self.closed_form)

    @property
    def closed_form_match_lle(self) -> bool:
        return self.lle.within(self.closed_form)

    @property
    def lle_matches_cd(self) -> bool:
        se = math.hypot(self.cd.std_error, self.lle.std_error)
        return abs(self.cd.estimate - self.lle.estimate) <= 3 * se


def robustness_bin(size: int, sigma: float) -> TheoryBin:
    """Evenly spaced values on [1, 2] with truth sin(v); robustness does not
    depend on the truth."""
    values = np.linspace(1.0, 2.0, size)
    return TheoryBin(values, np.sin(values), sigma)


def robustness_grid(sizes=(2, 4, 8, 16), sigmas=(0.5, 1.0, 2.0), trials: int = 100_000, seed: int = 0):
    """CD and LLE Monte-Carlo robustness on matched seeds for every cell."""
    cells = []
    for sigma in sigmas:
        for size in sizes:
            b = robustness_bin(size, sigma)
            cell_seed = int(seed * 1_000_003 + size * 101 + round(sigma * 1000))
            cells.append(RobustnessCell(
                size, sigma, analytic_robustness_cd(b), exact_robustness(b),
                mc_robustness(b, "CD", trials, cell_seed), mc_robustness(b, "LLE", trials, cell_seed),
            ))
    return cells
