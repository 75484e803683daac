"""Monte Carlo study of perpetual integrals I^x = integral of f(x + xi_s) ds.

Truncated integrals I^x_T are computed exactly on piecewise-linear path
skeletons (constant pieces contribute f * duration; linear sweeps integrate
f over the swept value window through its primitive) and by the trapezoid
rule on diffusion grids (left-endpoint rule for step functions, matching
cadlag paths).  Almost-sure finiteness is a zero-one event; the horizon
ladder diagnosis extrapolates finite-T samples toward it and says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as _rng
from .functions import TestFunction
from .models import LevyModel, PathSample, describe, simulate_path

__all__ = [
    "TailEstimate",
    "IDistribution",
    "Verdict",
    "LSetApprox",
    "BattyReport",
    "MgfReport",
    "integral_along_path",
    "integral_at_times",
    "estimate_I_distribution",
    "finiteness_diagnosis",
    "estimate_L_set",
    "batty_inequality_check",
    "khasminskii_exponential_check",
    "bootstrap_outcome_consistency",
]

# A path is "censored" at horizon T when the final 10% window still accrues
# more than this fraction of the running integral: the integral has visibly
# not settled.  (A literal "f(x + xi_T) > 0" reading would flag every path
# for strictly positive f like exp(-y), which is useless.)
CENSOR_WINDOW = 0.1
CENSOR_REL_ACCRUAL = 1e-3

PLATEAU_GROWTH = 0.02       # relative median growth between the last two rungs
PLATEAU_CENSORED = 0.05     # max censored fraction for a finite verdict
GROWTH_TSTAT = 5.0          # t-statistic of the log-horizon slope for infinite


def _segment_contributions(f: TestFunction, path: PathSample, x: float) -> np.ndarray:
    """Integral of f(x + path) over each inter-sample segment."""
    t0, dt, v0 = path.segments()
    if path.exact:
        r = path.linear_rate
        if r == 0.0:
            return f(x + v0) * dt
        return f.integral_on(x + v0, x + v0 + r * dt) / r
    v1 = path.values[1:]
    if f.kind == "step":
        return f(x + v0) * dt
    return 0.5 * (f(x + v0) + f(x + v1)) * dt


def integral_along_path(f: TestFunction, path: PathSample, x: float = 0.0) -> float:
    """Truncated perpetual integral of f(x + xi) over the whole path."""
    return float(_segment_contributions(f, path, x).sum())


def integral_at_times(f: TestFunction, path: PathSample, x: float, at: np.ndarray) -> np.ndarray:
    """Running integral evaluated at sorted times within [0, horizon]."""
    at = np.asarray(at, float)
    if np.any(at < 0) or np.any(at > path.horizon * (1 + 1e-12)):
        raise ValueError("evaluation times must lie within the path horizon")
    contrib = _segment_contributions(f, path, x)
    cum = np.concatenate([[0.0], np.cumsum(contrib)])
    t0, dt, v0 = path.segments()
    idx = np.clip(np.searchsorted(path.times, at, side="right") - 1, 0, len(dt) - 1)
    tau = np.clip(at - t0[idx], 0.0, dt[idx])
    if path.exact:
        r = path.linear_rate
        if r == 0.0:
            partial = f(x + v0[idx]) * tau
        else:
            partial = f.integral_on(x + v0[idx], x + v0[idx] + r * tau) / r
    else:
        partial = contrib[idx] * tau / dt[idx]   # linear share of the cell
    return cum[idx] + partial


@dataclass
class TailEstimate:
    """Empirical tail probability G_a = P(I > a) with binomial error."""

    a: float
    g_hat: float
    stderr: float
    paths: int

    def __post_init__(self):
        if not 0.0 <= self.g_hat <= 1.0:
            raise ValueError("g_hat must lie in [0, 1]")


@dataclass
class IDistribution:
    """Summary of samples of the truncated integral I^x_T."""

    x: float
    horizon: float
    samples: np.ndarray
    censored: np.ndarray
    tails: list[TailEstimate]
    meta: dict

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean())

    def quantile(self, q) -> np.ndarray:
        return np.quantile(self.samples, q)


def _ladder_samples(f, model, x, rungs, paths, seed, step, threads):
    """Per-path running integrals at each rung and at 0.9 * rung.

    One path per index serves every rung (the running integral is
    nondecreasing in the horizon along a fixed path), which couples the
    ladder and keeps the cost of k rungs equal to one long horizon.
    """
    rungs = np.asarray(sorted(rungs), float)
    horizon = float(rungs[-1])
    eval_times = np.concatenate([rungs, (1.0 - CENSOR_WINDOW) * rungs])
    order = np.argsort(eval_times)
    eval_sorted = eval_times[order]
    inv = np.argsort(order)

    def worker(a, b):
        vals = np.empty((b - a, len(eval_times)))
        for i in range(a, b):
            path = simulate_path(model, horizon, step=step,
                                 rng=_rng.derive_rng(seed, _rng.STREAM_PATH, i))
            vals[i - a] = integral_at_times(f, path, x, eval_sorted)[inv]
        return vals

    parts = _rng.map_chunks(paths, worker, threads=threads)
    allvals = np.vstack(parts)
    at_rungs = allvals[:, :len(rungs)]
    at_early = allvals[:, len(rungs):]
    # censored: the last 10% of the horizon still contributes materially
    censored = (at_rungs - at_early) > np.maximum(CENSOR_REL_ACCRUAL * at_rungs, 1e-12)
    return rungs, at_rungs, censored


def estimate_I_distribution(
    f: TestFunction,
    model: LevyModel,
    x: float,
    horizon: float,
    paths: int,
    seed: int,
    a_values: Sequence[float] = (),
    step: Optional[float] = None,
    threads: int = 1,
) -> IDistribution:
    """Sample I^x_T over independent paths; report tails for each a."""
    rungs, vals, censored = _ladder_samples(f, model, x, [horizon], paths, seed, step, threads)
    samples = vals[:, 0]
    cens = censored[:, 0]
    tails = []
    for a in sorted(float(a) for a in a_values):
        g = float((samples > a).mean())
        tails.append(TailEstimate(a=a, g_hat=g,
                                  stderr=float(math.sqrt(max(g * (1 - g), 1e-12) / paths)),
                                  paths=paths))
    meta = {"model": describe(model), "f": f.name, "paths": paths,
            "horizon": float(horizon), "master_seed": seed}
    return IDistribution(x=float(x), horizon=float(horizon), samples=samples,
                         censored=cens, tails=tails, meta=meta)


@dataclass
class Verdict:
    """Finiteness verdict from the horizon-ladder plateau test.

    Almost-sure finiteness of the full integral is a zero-one event; this
    verdict extrapolates a finite-horizon ladder and records the evidence it
    extrapolated from.
    """

    outcome: str                       # finite | infinite | inconclusive
    evidence: dict
    note: str = ("P(I < inf) is 0 or 1 for these models; the ladder verdict "
                 "extrapolates finite-horizon medians toward that dichotomy")

    def __post_init__(self):
        if self.outcome not in ("finite", "infinite", "inconclusive"):
            raise ValueError(f"unknown outcome {self.outcome!r}")


def _classify_plateau(rungs, medians, censored_last):
    m_prev, m_last = medians[-2], medians[-1]
    if m_prev <= 0.0:
        growth = 0.0 if m_last <= 0.0 else math.inf
    else:
        growth = (m_last - m_prev) / m_prev
    if growth < PLATEAU_GROWTH and censored_last < PLATEAU_CENSORED:
        return "finite", growth, None
    logt = np.log(rungs)
    slope, intercept = np.polyfit(logt, medians, 1)
    resid = medians - (slope * logt + intercept)
    dof = max(len(rungs) - 2, 1)
    s2 = float(resid @ resid) / dof
    denom = float(((logt - logt.mean()) ** 2).sum())
    se = math.sqrt(s2 / denom) if denom > 0 else math.inf
    tstat = slope / se if se > 0 else math.inf * np.sign(slope)
    if slope > 0 and tstat > GROWTH_TSTAT:
        return "infinite", growth, float(tstat)
    return "inconclusive", growth, float(tstat) if math.isfinite(tstat) else None


def finiteness_diagnosis(
    f: TestFunction,
    model: LevyModel,
    x: float,
    rungs: Sequence[float],
    paths: int,
    seed: int,
    step: Optional[float] = None,
    threads: int = 1,
) -> Verdict:
    """Plateau test on a horizon ladder.

    Median I^x_T stable between the last two rungs with few censored paths
    reads as finite; a significantly positive trend of the median against
    log-horizon reads as infinite; otherwise inconclusive.
    """
    rungs = sorted(float(t) for t in rungs)
    if len(rungs) < 3:
        raise ValueError("ladder needs at least 3 horizons")
    if any(b <= a for a, b in zip(rungs[:-1], rungs[1:])):
        raise ValueError("ladder horizons must be strictly increasing")
    rung_arr, vals, censored = _ladder_samples(f, model, x, rungs, paths, seed, step, threads)
    medians = np.median(vals, axis=0)
    outcome, growth, tstat = _classify_plateau(rung_arr, medians, float(censored[:, -1].mean()))
    evidence = {
        "rungs": [float(t) for t in rung_arr],
        "medians": [float(m) for m in medians],
        "means": [float(m) for m in vals.mean(axis=0)],
        "censored_fraction": [float(c) for c in censored.mean(axis=0)],
        "median_growth_last": float(growth) if math.isfinite(growth) else "inf",
        "log_slope_tstat": tstat,
        "paths": paths,
        "model": describe(model),
        "f": f.name,
        "x": float(x),
        "master_seed": seed,
    }
    return Verdict(outcome=outcome, evidence=evidence)


def bootstrap_outcome_consistency(
    rungs: np.ndarray,
    ladder_values: np.ndarray,
    censored: np.ndarray,
    resamples: int,
    seed: int,
) -> float:
    """Fraction of path-bootstrap resamples reproducing the full-sample verdict."""
    rungs = np.asarray(rungs, float)
    outcome, _, _ = _classify_plateau(rungs, np.median(ladder_values, axis=0),
                                      float(censored[:, -1].mean()))
    rng = _rng.derive_rng(seed, _rng.STREAM_BOOTSTRAP)
    n = len(ladder_values)
    same = 0
    for _ in range(resamples):
        pick = rng.integers(0, n, size=n)
        o, _, _ = _classify_plateau(rungs, np.median(ladder_values[pick], axis=0),
                                    float(censored[pick, -1].mean()))
        same += o == outcome
    return same / resamples


@dataclass
class LSetApprox:
    """Empirical sublevel set of x -> G_a(x) = P(I^x > a)."""

    a: float
    q: float
    xs: np.ndarray
    g_hat: np.ndarray
    stderr: np.ndarray
    member: np.ndarray
    meta: dict

    def __post_init__(self):
        if np.any(self.g_hat < 0) or np.any(self.g_hat > 1):
            raise ValueError("g_hat must lie in [0, 1]")
        if self.member.shape != self.xs.shape:
            raise ValueError("member flags must align with the x grid")


def estimate_L_set(
    f: TestFunction,
    model: LevyModel,
    a: float,
    q: float,
    x_grid: Sequence[float],
    horizon: float,
    paths: int,
    seed: int,
    step: Optional[float] = None,
    threads: int = 1,
) -> LSetApprox:
    """Mark grid points x where the estimated tail G_a(x) is at most q.

    All starting points share the same simulated paths (seeds depend only on
    the path index), so for nonincreasing f the estimated I^x are coupled
    monotonically in x and the member set inherits that stability.
    """
    xs = np.asarray(sorted(float(v) for v in x_grid))
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")

    def worker(lo, hi):
        counts = np.zeros(len(xs))
        for i in range(lo, hi):
            path = simulate_path(model, horizon, step=step,
                                 rng=_rng.derive_rng(seed, _rng.STREAM_PATH, i))
            for j, x in enumerate(xs):
                counts[j] += integral_along_path(f, path, x) > a
        return counts

    parts = _rng.map_chunks(paths, worker, threads=threads)
    counts = np.zeros(len(xs))
    for c in parts:
        counts += c
    g = counts / paths
    stderr = np.sqrt(np.maximum(g * (1 - g), 1e-12) / paths)
    return LSetApprox(a=float(a), q=float(q), xs=xs, g_hat=g, stderr=stderr,
                      member=g <= q,
                      meta={"model": describe(model), "f": f.name, "paths": paths,
                            "horizon": float(horizon), "master_seed": seed})


@dataclass
class BattyReport:
    """Truncated-moment inequality check: beta * E[I^x_t] <= a."""

    a: float
    t: float
    x: float
    beta_hat: float
    beta_argmin: float
    mean_i: float
    lhs: float
    rhs: float
    stderr_lhs: float
    holds: bool
    caveats: list[str]


def batty_inequality_check(
    f: TestFunction,
    model: LevyModel,
    x: float,
    a: float,
    t: float,
    n_outer: int,
    seed: int,
    n_inner: Optional[int] = None,
    probe_points: int = 64,
    probe_window: Optional[tuple[float, float]] = None,
    step: Optional[float] = None,
) -> BattyReport:
    """Check beta_hat * mean(I^x_t) <= a + 3 propagated standard errors.

    beta_hat is the minimum over a probe grid on the support of f of the
    inner-estimated P(I^y_t <= a); inner runs use nested seeds
    (master, probe index, path index).  The minimum of noisy estimates is
    biased low, which only makes the check conservative; that caveat and any
    probe-window truncation are recorded.
    """
    caveats = ["beta_hat is a minimum of noisy estimates (biased low, conservative)"]
    if probe_window is None:
        lo, hi = f.support
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo = min(0.0, x)
            hi = lo + 20.0
            caveats.append(f"unbounded support truncated to probe window ({lo:g}, {hi:g})")
        probe_window = (lo, hi)
    if n_inner is None:
        n_inner = max(8, int(round(math.sqrt(n_outer))))
    probes = np.linspace(probe_window[0], probe_window[1], probe_points)

    p_hat = np.empty(probe_points)
    for j, y in enumerate(probes):
        below = 0
        for i in range(n_inner):
            path = simulate_path(model, t, step=step,
                                 rng=_rng.derive_rng(seed, _rng.STREAM_INNER, j, i))
            below += integral_along_path(f, path, float(y)) <= a
        p_hat[j] = below / n_inner
    j_min = int(np.argmin(p_hat))
    beta = float(p_hat[j_min])
    se_beta = math.sqrt(max(beta * (1 - beta), 1e-12) / n_inner)

    outer = np.empty(n_outer)
    for i in range(n_outer):
        path = simulate_path(model, t, step=step,
                             rng=_rng.derive_rng(seed, _rng.STREAM_PATH, i))
        outer[i] = integral_along_path(f, path, x)
    mean_i = float(outer.mean())
    se_mean = float(outer.std(ddof=1) / math.sqrt(n_outer)) if n_outer > 1 else 0.0

    lhs = beta * mean_i
    se_lhs = math.sqrt((beta * se_mean) ** 2 + (mean_i * se_beta) ** 2)
    # f locally bounded and t finite make I^x_t finite surely, so the
    # right-hand side probability is 1 and rhs reduces to a.
    rhs = float(a)
    return BattyReport(a=float(a), t=float(t), x=float(x), beta_hat=beta,
                       beta_argmin=float(probes[j_min]), mean_i=mean_i, lhs=float(lhs),
                       rhs=rhs, stderr_lhs=float(se_lhs),
                       holds=bool(lhs <= rhs + 3.0 * se_lhs), caveats=caveats)


@dataclass
class MgfReport:
    """Empirical exponential moment of the perpetual integral."""

    theta: float
    empirical_mgf: float
    log_mgf: float
    stable: bool
    half_sample_change: float
    trimmed_change: float
    warning: Optional[str]
    meta: dict


def khasminskii_exponential_check(
    f: TestFunction,
    model: LevyModel,
    x: float,
    theta: float,
    horizon: float,
    paths: int,
    seed: int,
    j_value: Optional[float] = None,
    override: bool = False,
    step: Optional[float] = None,
    threads: int = 1,
) -> MgfReport:
    """Estimate E[exp(theta * I^x_T)] with overflow-safe accumulation.

    When the uniform potential bound J is supplied and theta >= 1/J the
    estimate sits outside the guaranteed-finite range; the run refuses
    unless ``override=True``, and then carries a warning.  Stability screen:
    the estimate moves < 10% between the half sample and the full sample and
    < 25% when the top 1% of the sample is excluded.
    """
    warning = None
    if j_value is not None and j_value > 0 and theta >= 1.0 / j_value - 1e-12:
        warning = (f"theta={theta:g} is at or above 1/J={1.0 / j_value:g}; "
                   "the exponential moment is not guaranteed finite")
        if not override:
            raise ValueError(warning + " (pass override=True to force)")

    dist = estimate_I_distribution(f, model, x, horizon, paths, seed, step=step, threads=threads)
    expo = theta * dist.samples

    def log_mean_exp(v):
        m = float(np.max(v))
        return m + math.log(float(np.mean(np.exp(v - m))))

    log_mgf = log_mean_exp(expo)
    half = log_mean_exp(expo[: max(1, paths // 2)])
    change_half = abs(math.exp(half - log_mgf) - 1.0)
    k = max(1, int(0.01 * paths))
    trimmed = log_mean_exp(np.sort(expo)[:-k])
    change_trim = abs(math.exp(trimmed - log_mgf) - 1.0)
    stable = change_half < 0.10 and change_trim < 0.25
    return MgfReport(theta=float(theta), empirical_mgf=float(math.exp(log_mgf)),
                     log_mgf=float(log_mgf), stable=bool(stable),
                     half_sample_change=float(change_half), trimmed_change=float(change_trim),
                     warning=warning,
                     meta={**dist.meta, "theta": float(theta),
                           "censored_fraction": dist.censored_fraction})
