"""Mechanical reconstruction of two counterexamples to naive tail tests.

1. A lattice compound Poisson process with an integrand vanishing on the
   lattice: the tail Lebesgue integral diverges while the perpetual
   integral is identically zero.
2. A sparse train of narrow unit-mass bumps placed where a subordinator
   almost never lands ("transient trap"): the tail integral diverges while
   the perpetual integral is almost surely finite.  Bump placement is
   certified from empirical overshoot distributions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as _rng
from .criteria import RegionSpec, dk_test, potential_integral
from .functions import TestFunction, lattice_sine, triangle_train
from .models import LevyModel, TruncatedStable, describe, simulate_path
from .perpetual import _classify_plateau, integral_at_times
from .potential import estimate_potential

__all__ = [
    "OvershootTable",
    "TrapConstruction",
    "TrapConstructionError",
    "estimate_overshoot_cdf",
    "build_transient_trap",
    "lattice_counterexample",
    "verify_counterexample",
    "dkw_halfwidth",
]

# Overshoot sampling refines the small-jump cutoff near the target level:
# far from the level a coarse cutoff is cheap; the final approach switches
# to a fine cutoff so that crossings via the small-jump compensation drift
# (recorded as mass at 0+, the conservative direction) stay rare.
COARSE_CUTOFF_FRACTION = 1e-4
FINE_CUTOFF_FRACTION = 1e-8
SWITCH_MARGIN = 1.1          # times the max jump size r

DKW_CONFIDENCE = 0.99


class TrapConstructionError(RuntimeError):
    """The overshoot table cannot certify the bump bounds to the requested depth."""


def dkw_halfwidth(n: int, confidence: float = DKW_CONFIDENCE) -> float:
    """Uniform empirical-CDF confidence band half-width at the given level."""
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


@dataclass
class OvershootTable:
    """Empirical first-passage overshoot CDFs at increasing levels.

    ``cdfs[i, j]`` estimates P(overshoot over levels[i] <= eps_grid[j]).
    The CDF at the largest level doubles as the proxy for the stationary
    overshoot law; ``limit_gap`` records the sup-distance between the two
    largest levels as a convergence diagnostic.
    """

    levels: np.ndarray
    eps_grid: np.ndarray
    cdfs: np.ndarray
    paths_per_level: int
    creep_fraction: np.ndarray       # crossings via the compensation drift
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        if np.any(np.diff(self.eps_grid) <= 0):
            raise ValueError("eps grid must be strictly increasing")
        if self.cdfs.shape != (len(self.levels), len(self.eps_grid)):
            raise ValueError("cdf table shape mismatch")
        if np.any(self.cdfs < 0) or np.any(self.cdfs > 1) or np.any(np.diff(self.cdfs, axis=1) < 0):
            raise ValueError("each CDF row must be nondecreasing within [0, 1]")

    @property
    def limit_proxy(self) -> np.ndarray:
        return self.cdfs[-1]

    @property
    def limit_gap(self) -> float:
        if len(self.levels) < 2:
            return math.nan
        return float(np.abs(self.cdfs[-1] - self.cdfs[-2]).max())

    @property
    def dkw99(self) -> float:
        return dkw_halfwidth(self.paths_per_level)


def _overshoot_one_path(jumps: TruncatedStable, level: float, rng: np.random.Generator,
                        block: int = 8192) -> tuple[float, bool]:
    """Overshoot of the compensated-jump skeleton over ``level``.

    Returns (overshoot, crossed_by_drift).  Runs with a coarse cutoff until
    within SWITCH_MARGIN * r of the level, then restarts with the fine
    cutoff for the final approach.
    """
    r = jumps.cutoff
    pos = 0.0
    t = 0.0
    switch_at = level - SWITCH_MARGIN * r
    for eps, stop in ((COARSE_CUTOFF_FRACTION * r, switch_at), (FINE_CUTOFF_FRACTION * r, level)):
        if pos > stop:
            continue
        rate = jumps.tail_mass(eps)
        drift = jumps.small_jump_drift(eps)
        while True:
            gaps = rng.exponential(1.0 / rate, size=block)
            sizes = jumps.sample_jumps(rng, block, eps)
            times = t + np.cumsum(gaps)
            positions = pos + drift * (times - t) + np.cumsum(sizes)
            crossed = positions > stop
            if crossed.any():
                k = int(np.argmax(crossed))
                before = positions[k] - sizes[k]           # value just before jump k
                if before > stop:
                    # the drift segment crossed first; cut exactly at the boundary
                    if stop == level:
                        return 0.0, True
                    pos, t = stop, t  # time bookkeeping is irrelevant past the cut
                    break
                if stop == level:
                    return float(positions[k] - level), False
                pos, t = float(positions[k]), float(times[k])
                break
            pos, t = float(positions[-1]), float(times[-1])
    # pos is just above switch_at (or exactly at the drift cut); the fine
    # loop above always terminates by crossing the level, so reaching here
    # means the coarse stage ended exactly at the cut and the fine stage ran.
    raise AssertionError("unreachable")


def estimate_overshoot_cdf(
    model: LevyModel,
    levels: Sequence[float],
    paths: int,
    seed: int,
    eps_grid: Optional[np.ndarray] = None,
    threads: int = 1,
    allow_degenerate: bool = False,
) -> OvershootTable:
    """Tabulate empirical overshoot CDFs of a subordinator at several levels.

    The model must be a driftless truncated stable subordinator (infinite
    activity, jumps bounded by the truncation level) unless
    ``allow_degenerate=True``; atomic jump laws make the overshoot
    distribution lattice-degenerate and useless for trap construction.
    Crossings via the small-jump compensation drift are counted as overshoot
    mass at 0+ (conservative for small-overshoot bounds) and reported.
    """
    jumps = model.jumps
    if not isinstance(jumps, TruncatedStable) or model.drift != 0.0 or model.gaussian_var != 0.0:
        if not allow_degenerate:
            raise ValueError("overshoot tables need a driftless truncated stable subordinator "
                             "(pass allow_degenerate=True to override)")
    levels = np.asarray(sorted(float(v) for v in levels))
    if np.any(levels <= 0):
        raise ValueError("levels must be positive")
    if eps_grid is None:
        eps_grid = np.geomspace(1e-9, jumps.cutoff if isinstance(jumps, TruncatedStable) else 1.0, 181)
    eps_grid = np.asarray(eps_grid, float)

    cdfs = np.empty((len(levels), len(eps_grid)))
    creep = np.empty(len(levels))
    for li, level in enumerate(levels):
        def worker(a, b, _level=level, _li=li):
            counts = np.zeros(len(eps_grid))
            n_creep = 0
            for i in range(a, b):
                rng = _rng.derive_rng(seed, _rng.STREAM_PATH, _li, i)
                if isinstance(jumps, TruncatedStable):
                    over, by_drift = _overshoot_one_path(jumps, _level, rng)
                else:
                    mean = model.mean if math.isfinite(model.mean) else 1.0
                    path = simulate_path(model, max(8.0 * (_level + 1.0) / mean, 8.0), rng=rng)
                    from .models import first_passage
                    rec = first_passage(path, _level)
                    if rec.censored:
                        continue
                    over, by_drift = rec.overshoot, rec.hit_exactly and rec.overshoot == 0.0
                n_creep += by_drift
                counts += over <= eps_grid
            return counts, n_creep

        parts = _rng.map_chunks(paths, worker, threads=threads)
        counts = np.zeros(len(eps_grid))
        n_creep = 0
        for c, nc in parts:
            counts += c
            n_creep += nc
        cdfs[li] = counts / paths
        creep[li] = n_creep / paths

    meta = {"model": describe(model), "paths_per_level": paths, "master_seed": seed,
            "coarse_cutoff_fraction": COARSE_CUTOFF_FRACTION,
            "fine_cutoff_fraction": FINE_CUTOFF_FRACTION}
    return OvershootTable(levels=levels, eps_grid=eps_grid, cdfs=cdfs,
                          paths_per_level=paths, creep_fraction=creep, meta=meta)


@dataclass
class TrapConstruction:
    """Certified placement of narrow bumps where the process rarely lands.

    Bump n (1-based) sits on (alpha_n, beta_n) with width eps_n and unit
    mass.  The recursion is alpha_1 = x_1, beta_n = alpha_n + eps_n,
    alpha_{n+1} = alpha_n + 1 + x_{n+1}; the certificate records, per n, the
    empirical overshoot bounds backing the 1/(2 n^2) visit cap.
    """

    x_levels: np.ndarray
    eps: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    f: TestFunction
    trap_set: RegionSpec             # the union of bump intervals (= complement of E)
    certificate: list[dict]
    safety: float
    tail_bound: float                # sum over unbuilt depths of 2/n^2
    meta: dict

    @property
    def n_max(self) -> int:
        return len(self.alpha)

    @property
    def certified_visit_bound(self) -> float:
        return float(sum(c["certified_cap"] for c in self.certificate))

    def complement_region(self) -> RegionSpec:
        """The region E on which f vanishes (everything off the bumps)."""
        return RegionSpec(intervals=[(a, b) for a, b in zip(self.alpha, self.beta)],
                          describes_complement=True, name="off_trap")

    def to_dict(self) -> dict:
        return {
            "x_levels": [float(v) for v in self.x_levels],
            "eps": [float(v) for v in self.eps],
            "alpha": [float(v) for v in self.alpha],
            "beta": [float(v) for v in self.beta],
            "safety": self.safety,
            "tail_bound": self.tail_bound,
            "certified_visit_bound": self.certified_visit_bound,
            "certificate": self.certificate,
            "meta": self.meta,
        }


def build_transient_trap(table: OvershootTable, n_max: int, safety: float = 2.0) -> TrapConstruction:
    """Select (eps_n, x_n) from the overshoot table and assemble the trap.

    eps_n is the largest grid value whose limit-proxy CDF is at most
    1 / (2 * safety * n^2); x_n is the smallest tabulated level whose CDF at
    eps_n is within the safety factor of the limit proxy.  Both sequences
    are forced strictly monotone.  The per-n certified visit cap is the
    design target 1 / (2 n^2) — independent of the safety factor, so a
    larger safety factor can only tighten, never loosen, the certificate.
    Empirical margins and the 99% uniform CDF band are recorded per n so the
    reader can see where raw statistical confidence runs out.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if safety < 1.0:
        raise ValueError("safety factor must be >= 1")
    limit = table.limit_proxy
    if limit[0] > 0.05:
        raise TrapConstructionError(
            "limit overshoot CDF has substantial mass at the bottom of the grid "
            f"({limit[0]:.3g}); possible atom at 0, cannot certify small-overshoot bounds")

    eps_list, x_list, cert = [], [], []
    prev_eps = math.inf
    prev_x = -math.inf
    band = table.dkw99
    for n in range(1, n_max + 1):
        threshold = 1.0 / (2.0 * safety * n * n)
        ok = np.nonzero((limit <= threshold) & (table.eps_grid < prev_eps))[0]
        if len(ok) == 0:
            raise TrapConstructionError(
                f"no grid value certifies the limit bound at depth n={n} "
                f"(threshold {threshold:.3g}); refine the eps grid or add paths")
        gi = int(ok[-1])
        eps_n = float(table.eps_grid[gi])
        lim_val = float(limit[gi])

        lvl_ok = np.nonzero((table.cdfs[:, gi] <= safety * lim_val + 1e-15)
                            & (table.levels >= prev_x))[0]
        if len(lvl_ok) == 0:
            raise TrapConstructionError(
                f"no tabulated level matches the limit proxy within the safety factor "
                f"at depth n={n}; extend the level list")
        li = int(lvl_ok[0])
        x_n = float(table.levels[li])
        lvl_val = float(table.cdfs[li, gi])

        eps_list.append(eps_n)
        x_list.append(x_n)
        prev_eps, prev_x = eps_n, x_n
        cert.append({
            "n": n,
            "eps": eps_n,
            "x": x_n,
            "limit_cdf": lim_val,
            "level_cdf": lvl_val,
            "empirical_margin": float(safety * lim_val),
            "certified_cap": 1.0 / (2.0 * n * n),
            "dkw99_adjusted_level_cdf": float(lvl_val + band),
        })

    x_arr = np.array(x_list)
    eps_arr = np.array(eps_list)
    alpha = np.empty(n_max)
    alpha[0] = x_arr[0]
    for n in range(1, n_max):
        alpha[n] = alpha[n - 1] + 1.0 + x_arr[n]
    beta = alpha + eps_arr

    f = triangle_train(alpha, eps_arr, name=f"trap_bumps_{n_max}")
    trap_set = RegionSpec(intervals=[(a, b) for a, b in zip(alpha, beta)], name="trap")
    # tail beyond the materialized depth, stated with the doubled per-n bound
    tail = float(sum(2.0 / (n * n) for n in range(n_max + 1, 100_000)))
    meta = {**table.meta, "n_max": n_max, "safety": safety,
            "dkw99_band": band, "limit_gap": table.limit_gap}
    return TrapConstruction(x_levels=x_arr, eps=eps_arr, alpha=alpha, beta=beta,
                            f=f, trap_set=trap_set, certificate=cert, safety=safety,
                            tail_bound=tail, meta=meta)


@dataclass
class LatticeSineReport:
    """Divergent tail integral, identically zero perpetual integral."""

    span: float
    max_abs_on_lattice: float
    dk_verdict: str
    dk_value: float
    max_integral: float
    horizon: float
    paths: int
    mismatch_required: bool
    passed: bool
    meta: dict

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "span", "max_abs_on_lattice", "dk_verdict", "dk_value", "max_integral",
            "horizon", "paths", "mismatch_required", "passed", "meta")}


def lattice_counterexample(
    model: LevyModel,
    paths: int,
    horizon: float,
    seed: int,
    zero_tol: float = 1e-12,
    integral_tol_per_time: float = 1e-9,
) -> LatticeSineReport:
    """Shifted-sine integrand on a lattice model: the required mismatch.

    Asserts f vanishes on the lattice to machine precision, that the tail
    Lebesgue test diverges, and that simulated perpetual integrals stay at
    zero.  The report flags the tail-test/pathwise mismatch as *required*:
    this is the documented failure mode of tail-only criteria on lattice
    models.
    """
    if model.lattice_span is None:
        raise ValueError("lattice counterexample needs a lattice model")
    alpha = model.lattice_span
    f = lattice_sine(alpha)
    sites = alpha * np.arange(0, 200)
    max_on_lattice = float(np.abs(f(sites)).max())
    dk = dk_test(f, 0.0)
    worst = 0.0
    for i in range(paths):
        path = simulate_path(model, horizon, rng=_rng.derive_rng(seed, _rng.STREAM_PATH, i))
        worst = max(worst, abs(integral_at_times(f, path, 0.0, np.array([horizon]))[0]))
    passed = (max_on_lattice <= zero_tol
              and dk.verdict == "infinite"
              and worst <= integral_tol_per_time * horizon)
    return LatticeSineReport(
        span=alpha, max_abs_on_lattice=max_on_lattice, dk_verdict=dk.verdict,
        dk_value=dk.value, max_integral=worst, horizon=horizon, paths=paths,
        mismatch_required=True, passed=bool(passed),
        meta={"model": describe(model), "master_seed": seed, "f": f.name})


@dataclass
class TrapVerification:
    """Four-way verification of a built trap against fresh simulation."""

    visit_fraction: float
    visit_bound: float
    visit_stderr: float
    visit_ok: bool
    diagnosis_outcome: str
    diagnosis_ok: bool
    potential_integral_value: float
    potential_ok: bool
    dk_verdict: str
    dk_ok: bool
    passed: bool
    details: dict

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "visit_fraction", "visit_bound", "visit_stderr", "visit_ok",
            "diagnosis_outcome", "diagnosis_ok", "potential_integral_value",
            "potential_ok", "dk_verdict", "dk_ok", "passed", "details")}


def verify_counterexample(
    model: LevyModel,
    trap: TrapConstruction,
    paths: int,
    seed: int,
    horizon: Optional[float] = None,
    threads: int = 1,
    small_jump_cutoff: Optional[float] = None,
) -> TrapVerification:
    """Check the built trap against fresh paths.

    (i) the fraction of paths entering any bump interval respects the
    doubled certificate bound plus 3 standard errors; (ii) the horizon
    ladder diagnosis of the bump integrand is finite; (iii) the potential
    integral restricted to the off-trap region is exactly zero; (iv) the
    tail Lebesgue test on the bump train diverges.

    Visit counting is conservative: a path counts as visiting when any
    skeleton value lands in a bump interval or a linear segment sweeps
    across one (the compensated small-jump line cannot distinguish sweeping
    from landing).  A finer ``small_jump_cutoff`` shrinks the compensation
    drift and with it the rate of spurious drift sweeps through bumps much
    narrower than the default cutoff.
    """
    beta_top = float(trap.beta[-1])
    if horizon is None:
        mean = model.mean
        if not (math.isfinite(mean) and mean > 0):
            raise ValueError("pass horizon explicitly for models without finite positive mean")
        horizon = 1.5 * (beta_top + 10.0) / mean
    rungs = np.array([horizon / 4.0, horizon / 2.0, horizon])
    eval_times = np.concatenate([rungs, 0.9 * rungs])
    order = np.argsort(eval_times)
    inv = np.argsort(order)
    lo_arr, hi_arr = trap.alpha, trap.beta

    def worker(a, b):
        visits = 0
        vals = np.empty((b - a, len(eval_times)))
        for i in range(a, b):
            path = simulate_path(model, horizon, rng=_rng.derive_rng(seed, _rng.STREAM_PATH, i),
                                 small_jump_cutoff=small_jump_cutoff)
            vals[i - a] = integral_at_times(trap.f, path, 0.0, eval_times[order])[inv]
            v = path.values
            landed = np.searchsorted(lo_arr, v, side="right") - 1
            ok = (landed >= 0) & (v < hi_arr[np.clip(landed, 0, len(lo_arr) - 1)])
            if ok.any():
                visits += 1
                continue
            if path.linear_rate > 0:
                v0, v1 = v[:-1], v[:-1] + path.linear_rate * np.diff(path.times)
                swept = (np.searchsorted(lo_arr, v1, side="right")
                         > np.searchsorted(hi_arr, v0, side="left"))
                visits += bool(swept.any())
        return visits, vals

    parts = _rng.map_chunks(paths, worker, threads=threads)
    visit_count = 0
    blocks = []
    for c, vals in parts:
        visit_count += c
        blocks.append(vals)
    allvals = np.vstack(blocks)
    at_rungs = allvals[:, :3]
    at_early = allvals[:, 3:]
    censored = (at_rungs - at_early) > np.maximum(1e-3 * at_rungs, 1e-12)

    p_visit = visit_count / paths
    se = math.sqrt(max(p_visit * (1 - p_visit), 1e-12) / paths)
    bound = float(sum(2.0 / (n * n) for n in range(1, trap.n_max + 1)))
    visit_ok = p_visit <= bound + 3.0 * se

    outcome, growth, tstat = _classify_plateau(rungs, np.median(at_rungs, axis=0),
                                               float(censored[:, -1].mean()))
    diagnosis_ok = outcome == "finite"

    # Far-bin truncation is irrelevant here: f lives on the bumps, all below
    # beta_top, and the check is an exact zero on the complement region.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pm = estimate_potential(model, np.linspace(0.0, beta_top + 5.0, 257),
                                paths=200, seed=seed + 1, horizon=horizon)
    pot = potential_integral(trap.f, pm, trap.complement_region())
    potential_ok = pot.details["partial_value"] == 0.0

    dk = dk_test(trap.f, 0.0)
    dk_ok = dk.verdict == "infinite"

    passed = bool(visit_ok and diagnosis_ok and potential_ok and dk_ok)
    details = {
        "horizon": float(horizon),
        "paths": paths,
        "rungs": [float(t) for t in rungs],
        "medians": [float(m) for m in np.median(at_rungs, axis=0)],
        "means": [float(m) for m in at_rungs.mean(axis=0)],
        "censored_fraction_last": float(censored[:, -1].mean()),
        "median_growth": growth if math.isfinite(growth) else "inf",
        "model": describe(model),
        "master_seed": seed,
        "small_jump_cutoff": small_jump_cutoff,
        "visit_counting": "conservative (landings plus drift-segment sweeps)",
    }
    return TrapVerification(
        visit_fraction=float(p_visit), visit_bound=bound, visit_stderr=float(se),
        visit_ok=bool(visit_ok), diagnosis_outcome=outcome, diagnosis_ok=bool(diagnosis_ok),
        potential_integral_value=float(pot.details["partial_value"]), potential_ok=bool(potential_ok),
        dk_verdict=dk.verdict, dk_ok=bool(dk_ok), passed=passed, details=details)
