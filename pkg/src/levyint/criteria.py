"""Integral criteria deciding finiteness of perpetual integrals.

All tests reduce to partial integrals over a nested ladder of windows and a
shared extrapolation rule (:func:`classify_ladder`): sustained geometric
decay of window increments means the full integral converges, sustained
linear growth of the partial sums means it diverges, anything else is
reported as inconclusive rather than guessed.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as _rng
from .functions import TestFunction
from .models import LevyModel, describe, simulate_path
from .potential import PotentialMeasure

__all__ = [
    "RegionSpec",
    "RegionCoverageError",
    "CriterionReport",
    "classify_ladder",
    "potential_integral",
    "dk_test",
    "erickson_maller_test",
    "blackwell_equivalence_check",
    "khasminskii_J",
    "transience_probe",
]

FINITE, INFINITE, INCONCLUSIVE = "finite", "infinite", "inconclusive"

# Ladder classifier thresholds.  The geometric-decay gate accepts sustained
# increment ratios up to RATIO_CAP (doubling windows turn an integrable
# power tail y^{-p} into ratios 2^{1-p}, which approach 1/2 from above for
# p -> 2, so a cap at exactly 1/2 would misread them); the extrapolated
# geometric tail must stay below TAIL_FRACTION of the running value.  Growth
# is declared when the fitted per-rung slope of the partial sums is at least
# GROWTH_FRACTION of the mean rung value.
RATIO_CAP = 0.75
TAIL_FRACTION = 0.05
GROWTH_FRACTION = 0.2
_ATOL = 1e-12


class RegionCoverageError(ValueError):
    """A region or function support extends past what the grid can resolve."""


@dataclass
class RegionSpec:
    """Union of disjoint open intervals, given explicitly or by generator.

    ``describes_complement=True`` tags the region as listing the complement of
    the region of interest, which is how sparse trap-style sets are written
    down.  Generated specs materialize intervals on demand up to
    ``max_depth``; materialization fails loudly when it cannot cover a
    requested range.
    """

    intervals: Optional[Sequence[tuple[float, float]]] = None
    generator: Optional[Callable[[int], tuple[float, float]]] = None  # 0-based index
    max_depth: int = 0
    describes_complement: bool = False
    name: str = "region"

    def __post_init__(self):
        if (self.intervals is None) == (self.generator is None):
            raise ValueError("exactly one of intervals/generator must be given")
        if self.intervals is not None:
            ivals = sorted((float(a), float(b)) for a, b in self.intervals)
            for a, b in ivals:
                if not a < b:
                    raise ValueError(f"degenerate interval ({a}, {b})")
            for (_, b0), (a1, _) in zip(ivals[:-1], ivals[1:]):
                if a1 < b0:
                    raise ValueError("intervals must be disjoint")
            self.intervals = ivals

    def materialize(self, upper: Optional[float] = None) -> np.ndarray:
        """Disjoint sorted intervals as an (n, 2) array.

        For generated specs, enough intervals are produced that the first
        unmaterialized one starts above ``upper``; exceeding ``max_depth``
        before that raises :class:`RegionCoverageError`.
        """
        if self.intervals is not None:
            return np.array(self.intervals, float).reshape(-1, 2)
        out = []
        for n in range(self.max_depth):
            a, b = self.generator(n)
            if not a < b:
                raise ValueError(f"generator produced degenerate interval at index {n}")
            if out and a < out[-1][1]:
                raise ValueError("generated intervals must be disjoint and increasing")
            if upper is not None and a > upper:
                return np.array(out, float).reshape(-1, 2)
            out.append((float(a), float(b)))
        if upper is not None and (not out or out[-1][0] <= upper):
            raise RegionCoverageError(
                f"{self.name}: materialization to depth {self.max_depth} cannot cover up to {upper}")
        return np.array(out, float).reshape(-1, 2)

    def pieces(self, lo: float, hi: float) -> list[tuple[float, float]]:
        """Connected components of (region intersect (lo, hi))."""
        if hi <= lo:
            return []
        ivals = self.materialize(upper=hi if self.generator else None)
        if not self.describes_complement:
            out = [(max(a, lo), min(b, hi)) for a, b in ivals if b > lo and a < hi]
            return [(a, b) for a, b in out if b > a]
        out = []
        cursor = lo
        for a, b in ivals:
            if b <= lo:
                continue
            if a >= hi:
                break
            if a > cursor:
                out.append((cursor, min(a, hi)))
            cursor = max(cursor, b)
        if cursor < hi:
            out.append((cursor, hi))
        return out

    def contains(self, y: float, atol: float = 1e-12) -> bool:
        """Closure membership: points on an interval boundary count as inside."""
        ivals = self.materialize(upper=y + 1.0 if self.generator else None)
        inside = bool(((ivals[:, 0] - atol <= y) & (y <= ivals[:, 1] + atol)).any()) if len(ivals) else False
        if not self.describes_complement:
            return inside
        strictly_inside = bool(((ivals[:, 0] + atol < y) & (y < ivals[:, 1] - atol)).any()) if len(ivals) else False
        return not strictly_inside


def half_line(lo: float) -> RegionSpec:
    return RegionSpec(intervals=[(lo, math.inf)], name=f"({lo:g},inf)")


def full_line() -> RegionSpec:
    return RegionSpec(intervals=[(-math.inf, math.inf)], name="R")


@dataclass
class CriterionReport:
    """Outcome of one finiteness test.

    ``value`` is the +inf sentinel when the verdict is infinite; the computed
    partial value is kept under ``details['partial_value']`` so the report
    stays self-consistent.
    """

    test: str
    value: float
    verdict: str
    inputs: dict
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in (FINITE, INFINITE, INCONCLUSIVE):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == INFINITE and not math.isinf(self.value):
            raise ValueError("infinite verdict must carry the +inf sentinel value")

    def to_dict(self) -> dict:
        return {"test": self.test, "value": self.value, "verdict": self.verdict,
                "inputs": self.inputs, "details": self.details}


def _digest(*parts) -> str:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode())
    return h.hexdigest()[:12]


def classify_ladder(values: Sequence[float]) -> tuple[str, dict]:
    """Extrapolate a nondecreasing sequence of partial integrals.

    Returns (verdict, diagnostics).  Finite: the value is already zero, or
    the last three window increments decay with ratio < RATIO_CAP and the
    extrapolated geometric tail is below TAIL_FRACTION of the running value.
    Infinite: the fitted per-rung slope over the trailing half of the ladder
    is at least GROWTH_FRACTION of the mean rung value.  Otherwise
    inconclusive.
    """
    v = np.asarray(values, float)
    if v.ndim != 1 or len(v) < 4:
        raise ValueError("ladder needs at least 4 rungs")
    if np.any(np.diff(v) < -1e-9 * max(1.0, abs(v[-1]))):
        raise ValueError("partial integrals must be nondecreasing")
    d = np.diff(v, prepend=0.0)
    diag: dict = {"rungs": len(v), "value_last": float(v[-1])}
    if v[-1] <= _ATOL:
        return FINITE, {**diag, "reason": "value_zero"}

    tail_d = d[-3:]
    ratios = tail_d[1:] / np.where(tail_d[:-1] > _ATOL, tail_d[:-1], np.inf)
    diag["increment_ratios"] = [float(r) for r in ratios]
    if np.all(ratios < RATIO_CAP):
        r = float(max(ratios.max(), 0.0))
        tail_est = d[-1] * r / (1.0 - r) if r < 1.0 else math.inf
        diag["tail_estimate"] = float(tail_est)
        if tail_est <= TAIL_FRACTION * v[-1]:
            return FINITE, {**diag, "reason": "geometric_decay"}

    k = np.arange(len(v), dtype=float)
    half = len(v) // 2
    kk, vv = k[half:], v[half:]
    slope = float(np.polyfit(kk, vv, 1)[0])
    norm = slope / (v[-1] / len(v))
    diag["normalized_slope"] = float(norm)
    if norm >= GROWTH_FRACTION and slope > 0:
        return INFINITE, {**diag, "reason": "sustained_growth"}
    return INCONCLUSIVE, diag


def _window_edges(base: float, top: float, rungs: int) -> np.ndarray:
    """Doubling ladder base, 2*base, ... clipped and closed at ``top``."""
    edges = [base * 2.0 ** k for k in range(rungs) if base * 2.0 ** k < top * (1.0 - 1e-12)]
    edges.append(top)
    return np.asarray(edges)


def potential_integral(
    f: TestFunction,
    pm: PotentialMeasure,
    region: RegionSpec,
    x: float = 0.0,
    window_base: float = 1.0,
    rungs: int = 10,
) -> CriterionReport:
    """Integral of f(x + y) against the potential measure, restricted to a region.

    Bins are clipped against the region; each connected piece contributes
    f at its midpoint weighted by the proportional bin mass.  Lattice point
    masses are handled exactly: a site contributes its full mass iff it lies
    in the closure of the region.  Divergence is decided by
    :func:`classify_ladder` on partial sums over windows growing to the top
    of the grid.
    """
    edges = pm.edges
    sup_lo, sup_hi = f.support
    if math.isfinite(sup_hi) and sup_hi + x > edges[-1] + 1e-9:
        raise RegionCoverageError(
            f"support of {f.name} (shifted by x={x:g}) extends past the grid top {edges[-1]:g}")

    if pm.lattice_span is not None:
        sites = pm.sites
        inside = np.array([region.contains(s) for s in sites])
        contrib = np.where(inside, f(x + sites) * pm.masses, 0.0)
        positions = sites
    else:
        contrib = np.zeros(len(pm.masses))
        positions = pm.centers
        for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
            for a, b in region.pieces(lo, hi):
                mid = 0.5 * (a + b)
                contrib[i] += float(f(np.array([x + mid]))[0]) * pm.masses[i] * (b - a) / (hi - lo)

    tops = _window_edges(window_base, edges[-1], rungs)
    ladder = [float(contrib[positions <= top].sum()) for top in tops]
    verdict, diag = classify_ladder(ladder)
    total = float(contrib.sum())
    value = math.inf if verdict == INFINITE else total
    return CriterionReport(
        test="potential_integral",
        value=value,
        verdict=verdict,
        inputs={"f": f.name, "region": region.name, "x": x,
                "pm": pm.meta.get("model", "?"),
                "digest": _digest("potential_integral", f.name, region.name, x, pm.meta)},
        details={"partial_value": total, "window_tops": [float(t) for t in tops],
                 "ladder": ladder, **diag},
    )


def dk_test(f: TestFunction, lower_cutoff: float = 0.0, rungs: int = 10) -> CriterionReport:
    """Tail-integral test: does the Lebesgue integral of f over (lower, inf) converge?

    Partial integrals are taken over a doubling ladder (or over the
    function's own declared windows, e.g. bump right-edges for needle
    trains, which blind window placement would miss) and extrapolated by
    :func:`classify_ladder`.
    """
    l = float(lower_cutoff)
    if f.ladder_windows is not None:
        tops = np.asarray([t for t in f.ladder_windows if t > l], float)
        if len(tops) < 4:
            raise ValueError("declared ladder has fewer than 4 usable windows")
    else:
        base = max(l, 1.0) * 2.0
        tops = np.array([base * 2.0 ** k for k in range(rungs)])
    starts = np.concatenate([[l], tops[:-1]])
    increments = np.array([float(f.integral_on(a, b)) for a, b in zip(starts, tops)])
    ladder = np.cumsum(increments)
    verdict, diag = classify_ladder(ladder)
    total = float(ladder[-1])
    return CriterionReport(
        test="dk_test",
        value=math.inf if verdict == INFINITE else total,
        verdict=verdict,
        inputs={"f": f.name, "lower": l, "digest": _digest("dk", f.name, l, rungs)},
        details={"partial_value": total, "window_tops": [float(t) for t in tops],
                 "ladder": [float(u) for u in ladder], **diag},
    )


def erickson_maller_test(
    f: TestFunction,
    pm: PotentialMeasure,
    lower_cutoff: float = 1.0,
    rungs: int = 10,
) -> CriterionReport:
    """Stieltjes test integrating the renewal function U([0, y]) against -df.

    Requires f nonincreasing and vanishing at infinity on [lower, grid top];
    both are checked on the evaluation grid.  Partial sums over a doubling
    ladder feed the shared extrapolation rule.
    """
    l = float(lower_cutoff)
    top = float(pm.edges[-1])
    if top <= l:
        raise RegionCoverageError("grid top must exceed the lower cutoff")
    ys = np.unique(np.concatenate([
        pm.edges[(pm.edges >= l) & (pm.edges <= top)],
        f.breakpoints[(f.breakpoints >= l) & (f.breakpoints <= top)] if len(f.breakpoints) else np.empty(0),
        [l, top],
    ]))
    fy = f(ys)
    if np.any(np.diff(fy) > 1e-9 * max(1.0, fy.max())):
        raise ValueError(f"{f.name} is not nonincreasing on [{l:g}, {top:g}]")
    if fy[-1] > 0.1 * fy[0] + _ATOL:
        warnings.warn(f"{f.name} has not decayed to ~0 by the grid top; "
                      "the Stieltjes tail is under-resolved", stacklevel=2)
    renewal = np.array([pm.mass_between(0.0, y) for y in ys[:-1]])
    increments = renewal * (fy[:-1] - fy[1:])           # U([0,y]) * (-df)
    tops = _window_edges(max(l, 1.0) * 2.0, top, rungs)
    cum = np.concatenate([[0.0], np.cumsum(increments)])
    ladder = [float(cum[np.searchsorted(ys, t, side="right") - 1]) for t in tops]
    verdict, diag = classify_ladder(ladder)
    total = float(cum[-1])
    return CriterionReport(
        test="erickson_maller",
        value=math.inf if verdict == INFINITE else total,
        verdict=verdict,
        inputs={"f": f.name, "lower": l, "pm": pm.meta.get("model", "?"),
                "digest": _digest("em", f.name, l, pm.meta)},
        details={"partial_value": total, "window_tops": [float(t) for t in tops],
                 "ladder": ladder, **diag},
    )


def blackwell_equivalence_check(
    f: TestFunction,
    pm: PotentialMeasure,
    lower_cutoff: float = 0.0,
    x: float = 0.0,
) -> dict:
    """Cross-check: tail Lebesgue test vs potential-measure test.

    For finite-mean models the renewal mass of [0, L] grows like L / mean, so
    the two tests must agree.  Disagreement is reported, not raised: it is a
    finding about resolution, and the caller decides what to do with it.
    """
    lebesgue = dk_test(f, lower_cutoff)
    potential = potential_integral(f, pm, half_line(lower_cutoff), x=x)
    agree = lebesgue.verdict == potential.verdict and INCONCLUSIVE not in (lebesgue.verdict, potential.verdict)
    return {
        "lebesgue": lebesgue,
        "potential": potential,
        "verdicts_agree": bool(agree),
        "inputs": {"f": f.name, "lower": lower_cutoff, "x": x},
    }


def khasminskii_J(
    f: TestFunction,
    pm: PotentialMeasure,
    x_grid: Sequence[float],
) -> dict:
    """Uniform potential bound J = sup_x integral of f(x + y) U(dy), on a grid.

    J < inf yields the exponential-moment threshold theta < 1/J.  Any x with
    a divergent integral is a hard error: the bound does not exist.  The
    supremum over a finite grid is a lower proxy; the caveat is recorded.
    """
    x_grid = np.asarray(x_grid, float)
    if x_grid.ndim != 1 or len(x_grid) == 0:
        raise ValueError("x_grid must be a nonempty 1-d sequence")
    values = []
    for x in x_grid:
        rep = potential_integral(f, pm, full_line(), x=float(x))
        if rep.verdict == INFINITE:
            raise ValueError(f"potential integral diverges at x={x:g}; no uniform bound exists")
        values.append(rep.details["partial_value"])
    j = float(max(values))
    return {
        "J": j,
        "theta_max": math.inf if j == 0.0 else 1.0 / j,
        "x_grid": [float(x) for x in x_grid],
        "argmax_x": float(x_grid[int(np.argmax(values))]),
        "caveat": "supremum over a finite x-grid (lower proxy)",
    }


def transience_probe(
    model: LevyModel,
    visited_set: RegionSpec,
    paths: int,
    horizon: float,
    seed: int,
    x: float = 0.0,
    step: Optional[float] = None,
) -> dict:
    """Empirical check that paths leave ``visited_set`` for good.

    ``visited_set`` is the candidate transient set (the complement of the
    region where a potential-integral test was run).  A path "stays away"
    when its last visit happens before 0.9 * horizon and it ends above the
    materialized part of the set.  The estimate of P(eventually stay away)
    and how close it clusters to {0, 1} are both reported.
    """
    last_visits = np.full(paths, -math.inf)
    end_vals = np.empty(paths)
    maxima = np.empty(paths)
    path_store = []
    for i in range(paths):
        path = simulate_path(model, horizon, step=step,
                             rng=_rng.derive_rng(seed, _rng.STREAM_PATH, i))
        path_store.append(path)
        end_vals[i] = path.values[-1]
        maxima[i] = path.values.max()

    ivals = visited_set.materialize(upper=float(maxima.max()) + 1.0 if visited_set.generator else None)
    if len(ivals) == 0:
        raise RegionCoverageError("visited set materialized to nothing")
    sup_materialized = float(ivals[:, 1].max())
    lo_arr, hi_arr = ivals[:, 0], ivals[:, 1]

    for i, path in enumerate(path_store):
        vals = x + path.values
        if path.exact:
            t0, dt, _ = path.segments()
            r = path.linear_rate
            v0 = vals[:-1]
            v1 = v0 + r * dt
            lo_seg = np.minimum(v0, v1)
            hi_seg = np.maximum(v0, v1)
            overlap = (hi_seg[:, None] > lo_arr) & (lo_seg[:, None] < hi_arr)
            seg_hit = overlap.any(axis=1)
            if seg_hit.any():
                k = int(np.nonzero(seg_hit)[0][-1])
                if r != 0.0:
                    exits = np.minimum(hi_arr, hi_seg[k])
                    valid = overlap[k]
                    leave_val = float(exits[valid].max())
                    frac = np.clip((leave_val - v0[k]) / (r * dt[k]), 0.0, 1.0) if r > 0 else 1.0
                    last_visits[i] = t0[k] + frac * dt[k]
                else:
                    last_visits[i] = t0[k] + dt[k]
            # jump landings exactly on set points are covered by the segment
            # that starts at the landing value
        else:
            inside = np.zeros(len(vals), bool)
            for a, b in ivals:
                inside |= (vals > a) & (vals < b)
            if inside.any():
                last_visits[i] = path.times[int(np.nonzero(inside)[0][-1])]

    stays = (last_visits < 0.9 * horizon) & (x + end_vals > sup_materialized)
    p_stay = float(stays.mean())
    qs = np.quantile(np.where(np.isfinite(last_visits), last_visits, 0.0), [0.5, 0.9, 0.99])
    return {
        "p_stay": p_stay,
        "stderr": float(math.sqrt(max(p_stay * (1 - p_stay), 1e-12) / paths)),
        "clustering_distance": float(min(p_stay, 1.0 - p_stay)),
        "last_visit_quantiles": {"q50": float(qs[0]), "q90": float(qs[1]), "q99": float(qs[2])},
        "horizon": float(horizon),
        "paths": paths,
        "sup_materialized": sup_materialized,
        "inputs": {"model": describe(model), "set": visited_set.name, "x": x, "master_seed": seed},
    }
