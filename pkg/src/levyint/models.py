"""One-dimensional Levy models that drift to +infinity, and path simulation.

The model zoo is deliberately small: pure drift, drifted Brownian motion,
compound Poisson (optionally supported on a lattice), and a truncated
stable subordinator.  A model is accepted only when transience to +infinity
is certifiable, i.e. the mean of the unit-time increment is positive
(possibly +infinity) or the process is a nonzero subordinator.

Paths are returned as skeletons.  Jump-driven models are represented
exactly: piecewise linear between jump times, with ``linear_rate`` holding
the deterministic slope (drift plus, for the truncated stable subordinator,
the mean compensation of the discarded small jumps).  Models with a
Gaussian part are sampled on a time grid and flagged ``exact=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .rng import derive_rng

__all__ = [
    "ModelRejectionError",
    "CompoundPoisson",
    "TruncatedStable",
    "LevyModel",
    "PathSample",
    "PassageRecord",
    "build_model",
    "mean_of",
    "describe",
    "simulate_path",
    "first_passage",
]

# Default internal cutoff for the truncated stable subordinator, as a
# fraction of the truncation level r: jumps below ``SMALL_JUMP_FRACTION * r``
# are folded into an equivalent linear drift.
SMALL_JUMP_FRACTION = 1e-4

_ATOL = 1e-9


class ModelRejectionError(ValueError):
    """Raised when a model cannot be certified to drift to +infinity or
    violates a structural constraint (e.g. lattice with a Gaussian part)."""


@dataclass(frozen=True)
class CompoundPoisson:
    """Compound Poisson jump component.

    Parameters
    ----------
    rate : float
        Jump intensity per unit time, > 0.
    atoms : tuple of (value, probability), optional
        Discrete jump law.  Probabilities must sum to 1.
    law : tuple, optional
        Named continuous jump law, one of ``("exponential", scale)``,
        ``("uniform", lo, hi)`` or ``("pareto", xm, tail_index)``.
        A Pareto tail index <= 1 gives an infinite-mean jump law.
    """

    rate: float
    atoms: Optional[tuple[tuple[float, float], ...]] = None
    law: Optional[tuple] = None

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ModelRejectionError(f"compound Poisson rate must be finite and > 0, got {self.rate}")
        if (self.atoms is None) == (self.law is None):
            raise ModelRejectionError("exactly one of atoms/law must be given")
        if self.atoms is not None:
            atoms = tuple((float(v), float(p)) for v, p in self.atoms)
            if not atoms:
                raise ModelRejectionError("atom list is empty")
            probs = np.array([p for _, p in atoms])
            vals = np.array([v for v, _ in atoms])
            if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-9:
                raise ModelRejectionError("atom probabilities must be positive and sum to 1")
            if not np.all(np.isfinite(vals)):
                raise ModelRejectionError("atom values must be finite")
            object.__setattr__(self, "atoms", atoms)
        else:
            name = self.law[0]
            if name == "exponential":
                (scale,) = map(float, self.law[1:])
                if scale <= 0:
                    raise ModelRejectionError("exponential scale must be > 0")
                object.__setattr__(self, "law", ("exponential", scale))
            elif name == "uniform":
                lo, hi = map(float, self.law[1:])
                if not lo < hi:
                    raise ModelRejectionError("uniform law requires lo < hi")
                object.__setattr__(self, "law", ("uniform", lo, hi))
            elif name == "pareto":
                xm, a = map(float, self.law[1:])
                if xm <= 0 or a <= 0:
                    raise ModelRejectionError("pareto law requires xm > 0 and tail index > 0")
                object.__setattr__(self, "law", ("pareto", xm, a))
            else:
                raise ModelRejectionError(f"unknown jump law {name!r}")

    @property
    def jump_mean(self) -> float:
        if self.atoms is not None:
            return float(sum(v * p for v, p in self.atoms))
        name = self.law[0]
        if name == "exponential":
            return self.law[1]
        if name == "uniform":
            return 0.5 * (self.law[1] + self.law[2])
        # pareto
        xm, a = self.law[1], self.law[2]
        return math.inf if a <= 1 else xm * a / (a - 1.0)

    @property
    def nonnegative(self) -> bool:
        if self.atoms is not None:
            return all(v >= 0 for v, _ in self.atoms)
        name = self.law[0]
        if name == "uniform":
            return self.law[1] >= 0
        return True  # exponential and pareto are supported on (0, inf)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        if self.atoms is not None:
            vals = np.array([v for v, _ in self.atoms])
            probs = np.array([p for _, p in self.atoms])
            return rng.choice(vals, size=n, p=probs)
        name = self.law[0]
        if name == "exponential":
            return rng.exponential(self.law[1], size=n)
        if name == "uniform":
            return rng.uniform(self.law[1], self.law[2], size=n)
        xm, a = self.law[1], self.law[2]
        # inverse-transform Pareto: xm * U^{-1/a}
        return xm * rng.random(n) ** (-1.0 / a)


@dataclass(frozen=True)
class TruncatedStable:
    """Stable-like subordinator jumps with density ``c x^{-1-rho}`` on (0, r].

    Infinite activity for every rho in (0, 1); the truncation at r keeps the
    mean finite: ``c r^{1-rho} / (1-rho)``.
    """

    activity: float      # c > 0
    index: float         # rho in (0, 1)
    cutoff: float        # r in (0, 1]

    def __post_init__(self):
        if not (self.activity > 0 and math.isfinite(self.activity)):
            raise ModelRejectionError("activity must be finite and > 0")
        if not (0.0 < self.index < 1.0):
            raise ModelRejectionError("stability index must lie in (0, 1)")
        if not (0.0 < self.cutoff <= 1.0):
            raise ModelRejectionError("truncation level must lie in (0, 1]")

    @property
    def jump_part_mean(self) -> float:
        c, rho, r = self.activity, self.index, self.cutoff
        return c * r ** (1.0 - rho) / (1.0 - rho)

    def tail_mass(self, eps: float) -> float:
        """Levy measure of (eps, r]: rate of jumps retained above eps."""
        c, rho, r = self.activity, self.index, self.cutoff
        return c * (eps ** -rho - r ** -rho) / rho

    def small_jump_drift(self, eps: float) -> float:
        """Mean motion per unit time carried by jumps below eps."""
        c, rho = self.activity, self.index
        return c * eps ** (1.0 - rho) / (1.0 - rho)

    def sample_jumps(self, rng: np.random.Generator, n: int, eps: float) -> np.ndarray:
        """Inverse-transform draws from the normalized jump law on (eps, r]."""
        if n == 0:
            return np.empty(0)
        rho, r = self.index, self.cutoff
        a = eps ** -rho
        b = r ** -rho
        u = rng.random(n)
        return (a - u * (a - b)) ** (-1.0 / rho)


JumpSpec = Union[CompoundPoisson, TruncatedStable, None]


@dataclass(frozen=True)
class LevyModel:
    """Validated Levy model.  Construct through :func:`build_model`."""

    drift: float
    gaussian_var: float
    jumps: JumpSpec
    lattice_span: Optional[float]
    mean: float  # E[xi_1]; +inf allowed

    @property
    def is_subordinator(self) -> bool:
        if self.drift < 0 or self.gaussian_var > 0:
            return False
        if self.jumps is None:
            return self.drift > 0
        if isinstance(self.jumps, TruncatedStable):
            return True
        return self.jumps.nonnegative


def build_model(
    drift: float = 0.0,
    gaussian_var: float = 0.0,
    jumps: JumpSpec = None,
    lattice_span: Optional[float] = None,
) -> LevyModel:
    """Validate parameters and certify transience to +infinity.

    Raises
    ------
    ModelRejectionError
        If ``gaussian_var < 0``, the lattice constraints fail, or neither
        ``mean > 0`` (finite or +inf) nor the nonzero-subordinator condition
        can certify drift to +infinity.
    """
    drift = float(drift)
    gaussian_var = float(gaussian_var)
    if not math.isfinite(drift):
        raise ModelRejectionError("drift must be finite")
    if not (gaussian_var >= 0 and math.isfinite(gaussian_var)):
        raise ModelRejectionError("gaussian_var must be finite and >= 0")

    if lattice_span is not None:
        alpha = float(lattice_span)
        if alpha <= 0:
            raise ModelRejectionError("lattice span must be > 0")
        if gaussian_var != 0.0 or drift != 0.0:
            raise ModelRejectionError("lattice models require zero drift and zero Gaussian part")
        if not isinstance(jumps, CompoundPoisson) or jumps.atoms is None:
            raise ModelRejectionError("lattice models require compound Poisson jumps with discrete atoms")
        for v, _ in jumps.atoms:
            if abs(v / alpha - round(v / alpha)) > _ATOL:
                raise ModelRejectionError(f"atom {v} is not an integer multiple of the lattice span {alpha}")
        lattice_span = alpha

    mean = drift
    if isinstance(jumps, CompoundPoisson):
        jm = jumps.jump_mean
        mean = math.inf if jm == math.inf else mean + jumps.rate * jm
    elif isinstance(jumps, TruncatedStable):
        mean = mean + jumps.jump_part_mean

    model = LevyModel(drift=drift, gaussian_var=gaussian_var, jumps=jumps,
                      lattice_span=lattice_span, mean=mean)
    nonzero_subordinator = model.is_subordinator and (drift > 0 or jumps is not None)
    if not (mean > 0 or nonzero_subordinator):
        raise ModelRejectionError(
            f"cannot certify drift to +infinity: mean {mean} is not positive "
            "and the model is not a nonzero subordinator")
    return model


def mean_of(model: LevyModel) -> float:
    """E[xi_1]; +inf when the jump law has infinite mean."""
    return model.mean


def describe(model: LevyModel) -> str:
    """Compact model identifier embedded in artifact metadata."""
    parts = [f"drift={model.drift:g}", f"gvar={model.gaussian_var:g}"]
    j = model.jumps
    if isinstance(j, CompoundPoisson):
        if j.atoms is not None:
            atoms = ",".join(f"{v:g}:{p:g}" for v, p in j.atoms)
            parts.append(f"cpp(rate={j.rate:g};atoms={atoms})")
        else:
            parts.append(f"cpp(rate={j.rate:g};law={j.law[0]}{j.law[1:]})")
    elif isinstance(j, TruncatedStable):
        parts.append(f"tstable(c={j.activity:g},rho={j.index:g},r={j.cutoff:g})")
    else:
        parts.append("nojumps")
    if model.lattice_span is not None:
        parts.append(f"lattice={model.lattice_span:g}")
    return "|".join(parts)


@dataclass
class PathSample:
    """Skeleton of one simulated path started at 0.

    For ``exact=True`` the path is piecewise linear: between consecutive
    times the value moves at ``linear_rate`` and jumps land exactly at the
    listed times, so value changes other than the deterministic slope occur
    only at listed times.  For ``exact=False`` the values are a grid
    skeleton of a diffusion component and ``linear_rate`` is 0.
    """

    times: np.ndarray
    values: np.ndarray
    exact: bool
    horizon: float
    linear_rate: float = 0.0

    def __post_init__(self):
        t, v = np.asarray(self.times, float), np.asarray(self.values, float)
        if t.shape != v.shape or t.ndim != 1 or len(t) < 2:
            raise ValueError("times/values must be equal-length 1-d arrays with >= 2 entries")
        if t[0] != 0.0 or v[0] != 0.0:
            raise ValueError("paths start at (t, x) = (0, 0)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if abs(t[-1] - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValueError("last sample time must equal the horizon")
        self.times, self.values = t, v

    def segments(self):
        """(start_time, duration, start_value) triples; between t_k and
        t_{k+1} the value is start_value + linear_rate * elapsed."""
        return self.times[:-1], np.diff(self.times), self.values[:-1]


@dataclass
class PassageRecord:
    """First passage of a path over a level."""

    level: float
    passage_time: float          # +inf when the level was not reached
    overshoot: float             # nan when censored
    hit_exactly: bool
    censored: bool


def _finalize_exact(times, values, horizon, rate):
    # append the horizon endpoint, extending the last linear piece
    if len(times) == 0 or times[-1] < horizon:
        t_last = times[-1] if len(times) else 0.0
        v_last = values[-1] if len(values) else 0.0
        times = np.append(times, horizon)
        values = np.append(values, v_last + rate * (horizon - t_last))
    return times, values


def _exponential_arrivals(rng, rate, horizon):
    """Arrival times of a Poisson stream on (0, horizon], by exponential spacings."""
    if rate <= 0:
        return np.empty(0)
    mean_n = rate * horizon
    n_guess = int(mean_n + 6.0 * math.sqrt(mean_n + 1.0) + 16)
    gaps = rng.exponential(1.0 / rate, size=n_guess)
    t = np.cumsum(gaps)
    while t[-1] <= horizon:  # rare: extend until the horizon is passed
        extra = rng.exponential(1.0 / rate, size=max(16, n_guess // 4))
        t = np.concatenate([t, t[-1] + np.cumsum(extra)])
    return t[t <= horizon]


def simulate_path(
    model: LevyModel,
    horizon: float,
    step: Optional[float] = None,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    small_jump_cutoff: Optional[float] = None,
) -> PathSample:
    """Simulate one path of ``model`` on [0, horizon].

    Parameters
    ----------
    step : float, optional
        Time grid spacing; required when ``gaussian_var > 0``.
    small_jump_cutoff : float, optional
        For the truncated stable subordinator, jumps below this threshold are
        replaced by their expected linear drift.  Defaults to
        ``SMALL_JUMP_FRACTION * cutoff``.
    """
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValueError("horizon must be finite and > 0")
    if rng is None:
        rng = np.random.default_rng(seed)

    jumps = model.jumps
    if model.gaussian_var > 0:
        if step is None or step <= 0:
            raise ValueError("a positive step is required for models with a Gaussian part")
        return _simulate_grid(model, horizon, step, rng)

    if jumps is None:
        times = np.array([0.0, horizon])
        values = np.array([0.0, model.drift * horizon])
        return PathSample(times, values, exact=True, horizon=horizon, linear_rate=model.drift)

    if isinstance(jumps, CompoundPoisson):
        jt = _exponential_arrivals(rng, jumps.rate, horizon)
        sizes = jumps.sample(rng, len(jt))
        rate = model.drift
    else:  # truncated stable subordinator
        eps = small_jump_cutoff if small_jump_cutoff is not None else SMALL_JUMP_FRACTION * jumps.cutoff
        if not (0 < eps < jumps.cutoff):
            raise ValueError("small_jump_cutoff must lie in (0, cutoff)")
        jt = _exponential_arrivals(rng, jumps.tail_mass(eps), horizon)
        sizes = jumps.sample_jumps(rng, len(jt), eps)
        rate = model.drift + jumps.small_jump_drift(eps)

    times = np.concatenate([[0.0], jt])
    base = rate * times
    values = base + np.concatenate([[0.0], np.cumsum(sizes)])
    times, values = _finalize_exact(times, values, horizon, rate)
    return PathSample(times, values, exact=True, horizon=horizon, linear_rate=rate)


def _simulate_grid(model, horizon, step, rng):
    n_cells = max(1, int(round(horizon / step)))
    grid = np.linspace(0.0, horizon, n_cells + 1)
    jumps = model.jumps
    if isinstance(jumps, CompoundPoisson):
        jt = _exponential_arrivals(rng, jumps.rate, horizon)
        sizes = jumps.sample(rng, len(jt))
        times = np.unique(np.concatenate([grid, jt]))
    elif isinstance(jumps, TruncatedStable):
        raise ModelRejectionError("Gaussian part combined with a truncated stable subordinator is not supported")
    else:
        jt, sizes = np.empty(0), np.empty(0)
        times = grid
    dt = np.diff(times)
    incr = model.drift * dt + math.sqrt(model.gaussian_var) * np.sqrt(dt) * rng.standard_normal(len(dt))
    if len(jt):
        at = np.searchsorted(times, jt) - 1  # jump applied at the end of its cell
        np.add.at(incr, at, sizes)
    values = np.concatenate([[0.0], np.cumsum(incr)])
    return PathSample(times, values, exact=False, horizon=horizon, linear_rate=0.0)


def first_passage(path: PathSample, level: float, tol: Optional[float] = None) -> PassageRecord:
    """First time the path reaches ``level``, with overshoot.

    Exact (piecewise linear) paths resolve both continuous crossings
    (overshoot 0, ``hit_exactly=True``) and jump crossings.  Grid skeletons
    report the first grid point at or above the level; ``hit_exactly`` then
    uses a step-size dependent tolerance (default ``sqrt(step)``).
    """
    x = float(level)
    v = path.values
    if x <= 0.0:
        return PassageRecord(x, 0.0, -x, hit_exactly=(x == 0.0), censored=False)

    if not path.exact:
        reached = v >= x
        if not reached.any():
            return PassageRecord(x, math.inf, math.nan, False, True)
        i = int(np.argmax(reached))
        over = float(v[i] - x)
        if tol is None:
            tol = math.sqrt(float(np.median(np.diff(path.times))))
        return PassageRecord(x, float(path.times[i]), over, over <= tol, False)

    t0, dt, v0 = path.segments()
    r = path.linear_rate
    v_end = v0 + r * dt
    seg_cross = (v0 < x) & (v_end >= x) if r > 0 else np.zeros(len(v0), bool)
    jump_cross = (np.maximum(v0, v_end) < x) & (v[1:] >= x)
    k_seg = int(np.argmax(seg_cross)) if seg_cross.any() else None
    k_jmp = int(np.argmax(jump_cross)) if jump_cross.any() else None
    if k_seg is None and k_jmp is None:
        return PassageRecord(x, math.inf, math.nan, False, True)
    if k_jmp is None or (k_seg is not None and k_seg <= k_jmp):
        # continuous crossing inside segment k_seg
        t_hit = float(t0[k_seg] + (x - v0[k_seg]) / r)
        return PassageRecord(x, t_hit, 0.0, True, False)
    over = float(v[k_jmp + 1] - x)
    if tol is None:
        tol = 1e-12
    return PassageRecord(x, float(path.times[k_jmp + 1]), over, over <= tol, False)
