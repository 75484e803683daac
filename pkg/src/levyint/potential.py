"""Expected occupation (potential) measure estimation and closed forms.

The potential measure U assigns to a set the expected total time the process
spends there.  It is estimated by averaging per-path occupation times over a
spatial grid; closed forms exist for pure drift, lattice compound Poisson
and drifted Brownian motion and are used to cross-validate the estimator.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as _rng
from .models import LevyModel, CompoundPoisson, PathSample, describe, simulate_path

__all__ = [
    "PotentialMeasure",
    "estimate_potential",
    "analytic_potential",
    "hitting_probability",
    "hitting_ratio_inf",
    "horizon_heuristic",
    "occupation_histogram",
]

# Horizon heuristic: T = safety * grid_range / mean speed.  Chosen so the
# process has comfortably crossed the grid by the horizon.
DEFAULT_HORIZON_SAFETY = 8.0


@dataclass
class PotentialMeasure:
    """Binned expected occupation times with Monte Carlo standard errors.

    For lattice models every bin is centred on one lattice site and the mass
    is a point mass at that site; otherwise ``masses[i] / width`` is a proxy
    for the potential density on bin i.
    """

    edges: np.ndarray
    masses: np.ndarray
    stderr: np.ndarray
    lattice_span: Optional[float] = None
    analytic_density: Optional[object] = None    # callable u(y), exact variants only
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.edges, float)
        m = np.asarray(self.masses, float)
        s = np.asarray(self.stderr, float)
        if e.ndim != 1 or len(e) < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing with >= 2 entries")
        if m.shape != (len(e) - 1,) or s.shape != m.shape:
            raise ValueError("masses/stderr must have one entry per bin")
        if m.min() < 0 or s.min() < 0:
            raise ValueError("masses and standard errors must be nonnegative")
        self.edges, self.masses, self.stderr = e, m, s

    # -- geometry ----------------------------------------------------------
    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def sites(self) -> np.ndarray:
        """Lattice site of each bin (lattice measures only)."""
        if self.lattice_span is None:
            raise ValueError("not a lattice measure")
        return np.round(self.centers / self.lattice_span) * self.lattice_span

    def density_proxy(self, y: float) -> float:
        """Potential density proxy at y: bin mass / bin width (point mass for
        lattice bins)."""
        i = int(np.searchsorted(self.edges, y, side="right")) - 1
        if i < 0 or i >= len(self.masses):
            raise ValueError(f"point {y} outside the measure's grid")
        if self.lattice_span is not None:
            return float(self.masses[i])
        return float(self.masses[i] / self.widths[i])

    def mass_between(self, lo: float, hi: float) -> float:
        """Mass of [lo, hi], interpolating linearly inside boundary bins
        (lattice sites count when inside within a small tolerance)."""
        if hi <= lo:
            return 0.0
        if self.lattice_span is not None:
            s = self.sites
            sel = (s >= lo - 1e-9) & (s <= hi + 1e-9)
            return float(self.masses[sel].sum())
        lo_c = np.clip(lo, self.edges[0], self.edges[-1])
        hi_c = np.clip(hi, self.edges[0], self.edges[-1])
        frac = np.clip((np.minimum(hi_c, self.edges[1:]) - np.maximum(lo_c, self.edges[:-1])) / self.widths, 0.0, 1.0)
        return float((self.masses * frac).sum())

    # -- serialization -----------------------------------------------------
    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            for k in sorted(self.meta):
                fh.write(f"# {k}: {self.meta[k]}\n")
            if self.lattice_span is not None:
                fh.write(f"# lattice_span: {float(self.lattice_span)!r}\n")
            fh.write("bin_lo,bin_hi,mass,stderr\n")
            for lo, hi, m, s in zip(self.edges[:-1], self.edges[1:], self.masses, self.stderr):
                fh.write(f"{float(lo)!r},{float(hi)!r},{float(m)!r},{float(s)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "PotentialMeasure":
        meta, rows, span = {}, [], None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].partition(":")
                    key, val = key.strip(), val.strip()
                    if key == "lattice_span":
                        span = float(val)
                    else:
                        meta[key] = val
                elif not line.startswith("bin_lo"):
                    rows.append([float(v) for v in line.split(",")])
        arr = np.array(rows)
        edges = np.append(arr[:, 0], arr[-1, 1])
        return cls(edges=edges, masses=arr[:, 2], stderr=arr[:, 3], lattice_span=span, meta=meta)


def horizon_heuristic(model: LevyModel, grid_lo: float, grid_hi: float,
                      safety: float = DEFAULT_HORIZON_SAFETY) -> float:
    if not math.isfinite(model.mean) or model.mean <= 0:
        raise ValueError("horizon heuristic needs a finite positive mean; pass a horizon explicitly")
    return safety * (grid_hi - grid_lo) / model.mean


def occupation_histogram(path: PathSample, edges: np.ndarray, out: np.ndarray) -> None:
    """Add the occupation time of one path (per bin) into ``out``.

    Exact piecewise-linear paths split linear sweeps across bin edges
    exactly; grid skeletons attribute each cell to the bin of its left
    endpoint (cadlag convention).  Time spent outside the grid is dropped.
    """
    nbins = len(edges) - 1
    if path.exact and path.linear_rate != 0.0:
        t0, dt, v0 = path.segments()
        r = path.linear_rate
        u0 = v0 if r > 0 else v0 + r * dt
        u1 = v0 + r * dt if r > 0 else v0
        i0 = np.searchsorted(edges, u0, side="right") - 1
        i1 = np.searchsorted(edges, u1, side="right") - 1
        same = i0 == i1
        ok = same & (i0 >= 0) & (i0 < nbins)
        np.add.at(out, i0[ok], dt[ok])
        for k in np.nonzero(~same)[0]:      # sweeps crossing bin edges: exact split
            a, b = u0[k], u1[k]
            lo = max(i0[k], 0)
            hi = min(i1[k], nbins - 1)
            for i in range(lo, hi + 1):
                overlap = min(b, edges[i + 1]) - max(a, edges[i])
                if overlap > 0:
                    out[i] += overlap / abs(r)
        return
    if path.exact:
        dt = np.diff(path.times)
        v = path.values[:-1]
    else:
        dt = np.diff(path.times)
        v = path.values[:-1]
    idx = np.searchsorted(edges, v, side="right") - 1
    ok = (idx >= 0) & (idx < nbins)
    np.add.at(out, idx[ok], dt[ok])


def estimate_potential(
    model: LevyModel,
    edges: np.ndarray,
    paths: int,
    seed: int,
    horizon: Optional[float] = None,
    step: Optional[float] = None,
    threads: int = 1,
) -> PotentialMeasure:
    """Monte Carlo estimate of the potential measure on a spatial grid.

    Parameters
    ----------
    edges : array
        Bin edges.  For lattice models they must align so that each bin
        contains exactly one lattice site.
    horizon : float, optional
        Truncation horizon; defaults to :func:`horizon_heuristic`.  A warning
        (not a failure) is issued when an explicit horizon undercuts the
        heuristic, since far-field bins are then biased low.
    """
    edges = np.asarray(edges, float)
    if paths < 1:
        raise ValueError("paths must be >= 1")
    heuristic = None
    try:
        heuristic = horizon_heuristic(model, edges[0], edges[-1])
    except ValueError:
        pass
    if horizon is None:
        if heuristic is None:
            raise ValueError("model mean is not finite/positive; pass horizon explicitly")
        horizon = heuristic
    elif heuristic is not None and horizon < heuristic:
        warnings.warn(
            f"horizon {horizon:g} is below the heuristic {heuristic:g}; "
            "occupation of far bins will be truncation-biased", stacklevel=2)

    if model.lattice_span is not None:
        alpha = model.lattice_span
        sites = np.round(0.5 * (edges[:-1] + edges[1:]) / alpha)
        if len(np.unique(sites)) != len(sites) or np.any(np.diff(edges) > alpha + 1e-9):
            raise ValueError("lattice grids need exactly one site per bin (width <= span)")

    nbins = len(edges) - 1

    def worker(a, b):
        acc = np.zeros(nbins)
        acc2 = np.zeros(nbins)
        buf = np.zeros(nbins)
        for i in range(a, b):
            buf[:] = 0.0
            path = simulate_path(model, horizon, step=step,
                                 rng=_rng.derive_rng(seed, _rng.STREAM_PATH, i))
            occupation_histogram(path, edges, buf)
            acc += buf
            acc2 += buf * buf
        return acc, acc2

    parts = _rng.map_chunks(paths, worker, threads=threads)
    total = np.zeros(nbins)
    total2 = np.zeros(nbins)
    for acc, acc2 in parts:          # fixed reduction order
        total += acc
        total2 += acc2
    masses = total / paths
    var = np.maximum(total2 / paths - masses * masses, 0.0)
    stderr = np.sqrt(var / paths)
    meta = {
        "model": describe(model),
        "paths": paths,
        "horizon": repr(float(horizon)),
        "master_seed": seed,
        "estimator": "mc_occupation",
    }
    return PotentialMeasure(edges=edges, masses=masses, stderr=stderr,
                            lattice_span=model.lattice_span, meta=meta)


def analytic_potential(model: LevyModel, edges: np.ndarray) -> Optional[PotentialMeasure]:
    """Closed-form potential measure on a grid, or None when unavailable.

    Implemented cases: pure drift (density 1/b on [0, inf)), lattice compound
    Poisson with a single positive atom (point mass 1/rate per site), drifted
    Brownian motion (density (1/mu) e^{2 mu y / sigma^2} for y < 0, 1/mu for
    y >= 0).
    """
    edges = np.asarray(edges, float)
    lo, hi = edges[:-1], edges[1:]

    if model.jumps is None and model.gaussian_var == 0.0 and model.drift > 0:
        b = model.drift
        masses = np.clip(hi, 0.0, None) / b - np.clip(lo, 0.0, None) / b

        def u(y):
            y = np.asarray(y, float)
            return np.where(y >= 0, 1.0 / b, 0.0)

        return PotentialMeasure(edges, masses, np.zeros_like(masses),
                                analytic_density=u,
                                meta={"model": describe(model), "estimator": "analytic_pure_drift"})

    if model.lattice_span is not None and isinstance(model.jumps, CompoundPoisson):
        atoms = model.jumps.atoms
        if len(atoms) == 1 and atoms[0][0] > 0:
            alpha = model.lattice_span
            centers = 0.5 * (lo + hi)
            sites = np.round(centers / alpha) * alpha
            span_atom = atoms[0][0]
            on_chain = np.isclose(np.mod(sites / span_atom, 1.0), 0.0) | np.isclose(np.mod(sites / span_atom, 1.0), 1.0)
            masses = np.where((sites >= -1e-9) & on_chain, 1.0 / model.jumps.rate, 0.0)
            return PotentialMeasure(edges, masses, np.zeros_like(masses), lattice_span=alpha,
                                    meta={"model": describe(model), "estimator": "analytic_lattice_cpp"})
        return None

    if model.gaussian_var > 0 and model.jumps is None and model.drift > 0:
        mu, s2 = model.drift, model.gaussian_var
        k = 2.0 * mu / s2

        def u(y):
            y = np.asarray(y, float)
            return np.where(y >= 0, 1.0 / mu, np.exp(k * y) / mu)

        def cum(y):  # integral of u from -inf to y
            y = np.asarray(y, float)
            neg = np.exp(k * np.minimum(y, 0.0)) / (mu * k)
            return neg + np.clip(y, 0.0, None) / mu

        masses = cum(hi) - cum(lo)
        return PotentialMeasure(edges, masses, np.zeros_like(masses), analytic_density=u,
                                meta={"model": describe(model), "estimator": "analytic_drifted_bm"})

    return None


def hitting_probability(pm: PotentialMeasure, x: float) -> float:
    """Proxy for the probability of ever hitting a point near x: u(x) / u(0+).

    Exact for lattice models (ratio of point masses); for continuous models
    the bin-density ratio is a resolution-limited proxy.  Values above 1 are
    clipped with a warning.
    """
    u0 = pm.density_proxy(0.0)
    if u0 <= 0:
        raise ValueError("potential density proxy at 0 is not positive")
    ratio = pm.density_proxy(x) / u0
    if ratio > 1.0 + 1e-9:
        warnings.warn(f"hitting ratio {ratio:g} exceeds 1; clipping (estimation noise)", stacklevel=2)
    return float(min(ratio, 1.0))


def hitting_ratio_inf(pm: PotentialMeasure, window_lo: float, window_hi: float) -> dict:
    """Proxy for the eventual-hitting lower bound: min of u(x)/u(0+) over a
    far window [window_lo, window_hi].

    The minimum over a finite window stands in for a liminf at infinity; the
    window is recorded so the caveat is visible downstream.
    """
    if not window_lo < window_hi:
        raise ValueError("window_lo must be < window_hi")
    u0 = pm.density_proxy(0.0)
    if u0 <= 0:
        raise ValueError("potential density proxy at 0 is not positive")
    if pm.lattice_span is not None:
        sel = (pm.sites >= window_lo) & (pm.sites <= window_hi)
        dens = pm.masses[sel]
    else:
        sel = (pm.edges[:-1] >= window_lo) & (pm.edges[1:] <= window_hi)
        dens = pm.masses[sel] / pm.widths[sel]
    if not sel.any():
        raise ValueError("window contains no complete bins")
    return {
        "ratio": float(dens.min() / u0),
        "window": (float(window_lo), float(window_hi)),
        "caveat": "minimum over a finite window; proxy for a liminf at infinity",
    }
