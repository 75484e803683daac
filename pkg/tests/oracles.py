"""Independent numerical oracles for the test suite.

Every closed-form constant asserted in the tests is recomputed here by a
route that does not share code with the package: direct series summation,
quadrature of defining integrals, or textbook special-function identities.
``test_oracles.py`` checks the two routes against each other before any
package test relies on the frozen values.
"""

import math

import numpy as np
from scipy import integrate, stats

# lattice compound Poisson used throughout: rate 2, unit jumps
LATTICE_RATE = 2.0

# truncated stable subordinator used throughout: density x^{-3/2}/... on (0, 1]
TS_ACTIVITY = 1.0
TS_INDEX = 0.5
TS_CUTOFF = 1.0


def lattice_site_mass_quad(n: int, rate: float = LATTICE_RATE) -> float:
    """Occupation of site n: integral over time of the Poisson pmf at n."""
    val, _ = integrate.quad(lambda t: stats.poisson.pmf(n, rate * t), 0, np.inf)
    return val


def geometric_potential_sum(rate: float = LATTICE_RATE, n_terms: int = 200) -> float:
    """Sum over sites of e^{-n} times the site mass 1/rate, by partial sums."""
    return sum(math.exp(-n) / rate for n in range(n_terms))


# frozen: 1 / (2 (1 - e^{-1}))
GEOMETRIC_POTENTIAL_VALUE = 0.7909883534346632


def exp_mgf(rate: float, theta: float) -> float:
    """E[e^{theta X}] for X exponential(rate), theta < rate."""
    assert theta < rate
    return rate / (rate - theta)


def ts_levy_tail(y: float) -> float:
    """Mass of jumps larger than y, by quadrature of the jump density.

    Integrated in log space (x = e^t) so the steep power-law left end is
    resolved even for y many orders of magnitude below the cutoff.
    """
    if y >= TS_CUTOFF:
        return 0.0
    lo = math.log(max(y, 1e-300))
    val, _ = integrate.quad(
        lambda t: TS_ACTIVITY * math.exp(-TS_INDEX * t), lo, math.log(TS_CUTOFF),
        limit=200)
    return val


def ts_mean_quad() -> float:
    """Mean drift of the subordinator: integral of x times the jump density."""
    val, _ = integrate.quad(lambda x: x * TS_ACTIVITY * x ** (-1.0 - TS_INDEX), 0, TS_CUTOFF)
    return val


def overshoot_limit_cdf_quad(u: float) -> float:
    """Stationary overshoot CDF: integrated jump tail over the mean.

    Classical renewal form: F(u) = (1/m) * integral_0^u tail(y) dy.
    """
    if u <= 0:
        return 0.0
    m = ts_mean_quad()
    # y = s^2 removes the integrable y^(-index) singularity at the origin.
    top = math.sqrt(min(u, TS_CUTOFF))
    val, _ = integrate.quad(lambda s: ts_levy_tail(s * s) * 2.0 * s, 0.0, top,
                            limit=200)
    return val / m


def overshoot_limit_cdf_closed(u: float) -> float:
    """Same CDF via the closed form for index 1/2, cutoff 1: 2 sqrt(u) - u."""
    if u <= 0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return 2.0 * math.sqrt(u) - u


def bm_potential_density_quad(y: float, drift: float = 1.0, var: float = 1.0) -> float:
    """Occupation density of drifted BM: time-integral of the Gaussian marginal."""
    def marginal(t):
        return math.exp(-((y - drift * t) ** 2) / (2 * var * t)) / math.sqrt(2 * math.pi * var * t)
    val, err = integrate.quad(marginal, 0, np.inf, limit=400)
    return val


def bm_potential_density_closed(y: float, drift: float = 1.0, var: float = 1.0) -> float:
    if y >= 0:
        return 1.0 / drift
    return math.exp(2.0 * drift * y / var) / drift


def poisson_count_pmf(k: int, rate: float, t: float) -> float:
    return float(stats.poisson.pmf(k, rate * t))


def pareto_mean(alpha: float, scale: float = 1.0) -> float:
    """Mean of a Pareto(scale, alpha) jump; infinite for alpha <= 1."""
    if alpha <= 1.0:
        return math.inf
    return alpha * scale / (alpha - 1.0)


def dkw_band(n: int, confidence: float) -> float:
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))
