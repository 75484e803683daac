import math

import numpy as np
import pytest

import levyint as L
from levyint.counterexamples import TrapConstructionError, dkw_halfwidth

import oracles


# -- overshoot tables -------------------------------------------------------

def test_overshoot_cdf_rows_monotone(overshoot_table):
    t = overshoot_table
    assert np.all(np.diff(t.cdfs, axis=1) >= 0)
    assert np.all((t.cdfs >= 0) & (t.cdfs <= 1))


def test_overshoot_limit_matches_renewal_oracle(overshoot_table):
    """Empirical limit-level CDF within a DKW band (+ level-convergence gap)
    of the integrated-tail stationary law."""
    t = overshoot_table
    exact = np.array([oracles.overshoot_limit_cdf_quad(u) for u in t.eps_grid])
    gap = np.abs(t.limit_proxy - exact).max()
    assert gap < dkw_halfwidth(t.paths_per_level) + t.limit_gap + 0.01


def test_overshoot_levels_converge(overshoot_table):
    assert overshoot_table.limit_gap < 0.05


def test_overshoot_creep_negligible(overshoot_table):
    assert float(overshoot_table.creep_fraction.max()) < 0.005


def test_overshoot_rejects_wrong_model(lattice_model):
    with pytest.raises(ValueError):
        L.estimate_overshoot_cdf(lattice_model, [2.0], paths=10, seed=0)


def test_overshoot_degenerate_override(lattice_model):
    """Unit-jump lattice overshoot of level 0.5 is always 0.5."""
    t = L.estimate_overshoot_cdf(lattice_model, [0.5], paths=50, seed=1,
                                 eps_grid=np.array([0.1, 0.5, 0.9]),
                                 allow_degenerate=True)
    assert np.allclose(t.cdfs[0], [0.0, 1.0, 1.0])


# -- trap construction ------------------------------------------------------

def test_trap_recursion_identities(trap20):
    tr = trap20
    assert tr.alpha[0] == tr.x_levels[0]
    assert np.allclose(tr.beta, tr.alpha + tr.eps)
    assert np.allclose(tr.alpha[1:], tr.alpha[:-1] + 1.0 + tr.x_levels[1:])
    # bumps strictly separated by at least the unit gap
    assert np.all(tr.alpha[1:] - tr.beta[:-1] > 0.999)


def test_trap_eps_strictly_decreasing(trap20):
    assert np.all(np.diff(trap20.eps) < 0)
    assert np.all(np.diff(trap20.x_levels) >= 0)


def test_trap_certificate_caps(trap20):
    for c in trap20.certificate:
        n = c["n"]
        assert c["certified_cap"] == pytest.approx(1.0 / (2 * n * n))
        assert c["limit_cdf"] <= 1.0 / (2.0 * trap20.safety * n * n) + 1e-12
        assert c["level_cdf"] <= trap20.safety * c["limit_cdf"] + 1e-12
    assert trap20.certified_visit_bound == pytest.approx(
        sum(1.0 / (2 * n * n) for n in range(1, 21)))


def test_trap_tail_bound(trap20):
    # sum of 2/n^2 beyond depth 20 is pi^2/3 minus the partial sum
    want = 2.0 * (math.pi ** 2 / 6.0 - sum(1.0 / (n * n) for n in range(1, 21)))
    assert trap20.tail_bound == pytest.approx(want, rel=1e-3)


def test_trap_monotone_in_safety(overshoot_table):
    """A larger safety factor never loosens the certified visit bound."""
    t2 = L.build_transient_trap(overshoot_table, n_max=10, safety=2.0)
    t4 = L.build_transient_trap(overshoot_table, n_max=10, safety=4.0)
    assert t4.certified_visit_bound <= t2.certified_visit_bound + 1e-12
    # and the stricter trap uses narrower (or equal) bumps at every depth
    assert np.all(t4.eps <= t2.eps + 1e-18)


def test_trap_depth_failure_reports_first_n(overshoot_table):
    with pytest.raises(TrapConstructionError) as err:
        L.build_transient_trap(overshoot_table, n_max=10_000, safety=2.0)
    assert "n=" in str(err.value)


def test_trap_function_and_region_align(trap20):
    f = trap20.f
    assert f.support[0] == pytest.approx(trap20.alpha[0])
    assert f.support[1] == pytest.approx(trap20.beta[-1])
    # unit mass per bump via the exact primitive
    assert float(f.integral_on(0.0, trap20.beta[-1] + 1.0)) == pytest.approx(20.0, rel=1e-9)
    comp = trap20.complement_region()
    assert comp.describes_complement
    mid = 0.5 * (trap20.beta[0] + trap20.alpha[1])
    assert comp.contains(mid)
    inside_bump = trap20.alpha[0] + 0.5 * trap20.eps[0]
    assert not comp.contains(inside_bump)


def test_trap_serializes(trap20):
    d = trap20.to_dict()
    assert len(d["alpha"]) == 20 and len(d["certificate"]) == 20
    assert d["certificate"][0]["n"] == 1


# -- lattice counterexample -------------------------------------------------

def test_lattice_counterexample_report(lattice_model):
    rep = L.lattice_counterexample(lattice_model, paths=300, horizon=100.0, seed=67)
    assert rep.passed
    assert rep.max_abs_on_lattice == 0.0
    assert rep.dk_verdict == "infinite"
    assert rep.max_integral <= 1e-9 * 100.0
    assert rep.mismatch_required


def test_lattice_counterexample_needs_lattice(ts_model):
    with pytest.raises(ValueError):
        L.lattice_counterexample(ts_model, paths=10, horizon=10.0, seed=0)


# -- trap verification ------------------------------------------------------

def test_trap_verification_assertions(trap_verification):
    v = trap_verification
    assert v.visit_ok
    assert v.visit_fraction <= v.visit_bound + 3.0 * v.visit_stderr
    assert v.diagnosis_ok and v.diagnosis_outcome == "finite"
    assert v.potential_ok and v.potential_integral_value == 0.0
    assert v.dk_ok and v.dk_verdict == "infinite"
    assert v.passed


def test_trap_verification_median_plateau(trap_verification):
    meds = trap_verification.details["medians"]
    assert meds[-1] == 0.0          # most paths never touch a bump
    assert trap_verification.details["censored_fraction_last"] < 0.05
