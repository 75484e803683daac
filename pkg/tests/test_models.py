import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import levyint as L
from levyint.models import ModelRejectionError

import oracles


# -- model acceptance -------------------------------------------------------

def test_negative_mean_rejected():
    with pytest.raises(ModelRejectionError):
        L.build_model(drift=-1.0)
    with pytest.raises(ModelRejectionError):
        L.build_model(drift=-3.0, jumps=L.CompoundPoisson(rate=1.0, atoms=((1.0, 1.0),)))


def test_zero_model_rejected():
    with pytest.raises(ModelRejectionError):
        L.build_model(drift=0.0)


def test_infinite_mean_accepted():
    m = L.build_model(jumps=L.CompoundPoisson(rate=1.0, law=("pareto", 1.0, 0.5)))
    assert math.isinf(m.mean)


def test_driftless_subordinator_accepted(ts_model):
    assert ts_model.is_subordinator
    assert ts_model.mean == pytest.approx(oracles.ts_mean_quad(), rel=1e-9)


def test_lattice_constraints():
    jumps = L.CompoundPoisson(rate=2.0, atoms=((1.0, 1.0),))
    with pytest.raises(ModelRejectionError):
        L.build_model(drift=0.5, jumps=jumps, lattice_span=1.0)
    with pytest.raises(ModelRejectionError):
        L.build_model(gaussian_var=1.0, jumps=jumps, lattice_span=1.0)
    with pytest.raises(ModelRejectionError):
        L.build_model(jumps=L.CompoundPoisson(rate=2.0, atoms=((1.5, 1.0),)),
                      lattice_span=1.0)


def test_negative_atom_values_allowed_but_mean_checked():
    """Two-sided jumps are fine as long as the overall mean stays positive."""
    two_sided = L.CompoundPoisson(rate=1.0, atoms=((-1.0, 0.25), (1.0, 0.75)))
    assert L.build_model(jumps=two_sided).mean == pytest.approx(0.5)
    balanced = L.CompoundPoisson(rate=1.0, atoms=((-1.0, 0.5), (1.0, 0.5)))
    with pytest.raises(ValueError):
        L.build_model(jumps=balanced)          # zero mean: no drift to +infinity


def test_nonpositive_atom_probability_rejected():
    with pytest.raises(ValueError):
        L.CompoundPoisson(rate=1.0, atoms=((1.0, -0.5), (2.0, 1.5)))


# -- path structure ---------------------------------------------------------

def test_pure_drift_path_exact():
    m = L.build_model(drift=2.0)
    p = L.simulate_path(m, 10.0, seed=0)
    assert p.exact and p.linear_rate == 2.0
    assert p.values[-1] == pytest.approx(20.0)


def test_lattice_path_stays_on_lattice(lattice_model):
    p = L.simulate_path(lattice_model, 100.0, seed=5)
    assert p.exact
    assert np.all(p.values == np.round(p.values))
    assert np.all(np.diff(p.values) >= 0)


def test_subordinator_path_nondecreasing(ts_model):
    p = L.simulate_path(ts_model, 20.0, seed=9)
    assert p.exact and p.linear_rate > 0
    # piecewise-linear with positive rate and nonnegative jumps
    assert np.all(np.diff(p.values) >= 0)
    assert p.times[0] == 0.0 and p.times[-1] == pytest.approx(20.0)


def test_gaussian_needs_step(bm_model):
    with pytest.raises(ValueError):
        L.simulate_path(bm_model, 10.0)
    p = L.simulate_path(bm_model, 10.0, step=0.1, seed=3)
    assert not p.exact and p.linear_rate == 0.0


def test_bit_reproducible(ts_model, bm_model):
    for m, kw in ((ts_model, {}), (bm_model, {"step": 0.05})):
        a = L.simulate_path(m, 15.0, seed=77, **kw)
        b = L.simulate_path(m, 15.0, seed=77, **kw)
        assert np.array_equal(a.times, b.times) and np.array_equal(a.values, b.values)


def test_mean_drift_statistics(ts_model):
    """Sample mean of xi_T / T close to the model mean."""
    finals = [L.simulate_path(ts_model, 50.0, rng=L.derive_rng(10, 1, i)).values[-1]
              for i in range(400)]
    m = np.mean(finals) / 50.0
    se = np.std(finals) / 50.0 / math.sqrt(400)
    assert abs(m - 2.0) < 4 * se + 1e-3


def test_disjoint_window_increments_uncorrelated(lattice_model):
    n = 400
    inc1, inc2 = [], []
    for i in range(n):
        p = L.simulate_path(lattice_model, 20.0, rng=L.derive_rng(21, 1, i))
        v = np.interp([5.0, 6.0, 15.0, 16.0], p.times, p.values)
        inc1.append(v[1] - v[0])
        inc2.append(v[3] - v[2])
    r = np.corrcoef(inc1, inc2)[0, 1]
    assert abs(r) < 3.0 / math.sqrt(n)


def test_poisson_jump_counts(lattice_model):
    """P(no jump by t=1) = e^{-2}: the final value is 0 iff no jump occurred."""
    zeros = [L.simulate_path(lattice_model, 1.0, rng=L.derive_rng(31, 1, i)).values[-1] == 0
             for i in range(2000)]
    p_hat = np.mean(zeros)
    p_exact = oracles.poisson_count_pmf(0, 2.0, 1.0)
    assert abs(p_hat - p_exact) < 3 * math.sqrt(p_exact * (1 - p_exact) / 2000)


# -- first passage ----------------------------------------------------------

def test_first_passage_nonpositive_level(ts_model):
    p = L.simulate_path(ts_model, 5.0, seed=1)
    rec = L.first_passage(p, 0.0)
    assert rec.passage_time == 0.0 and rec.overshoot == 0.0


def test_first_passage_drift_hits_exactly():
    m = L.build_model(drift=1.0)
    p = L.simulate_path(m, 10.0, seed=0)
    rec = L.first_passage(p, 3.0)
    assert rec.hit_exactly and rec.passage_time == pytest.approx(3.0) and rec.overshoot == 0.0


def test_first_passage_jump_overshoot(lattice_model):
    """Unit jumps from integer sites: overshoot of level x is ceil(x) - x."""
    for x in (0.5, 1.25, 7.75):
        p = L.simulate_path(lattice_model, 100.0, seed=13)
        rec = L.first_passage(p, x)
        assert not rec.censored
        assert rec.overshoot == pytest.approx(math.ceil(x) - x)


def test_first_passage_censored(lattice_model):
    p = L.simulate_path(lattice_model, 1.0, seed=2)
    rec = L.first_passage(p, 1e9)
    assert rec.censored


@given(st.floats(min_value=0.1, max_value=40.0))
@settings(max_examples=25, deadline=None)
def test_first_passage_time_monotone_in_level(x):
    m = L.build_model(jumps=L.CompoundPoisson(rate=2.0, atoms=((1.0, 1.0),)),
                      lattice_span=1.0)
    p = L.simulate_path(m, 200.0, seed=99)
    r1 = L.first_passage(p, x)
    r2 = L.first_passage(p, x + 1.0)
    if not r2.censored:
        assert r1.passage_time <= r2.passage_time


def test_truncated_stable_jump_bounds(ts_model):
    j = ts_model.jumps
    g = np.random.default_rng(0)
    s = j.sample_jumps(g, 10_000, 1e-3)
    assert s.min() >= 1e-3 and s.max() <= 1.0


def test_truncated_stable_tail_mass_matches_quad(ts_model):
    j = ts_model.jumps
    for eps in (1e-4, 1e-2, 0.5):
        assert j.tail_mass(eps) == pytest.approx(oracles.ts_levy_tail(eps), rel=1e-8)
