"""Conductance pipelines: bulk traces, torque, drift, and the residual."""
from __future__ import annotations

import numpy as np
import pytest

from spinbic.conductance import (SpectralCache, bulk_spin_conductance,
                                 bulk_torque_trail, charge_switch_index,
                                 correlation_site_values, default_density,
                                 default_switch, drift_conductance,
                                 exp_decay_fit, kubo_spin_conductance,
                                 spin_index_values, strip_distances,
                                 switch_index_values, verify_bic,
                                 _matrix_from_cache)
from spinbic.models import (atomic_insulator, bhz, realize_bulk,
                            realize_junction, spinful_haldane)

EXTENT = 5  # 11 x 11 cells: small enough for seconds-scale eigh calls


@pytest.fixture(scope="module")
def haldane_bulk():
    model = spinful_haldane()
    sample, hop = realize_bulk(model, EXTENT)
    cache = SpectralCache.build(hop.matrix)
    return model, sample, hop.matrix, cache


def test_spectral_cache_splits_conserving_blocks(haldane_bulk):
    _, sample, h_mat, cache = haldane_bulk
    assert cache.conserving
    assert set(cache.blocks) == {0, 1}
    assert cache.blocks[0].dim == sample.n_sites
    rebuilt = _matrix_from_cache(sample, cache)
    assert np.max(np.abs(rebuilt - h_mat)) < 1e-10


def test_spectral_cache_keeps_mixing_matrix_whole():
    left, right = atomic_insulator(), bhz(breaking=0.2)
    _, hop = realize_junction(left, right, 2)
    cache = SpectralCache.build(hop.matrix)
    assert not cache.conserving
    assert list(cache.blocks) == ["full"]


def test_constant_multiplier_contributes_exactly_zero(haldane_bulk):
    model, sample, _, cache = haldane_bulk
    density = default_density([model])
    const = np.ones(2 * sample.n_sites)
    lam2 = switch_index_values(sample, default_switch(2))
    vals = correlation_site_values(cache, lam2, const, density)
    assert np.max(np.abs(vals)) == 0.0


def test_bulk_conductance_matches_chern_half_difference(haldane_bulk):
    model, sample, _, cache = haldane_bulk
    out = bulk_spin_conductance(model, EXTENT, cache=cache, sample=sample)
    assert out.conserving
    # C_up = +1, C_down = -1 -> sigma = (C_up - C_down) / 2 = 1
    assert out.value == pytest.approx(1.0, abs=5e-2)
    assert out.trail.cauchy_gap < 5e-2


def test_bulk_conductance_engines_agree_small():
    model = spinful_haldane()
    spectral = bulk_spin_conductance(model, 2)
    quad = bulk_spin_conductance(model, 2, engine="quadrature")
    assert quad.value == pytest.approx(spectral.value, abs=1e-6)
    with pytest.raises(ValueError, match="engine"):
        bulk_spin_conductance(model, 2, engine="nonsense")


def test_bulk_conductance_step_multiple_consistency(haldane_bulk):
    model, sample, _, cache = haldane_bulk
    base = bulk_spin_conductance(model, EXTENT, cache=cache, sample=sample)
    doubled = bulk_spin_conductance(model, EXTENT, cache=cache, sample=sample,
                                    step_multiple=2)
    assert doubled.trail.step == 2.0 * base.trail.step
    # invariance sharpens with extent; at this size only the leading digits
    assert doubled.value == pytest.approx(base.value, abs=5e-2)


def test_atomic_insulator_is_structural_zero():
    out = bulk_spin_conductance(atomic_insulator(), 3)
    assert out.structural_zero
    assert out.value == 0.0
    assert np.all(out.trail.partial_sums == 0.0)


def test_kubo_index_agrees_with_pv_trace(haldane_bulk):
    model, sample, _, cache = haldane_bulk
    density = default_density([model])
    sigma = bulk_spin_conductance(model, EXTENT, density=density,
                                  cache=cache, sample=sample)
    kubo = kubo_spin_conductance(sample, cache, density)
    assert abs(kubo.imag) < 1e-10
    assert kubo.real == pytest.approx(sigma.value, abs=5e-2)
    assert kubo.real == pytest.approx(1.0, abs=5e-2)


def test_charge_switch_index_per_spin_blocks(haldane_bulk):
    model, sample, _, cache = haldane_bulk
    density = default_density([model])
    up = charge_switch_index(sample, cache.blocks[0], density)
    dn = charge_switch_index(sample, cache.blocks[1], density)
    assert up.real == pytest.approx(1.0, abs=5e-2)
    assert dn.real == pytest.approx(-1.0, abs=5e-2)
    assert abs(up.imag) < 1e-10


def test_torque_vanishes_identically_when_conserving(haldane_bulk):
    model, sample, _, cache = haldane_bulk
    density = default_density([model])
    from spinbic.conductance import torque_conductance
    out = torque_conductance(sample, cache, density)
    assert out.conserving
    assert np.all(out.trail.strip_values == 0.0)
    assert out.value == 0.0


def test_bulk_torque_leakage_grows_toward_boundary():
    out = bulk_torque_trail(bhz(breaking=0.2), 6)
    assert not out.conserving
    vals = np.abs(out.trail.strip_values)
    dist = strip_distances(out.trail)
    center = vals[dist == 0.0].mean()
    edge = vals[dist >= 3.0].mean()
    assert 0.0 < center < 1e-2
    assert edge > 3.0 * center


def test_drift_exactly_zero_without_in_gap_states():
    model = atomic_insulator()
    sample, hop = realize_bulk(model, 3)
    cache = SpectralCache.build(hop.matrix)
    out = drift_conductance(sample, hop.matrix, cache,
                            default_density([model]))
    assert out.value == 0.0 and out.imag_defect == 0.0


def test_drift_small_for_bulk_with_edge_states(haldane_bulk):
    # open-boundary topological samples carry in-gap edge modes whose
    # tails reach the core window, so the drift is small but not zero
    model, sample, h_mat, cache = haldane_bulk
    density = default_density([model])
    out = drift_conductance(sample, h_mat, cache, density)
    assert 0.0 < abs(out.value) < 5e-3


def test_verify_bic_small_junction():
    rep = verify_bic(atomic_insulator(), spinful_haldane(), 6,
                     junction={"spin_mixing": False, "coupling_seed": 0})
    assert rep.conserving
    assert rep.torque.structural_zero is False
    assert rep.torque.value == 0.0
    assert rep.sigma_minus.value == 0.0
    assert rep.sigma_plus.value == pytest.approx(1.0, abs=5e-2)
    assert rep.drift.value == pytest.approx(rep.bulk_difference, abs=0.15)
    assert rep.residual < 0.15
    assert rep.drift.imag_defect < 1e-3
    assert rep.extent == (6, 6)


def test_exp_decay_fit_recovers_synthetic_rate():
    rng = np.random.default_rng(41)
    dist = np.arange(12, dtype=float)
    rate = 0.7
    vals = 3.0 * np.exp(-rate * dist) * np.exp(rng.normal(0, 0.05, 12))
    fit = exp_decay_fit(dist, vals)
    assert fit.rate == pytest.approx(rate, abs=0.1)
    assert fit.passed and 0.0 < fit.rate_low < fit.rate
    assert fit.n_points == 12
    with pytest.raises(ValueError, match="too few"):
        exp_decay_fit(dist[:3], vals[:3])


def test_strip_distances_fold():
    from spinbic.operators import PvTraceTrail
    trail = PvTraceTrail(partial_sums=np.zeros(3), limit_estimate=0.0,
                         cauchy_gap=0.0, step=1.0,
                         strip_ns=np.array([-3, -2, -1, 0, 1, 2]),
                         strip_values=np.zeros(6))
    np.testing.assert_array_equal(strip_distances(trail),
                                  [2.0, 1.0, 0.0, 0.0, 1.0, 2.0])


def test_spin_and_switch_index_values(haldane_bulk):
    _, sample, _, _ = haldane_bulk
    s = spin_index_values(sample)
    assert set(s.tolist()) == {0.5, -0.5}
    lam = switch_index_values(sample, default_switch(1))
    assert set(lam.tolist()) == {0.0, 1.0}
    # heaviside jumps exactly at the midline: x1 >= 0 maps to 1
    x1 = np.repeat(sample.x1(), 2)
    np.testing.assert_array_equal(lam, (x1 >= 0.0).astype(float))
