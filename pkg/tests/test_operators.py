"""Operator algebra, PV traces, and tight-binding decay certificates."""
from __future__ import annotations

import numpy as np
import pytest

from spinbic.geometry import LatticeSpec, build_bulk_sample, core_window
from spinbic.models import realize_bulk, spinful_haldane
from spinbic.operators import (LatticeOperator, anticommutator, commutator,
                               diag_multiplier, pv_trace_from_site_values,
                               pv_trace_x1, region_trace, site_diagonal,
                               spin_operator, verify_tight_binding)
from spinbic.geometry import SwitchProfile, full_region


@pytest.fixture()
def sample():
    return build_bulk_sample(LatticeSpec(), (4, 4))


def _random_op(sample, rng, hermitian=False):
    m = rng.standard_normal((sample.dim, sample.dim)) \
        + 1j * rng.standard_normal((sample.dim, sample.dim))
    if hermitian:
        m = 0.5 * (m + m.conj().T)
    return LatticeOperator(sample, matrix=m, hermitian=hermitian)


def test_commutator_against_dense_oracle(sample):
    rng = np.random.default_rng(11)
    a = _random_op(sample, rng)
    d = LatticeOperator(sample, diagonal=rng.standard_normal(sample.dim))
    dense = LatticeOperator(sample, matrix=np.diag(d.diag))
    fast = commutator(a, d).matrix
    slow = commutator(a, dense).matrix
    np.testing.assert_allclose(fast, slow, atol=1e-13)
    oracle = a.matrix @ np.diag(d.diag) - np.diag(d.diag) @ a.matrix
    np.testing.assert_allclose(fast, oracle, atol=1e-13)


def test_anticommutator_against_dense_oracle(sample):
    rng = np.random.default_rng(12)
    a = _random_op(sample, rng)
    d = LatticeOperator(sample, diagonal=rng.standard_normal(sample.dim))
    oracle = a.matrix @ np.diag(d.diag) + np.diag(d.diag) @ a.matrix
    np.testing.assert_allclose(anticommutator(a, d).matrix, oracle,
                               atol=1e-13)
    assert np.all(commutator(d, d).diag == 0.0)


def test_hermitian_flag_validation(sample):
    rng = np.random.default_rng(13)
    m = rng.standard_normal((sample.dim, sample.dim))
    with pytest.raises(ValueError, match="hermitian"):
        LatticeOperator(sample, matrix=m + 1j * np.eye(sample.dim),
                        hermitian=True)
    with pytest.raises(ValueError):
        LatticeOperator(sample)
    with pytest.raises(ValueError):
        LatticeOperator(sample, diagonal=np.zeros(3))


def test_spin_operator_and_site_diagonal(sample):
    s = spin_operator(sample)
    assert s.diag[0] == 0.5 and s.diag[1] == -0.5
    assert np.all(site_diagonal(s) == 0.0)
    sw = diag_multiplier(sample, SwitchProfile(direction=1))
    assert np.all(np.unique(sw.diag) == [0.0, 1.0])


def test_region_trace(sample):
    rng = np.random.default_rng(14)
    a = _random_op(sample, rng)
    everything = region_trace(a, full_region(sample))
    assert everything == pytest.approx(complex(np.trace(a.matrix)), abs=1e-12)


def test_pv_trace_exact_for_dyadic_compact_support(sample):
    # dyadic rationals make every float sum exact, so the PV limit must
    # equal the conventional trace bit-for-bit once the window covers
    # the support
    rng = np.random.default_rng(15)
    site_vals = np.where(np.abs(sample.x1()) <= 2.0,
                         rng.integers(-64, 64, sample.n_sites) / 64.0, 0.0)
    conventional = float(np.sum(site_vals))
    trail = pv_trace_from_site_values(site_vals, sample, 1.0, 4)
    covered = trail.partial_sums[2:]  # windows N >= 3 cover (-3a, 3a]
    assert np.all(covered == covered[0])
    assert trail.limit_estimate == conventional
    assert trail.cauchy_gap == 0.0


def test_pv_trace_strips_and_window_guard(sample):
    site_vals = np.ones(sample.n_sites)
    trail = pv_trace_from_site_values(site_vals, sample, 1.0, 4)
    # strip n covers (n, n+1]: 9 sites per column at extent 4
    assert np.all(trail.strip_values == 9.0)
    with pytest.raises(ValueError, match="window"):
        pv_trace_from_site_values(site_vals, sample, 1.0, 10,
                                  core_window(sample, 0.25))
    with pytest.raises(ValueError, match="step"):
        pv_trace_from_site_values(site_vals, sample, 0.0, 2)
    with pytest.raises(ValueError, match="axis"):
        pv_trace_from_site_values(site_vals, sample, 1.0, 2, axis=3)


def test_pv_trace_axis_two(sample):
    vals = sample.x2() + 10.0  # varies along x2 only
    t1 = pv_trace_from_site_values(vals, sample, 1.0, 3, axis=1)
    t2 = pv_trace_from_site_values(vals, sample, 1.0, 3, axis=2)
    # along axis 1 every strip holds one full column (same sum); along
    # axis 2 the strips hold different values
    assert np.ptp(t1.strip_values) > 0 or np.ptp(t2.strip_values) > 0
    assert t1.partial_sums[-1] != t2.partial_sums[-1]


def test_pv_trace_x1_matches_site_values(sample):
    rng = np.random.default_rng(16)
    d = rng.standard_normal(sample.dim)
    op = LatticeOperator(sample, diagonal=d)
    a = pv_trace_x1(op, 1.0, 4)
    b = pv_trace_from_site_values(site_diagonal(op), sample, 1.0, 4)
    np.testing.assert_array_equal(a.partial_sums, b.partial_sums)


def test_verify_tight_binding_certifies_hopping_model():
    sample, hop = realize_bulk(spinful_haldane(), 4)
    fit = verify_tight_binding(hop)
    assert fit.certified
    assert fit.lambda_hat > 0.3


def test_verify_tight_binding_flags_dense_matrix(sample):
    rng = np.random.default_rng(17)
    dense = _random_op(sample, rng, hermitian=True)
    fit = verify_tight_binding(dense)
    assert not fit.certified or fit.lambda_hat < 0.1
