"""Density functions, divided differences, and both correlation engines."""
from __future__ import annotations

import numpy as np
import pytest

from _helpers import (hermitian_with_spectrum, midgap_density,
                      random_gapped_hermitian, random_hermitian, wide_density)
from spinbic.calculus import (AlmostAnalyticExtension, DensityFunction,
                              SpectralData, _assemble_m1, _dd1, _m1_reference,
                              apply_density, apply_density_quadrature,
                              correlation_diagonal, correlation_matrix,
                              dd2, density_for_gap, off_diagonal_part,
                              projected_block_part, quadrature_nodes)


def test_density_profile_shape():
    rho = DensityFunction(ascent=(-4.0, -3.0), descent=(-0.5, 0.5))
    xs = np.array([-5.0, -4.0, -3.0, -1.0, -0.5, 0.0, 0.5, 2.0])
    vals = rho(xs)
    assert vals[0] == 0.0 and vals[1] == 0.0
    assert vals[2] == 1.0 and vals[3] == 1.0 and vals[4] == 1.0
    assert 0.0 < vals[5] < 1.0
    assert vals[6] == 0.0 and vals[7] == 0.0
    assert rho.min_ramp == 1.0
    with pytest.raises(ValueError):
        DensityFunction(ascent=(-1.0, 0.0), descent=(-0.5, 0.5))


def test_density_derivative_is_negative_on_descent():
    rho = midgap_density()
    xs = np.linspace(*rho.descent, 31)[1:-1]
    assert np.all(rho.deriv(xs, 1) < 0.0)
    # derivative vanishes on both plateaus
    assert np.all(rho.deriv(np.array([-2.0, 2.0]), 1) == 0.0)


def test_density_for_gap_placement():
    rho = density_for_gap((-1.0, 1.0), -3.0, margin=0.2)
    assert rho.descent == (-0.6, 0.6)
    assert rho.ascent[1] < -3.0
    assert rho(np.array([-3.0]))[0] == 1.0
    with pytest.raises(ValueError):
        density_for_gap((1.0, -1.0), -3.0)


def test_classify_splits_spectrum():
    rho = midgap_density()
    eigs = np.array([-2.5, -1.7, -0.1, 0.05, 1.4, 2.2])
    n_low, n_ramp = rho.classify(eigs)
    assert (n_low, n_ramp) == (2, 2)
    with pytest.raises(ValueError, match="ascent"):
        rho.classify(np.array([-50.0, 0.0]))


def test_first_divided_difference_oracle():
    rho = midgap_density()
    x, y = 0.1, -0.3
    expect = (rho(np.array([x]))[0] - rho(np.array([y]))[0]) / (x - y)
    got = _dd1(rho, np.array([x]), np.array([y]), 1e-7)[0]
    assert got == pytest.approx(expect, rel=1e-12)
    # coincidence limit -> derivative
    got_c = _dd1(rho, np.array([x]), np.array([x + 1e-9]), 1e-7)[0]
    assert got_c == pytest.approx(rho.deriv(np.array([x]), 1)[0], rel=1e-5)


def test_second_divided_difference_recursion_oracle():
    rho = midgap_density()
    x, y, z = 0.12, -0.25, 0.4
    def d1(u, v):
        return (rho(np.array([u]))[0] - rho(np.array([v]))[0]) / (u - v)
    expect = (d1(x, z) - d1(y, z)) / (x - y)
    got = dd2(rho, np.array([x]), np.array([y]), np.array([z]))[0]
    assert got == pytest.approx(expect, rel=1e-10)
    # full coincidence -> rho''(x) / 2
    got_c = dd2(rho, np.array([x]), np.array([x]), np.array([x]))[0]
    assert got_c == pytest.approx(rho.deriv(np.array([x]), 2)[0] / 2.0,
                                  rel=1e-8)


def test_quadrature_mesh_is_finite_and_scaled():
    rho = midgap_density()
    ext = AlmostAnalyticExtension(rho)
    z, w = quadrature_nodes(ext, np.array([-2.0, -1.5, 0.05, 1.8]))
    assert np.all(np.isfinite(z)) and np.all(np.isfinite(w))
    assert np.all(np.abs(z.imag) <= ext.y1 + 1e-12)
    assert len(z) == len(w) > 100


def test_apply_density_engines_agree():
    rng = np.random.default_rng(21)
    rho = midgap_density()
    for _ in range(4):
        h, eigs, _, _ = random_gapped_hermitian(rng, 18)
        sd = SpectralData.from_matrix(h)
        spectral = apply_density(rho, sd)
        quad = apply_density_quadrature(rho, h)
        assert np.max(np.abs(spectral - quad)) < 1e-7


def test_apply_density_is_spectral_projection_for_gapped():
    rng = np.random.default_rng(22)
    h, eigs, u, n_occ = random_gapped_hermitian(rng, 16)
    p = apply_density(midgap_density(), SpectralData.from_matrix(h))
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    assert np.trace(p).real == pytest.approx(n_occ, abs=1e-12)


def test_correlation_engines_agree_on_ramp_spectrum():
    rng = np.random.default_rng(23)
    rho = wide_density()
    for _ in range(3):
        n = int(rng.integers(8, 20))
        h, eigs, _ = random_hermitian(rng, n)
        a = rng.uniform(-1, 1, n)
        b = rng.uniform(-1, 1, n)
        spec = correlation_matrix(h, a, b, rho, engine="spectral")
        quad = correlation_matrix(h, a, b, rho, engine="quadrature")
        assert np.max(np.abs(spec - quad)) < 1e-6
        # hermiticity of the correlation operator
        assert np.max(np.abs(spec - spec.conj().T)) < 1e-10


def test_correlation_antisymmetric_in_arguments():
    rng = np.random.default_rng(24)
    h, eigs, _, _ = random_gapped_hermitian(rng, 14)
    a = rng.uniform(-1, 1, 14)
    b = rng.uniform(-1, 1, 14)
    rho = midgap_density()
    ab = correlation_matrix(h, a, b, rho)
    ba = correlation_matrix(h, b, a, rho)
    np.testing.assert_allclose(ab, -ba, atol=1e-10)


def test_correlation_diagonal_matches_dense():
    rng = np.random.default_rng(25)
    h, eigs, _, _ = random_gapped_hermitian(rng, 15)
    a = rng.uniform(-1, 1, 15)
    b = rng.uniform(-1, 1, 15)
    rho = midgap_density()
    sd = SpectralData.from_matrix(h)
    dense = correlation_matrix(h, a, b, rho, spectral_data=sd)
    diag = correlation_diagonal(sd, a, b, rho)
    np.testing.assert_allclose(diag, np.real(np.diag(dense)), atol=1e-11)
    assert np.max(np.abs(np.imag(np.diag(dense)))) < 1e-11


def test_class_assembly_matches_reference_sum():
    rng = np.random.default_rng(26)
    rho = wide_density()
    n = 17
    eigs = np.sort(np.concatenate([rng.uniform(-3, 3, n - 2),
                                   rng.uniform(-0.5, 0.5, 2)]))
    h, eigs, u = hermitian_with_spectrum(rng, eigs)
    a = rng.uniform(-1, 1, n)
    b = rng.uniform(-1, 1, n)
    fast = _assemble_m1(eigs, u, a, b, rho, 1e-7)
    slow = _m1_reference(eigs, u, a, b, rho, 1e-7)
    assert np.max(np.abs(fast - slow)) < 1e-11 * max(1, np.max(np.abs(slow)))


def test_off_diagonal_part_engines_and_blocks():
    rng = np.random.default_rng(27)
    rho = midgap_density()
    for _ in range(3):
        n = int(rng.integers(10, 20))
        h, eigs, u, n_occ = random_gapped_hermitian(rng, n)
        a = rng.uniform(-1, 1, n)
        sd = SpectralData.from_matrix(h)
        od_s = off_diagonal_part(h, a, rho, engine="spectral",
                                 spectral_data=sd)
        od_q = off_diagonal_part(h, a, rho, engine="quadrature")
        assert np.max(np.abs(od_s - od_q)) < 1e-7
        p = apply_density(rho, sd)
        q = np.eye(n) - p
        assert np.max(np.abs(p @ od_s @ p)) < 1e-12
        assert np.max(np.abs(q @ od_s @ q)) < 1e-12


def test_off_diagonal_part_of_identity_vanishes_for_gapped():
    rng = np.random.default_rng(28)
    h, eigs, _, _ = random_gapped_hermitian(rng, 12)
    od = off_diagonal_part(h, np.ones(12), midgap_density())
    assert np.max(np.abs(od)) < 1e-12


def test_projected_block_part_decomposition():
    rng = np.random.default_rng(29)
    n = 10
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    u = np.linalg.qr(rng.standard_normal((n, n)))[0]
    p = u[:, :4] @ u[:, :4].T
    off = projected_block_part(m, p)
    diag = projected_block_part(m, p, diagonal=True)
    np.testing.assert_allclose(off + diag, m, atol=1e-12)
    np.testing.assert_allclose(p @ off @ p, 0.0 * m, atol=1e-12)
