"""Shared builders for randomized test instances (plain seeded RNG)."""
from __future__ import annotations

import numpy as np

from spinbic import DensityFunction, density_for_gap


def haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def hermitian_with_spectrum(rng: np.random.Generator, eigs: np.ndarray):
    """Hermitian matrix with the given eigenvalues; returns (h, eigs, u)."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    u = haar_unitary(rng, len(eigs))
    h = (u * eigs[None, :]) @ u.conj().T
    return 0.5 * (h + h.conj().T), eigs, u


def random_hermitian(rng: np.random.Generator, n: int,
                     lo: float = -3.0, hi: float = 3.0):
    """Fully random spectrum in [lo, hi] (eigenvalues may sit on ramps)."""
    return hermitian_with_spectrum(rng, rng.uniform(lo, hi, size=n))


def random_gapped_hermitian(rng: np.random.Generator, n: int,
                            n_occ: int | None = None):
    """Spectrum split into [-3, -1] and [1, 3]; returns (h, eigs, u, n_occ)."""
    if n_occ is None:
        n_occ = int(rng.integers(1, n))
    eigs = np.concatenate([rng.uniform(-3.0, -1.0, size=n_occ),
                           rng.uniform(1.0, 3.0, size=n - n_occ)])
    h, eigs, u = hermitian_with_spectrum(rng, eigs)
    return h, eigs, u, n_occ


def midgap_density(smooth_order: int = 14) -> DensityFunction:
    """Descent ramp centered in the (-1, 1) gap of the gapped instances."""
    return density_for_gap((-1.0, 1.0), -3.2, margin=0.1,
                           smooth_order=smooth_order)


def wide_density(smooth_order: int = 14) -> DensityFunction:
    """Density whose descent spans the middle of a [-3, 3] spectrum window,
    so fully random spectra land on the ramp (the hard quadrature case)."""
    return DensityFunction(ascent=(-4.6, -3.4), descent=(-0.6, 0.6),
                           smooth_order=smooth_order)
