"""Bulk and interface spin conductances and the correspondence residual.

Normalization: conductances are reported in units of the conductance
quantum, so a spin-conserving model with per-spin Chern numbers (C, -C)
has bulk spin conductance C.  The correlation operator carries 2*pi
times the strip contour integral; the single compensating division by
2*pi happens in the trace wrappers here and nowhere else.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lcm

import numpy as np
from scipy import stats

from .calculus import (DEFAULT_DD_EPS, DensityFunction, SpectralData,
                       apply_density, correlation_diagonal,
                       correlation_matrix, density_for_gap)
from .geometry import (LatticeSample, Region, SwitchProfile, core_window)
from .models import (BulkModel, common_gap, extent_pair, realize_bulk,
                     realize_junction, spectrum_minimum)
from .operators import (LatticeOperator, PvTraceTrail,
                        pv_trace_from_site_values)

TWO_PI = 2.0 * np.pi


def default_switch(direction: int, kind: str = "heaviside",
                   ramp_width: float = 2.0,
                   smooth_order: int = 14) -> SwitchProfile:
    """Switch with its jump on the coordinate midline (x_direction = 0)."""
    return SwitchProfile(direction=direction, kind=kind, jump_center=0.0,
                         ramp_width=ramp_width, smooth_order=smooth_order)


def default_density(models, margin: float = 0.1, smooth_order: int = 14,
                    nk: int = 32) -> DensityFunction:
    """Density whose descent ramp crosses the common gap of the models."""
    gap = common_gap(models, nk)
    floor = spectrum_minimum(models, nk)
    return density_for_gap(gap, floor, margin=margin,
                           smooth_order=smooth_order)


def switch_index_values(sample: LatticeSample, profile: SwitchProfile) -> np.ndarray:
    """Per-index (site x spin) values of a switch multiplier."""
    return np.repeat(profile(sample.coords), 2)


def spin_index_values(sample: LatticeSample) -> np.ndarray:
    return np.tile([0.5, -0.5], sample.n_sites)


def _fold_sites(index_vals: np.ndarray) -> np.ndarray:
    return index_vals[0::2] + index_vals[1::2]


@dataclass
class SpectralCache:
    """Eigendecompositions of a sample Hamiltonian, split by spin when
    the matrix conserves it (which quarters the diagonalization cost)."""

    conserving: bool
    blocks: dict  # spin -> SpectralData, or {"full": SpectralData}

    @classmethod
    def build(cls, h_mat: np.ndarray, tol: float = 1e-12) -> "SpectralCache":
        scale = max(1.0, float(np.max(np.abs(h_mat))))
        mixing = max(float(np.max(np.abs(h_mat[0::2, 1::2]))),
                     float(np.max(np.abs(h_mat[1::2, 0::2]))))
        if mixing <= tol * scale:
            return cls(conserving=True, blocks={
                s: SpectralData.from_matrix(np.ascontiguousarray(
                    h_mat[s::2, s::2])) for s in (0, 1)})
        return cls(conserving=False,
                   blocks={"full": SpectralData.from_matrix(h_mat)})

    def items(self):
        """(index restriction, SpectralData) pairs covering the sample."""
        if self.conserving:
            return [(slice(0, None, 2), self.blocks[0]),
                    (slice(1, None, 2), self.blocks[1])]
        return [(slice(None), self.blocks["full"])]


def correlation_site_values(cache: SpectralCache, a_idx: np.ndarray,
                            b_idx: np.ndarray, density: DensityFunction,
                            eps: float = DEFAULT_DD_EPS) -> np.ndarray:
    """Per-site diagonal of the correlation operator of (A, B).

    A and B enter as per-index real diagonals.  Constant restrictions
    commute with the block Hamiltonian and contribute exactly zero, which
    in particular makes the torque of a spin-conserving sample vanish
    identically rather than approximately.
    """
    n_idx = len(a_idx)
    out_idx = np.zeros(n_idx)
    for rows, sd in cache.items():
        a_b, b_b = a_idx[rows], b_idx[rows]
        if np.ptp(a_b) == 0.0 or np.ptp(b_b) == 0.0:
            continue
        out_idx[rows] = correlation_diagonal(sd, a_b, b_b, density, eps)
    return _fold_sites(out_idx)


def _pv_window(sample: LatticeSample, core: Region, step: float,
               axis: int = 1) -> int:
    coord = sample.x1() if axis == 1 else sample.x2()
    x1 = np.abs(coord[core.mask])
    if x1.size == 0:
        raise ValueError("empty core window")
    return max(1, int(np.floor(float(x1.max()) / step + 1e-9)))


@dataclass(frozen=True)
class SigmaOutcome:
    """A conductance obtained as a principal-value trace along x1."""

    value: float
    trail: PvTraceTrail
    conserving: bool
    structural_zero: bool = False


def _sigma_from_sites(site_vals: np.ndarray, sample: LatticeSample,
                      step: float, core: Region, conserving: bool,
                      axis: int = 1) -> SigmaOutcome:
    trail = pv_trace_from_site_values(site_vals / TWO_PI, sample, step,
                                      _pv_window(sample, core, step, axis),
                                      core, axis)
    return SigmaOutcome(value=trail.limit_estimate, trail=trail,
                        conserving=conserving)


def _zero_outcome(sample: LatticeSample, step: float, core: Region,
                  conserving: bool, axis: int = 1) -> SigmaOutcome:
    trail = pv_trace_from_site_values(np.zeros(sample.n_sites), sample, step,
                                      _pv_window(sample, core, step, axis),
                                      core, axis)
    return SigmaOutcome(value=0.0, trail=trail, conserving=conserving,
                        structural_zero=True)


def bulk_spin_conductance(model: BulkModel, extent, *,
                          density: DensityFunction | None = None,
                          switch1: SwitchProfile | None = None,
                          switch2: SwitchProfile | None = None,
                          margin: float = 0.25, step_multiple: int = 1,
                          dd_cluster_eps: float = DEFAULT_DD_EPS,
                          engine: str = "spectral",
                          quadrature_opts: dict | None = None,
                          cache: SpectralCache | None = None,
                          sample: LatticeSample | None = None
                          ) -> SigmaOutcome:
    """Bulk spin conductance: principal-value trace along x1 of the
    correlation operator of (switch across x2, spin-weighted switch
    across x1), divided by 2*pi.

    The quadrature engine forms the dense correlation operator at cubic
    cost per contour node and is intended for desk-scale validation.
    The value is invariant (in the infinite-volume limit) under the
    switch profile, the density profile, and the PV step multiple.
    """
    if density is None:
        density = default_density([model])
    switch1 = switch1 or default_switch(1)
    switch2 = switch2 or default_switch(2)
    step = step_multiple * model.lattice.a1
    h_mat = None
    if sample is None or cache is None:
        sample, hop = realize_bulk(model, extent)
        if model.max_hopping_range() == 0:
            # uncoupled sites: every commutator with a multiplier vanishes
            return _zero_outcome(sample, step, core_window(sample, margin),
                                 conserving=True)
        h_mat = hop.matrix
        cache = SpectralCache.build(h_mat)
        del hop
    core = core_window(sample, margin)
    lam2 = switch_index_values(sample, switch2)
    lam1s = switch_index_values(sample, switch1) * spin_index_values(sample)
    if engine == "quadrature":
        if h_mat is None:
            h_mat = _matrix_from_cache(sample, cache)
        corr = correlation_matrix(h_mat, lam2, lam1s, density,
                                  engine="quadrature",
                                  **(quadrature_opts or {}))
        site_vals = _fold_sites(np.real(np.diag(corr)))
    elif engine == "spectral":
        site_vals = correlation_site_values(cache, lam2, lam1s, density,
                                            dd_cluster_eps)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return _sigma_from_sites(site_vals, sample, step, core, cache.conserving)


def _matrix_from_cache(sample: LatticeSample, cache: SpectralCache) -> np.ndarray:
    """Rebuild the dense Hamiltonian from a spectral cache."""
    h = np.zeros((2 * sample.n_sites, 2 * sample.n_sites), dtype=complex)
    for rows, sd in cache.items():
        block = (sd.vecs * sd.eigs[None, :]) @ sd.vecs.conj().T
        h[rows, rows] = block
    return h


def torque_conductance(sample: LatticeSample, cache: SpectralCache,
                       density: DensityFunction, *,
                       switch2: SwitchProfile | None = None,
                       margin: float = 0.25, step: float = 1.0,
                       dd_cluster_eps: float = DEFAULT_DD_EPS,
                       engine: str = "spectral", h_mat: np.ndarray | None = None,
                       quadrature_opts: dict | None = None) -> SigmaOutcome:
    """Spin-torque conductance: principal-value trace along x1 of the
    correlation operator of (switch across x2, spin), divided by 2*pi.

    Works on any sample (bulk or junction); for a spin-conserving
    Hamiltonian the correlation operator is identically zero.
    """
    switch2 = switch2 or default_switch(2)
    core = core_window(sample, margin)
    lam2 = switch_index_values(sample, switch2)
    s_idx = spin_index_values(sample)
    if engine == "quadrature":
        if h_mat is None:
            h_mat = _matrix_from_cache(sample, cache)
        corr = correlation_matrix(h_mat, lam2, s_idx, density,
                                  engine="quadrature",
                                  **(quadrature_opts or {}))
        site_vals = _fold_sites(np.real(np.diag(corr)))
    elif engine == "spectral":
        site_vals = correlation_site_values(cache, lam2, s_idx, density,
                                            dd_cluster_eps)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return _sigma_from_sites(site_vals, sample, step, core, cache.conserving)


@dataclass(frozen=True)
class DriftOutcome:
    """Core-window trace of the spin-drift operator."""

    value: float
    imag_defect: float


def drift_conductance(sample: LatticeSample, h_mat: np.ndarray,
                      cache: SpectralCache, density: DensityFunction, *,
                      switch2: SwitchProfile | None = None,
                      margin: float = 0.25) -> DriftOutcome:
    """Spin-drift conductance i*pi*Tr_core({[H, switch2], S} rho'(H)).

    rho' is supported on the descent ramp, so only in-gap eigenpairs
    enter; for a gapped bulk sample without in-gap states the drift is
    exactly zero.
    """
    switch2 = switch2 or default_switch(2)
    lam2 = switch_index_values(sample, switch2)
    s_idx = spin_index_values(sample)
    vals = np.zeros(2 * sample.n_sites, dtype=complex)
    for rows, sd in cache.items():
        n_low, n_ramp = density.classify(sd.eigs)
        if n_ramp == 0:
            continue
        gap_sl = slice(n_low, n_low + n_ramp)
        l2, s2 = lam2[rows], s_idx[rows]
        m0 = h_mat[rows, rows] * (l2[None, :] - l2[:, None])
        m0 *= (s2[:, None] + s2[None, :])
        vg = sd.vecs[:, gap_sl]
        w = m0 @ vg
        rho_p = density.deriv(sd.eigs[gap_sl], 1)
        vals[rows] = np.einsum("ig,ig->i", w * rho_p[None, :], vg.conj())
    core = core_window(sample, margin)
    total = 1j * np.pi * complex(_fold_sites(vals)[core.mask].sum())
    return DriftOutcome(value=total.real, imag_defect=abs(total.imag))


def projector_switch_index(p_mat: np.ndarray, a_idx: np.ndarray,
                           b_idx: np.ndarray,
                           core_site_mask: np.ndarray) -> complex:
    """2*pi*i * Tr_core(P [[P, A], [P, B]]) for diagonal multipliers A, B.

    For the spectral projection of a gapped sample this is the real-space
    index whose value matches the Chern number of the occupied bands when
    A, B switch across x1 and x2.
    """
    c1 = p_mat * (a_idx[None, :] - a_idx[:, None])
    c2 = p_mat * (b_idx[None, :] - b_idx[:, None])
    inner = c1 @ c2
    inner -= c2 @ c1
    diag = np.einsum("ij,ji->i", p_mat, inner)
    if len(core_site_mask) * 2 == len(diag):
        site_diag = diag[0::2] + diag[1::2]
    else:
        site_diag = diag
    return 2j * np.pi * complex(site_diag[core_site_mask].sum())


def kubo_spin_conductance(sample: LatticeSample, cache: SpectralCache,
                          density: DensityFunction, *,
                          switch1: SwitchProfile | None = None,
                          switch2: SwitchProfile | None = None,
                          margin: float = 0.25) -> complex:
    """Projector form 2*pi*i*Tr_core(P [[P, S*switch1], [P, switch2]]).

    Agrees with the spin conductance for spin-conserving gapped samples,
    where it equals half the difference of the per-spin Chern numbers.
    """
    switch1 = switch1 or default_switch(1)
    switch2 = switch2 or default_switch(2)
    core = core_window(sample, margin)
    lam1 = switch_index_values(sample, switch1)
    lam2 = switch_index_values(sample, switch2)
    s_idx = spin_index_values(sample)
    total = 0.0 + 0.0j
    for rows, sd in cache.items():
        p = apply_density(density, sd)
        total += projector_switch_index(p, (lam1 * s_idx)[rows], lam2[rows],
                                        core.mask)
    return total


def charge_switch_index(sample: LatticeSample, sd: SpectralData,
                        density: DensityFunction, *,
                        switch1: SwitchProfile | None = None,
                        switch2: SwitchProfile | None = None,
                        margin: float = 0.25) -> complex:
    """2*pi*i*Tr_core(P [[P, switch1], [P, switch2]]) for one spin block
    (or a full sample): the real-space Chern number of the filled bands."""
    switch1 = switch1 or default_switch(1)
    switch2 = switch2 or default_switch(2)
    core = core_window(sample, margin)
    p = apply_density(density, sd)
    lam1 = switch_index_values(sample, switch1)
    lam2 = switch_index_values(sample, switch2)
    if sd.dim == sample.n_sites:  # one spin block
        lam1, lam2 = lam1[0::2], lam2[0::2]
    return projector_switch_index(p, lam1, lam2, core.mask)


@dataclass(frozen=True)
class BicReport:
    """All four conductances of one junction plus the identity residual."""

    extent: tuple
    conserving: bool
    sigma_plus: SigmaOutcome
    sigma_minus: SigmaOutcome
    torque: SigmaOutcome
    drift: DriftOutcome

    @property
    def bulk_difference(self) -> float:
        return self.sigma_plus.value - self.sigma_minus.value

    @property
    def interface_total(self) -> float:
        return self.drift.value + self.torque.value

    @property
    def residual(self) -> float:
        return abs(self.interface_total - self.bulk_difference)


def verify_bic(left_model: BulkModel, right_model: BulkModel, extent, *,
               junction: dict | None = None,
               density: DensityFunction | None = None,
               switch1: SwitchProfile | None = None,
               switch2: SwitchProfile | None = None,
               margin: float = 0.25, step_multiple: int = 1,
               dd_cluster_eps: float = DEFAULT_DD_EPS,
               engine: str = "spectral",
               quadrature_opts: dict | None = None) -> BicReport:
    """Evaluate both sides of the bulk-interface correspondence.

    Builds bulk samples of the two models and the glued junction at the
    same extent, computes the two bulk spin conductances, the interface
    drift and torque, and reports the residual
    |drift + torque - (sigma_plus - sigma_minus)|.  The engine selects
    how correlation operators are evaluated; the drift is a single
    spectral-derivative trace and is engine-independent.
    """
    if density is None:
        density = default_density([left_model, right_model])
    switch1 = switch1 or default_switch(1)
    switch2 = switch2 or default_switch(2)
    sigma_minus = bulk_spin_conductance(
        left_model, extent, density=density, switch1=switch1,
        switch2=switch2, margin=margin, step_multiple=step_multiple,
        dd_cluster_eps=dd_cluster_eps, engine=engine,
        quadrature_opts=quadrature_opts)
    sigma_plus = bulk_spin_conductance(
        right_model, extent, density=density, switch1=switch1,
        switch2=switch2, margin=margin, step_multiple=step_multiple,
        dd_cluster_eps=dd_cluster_eps, engine=engine,
        quadrature_opts=quadrature_opts)
    sample, hop = realize_junction(left_model, right_model, extent,
                                   **(junction or {}))
    cache = SpectralCache.build(hop.matrix)
    drift = drift_conductance(sample, hop.matrix, cache, density,
                              switch2=switch2, margin=margin)
    h_for_torque = hop.matrix if engine == "quadrature" else None
    del hop  # the spectral torque assembly only needs the eigendecomposition
    step = step_multiple * lcm(left_model.lattice.a1, right_model.lattice.a1)
    torque = torque_conductance(sample, cache, density, switch2=switch2,
                                margin=margin, step=step,
                                dd_cluster_eps=dd_cluster_eps, engine=engine,
                                h_mat=h_for_torque,
                                quadrature_opts=quadrature_opts)
    return BicReport(extent=extent_pair(extent), conserving=cache.conserving,
                     sigma_plus=sigma_plus, sigma_minus=sigma_minus,
                     torque=torque, drift=drift)


def bulk_torque_trail(model: BulkModel, extent, *,
                      density: DensityFunction | None = None,
                      switch2: SwitchProfile | None = None,
                      margin: float = 0.25,
                      dd_cluster_eps: float = DEFAULT_DD_EPS) -> SigmaOutcome:
    """Torque of a translation-invariant bulk sample (no interface).

    Every interior strip trace should vanish: exactly when spin is
    conserved, and up to boundary-localized leakage otherwise.
    """
    if density is None:
        density = default_density([model])
    sample, hop = realize_bulk(model, extent)
    cache = SpectralCache.build(hop.matrix)
    del hop
    return torque_conductance(sample, cache, density, switch2=switch2,
                              margin=margin, step=float(model.lattice.a1),
                              dd_cluster_eps=dd_cluster_eps)


@dataclass(frozen=True)
class ExpDecayFit:
    """One-sided confidence bound for an exponential decay rate."""

    rate: float
    stderr: float
    rate_low: float
    confidence: float
    n_points: int

    @property
    def passed(self) -> bool:
        return self.rate_low > 0.0


def exp_decay_fit(distances: np.ndarray, values: np.ndarray,
                  confidence: float = 0.95,
                  floor: float = 1e-15) -> ExpDecayFit:
    """Fit |values| <= C exp(-rate * distance) by least squares on logs.

    rate_low is the lower end of the one-sided confidence interval for
    the decay rate; a positive rate_low certifies decay at the given
    confidence level.
    """
    distances = np.asarray(distances, dtype=float)
    mags = np.abs(np.asarray(values))
    keep = mags > floor * max(1.0, float(mags.max()))
    if keep.sum() < 4:
        raise ValueError("too few points above the floor for a decay fit")
    fit = stats.linregress(distances[keep], np.log(mags[keep]))
    rate = -float(fit.slope)
    dof = int(keep.sum()) - 2
    t_val = float(stats.t.ppf(confidence, dof))
    return ExpDecayFit(rate=rate, stderr=float(fit.stderr),
                       rate_low=rate - t_val * float(fit.stderr),
                       confidence=confidence, n_points=int(keep.sum()))


def strip_distances(trail: PvTraceTrail) -> np.ndarray:
    """Distance (in steps) from the strip (n*a, (n+1)*a] to the x1 = 0 line."""
    ns = trail.strip_ns
    return np.where(ns >= 0, ns, -ns - 1).astype(float)
