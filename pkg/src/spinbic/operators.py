"""Dense operators on the site (x) spin basis, traces, and decay fits.

The Hilbert-space index convention everywhere is 2*site + spin with
spin in {0: up, 1: down}; site order comes from the LatticeSample.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import LatticeSample, Region, SwitchProfile


class LatticeOperator:
    """A (possibly diagonal) complex operator tied to a sample's basis.

    Diagonal operators (switch multipliers, region indicators, the spin
    operator) are stored as vectors and only expanded to dense form on
    demand; commutators against them use broadcasting instead of matmuls.
    """

    def __init__(self, sample: LatticeSample, matrix=None, diagonal=None,
                 hermitian: bool | None = None):
        if (matrix is None) == (diagonal is None):
            raise ValueError("give exactly one of matrix, diagonal")
        self.sample = sample
        self._matrix = None
        self._diagonal = None
        if diagonal is not None:
            d = np.asarray(diagonal)
            if d.shape != (sample.dim,):
                raise ValueError("diagonal length must equal sample.dim")
            self._diagonal = d
            if hermitian is None:
                hermitian = bool(np.all(np.isreal(d)))
        else:
            m = np.asarray(matrix, dtype=complex)
            if m.shape != (sample.dim, sample.dim):
                raise ValueError(f"matrix shape {m.shape} != ({sample.dim},)*2")
            self._matrix = m
        if hermitian:
            err = self._herm_defect()
            if err > 1e-12:
                raise ValueError(f"operator flagged hermitian but |A-A^H| = {err:.2e}")
        self.hermitian = hermitian  # True / False / None (unknown)

    def _herm_defect(self) -> float:
        if self.is_diagonal:
            return float(np.max(np.abs(np.imag(self._diagonal))))
        return float(np.max(np.abs(self._matrix - self._matrix.conj().T)))

    @property
    def is_diagonal(self) -> bool:
        return self._diagonal is not None

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.diag(self._diagonal.astype(complex))
        return self._matrix

    @property
    def diag(self) -> np.ndarray:
        """Diagonal entries (cheap for diagonal operators)."""
        if self.is_diagonal:
            return self._diagonal
        return np.diagonal(self._matrix)

    def dagger(self) -> "LatticeOperator":
        if self.is_diagonal:
            return LatticeOperator(self.sample, diagonal=self._diagonal.conj())
        return LatticeOperator(self.sample, matrix=self._matrix.conj().T)

    def __add__(self, other):
        _check_geometry(self, other)
        if self.is_diagonal and other.is_diagonal:
            return LatticeOperator(self.sample,
                                   diagonal=self._diagonal + other._diagonal)
        return LatticeOperator(self.sample, matrix=self.matrix + other.matrix)

    def __sub__(self, other):
        _check_geometry(self, other)
        if self.is_diagonal and other.is_diagonal:
            return LatticeOperator(self.sample,
                                   diagonal=self._diagonal - other._diagonal)
        return LatticeOperator(self.sample, matrix=self.matrix - other.matrix)

    def __mul__(self, scalar):
        if self.is_diagonal:
            return LatticeOperator(self.sample, diagonal=self._diagonal * scalar)
        return LatticeOperator(self.sample, matrix=self._matrix * scalar)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        if self.is_diagonal:
            return float(np.max(np.abs(self._diagonal))) if len(self._diagonal) else 0.0
        return float(np.max(np.abs(self._matrix)))


def _check_geometry(a: LatticeOperator, b: LatticeOperator):
    if a.sample is not b.sample and a.sample.n_sites != b.sample.n_sites:
        raise ValueError("operator geometry mismatch")


def _matmul(a: LatticeOperator, b: LatticeOperator) -> np.ndarray:
    """a @ b exploiting diagonal factors."""
    if a.is_diagonal and b.is_diagonal:
        return None  # caller handles the diagonal-diagonal case
    if a.is_diagonal:
        return a._diagonal[:, None] * b.matrix
    if b.is_diagonal:
        return a.matrix * b._diagonal[None, :]
    return a.matrix @ b.matrix


def commutator(a: LatticeOperator, b: LatticeOperator) -> LatticeOperator:
    """[a, b] = ab - ba; broadcasting when one factor is diagonal."""
    _check_geometry(a, b)
    if a.is_diagonal and b.is_diagonal:
        return LatticeOperator(a.sample, diagonal=np.zeros(a.sample.dim))
    if b.is_diagonal:
        d = b._diagonal
        return LatticeOperator(a.sample, matrix=a.matrix * (d[None, :] - d[:, None]))
    if a.is_diagonal:
        d = a._diagonal
        return LatticeOperator(a.sample, matrix=b.matrix * (d[:, None] - d[None, :]))
    return LatticeOperator(a.sample, matrix=a.matrix @ b.matrix - b.matrix @ a.matrix)


def anticommutator(a: LatticeOperator, b: LatticeOperator) -> LatticeOperator:
    """{a, b} = ab + ba."""
    _check_geometry(a, b)
    if a.is_diagonal and b.is_diagonal:
        return LatticeOperator(a.sample, diagonal=2.0 * a._diagonal * b._diagonal)
    if b.is_diagonal:
        d = b._diagonal
        return LatticeOperator(a.sample, matrix=a.matrix * (d[None, :] + d[:, None]))
    if a.is_diagonal:
        d = a._diagonal
        return LatticeOperator(a.sample, matrix=b.matrix * (d[:, None] + d[None, :]))
    return LatticeOperator(a.sample, matrix=a.matrix @ b.matrix + b.matrix @ a.matrix)


def spin_operator(sample: LatticeSample) -> LatticeOperator:
    """S = Id (x) sigma_z / 2: diagonal +1/2 (up), -1/2 (down) per site."""
    d = np.tile([0.5, -0.5], sample.n_sites)
    return LatticeOperator(sample, diagonal=d, hermitian=True)


def site_values_to_diag(values: np.ndarray) -> np.ndarray:
    """Replicate one value per site across both spin states."""
    return np.repeat(np.asarray(values, dtype=float), 2)


def diag_multiplier(sample: LatticeSample, f) -> LatticeOperator:
    """Multiplication operator for a SwitchProfile or a Region mask."""
    if isinstance(f, SwitchProfile):
        vals = f(sample.coords)
    elif isinstance(f, Region):
        vals = f.mask.astype(float)
    else:
        raise TypeError("f must be a SwitchProfile or Region")
    return LatticeOperator(sample, diagonal=site_values_to_diag(vals),
                           hermitian=True)


def site_diagonal(a: LatticeOperator) -> np.ndarray:
    """Per-site spin-block trace of the diagonal: diag[2i] + diag[2i+1]."""
    d = a.diag
    return d[0::2] + d[1::2]


def region_trace(a: LatticeOperator, region: Region) -> complex:
    """Trace of a restricted to the sites of the region (both spins)."""
    if len(region.mask) != a.sample.n_sites:
        raise ValueError("region geometry mismatch")
    return complex(site_diagonal(a)[region.mask].sum())


@dataclass(frozen=True)
class PvTraceTrail:
    """Symmetric-window partial sums of strip traces along x1.

    partial_sums[N-1] = sum over strips n in [-N, N-1] of Tr(1_strip A).
    limit_estimate averages the last quarter of the trail; cauchy_gap is
    the largest |increment| over that tail (a convergence certificate).
    """

    partial_sums: np.ndarray
    limit_estimate: float
    cauchy_gap: float
    step: float
    strip_ns: np.ndarray
    strip_values: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.partial_sums)


def pv_trace_from_site_values(site_vals: np.ndarray, sample: LatticeSample,
                              a: float, window: int,
                              core: Region | None = None,
                              axis: int = 1) -> PvTraceTrail:
    """PV trace given precomputed per-site diagonal contributions.

    axis selects the strip coordinate (1 or 2); the default matches the
    convention that currents cross the x1 = 0 line.
    """
    if a <= 0:
        raise ValueError("step must be positive")
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    x1 = sample.x1() if axis == 1 else sample.x2()
    vals = np.asarray(site_vals)
    dtype = complex if np.iscomplexobj(vals) else float
    vals = vals.astype(dtype)
    if core is not None:
        vals = np.where(core.mask, vals, 0.0)
        covered = np.abs(x1[core.mask])
        if covered.size and window * a > covered.max() + a:
            raise ValueError("PV window extends beyond the core region")
    # gridline sites go to the lower strip: strip n covers (na, (n+1)a]
    strip_of = np.ceil(x1 / a).astype(int) - 1
    ns = np.arange(-window, window)
    strip_vals = np.zeros(len(ns), dtype=dtype)
    sel = (strip_of >= -window) & (strip_of < window)
    np.add.at(strip_vals, strip_of[sel] + window, vals[sel])
    partial = np.empty(window, dtype=dtype)
    for N in range(1, window + 1):
        partial[N - 1] = strip_vals[window - N: window + N].sum()
    tail = max(1, window // 4)
    limit = float(np.mean(partial[-tail:]).real)
    inc = np.abs(np.diff(partial))[-tail:] if window > 1 else np.array([0.0])
    return PvTraceTrail(partial_sums=partial, limit_estimate=limit,
                        cauchy_gap=float(inc.max() if inc.size else 0.0),
                        step=a, strip_ns=ns, strip_values=strip_vals)


def pv_trace_x1(a_op: LatticeOperator, a: float, window: int,
                core: Region | None = None, axis: int = 1) -> PvTraceTrail:
    """Principal-value trace of an operator via symmetric strip sums."""
    return pv_trace_from_site_values(site_diagonal(a_op), a_op.sample,
                                     a, window, core, axis)


@dataclass(frozen=True)
class DecayFit:
    """Exponential-decay certificate |A(x,y)| <= c_hat * exp(-lambda_hat * d1).

    lambda_hat is the least-squares decay rate over entries above the floor;
    c_hat is then raised to the smallest certifying prefactor, making
    max_violation <= 0 whenever a bound of this form holds at rate lambda_hat.
    """

    lambda_hat: float
    c_hat: float
    max_violation: float

    @property
    def certified(self) -> bool:
        return self.lambda_hat > 0 and self.max_violation <= 1e-12


def verify_tight_binding(a_op: LatticeOperator, floor: float = 1e-14) -> DecayFit:
    """Fit exponential decay of matrix entries in l1 site distance."""
    s = a_op.sample
    mat = a_op.matrix
    n = s.n_sites
    blocks = np.abs(mat).reshape(n, 2, n, 2).max(axis=(1, 3))
    d1 = (np.abs(s.x1()[:, None] - s.x1()[None, :])
          + np.abs(s.x2()[:, None] - s.x2()[None, :]))
    live = blocks > floor
    if not live.any():
        return DecayFit(lambda_hat=np.inf, c_hat=0.0, max_violation=-np.inf)
    logs = np.log(blocks[live])
    dists = d1[live]
    if np.ptp(dists) < 1e-12:
        lam = np.inf if dists.max() < 1e-12 else 0.0
        return DecayFit(lambda_hat=lam, c_hat=float(np.exp(logs.max())),
                        max_violation=0.0)
    slope, intercept = np.polyfit(dists, logs, 1)
    lam = -slope
    log_c = float(np.max(logs + lam * dists))  # minimal certifying prefactor
    violation = float(np.max(logs + lam * dists - log_c))
    return DecayFit(lambda_hat=float(lam), c_hat=float(np.exp(log_c)),
                    max_violation=violation)
