"""Spinful tight-binding models, their Bloch data, and real-space samples.

A model is a collection of hopping blocks T_d indexed by integer cell
displacements d, each block acting on (basis site) x (spin) with the index
convention 2*basis + spin.  The same blocks drive the Bloch transform
H(k) = sum_d exp(i k . r_d) T_d and the dense realization on a finite
sample, so k-space diagnostics and real-space operators always describe
the same Hamiltonian.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .geometry import (LEFT, RIGHT, LatticeSample, LatticeSpec,
                       build_bulk_sample, build_junction_sample)
from .operators import LatticeOperator

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class BulkModel:
    """Translation-invariant spinful hopping model on a Bravais lattice.

    Parameters
    ----------
    name : str
        Identifier used in configs and reports.
    lattice : LatticeSpec
        Pitches and basis-site offsets.
    hoppings : dict
        Maps integer displacements (d1, d2) to (2 nb, 2 nb) complex blocks
        <c, beta, s| H |c + d, beta', s'>; hermiticity requires
        hoppings[-d] = hoppings[d]^H.
    filled_bands : int
        Number of occupied Bloch bands below the gap of interest.
    params : dict
        The constructor arguments, kept for reports.
    """

    name: str
    lattice: LatticeSpec
    hoppings: dict
    filled_bands: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        nb2 = 2 * self.lattice.n_basis
        for d, t in self.hoppings.items():
            if t.shape != (nb2, nb2):
                raise ValueError(f"hopping block {d} has shape {t.shape}")
            back = self.hoppings.get((-d[0], -d[1]))
            if back is None or np.max(np.abs(back - t.conj().T)) > 1e-12:
                raise ValueError(f"hoppings are not hermitian-closed at {d}")

    def bloch(self, k1: float, k2: float) -> np.ndarray:
        """H(k) = sum_d exp(i k . r_d) T_d with r_d = (d1 a1, d2 a2)."""
        nb2 = 2 * self.lattice.n_basis
        out = np.zeros((nb2, nb2), dtype=complex)
        a1, a2 = self.lattice.a1, self.lattice.a2
        for (d1, d2), t in self.hoppings.items():
            out += np.exp(1j * (k1 * d1 * a1 + k2 * d2 * a2)) * t
        return out

    def is_spin_conserving(self, tol: float = 1e-12) -> bool:
        for t in self.hoppings.values():
            if (np.max(np.abs(t[0::2, 1::2])) > tol
                    or np.max(np.abs(t[1::2, 0::2])) > tol):
                return False
        return True

    def max_hopping_range(self) -> int:
        return max((abs(d1) + abs(d2) for d1, d2 in self.hoppings), default=0)


def _closed_hoppings(nb: int, bonds, onsite: np.ndarray) -> dict:
    """Assemble hermitian-closed hopping blocks from directed bonds.

    Each bond is (d, beta_from, beta_to, spin_block); the dagger at -d is
    added automatically.  The onsite block (d = 0) is added once and must
    be hermitian.
    """
    nb2 = 2 * nb
    full: dict = {}

    def block(d):
        return full.setdefault(d, np.zeros((nb2, nb2), dtype=complex))

    for d, bi, bj, spin in bonds:
        spin = np.asarray(spin, dtype=complex)
        block(d)[2 * bi:2 * bi + 2, 2 * bj:2 * bj + 2] += spin
        dm = (-d[0], -d[1])
        block(dm)[2 * bj:2 * bj + 2, 2 * bi:2 * bi + 2] += spin.conj().T
    if onsite is not None:
        if np.max(np.abs(onsite - onsite.conj().T)) > 1e-12:
            raise ValueError("onsite block must be hermitian")
        block((0, 0))[:, :] += onsite
    return full


_TWO_SITE_BASIS = ((0.0, 0.0), (0.5, 0.5))


def spinful_haldane(t1: float = 1.0, t2: float = 0.35,
                    phi: float = np.pi / 2, m: float = 0.0) -> BulkModel:
    """Two decoupled Haldane layers with opposite flux, one per spin.

    Spin down is the complex conjugate of spin up, so the spin Chern
    numbers satisfy C_down = -C_up and the model conserves spin exactly.
    At the defaults the per-spin gap is (-1, 1) with C_up = +1.
    """
    lattice = LatticeSpec(a1=1, a2=1, basis_sites=_TWO_SITE_BASIS)
    a_site, b_site = 0, 1
    bonds = []
    for d in ((0, 0), (-1, 0), (0, -1)):
        bonds.append((d, a_site, b_site, t1 * ID2))
    nnn_up = t2 * np.exp(1j * phi)
    for d in ((1, 0), (-1, 1), (0, -1)):
        bonds.append((d, a_site, a_site, np.diag([nnn_up, np.conj(nnn_up)])))
        bonds.append((d, b_site, b_site, np.diag([np.conj(nnn_up), nnn_up])))
    onsite = np.diag([m, m, -m, -m]).astype(complex)
    hops = _closed_hoppings(2, bonds, onsite)
    return BulkModel(name="spinful-haldane", lattice=lattice, hoppings=hops,
                     filled_bands=2,
                     params={"t1": t1, "t2": t2, "phi": phi, "m": m})


# Unit vectors of the three honeycomb bonds, attached to the brick-wall
# displacements in a fixed order; they only enter the spin texture.
_KM_BOND_VECTORS = {
    (0, 0): (np.sqrt(3) / 2, 0.5),
    (-1, 0): (-np.sqrt(3) / 2, 0.5),
    (0, -1): (0.0, -1.0),
}


def kane_mele(t1: float = 1.0, lambda_so: float = 0.3, rashba: float = 0.0,
              m: float = 0.0) -> BulkModel:
    """Time-reversal pair of Haldane layers with optional Rashba mixing.

    With rashba = 0 the model conserves spin and each spin sector is a
    Haldane model at flux phi = pi/2 and second-neighbor amplitude
    lambda_so; rashba > 0 mixes the spins while preserving time reversal.
    """
    lattice = LatticeSpec(a1=1, a2=1, basis_sites=_TWO_SITE_BASIS)
    a_site, b_site = 0, 1
    bonds = []
    for d in ((0, 0), (-1, 0), (0, -1)):
        dx, dy = _KM_BOND_VECTORS[d]
        spin = t1 * ID2 + 1j * rashba * (SIGMA_X * dy - SIGMA_Y * dx)
        bonds.append((d, a_site, b_site, spin))
    nnn_up = lambda_so * np.exp(1j * np.pi / 2)
    for d in ((1, 0), (-1, 1), (0, -1)):
        bonds.append((d, a_site, a_site, np.diag([nnn_up, np.conj(nnn_up)])))
        bonds.append((d, b_site, b_site, np.diag([np.conj(nnn_up), nnn_up])))
    onsite = np.diag([m, m, -m, -m]).astype(complex)
    hops = _closed_hoppings(2, bonds, onsite)
    return BulkModel(name="kane-mele", lattice=lattice, hoppings=hops,
                     filled_bands=2,
                     params={"t1": t1, "lambda_so": lambda_so,
                             "rashba": rashba, "m": m})


def bhz(a_coef: float = 1.0, b_coef: float = 1.0, m_mass: float = -1.0,
        breaking: float = 0.0) -> BulkModel:
    """Two-orbital square-lattice quantum spin Hall model.

    The spin-up block is A (sin kx sx + sin ky sy) + M(k) sz with
    M(k) = m_mass + 2 b_coef (2 - cos kx - cos ky) acting on the orbitals,
    spin down its time-reversal conjugate; topological for
    -4 < m_mass / b_coef < 0.  ``breaking`` adds the onsite
    time-reversal-symmetric term breaking * (sy_orbital (x) sy_spin),
    which destroys spin conservation while keeping the gap open for
    moderate values.
    """
    lattice = LatticeSpec(a1=1, a2=1, basis_sites=_TWO_SITE_BASIS)
    ia2 = 0.5j * a_coef

    def spin_diag(up):
        out = np.zeros((2, 2, 2, 2), dtype=complex)  # [oi, oj, s, s']
        out[:, :, 0, 0] = up
        out[:, :, 1, 1] = up.conj()
        return out

    tx = spin_diag(-ia2 * SIGMA_X - b_coef * SIGMA_Z)
    # sin ky -> conjugate spin block keeps the same sign of the sy term
    ty = np.zeros((2, 2, 2, 2), dtype=complex)
    ty[:, :, 0, 0] = -ia2 * SIGMA_Y - b_coef * SIGMA_Z
    ty[:, :, 1, 1] = -ia2 * SIGMA_Y - b_coef * SIGMA_Z
    bonds = []
    for d, t4 in (((1, 0), tx), ((0, 1), ty)):
        for oi in range(2):
            for oj in range(2):
                bonds.append((d, oi, oj, t4[oi, oj]))
    onsite4 = np.zeros((4, 4), dtype=complex)
    mass = (m_mass + 4.0 * b_coef) * SIGMA_Z
    for oi in range(2):
        for oj in range(2):
            onsite4[2 * oi:2 * oi + 2, 2 * oj:2 * oj + 2] = (
                mass[oi, oj] * ID2 + breaking * SIGMA_Y[oi, oj] * SIGMA_Y)
    hops = _closed_hoppings(2, bonds, onsite4)
    return BulkModel(name="bhz", lattice=lattice, hoppings=hops,
                     filled_bands=2,
                     params={"a_coef": a_coef, "b_coef": b_coef,
                             "m_mass": m_mass, "breaking": breaking})


def atomic_insulator(split: float = 4.0) -> BulkModel:
    """Uncoupled two-level sites: levels +-split/2, all hoppings zero."""
    lattice = LatticeSpec(a1=1, a2=1, basis_sites=_TWO_SITE_BASIS)
    onsite = np.diag([split / 2] * 2 + [-split / 2] * 2).astype(complex)
    hops = _closed_hoppings(2, [], onsite)
    return BulkModel(name="atomic-insulator", lattice=lattice, hoppings=hops,
                     filled_bands=2, params={"split": split})


MODEL_BUILDERS = {
    "spinful-haldane": spinful_haldane,
    "kane-mele": kane_mele,
    "bhz": bhz,
    "atomic-insulator": atomic_insulator,
}


def build_model(name: str, params: dict | None = None) -> BulkModel:
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; "
                         f"known: {sorted(MODEL_BUILDERS)}") from None
    return builder(**(params or {}))


# ----------------------------------------------------------------- k-space

def _bz_grid(model: BulkModel, nk: int):
    k1 = 2.0 * np.pi * np.arange(nk) / (nk * model.lattice.a1)
    k2 = 2.0 * np.pi * np.arange(nk) / (nk * model.lattice.a2)
    return k1, k2


def bloch_gap(model: BulkModel, nk: int = 32) -> tuple[float, float]:
    """(top of filled bands, bottom of empty bands) over a BZ grid."""
    k1s, k2s = _bz_grid(model, nk)
    nf = model.filled_bands
    lo, hi = -np.inf, np.inf
    for k1 in k1s:
        for k2 in k2s:
            ev = np.linalg.eigvalsh(model.bloch(k1, k2))
            lo = max(lo, ev[nf - 1])
            hi = min(hi, ev[nf])
    if lo >= hi:
        raise ValueError(f"model {model.name} has no gap above "
                         f"band {model.filled_bands}")
    return float(lo), float(hi)


def common_gap(models, nk: int = 32) -> tuple[float, float]:
    """Intersection of the bulk gaps of several models."""
    lo, hi = -np.inf, np.inf
    for m in models:
        g_lo, g_hi = bloch_gap(m, nk)
        lo, hi = max(lo, g_lo), min(hi, g_hi)
    if lo >= hi:
        raise ValueError("models have no common gap")
    return lo, hi


def spectrum_minimum(models, nk: int = 32) -> float:
    out = np.inf
    for m in models:
        k1s, k2s = _bz_grid(m, nk)
        for k1 in k1s:
            for k2 in k2s:
                out = min(out, np.linalg.eigvalsh(m.bloch(k1, k2))[0])
    return float(out)


def _plaquette_chern(frames: np.ndarray) -> float:
    """Chern number from normalized link determinants on a closed grid."""
    nk = frames.shape[0]
    ux = np.empty((nk, nk), dtype=complex)
    uy = np.empty((nk, nk), dtype=complex)
    for i in range(nk):
        for j in range(nk):
            ux[i, j] = np.linalg.det(frames[i, j].conj().T
                                     @ frames[(i + 1) % nk, j])
            uy[i, j] = np.linalg.det(frames[i, j].conj().T
                                     @ frames[i, (j + 1) % nk])
    total = 0.0
    for i in range(nk):
        for j in range(nk):
            plq = (ux[i, j] * uy[(i + 1) % nk, j]
                   / (ux[i, (j + 1) % nk] * uy[i, j]))
            total += np.angle(plq)
    return total / (2.0 * np.pi)


def chern_number(model: BulkModel, nk: int = 24, spin: int | None = None) -> float:
    """Chern number of the filled bands (optionally of one spin sector)."""
    if spin is not None and not model.is_spin_conserving():
        raise ValueError("per-spin Chern numbers need a spin-conserving model")
    nf = model.filled_bands if spin is None else model.filled_bands // 2
    k1s, k2s = _bz_grid(model, nk)
    nb2 = 2 * model.lattice.n_basis
    dim = nb2 if spin is None else nb2 // 2
    frames = np.empty((nk, nk, dim, nf), dtype=complex)
    for i, k1 in enumerate(k1s):
        for j, k2 in enumerate(k2s):
            h = model.bloch(k1, k2)
            if spin is not None:
                h = h[spin::2, spin::2]
            _, vecs = np.linalg.eigh(h)
            frames[i, j] = vecs[:, :nf]
    return _plaquette_chern(frames)


def spin_chern_numbers(model: BulkModel, nk: int = 24) -> tuple[float, float]:
    return chern_number(model, nk, spin=0), chern_number(model, nk, spin=1)


def time_reversal_defect(model: BulkModel, nk: int = 8) -> float:
    """max_k || sy H(-k)* sy - H(k) || (zero for time-reversal symmetry)."""
    nb = model.lattice.n_basis
    sy_full = np.kron(np.eye(nb), SIGMA_Y)
    k1s, k2s = _bz_grid(model, nk)
    worst = 0.0
    for k1 in k1s:
        for k2 in k2s:
            h = model.bloch(k1, k2)
            hm = model.bloch(-k1, -k2)
            worst = max(worst, float(np.max(np.abs(
                sy_full @ hm.conj() @ sy_full - h))))
    return worst


# -------------------------------------------------------------- real space

def _cell_lookup(sample: LatticeSample, flavor: int) -> dict:
    """(n1, n2) -> array of site rows per basis index (-1 if removed)."""
    nb = sample.specs[flavor].n_basis
    lut: dict = {}
    rows = np.nonzero(sample.flavor == flavor)[0]
    for row in rows:
        n1, n2 = int(sample.cells[row, 0]), int(sample.cells[row, 1])
        lut.setdefault((n1, n2), -np.ones(nb, dtype=int))[sample.basis[row]] = row
    return lut


def _apply_model(h: np.ndarray, sample: LatticeSample, model: BulkModel,
                 flavor: int) -> None:
    lut = _cell_lookup(sample, flavor)
    nb = model.lattice.n_basis
    for (d1, d2), t in model.hoppings.items():
        for (n1, n2), rows in lut.items():
            tgt = lut.get((n1 + d1, n2 + d2))
            if tgt is None:
                continue
            for bi in range(nb):
                ri = rows[bi]
                if ri < 0:
                    continue
                for bj in range(nb):
                    rj = tgt[bj]
                    if rj < 0:
                        continue
                    h[2 * ri:2 * ri + 2, 2 * rj:2 * rj + 2] += (
                        t[2 * bi:2 * bi + 2, 2 * bj:2 * bj + 2])


def extent_pair(extent) -> tuple[int, int]:
    """Normalize a scalar or pair half-extent to an (e1, e2) tuple."""
    if np.iterable(extent):
        e1, e2 = extent
        return int(e1), int(e2)
    return int(extent), int(extent)


def realize_bulk(model: BulkModel, extent) -> tuple[LatticeSample, LatticeOperator]:
    """Dense Hamiltonian of the model on a finite sample (open boundary)."""
    sample = build_bulk_sample(model.lattice, extent_pair(extent))
    h = np.zeros((sample.dim, sample.dim), dtype=complex)
    _apply_model(h, sample, model, RIGHT)
    return sample, LatticeOperator(sample, matrix=h, hermitian=True)


def _hash_unit(key: str, count: int) -> np.ndarray:
    """count deterministic floats in [-1, 1) derived from a string key."""
    raw = hashlib.shake_256(key.encode()).digest(8 * count)
    ints = np.frombuffer(raw, dtype="<u8")
    return 2.0 * (ints / 2.0 ** 64) - 1.0


def _coupling_block(seed: int, ci, cj, amplitude: float, nu: float) -> np.ndarray:
    """Deterministic spin block for the interface coupling bond (ci, cj).

    Keyed on the endpoint coordinates so the bond pattern is independent
    of the sample extent; the envelope exp(-nu (|x1_i| + |x1_j|)) confines
    it to the interface.
    """
    key = (f"delta:{seed}:{ci[0]:.6f}:{ci[1]:.6f}:{cj[0]:.6f}:{cj[1]:.6f}")
    vals = _hash_unit(key, 8)
    block = (vals[0:4] + 1j * vals[4:8]).reshape(2, 2)
    env = np.exp(-nu * (abs(ci[0]) + abs(cj[0])))
    return amplitude * env * block


def _apply_interface_coupling(h: np.ndarray, sample: LatticeSample,
                              seed: int, amplitude: float, nu: float,
                              delta_range: float,
                              spin_mixing: bool = True) -> None:
    x1 = sample.x1()
    strip = np.nonzero(np.abs(x1) <= delta_range)[0]
    if strip.size == 0:
        return
    coords = sample.coords[strip]
    dist = (np.abs(coords[:, 0][:, None] - coords[:, 0][None, :])
            + np.abs(coords[:, 1][:, None] - coords[:, 1][None, :]))
    ii, jj = np.nonzero(dist <= 1.01)
    order = np.lexsort((coords[jj, 1], coords[jj, 0],
                        coords[ii, 1], coords[ii, 0]))
    for a, b in zip(ii[order], jj[order]):
        if (coords[a, 0], coords[a, 1]) > (coords[b, 0], coords[b, 1]):
            continue  # each unordered pair once, onsite when a == b
        ra, rb = strip[a], strip[b]
        block = _coupling_block(seed, coords[a], coords[b], amplitude, nu)
        if not spin_mixing:
            block = np.diag(np.diag(block))
        if ra == rb:
            block = 0.5 * (block + block.conj().T)
        h[2 * ra:2 * ra + 2, 2 * rb:2 * rb + 2] += block
        if ra != rb:
            h[2 * rb:2 * rb + 2, 2 * ra:2 * ra + 2] += block.conj().T


def realize_junction(left_model: BulkModel, right_model: BulkModel, extent,
                     coupling_seed: int = 0, amplitude: float = 0.5,
                     nu: float = 1.0, delta_range: float = 8.0,
                     spin_mixing: bool = True,
                     defect_radius: float = 0.0, defect_seed: int = 0,
                     defect_count: int = 0
                     ) -> tuple[LatticeSample, LatticeOperator]:
    """Two half-plane bulk models glued by a localized random coupling.

    The left model fills cells with x1 <= 0, the right model the rest;
    the coupling adds deterministic onsite and nearest-neighbor terms with
    an exp(-nu |x1|) envelope within |x1| <= delta_range, keyed on site
    coordinates so that growing the sample does not reshuffle it.  With
    spin_mixing=False the coupling blocks are spin-diagonal, so a junction
    of spin-conserving models conserves spin exactly.
    """
    sample = build_junction_sample(left_model.lattice, right_model.lattice,
                                   extent_pair(extent), L=defect_radius,
                                   defect_seed=defect_seed,
                                   defect_count=defect_count)
    h = np.zeros((sample.dim, sample.dim), dtype=complex)
    _apply_model(h, sample, left_model, LEFT)
    _apply_model(h, sample, right_model, RIGHT)
    _apply_interface_coupling(h, sample, coupling_seed, amplitude, nu,
                              delta_range, spin_mixing)
    return sample, LatticeOperator(sample, matrix=h, hermitian=True)
