"""Finite lattice samples, junction geometry, regions, and switch functions.

Coordinates are physical positions in the plane; the interface plane is
always {x1 = 0}. Sites are ordered lexicographically by (x1, x2, basis
index), which fixes the basis of every operator built on top of a sample.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._poly import Smoothstep

LEFT, RIGHT = 0, 1


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic rectangular lattice with a site basis.

    Parameters
    ----------
    a1, a2 : int
        Lattice pitches along x1 and x2 (positive integers).
    basis_sites : tuple of (float, float)
        Fractional offsets of the basis sites within the unit cell,
        each component in [0, 1).
    """

    a1: int = 1
    a2: int = 1
    basis_sites: tuple = ((0.0, 0.0),)
    spin_dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.a1 < 1 or self.a2 < 1:
            raise ValueError("lattice pitches must be positive integers")
        for off in self.basis_sites:
            if not (0.0 <= off[0] < 1.0 and 0.0 <= off[1] < 1.0):
                raise ValueError(f"basis offset {off} outside [0,1)^2")

    @property
    def n_basis(self) -> int:
        return len(self.basis_sites)


class LatticeSample:
    """Finite realization of a lattice (or junction of two lattices).

    Attributes
    ----------
    coords : (n_sites, 2) float array
        Physical site positions, ordered by (x1, x2, basis index).
    cells : (n_sites, 2) int array
        Unit-cell indices each site belongs to (of its own flavor's lattice).
    basis : (n_sites,) int array
        Basis index within the cell.
    flavor : (n_sites,) int array
        LEFT or RIGHT; pure bulk samples are uniformly one flavor.
    """

    def __init__(self, coords, cells, basis, flavor, extent, specs, L=0.0):
        order = np.lexsort((basis, coords[:, 1], coords[:, 0]))
        self.coords = np.ascontiguousarray(coords[order])
        self.cells = np.ascontiguousarray(cells[order])
        self.basis = np.ascontiguousarray(basis[order])
        self.flavor = np.ascontiguousarray(flavor[order])
        self.extent = tuple(extent)
        self.specs = specs  # (left_spec, right_spec); equal for bulk samples
        self.L = float(L)
        key = [tuple(np.round(c, 9)) for c in self.coords]
        if len(set(key)) != len(key):
            raise ValueError("duplicate site coordinates in sample")
        self.site_index = {k: i for i, k in enumerate(key)}

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @property
    def dim(self) -> int:
        """Hilbert-space dimension: two spin states per site."""
        return 2 * self.n_sites

    def x1(self):
        return self.coords[:, 0]

    def x2(self):
        return self.coords[:, 1]


@dataclass(frozen=True)
class Region:
    """Per-site membership mask with a human-readable descriptor."""

    mask: np.ndarray
    descriptor: str

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    @property
    def n_sites(self) -> int:
        return int(self.mask.sum())

    def intersect(self, other: "Region") -> "Region":
        return Region(self.mask & other.mask,
                      f"({self.descriptor}) & ({other.descriptor})")


@dataclass(frozen=True)
class SwitchProfile:
    """Monotone 0 -> 1 profile along one coordinate axis.

    kind = "heaviside" jumps at jump_center (value 1 at the center itself,
    i.e. the right-continuous convention); kind = "smooth-ramp" rises over
    [jump_center - ramp_width/2, jump_center + ramp_width/2] through a
    polynomial smoothstep and is exactly 0/1 outside.
    """

    direction: int  # 1 or 2
    kind: str = "heaviside"
    jump_center: float = 0.0
    ramp_width: float = 0.0
    smooth_order: int = 14

    def __post_init__(self):
        if self.direction not in (1, 2):
            raise ValueError("direction must be 1 or 2")
        if self.kind not in ("heaviside", "smooth-ramp"):
            raise ValueError(f"unknown switch kind {self.kind!r}")
        if self.kind == "smooth-ramp" and self.ramp_width <= 0:
            raise ValueError("smooth-ramp needs positive ramp_width")

    def __call__(self, points):
        """Evaluate at an (n, 2) coordinate array (or a single point)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x = pts[:, self.direction - 1]
        if self.kind == "heaviside":
            vals = (x >= self.jump_center).astype(float)
        else:
            t = (x - (self.jump_center - self.ramp_width / 2)) / self.ramp_width
            vals = Smoothstep(self.smooth_order)(t)
        return vals if np.asarray(points).ndim == 2 else float(vals[0])


def evaluate_switch(profile: SwitchProfile, point) -> float:
    """Value of the switch profile at a single point."""
    return float(profile(np.asarray(point, dtype=float)[None, :])[0])


def _enumerate_cells(spec: LatticeSpec, extent, x1_range=None):
    """All (cell, basis) sites whose cell coordinate lies in the box.

    x1_range optionally restricts the cell x1 coordinate to (lo, hi]
    (used to split a junction at the interface plane).
    """
    e1, e2 = extent
    n1 = np.arange(-int(np.floor(e1 / spec.a1)), int(np.floor(e1 / spec.a1)) + 1)
    n2 = np.arange(-int(np.floor(e2 / spec.a2)), int(np.floor(e2 / spec.a2)) + 1)
    coords, cells, basis = [], [], []
    for i1 in n1:
        cx1 = i1 * spec.a1
        if x1_range is not None and not (x1_range[0] < cx1 <= x1_range[1]):
            continue
        for i2 in n2:
            cx2 = i2 * spec.a2
            for b, off in enumerate(spec.basis_sites):
                coords.append((cx1 + off[0] * spec.a1, cx2 + off[1] * spec.a2))
                cells.append((i1, i2))
                basis.append(b)
    return (np.array(coords, dtype=float).reshape(-1, 2),
            np.array(cells, dtype=int).reshape(-1, 2),
            np.array(basis, dtype=int))


def build_bulk_sample(spec: LatticeSpec, extent) -> LatticeSample:
    """Finite box of a pure bulk lattice.

    Parameters
    ----------
    spec : LatticeSpec
    extent : (float, float)
        Half-widths of the bounding box along x1 and x2, in coordinate
        units. Every cell whose origin satisfies |n_i * a_i| <= extent_i
        contributes all its basis sites.
    """
    e1, e2 = extent
    if e1 < 4 * spec.a1 and e1 < 2:
        raise ValueError("extent too small: need at least a few unit cells")
    if e1 <= 0 or e2 <= 0:
        raise ValueError("extent must be positive")
    coords, cells, basis = _enumerate_cells(spec, extent)
    flavor = np.full(len(basis), RIGHT, dtype=np.int8)
    return LatticeSample(coords, cells, basis, flavor, extent, (spec, spec))


def _defect_removals(coords, L, seed, count):
    """Deterministically pick `count` sites in the pocket |x1|, |x2| <= L.

    Selection is keyed on site coordinates (not enumeration order), and the
    pocket is bounded in both directions, so the same seed removes the same
    physical sites at any sample extent >= L.
    """
    eligible = np.where((np.abs(coords[:, 0]) <= L)
                        & (np.abs(coords[:, 1]) <= L))[0]
    if count > len(eligible):
        raise ValueError("defect count exceeds sites in the |x| <= L pocket")
    def rank(i):
        h = hashlib.sha256(
            f"defect:{seed}:{coords[i,0]:.6f}:{coords[i,1]:.6f}".encode()).digest()
        return int.from_bytes(h[:8], "big")
    chosen = sorted(eligible, key=rank)[:count]
    return set(int(c) for c in chosen)


def build_junction_sample(left: LatticeSpec, right: LatticeSpec, extent,
                          L: float = 0.0, defect_seed: int = 0,
                          defect_count: int = 0) -> LatticeSample:
    """Two bulk lattices joined along {x1 = 0}, with optional seeded defects.

    Sites with x1 <= 0 come from the left lattice and x1 > 0 from the right
    (the gridline convention assigns the interface column to the left), so
    the sample agrees with each pure bulk beyond |x1| > L for any L >= 0.
    Defects delete `defect_count` sites inside |x1| <= L, selected
    deterministically from `defect_seed`.
    """
    if defect_count and L <= 0:
        raise ValueError("defects require a positive interface half-width L")
    cl, ce, bl = _enumerate_cells(left, extent, x1_range=(-np.inf, 0.0))
    cr, cer, br = _enumerate_cells(right, extent, x1_range=(0.0, np.inf))
    coords = np.concatenate([cl, cr])
    cells = np.concatenate([ce, cer])
    basis = np.concatenate([bl, br])
    flavor = np.concatenate([np.full(len(bl), LEFT, dtype=np.int8),
                             np.full(len(br), RIGHT, dtype=np.int8)])
    if defect_count:
        dead = _defect_removals(coords, L, defect_seed, defect_count)
        keep = np.array([i not in dead for i in range(len(coords))])
        coords, cells, basis, flavor = (coords[keep], cells[keep],
                                        basis[keep], flavor[keep])
    return LatticeSample(coords, cells, basis, flavor, extent, (left, right), L)


def strip_region(sample: LatticeSample, n: int, a: float) -> Region:
    """Vertical strip Omega_{n,a}: sites with x1 in (n*a, (n+1)*a].

    Sites exactly on a gridline belong to the lower strip, so the strips
    tile the sample: every site lies in exactly one strip.
    """
    if a <= 0:
        raise ValueError("strip width must be positive")
    x1 = sample.x1()
    mask = (x1 > n * a) & (x1 <= (n + 1) * a)
    return Region(mask, f"strip(n={n}, a={a})")


def half_plane_region(sample: LatticeSample, side: str, boundary: float = 0.0) -> Region:
    """Half plane Omega_+ (x1 > boundary) or Omega_- (x1 <= boundary)."""
    x1 = sample.x1()
    if side == "+":
        return Region(x1 > boundary, f"half-plane(x1 > {boundary})")
    if side == "-":
        return Region(x1 <= boundary, f"half-plane(x1 <= {boundary})")
    raise ValueError("side must be '+' or '-'")


def core_window(sample: LatticeSample, margin: float = 0.25) -> Region:
    """Interior box excluding a margin (fraction of extent) at open edges."""
    if not (0.0 <= margin < 1.0):
        raise ValueError("margin must lie in [0, 1)")
    e1, e2 = sample.extent
    m1, m2 = (1.0 - margin) * e1, (1.0 - margin) * e2
    mask = (np.abs(sample.x1()) <= m1) & (np.abs(sample.x2()) <= m2)
    return Region(mask, f"core(margin={margin})")


def full_region(sample: LatticeSample) -> Region:
    return Region(np.ones(sample.n_sites, dtype=bool), "all")
