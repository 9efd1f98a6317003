"""Smooth spectral densities and the correlation operator of a driven pair.

Two interchangeable engines evaluate the correlation operator: a contour
quadrature in the upper/lower half planes that touches the Hamiltonian only
through resolvents, and an eigenbasis assembly built from second divided
differences of the density.  The quadrature engine scales as (nodes * n^3)
and exists to validate the spectral one on small instances; the spectral
engine organizes the divided-difference sum into dense matrix products so
that large samples cost a handful of BLAS calls.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import factorial

import numpy as np

from ._poly import Smoothstep

DEFAULT_TAYLOR_ORDER = 6
DEFAULT_Z_MIN = 1e-3
DEFAULT_GL_ORDER = 9
DEFAULT_DD_EPS = 1e-7
DEFAULT_Y_SCALE = 0.5


@dataclass(frozen=True)
class DensityFunction:
    """Occupation profile: 0 below the ascent ramp, 1 between ramps, 0 above.

    Parameters
    ----------
    ascent : (float, float)
        Interval on which the profile rises 0 -> 1.  It must sit strictly
        below the spectrum so that every state below the gap is fully
        occupied.
    descent : (float, float)
        Interval inside the spectral gap on which the profile falls 1 -> 0.
    smooth_order : int
        The profile is C^smooth_order at all four ramp edges.
    """

    ascent: tuple[float, float]
    descent: tuple[float, float]
    smooth_order: int = 14

    def __post_init__(self):
        a0, a1 = self.ascent
        d0, d1 = self.descent
        if not (a0 < a1 <= d0 < d1):
            raise ValueError("ramps must satisfy a0 < a1 <= d0 < d1")
        if self.smooth_order < 1:
            raise ValueError("smooth_order must be >= 1")

    @cached_property
    def _step(self) -> Smoothstep:
        return Smoothstep(self.smooth_order)

    @property
    def min_ramp(self) -> float:
        return min(self.ascent[1] - self.ascent[0],
                   self.descent[1] - self.descent[0])

    @property
    def support(self) -> tuple[float, float]:
        return (self.ascent[0], self.descent[1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a0, a1 = self.ascent
        d0, d1 = self.descent
        up = self._step((x - a0) / (a1 - a0))
        down = self._step((x - d0) / (d1 - d0))
        return up * (1.0 - down)

    def deriv(self, x, order: int = 1):
        """order-th derivative (the two ramps have disjoint interiors)."""
        if order == 0:
            return self(x)
        x = np.asarray(x, dtype=float)
        a0, a1 = self.ascent
        d0, d1 = self.descent
        wa = a1 - a0
        wd = d1 - d0
        return (self._step.deriv((x - a0) / wa, order) / wa ** order
                - self._step.deriv((x - d0) / wd, order) / wd ** order)

    def classify(self, eigs: np.ndarray, absorb_tol: float = 1e-12):
        """Split sorted eigenvalues into plateau / ramp / zero classes.

        Returns (n_low, n_ramp): eigenvalues [0, n_low) carry density 1 up
        to absorb_tol (treated as exactly occupied), the next n_ramp sit on
        the descent ramp, and the rest carry density 0.
        """
        eigs = np.asarray(eigs)
        if eigs.size and eigs[0] < self.ascent[1] - 1e-9 * max(1.0, abs(eigs[0])):
            raise ValueError("spectrum reaches below the ascent ramp; "
                             "widen the density support")
        rho = self(eigs)
        n_low = int(np.sum(rho >= 1.0 - absorb_tol))
        n_zero = int(np.sum(rho <= absorb_tol))
        return n_low, len(eigs) - n_low - n_zero


def density_for_gap(gap: tuple[float, float], spectrum_min: float,
                    margin: float = 0.1, smooth_order: int = 14,
                    ascent_width: float | None = None) -> DensityFunction:
    """Build a density whose descent ramp crosses the given spectral gap.

    The ramp is inset from the gap edges by ``margin`` times the gap width;
    the ascent ramp is placed strictly below ``spectrum_min``.
    """
    g_lo, g_hi = gap
    if not g_lo < g_hi:
        raise ValueError("empty gap")
    if not 0.0 <= margin < 0.5:
        raise ValueError("margin must lie in [0, 0.5)")
    inset = margin * (g_hi - g_lo)
    d0, d1 = g_lo + inset, g_hi - inset
    if ascent_width is None:
        ascent_width = d1 - d0
    a1 = spectrum_min - 0.25 * ascent_width
    a0 = a1 - ascent_width
    return DensityFunction(ascent=(a0, a1), descent=(d0, d1),
                           smooth_order=smooth_order)


class AlmostAnalyticExtension:
    """Taylor extension of a density off the real axis, cut off in |Im z|.

    The extension is rho~(x+iy) = chi(y) * sum_{j<=N} rho^(j)(x) (iy)^j / j!
    with a plateau cutoff chi supported on |y| <= y1 and identically 1 for
    |y| <= y0.  Its dbar derivative vanishes like |y|^N at the real axis,
    which tames the resolvent blow-up in contour integrals.  The vertical
    extent is tied to the narrowest ramp: Taylor terms grow like
    (max|rho^(j)| y^j / j!) and stay balanced only while y stays a fraction
    of the ramp width.
    """

    def __init__(self, density: DensityFunction,
                 taylor_order: int = DEFAULT_TAYLOR_ORDER,
                 y_scale: float = DEFAULT_Y_SCALE, chi_order: int = 4):
        if taylor_order < 1:
            raise ValueError("taylor_order must be >= 1")
        self.density = density
        self.taylor_order = taylor_order
        self.y1 = y_scale * density.min_ramp
        self.y0 = 0.5 * self.y1
        self._chi_step = Smoothstep(chi_order)

    def chi(self, y):
        t = (np.abs(np.asarray(y, dtype=float)) - self.y0) / (self.y1 - self.y0)
        return 1.0 - self._chi_step(t)

    def chi_prime(self, y):
        y = np.asarray(y, dtype=float)
        t = (np.abs(y) - self.y0) / (self.y1 - self.y0)
        return -self._chi_step.deriv(t, 1) / (self.y1 - self.y0) * np.sign(y)

    def _taylor_terms(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        iy = 1j * y
        for j in range(self.taylor_order + 1):
            total = total + self.density.deriv(x, j) * iy ** j / factorial(j)
        return total

    def value(self, x, y):
        """The extension itself (used by invariant checks)."""
        return self.chi(y) * self._taylor_terms(x, y)

    def dbar(self, x, y):
        """(1/2)(d_x + i d_y) of the extension, in closed form."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        N = self.taylor_order
        lead = (self.density.deriv(x, N + 1) * (1j * y) ** N / factorial(N))
        return 0.5 * (self.chi(y) * lead
                      + 1j * self.chi_prime(y) * self._taylor_terms(x, y))


@lru_cache(maxsize=8)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panel_nodes(edges: np.ndarray, order: int):
    """Gauss-Legendre nodes/weights on each interval between edges."""
    t, w = _leggauss(order)
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo) + half * t[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def _split_edges(edges: np.ndarray, max_width: float) -> np.ndarray:
    out = [edges[0]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(np.ceil((hi - lo) / max_width)))
        out.extend(np.linspace(lo, hi, k + 1)[1:])
    return np.asarray(out)


def quadrature_nodes(ext: AlmostAnalyticExtension, eigs: np.ndarray,
                     z_min: float = DEFAULT_Z_MIN,
                     gl_order: int = DEFAULT_GL_ORDER,
                     gl_order_y: int | None = None):
    """Contour nodes z and weights w (including the dbar factor) such that
    sum_k w_k f(z_k) approximates the integral of (dbar rho~) f over the
    strip around the real axis.

    The x mesh refines geometrically toward eigenvalues that sit on a ramp
    (where the resolvent is large while dbar is small), and the y mesh
    refines geometrically toward the real axis down to z_min.  The y
    integrand is a low-degree polynomial per panel, so its rule order
    (gl_order_y, default gl_order - 4) can sit below the x order.
    """
    if gl_order_y is None:
        gl_order_y = max(4, gl_order - 4)
    dens = ext.density
    a0, a1 = dens.ascent
    d0, d1 = dens.descent
    w_min = dens.min_ramp
    eigs = np.asarray(eigs, dtype=float)

    x_edges = {a0, a1, d0, d1}
    inside = eigs[(eigs > a0) & (eigs < d1)]
    x_edges.update(inside.tolist())
    for lo, hi in ((a0, a1), (d0, d1)):
        on_ramp = np.sort(eigs[(eigs > lo) & (eigs < hi)])
        for i, lam in enumerate(on_ramp):
            # geometric ladder toward lam, stopping at the nearest
            # neighbouring eigenvalue (its own ladder takes over there)
            r0 = 0.5 * w_min
            if i > 0:
                r0 = min(r0, 0.75 * (lam - on_ramp[i - 1]))
            if i + 1 < len(on_ramp):
                r0 = min(r0, 0.75 * (on_ramp[i + 1] - lam))
            d = z_min
            while d < max(r0, 4.0 * z_min):
                for p in (lam - d, lam + d):
                    if lo < p < hi:
                        x_edges.add(float(p))
                d *= 2.0
    x_edges = _split_edges(np.array(sorted(x_edges)), 0.25 * w_min)
    # merge sliver panels left over from ladder/eigenvalue collisions
    keep_edge = np.concatenate([[True], np.diff(x_edges) > 0.25 * z_min])
    keep_edge[-1] = True
    x_edges = x_edges[keep_edge]
    x_nodes, x_weights = _panel_nodes(x_edges, gl_order)

    y_edges = [z_min]
    while y_edges[-1] < ext.y0:
        y_edges.append(min(2.0 * y_edges[-1], ext.y0))
    y_edges.extend(np.linspace(ext.y0, ext.y1, 4)[1:])
    y_edges = np.asarray(y_edges)
    y_nodes, y_weights = _panel_nodes(y_edges, gl_order_y)
    y_nodes = np.concatenate([y_nodes, -y_nodes])
    y_weights = np.concatenate([y_weights, y_weights])

    z = (x_nodes[:, None] + 1j * y_nodes[None, :]).ravel()
    w = (x_weights[:, None] * y_weights[None, :]).ravel()
    w = w * ext.dbar(z.real, z.imag)
    keep = np.abs(w) > 1e-14 * np.max(np.abs(w))
    return z[keep], w[keep]


@dataclass
class SpectralData:
    """Eigendecomposition of a hermitian matrix, sorted ascending."""

    eigs: np.ndarray
    vecs: np.ndarray

    @classmethod
    def from_matrix(cls, h: np.ndarray) -> "SpectralData":
        eigs, vecs = np.linalg.eigh(h)
        return cls(eigs=eigs, vecs=vecs)

    @property
    def dim(self) -> int:
        return len(self.eigs)


def apply_density(density: DensityFunction, sd: SpectralData,
                  deriv_order: int = 0) -> np.ndarray:
    """rho(H) (or a derivative rho^(k)(H)) from an eigendecomposition."""
    f = density(sd.eigs) if deriv_order == 0 else density.deriv(sd.eigs, deriv_order)
    return (sd.vecs * f[None, :]) @ sd.vecs.conj().T


def _stacked_resolvents(h: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Resolvents (z_k - H)^(-1) for a batch of nodes, shape (k, n, n)."""
    n = h.shape[0]
    mats = np.negative(np.broadcast_to(h, (len(z), n, n))).copy()
    idx = np.arange(n)
    mats[:, idx, idx] += z[:, None]
    return np.linalg.inv(mats)


def _node_chunk(n: int) -> int:
    return max(16, int(4.0e6 // (n * n)))


def apply_density_quadrature(density: DensityFunction, h: np.ndarray,
                             taylor_order: int = DEFAULT_TAYLOR_ORDER,
                             z_min: float = DEFAULT_Z_MIN,
                             gl_order: int = DEFAULT_GL_ORDER,
                             y_scale: float = DEFAULT_Y_SCALE) -> np.ndarray:
    """rho(H) evaluated as -(1/pi) * integral of dbar(rho~)(z) (z - H)^(-1)."""
    ext = AlmostAnalyticExtension(density, taylor_order, y_scale)
    eigs = np.linalg.eigvalsh(h)
    z, w = quadrature_nodes(ext, eigs, z_min, gl_order)
    n = h.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for sl in _chunks(len(z), _node_chunk(n)):
        out += np.einsum("k,kij->ij", w[sl], _stacked_resolvents(h, z[sl]))
    return -out / np.pi


def _dd1(density: DensityFunction, x, y, eps: float):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    close = np.abs(diff) <= eps
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (density(x) - density(y)) / diff
    mid = 0.5 * (x + y)
    return np.where(close, density.deriv(mid, 1), val)


def dd2(density: DensityFunction, x, y, z, eps: float = DEFAULT_DD_EPS):
    """Second divided difference rho[x, y, z], safe under coalescence."""
    stacked = np.sort(np.stack(np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float),
        np.asarray(z, dtype=float)), axis=0), axis=0)
    lo, mid, hi = stacked[0], stacked[1], stacked[2]
    span = hi - lo
    close = span <= eps
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = (_dd1(density, hi, mid, eps) - _dd1(density, mid, lo, eps)) / span
    center = 0.5 * (lo + hi)
    return np.where(close, 0.5 * density.deriv(center, 2), outer)


def _commutator_with_diag(h: np.ndarray, diag: np.ndarray) -> np.ndarray:
    return h * (diag[None, :] - diag[:, None])


def correlation_quadrature(h: np.ndarray, a_diag: np.ndarray,
                           b_diag: np.ndarray, density: DensityFunction,
                           taylor_order: int = DEFAULT_TAYLOR_ORDER,
                           z_min: float = DEFAULT_Z_MIN,
                           gl_order: int = DEFAULT_GL_ORDER,
                           y_scale: float = DEFAULT_Y_SCALE,
                           gl_order_y: int | None = None) -> np.ndarray:
    """Correlation operator via resolvent contour quadrature.

    Evaluates -2*pi*i * integral of dbar(rho~)(z) [R A' R B' R - R B' R A' R]
    with A' = [H, A], B' = [H, B], R = (z - H)^(-1), over the strip around
    the real axis.  Cubic cost per node; intended for small validations.
    """
    ext = AlmostAnalyticExtension(density, taylor_order, y_scale)
    eigs = np.linalg.eigvalsh(h)
    z, w = quadrature_nodes(ext, eigs, z_min, gl_order, gl_order_y)
    a1 = _commutator_with_diag(h, np.asarray(a_diag, dtype=float))
    b1 = _commutator_with_diag(h, np.asarray(b_diag, dtype=float))
    n = h.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for sl in _chunks(len(z), _node_chunk(n)):
        r = _stacked_resolvents(h, z[sl])
        ra, rb = r @ a1, r @ b1
        comm = ra @ rb - rb @ ra
        out += np.einsum("k,kij->ij", w[sl], comm @ r)
    return -2j * np.pi * out


def _chunks(total: int, size: int):
    for lo in range(0, total, size):
        yield slice(lo, min(lo + size, total))


def _assemble_m1(eigs: np.ndarray, vecs: np.ndarray, a_diag: np.ndarray,
                 b_diag: np.ndarray, density: DensityFunction,
                 eps: float = DEFAULT_DD_EPS) -> np.ndarray:
    """Eigenbasis core M1[i, j] = sum_k A'_ik B'_kj rho[l_i, l_k, l_j].

    A', B' are the commutators [H, A], [H, B] in the eigenbasis, so
    A'_ik = (l_i - l_k) a_ik.  The triple sum collapses into dense matrix
    products per occupation class (1 / ramp / 0); only index triples with
    two or more ramp members fall back to explicit divided differences.
    """
    lam = np.asarray(eigs, dtype=float)
    n = len(lam)
    n_low, n_ramp = density.classify(lam)
    cut = n_low + n_ramp
    rho_g = density(lam[n_low:cut])
    Vs, Gs, Cs = slice(0, n_low), slice(n_low, cut), slice(cut, n)
    lamV, lamG, lamC = lam[Vs], lam[Gs], lam[Cs]

    a = vecs.conj().T @ (np.asarray(a_diag, dtype=float)[:, None] * vecs)
    b = vecs.conj().T @ (np.asarray(b_diag, dtype=float)[:, None] * vecs)

    def atil(rows, cols):
        return (lam[rows][:, None] - lam[cols][None, :]) * a[rows, cols]

    def btil(rows, cols):
        return (lam[rows][:, None] - lam[cols][None, :]) * b[rows, cols]

    m1 = np.zeros((n, n), dtype=complex)
    f_vc = 1.0 / (lamV[:, None] - lamC[None, :])

    # all-plateau triples: the divided differences collapse to +-1 products
    m1[Vs, Vs] = a[Vs, Cs] @ b[Cs, Vs]
    m1[Cs, Cs] = -(a[Cs, Vs] @ b[Vs, Cs])
    m1[Vs, Cs] = (a[Vs, Cs] @ btil(Cs, Cs) - atil(Vs, Vs) @ b[Vs, Cs]) * f_vc
    m1[Cs, Vs] = (a[Cs, Vs] @ btil(Vs, Vs) - atil(Cs, Cs) @ b[Cs, Vs]) * f_vc.T

    if n_ramp:
        one_m = (1.0 - rho_g)
        # ramp eigenvalue as the middle index
        m1[Vs, Vs] += (a[Vs, Gs] * one_m[None, :]) @ b[Gs, Vs]
        m1[Cs, Cs] -= (a[Cs, Gs] * rho_g[None, :]) @ b[Gs, Cs]
        m1[Vs, Cs] += ((a[Vs, Gs] @ btil(Gs, Cs)) * f_vc
                       - (a[Vs, Gs] * rho_g[None, :]) @ b[Gs, Cs])
        m1[Cs, Vs] += (-(atil(Cs, Gs) @ b[Gs, Vs]) * f_vc.T
                       - (a[Cs, Gs] * rho_g[None, :]) @ b[Gs, Vs])
        # ramp eigenvalue as the row index
        h_row_v = 1.0 / (lamV[None, :] - lamG[:, None])
        h_row_c = 1.0 / (lamC[None, :] - lamG[:, None])
        m1[Gs, Vs] = (one_m[:, None] * (a[Gs, Vs] @ btil(Vs, Vs))
                      - rho_g[:, None] * (a[Gs, Cs] @ btil(Cs, Vs))
                      - atil(Gs, Cs) @ b[Cs, Vs]) * h_row_v
        m1[Gs, Cs] = (-(rho_g[:, None] * (a[Gs, Vs] @ btil(Vs, Cs)
                                          + a[Gs, Cs] @ btil(Cs, Cs))) * h_row_c
                      - a[Gs, Vs] @ b[Vs, Cs])
        # ramp eigenvalue as the column index
        h_col_v = 1.0 / (lamV[:, None] - lamG[None, :])
        h_col_c = 1.0 / (lamC[:, None] - lamG[None, :])
        m1[Vs, Gs] = (-(one_m[None, :] * (atil(Vs, Vs) @ b[Vs, Gs]))
                      + a[Vs, Cs] @ btil(Cs, Gs)
                      + rho_g[None, :] * (atil(Vs, Cs) @ b[Cs, Gs])) * h_col_v
        m1[Cs, Gs] = ((rho_g[None, :] * (atil(Cs, Vs) @ b[Vs, Gs]
                                         + atil(Cs, Cs) @ b[Cs, Gs])) * h_col_c
                      - a[Cs, Vs] @ b[Vs, Gs])
        # triples with >= 2 ramp members: explicit divided differences
        at_g_all = (lamG[:, None] - lam[None, :]) * a[Gs, :]
        bt_all_g = (lam[:, None] - lamG[None, :]) * b[:, Gs]
        chunk = max(1, int(4_000_000 // max(1, n_ramp * n_ramp)))
        m_gg = np.zeros((n_ramp, n_ramp), dtype=complex)
        for ks in _chunks(n, chunk):
            t = dd2(density, lamG[:, None, None], lam[ks][None, :, None],
                    lamG[None, None, :], eps)
            m_gg += np.einsum("ik,ikj,kj->ij", at_g_all[:, ks], t,
                              bt_all_g[ks, :])
        m1[Gs, Gs] = m_gg
        at_gg = atil(Gs, Gs)
        bt_gg = btil(Gs, Gs)
        for block in (Vs, Cs):
            lo, hi = block.start, block.stop
            for js_rel in _chunks(hi - lo, chunk):
                js = slice(lo + js_rel.start, lo + js_rel.stop)
                t = dd2(density, lamG[:, None, None], lamG[None, :, None],
                        lam[js][None, None, :], eps)
                m1[Gs, js] += np.einsum("ik,ikj,kj->ij", at_gg, t,
                                        btil(Gs, js))
            for is_rel in _chunks(hi - lo, chunk):
                is_ = slice(lo + is_rel.start, lo + is_rel.stop)
                t = dd2(density, lam[is_][:, None, None],
                        lamG[None, :, None], lamG[None, None, :], eps)
                m1[is_, Gs] += np.einsum("ik,ikj,kj->ij", atil(is_, Gs),
                                         t, bt_gg)
    return m1


def _m1_reference(eigs: np.ndarray, vecs: np.ndarray, a_diag: np.ndarray,
                  b_diag: np.ndarray, density: DensityFunction,
                  eps: float = DEFAULT_DD_EPS) -> np.ndarray:
    """Direct O(n^3)-memory divided-difference sum (validation only)."""
    lam = np.asarray(eigs, dtype=float)
    a = vecs.conj().T @ (np.asarray(a_diag, dtype=float)[:, None] * vecs)
    b = vecs.conj().T @ (np.asarray(b_diag, dtype=float)[:, None] * vecs)
    at = (lam[:, None] - lam[None, :]) * a
    bt = (lam[:, None] - lam[None, :]) * b
    t = dd2(density, lam[:, None, None], lam[None, :, None],
            lam[None, None, :], eps)
    return np.einsum("ik,ikj,kj->ij", at, t, bt)


def correlation_spectral(sd: SpectralData, a_diag: np.ndarray,
                         b_diag: np.ndarray, density: DensityFunction,
                         eps: float = DEFAULT_DD_EPS) -> np.ndarray:
    """Correlation operator from an eigendecomposition (dense result)."""
    m1 = _assemble_m1(sd.eigs, sd.vecs, a_diag, b_diag, density, eps)
    w = sd.vecs @ m1 @ sd.vecs.conj().T
    return 2j * np.pi ** 2 * (w - w.conj().T)


def correlation_diagonal(sd: SpectralData, a_diag: np.ndarray,
                         b_diag: np.ndarray, density: DensityFunction,
                         eps: float = DEFAULT_DD_EPS) -> np.ndarray:
    """Diagonal of the correlation operator without forming it densely.

    diag(V (M1 - M1^H) V^H) = 2i Im diag(V M1 V^H), so one extra matrix
    product after the class assembly suffices.
    """
    m1 = _assemble_m1(sd.eigs, sd.vecs, a_diag, b_diag, density, eps)
    tmp = sd.vecs @ m1
    del m1
    z = np.einsum("ij,ij->i", tmp, sd.vecs.conj())
    return -4.0 * np.pi ** 2 * np.imag(z)


def correlation_matrix(h: np.ndarray, a_diag: np.ndarray, b_diag: np.ndarray,
                       density: DensityFunction, engine: str = "spectral",
                       spectral_data: SpectralData | None = None,
                       taylor_order: int = DEFAULT_TAYLOR_ORDER,
                       z_min: float = DEFAULT_Z_MIN,
                       gl_order: int = DEFAULT_GL_ORDER,
                       dd_cluster_eps: float = DEFAULT_DD_EPS,
                       y_scale: float = DEFAULT_Y_SCALE,
                       gl_order_y: int | None = None) -> np.ndarray:
    """Dense correlation operator of the pair (A, B) for hermitian H.

    A and B enter as real diagonals (multiplication operators).  The
    result is hermitian and, for a gapped H with density constant on the
    spectrum, block-off-diagonal in the spectral projection.
    """
    if engine == "quadrature":
        return correlation_quadrature(h, a_diag, b_diag, density,
                                      taylor_order, z_min, gl_order, y_scale,
                                      gl_order_y)
    if engine != "spectral":
        raise ValueError(f"unknown engine {engine!r}")
    sd = spectral_data if spectral_data is not None else SpectralData.from_matrix(h)
    return correlation_spectral(sd, a_diag, b_diag, density, dd_cluster_eps)


def projected_block_part(mat: np.ndarray, projector: np.ndarray,
                         diagonal: bool = False) -> np.ndarray:
    """Block part of mat w.r.t. an orthogonal projection P.

    diagonal=False gives P mat (1-P) + (1-P) mat P; diagonal=True gives
    the complementary P mat P + (1-P) mat (1-P).
    """
    pm = projector @ mat
    pmp = pm @ projector
    off = pm + mat @ projector - 2.0 * pmp
    return mat - off if diagonal else off


def off_diagonal_part(h: np.ndarray, a: np.ndarray, density: DensityFunction,
                      engine: str = "spectral",
                      spectral_data: SpectralData | None = None,
                      taylor_order: int = DEFAULT_TAYLOR_ORDER,
                      z_min: float = DEFAULT_Z_MIN,
                      gl_order: int = DEFAULT_GL_ORDER,
                      dd_cluster_eps: float = DEFAULT_DD_EPS,
                      y_scale: float = DEFAULT_Y_SCALE) -> np.ndarray:
    """Off-diagonal extraction A^OD = integral of dbar(rho~) R A R dm.

    For a gapped hermitian H whose spectrum avoids the ramp of the
    density function, the result is block-off-diagonal in the spectral
    projection P = rho(H): P A^OD P = (1-P) A^OD (1-P) = 0.  A may be a
    dense matrix or a 1-d array (diagonal multiplication operator).

    Parameters
    ----------
    h : ndarray
        Hermitian matrix.
    a : ndarray
        Operator to extract from; 1-d input is taken as a diagonal.
    density : DensityFunction
        Mollified step whose ramp sits inside the spectral gap.
    engine : str
        'spectral' (divided differences over eigen-pairs) or
        'quadrature' (contour sum over almost-analytic extension nodes).

    Returns
    -------
    ndarray
        Dense matrix of the same dimension as h.
    """
    a = np.asarray(a)
    if engine == "quadrature":
        ext = AlmostAnalyticExtension(density, taylor_order, y_scale)
        eigs = np.linalg.eigvalsh(h)
        z, w = quadrature_nodes(ext, eigs, z_min, gl_order)
        n = h.shape[0]
        out = np.zeros((n, n), dtype=complex)
        for sl in _chunks(len(z), _node_chunk(n)):
            r = _stacked_resolvents(h, z[sl])
            rar = (r * a[None, None, :]) @ r if a.ndim == 1 else r @ a @ r
            out += np.einsum("k,kij->ij", w[sl], rar)
        return out
    if engine != "spectral":
        raise ValueError(f"unknown engine {engine!r}")
    sd = spectral_data if spectral_data is not None else SpectralData.from_matrix(h)
    vecs = sd.vecs
    am = (vecs.conj().T * a[None, :]) @ vecs if a.ndim == 1 \
        else vecs.conj().T @ a @ vecs
    kernel = _dd1(density, sd.eigs[:, None], sd.eigs[None, :], dd_cluster_eps)
    return -np.pi * (vecs @ (am * kernel) @ vecs.conj().T)
