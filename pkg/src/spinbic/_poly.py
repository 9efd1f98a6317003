"""Polynomial smoothstep shared by switch ramps and density profiles."""
from __future__ import annotations

from math import comb, perm

import numpy as np
from scipy.special import betainc


class Smoothstep:
    """C^p monotone step: 0 on (-inf, 0], 1 on [1, inf), polynomial between.

    The interior is the regularized incomplete beta function I_t(p+1, p+1),
    i.e. the unique degree-(2p+1) polynomial with S(0)=0, S(1)=1 and p
    vanishing derivatives at both ends.  Values come from scipy''s betainc;
    derivatives use the factored form

        S^(k)(t) = [t(1-t)]^(p-k+1) / B(p+1, p+1)
                   * sum_j C(k-1, j) (p)_j (p)_(k-1-j) (-1)^(k-1-j)
                     t^(k-1-j) (1-t)^j

    which keeps the huge (t(1-t))^... factor outside the alternating sum.
    Monomial-basis evaluation of the same polynomial loses ~12 digits at
    p = 14 and must not be used.

    Parameters
    ----------
    p : int
        Number of continuous derivatives at the seam points 0 and 1.
        Derivatives are available in stable closed form for order <= p+1.
    """

    def __init__(self, p: int):
        if p < 1:
            raise ValueError("smoothstep order must be >= 1")
        self.p = p
        self._inv_beta = float((2 * p + 1) * comb(2 * p, p))
        self._brackets: dict[int, np.ndarray] = {}

    def _bracket_coefs(self, order: int) -> np.ndarray:
        """Coefficients c_j of sum_j c_j t^(order-1-j) (1-t)^j."""
        if order not in self._brackets:
            p, m = self.p, order - 1
            self._brackets[order] = np.array(
                [comb(m, j) * perm(p, j) * perm(p, m - j) * (-1) ** (m - j)
                 for j in range(m + 1)], dtype=float)
        return self._brackets[order]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return betainc(self.p + 1, self.p + 1, np.clip(t, 0.0, 1.0))

    def deriv(self, t, order: int = 1):
        """order-th derivative; identically 0 outside (0, 1)."""
        t = np.asarray(t, dtype=float)
        if order < 1:
            return self(t)
        if order > 2 * self.p + 1:
            return np.zeros_like(t)
        if order > self.p + 1:
            raise ValueError(
                f"stable derivatives available up to order {self.p + 1}")
        inside = (t > 0.0) & (t < 1.0)
        tc = np.where(inside, t, 0.5)
        u = tc * (1.0 - tc)
        coefs = self._bracket_coefs(order)
        m = order - 1
        acc = np.zeros_like(tc)
        for j, c in enumerate(coefs):
            acc += c * tc ** (m - j) * (1.0 - tc) ** j
        val = self._inv_beta * u ** (self.p - m) * acc
        return np.where(inside, val, 0.0)
