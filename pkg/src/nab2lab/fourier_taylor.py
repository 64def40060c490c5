"""Fourier-Taylor fields on the unit disk.

A field with offset ``sigma`` is ``sum c[n, k] r**(|n| + 2k + sigma) e^{i n theta}``
for ``|n| <= n_max`` and ``0 <= k <= k_max``.  Smooth scalars have
``sigma = 0``; the radial component of a smooth 1-form has ``sigma = -1``, the
angular one ``sigma = 0``, and ``r * A_xy`` has ``sigma = +1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from .poly import PolyField

__all__ = [
    "FourierTaylorField",
    "ParityError",
    "cartesian_to_ft",
    "ft_mul",
    "product_table",
    "apply_product",
]


class ParityError(ValueError):
    """A coefficient would land on a non-integer or negative radial index."""


@dataclass(frozen=True)
class FourierTaylorField:
    coeffs: np.ndarray  # slots + (2 n_max + 1, k_max + 1), complex
    sigma: int
    n_max: int
    k_max: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape[-2:] != (2 * self.n_max + 1, self.k_max + 1):
            raise ValueError(f"coefficient block {c.shape[-2:]} does not match cutoffs")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, slots, sigma: int, n_max: int, k_max: int) -> "FourierTaylorField":
        return cls(np.zeros(tuple(slots) + (2 * n_max + 1, k_max + 1), complex), sigma, n_max, k_max)

    @property
    def slots(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-2]

    def coef(self, n: int, k: int) -> np.ndarray:
        if abs(n) > self.n_max or not 0 <= k <= self.k_max:
            return np.zeros(self.slots, complex)
        return self.coeffs[..., n + self.n_max, k]

    def reality_defect(self) -> float:
        """``max |c[-n, k] - conj(c[n, k])|``."""
        c = self.coeffs
        return float(np.abs(c[..., ::-1, :] - c.conj()).max()) if c.size else 0.0

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def evaluate(self, r: float, theta: float) -> np.ndarray:
        n = np.arange(-self.n_max, self.n_max + 1)
        k = np.arange(self.k_max + 1)
        expo = np.abs(n)[:, None] + 2 * k[None, :] + self.sigma
        basis = r ** expo.astype(float) * np.exp(1j * n * theta)[:, None]
        return np.einsum("...nk,nk->...", self.coeffs, basis)


@lru_cache(maxsize=None)
def _trig_table(i: int, j: int) -> np.ndarray:
    """Laurent coefficients of ``cos^i sin^j``, indexed ``n + (i + j)``."""
    cos = np.array([0.5, 0.0, 0.5], dtype=complex)          # (z^-1 + z)/2
    sin = np.array([-1 / 2j, 0.0, 1 / 2j], dtype=complex)   # (z - z^-1)/(2i)
    out = np.array([1.0 + 0j])
    for _ in range(i):
        out = np.convolve(out, cos)
    for _ in range(j):
        out = np.convolve(out, sin)
    return out


def _poly_modes(c: np.ndarray, n_max: int, k_max: int) -> np.ndarray:
    """Expands ``sum c[..., i, j] x^i y^j`` with ``r^d`` landing at ``k = (d - |n|)/2``."""
    D = c.shape[-1] - 1
    out = np.zeros(c.shape[:-2] + (2 * n_max + 1, k_max + 1), complex)
    for i in range(D + 1):
        for j in range(D + 1 - i):
            a = c[..., i, j]
            if not np.any(a):
                continue
            d = i + j
            table = _trig_table(i, j)
            for idx, t in enumerate(table):
                if t == 0:
                    continue
                n = idx - d
                if (d - abs(n)) % 2:
                    raise ParityError(f"harmonic {n} in a degree-{d} monomial")
                k = (d - abs(n)) // 2
                if abs(n) <= n_max and k <= k_max:
                    out[..., n + n_max, k] += t * a
    return out


def _shift_x(c: np.ndarray) -> np.ndarray:
    out = np.zeros(c.shape[:-2] + (c.shape[-2] + 1, c.shape[-1] + 1))
    out[..., 1:, :-1] = c
    return out


def _shift_y(c: np.ndarray) -> np.ndarray:
    out = np.zeros(c.shape[:-2] + (c.shape[-2] + 1, c.shape[-1] + 1))
    out[..., :-1, 1:] = c
    return out


def cartesian_to_ft(f, kind: str, n_max: int, k_max: int):
    """Exact change of basis from Cartesian polynomials to Fourier-Taylor form.

    ``kind`` is ``"scalar"`` (``sigma = 0``), ``"area"`` (``r * f``,
    ``sigma = +1``) or ``"form"``, in which case ``f`` is a pair
    ``(f_x, f_y)`` and the result is ``(f_r, f_theta)`` with
    ``f_r = (x f_x + y f_y)/r`` (``sigma = -1``) and
    ``f_theta = -y f_x + x f_y`` (``sigma = 0``).  Coefficients beyond the
    cutoffs are dropped.
    """
    if kind == "scalar":
        return FourierTaylorField(_poly_modes(f.coeffs, n_max, k_max), 0, n_max, k_max)
    if kind == "area":
        return FourierTaylorField(_poly_modes(f.coeffs, n_max, k_max), 1, n_max, k_max)
    if kind == "form":
        fx, fy = f
        if fx.shape != fy.shape:
            raise ValueError("form components must share slots")
        cx, cy = fx.coeffs, fy.coeffs
        radial = _shift_x(cx) + _shift_y(cy)
        angular = _shift_x(cy) - _shift_y(cx)
        return (FourierTaylorField(_poly_modes(radial, n_max, k_max), -1, n_max, k_max),
                FourierTaylorField(_poly_modes(angular, n_max, k_max), 0, n_max, k_max))
    raise ValueError(f"unknown kind {kind!r}")


@dataclass(frozen=True)
class ProductTable:
    """Sparse bookkeeping of which coefficient pairs land where.

    Flattened mode index is ``p = (n + n_max) * (k_max + 1) + k``.
    """

    p1: np.ndarray
    p2: np.ndarray
    pout: np.ndarray
    level_out: np.ndarray
    level2: np.ndarray
    scatter: sparse.csr_matrix
    n_out: int
    k_out: int


@lru_cache(maxsize=None)
def product_table(na: int, ka: int, nb: int, kb: int, n_out: int, k_out: int,
                  shift: int) -> ProductTable:
    """Table for ``(na, ka) x (nb, kb) -> (n_out, k_out)``.

    A pair ``(n1, k1), (n2, k2)`` lands at ``n = n1 + n2`` and
    ``k = k1 + k2 + (|n1| + |n2| - |n|)/2 + shift`` where
    ``shift = (sigma_a + sigma_b - sigma_out)/2``.
    """
    n1, k1 = np.meshgrid(np.arange(-na, na + 1), np.arange(ka + 1), indexing="ij")
    n2, k2 = np.meshgrid(np.arange(-nb, nb + 1), np.arange(kb + 1), indexing="ij")
    n1, k1, n2, k2 = n1.ravel(), k1.ravel(), n2.ravel(), k2.ravel()
    N1, N2 = np.meshgrid(n1, n2, indexing="ij")
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    P1, P2 = np.meshgrid(np.arange(n1.size), np.arange(n2.size), indexing="ij")
    n = N1 + N2
    excess = np.abs(N1) + np.abs(N2) - np.abs(n)
    k = K1 + K2 + excess // 2 + shift
    if np.any(k < 0):
        raise ParityError("negative radial index; inconsistent offsets")
    keep = (np.abs(n) <= n_out) & (k <= k_out)
    p1, p2 = P1[keep], P2[keep]
    n, k, k2s = n[keep], k[keep], K2[keep]
    pout = (n + n_out) * (k_out + 1) + k
    n_modes = (2 * n_out + 1) * (k_out + 1)
    scatter = sparse.csr_matrix((np.ones(pout.size), (np.arange(pout.size), pout)),
                                shape=(pout.size, n_modes))
    return ProductTable(p1, p2, pout, k, k2s, scatter, n_out, k_out)


def _split(subscripts: str) -> tuple[str, str, str]:
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    return sa, sb, out


def apply_product(a: np.ndarray, b: np.ndarray, table: ProductTable, subscripts: str) -> np.ndarray:
    """Raw product on flattened coefficient arrays ``slots + (modes,)``."""
    sa, sb, so = _split(subscripts)
    g = np.einsum(f"...{sa}t,...{sb}t->...{so}t", a[..., table.p1], b[..., table.p2])
    lead = g.shape[:-1]
    res = g.reshape(-1, g.shape[-1]) @ table.scatter
    return np.asarray(res).reshape(lead + (table.scatter.shape[1],))


def ft_mul(a: FourierTaylorField, b: FourierTaylorField, subscripts: str | None = None,
           n_max: int | None = None, k_max: int | None = None,
           sigma: int | None = None) -> FourierTaylorField:
    """Product with slot contraction, truncated to the requested cutoffs.

    The result offset defaults to ``sigma_a + sigma_b``; a different ``sigma``
    re-indexes the radial exponents and must differ by an even number.
    """
    if subscripts is None:
        s = "abcdefgh"[: len(a.slots)]
        if a.slots == b.slots:
            subscripts = f"{s},{s}->{s}"
        elif not b.slots:
            subscripts = f"{s},->{s}"
        elif not a.slots:
            s = "abcdefgh"[: len(b.slots)]
            subscripts = f",{s}->{s}"
        else:
            raise ValueError("explicit contraction needed for differing slots")
    n_max = min(a.n_max, b.n_max) if n_max is None else n_max
    k_max = min(a.k_max, b.k_max) if k_max is None else k_max
    sigma = a.sigma + b.sigma if sigma is None else sigma
    if (a.sigma + b.sigma - sigma) % 2:
        raise ParityError(f"offset {sigma} is incompatible with {a.sigma} + {b.sigma}")
    table = product_table(a.n_max, a.k_max, b.n_max, b.k_max, n_max, k_max,
                          (a.sigma + b.sigma - sigma) // 2)
    fa = a.coeffs.reshape(a.slots + (-1,))
    fb = b.coeffs.reshape(b.slots + (-1,))
    out = apply_product(fa, fb, table, subscripts)
    return FourierTaylorField(out.reshape(out.shape[:-1] + (2 * n_max + 1, k_max + 1)),
                              sigma, n_max, k_max)


def _as_poly(f) -> PolyField:
    return f if isinstance(f, PolyField) else PolyField(f)
