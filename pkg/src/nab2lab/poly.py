"""Truncated bivariate polynomials with tensor slots.

A :class:`PolyField` stores ``sum_{i+j<=D} c[slot, i, j] x**i y**j`` for every
multi-index ``slot`` of a fixed tensor shape.  All derivatives are exact and
products are truncated at a total-degree cap, so identities involving
``d/dx``/``d/dy`` hold to float roundoff once the caps are large enough.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

__all__ = [
    "PolyField",
    "poly_eval",
    "poly_diff",
    "poly_mul",
    "poly_mul_with_loss",
    "ShapeMismatch",
]


class ShapeMismatch(ValueError):
    """Paired tensor slots have different dimensions."""


def _mask(cap: int) -> np.ndarray:
    i, j = np.indices((cap + 1, cap + 1))
    return (i + j) <= cap


@lru_cache(maxsize=None)
def _monomials(cap: int) -> tuple[np.ndarray, np.ndarray]:
    ii, jj = [], []
    for d in range(cap + 1):
        for i in range(d, -1, -1):
            ii.append(i)
            jj.append(d - i)
    return np.array(ii), np.array(jj)


@lru_cache(maxsize=None)
def _scatter(cap_a: int, cap_b: int, cap_out: int) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Maps outer products of monomials onto product monomials.

    Returns (kept, dropped): kept lands on monomials of degree <= cap_out,
    dropped on the ones above it (up to cap_a + cap_b).
    """
    ia, ja = _monomials(cap_a)
    ib, jb = _monomials(cap_b)
    full = cap_a + cap_b
    io, jo = _monomials(full)
    pos = {(int(i), int(j)): k for k, (i, j) in enumerate(zip(io, jo))}
    rows, cols = [], []
    for p in range(len(ia)):
        for q in range(len(ib)):
            rows.append(p * len(ib) + q)
            cols.append(pos[(int(ia[p] + ib[q]), int(ja[p] + jb[q]))])
    rows = np.array(rows)
    cols = np.array(cols)
    n_rows = len(ia) * len(ib)
    n_keep = (cap_out + 1) * (cap_out + 2) // 2
    keep = cols < n_keep
    kept = sparse.csr_matrix(
        (np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(n_rows, n_keep)
    )
    drop = ~keep
    dropped = sparse.csr_matrix(
        (np.ones(drop.sum()), (rows[drop], cols[drop] - n_keep)),
        shape=(n_rows, len(io) - n_keep),
    )
    return kept, dropped


class PolyField:
    """Truncated bivariate polynomial with tensor slots.

    ``coeffs`` has shape ``shape + (cap + 1, cap + 1)``; entry ``[..., i, j]`` is
    the coefficient of ``x**i * y**j``.  Entries with ``i + j > cap`` are always
    zero.  Instances are immutable.
    """

    __slots__ = ("_c", "_cap")

    def __init__(self, coeffs, cap: int | None = None):
        c = np.array(coeffs, dtype=float)
        if c.ndim < 2 or c.shape[-1] != c.shape[-2]:
            raise ValueError("coefficient array must end in a square (i, j) block")
        natural = c.shape[-1] - 1
        if cap is None:
            cap = natural
        if cap != natural:
            c = _resize(c, cap)
        c = np.where(_mask(cap), c, 0.0)
        c.flags.writeable = False
        self._c = c
        self._cap = int(cap)

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, shape: Sequence[int], cap: int) -> "PolyField":
        return cls(np.zeros(tuple(shape) + (cap + 1, cap + 1)), cap)

    @classmethod
    def constant(cls, value, cap: int) -> "PolyField":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (cap + 1, cap + 1))
        c[..., 0, 0] = value
        return cls(c, cap)

    @classmethod
    def monomial(cls, i: int, j: int, cap: int, value=1.0) -> "PolyField":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (cap + 1, cap + 1))
        if i + j <= cap:
            c[..., i, j] = value
        return cls(c, cap)

    @classmethod
    def from_rows(cls, shape: Sequence[int], cap: int,
                  rows: Iterable[tuple[tuple[int, ...], int, int, float]]) -> "PolyField":
        """Builds a field from ``(slot, i, j, value)`` rows; repeated rows add up."""
        c = np.zeros(tuple(shape) + (cap + 1, cap + 1))
        for slot, i, j, value in rows:
            if i + j > cap:
                raise ValueError(f"monomial x^{i} y^{j} exceeds degree cap {cap}")
            c[tuple(slot) + (i, j)] += value
        return cls(c, cap)

    # -- basic accessors ----------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def cap(self) -> int:
        return self._cap

    @property
    def shape(self) -> tuple[int, ...]:
        return self._c.shape[:-2]

    def __getitem__(self, slot) -> "PolyField":
        if not isinstance(slot, tuple):
            slot = (slot,)
        if len(slot) > len(self.shape):
            raise IndexError("too many slot indices")
        return PolyField(self._c[slot], self._cap)

    def degree(self) -> int:
        """Largest total degree carrying a nonzero coefficient (-1 for zero)."""
        i, j = np.indices(self._c.shape[-2:])
        nz = np.any(self._c != 0, axis=tuple(range(self._c.ndim - 2)))
        return int((i + j)[nz].max()) if nz.any() else -1

    def max_abs(self) -> float:
        return float(np.abs(self._c).max()) if self._c.size else 0.0

    def with_cap(self, cap: int) -> "PolyField":
        return PolyField(self._c, cap)

    def truncate(self, degree: int) -> "PolyField":
        """Zeros every coefficient above ``degree`` but keeps the cap."""
        i, j = np.indices(self._c.shape[-2:])
        return PolyField(np.where(i + j <= degree, self._c, 0.0), self._cap)

    def scale_y(self, s: float) -> "PolyField":
        """Returns ``f(x, s*y)``."""
        return PolyField(self._c * s ** np.arange(self._cap + 1), self._cap)

    def restrict_y(self, y: float) -> np.ndarray:
        """Coefficients in x of ``f(x, y)``: array of shape ``shape + (cap+1,)``."""
        return self._c @ (y ** np.arange(self._cap + 1))

    def transpose_slots(self, axes: Sequence[int]) -> "PolyField":
        nd = len(self.shape)
        return PolyField(np.transpose(self._c, tuple(axes) + (nd, nd + 1)), self._cap)

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other: "PolyField") -> tuple[np.ndarray, np.ndarray, int]:
        cap = min(self._cap, other._cap)
        return _resize(self._c, cap), _resize(other._c, cap), cap

    def __add__(self, other):
        if isinstance(other, PolyField):
            a, b, cap = self._coerce(other)
            return PolyField(a + b, cap)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, PolyField):
            a, b, cap = self._coerce(other)
            return PolyField(a - b, cap)
        return NotImplemented

    def __neg__(self):
        return PolyField(-self._c, self._cap)

    def __mul__(self, k):
        if isinstance(k, PolyField):
            return poly_mul(self, k)
        return PolyField(self._c * float(k), self._cap)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"PolyField(shape={self.shape}, cap={self._cap}, degree={self.degree()})"


def _resize(c: np.ndarray, cap: int) -> np.ndarray:
    n = c.shape[-1]
    if n == cap + 1:
        return c
    if n > cap + 1:
        return c[..., : cap + 1, : cap + 1]
    out = np.zeros(c.shape[:-2] + (cap + 1, cap + 1))
    out[..., :n, :n] = c
    return out


def poly_eval(field: PolyField, point) -> np.ndarray:
    """Evaluates every slot of ``field`` at ``point = (x, y)``."""
    x, y = point
    p = np.arange(field.cap + 1)
    return np.einsum("...ij,i,j->...", field.coeffs, float(x) ** p, float(y) ** p)


def poly_diff(field: PolyField, axis: str) -> PolyField:
    """Exact partial derivative along ``'x'`` or ``'y'``; the cap is kept."""
    c = field.coeffs
    out = np.zeros_like(c)
    k = np.arange(1, field.cap + 1)
    if axis == "x":
        out[..., :-1, :] = c[..., 1:, :] * k[:, None]
    elif axis == "y":
        out[..., :, :-1] = c[..., :, 1:] * k
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return PolyField(out, field.cap)


def _parse(subscripts: str | None, a: PolyField, b: PolyField) -> tuple[str, str, str]:
    if subscripts is None:
        if a.shape == b.shape:
            s = "abcdefgh"[: len(a.shape)]
            return s, s, s
        if not a.shape:
            s = "abcdefgh"[: len(b.shape)]
            return "", s, s
        if not b.shape:
            s = "abcdefgh"[: len(a.shape)]
            return s, "", s
        raise ShapeMismatch(f"no default pairing for shapes {a.shape} and {b.shape}")
    try:
        lhs, out = subscripts.replace(" ", "").split("->")
        sa, sb = lhs.split(",")
    except ValueError:
        raise ValueError(f"bad contraction descriptor {subscripts!r}") from None
    if len(sa) != len(a.shape) or len(sb) != len(b.shape):
        raise ShapeMismatch(f"{subscripts!r} does not match shapes {a.shape}, {b.shape}")
    if not (sa + sb + out).islower() and (sa + sb + out):
        raise ValueError("slot labels must be lowercase letters")
    dims: dict[str, int] = {}
    for labels, shape in ((sa, a.shape), (sb, b.shape)):
        for ch, n in zip(labels, shape):
            if dims.setdefault(ch, n) != n:
                raise ShapeMismatch(f"slot {ch!r} has dimensions {dims[ch]} and {n}")
    return sa, sb, out


def poly_mul_with_loss(a: PolyField, b: PolyField, subscripts: str | None = None,
                       cap: int | None = None) -> tuple[PolyField, float]:
    """Truncated product plus the largest discarded coefficient magnitude.

    ``subscripts`` is an einsum-style slot pairing such as ``"abc,b->ac"``;
    ``None`` multiplies slotwise (equal shapes) or scales by a scalar field.
    The result keeps degrees ``<= cap`` (default: the smaller operand cap).
    """
    sa, sb, so = _parse(subscripts, a, b)
    if cap is None:
        cap = min(a.cap, b.cap)
    ia, ja = _monomials(a.cap)
    ib, jb = _monomials(b.cap)
    fa = a.coeffs[..., ia, ja]
    fb = b.coeffs[..., ib, jb]
    outer = np.einsum(f"{sa}Y,{sb}Z->{so}YZ", fa, fb)
    lead = outer.shape[:-2]
    flat = outer.reshape(-1, fa.shape[-1] * fb.shape[-1])
    if cap > a.cap + b.cap:
        cap_eff = a.cap + b.cap
    else:
        cap_eff = cap
    kept, dropped = _scatter(a.cap, b.cap, cap_eff)
    res = np.asarray(flat @ kept)
    loss = 0.0
    if dropped.shape[1]:
        lost = np.asarray(flat @ dropped)
        loss = float(np.abs(lost).max()) if lost.size else 0.0
    io, jo = _monomials(cap_eff)
    c = np.zeros(lead + (cap + 1, cap + 1))
    c[..., io, jo] = res.reshape(lead + (len(io),))
    return PolyField(c, cap), loss


def poly_mul(a: PolyField, b: PolyField, subscripts: str | None = None,
             cap: int | None = None) -> PolyField:
    """Truncated product with slot contraction; see :func:`poly_mul_with_loss`."""
    return poly_mul_with_loss(a, b, subscripts, cap)[0]
