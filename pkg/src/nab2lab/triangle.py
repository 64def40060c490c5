"""Jets of flat splittings and boundary integrals over a small right triangle.

The triangle has vertices ``(0, 0)``, ``(2 eps, 0)`` and ``(0, 2 eps)``.  Its
boundary data are ``phi_1(x) = phi_x(x, 0)``, ``phi_2(y) = phi_y(0, y)`` and
``phi_3(t) = (phi_x - phi_y)(eps + t, eps - t)``, expanded around ``(0, 0)``,
``(0, 0)`` and ``(eps, eps)`` respectively.  ``I_n`` combines the first
``n - 1`` derivatives of these into a quantity of order ``eps^n`` whenever the
splitting is flat.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P

from .algebra import TwoForm
from .poly import PolyField, poly_diff, poly_mul

__all__ = [
    "JetTable",
    "OmegaJet",
    "TriangleBoundaryJet",
    "InsufficientJets",
    "ExactVanishing",
    "flat_jet_extension",
    "boundary_jets_from_bulk",
    "triangle_I1",
    "triangle_I2",
    "triangle_I3",
    "residual_slope",
]


class InsufficientJets(ValueError):
    pass


class ExactVanishing(ArithmeticError):
    """A residual is exactly zero, so no slope can be fitted."""


def _fact_grid(J: int) -> np.ndarray:
    f = np.array([factorial(k) for k in range(J + 1)], float)
    return np.outer(f, f)


@dataclass(frozen=True)
class JetTable:
    """``d[..., m, n]`` is ``d_x^m d_y^n`` of the quantity at the origin, ``m + n <= J``."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, float)
        i, j = np.indices(d.shape[-2:])
        if np.any(d[..., i + j > d.shape[-1] - 1]):
            raise ValueError("jet entries above the total order bound")
        d.flags.writeable = False
        object.__setattr__(self, "d", d)

    @property
    def order(self) -> int:
        return self.d.shape[-1] - 1

    @classmethod
    def from_poly(cls, f: PolyField, J: int | None = None) -> "JetTable":
        J = f.cap if J is None else J
        c = f.with_cap(J).coeffs
        return cls(c * _fact_grid(J))

    def to_poly(self) -> PolyField:
        return PolyField(self.d / _fact_grid(self.order), self.order)


@dataclass(frozen=True)
class OmegaJet:
    """Values and first derivatives at the origin; index 0 value, 1 ``d_x``, 2 ``d_y``."""

    A: np.ndarray
    B_x: np.ndarray
    B_y: np.ndarray
    C: np.ndarray

    @classmethod
    def from_two_form(cls, w: TwoForm) -> "OmegaJet":
        def jet(f: PolyField) -> np.ndarray:
            c = f.coeffs
            d = [c[..., 0, 0]]
            d.append(c[..., 1, 0] if f.cap >= 1 else np.zeros_like(d[0]))
            d.append(c[..., 0, 1] if f.cap >= 1 else np.zeros_like(d[0]))
            return np.array(d)

        return cls(jet(w.A), jet(w.B_x), jet(w.B_y), jet(w.C))

    def diag(self, name: str) -> np.ndarray:
        """``(d_x + d_y)`` of a component at the origin."""
        f = getattr(self, name)
        return f[1] + f[2]


@dataclass(frozen=True)
class TriangleBoundaryJet:
    """``phiK[k]`` holds ``d_K^k phi_K`` at the expansion point (shape ``[J+1, N]``)."""

    eps: float
    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    series_order: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not (self.phi1.shape == self.phi2.shape == self.phi3.shape):
            raise ValueError("boundary jets must share N and order")


def flat_jet_extension(w: TwoForm, phi_x_axis, phi_y: JetTable, J: int) -> JetTable:
    """Jets of ``phi_x`` making the splitting flat, from ``phi_x(x, 0)`` and ``phi_y``.

    Solves ``d_y phi_x = d_x phi_y + A + B_x phi_y - B_y phi_x + C(phi_x, phi_y)``
    one ``y``-order at a time; ``phi_x_axis[a, m]`` is ``d_x^m phi_x(0, 0)``.
    """
    axis = np.asarray(phi_x_axis, float)
    if axis.shape[-1] < J + 1 or phi_y.order < J:
        raise InsufficientJets(f"inputs do not reach order {J}")
    N = axis.shape[0]
    fac = np.array([factorial(k) for k in range(J + 1)], float)
    c = np.zeros((N, J + 1, J + 1))
    c[:, :, 0] = axis[:, : J + 1] / fac
    py = phi_y.to_poly().with_cap(J)
    A, Bx, By, C = (f.with_cap(J) for f in (w.A, w.B_x, w.B_y, w.C))
    source = poly_diff(py, "x") + A + poly_mul(Bx, py, "ab,b->a")
    lin = poly_mul(C, py, "abc,c->ab") - By
    j_idx = np.arange(J + 1)
    for j in range(J):
        px = PolyField(c, J)
        F = (source + poly_mul(lin, px, "ab,b->a")).coeffs
        # Taylor rows: (j + 1) c[i, j + 1] = F[i, j] for i + j + 1 <= J
        i = j_idx[: J - j]
        c[:, i, j + 1] = F[:, i, j] / (j + 1)
    return JetTable.from_poly(PolyField(c, J))


def boundary_jets_from_bulk(phi_x: JetTable, phi_y: JetTable, eps: float, J: int) -> TriangleBoundaryJet:
    """Boundary jets of a splitting known through its Taylor jets at the origin.

    ``phi_3`` and its ``t``-derivatives are evaluated exactly on the Taylor
    polynomial of order ``min(phi_x.order, phi_y.order)``, i.e. the series in
    ``eps (d_x + d_y)`` is summed with its ``1/n!`` weights up to that order.
    """
    order = min(phi_x.order, phi_y.order)
    if J > order:
        raise InsufficientJets(f"boundary order {J} exceeds bulk jet order {order}")
    phi1 = phi_x.d[:, : J + 1, 0].T.copy()
    phi2 = phi_y.d[:, 0, : J + 1].T.copy()
    diff = (phi_x.to_poly().with_cap(order) - phi_y.to_poly().with_cap(order)).coeffs
    N = diff.shape[0]
    plus = np.array([eps, 1.0])    # eps + t
    minus = np.array([eps, -1.0])  # eps - t
    phi3 = np.zeros((J + 1, N))
    for a in range(N):
        poly_t = np.zeros(1)
        for i in range(order + 1):
            for j in range(order + 1 - i):
                if diff[a, i, j]:
                    term = P.polymul(P.polypow(plus, i), P.polypow(minus, j)) * diff[a, i, j]
                    poly_t = P.polyadd(poly_t, term)
        for k in range(J + 1):
            dk = P.polyder(poly_t, k) if k else poly_t
            phi3[k, a] = dk[0] if len(dk) else 0.0
    return TriangleBoundaryJet(float(eps), phi1, phi2, phi3, order)


def triangle_I1(b: TriangleBoundaryJet) -> np.ndarray:
    """``phi_3 - phi_1 + phi_2``; of order ``eps`` for any smooth splitting."""
    return b.phi3[0] - b.phi1[0] + b.phi2[0]


def _curvature_term(wj: OmegaJet, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """``A + B_x phi_2 - B_y phi_1 + C(phi_1, phi_2)`` at the origin."""
    return (wj.A[0] + wj.B_x[0] @ p2 - wj.B_y[0] @ p1
            + np.einsum("abc,b,c->a", wj.C[0], p1, p2))


def triangle_I2(b: TriangleBoundaryJet, wj: OmegaJet) -> np.ndarray:
    """First-order corrected combination; of order ``eps^2`` for flat splittings."""
    e = b.eps
    p1, p2 = b.phi1[0], b.phi2[0]
    return (b.phi3[0] - p1 + p2 - e * b.phi1[1] + e * b.phi2[1]
            - e * _curvature_term(wj, p1, p2))


def triangle_I3(b: TriangleBoundaryJet, wj: OmegaJet, printed: bool = False) -> np.ndarray:
    """Second-order corrected combination; of order ``eps^3`` for flat splittings.

    ``printed=True`` switches to a variant with the opposite sign on the
    ``(d_x + d_y) B`` terms and twice the weight on the ``C(d phi, phi)`` terms;
    it is kept to demonstrate that this variant is only of order ``eps^2``.
    """
    e2 = b.eps ** 2
    p1, p2 = b.phi1[0], b.phi2[0]
    d1, d2 = b.phi1[1], b.phi2[1]
    C0 = wj.C[0]
    Bx, By = wj.B_x[0], wj.B_y[0]
    F = _curvature_term(wj, p1, p2)
    out = triangle_I2(b, wj)
    out = out + e2 / 6 * b.phi3[2] - 2 / 3 * e2 * b.phi1[2] + 2 / 3 * e2 * b.phi2[2]
    out = out - 2 / 3 * e2 * wj.diag("A")
    sign = -1.0 if printed else 1.0
    out = out - sign * 2 / 3 * e2 * (wj.diag("B_x") @ p2) + sign * 2 / 3 * e2 * (wj.diag("B_y") @ p1)
    out = out - 1 / 3 * e2 * (Bx @ (3 * d2 + d1) - By @ (3 * d1 + d2))
    out = out - 2 / 3 * e2 * np.einsum("abc,b,c->a", wj.diag("C"), p1, p2)
    c_weight = 2 / 3 if printed else 1 / 3
    out = out - c_weight * e2 * (np.einsum("abc,b,c->a", C0, 3 * d1 + d2, p2)
                                 + np.einsum("abc,b,c->a", C0, p1, 3 * d2 + d1))
    lin_y = Bx + np.einsum("abc,b->ac", C0, p1)   # linearization of F in phi_2
    lin_x = By + np.einsum("abc,b->ac", C0, p2)   # minus linearization of F in phi_1
    out = out + e2 / 3 * lin_y @ (b.phi3[1] + F) - e2 / 3 * lin_x @ (b.phi3[1] - F)
    return out


def residual_slope(values) -> float:
    """Least-squares slope of ``log(norm)`` against ``log(eps)``."""
    values = list(values)
    if len(values) < 3:
        raise ValueError("need at least three (eps, norm) samples")
    eps, norms = np.array(values, float).T
    if np.any(norms == 0):
        raise ExactVanishing("a residual vanished exactly")
    if np.any(norms < 0) or np.any(eps <= 0):
        raise ValueError("eps and norms must be positive")
    return float(np.polyfit(np.log(eps), np.log(norms), 1)[0])
