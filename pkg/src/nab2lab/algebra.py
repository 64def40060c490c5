"""Splittings, non-abelian 2-forms, their gauge group and the omega-bracket.

Everything lives on a single chart with coordinates ``(x, y)``; all fields are
:class:`~nab2lab.poly.PolyField` instances.

Conventions
-----------
* A splitting is a pair ``(phi_x, phi_y)`` of color vectors (slots ``[N]``).
* A 2-form is ``(A, B_x, B_y, C)`` with ``A = A^a_{xy}``, ``B_mu[a, b] =
  B^a_{mu b}`` and ``C[a, b, c] = C^a_{bc}``.
* A gauge transform ``(g, alpha)`` acts on splittings by
  ``phi_mu -> alpha_mu + g phi_mu`` and on 2-forms so that
  ``d_omega' phi' = g d_omega phi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import PolyField, poly_diff, poly_mul

__all__ = [
    "Splitting",
    "TwoForm",
    "GaugeTransform",
    "AnchoredSection",
    "gauge_apply_splitting",
    "gauge_apply_two_form",
    "pullback_two_form",
    "gauge_apply_section",
    "omega_exterior_derivative",
    "omega_bracket",
    "lie_bracket",
    "neumann_inverse",
]


def _mv(m: PolyField, v: PolyField) -> PolyField:
    return poly_mul(m, v, "ab,b->a")


def _mm(m: PolyField, n: PolyField) -> PolyField:
    return poly_mul(m, n, "ab,bc->ac")


def _bilinear(C: PolyField, u: PolyField, v: PolyField) -> PolyField:
    return poly_mul(poly_mul(C, u, "abc,b->ac"), v, "ac,c->a")


@dataclass(frozen=True)
class Splitting:
    phi_x: PolyField
    phi_y: PolyField

    def __post_init__(self):
        if self.phi_x.shape != self.phi_y.shape or len(self.phi_x.shape) != 1:
            raise ValueError("splitting components must share a single color slot")

    @property
    def N(self) -> int:
        return self.phi_x.shape[0]

    def component(self, mu: str) -> PolyField:
        return self.phi_x if mu == "x" else self.phi_y


@dataclass(frozen=True)
class TwoForm:
    """The triple ``(A, B, C)``; ``C`` must be exactly antisymmetric."""

    A: PolyField
    B_x: PolyField
    B_y: PolyField
    C: PolyField

    def __post_init__(self):
        N = self.A.shape[0]
        if self.B_x.shape != (N, N) or self.B_y.shape != (N, N) or self.C.shape != (N, N, N):
            raise ValueError("inconsistent 2-form slot shapes")
        c = self.C.coeffs
        if not np.array_equal(c, -np.swapaxes(c, 1, 2)):
            raise ValueError("C^a_bc must be antisymmetric in (b, c)")

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @classmethod
    def zero(cls, N: int, cap: int) -> "TwoForm":
        return cls(PolyField.zeros([N], cap), PolyField.zeros([N, N], cap),
                   PolyField.zeros([N, N], cap), PolyField.zeros([N, N, N], cap))

    @classmethod
    def from_structure(cls, C, cap: int) -> "TwoForm":
        """``(0, 0, C)`` for a constant structure tensor array."""
        C = np.asarray(C, dtype=float)
        N = C.shape[0]
        return cls(PolyField.zeros([N], cap), PolyField.zeros([N, N], cap),
                   PolyField.zeros([N, N], cap), PolyField.constant(C, cap))

    def B(self, mu: str) -> PolyField:
        return self.B_x if mu == "x" else self.B_y

    def unified(self) -> PolyField:
        """The array ``omega^a_{ij}`` with ``i, j`` running over ``(x, y, 1..N)``.

        ``omega_{xy} = A``, ``omega_{mu b} = B_mu`` and ``omega_{b mu} = -B_mu``,
        ``omega_{bc} = C``; with this sign choice
        ``omega(phi_x, phi_y)`` (``phi^nu_mu = delta``) reproduces ``d_omega``.
        """
        N = self.N
        c = np.zeros((N, N + 2, N + 2) + self.A.coeffs.shape[-2:])
        c[:, 0, 1] = self.A.coeffs
        c[:, 1, 0] = -self.A.coeffs
        c[:, 0, 2:] = self.B_x.coeffs
        c[:, 1, 2:] = self.B_y.coeffs
        c[:, 2:, 0] = -self.B_x.coeffs
        c[:, 2:, 1] = -self.B_y.coeffs
        c[:, 2:, 2:] = self.C.coeffs
        return PolyField(c, self.A.cap)


def neumann_inverse(g: PolyField, cap: int | None = None) -> PolyField:
    """Truncated inverse of a matrix field with invertible constant term.

    Writes ``g = g0 (I + h)`` with ``h`` vanishing at the origin and sums
    ``(I + h)^-1 = sum_k (-h)^k`` up to the degree cap.
    """
    cap = g.cap if cap is None else cap
    g = g.with_cap(cap)
    g0 = g.coeffs[..., 0, 0]
    g0_inv = np.linalg.inv(g0)
    h = _mm(PolyField.constant(g0_inv, cap), g) - PolyField.constant(np.eye(len(g0)), cap)
    term = PolyField.constant(np.eye(len(g0)), cap)
    total = term
    for _ in range(cap):
        term = -_mm(term, h)
        total = total + term
    return _mm(total, PolyField.constant(g0_inv, cap))


@dataclass(frozen=True)
class GaugeTransform:
    g: PolyField
    g_inv: PolyField
    alpha_x: PolyField
    alpha_y: PolyField

    def __post_init__(self):
        N = self.g.shape[0]
        if self.g.shape != (N, N) or self.alpha_x.shape != (N,) or self.alpha_y.shape != (N,):
            raise ValueError("inconsistent gauge transform shapes")
        eye = PolyField.constant(np.eye(N), self.g.cap)
        err = (_mm(self.g, self.g_inv) - eye).max_abs()
        if err > 1e-12 * max(1.0, self.g.max_abs() * self.g_inv.max_abs()):
            raise ValueError(f"g_inv is not a truncated inverse of g (error {err:.3g})")

    @classmethod
    def from_g(cls, g: PolyField, alpha_x: PolyField, alpha_y: PolyField) -> "GaugeTransform":
        return cls(g, neumann_inverse(g), alpha_x, alpha_y)

    @classmethod
    def identity(cls, N: int, cap: int) -> "GaugeTransform":
        eye = PolyField.constant(np.eye(N), cap)
        return cls(eye, eye, PolyField.zeros([N], cap), PolyField.zeros([N], cap))

    @property
    def N(self) -> int:
        return self.g.shape[0]

    def alpha(self, mu: str) -> PolyField:
        return self.alpha_x if mu == "x" else self.alpha_y

    def inverse(self) -> "GaugeTransform":
        """``(g^-1, -g^-1 alpha)``, so that ``t.inverse()`` undoes ``t``."""
        return GaugeTransform(self.g_inv, self.g, -_mv(self.g_inv, self.alpha_x),
                              -_mv(self.g_inv, self.alpha_y))

    def then(self, other: "GaugeTransform") -> "GaugeTransform":
        """Apply ``self`` first, then ``other``: ``(g2 g1, alpha2 + g2 alpha1)``."""
        return GaugeTransform(_mm(other.g, self.g), _mm(self.g_inv, other.g_inv),
                              other.alpha_x + _mv(other.g, self.alpha_x),
                              other.alpha_y + _mv(other.g, self.alpha_y))


@dataclass(frozen=True)
class AnchoredSection:
    """``X = v^mu e_mu + f^a e~_a``; the anchor projects onto ``v``."""

    v: PolyField
    f: PolyField

    def __post_init__(self):
        if self.v.shape != (2,) or len(self.f.shape) != 1:
            raise ValueError("section needs v with slots [2] and f with slots [N]")


def gauge_apply_splitting(t: GaugeTransform, s: Splitting) -> Splitting:
    return Splitting(t.alpha_x + _mv(t.g, s.phi_x), t.alpha_y + _mv(t.g, s.phi_y))


def pullback_two_form(t: GaugeTransform, w: TwoForm) -> TwoForm:
    """2-form in the frame where the old splitting reads ``alpha + g phi'``.

    This is the componentwise rule

    ``C' = g^-1 C(g., g.)``,
    ``B'_mu = g^-1 (B_mu g + C(alpha_mu, g.) + d_mu g)``,
    ``A' = g^-1 (A + d_x alpha_y - d_y alpha_x + B_x alpha_y - B_y alpha_x
    + C(alpha_x, alpha_y))``,

    and satisfies ``d_w (alpha + g phi') = g d_w' phi'``.
    """
    g, gi = t.g, t.g_inv
    # C'[a,b,c] = gi[a,p] C[p,q,r] g[q,b] g[r,c]
    Cg = poly_mul(poly_mul(w.C, g, "pqr,qb->prb"), g, "prb,rc->pbc")
    C_new = poly_mul(gi, Cg, "ap,pbc->abc")
    B_new = []
    for mu in "xy":
        inner = _mm(w.B(mu), g) + poly_mul(poly_mul(w.C, t.alpha(mu), "pqr,q->pr"), g, "pr,rb->pb") \
            + poly_diff(g, mu)
        B_new.append(_mm(gi, inner))
    ax, ay = t.alpha_x, t.alpha_y
    inner = (w.A + poly_diff(ay, "x") - poly_diff(ax, "y") + _mv(w.B_x, ay) - _mv(w.B_y, ax)
             + _bilinear(w.C, ax, ay))
    A_new = _mv(gi, inner)
    # exact antisymmetry survives roundoff only after explicit symmetrization
    c = C_new.coeffs
    C_new = PolyField(0.5 * (c - np.swapaxes(c, 1, 2)), C_new.cap)
    return TwoForm(A_new, B_new[0], B_new[1], C_new)


def gauge_apply_two_form(t: GaugeTransform, w: TwoForm) -> TwoForm:
    """Transforms ``w`` along with ``phi -> alpha + g phi``.

    Covariance: ``d_{w'}(t.phi) = g d_w(phi)`` for every splitting ``phi``.
    """
    return pullback_two_form(t.inverse(), w)


def gauge_apply_section(t: GaugeTransform, X: AnchoredSection) -> AnchoredSection:
    """``v -> v``, ``f -> g f + alpha_mu v^mu``."""
    shift = poly_mul(t.alpha_x, X.v[0]) + poly_mul(t.alpha_y, X.v[1])
    return AnchoredSection(X.v, _mv(t.g, X.f) + shift)


def omega_exterior_derivative(w: TwoForm, s: Splitting) -> PolyField:
    """``(d_w phi)_xy = d_x phi_y - d_y phi_x + A + B_x phi_y - B_y phi_x + C(phi_x, phi_y)``."""
    return (poly_diff(s.phi_y, "x") - poly_diff(s.phi_x, "y") + w.A
            + _mv(w.B_x, s.phi_y) - _mv(w.B_y, s.phi_x) + _bilinear(w.C, s.phi_x, s.phi_y))


def _directional(v: PolyField, f: PolyField) -> PolyField:
    """``v^nu d_nu f`` for a vector field ``v`` (slots [2])."""
    return poly_mul(v[0], poly_diff(f, "x")) + poly_mul(v[1], poly_diff(f, "y"))


def lie_bracket(v: PolyField, u: PolyField) -> PolyField:
    """``[v, u]^mu = v^nu d_nu u^mu - u^nu d_nu v^mu``."""
    return _directional(v, u) - _directional(u, v)


def omega_bracket(w: TwoForm, X: AnchoredSection, Y: AnchoredSection) -> AnchoredSection:
    """Bracket of anchored sections extending the Lie bracket by ``w``."""
    omega = w.unified()
    cap = omega.cap
    x_full = PolyField(np.concatenate([X.v.coeffs, X.f.coeffs]), X.v.cap).with_cap(cap)
    y_full = PolyField(np.concatenate([Y.v.coeffs, Y.f.coeffs]), Y.v.cap).with_cap(cap)
    kernel = (_directional(X.v, Y.f) - _directional(Y.v, X.f)
              + poly_mul(poly_mul(omega, x_full, "aij,i->aj"), y_full, "aj,j->a"))
    return AnchoredSection(lie_bracket(X.v, Y.v), kernel)
