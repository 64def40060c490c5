"""Continuous Baker-Campbell-Hausdorff equation driven by a structure tensor.

For a path ``phi(t)`` in the algebra, ``Phi(t)`` is defined by
``d/dt exp(Phi) = phi(t) exp(Phi)`` (later times act on the left), which in
terms of brackets alone reads

    dPhi/dt = ad_Phi / (exp(ad_Phi) - 1) phi(t),   (ad_Phi X)^a = C^a_bc Phi^b X^c.

Only ``C`` enters, so the equation makes sense for tensors that violate the
Jacobi identity.  For genuine Lie algebras with trivial center the adjoint
representation gives an independent oracle through a matrix logarithm.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import logm

from .lie import StructureTensor, ad_matrix
from .transport import MatrixPath, path_ordered_exp

__all__ = [
    "BernoulliTable",
    "bernoulli_coeffs",
    "ad_apply",
    "ColorPath",
    "CBCHResult",
    "cbch_solve",
    "cbch_second_order",
    "OracleResult",
    "adjoint_log_oracle",
    "CenterNotTrivial",
    "LogBranch",
    "loop_path",
    "loop_commutator_experiment",
]

log = logging.getLogger(__name__)


class CenterNotTrivial(ValueError):
    """``Phi -> ad_Phi`` is not injective, so ``Phi`` cannot be read off ``log U``."""


class LogBranch(ArithmeticError):
    """The path is too long for the principal matrix logarithm to be trusted."""


@dataclass(frozen=True)
class BernoulliTable:
    """Taylor coefficients ``c_j`` of ``x / (e^x - 1)`` as exact fractions."""

    coeffs: tuple

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, j: int) -> Fraction:
        return self.coeffs[j]

    @property
    def floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])


def bernoulli_coeffs(M: int) -> BernoulliTable:
    """``c_0 .. c_M`` from ``sum_{j<=n} c_j / (n + 1 - j)! = [n == 0]``."""
    if M < 0:
        raise ValueError("M must be non-negative")
    # multiply through by (n+1)!: sum_j binom(n+1, j) j! c_j = (n+1)! [n == 0]
    B: list[Fraction] = []          # B_j = j! c_j, the Bernoulli numbers
    for n in range(M + 1):
        if n == 0:
            B.append(Fraction(1))
            continue
        s = sum(comb(n + 1, j) * B[j] for j in range(n))
        B.append(-s / (n + 1))
    fact = 1
    c = []
    for j, b in enumerate(B):
        fact = fact * j if j else 1
        c.append(b / fact)
    return BernoulliTable(tuple(c))


def ad_apply(C, Phi, X) -> np.ndarray:
    """``(ad_Phi X)^a = C^a_bc Phi^b X^c``."""
    C = C.C if isinstance(C, StructureTensor) else np.asarray(C)
    return np.einsum("abc,b,c->a", C, Phi, X)


@dataclass(frozen=True)
class ColorPath:
    """Algebra-valued function on ``[0, T]``.

    Polynomial (``coeffs[k]`` multiplies ``t**k``) or piecewise constant
    (``values[i]`` on ``[breaks[i], breaks[i+1])``).
    """

    T: float
    coeffs: np.ndarray | None = None
    breaks: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("path length must be positive")
        if (self.coeffs is None) == (self.values is None):
            raise ValueError("give either polynomial coefficients or piecewise values")

    @classmethod
    def polynomial(cls, coeffs, T: float = 1.0) -> "ColorPath":
        return cls(float(T), coeffs=np.atleast_2d(np.asarray(coeffs, float)))

    @classmethod
    def piecewise(cls, breaks, values) -> "ColorPath":
        breaks = np.asarray(breaks, float)
        values = np.asarray(values, float)
        if breaks[0] != 0 or np.any(np.diff(breaks) <= 0) or len(breaks) != len(values) + 1:
            raise ValueError("breaks must increase from 0, one more than values")
        return cls(float(breaks[-1]), breaks=breaks, values=values)

    @property
    def N(self) -> int:
        return (self.coeffs if self.coeffs is not None else self.values).shape[-1]

    @property
    def segments(self) -> list[tuple[float, float]]:
        if self.coeffs is not None:
            return [(0.0, self.T)]
        return list(zip(self.breaks[:-1], self.breaks[1:]))

    def __call__(self, t: float, segment: int | None = None) -> np.ndarray:
        if self.coeffs is not None:
            return (float(t) ** np.arange(len(self.coeffs))) @ self.coeffs
        if segment is None:
            segment = int(np.clip(np.searchsorted(self.breaks, t, side="right") - 1,
                                  0, len(self.values) - 1))
        return self.values[segment]

    def integral(self, t: float | None = None) -> np.ndarray:
        """Exact ``int_0^t phi``."""
        t = self.T if t is None else float(t)
        if self.coeffs is not None:
            k = np.arange(len(self.coeffs))
            return (t ** (k + 1) / (k + 1)) @ self.coeffs
        lengths = np.clip(np.minimum(self.breaks[1:], t) - self.breaks[:-1], 0, None)
        return lengths @ self.values

    def sup_norm(self, samples: int = 201) -> float:
        if self.coeffs is None:
            return float(np.linalg.norm(self.values, axis=1).max())
        ts = np.linspace(0, self.T, samples)
        return float(max(np.linalg.norm(self(t)) for t in ts))

    def reversed(self) -> "ColorPath":
        """``-phi(T - t)``: the same curve traversed backwards."""
        if self.coeffs is not None:
            # coefficients of -phi(T - t) in powers of t
            K = len(self.coeffs)
            out = np.zeros_like(self.coeffs)
            for k in range(K):
                for j in range(k + 1):
                    out[j] -= comb(k, j) * self.T ** (k - j) * (-1) ** j * self.coeffs[k]
            return ColorPath(self.T, coeffs=out)
        return ColorPath.piecewise(self.T - self.breaks[::-1], -self.values[::-1])

    def ad_path(self, C) -> MatrixPath:
        """``t -> ad_{phi(t)}`` as a matrix path."""
        C = C.C if isinstance(C, StructureTensor) else np.asarray(C)
        if self.coeffs is not None:
            return MatrixPath.polynomial([ad_matrix(C, c) for c in self.coeffs], 0.0, self.T)
        return MatrixPath.piecewise(self.breaks, [ad_matrix(C, v) for v in self.values])


@dataclass
class CBCHResult:
    t: np.ndarray      # grid, shape (n + 1,)
    Phi: np.ndarray    # values, shape (n + 1, N)

    @property
    def final(self) -> np.ndarray:
        return self.Phi[-1]


def _series_rhs(C: np.ndarray, c: np.ndarray, Phi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    ad = ad_matrix(C, Phi)
    term = phi
    out = c[0] * phi
    for cj in c[1:]:
        term = ad @ term
        if cj:
            out = out + cj * term
    return out


def cbch_solve(path: ColorPath, C, M: int = 8, steps: int = 1000) -> CBCHResult:
    """RK4 for ``dPhi/dt = sum_{j<=M} c_j ad_Phi^j phi(t)``, ``Phi(0) = 0``.

    ``steps`` is the total step count, split across the segments of a
    piecewise path in proportion to their lengths.
    """
    if steps < 1 or M < 0:
        raise ValueError("need steps >= 1 and M >= 0")
    C = C.C if isinstance(C, StructureTensor) else np.asarray(C, float)
    c = bernoulli_coeffs(M).floats
    Phi = np.zeros(path.N)
    ts, out = [0.0], [Phi]
    for s, (lo, hi) in enumerate(path.segments):
        n = max(1, int(round(steps * (hi - lo) / path.T)))
        h = (hi - lo) / n
        seg = s if path.coeffs is None else None
        f = lambda t, P: _series_rhs(C, c, P, path(t, seg))  # noqa: E731
        for i in range(n):
            t = lo + i * h
            k1 = f(t, Phi)
            k2 = f(t + h / 2, Phi + h / 2 * k1)
            k3 = f(t + h / 2, Phi + h / 2 * k2)
            k4 = f(t + h, Phi + h * k3)
            Phi = Phi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            ts.append(t + h)
            out.append(Phi)
    return CBCHResult(np.array(ts), np.array(out))


def cbch_second_order(path: ColorPath, C) -> np.ndarray:
    """``int phi - (1/2) int_0^T ad_{Phi_1(tau)} phi(tau) dtau`` with ``Phi_1 = int_0^tau phi``.

    The first re-iteration of the integral equation; equals
    ``int phi + (1/2) int int_{t1 < t2} [phi(t2), phi(t1)]``.  Integrals are
    evaluated by Gauss-Legendre rules that are exact for the path type.
    """
    C = C.C if isinstance(C, StructureTensor) else np.asarray(C, float)
    deg = 2 * len(path.coeffs) if path.coeffs is not None else 2
    x, wts = np.polynomial.legendre.leggauss(deg // 2 + 2)
    total = np.zeros(path.N)
    for s, (lo, hi) in enumerate(path.segments):
        seg = s if path.coeffs is None else None
        for xi, wi in zip(x, wts):
            tau = lo + 0.5 * (hi - lo) * (xi + 1)
            total += 0.5 * (hi - lo) * wi * ad_apply(C, path.integral(tau), path(tau, seg))
    return path.integral() - 0.5 * total


@dataclass
class OracleResult:
    Phi: np.ndarray
    residual: float
    log_norm: float


def _real_log(U: np.ndarray) -> np.ndarray:
    try:
        L = logm(U)
        if np.all(np.isfinite(L)) and np.abs(np.imag(L)).max() < 1e-9:
            return np.real(L)
    except (ValueError, np.linalg.LinAlgError):
        pass
    # eigen-decomposition fallback for the principal branch
    lam, V = np.linalg.eig(U)
    L = V @ np.diag(np.log(lam.astype(complex))) @ np.linalg.inv(V)
    return np.real(L)


def _ad_length(path: ColorPath, C: np.ndarray, samples: int = 201) -> float:
    """``int_0^T |ad_phi(t)|_2 dt`` (trapezoid rule on polynomial paths)."""
    if path.coeffs is None:
        return float(sum((hi - lo) * np.linalg.norm(ad_matrix(C, v), 2)
                         for (lo, hi), v in zip(path.segments, path.values)))
    ts = np.linspace(0.0, path.T, samples)
    norms = [np.linalg.norm(ad_matrix(C, path(t)), 2) for t in ts]
    return float(trapezoid(norms, ts))


def adjoint_log_oracle(path: ColorPath, C, steps: int = 1000) -> OracleResult:
    """``Phi`` with ``exp(ad_Phi) = P exp int ad_phi``, from the principal matrix log."""
    S = C if isinstance(C, StructureTensor) else StructureTensor(np.asarray(C, float))
    if S.center_rank_deficit():
        raise CenterNotTrivial(f"{S.name or 'structure tensor'} has a nontrivial center")
    # int |ad_phi| < pi keeps the true logarithm on the principal branch
    total = _ad_length(path, S.C)
    if total >= np.pi:
        raise LogBranch(f"path length {total:.3f} in the adjoint norm reaches pi")
    U = path_ordered_exp(path.ad_path(S.C), steps)
    L = _real_log(U)
    norm = float(np.linalg.norm(L, 2))
    if norm >= np.pi:
        raise LogBranch(f"|log U| = {norm:.3f} is outside the principal-branch guard")
    N = S.N
    K = S.C.transpose(0, 2, 1).reshape(N * N, N)
    Phi, *_ = np.linalg.lstsq(K, L.ravel(), rcond=None)
    residual = float(np.abs(K @ Phi - L.ravel()).max())
    return OracleResult(Phi, residual, norm)


def loop_path(phi_x, phi_y, h: float, orientation: str = "clockwise") -> ColorPath:
    """Constant splitting contracted with the tangent of the square ``[0, h]^2``.

    Clockwise starts up the ``y`` edge; counterclockwise starts along ``x``.
    Each edge takes time ``h``.
    """
    px, py = np.asarray(phi_x, float), np.asarray(phi_y, float)
    if orientation == "clockwise":
        vals = [py, px, -py, -px]
    elif orientation == "counterclockwise":
        vals = [px, py, -px, -py]
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    return ColorPath.piecewise(h * np.arange(5), vals)


def loop_commutator_experiment(phi_x, phi_y, C, h: float, steps: int = 1000, M: int = 8,
                               orientation: str = "clockwise"):
    """``Phi`` of the square loop of side ``h`` and its predicted leading term.

    With later times acting on the left, the clockwise loop gives
    ``Phi = C(phi_x, phi_y) h^2 + O(h^3)``; the counterclockwise one the negative.
    """
    path = loop_path(phi_x, phi_y, h, orientation)
    Phi = cbch_solve(path, C, M, steps).final
    sign = 1.0 if orientation == "clockwise" else -1.0
    leading = sign * ad_apply(C, phi_x, phi_y) * h * h
    return Phi, leading
