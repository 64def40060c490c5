"""Path-ordered exponentials and transport of splittings across a strip."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .algebra import TwoForm
from .poly import PolyField

__all__ = [
    "MatrixPath",
    "path_ordered_exp",
    "one_dim_obstruction",
    "StraightenedStrip",
    "TransportResult",
    "TruncationError",
    "transport_splitting",
    "abelian_transport_oracle",
    "conjugation_oracle",
]


class TruncationError(ArithmeticError):
    """A product discarded a coefficient above the configured threshold."""


@dataclass(frozen=True)
class MatrixPath:
    """Matrix-valued function on ``[t0, t1]``.

    Either ``coeffs[k]`` gives the ``t**k`` coefficient matrix, or the path is
    piecewise constant with ``values[i]`` on ``[breaks[i], breaks[i+1])``.
    """

    t0: float
    t1: float
    coeffs: np.ndarray | None = None
    breaks: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError("path interval must be nonempty")
        if (self.coeffs is None) == (self.values is None):
            raise ValueError("give either polynomial coefficients or piecewise values")
        if self.values is not None:
            b = np.asarray(self.breaks, float)
            if len(b) != len(self.values) + 1 or b[0] != self.t0 or b[-1] != self.t1 \
                    or np.any(np.diff(b) <= 0):
                raise ValueError("breaks must increase from t0 to t1, one more than values")

    @classmethod
    def polynomial(cls, coeffs, t0: float = 0.0, t1: float = 1.0) -> "MatrixPath":
        return cls(t0, t1, coeffs=np.asarray(coeffs, float))

    @classmethod
    def constant(cls, M, t0: float = 0.0, t1: float = 1.0) -> "MatrixPath":
        return cls(t0, t1, coeffs=np.asarray(M, float)[None])

    @classmethod
    def piecewise(cls, breaks, values) -> "MatrixPath":
        breaks = np.asarray(breaks, float)
        return cls(float(breaks[0]), float(breaks[-1]), breaks=breaks,
                   values=np.asarray(values, float))

    @property
    def dim(self) -> int:
        m = self.coeffs if self.coeffs is not None else self.values
        return m.shape[-1]

    def __call__(self, t: float) -> np.ndarray:
        if self.coeffs is not None:
            return np.einsum("kij,k->ij", self.coeffs, float(t) ** np.arange(len(self.coeffs)))
        i = np.searchsorted(self.breaks, t, side="right") - 1
        return self.values[min(max(i, 0), len(self.values) - 1)]

    def restrict(self, t0: float, t1: float) -> "MatrixPath":
        if self.coeffs is not None:
            return MatrixPath(t0, t1, coeffs=self.coeffs)
        b = self.breaks
        inner = b[(b > t0) & (b < t1)]
        breaks = np.concatenate([[t0], inner, [t1]])
        values = [self(0.5 * (lo + hi)) for lo, hi in zip(breaks[:-1], breaks[1:])]
        return MatrixPath.piecewise(breaks, values)


def _rk4_linear(f, U, t, h):
    k1 = f(t, U)
    k2 = f(t + h / 2, U + h / 2 * k1)
    k3 = f(t + h / 2, U + h / 2 * k2)
    k4 = f(t + h, U + h * k3)
    return U + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def path_ordered_exp(p: MatrixPath, steps: int) -> np.ndarray:
    """``U(t1)`` for ``U' = A(t) U``, ``U(t0) = I`` (later times on the left), by RK4.

    Piecewise-constant paths get a grid aligned with their breaks.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    U = np.eye(p.dim)
    if p.coeffs is not None:
        h = (p.t1 - p.t0) / steps
        f = lambda t, U: p(t) @ U  # noqa: E731
        for i in range(steps):
            U = _rk4_linear(f, U, p.t0 + i * h, h)
        return U
    total = p.t1 - p.t0
    for lo, hi, M in zip(p.breaks[:-1], p.breaks[1:], p.values):
        n = max(1, int(round(steps * (hi - lo) / total)))
        h = (hi - lo) / n
        f = lambda t, U, M=M: M @ U  # noqa: E731
        for i in range(n):
            U = _rk4_linear(f, U, lo + i * h, h)
    return U


def one_dim_obstruction(p: MatrixPath, u, v, steps: int) -> np.ndarray:
    """``v - (P exp int A) u``: zero exactly when ``v`` is the transport of ``u``."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    if u.shape != (p.dim,) or v.shape != (p.dim,):
        raise ValueError("vector dimensions do not match the path")
    return v - path_ordered_exp(p, steps) @ u


@dataclass(frozen=True)
class StraightenedStrip:
    """The strip ``x in [0, 1]``, ``y in [y0, y1]`` with ``phi_y`` prescribed.

    ``initial`` holds ``phi_x(x, y0)`` as x-coefficients ``[N, deg + 1]`` or as a
    polynomial field whose ``y``-dependence is ignored.
    """

    omega: TwoForm
    transporter: PolyField
    initial: np.ndarray
    y1: float = 1.0
    y0: float = 0.0

    def __post_init__(self):
        N = self.omega.N
        init = self.initial
        if isinstance(init, PolyField):
            init = init.coeffs[..., :, 0]
        init = np.array(init, float)
        if init.ndim != 2 or init.shape[0] != N or self.transporter.shape != (N,):
            raise ValueError("transporter and initial data must have one slot of size N")
        object.__setattr__(self, "initial", init)

    @property
    def N(self) -> int:
        return self.omega.N


@dataclass
class TransportResult:
    y: np.ndarray          # grid, shape (steps + 1,)
    slices: np.ndarray     # phi_x x-coefficients, shape (steps + 1, N, x_cap + 1)
    max_dropped: float

    def slice_field(self, j: int) -> PolyField:
        """Slice ``j`` as a polynomial field constant in ``y``."""
        c = self.slices[j]
        D = c.shape[-1] - 1
        out = np.zeros(c.shape[:-1] + (D + 1, D + 1))
        out[..., :, 0] = c
        return PolyField(out, D)

    def evaluate(self, x: float, j: int = -1) -> np.ndarray:
        c = self.slices[j]
        return c @ (float(x) ** np.arange(c.shape[-1]))


@lru_cache(maxsize=None)
def _conv_tensor(da: int, db: int) -> np.ndarray:
    """``S[i, j, m] = [i + j == m]`` for degrees ``< da``, ``< db`` and any ``m``."""
    S = np.zeros((da, db, da + db - 1))
    i, j = np.indices((da, db))
    S[i, j, i + j] = 1.0
    return S


def _mul_x(a: np.ndarray, b: np.ndarray, subscripts: str, cap: int) -> tuple[np.ndarray, float]:
    """Product of x-polynomials with slot contraction, truncated at ``cap``."""
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    S = _conv_tensor(a.shape[-1], b.shape[-1])
    full = np.einsum(f"{sa}i,{sb}j,ijm->{out}m", a, b, S)
    lost = full[..., cap + 1:]
    return _fit(full, cap), float(np.abs(lost).max()) if lost.size else 0.0


def _fit(c: np.ndarray, cap: int) -> np.ndarray:
    if c.shape[-1] >= cap + 1:
        return c[..., : cap + 1]
    out = np.zeros(c.shape[:-1] + (cap + 1,))
    out[..., : c.shape[-1]] = c
    return out


def _dx(c: np.ndarray) -> np.ndarray:
    out = np.zeros_like(c)
    out[..., :-1] = c[..., 1:] * np.arange(1, c.shape[-1])
    return out


def transport_splitting(strip: StraightenedStrip, x_cap: int, y_steps: int,
                        loss_threshold: float | None = None) -> TransportResult:
    """Integrates ``d_y phi_x = d_x phi_y + A + B_x phi_y - B_y phi_x + C(phi_x, phi_y)``.

    ``phi_x`` is kept as a polynomial in ``x`` of degree ``<= x_cap`` and
    stepped in ``y`` with classical RK4.  ``max_dropped`` records the largest
    coefficient discarded by truncation, including input fields whose
    ``x``-degree exceeds the cap.
    """
    if y_steps < 1:
        raise ValueError("y_steps must be positive")
    w, phi_y = strip.omega, strip.transporter
    dropped = [0.0]

    def restrict(f: PolyField, y: float) -> np.ndarray:
        c = f.restrict_y(y)
        if c.shape[-1] > x_cap + 1:
            tail = c[..., x_cap + 1:]
            dropped[0] = max(dropped[0], float(np.abs(tail).max()))
        return _fit(c, x_cap)

    cache: dict[float, tuple] = {}

    def frozen(y: float):
        # everything in the right-hand side that does not involve phi_x
        if y not in cache:
            py = restrict(phi_y, y)
            Bx, By, C = restrict(w.B_x, y), restrict(w.B_y, y), restrict(w.C, y)
            Bpy, l1 = _mul_x(Bx, py, "ab,b->a", x_cap)
            Cpy, l2 = _mul_x(C, py, "abc,c->ab", x_cap)
            dropped[0] = max(dropped[0], l1, l2)
            src = _dx(py) + restrict(w.A, y) + Bpy
            cache[y] = (src, Cpy - By)
        return cache[y]

    def rhs(y: float, phi: np.ndarray) -> np.ndarray:
        src, lin = frozen(y)
        term, loss = _mul_x(lin, phi, "ab,b->a", x_cap)
        dropped[0] = max(dropped[0], loss)
        return src + term

    h = (strip.y1 - strip.y0) / y_steps
    ys = strip.y0 + h * np.arange(y_steps + 1)
    phi = _fit(strip.initial, x_cap)
    out = [phi]
    for j in range(y_steps):
        phi = _rk4_linear(rhs, phi, ys[j], h)
        out.append(phi)
        cache.clear()
    if loss_threshold is not None and dropped[0] > loss_threshold:
        raise TruncationError(f"discarded coefficient {dropped[0]:.3g} exceeds {loss_threshold:.3g}")
    return TransportResult(ys, np.array(out), dropped[0])


def _integrate_y(f: PolyField, y: float) -> np.ndarray:
    """x-coefficients of ``int_0^y f(x, Y) dY``."""
    j = np.arange(f.cap + 1)
    return f.coeffs @ (y ** (j + 1) / (j + 1))


def abelian_transport_oracle(A: PolyField, transporter: PolyField, initial, y: float) -> np.ndarray:
    """``phi_x(x, 0) + int_0^y A dY + d_x int_0^y phi_y dY`` as x-coefficients.

    All three fields carry a single slot of size 1 (or none); the result has
    shape ``(1, D + 1)`` with ``D`` the largest cap involved.
    """
    A = A if not A.shape else A[0]
    transporter = transporter if not transporter.shape else transporter[0]
    init = initial.coeffs[..., :, 0] if isinstance(initial, PolyField) else np.asarray(initial, float)
    init = init.reshape(-1)
    D = max(A.cap, transporter.cap, len(init) - 1)
    total = _fit(init, D) + _fit(_integrate_y(A, y), D) + _fit(_dx(_integrate_y(transporter, y)), D)
    return total[None]


def conjugation_oracle(M, Phi0, y: float) -> np.ndarray:
    """``e^{-M y} Phi0 e^{M y}``: solves ``d_y Phi = [Phi, M]`` for constant ``M``."""
    M = np.asarray(M, float)
    return expm(-M * y) @ np.asarray(Phi0, float) @ expm(M * y)
