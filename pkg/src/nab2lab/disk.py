"""Order-by-order extension of boundary data into the unit disk.

Given ``omega`` and the angular component of a splitting on the unit circle,
the solver looks for ``(phi_r, phi_theta)`` with ``d_omega phi = 0`` in the
Fourier-Taylor ansatz

* ``phi_theta(n; k) = 0`` for ``n != 0, k > 0`` and ``phi_theta(n; 0)`` equal to
  the boundary mode,
* ``phi_r(0; k) = 0``,

solving for ``phi_r(n != 0; k)`` and ``phi_theta(0; k >= 1)`` level by level in
``k``.  The leftover ``phi_theta(0; 0)``, the coefficient of a non-smooth
``r^0`` angular term, is the obstruction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm_frechet

from .algebra import TwoForm
from .fourier_taylor import FourierTaylorField, cartesian_to_ft, ft_mul, product_table

__all__ = [
    "BoundaryFourier",
    "DiskTwoFormFT",
    "ExtensionSolution",
    "SmoothnessReport",
    "SingularLevel",
    "NoConvergence",
    "solve_extension",
    "obstruction_cartesian",
    "smoothness_report",
    "abelian_obstruction",
    "pure_gauge_boundary",
]

log = logging.getLogger(__name__)


class SingularLevel(ArithmeticError):
    def __init__(self, k: int, cond: float):
        super().__init__(f"level {k} system is numerically singular (cond {cond:.3g})")
        self.k = k
        self.cond = cond


class NoConvergence(ArithmeticError):
    """The ``phi_theta(0; 0)`` fixed point did not settle within ``fp_max`` sweeps."""


@dataclass(frozen=True)
class BoundaryFourier:
    """Modes of the angular component on the circle; ``modes[n + n_max, a]``."""

    modes: np.ndarray
    n_max: int

    def __post_init__(self):
        m = np.array(self.modes, dtype=complex)
        if m.ndim != 2 or m.shape[0] != 2 * self.n_max + 1:
            raise ValueError(f"expected {2 * self.n_max + 1} mode rows, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "modes", m)

    @property
    def N(self) -> int:
        return self.modes.shape[1]

    @classmethod
    def zeros(cls, N: int, n_max: int) -> "BoundaryFourier":
        return cls(np.zeros((2 * n_max + 1, N), complex), n_max)

    @classmethod
    def from_modes(cls, modes: dict, N: int, n_max: int) -> "BoundaryFourier":
        """From ``{n: vector}`` for ``n >= 0``; negative modes are mirrored."""
        m = np.zeros((2 * n_max + 1, N), complex)
        for n, v in modes.items():
            v = np.asarray(v, dtype=complex)
            if abs(n) > n_max:
                raise ValueError(f"mode {n} exceeds n_max = {n_max}")
            m[n + n_max] = v
            if n != 0:
                m[-n + n_max] = v.conj()
            elif np.any(np.abs(v.imag) > 0):
                raise ValueError("mode 0 must be real")
        return cls(m, n_max)

    @classmethod
    def from_samples(cls, values, n_max: int) -> "BoundaryFourier":
        """From ``values[j, a]`` at ``theta_j = 2 pi j / M`` (``M > 2 n_max``)."""
        values = np.asarray(values)
        M = values.shape[0]
        if M <= 2 * n_max:
            raise ValueError("too few samples for the requested harmonics")
        F = np.fft.fft(values, axis=0) / M
        idx = np.arange(-n_max, n_max + 1) % M
        return cls(F[idx], n_max)

    @classmethod
    def from_function(cls, func, n_max: int, samples: int | None = None) -> "BoundaryFourier":
        """Samples ``func(theta) -> vector`` uniformly and keeps ``|n| <= n_max``."""
        M = samples or max(4 * n_max, 64)
        theta = 2 * np.pi * np.arange(M) / M
        return cls.from_samples(np.array([func(t) for t in theta]), n_max)

    def with_n_max(self, n_max: int) -> "BoundaryFourier":
        m = np.zeros((2 * n_max + 1, self.N), complex)
        n = min(n_max, self.n_max)
        m[n_max - n: n_max + n + 1] = self.modes[self.n_max - n: self.n_max + n + 1]
        return BoundaryFourier(m, n_max)

    def mode(self, n: int) -> np.ndarray:
        if abs(n) > self.n_max:
            return np.zeros(self.N, complex)
        return self.modes[n + self.n_max]

    def evaluate(self, theta: float) -> np.ndarray:
        n = np.arange(-self.n_max, self.n_max + 1)
        return np.exp(1j * n * theta) @ self.modes


@dataclass(frozen=True)
class DiskTwoFormFT:
    A_rtheta: FourierTaylorField
    B_r: FourierTaylorField
    B_theta: FourierTaylorField
    C: FourierTaylorField

    def __post_init__(self):
        N = self.A_rtheta.slots[0]
        expect = ((self.A_rtheta, 1, (N,)), (self.B_r, -1, (N, N)),
                  (self.B_theta, 0, (N, N)), (self.C, 0, (N, N, N)))
        cut = (self.A_rtheta.n_max, self.A_rtheta.k_max)
        for f, sigma, slots in expect:
            if f.sigma != sigma or f.slots != slots:
                raise ValueError("DiskTwoFormFT field has the wrong offset or slots")
            if (f.n_max, f.k_max) != cut:
                raise ValueError("DiskTwoFormFT fields must share cutoffs")
        if np.abs(self.B_r.coef(0, 0)).max() > 1e-12:
            raise ValueError("B_r has a non-smooth (0;0) coefficient")
        c = self.C.coeffs
        if np.abs(c + np.swapaxes(c, 1, 2)).max() > 1e-12:
            raise ValueError("C is not antisymmetric in its lower slots")

    @property
    def N(self) -> int:
        return self.A_rtheta.slots[0]

    @property
    def n_max(self) -> int:
        return self.A_rtheta.n_max

    @property
    def k_max(self) -> int:
        return self.A_rtheta.k_max

    @classmethod
    def from_two_form(cls, w: TwoForm, n_max: int, k_max: int) -> "DiskTwoFormFT":
        A = cartesian_to_ft(w.A, "area", n_max, k_max)
        B_r, B_theta = cartesian_to_ft((w.B_x, w.B_y), "form", n_max, k_max)
        C = cartesian_to_ft(w.C, "scalar", n_max, k_max)
        return cls(A, B_r, B_theta, C)

    def has_feedback(self) -> bool:
        """Whether ``phi_theta(0; 0)`` enters the level equations."""
        return self.B_r.max_abs() > 0 or self.C.max_abs() > 0


@dataclass
class ExtensionSolution:
    phi_r: FourierTaylorField
    phi_theta: FourierTaylorField
    obstruction: np.ndarray
    iterations: int
    residual: float
    imag_defect: float = 0.0
    history: list = field(default_factory=list)


def _equation(w: DiskTwoFormFT, phi_r: FourierTaylorField, phi_t: FourierTaylorField) -> np.ndarray:
    """Components ``[a, n, k]`` of ``d_omega phi`` in the ``sigma = -1`` grid."""
    n_max, k_max = w.n_max, w.k_max
    n = np.arange(-n_max, n_max + 1)[:, None]
    k = np.arange(k_max + 1)[None, :]
    E = phi_t.coeffs * (np.abs(n) + 2 * k) - 1j * n * phi_r.coeffs
    E[..., :, 1:] += w.A_rtheta.coeffs[..., :, :-1]
    E += ft_mul(w.B_r, phi_t, "ab,b->a").coeffs
    E -= ft_mul(w.B_theta, phi_r, "ab,b->a").coeffs
    C_t = ft_mul(w.C, phi_t, "abc,c->ab", n_max=2 * n_max)
    E += ft_mul(C_t, phi_r, "ab,b->a", n_max=n_max, k_max=k_max).coeffs
    return E


def _jacobian_block(M: FourierTaylorField, x_sigma: int, x_n: np.ndarray, k: int,
                    n_max: int, k_max: int) -> np.ndarray:
    """Derivative of level-``k`` components of ``M x`` w.r.t. ``x(x_n; k)``.

    Returns ``J[row_n, col, a, b]`` where ``row_n`` runs over all harmonics.
    """
    N = M.slots[0]
    shift = (M.sigma + x_sigma + 1) // 2
    tab = product_table(M.n_max, M.k_max, n_max, k_max, n_max, k_max, shift)
    x_pos = (x_n + n_max) * (k_max + 1) + k
    col_of = {int(p): i for i, p in enumerate(x_pos)}
    sel = (tab.level_out == k) & np.isin(tab.p2, x_pos)
    J = np.zeros((2 * n_max + 1, len(x_n), N, N), complex)
    if not sel.any():
        return J
    rows = tab.pout[sel] // (k_max + 1)
    cols = np.array([col_of[int(p)] for p in tab.p2[sel]])
    blocks = M.coeffs.reshape(N, N, -1)[:, :, tab.p1[sel]].transpose(2, 0, 1)
    np.add.at(J, (rows, cols), blocks)
    return J


def _level_system(w: DiskTwoFormFT, phi_r, phi_t, k: int):
    """Matrix of the level-``k`` equations in the level-``k`` unknowns."""
    n_max, k_max, N = w.n_max, w.k_max, w.N
    n_all = np.arange(-n_max, n_max + 1)
    r_n = n_all[n_all != 0]
    C_t = ft_mul(w.C, phi_t, "abc,c->ab", n_max=2 * n_max)
    C_r = ft_mul(w.C, phi_r, "abc,b->ac", n_max=2 * n_max)
    J_r = _jacobian_block(C_t, -1, r_n, k, n_max, k_max) \
        - _jacobian_block(w.B_theta, -1, r_n, k, n_max, k_max)
    eye = np.eye(N)
    for i, nn in enumerate(r_n):
        J_r[nn + n_max, i] += -1j * nn * eye
    if k >= 1:
        # the phi_theta(0; k) column sits at n = 0 so that the diagonal lines up
        zero = np.array([0])
        J_t = _jacobian_block(w.B_r, 0, zero, k, n_max, k_max) \
            + _jacobian_block(C_r, 0, zero, k, n_max, k_max)
        J_t[n_max, 0] += 2 * k * eye
        J = np.concatenate([J_r[:, :n_max], J_t, J_r[:, n_max:]], axis=1)
        rows = n_all
    else:
        J = J_r[r_n + n_max]
        rows = r_n
    return J.transpose(0, 2, 1, 3).reshape(len(rows) * N, -1), rows


def _solve_level(J: np.ndarray, rhs: np.ndarray, k: int, method: str) -> np.ndarray:
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > 1e13:
        raise SingularLevel(k, cond)
    if method == "dense":
        return np.linalg.solve(J, rhs)
    if method == "neumann":
        # Jacobi sweeps around the diagonal: the expansion in powers of omega
        d = np.diag(J).copy()
        if np.any(d == 0):
            raise SingularLevel(k, np.inf)
        off = J - np.diag(d)
        u = rhs / d
        for _ in range(500):
            u_new = (rhs - off @ u) / d
            if np.abs(u_new - u).max() <= 1e-15 * max(1.0, np.abs(u_new).max()):
                return u_new
            u = u_new
        raise NoConvergence(f"Neumann sweeps at level {k} did not converge")
    raise ValueError(f"unknown method {method!r}")


def solve_extension(w: DiskTwoFormFT, boundary: BoundaryFourier, fp_tol: float = 1e-12,
                    fp_max: int = 100, method: str = "dense") -> ExtensionSolution:
    """Solves ``d_omega phi = 0`` level by level and returns the obstruction.

    ``method`` is ``"dense"`` (one linear solve per level) or ``"neumann"``
    (diagonal-dominant iteration, useful as a cross-check for small ``omega``).
    """
    if fp_tol <= 0:
        raise ValueError("fp_tol must be positive")
    if boundary.N != w.N:
        raise ValueError(f"boundary has {boundary.N} colors, omega has {w.N}")
    n_max, k_max, N = w.n_max, w.k_max, w.N
    bnd = boundary.with_n_max(n_max).modes          # [n, a]
    Pr = np.zeros((N, 2 * n_max + 1, k_max + 1), complex)
    Pt = np.zeros_like(Pr)
    Pt[:, :, 0] = bnd.T
    guess = bnd[n_max].copy()
    feedback = w.has_feedback()
    history = []

    for it in range(1, fp_max + 1):
        Pt[:, n_max, :] = 0.0
        Pt[:, n_max, 0] = guess
        Pr[:] = 0.0
        for k in range(k_max + 1):
            phi_r = FourierTaylorField(Pr, -1, n_max, k_max)
            phi_t = FourierTaylorField(Pt, 0, n_max, k_max)
            J, rows = _level_system(w, phi_r, phi_t, k)
            E0 = _equation(w, phi_r, phi_t)[:, rows + n_max, k]      # [a, row]
            u = _solve_level(J, -E0.T.ravel(), k, method).reshape(len(rows), N)
            nz = rows != 0
            Pr[:, rows[nz] + n_max, k] = u[nz].T
            if k >= 1:
                Pt[:, n_max, k] = u[~nz][0]
        new = bnd[n_max] - Pt[:, n_max, 1:].sum(axis=1)
        change = float(np.abs(new - guess).max())
        history.append(change)
        log.debug("fixed point sweep %d: change %.3g", it, change)
        Pt[:, n_max, 0] = new
        if not feedback or change <= fp_tol:
            break
        guess = new
    else:
        raise NoConvergence(f"fixed point change {change:.3g} after {fp_max} sweeps")

    phi_r = FourierTaylorField(Pr, -1, n_max, k_max)
    phi_t = FourierTaylorField(Pt, 0, n_max, k_max)
    E = _equation(w, phi_r, phi_t)
    if np.abs(E[:, n_max, 0]).max() > 1e-10:
        raise ValueError("the (0;0) component does not vanish identically; omega is not smooth")
    obstruction = Pt[:, n_max, 0]
    return ExtensionSolution(phi_r, phi_t, obstruction.real.copy(), it, float(np.abs(E).max()),
                             float(np.abs(obstruction.imag).max()), history)


def obstruction_cartesian(w: TwoForm, boundary: BoundaryFourier, n_max: int, k_max: int,
                          fp_tol: float = 1e-12, fp_max: int = 100) -> np.ndarray:
    """Obstruction of a polynomial 2-form with the given boundary data."""
    wf = DiskTwoFormFT.from_two_form(w, n_max, k_max)
    return solve_extension(wf, boundary, fp_tol, fp_max).obstruction


@dataclass(frozen=True)
class SmoothnessReport:
    violations: list  # (field, n, k, magnitude)
    obstruction_norm: float

    @property
    def smooth(self) -> bool:
        return not self.violations


def smoothness_report(sol: ExtensionSolution, tol: float = 1e-12) -> SmoothnessReport:
    """Lists non-smooth coefficients: ``sigma = -1`` or ``0`` terms with ``r^-1``/``r^0`` at ``n = 0``."""
    violations = []
    mag_r = float(np.linalg.norm(sol.phi_r.coef(0, 0)))
    if mag_r > tol:
        violations.append(("phi_r", 0, 0, mag_r))
    mag_t = float(np.linalg.norm(sol.phi_theta.coef(0, 0)))
    if mag_t > tol:
        violations.append(("phi_theta", 0, 0, mag_t))
    return SmoothnessReport(violations, mag_t)


def abelian_obstruction(A, boundary: BoundaryFourier, n_r: int = 40, n_theta: int = 128) -> float:
    """``(1/2 pi)(loop integral of the boundary + area integral of A)`` by quadrature.

    ``A`` is a single-slot polynomial field or a vectorized callable
    ``(x, y) -> values``.  Gauss-Legendre in ``r``, trapezoid rule in ``theta``.
    """
    from .poly import PolyField

    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (xr + 1)
    wr = 0.5 * wr
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    X = r[:, None] * np.cos(theta)[None, :]
    Y = r[:, None] * np.sin(theta)[None, :]
    if isinstance(A, PolyField):
        c = A.coeffs.reshape(-1, A.cap + 1, A.cap + 1)[0]
        p = np.arange(A.cap + 1)
        vals = np.einsum("ij,rti,rtj->rt", c, X[..., None] ** p, Y[..., None] ** p)
    else:
        vals = A(X, Y)
    area = np.sum(wr[:, None] * r[:, None] * vals) * (2 * np.pi / n_theta)
    n = np.arange(-boundary.n_max, boundary.n_max + 1)
    samples = (np.exp(1j * np.outer(theta, n)) @ boundary.modes)[:, 0]
    loop = samples.mean().real * 2 * np.pi
    return float((loop + area) / (2 * np.pi))


def pure_gauge_boundary(structure, F, s: float, n_max: int,
                        samples: int | None = None) -> BoundaryFourier:
    """Angular component of ``h^-1 dh`` on the unit circle, ``h = exp(s F)``.

    ``F`` maps ``(x, y)`` to a Lie algebra vector and must come with its
    gradient: ``F(x, y) -> (value, d_x value, d_y value)``.  ``h`` acts in the
    adjoint representation of ``structure`` (which needs a trivial center), so
    the result extends to a flat splitting for ``omega = (0, 0, C)``.
    """
    C = np.asarray(structure.C)
    N = C.shape[0]
    ad_basis = C.transpose(1, 0, 2)                       # ad(e_b)[a, c]
    flat = ad_basis.reshape(N, -1).T

    def angular(theta):
        x, y = np.cos(theta), np.sin(theta)
        v, vx, vy = (np.asarray(t, float) for t in F(x, y))
        X = s * np.einsum("b,bac->ac", v, ad_basis)
        dX = s * np.einsum("b,bac->ac", -y * vx + x * vy, ad_basis)
        h, dh = expm_frechet(X, dX)
        m = np.linalg.solve(h, dh)
        coef, *_ = np.linalg.lstsq(flat, m.ravel(), rcond=None)
        return coef

    return BoundaryFourier.from_function(angular, n_max, samples)
