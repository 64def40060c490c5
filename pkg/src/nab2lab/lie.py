"""Structure tensors ``C^a_{bc}`` of (not necessarily Jacobi) brackets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StructureTensor",
    "so3",
    "sl2",
    "gl",
    "from_matrix_basis",
    "ad_matrix",
]


@dataclass(frozen=True)
class StructureTensor:
    """Constants ``C[a, b, c]`` with ``[e_b, e_c] = C[a, b, c] e_a``.

    Antisymmetry in ``(b, c)`` is enforced; the Jacobi identity is only
    measured (``jacobi_defect``), never required.
    """

    C: np.ndarray
    name: str = ""
    is_jacobi: bool = field(init=False)

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 3 or len(set(C.shape)) != 1:
            raise ValueError(f"structure tensor must be N x N x N, got {C.shape}")
        if not np.allclose(C, -C.transpose(0, 2, 1), atol=1e-14, rtol=0):
            raise ValueError("structure tensor is not antisymmetric in its lower indices")
        C.flags.writeable = False
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "is_jacobi", self.jacobi_defect() < 1e-12)

    @property
    def N(self) -> int:
        return self.C.shape[0]

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("abc,b,c->a", self.C, x, y)

    def jacobi_defect(self) -> float:
        # [e_a,[e_b,e_c]] + cyclic, coefficient-wise
        J = np.einsum("dae,ebc->dabc", self.C, self.C)
        total = J + J.transpose(0, 2, 3, 1) + J.transpose(0, 3, 1, 2)
        return float(np.abs(total).max()) if total.size else 0.0

    def center_rank_deficit(self) -> int:
        """``N - rank`` of ``Phi -> ad_Phi``; zero iff the center is trivial."""
        K = self.C.transpose(0, 2, 1).reshape(self.N * self.N, self.N)
        return self.N - int(np.linalg.matrix_rank(K))


def ad_matrix(C: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> C(phi, X)``."""
    return np.einsum("abc,b->ac", C, phi)


def from_matrix_basis(basis, name: str = "") -> StructureTensor:
    """Structure tensor of the commutator on the span of ``basis`` matrices."""
    basis = [np.asarray(b, dtype=float) for b in basis]
    M = np.stack([b.ravel() for b in basis], axis=1)
    N = len(basis)
    C = np.zeros((N, N, N))
    for b in range(N):
        for c in range(N):
            comm = basis[b] @ basis[c] - basis[c] @ basis[b]
            coef, *_ = np.linalg.lstsq(M, comm.ravel(), rcond=None)
            if not np.allclose(M @ coef, comm.ravel(), atol=1e-12):
                raise ValueError("basis does not span a subalgebra")
            C[:, b, c] = coef
    C[np.abs(C) < 1e-15] = 0.0
    return StructureTensor(C, name)


def so3() -> StructureTensor:
    """Levi-Civita tensor: ``[e1, e2] = e3`` and cyclic."""
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return StructureTensor(eps, "so3")


def sl2() -> StructureTensor:
    """Basis (H, E, F) with ``[H,E] = 2E``, ``[H,F] = -2F``, ``[E,F] = H``."""
    H = np.array([[1.0, 0.0], [0.0, -1.0]])
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    F = np.array([[0.0, 0.0], [1.0, 0.0]])
    return from_matrix_basis([H, E, F], "sl2")


def gl(n: int) -> StructureTensor:
    """Commutator of ``gl(n)`` in the basis of matrix units ``E_ij`` (row-major)."""
    basis = []
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n))
            e[i, j] = 1.0
            basis.append(e)
    return from_matrix_basis(basis, f"gl{n}")
