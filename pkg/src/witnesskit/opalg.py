"""Dense operator algebra for small bipartite systems.

Matrices are plain ``numpy`` complex arrays. Composite indices follow the
A-major convention ``|i>_A |j>_B -> i * n_b + j``, so ``np.kron(a, b)`` acts
as ``a (x) b`` and a ``(n_a*n_b, n_a*n_b)`` operator reshapes to
``(n_a, n_b, n_a, n_b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HERM_TOL = 1e-12
RECON_TOL = 1e-10

A, B = "A", "B"


class BipartiteDims(NamedTuple):
    n_a: int
    n_b: int

    @property
    def total(self) -> int:
        return self.n_a * self.n_b


def as_dims(dims) -> BipartiteDims:
    dims = BipartiteDims(int(dims[0]), int(dims[1]))
    if dims.n_a < 1 or dims.n_b < 1:
        raise ValueError(f"subsystem dimensions must be positive, got {tuple(dims)}")
    return dims


def _check_square(m: np.ndarray, dims: BipartiteDims | None = None) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if dims is not None and m.shape[0] != dims.total:
        raise ValueError(f"matrix of dim {m.shape[0]} does not match dims {tuple(dims)}")
    return m


def is_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


# Single-qubit Pauli matrices, sigma_0 = identity.
I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, SX, SY, SZ)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def ket(*amplitudes) -> np.ndarray:
    return np.asarray(amplitudes, dtype=complex)


def basis_ket(dim: int, i: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[i] = 1.0
    return v


def proj(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def product_proj(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return kron(proj(a), proj(b))


def partial_transpose(m: np.ndarray, dims, subsystem: str = A) -> np.ndarray:
    """Transpose the indices of one subsystem.

    ``subsystem`` is ``"A"`` (first factor) or ``"B"``.
    """
    dims = as_dims(dims)
    m = _check_square(m, dims)
    t = m.reshape(dims.n_a, dims.n_b, dims.n_a, dims.n_b)
    if subsystem == A:
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == B:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}")
    return np.ascontiguousarray(t.reshape(dims.total, dims.total))


def partial_trace(m: np.ndarray, dims, keep: str = A) -> np.ndarray:
    dims = as_dims(dims)
    m = _check_square(m, dims)
    t = m.reshape(dims.n_a, dims.n_b, dims.n_a, dims.n_b)
    if keep == A:
        return np.einsum("ikjk->ij", t)
    if keep == B:
        return np.einsum("kikj->ij", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def fix_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is real positive."""
    v = np.asarray(v, dtype=complex)
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size == 0:
        return v
    a = v[nz[0]]
    return v * (abs(a) / a)


def herm_eig(m: np.ndarray, tol: float = HERM_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending eigenvalues and a matrix whose columns are orthonormal
    eigenvectors, each with its global phase fixed by :func:`fix_phase`.
    """
    m = _check_square(m)
    if not is_hermitian(m, tol):
        raise ValueError("herm_eig requires a Hermitian matrix")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    v = np.column_stack([fix_phase(v[:, k]) for k in range(v.shape[1])])
    return w, v


def min_eigvec(m: np.ndarray, degeneracy_tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a canonical eigenvector for it.

    When the smallest eigenvalue is degenerate, the computational basis vector
    with the largest projection onto the eigenspace (lowest index on ties) is
    projected and normalized, so the result does not depend on LAPACK's choice
    of basis inside the eigenspace.
    """
    w, v = herm_eig(m)
    space = v[:, np.abs(w - w[0]) <= degeneracy_tol]
    if space.shape[1] == 1:
        return float(w[0]), space[:, 0]
    weights = np.sum(np.abs(space) ** 2, axis=1)
    i = int(np.flatnonzero(weights >= weights.max() - 1e-12)[0])
    u = space @ space[i].conj()
    return float(w[0]), fix_phase(u / np.linalg.norm(u))


@dataclass(frozen=True)
class SchmidtForm:
    coefficients: np.ndarray
    basis_a: np.ndarray  # columns
    basis_b: np.ndarray  # columns

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.coefficients > RECON_TOL))

    def vector(self) -> np.ndarray:
        return sum(c * np.kron(self.basis_a[:, k], self.basis_b[:, k])
                   for k, c in enumerate(self.coefficients))


def schmidt(v: np.ndarray, dims) -> SchmidtForm:
    dims = as_dims(dims)
    v = np.asarray(v, dtype=complex)
    if v.shape != (dims.total,):
        raise ValueError(f"vector of length {v.shape} does not match dims {tuple(dims)}")
    if abs(np.linalg.norm(v) - 1) > 1e-10:
        raise ValueError("schmidt requires a normalized vector")
    u, s, vh = np.linalg.svd(v.reshape(dims.n_a, dims.n_b), full_matrices=False)
    return SchmidtForm(s, u, vh.T)


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def hs_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m)))


def gellmann_basis(d: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal Hermitian basis of d x d matrices.

    Element 0 is ``1/sqrt(d)``; the rest are traceless generalized Gell-Mann
    matrices scaled to unit norm, ordered symmetric, antisymmetric, diagonal.
    """
    mats = [np.eye(d, dtype=complex) / math.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / math.sqrt(2)
            mats.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k], m[k, j] = -1j / math.sqrt(2), 1j / math.sqrt(2)
            mats.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        mats.append(np.diag(diag / math.sqrt(l * (l + 1))).astype(complex))
    return np.array(mats)


def pauli_expand(m: np.ndarray) -> np.ndarray:
    """Coefficients ``lam[i, j]`` with ``m = sum lam[i, j] sigma_i (x) sigma_j``."""
    m = _check_square(m)
    if m.shape != (4, 4):
        raise ValueError("pauli_expand is defined for two-qubit (4x4) operators only")
    lam = np.array([[np.trace(kron(si, sj) @ m) / 4 for sj in PAULIS] for si in PAULIS])
    if is_hermitian(m):
        return lam.real
    return lam


def pauli_reconstruct(lam: np.ndarray) -> np.ndarray:
    return sum(lam[i, j] * kron(PAULIS[i], PAULIS[j]) for i in range(4) for j in range(4))


def generalized_expand(m: np.ndarray, dims) -> np.ndarray:
    """Real coefficients of a Hermitian operator over Gell-Mann products.

    Returns an ``(n_a**2, n_b**2)`` array ``c`` with
    ``m = sum c[i, j] G_i (x) G_j`` for the bases of :func:`gellmann_basis`.
    """
    dims = as_dims(dims)
    m = _check_square(m, dims)
    ga, gb = gellmann_basis(dims.n_a), gellmann_basis(dims.n_b)
    t = m.reshape(dims.n_a, dims.n_b, dims.n_a, dims.n_b)
    # Tr[(G_i (x) H_j) m]
    c = np.einsum("ipq,jrs,qspr->ij", ga, gb, t)
    return c.real


def generalized_reconstruct(c: np.ndarray, dims) -> np.ndarray:
    dims = as_dims(dims)
    ga, gb = gellmann_basis(dims.n_a), gellmann_basis(dims.n_b)
    t = np.einsum("ij,ipq,jrs->prqs", c, ga, gb)
    return t.reshape(dims.total, dims.total)


def numerical_rank(m: np.ndarray, rel_tol: float = 1e-10) -> int:
    s = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_ket(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)
