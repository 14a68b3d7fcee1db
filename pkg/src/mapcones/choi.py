"""Superoperator and dynamical-matrix representations of linear maps on M_N.

Index conventions (fixed once, pinned by round-trip tests):

* A superoperator ``phi`` is an N^2 x N^2 complex matrix acting on row-major
  vectorized matrices: ``vec(rho')[n*N+v] = phi[n*N+v, m*N+u] vec(rho)[m*N+u]``,
  i.e. rows are the output pair (n, v), columns the input pair (m, u).
* The dynamical (Choi) matrix ``D`` regroups the four indices so that the
  (m, u) block of D equals the image of the matrix unit E_mu:
  ``D[m*N+n, u*N+v] = phi[n*N+v, m*N+u]``.
* Kronecker products therefore place the block index in the FIRST factor:
  ``kron(X, Y)`` has blocks X[m,u]*Y.
* ``partial_trace(D, "B")`` traces the within-block pair and returns the
  N x N matrix of block traces; trace preservation reads
  ``partial_trace(D, "B") == I``.  ``partial_trace(D, "A")`` sums the
  diagonal blocks and equals the image of the identity.

The reshuffle is a pure index permutation: round trips are exact.
"""

from __future__ import annotations

import numpy as np

from .matops import require_hermitian


def _side(mat: np.ndarray) -> int:
    """N for an N^2 x N^2 matrix; validates squareness of both levels."""
    d = mat.shape[0]
    if mat.ndim != 2 or mat.shape[1] != d:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    n = int(round(np.sqrt(d)))
    if n * n != d:
        raise ValueError(f"matrix side {d} is not a perfect square")
    return n


def map_to_choi(phi: np.ndarray) -> np.ndarray:
    """Reshuffle a superoperator into its dynamical matrix."""
    n = _side(phi)
    # phi axes (n, v, m, u) -> D axes (m, n, u, v)
    return np.ascontiguousarray(
        phi.reshape(n, n, n, n).transpose(2, 0, 3, 1).reshape(n * n, n * n)
    )


def choi_to_map(d_mat: np.ndarray) -> np.ndarray:
    """Inverse reshuffle; exact round trip with map_to_choi."""
    n = _side(d_mat)
    # D axes (m, n, u, v) -> phi axes (n, v, m, u)
    return np.ascontiguousarray(
        d_mat.reshape(n, n, n, n).transpose(1, 3, 0, 2).reshape(n * n, n * n)
    )


def apply_map(phi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Act with a superoperator on an N x N matrix."""
    n = _side(phi)
    if rho.shape != (n, n):
        raise ValueError(f"dimension mismatch: map side {n}, state shape {rho.shape}")
    return (phi @ rho.reshape(-1)).reshape(n, n)


def block(d_mat: np.ndarray, m: int, u: int) -> np.ndarray:
    """(m, u) block of a dynamical matrix: the image of E_mu."""
    n = _side(d_mat)
    return d_mat[m * n:(m + 1) * n, u * n:(u + 1) * n]


def partial_trace(d_mat: np.ndarray, subsystem: str = "B") -> np.ndarray:
    """Partial trace of a dynamical matrix.

    "B": N x N matrix of block traces (trace-preserving test).
    "A": sum of diagonal blocks (the image of the identity).
    """
    n = _side(d_mat)
    d4 = d_mat.reshape(n, n, n, n)
    if subsystem == "B":
        return np.einsum("mnun->mu", d4)
    if subsystem == "A":
        return np.einsum("mnmv->nv", d4)
    raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}")


def partial_transpose(d_mat: np.ndarray) -> np.ndarray:
    """Transpose every block in place; an HS isometry and an involution."""
    n = _side(d_mat)
    return np.ascontiguousarray(
        d_mat.reshape(n, n, n, n).transpose(0, 3, 2, 1).reshape(n * n, n * n)
    )


def is_hermiticity_preserving(phi: np.ndarray, atol: float = 1e-12) -> bool:
    """True iff phi maps Hermitian to Hermitian: phi[nv,mu] == conj(phi[vn,um])."""
    n = _side(phi)
    p4 = phi.reshape(n, n, n, n)
    return bool(np.max(np.abs(p4 - p4.transpose(1, 0, 3, 2).conj())) <= atol)


# ---------------------------------------------------------------------------
# Named maps and states.
# ---------------------------------------------------------------------------

def identity_superop(n: int) -> np.ndarray:
    return np.eye(n * n, dtype=complex)


def depolarizing_superop(n: int) -> np.ndarray:
    """The completely depolarizing map rho -> Tr(rho) I/n."""
    vec_id = np.eye(n, dtype=complex).reshape(-1)
    return np.outer(vec_id, vec_id) / n


def transposition_superop(n: int) -> np.ndarray:
    """The transposition map rho -> rho^T."""
    phi = np.zeros((n, n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            phi[i, j, j, i] = 1.0
    return phi.reshape(n * n, n * n)


def conjugation_superop(v: np.ndarray) -> np.ndarray:
    """The map rho -> V rho V† for an N x N matrix V."""
    n = v.shape[0]
    # rho'[n,v] = V[n,m] rho[m,u] conj(V[v,u])
    return np.einsum("nm,vu->nvmu", v, v.conj()).reshape(n * n, n * n)


def rho_max(n: int) -> np.ndarray:
    """Unnormalized maximally entangled projector: Choi of the identity map."""
    vec_id = np.eye(n, dtype=complex).reshape(-1)
    return np.outer(vec_id, vec_id)


def swap_op(n: int) -> np.ndarray:
    """The swap operator on C^n (x) C^n: Choi of the transposition map."""
    return partial_transpose(rho_max(n))


def choi_center(n: int) -> np.ndarray:
    """Dynamical matrix of the completely depolarizing map: I_{n^2}/n.

    The common center of every base and trace-preserving slice studied here.
    """
    return np.eye(n * n, dtype=complex) / n


def choi_of_unitary(v: np.ndarray) -> np.ndarray:
    """Choi matrix of rho -> V rho V†, a rank-one trace-preserving point."""
    n = v.shape[0]
    w = np.kron(np.eye(n, dtype=complex), v) @ np.eye(n, dtype=complex).reshape(-1)
    return np.outer(w, w.conj())


def fourier_unitary(n: int) -> np.ndarray:
    """Discrete-Fourier unitary, the fixed choice for analytic radius witnesses."""
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def product_pure_choi(n: int, a: np.ndarray | None = None, b: np.ndarray | None = None) -> np.ndarray:
    """N * (pure (x) pure): the universal out-radius witness on every base.

    Defaults to Fourier-rotated basis vectors so the witness has generic
    entries rather than a single matrix unit.
    """
    f = fourier_unitary(n)
    if a is None:
        a = f[:, 0]
    if b is None:
        b = f[:, min(1, n - 1)]
    pa = np.outer(a, a.conj())
    pb = np.outer(b, b.conj())
    return n * np.kron(pa, pb)


def tp_project(d_mat: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the affine slice {partial_trace(D, "B") = I}."""
    n = _side(d_mat)
    resid = partial_trace(d_mat, "B") - np.eye(n)
    return d_mat - np.kron(resid, np.eye(n, dtype=complex)) / n


def fiber_contraction(d_mat: np.ndarray, m_op: np.ndarray) -> np.ndarray:
    """Push a Choi matrix along the fibration over the operator interval.

    D -> kron(sqrt(M), I) D kron(sqrt(M), I): completely positive, identity at
    M = I, and it carries the trace-preserving slice onto the fiber
    {partial_trace(D, "B") = M} exactly (the block factor sits first in our
    Kronecker convention).
    """
    n = _side(d_mat)
    m_op = require_hermitian(m_op, what="fiber operator")
    w, v = np.linalg.eigh(m_op)
    if w[0] < -1e-12:
        raise ValueError(f"fiber operator not PSD (min eigenvalue {w[0]:.3e})")
    root = (v * np.sqrt(np.maximum(w, 0.0))) @ v.conj().T
    s = np.kron(root, np.eye(n, dtype=complex))
    return s @ d_mat @ s
