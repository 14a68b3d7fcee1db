"""Dense Hermitian matrix core: inner products, spectra, bases, JSON I/O.

Everything downstream (cone oracles, walks, estimators) funnels through the
handful of primitives here.  Matrices are plain complex numpy arrays; the
constructors below validate rather than wrap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

HERM_ATOL = 1e-12  # absolute Hermiticity tolerance at construction


class HermiticityError(ValueError):
    """Input matrix is not Hermitian within the construction tolerance."""


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Hermitian part (a + a†)/2; used to repair float drift, never silently."""
    return (a + a.conj().T) / 2


def require_hermitian(a: np.ndarray, atol: float = HERM_ATOL, what: str = "matrix") -> np.ndarray:
    """Validate and return a square Hermitian complex matrix.

    Rejects (rather than symmetrizes) anything off by more than `atol`
    entrywise; callers that accumulate drift call symmetrize() explicitly.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what}: expected a square matrix, got shape {a.shape}")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > atol:
        raise HermiticityError(f"{what}: not Hermitian (max deviation {dev:.3e} > {atol:.1e})")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError(f"{what}: non-finite entries")
    return a


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt inner product Tr(a·b), real for Hermitian arguments."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    # Tr(a b) = Tr(a† b) = vdot(a, b) for Hermitian a
    return float(np.vdot(a, b).real)


def hs_norm(a: np.ndarray) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(a))


@dataclass(frozen=True)
class Spectrum:
    """Full spectral decomposition, eigenvalues descending.

    eigenvectors[:, k] pairs with eigenvalues[k]; U diag(w) U† reconstructs
    the input.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


def eigh_desc(a: np.ndarray) -> Spectrum:
    """Spectral decomposition of a Hermitian matrix, eigenvalues descending."""
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigh failed to converge (dim={a.shape[0]}, "
            f"hs_norm={np.linalg.norm(a):.3e}, max|entry|={np.max(np.abs(a)):.3e})"
        ) from exc
    return Spectrum(eigenvalues=w[::-1].copy(), eigenvectors=v[:, ::-1].copy())


def min_eig(a: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(a)[0])


def max_eig(a: np.ndarray) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(a)[-1])


def is_psd(a: np.ndarray, tol: float) -> bool:
    """PSD test within an absolute eigenvalue slack `tol` (>= 0).

    Cholesky of a + tol·I: an order of magnitude cheaper than eigvalsh in the
    hit-and-run hot path, and exact enough at the tolerances used here.
    """
    try:
        np.linalg.cholesky(a + tol * np.eye(a.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def psd_part(a: np.ndarray) -> np.ndarray:
    """Projection onto the PSD cone (clip negative eigenvalues)."""
    w, v = np.linalg.eigh(a)
    np.maximum(w, 0.0, out=w)
    return (v * w) @ v.conj().T


def trace_norm(a: np.ndarray) -> float:
    """Sum of absolute eigenvalues (Hermitian input)."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(a))))


# ---------------------------------------------------------------------------
# Orthonormal Hermitian bases.  All are exact (no Gram-Schmidt): generalized
# Gell-Mann construction for a single factor, Kronecker products for slices.
# ---------------------------------------------------------------------------

def hermitian_basis(d: int) -> np.ndarray:
    """HS-orthonormal basis of d x d Hermitian matrices, identity first.

    Returns shape (d^2, d, d).  Element 0 is I/sqrt(d); elements 1.. are
    traceless.
    """
    out = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            out.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / np.sqrt(2)
            m[k, j] = 1j / np.sqrt(2)
            out.append(m)
    for l in range(1, d):
        v = np.zeros(d)
        v[:l] = 1.0
        v[l] = -l
        out.append(np.diag(v).astype(complex) / np.sqrt(l * (l + 1)))
    return np.array(out)


def traceless_basis(d: int) -> np.ndarray:
    """HS-orthonormal basis of the traceless Hermitian d x d matrices."""
    return hermitian_basis(d)[1:]


def product_basis(n: int) -> np.ndarray:
    """Orthonormal Hermitian basis of dim n^2 built as kron(K_a, K_b).

    Ordering: a major, b minor; element (0,0) is I/n at index 0.  The b > 0
    elements all have vanishing within-block partial trace, which makes the
    trace-preserving tangent space an exact sub-slice of this basis.
    """
    k = hermitian_basis(n)
    return np.array([np.kron(ka, kb) for ka in k for kb in k])


def base_tangent_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the traceless hyperplane in Herm(n^2), product form."""
    return product_basis(n)[1:]


def tp_tangent_basis(n: int) -> np.ndarray:
    """Orthonormal basis of {u Hermitian : within-block partial trace of u = 0}.

    These are the kron(K_a, K_b) with b >= 1: each satisfies the
    trace-preserving linear constraint exactly, so walks confined to their
    span never drift out of the affine slice (up to float noise).
    """
    k = hermitian_basis(n)
    return np.array([np.kron(ka, kb) for ka in k for kb in k[1:]])


# ---------------------------------------------------------------------------
# Matrix JSON schema: {"dim": d, "re": [[...]], "im": [[...]]}, row-major,
# numbers written with 17 significant digits (exact round trip for doubles).
# ---------------------------------------------------------------------------

def matrix_to_json(a: np.ndarray) -> str:
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]

    def fmt(x: float) -> str:
        return format(float(x), ".17g")

    def rows(part: np.ndarray) -> str:
        return "[" + ", ".join(
            "[" + ", ".join(fmt(x) for x in row) + "]" for row in part
        ) + "]"

    return '{"dim": %d, "re": %s, "im": %s}' % (d, rows(a.real), rows(a.imag))


def matrix_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    d = int(doc["dim"])
    re = np.array(doc["re"], dtype=float)
    im = np.array(doc["im"], dtype=float)
    if re.shape != (d, d) or im.shape != (d, d):
        raise ValueError(f"matrix JSON: parts have shape {re.shape}/{im.shape}, dim says {d}")
    return re + 1j * im


def save_matrix(path, a: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(matrix_to_json(a))
        fh.write("\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_json(fh.read())
