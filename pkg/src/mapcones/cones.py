"""Membership oracles for the nested cones of Hermiticity-preserving maps.

The six cones, on the dynamical-matrix side:

* CP   - positive semi-definite D
* CcP  - positive semi-definite partial transpose
* T    - both (the PPT cone), T = CP ∩ CcP
* SP   - separable D (dual of P)
* D    - CP + CcP as a Minkowski sum (dual of T)
* P    - block-positive D

Every oracle returns a Verdict carrying a signed margin and, for Out, a
certificate that re-verifies independently.  P and SP have no known
polynomial exact test in general; for two-level systems P reduces to a
three-dimensional trust-region problem solved exactly, elsewhere a see-saw
search is used and In answers are flagged heuristic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import nnls

from . import choi
from .matops import (
    eigh_desc,
    hermitian_basis,
    hs_inner,
    hs_norm,
    is_psd,
    max_eig,
    min_eig,
    psd_part,
    require_hermitian,
    trace_norm,
)


class Cone(str, enum.Enum):
    P = "P"
    D = "D"
    CP = "CP"
    CCP = "CcP"
    T = "T"
    SP = "SP"


#: chain position, smallest set first; CcP sits outside the chain (T = CP ∩ CcP)
CHAIN: tuple[Cone, ...] = (Cone.SP, Cone.T, Cone.CP, Cone.D, Cone.P)

#: dual cone table
DUAL: dict[Cone, Cone] = {
    Cone.CP: Cone.CP,
    Cone.CCP: Cone.CCP,
    Cone.T: Cone.D,
    Cone.D: Cone.T,
    Cone.P: Cone.SP,
    Cone.SP: Cone.P,
}


class Slice(str, enum.Enum):
    CONE = "cone"
    BASE = "base"
    TP = "tp"
    TNI = "tni"
    SYM = "sym"
    SYM_POLAR = "sym-polar"


class Status(str, enum.Enum):
    IN = "In"
    OUT = "Out"
    UNKNOWN = "Unknown"


class UnsupportedSliceError(ValueError):
    """Requested slice/cone combination has no oracle."""


@dataclass(frozen=True)
class OracleParams:
    """Tolerances and search budgets shared by the oracles."""

    psd_tol_rel: float = 1e-9          # min eigenvalue >= -psd_tol_rel * ||D||
    slice_tol: float = 1e-8            # affine constraint residual
    seesaw_restarts: int = 50
    seesaw_iters: int = 200
    seesaw_threshold: float = -1e-8    # declared Out below this product value
    split_tol: float = 1e-7
    dykstra_max_iter: int = 50_000
    dykstra_plateau_window: int = 500
    dykstra_plateau_eps: float = 1e-10
    sep_pool_size: int = 50_000
    sep_residual_tol: float = 1e-6
    witness_starts: int = 3
    witness_iters: int = 400
    support_bisection_steps: int = 60
    seed: int = 77                     # oracle-internal randomness, explicit for purity


@dataclass(frozen=True)
class BodySpec:
    """A convex body: cone plus slice at a given system size."""

    cone: Cone
    n: int
    slice: Slice = Slice.BASE
    params: OracleParams = field(default_factory=OracleParams)

    @property
    def dim(self) -> int:
        """Affine dimension of the body."""
        d2 = self.n ** 4
        return {
            Slice.CONE: d2,
            Slice.BASE: d2 - 1,
            Slice.TP: d2 - self.n ** 2,
            Slice.TNI: d2,
            Slice.SYM: d2,
            Slice.SYM_POLAR: d2,
        }[self.slice]


@dataclass
class Verdict:
    status: Status
    margin: float
    certificate: dict | None = None
    heuristic: bool = False

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "margin": self.margin,
            "certificate": _jsonify(self.certificate),
            "heuristic": self.heuristic,
        }


def _jsonify(obj):
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _psd_tol(d_mat: np.ndarray, params: OracleParams) -> float:
    return params.psd_tol_rel * max(1.0, hs_norm(d_mat))


# ---------------------------------------------------------------------------
# Eigenvalue-test cones: CP, CcP, T.
# ---------------------------------------------------------------------------

def _psd_verdict(d_mat: np.ndarray, params: OracleParams, transposed: bool) -> Verdict:
    spec = eigh_desc(d_mat)
    lam = spec.eigenvalues[-1]
    tol = _psd_tol(d_mat, params)
    if lam >= -tol:
        return Verdict(Status.IN, float(lam))
    vec = spec.eigenvectors[:, -1]
    cert = {
        "kind": "eigvec",
        "eigenvalue": float(lam),
        "vector": vec,
        "partial_transpose": transposed,
    }
    return Verdict(Status.OUT, float(lam), cert)


# ---------------------------------------------------------------------------
# Block positivity.
# ---------------------------------------------------------------------------

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
_PAULI_KRON = np.array([np.kron(a, b) for a in _PAULI for b in _PAULI])


def _bloch_to_vec(a) -> np.ndarray:
    """Unit vector whose projector has Bloch vector a (|a| = 1)."""
    a1, a2, a3 = float(a[0]), float(a[1]), float(a[2])
    if a3 < -1 + 1e-14:
        return np.array([0.0, 1.0], dtype=complex)
    v = np.array([1 + a3, a1 + 1j * a2], dtype=complex)
    return v / np.linalg.norm(v)


def _trs_min_sphere(a_mat: np.ndarray, g: np.ndarray, c: float) -> tuple[float, np.ndarray]:
    """Global min of x^T A x + 2 g.x + c over the unit sphere in R^3."""
    lam, q = np.linalg.eigh(a_mat)
    gt = q.T @ g
    gn = float(np.linalg.norm(g))
    if gn < 1e-15:
        return float(lam[0] + c), q[:, 0]
    l0, l1, l2 = (float(x) for x in lam)
    g0, g1, g2 = (float(x) for x in gt)
    lo, hi = l0 - gn, l0
    if g0 * g0 / max((l0 - lo) ** 2, 1e-300) + g1 * g1 / (l1 - lo) ** 2 + g2 * g2 / (l2 - lo) ** 2 > 1.0:
        lo = l0 - 3 * gn
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        phi = (
            g0 * g0 / max((l0 - mid) ** 2, 1e-300)
            + g1 * g1 / max((l1 - mid) ** 2, 1e-300)
            + g2 * g2 / max((l2 - mid) ** 2, 1e-300)
        )
        if phi < 1.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    den = lam - x
    den[np.abs(den) < 1e-300] = 1e-300
    vec = q @ (-gt / den)
    nv = np.linalg.norm(vec)
    vec = q[:, 0] if nv < 1e-12 else vec / nv  # hard case: pure bottom eigenvector
    val = float(vec @ a_mat @ vec + 2 * g @ vec + c)
    return val, vec


def _fibonacci_sphere(k: int) -> np.ndarray:
    i = np.arange(k) + 0.5
    phi = np.arccos(1 - 2 * i / k)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.column_stack(
        [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


_SPHERE_GRID = _fibonacci_sphere(64)


def qubit_product_min(m_mat: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, bool]:
    """Exact min of <x (x) y| M |x (x) y> over unit product vectors, N = 2.

    Block positivity reduces to a bilinear form on two Bloch spheres; the
    inner sphere minimizes in closed form and the outer one is a quadratic
    on the sphere (a 3 x 3 trust-region subproblem), solved globally.

    Returns (min value, argmin a-Bloch, argmin b-Bloch, certified) where
    `certified` means the pair of exact tests agreed with the sign.
    """
    cm = np.einsum("kji,ij->k", _PAULI_KRON, m_mat).real.reshape(4, 4)
    c00 = float(cm[0, 0])
    u = cm[1:, 0].copy()
    v = cm[0, 1:].copy()
    r = cm[1:, 1:].copy()

    def gval(a):
        return (c00 + u @ a - np.linalg.norm(v + r.T @ a)) / 4.0

    # exact tests: linear part and the squared difference quadratic
    lin_min = c00 - float(np.linalg.norm(u))
    a_quad = np.outer(u, u) - r @ r.T
    g_quad = c00 * u - r @ v
    c_quad = c00 * c00 - float(v @ v)
    qmin, a_star = _trs_min_sphere(a_quad, g_quad, c_quad)

    # the minimum value needs a global search of the concave sphere profile:
    # deterministic grid, keep the deepest starts, alternate to convergence
    grid = [a_star]
    un = np.linalg.norm(u)
    if un > 1e-14:
        grid.append(-u / un)
    grid = np.vstack([np.array(grid), _SPHERE_GRID])
    profile = (c00 + grid @ u) - np.linalg.norm(v + grid @ r, axis=1)
    order = np.argsort(profile)
    best_a = grid[order[0]]
    best_val = profile[order[0]]
    for idx in order[:8]:
        a = grid[idx]
        for _ in range(200):
            w = v + r.T @ a
            nw = np.linalg.norm(w)
            b = -w / nw if nw > 1e-15 else np.array([0.0, 0.0, 1.0])
            z = u + r @ b
            nz = np.linalg.norm(z)
            a_new = -z / nz if nz > 1e-15 else a
            if np.linalg.norm(a_new - a) < 1e-14:
                a = a_new
                break
            a = a_new
        val_a = (c00 + u @ a) - np.linalg.norm(v + r.T @ a)
        if val_a < best_val:
            best_val, best_a = val_a, a
    val = float(best_val) / 4.0
    w = v + r.T @ best_a
    nw = np.linalg.norm(w)
    best_b = -w / nw if nw > 1e-15 else np.array([0.0, 0.0, 1.0])
    scale = max(1.0, abs(c00), float(np.abs(cm).max()))
    nonneg = lin_min >= -1e-11 * scale and qmin >= -1e-11 * scale * scale
    certified = nonneg == (val >= -1e-11 * scale)
    if nonneg:
        val = max(val, 0.0)
    return val, best_a, best_b, certified


def qubit_block_positive(m_mat: np.ndarray, tol: float = 1e-11) -> bool:
    """Boolean-only variant of qubit_product_min for the walk hot path.

    Skips the argmin polish: just the linear test plus the sphere-constrained
    quadratic, with a pure-float secular bisection.
    """
    cm = np.einsum("kji,ij->k", _PAULI_KRON, m_mat).real.reshape(4, 4)
    c00 = float(cm[0, 0])
    u = cm[1:, 0]
    v = cm[0, 1:]
    r = cm[1:, 1:]
    scale = max(1.0, abs(c00), float(np.abs(cm).max()))
    if c00 - float(np.linalg.norm(u)) < -tol * scale:
        return False
    lam, q = np.linalg.eigh(np.outer(u, u) - r @ r.T)
    gt = q.T @ (c00 * u - r @ v)
    c_quad = c00 * c00 - float(v @ v)
    g0, g1, g2 = (float(x) for x in gt)
    l0, l1, l2 = (float(x) for x in lam)
    gn = (g0 * g0 + g1 * g1 + g2 * g2) ** 0.5
    if gn < 1e-15:
        return l0 + c_quad >= -tol * scale * scale
    lo, hi = l0 - 3 * gn, l0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        d0, d1, d2 = l0 - mid, l1 - mid, l2 - mid
        phi = (g0 / d0) ** 2 + (g1 / d1) ** 2 + (g2 / d2) ** 2
        if phi < 1.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    d0, d1, d2 = l0 - x, l1 - x, l2 - x
    a = np.array([g0 / -d0 if d0 else 0.0, g1 / -d1 if d1 else 0.0, g2 / -d2 if d2 else 0.0])
    na = float(np.linalg.norm(a))
    a = q[:, 0] if na < 1e-12 else q @ (a / na)
    qmin = float(a @ (np.outer(u, u) - r @ r.T) @ a + 2 * (c00 * u - r @ v) @ a + c_quad)
    return qmin >= -tol * scale * scale


def _seesaw_extreme(d_mat: np.ndarray, n: int, rng: np.random.Generator,
                    restarts: int, iters: int, minimize: bool = True):
    """See-saw search for extreme of <x (x) y| D |x (x) y> over unit products.

    Alternates exact eigenvector steps in each factor.  Heuristic: returns
    the best local extremum over `restarts` random unit starts.
    """
    d4 = d_mat.reshape(n, n, n, n)
    pick = (lambda s: s.eigenvectors[:, -1]) if minimize else (lambda s: s.eigenvectors[:, 0])
    best_val = np.inf if minimize else -np.inf
    best = (None, None)
    for _ in range(restarts):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x /= np.linalg.norm(x)
        val_prev = None
        for _ in range(iters):
            a_mat = np.einsum("m,u,maub->ab", x, x.conj(), d4)
            y = pick(eigh_desc((a_mat + a_mat.conj().T) / 2))
            m_mat = np.einsum("a,b,maub->um", y.conj(), y, d4)
            x = pick(eigh_desc((m_mat + m_mat.conj().T) / 2))
            val = float(np.real(
                np.einsum("m,u,maub,a,b->", x, x.conj(), d4, y.conj(), y)
            ))
            if val_prev is not None and abs(val - val_prev) < 1e-14:
                break
            val_prev = val
        better = val < best_val if minimize else val > best_val
        if better:
            best_val, best = val, (x, y)
    return best_val, best[0], best[1]


def block_positive_min(d_mat: np.ndarray, n: int, params: OracleParams,
                       rng: np.random.Generator | None = None):
    """Min of the product quadratic form; (value, x, y, exact_flag)."""
    if n == 2:
        val, a, b, _ = qubit_product_min(d_mat)
        return val, _bloch_to_vec(a), _bloch_to_vec(b), True
    if rng is None:
        rng = np.random.default_rng(params.seed)
    val, x, y = _seesaw_extreme(d_mat, n, rng, params.seesaw_restarts,
                                params.seesaw_iters, minimize=True)
    return val, x, y, False


# ---------------------------------------------------------------------------
# Separability machinery.
# ---------------------------------------------------------------------------

_POOL_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _product_pool(n: int, size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Pool of random product projectors as real coordinate columns.

    Returns (coords, basis) with coords shape (d^2, size) in the orthonormal
    Hermitian basis of Herm(n^2); cached per (n, size, seed).
    """
    key = (n, size, seed)
    if key in _POOL_CACHE:
        return _POOL_CACHE[key]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    d = n * n
    basis = hermitian_basis(d)
    xs = rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n))
    ys = rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n))
    xs /= np.linalg.norm(xs, axis=1)[:, None]
    ys /= np.linalg.norm(ys, axis=1)[:, None]
    prods = np.einsum("km,ka->kma", xs, ys)              # product vectors x (x) y
    prods = prods.reshape(size, d)
    mats = np.einsum("ki,kj->kij", prods, prods.conj())  # projectors
    coords = np.einsum("kij,bji->bk", mats, basis).real.astype(float)
    _POOL_CACHE[key] = (coords, basis)
    return coords, basis


def _separable_nnls(d_mat: np.ndarray, n: int, params: OracleParams):
    """Nonnegative least squares of D/Tr(D) against the product pool.

    Returns (residual, weights, indices).  Small residual certifies
    membership in the separable cone; a large one proves nothing.
    """
    coords, basis = _product_pool(n, params.sep_pool_size, params.seed)
    target = d_mat / np.trace(d_mat).real
    b = np.einsum("ij,bji->b", target, basis).real.astype(float)
    w, rnorm = nnls(coords, b)
    idx = np.nonzero(w > 1e-12)[0]
    return float(rnorm), w[idx], idx


# ---------------------------------------------------------------------------
# Decomposable splitting (Dykstra) and its dual witness search.
# ---------------------------------------------------------------------------

@dataclass
class SplitResult:
    """Outcome of the two-cone splitting D = A + B^{T_B}."""

    a: np.ndarray
    b: np.ndarray
    residual: float
    iterations: int
    converged: bool


def decomposable_split(d_mat: np.ndarray, tol: float = 1e-7,
                       max_iter: int = 50_000,
                       plateau_window: int = 500,
                       plateau_eps: float = 1e-10) -> SplitResult:
    """Split D into A + B^{T_B} with A, B PSD, by Dykstra alternating projections.

    Projects between the PSD cone and {X : (D - X)^{T_B} PSD} (the latter via
    the partial-transpose isometry).  A residual plateau above `tol` signals
    probable non-decomposability; that is a heuristic, not a proof, and the
    caller can follow up with a dual witness search.
    """
    d_mat = require_hermitian(d_mat, what="split input")
    zero = np.zeros_like(d_mat)
    if min_eig(d_mat) >= -tol:
        return SplitResult(d_mat, zero, 0.0, 0, True)
    dt = choi.partial_transpose(d_mat)
    if min_eig(dt) >= -tol:
        return SplitResult(zero, dt, 0.0, 0, True)

    x = d_mat / 2
    p = np.zeros_like(d_mat)
    q = np.zeros_like(d_mat)
    res_hist: list[float] = []
    a = b = None
    res = np.inf
    for it in range(1, max_iter + 1):
        y = psd_part(x + p)
        p = x + p - y
        z = d_mat - choi.partial_transpose(psd_part(choi.partial_transpose(d_mat - (y + q))))
        q = y + q - z
        x = z
        a = psd_part(x)
        b = psd_part(choi.partial_transpose(d_mat - a))
        res = hs_norm(d_mat - a - choi.partial_transpose(b))
        res_hist.append(res)
        if res <= tol:
            return SplitResult(a, b, res, it, True)
        if it > max(1000, plateau_window):
            if res_hist[-plateau_window] - res < plateau_eps * max(res, 1.0):
                return SplitResult(a, b, res, it, False)
    return SplitResult(a, b, res, max_iter, False)


def _project_ppt_trace1(s: np.ndarray, n: int, iters: int = 60) -> np.ndarray:
    """Approximate projection onto PPT matrices of unit trace (short Dykstra)."""
    p = np.zeros_like(s)
    q = np.zeros_like(s)
    x = s
    for _ in range(iters):
        y = psd_part(x + p)
        p = x + p - y
        z = choi.partial_transpose(psd_part(choi.partial_transpose(y + q)))
        q = y + q - z
        x = z
    x = psd_part(x)
    tr = np.trace(x).real
    if tr > 1e-12:
        x = x / tr
    return x


def t_dual_witness(d_mat: np.ndarray, n: int, params: OracleParams,
                   rng: np.random.Generator | None = None):
    """Search for a PPT state s with <D, s> < 0 (certifies D outside CP + CcP).

    Multi-start projected subgradient descent of the linear functional over
    the PPT trace-one slice, seeded at random states.  Returns
    (best value, witness) with the witness re-verified PPT, or (value, None).
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=params.seed, spawn_key=(202,)))
    d = n * n
    dn = d_mat / max(hs_norm(d_mat), 1e-30)
    best_val, best = np.inf, None
    for _ in range(params.witness_starts):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        s = g @ g.conj().T
        s /= np.trace(s).real
        for k in range(1, params.witness_iters + 1):
            s = _project_ppt_trace1(s - (0.05 / np.sqrt(k)) * dn, n)
            val = hs_inner(s, d_mat)
            if val < best_val:
                lam = min(min_eig(s), min_eig(choi.partial_transpose(s)))
                if lam > -1e-9:
                    best_val, best = val, s
    return best_val, best


# ---------------------------------------------------------------------------
# Cone membership dispatch.
# ---------------------------------------------------------------------------

def cone_membership(d_mat: np.ndarray, cone: Cone,
                    params: OracleParams | None = None) -> Verdict:
    """Decide membership of a dynamical matrix in one of the six cones."""
    params = params or OracleParams()
    d_mat = require_hermitian(d_mat, what="membership input")
    n = choi._side(d_mat)

    if cone == Cone.CP:
        return _psd_verdict(d_mat, params, transposed=False)
    if cone == Cone.CCP:
        return _psd_verdict(choi.partial_transpose(d_mat), params, transposed=True)
    if cone == Cone.T:
        v1 = _psd_verdict(d_mat, params, transposed=False)
        if v1.status == Status.OUT:
            return v1
        v2 = _psd_verdict(choi.partial_transpose(d_mat), params, transposed=True)
        return Verdict(v2.status, min(v1.margin, v2.margin), v2.certificate)

    if cone == Cone.P:
        val, x, y, exact = block_positive_min(d_mat, n, params)
        tol = _psd_tol(d_mat, params)
        threshold = params.seesaw_threshold if not exact else -tol
        if val < threshold:
            cert = {
                "kind": "product_pair",
                "xi": x.conj(),  # map-side vector: value = <y|Phi(|xi><xi|)|y>
                "eta": y,
                "value": val,
            }
            return Verdict(Status.OUT, val, cert)
        return Verdict(Status.IN, val, None, heuristic=not exact)

    if cone == Cone.SP:
        t_verdict = cone_membership(d_mat, Cone.T, params)
        if t_verdict.status == Status.OUT:
            return t_verdict  # PPT is necessary for separability
        if n == 2:
            return t_verdict  # two-level PPT points are exactly the separable ones
        tr = np.trace(d_mat).real
        nrm = hs_norm(d_mat)
        if tr <= params.slice_tol * max(1.0, nrm):
            if nrm <= params.slice_tol:
                return Verdict(Status.IN, 0.0, {"kind": "note", "text": "cone apex"})
            return Verdict(Status.OUT, -nrm, {"kind": "note", "text": "nonpositive trace"})
        dist = hs_norm(n * d_mat / tr - choi.choi_center(n))
        ball = 1.0 / np.sqrt(n * n - 1)
        if dist <= ball:
            cert = {"kind": "ball", "distance": dist, "inradius": ball}
            return Verdict(Status.IN, float(ball - dist), cert)
        resid, w, idx = _separable_nnls(d_mat, n, params)
        if resid <= params.sep_residual_tol:
            cert = {"kind": "separable_decomposition", "residual": resid,
                    "pool_seed": params.seed, "pool_size": params.sep_pool_size,
                    "indices": idx, "weights": w}
            return Verdict(Status.IN, float(params.sep_residual_tol - resid), cert)
        return Verdict(Status.UNKNOWN, -resid, None, heuristic=True)

    if cone == Cone.D:
        split = decomposable_split(d_mat, params.split_tol, params.dykstra_max_iter,
                                   params.dykstra_plateau_window, params.dykstra_plateau_eps)
        if split.converged:
            cert = {"kind": "split", "a": split.a, "b": split.b, "residual": split.residual}
            return Verdict(Status.IN, float(params.split_tol - split.residual), cert)
        val, witness = t_dual_witness(d_mat, n, params)
        if witness is not None and val < -1e-7 * max(1.0, hs_norm(d_mat)):
            cert = {"kind": "dual_witness", "witness": witness, "value": val}
            return Verdict(Status.OUT, val, cert)
        return Verdict(Status.UNKNOWN, -split.residual, None, heuristic=True)

    raise ValueError(f"unknown cone {cone!r}")


def verify_certificate(d_mat: np.ndarray, verdict: Verdict) -> float:
    """Re-evaluate an Out certificate; returns the violation magnitude (> 0)."""
    cert = verdict.certificate
    if verdict.status != Status.OUT or cert is None:
        raise ValueError("only Out verdicts carry re-verifiable certificates")
    kind = cert["kind"]
    if kind == "eigvec":
        mat = choi.partial_transpose(d_mat) if cert["partial_transpose"] else d_mat
        v = cert["vector"]
        return -float(np.real(np.vdot(v, mat @ v)))
    if kind == "product_pair":
        phi = choi.choi_to_map(d_mat)
        xi, eta = cert["xi"], cert["eta"]
        out = choi.apply_map(phi, np.outer(xi, xi.conj()))
        return -float(np.real(np.vdot(eta, out @ eta)))
    if kind == "dual_witness":
        w = cert["witness"]
        lam = min(min_eig(w), min_eig(choi.partial_transpose(w)))
        if lam < -1e-8:
            raise ValueError("dual witness is not PPT on re-check")
        return -hs_inner(d_mat, w)
    if kind == "note":
        return -verdict.margin
    raise ValueError(f"cannot re-verify certificate kind {kind!r}")


# ---------------------------------------------------------------------------
# Slice membership.
# ---------------------------------------------------------------------------

def _sym_gauge_feasible(y: np.ndarray, n: int, total: float, height: float,
                        params: OracleParams, iters: int = 4000) -> bool:
    """Feasibility of y = alpha p - beta q, p,q in the PPT base, alpha+beta = total.

    Dykstra over {a PSD, a PT-PSD, a - y PSD, a - y PT-PSD, <a, e> = alpha}.
    """
    alpha = (total + height) / 2
    if alpha < -1e-12 or alpha - height < -1e-12:
        return False
    d = n * n
    e = np.eye(d, dtype=complex) / np.sqrt(d)
    a = psd_part(y) + alpha * e
    corr = [np.zeros_like(y) for _ in range(5)]

    def proj(x, k):
        if k == 0:
            return psd_part(x)
        if k == 1:
            return choi.partial_transpose(psd_part(choi.partial_transpose(x)))
        if k == 2:
            return y + psd_part(x - y)
        if k == 3:
            return y + choi.partial_transpose(psd_part(choi.partial_transpose(x - y)))
        return x + (alpha - hs_inner(x, e)) * e

    for _ in range(iters):
        moved = 0.0
        for k in range(5):
            z = proj(a + corr[k], k)
            corr[k] = a + corr[k] - z
            moved = max(moved, hs_norm(z - a))
            a = z
        if moved < 1e-12:
            break
    resid = max(
        -min_eig(a), -min_eig(choi.partial_transpose(a)),
        -min_eig(a - y), -min_eig(choi.partial_transpose(a - y)),
        abs(hs_inner(a, e) - alpha),
    )
    return resid <= 1e-6 * max(1.0, hs_norm(y))


def sym_membership(y: np.ndarray, cone: Cone, n: int, params: OracleParams) -> Verdict:
    """Membership in the symmetrized body conv(-C^b ∪ C^b), origin at zero."""
    y = require_hermitian(y, what="sym input")
    if cone in (Cone.CP, Cone.CCP):
        # exact: the symmetrized PSD base is the trace-norm ball of radius n
        z = y if cone == Cone.CP else choi.partial_transpose(y)
        tn = trace_norm(z)
        margin = float(n - tn)
        if margin >= -params.slice_tol:
            return Verdict(Status.IN, margin)
        return Verdict(Status.OUT, margin, {"kind": "note", "text": "trace norm exceeds n"})
    if cone == Cone.T:
        e = np.eye(n * n, dtype=complex) / n
        h = hs_inner(y, e)
        if abs(h) > 1 + params.slice_tol:
            return Verdict(Status.OUT, float(1 - abs(h)), {"kind": "note", "text": "height exceeds one"})
        if hs_norm(y) <= params.slice_tol:
            return Verdict(Status.IN, 1.0)
        ok = _sym_gauge_feasible(y, n, 1.0 + params.slice_tol, h, params)
        status = Status.IN if ok else Status.OUT
        return Verdict(status, 0.0 if ok else -1.0,
                       None if ok else {"kind": "note", "text": "mass-one split infeasible"},
                       heuristic=True)
    raise UnsupportedSliceError(
        f"sym slice needs a projection oracle; none available for cone {cone.value}")


def sym_gauge(y: np.ndarray, cone: Cone, n: int, params: OracleParams,
              steps: int = 40) -> float:
    """Gauge of y in the symmetrized body (bisection on total mass)."""
    if cone in (Cone.CP, Cone.CCP):
        z = y if cone == Cone.CP else choi.partial_transpose(y)
        return trace_norm(z) / n
    if cone != Cone.T:
        raise UnsupportedSliceError(f"sym gauge unavailable for cone {cone.value}")
    e = np.eye(n * n, dtype=complex) / n
    h = hs_inner(y, e)
    lo, hi = abs(h), max(2.0, 2 * abs(h) + 2 * hs_norm(y) * np.sqrt(n * n - 1))
    while not _sym_gauge_feasible(y, n, hi, h, params):
        hi *= 2
        if hi > 1e6:
            raise RuntimeError("sym gauge bisection failed to bracket")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if _sym_gauge_feasible(y, n, mid, h, params):
            hi = mid
        else:
            lo = mid
    return hi


def slice_membership(d_mat: np.ndarray, body: BodySpec) -> Verdict:
    """Cone membership joined with the body's slice constraint."""
    params = body.params
    d_mat = require_hermitian(d_mat, what="slice input")
    n = choi._side(d_mat)
    if n != body.n:
        raise ValueError(f"matrix is for n={n}, body expects n={body.n}")

    if body.slice == Slice.SYM:
        return sym_membership(d_mat, body.cone, n, params)
    if body.slice == Slice.SYM_POLAR:
        dual = DUAL[body.cone]
        e = np.eye(n * n, dtype=complex) / n
        v1 = cone_membership(e - d_mat, dual, params)
        if v1.status == Status.OUT:
            return Verdict(Status.OUT, v1.margin, v1.certificate, v1.heuristic)
        v2 = cone_membership(e + d_mat, dual, params)
        margin = min(v1.margin, v2.margin)
        if v2.status == Status.OUT:
            return Verdict(Status.OUT, margin, v2.certificate, v2.heuristic)
        status = Status.UNKNOWN if Status.UNKNOWN in (v1.status, v2.status) else Status.IN
        return Verdict(status, margin, None, v1.heuristic or v2.heuristic)

    base = cone_membership(d_mat, body.cone, params)
    if body.slice == Slice.CONE or base.status == Status.OUT:
        return base

    if body.slice == Slice.BASE:
        resid = abs(np.trace(d_mat).real - n)
        ok = resid <= params.slice_tol
    elif body.slice == Slice.TP:
        resid = hs_norm(choi.partial_trace(d_mat, "B") - np.eye(n))
        ok = resid <= params.slice_tol
    elif body.slice == Slice.TNI:
        if body.cone != Cone.CP:
            raise UnsupportedSliceError("trace-non-increasing slice is defined for CP only")
        lam = min_eig(np.eye(n) - choi.partial_trace(d_mat, "B"))
        resid = max(0.0, -lam)
        ok = lam >= -params.slice_tol
    else:
        raise UnsupportedSliceError(f"unknown slice {body.slice!r}")

    if not ok:
        cert = {"kind": "note", "text": f"slice residual {resid:.3e}"}
        return Verdict(Status.OUT, -float(resid), cert, base.heuristic)
    return Verdict(base.status, base.margin, base.certificate, base.heuristic)


# ---------------------------------------------------------------------------
# Support functions of the bases.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Support:
    """Support value, possibly an interval [lo, hi]."""

    lo: float
    hi: float
    exact: bool = True
    heuristic: bool = False

    @property
    def value(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def is_interval(self) -> bool:
        return self.hi - self.lo > 1e-12 * max(1.0, abs(self.hi))


def _qubit_product_max(m_mat: np.ndarray, restarts: int = 8) -> float:
    """Max of the product quadratic form for N = 2 via Bloch alternation."""
    cm = np.einsum("kji,ij->k", _PAULI_KRON, m_mat).real.reshape(4, 4)
    c00 = float(cm[0, 0])
    u, v, r = cm[1:, 0], cm[0, 1:], cm[1:, 1:]
    starts = [np.array(s, dtype=float) for s in
              ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))]
    rng = np.random.default_rng(11)
    while len(starts) < restarts + 6:
        a = rng.standard_normal(3)
        starts.append(a / np.linalg.norm(a))
    best = -np.inf
    for a in starts:
        for _ in range(40):
            w = v + r.T @ a
            nw = np.linalg.norm(w)
            b = w / nw if nw > 1e-15 else np.array([0.0, 0.0, 1.0])
            z = u + r @ b
            nz = np.linalg.norm(z)
            a_new = z / nz if nz > 1e-15 else a
            if np.linalg.norm(a_new - a) < 1e-14:
                a = a_new
                break
            a = a_new
        val = (c00 + u @ a + np.linalg.norm(v + r.T @ a)) / 4.0
        best = max(best, val)
    return float(best)


def _check_direction(u: np.ndarray, n: int) -> np.ndarray:
    u = require_hermitian(u, what="direction")
    if abs(np.trace(u).real) > 1e-9:
        raise ValueError("support directions must be traceless (tangent to the base)")
    nrm = hs_norm(u)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"support directions must be unit HS norm, got {nrm}")
    return u


def _sp_certain_member(d_mat: np.ndarray, n: int, params: OracleParams,
                       pool_size: int) -> bool:
    """One-sided separability test used inside gauge bisection."""
    if min_eig(d_mat) < -_psd_tol(d_mat, params):
        return False
    if min_eig(choi.partial_transpose(d_mat)) < -_psd_tol(d_mat, params):
        return False
    if n == 2:
        return True
    tr = np.trace(d_mat).real
    if tr <= 0:
        return hs_norm(d_mat) <= params.slice_tol
    dist = hs_norm(n * d_mat / tr - choi.choi_center(n))
    if dist <= 1.0 / np.sqrt(n * n - 1):
        return True
    small = replace(params, sep_pool_size=min(pool_size, params.sep_pool_size))
    resid, _, _ = _separable_nnls(d_mat, n, small)
    return resid <= params.sep_residual_tol


def support_function(u: np.ndarray, body: BodySpec,
                     body_points: np.ndarray | None = None) -> Support:
    """Support of the body in direction u (unit, traceless), origin at the center.

    CP, CcP and D bases are exact eigenvalue expressions.  The PPT base
    returns an interval (sampled lower bound, intersection upper bound); the
    SP base a see-saw lower bound flagged heuristic; the P base a gauge
    bisection through the duality with the separable base.
    """
    params = body.params
    n = body.n
    u = _check_direction(u, n)
    if body.slice == Slice.SYM:
        if body.cone == Cone.CP:
            return Support(n * float(np.max(np.abs(np.linalg.eigvalsh(u)))),
                           n * float(np.max(np.abs(np.linalg.eigvalsh(u)))))
        if body.cone == Cone.CCP:
            ut = choi.partial_transpose(u)
            val = n * float(np.max(np.abs(np.linalg.eigvalsh(ut))))
            return Support(val, val)
        raise UnsupportedSliceError("sym support available for CP/CcP only")
    if body.slice != Slice.BASE:
        raise UnsupportedSliceError("support functions are defined on base slices")

    cone = body.cone
    if cone == Cone.CP:
        val = n * max_eig(u)
        return Support(val, val)
    if cone == Cone.CCP:
        val = n * max_eig(choi.partial_transpose(u))
        return Support(val, val)
    if cone == Cone.D:
        val = n * max(max_eig(u), max_eig(choi.partial_transpose(u)))
        return Support(val, val)

    center = choi.choi_center(n)
    if cone == Cone.T:
        hi = n * min(max_eig(u), max_eig(choi.partial_transpose(u)))
        lo = 0.0
        # feasible lower bounds: project each one-sided argmax into the PPT base
        for mat in (u, choi.partial_transpose(u)):
            spec = eigh_desc(mat)
            v = spec.eigenvectors[:, 0]
            point = _project_ppt_trace1(np.outer(v, v.conj()), n, iters=80) * n
            lo = max(lo, hs_inner(u, point - center))
        if body_points is not None:
            proj = np.einsum("ij,kji->k", u, body_points).real
            lo = max(lo, float(np.max(proj)) - hs_inner(u, center))
        return Support(float(lo), float(hi), exact=False)

    if cone == Cone.SP:
        if n == 2:
            val = n * _qubit_product_max(u)
            return Support(val, val, exact=False, heuristic=True)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=params.seed, spawn_key=(303,)))
        val, _, _ = _seesaw_extreme(u, n, rng, max(8, params.seesaw_restarts // 4),
                                    params.seesaw_iters, minimize=False)
        return Support(n * val, n * val, exact=False, heuristic=True)

    if cone == Cone.P:
        # h_{P base}(u) = gauge of u in the reflected separable base
        r_in = 1.0 / np.sqrt(n * n - 1)
        r_out = np.sqrt(n * n - 1)

        def member(t: float) -> bool:
            return _sp_certain_member(center - u / t, n, params, pool_size=4000)

        lo, hi = r_in * (1 - 1e-9), r_out * (1 + 1e-9)
        if member(lo):
            return Support(lo, lo, exact=False, heuristic=n > 2)
        for _ in range(params.support_bisection_steps):
            mid = 0.5 * (lo + hi)
            if member(mid):
                hi = mid
            else:
                lo = mid
        return Support(hi, hi, exact=False, heuristic=n > 2)

    raise ValueError(f"unknown cone {cone!r}")


# ---------------------------------------------------------------------------
# The three-level positive-but-not-decomposable fixture.
# ---------------------------------------------------------------------------

def nondecomposable_fixture() -> np.ndarray:
    """Dynamical matrix of the classical three-level positive map that fails
    to split into CP + CcP.

    Diagonal units map to rotated two-point diagonals, off-diagonal units to
    their negatives.  Shipped as data; trust it only after validate_fixture.
    """
    d_mat = np.zeros((9, 9), dtype=complex)
    diags = [np.diag([1.0, 1.0, 0.0]), np.diag([0.0, 1.0, 1.0]), np.diag([1.0, 0.0, 1.0])]
    for m in range(3):
        d_mat[m * 3:(m + 1) * 3, m * 3:(m + 1) * 3] = diags[m]
        for mu in range(3):
            if m != mu:
                e = np.zeros((3, 3))
                e[m, mu] = 1.0
                d_mat[m * 3:(m + 1) * 3, mu * 3:(mu + 1) * 3] = -e
    return d_mat


def validate_fixture(params: OracleParams | None = None) -> dict:
    """Build-time validation of the fixture: block-positive by see-saw with a
    raised restart budget, and visibly outside the PSD cone."""
    params = params or OracleParams()
    d_mat = nondecomposable_fixture()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=params.seed, spawn_key=(404,)))
    val, _, _ = _seesaw_extreme(d_mat, 3, rng, restarts=500, iters=params.seesaw_iters,
                                minimize=True)
    lam = min_eig(d_mat)
    return {
        "seesaw_min": val,
        "min_eigenvalue": lam,
        "block_positive": val >= params.seesaw_threshold,
        "not_cp": lam < -1e-6,
    }
