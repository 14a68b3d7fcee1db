"""Random ensembles and the hit-and-run sampler over convex bodies.

Ensembles: Ginibre rectangles, Hilbert-Schmidt random states, Haar unitaries,
trace-preserving channels (induced measure, used for seeding only), product
projectors.  The walker handles any `Body`: a membership oracle plus an
orthonormal direction basis spanning the body's affine slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import choi
from .cones import BodySpec, Cone, OracleParams, Slice, qubit_block_positive
from .matops import (
    base_tangent_basis,
    hermitian_basis,
    hs_norm,
    is_psd,
    product_basis,
    symmetrize,
    tp_tangent_basis,
)


@dataclass(frozen=True)
class RngStream:
    """Reproducible generator handle: (seed, stream_id) pins every draw."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        )

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id * 1000 + k + 1)


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """iid standard complex Gaussian entries (unit second moment)."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_state_hs(d: int, rng: np.random.Generator) -> np.ndarray:
    """Hilbert-Schmidt random density matrix: G G† normalized, G square Ginibre."""
    g = ginibre(d, d, rng)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR of Ginibre with the R-diagonal phases absorbed."""
    q, r = np.linalg.qr(ginibre(d, d, rng))
    ph = np.diagonal(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_channel_tp(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random Choi matrix in CP ∩ TP.

    W = G G†, then the block-index sandwich by (Tr_B W)^{-1/2} enforces the
    trace-preserving constraint.  Induced measure, not uniform on the slice;
    use for seeding walks and witness sweeps only.
    """
    d = n * n
    for _ in range(64):
        g = ginibre(d, d, rng)
        w = g @ g.conj().T
        y = choi.partial_trace(w, "B")
        lam, v = np.linalg.eigh(y)
        if lam[0] > 1e-12:
            inv_root = (v / np.sqrt(lam)) @ v.conj().T
            s = np.kron(inv_root, np.eye(n, dtype=complex))
            return symmetrize(s @ w @ s)
    raise RuntimeError("partial trace persistently singular (measure-zero event)")


def random_product_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Pure product projector |x><x| (x) |y><y| on the doubled system."""
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    y /= np.linalg.norm(y)
    return np.kron(np.outer(x, x.conj()), np.outer(y, y.conj()))


def random_ppt_state(n: int, rng: np.random.Generator, max_tries: int = 2000) -> np.ndarray:
    """Random PPT state: rejection at n = 2, Dykstra projection beyond."""
    d = n * n
    from .cones import _project_ppt_trace1  # local import keeps module load light
    if n == 2:
        for _ in range(max_tries):
            rho = random_state_hs(d, rng)
            if is_psd(choi.partial_transpose(rho), 1e-12):
                return rho
    rho = random_state_hs(d, rng)
    return _project_ppt_trace1(rho, n, iters=150)


def random_decomposable_base(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random point of the decomposable base: PSD + transposed-PSD, trace n."""
    d = n * n
    t = rng.uniform(0.0, 1.0)
    a = random_state_hs(d, rng)
    b = choi.partial_transpose(random_state_hs(d, rng))
    return n * (t * a + (1 - t) * b)


def random_separable_base(n: int, rng: np.random.Generator, terms: int = 12) -> np.ndarray:
    """Random separable base point: mixture of product projectors, trace n."""
    w = rng.dirichlet(np.ones(terms))
    acc = np.zeros((n * n, n * n), dtype=complex)
    for k in range(terms):
        acc += w[k] * random_product_state(n, rng)
    return n * acc


# ---------------------------------------------------------------------------
# Bodies.
# ---------------------------------------------------------------------------

@dataclass
class Body:
    """Sampling view of a convex body.

    `center` must be strictly interior with the ball of radius `inradius`
    around it contained in the body; `basis` spans the affine slice
    (orthonormal in HS norm), or is None for plain coordinate bodies.
    `chord`, when set, returns exact chord endpoints and bypasses the oracle
    bisection (toy bodies only; validated against the oracle path in tests).
    """

    name: str
    dim: int
    center: np.ndarray
    inradius: float
    outradius: float
    member: Callable[[np.ndarray], bool]
    basis: np.ndarray | None = None
    slice_fix: Callable[[np.ndarray], np.ndarray] | None = None
    chord: Callable[[np.ndarray, np.ndarray], tuple[float, float]] | None = None
    spec: BodySpec | None = None

    def direction(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.dim)
        z /= np.linalg.norm(z)
        if self.basis is None:
            return z
        return np.tensordot(z, self.basis, axes=(0, 0))


def body_from_spec(spec: BodySpec) -> Body:
    """Walkable body for a BodySpec, with a fast equivalent membership oracle.

    Supported for walking: CP/CcP/T/SP/P/D bases at n = 2 (P and D through the
    exact two-level block-positivity test, the sets coincide there), CP/CcP/T
    bases at any n, CP trace-preserving and trace-non-increasing slices.
    """
    n = spec.n
    d = n * n
    tol = spec.params.psd_tol_rel * n
    ident = np.eye(n)
    center = choi.choi_center(n)
    r_in = 1.0 / np.sqrt(d - 1)
    r_out = np.sqrt(d - 1)

    def psd(x):
        return is_psd(x, tol)

    def ppt(x):
        return is_psd(x, tol) and is_psd(choi.partial_transpose(x), tol)

    cone = spec.cone
    if spec.slice == Slice.BASE:
        if cone in (Cone.P, Cone.D):
            if n != 2:
                raise ValueError(f"no fast membership to walk the {cone.value} base at n={n}")

            def member(x):
                return qubit_block_positive(x, tol)
        elif cone == Cone.CP:
            member = psd
        elif cone == Cone.CCP:
            def member(x):
                return is_psd(choi.partial_transpose(x), tol)
        elif cone in (Cone.T, Cone.SP):
            if cone == Cone.SP and n != 2:
                raise ValueError("separable base walks are only exact at n=2 (PPT equivalence)")
            member = ppt
        else:
            raise ValueError(f"cannot walk cone {cone!r}")
        return Body(
            name=f"{cone.value}-base-n{n}", dim=d * d - 1, center=center,
            inradius=r_in, outradius=r_out, member=member,
            basis=base_tangent_basis(n), spec=spec,
        )

    if spec.slice == Slice.TP:
        if cone not in (Cone.CP, Cone.CCP, Cone.T):
            raise ValueError(f"no fast membership to walk the {cone.value} TP section")
        slice_tol = spec.params.slice_tol

        def member(x, _c=cone):
            if _c == Cone.CP and not psd(x):
                return False
            if _c == Cone.CCP and not is_psd(choi.partial_transpose(x), tol):
                return False
            if _c == Cone.T and not ppt(x):
                return False
            return hs_norm(choi.partial_trace(x, "B") - ident) <= slice_tol

        return Body(
            name=f"{cone.value}-tp-n{n}", dim=d * d - d, center=center,
            inradius=r_in, outradius=r_out, member=member,
            basis=tp_tangent_basis(n), slice_fix=choi.tp_project, spec=spec,
        )

    if spec.slice == Slice.TNI:
        if cone != Cone.CP:
            raise ValueError("trace-non-increasing slice is defined for CP only")

        def member(x):
            return psd(x) and is_psd(ident - choi.partial_trace(x, "B"), tol)

        return Body(
            name=f"cp-tni-n{n}", dim=d * d, center=center / 2,
            inradius=1.0 / (2 * n), outradius=n + 0.5 + 1e-9, member=member,
            basis=product_basis(n), spec=spec,
        )

    raise ValueError(f"no walkable body for slice {spec.slice!r}")


def op_interval_body(n: int, tol: float = 1e-9) -> Body:
    """The operator interval {M : 0 <= M <= I} in Herm(n)."""
    ident = np.eye(n)

    def member(x):
        return is_psd(x, tol) and is_psd(ident - x, tol)

    return Body(
        name=f"op-interval-n{n}", dim=n * n, center=np.eye(n, dtype=complex) / 2,
        inradius=0.5 * (1 - 1e-12), outradius=np.sqrt(n) / 2 + 1e-9,
        member=member, basis=hermitian_basis(n),
    )


def cube_body(m: int, analytic_chord: bool = True) -> Body:
    """The coordinate cube [-1, 1]^m."""

    def member(x):
        return float(np.max(np.abs(x))) <= 1.0 + 1e-12

    def chord(x, u):
        # intersect the line x + t u with every slab
        with np.errstate(divide="ignore"):
            t1 = (-1.0 - x) / u
            t2 = (1.0 - x) / u
        lo = np.where(u != 0, np.minimum(t1, t2), -np.inf)
        hi = np.where(u != 0, np.maximum(t1, t2), np.inf)
        return float(np.max(lo)), float(np.min(hi))

    return Body(
        name=f"cube-{m}", dim=m, center=np.zeros(m), inradius=1.0,
        outradius=np.sqrt(m), member=member,
        chord=chord if analytic_chord else None,
    )


def ball_body(m: int, radius: float, analytic_chord: bool = True) -> Body:
    """The Euclidean ball of the given radius in R^m (e.g. the two-level
    state set is this body at m = 3, radius 1/sqrt(2))."""

    def member(x):
        return float(np.linalg.norm(x)) <= radius * (1 + 1e-12)

    def chord(x, u):
        b = float(x @ u)
        c = float(x @ x) - radius * radius
        disc = max(b * b - c, 0.0)
        root = np.sqrt(disc)
        return -b - root, -b + root

    return Body(
        name=f"ball-{m}", dim=m, center=np.zeros(m), inradius=radius,
        outradius=radius, member=member,
        chord=chord if analytic_chord else None,
    )


# ---------------------------------------------------------------------------
# Hit-and-run.
# ---------------------------------------------------------------------------

@dataclass
class WalkState:
    """Walker position inside a body; `current` always passes membership."""

    body: Body
    current: np.ndarray
    steps_taken: int = 0
    stuck: int = 0
    rejected: int = 0

    @property
    def affine_basis(self) -> np.ndarray | None:
        return self.body.basis


def start_state(body: Body) -> WalkState:
    if not body.member(body.center):
        raise ValueError(f"body center is not a member of {body.name}")
    return WalkState(body=body, current=np.array(body.center, copy=True))


def chord_endpoints(x: np.ndarray, u: np.ndarray, member: Callable,
                    step0: float, tmax: float,
                    bisection_steps: int = 40) -> tuple[float, float]:
    """Chord of the body through x along u by doubling plus bisection.

    Endpoint parameters are resolved to ~1e-10 absolute (40 halvings of an
    O(1) bracket); `member(x)` must hold on entry.
    """
    out = []
    for sign in (1.0, -1.0):
        t = step0
        while member(x + sign * t * u) and t < tmax:
            t *= 2
        lo, hi = (t / 2 if t > step0 else 0.0), t
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            if member(x + sign * mid * u):
                lo = mid
            else:
                hi = mid
        out.append(sign * lo)
    return out[1], out[0]


def hit_and_run_step(state: WalkState, rng: np.random.Generator) -> WalkState:
    """One hit-and-run move: uniform direction in the slice tangent, uniform
    point on the chord through the current position."""
    body = state.body
    x = state.current
    u = body.direction(rng)
    if body.chord is not None:
        t_lo, t_hi = body.chord(x, u)
    else:
        t_lo, t_hi = chord_endpoints(
            x, u, body.member, step0=body.inradius / 2, tmax=4 * body.outradius
        )
    state.steps_taken += 1
    if t_hi - t_lo < 1e-12:
        state.stuck += 1
        return state
    for _ in range(3):
        t = rng.uniform(t_lo, t_hi)
        xn = x + t * u
        if body.member(xn):
            state.current = xn
            break
        state.rejected += 1
        t_lo *= 0.5
        t_hi *= 0.5
    if state.steps_taken % 512 == 0 and state.current.ndim == 2:
        state.current = symmetrize(state.current)
    if body.slice_fix is not None and state.steps_taken % 1000 == 0:
        state.current = body.slice_fix(state.current)
    return state


def run_walk(body: Body, rng: np.random.Generator, n_samples: int,
             thin: int, burn: int, state: WalkState | None = None):
    """Burn in, then collect `n_samples` states separated by `thin` steps."""
    if state is None:
        state = start_state(body)
    for _ in range(burn):
        hit_and_run_step(state, rng)
    samples = []
    for _ in range(n_samples):
        for _ in range(thin):
            hit_and_run_step(state, rng)
        samples.append(np.array(state.current, copy=True))
    return np.array(samples), state


# ---------------------------------------------------------------------------
# Sample dumps: JSON header line, then raw complex128 little-endian bytes.
# ---------------------------------------------------------------------------

def save_samples(path, samples: np.ndarray, body: Body, seed: int) -> None:
    """Dump walk samples: one JSON header line, then the raw array bytes."""
    import json

    arr = np.ascontiguousarray(samples, dtype=np.complex128)
    header = {
        "body": body.name,
        "spec": None if body.spec is None else {
            "cone": body.spec.cone.value, "n": body.spec.n,
            "slice": body.spec.slice.value,
        },
        "seed": seed,
        "count": int(arr.shape[0]),
        "shape": list(arr.shape),
        "dtype": "complex128-le",
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(arr.astype("<c16").tobytes())


def load_samples(path):
    """Inverse of save_samples; returns (header dict, samples array)."""
    import json

    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        raw = fh.read()
    arr = np.frombuffer(raw, dtype="<c16").reshape(header["shape"])
    return header, arr.astype(np.complex128)


def save_observables_csv(path, samples: np.ndarray, observables: dict) -> None:
    """One CSV row per sample; `observables` maps column name to a callable."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        names = list(observables)
        writer.writerow(["index"] + names)
        for k, s in enumerate(samples):
            writer.writerow([k] + [format(float(observables[c](s)), ".12g")
                                   for c in names])
