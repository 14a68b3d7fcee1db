import numpy as np
import pytest
from scipy.stats import chi2

from mapcones import choi, randgen
from mapcones.cones import BodySpec, Cone, Slice, Status, slice_membership
from mapcones.matops import hs_norm, is_psd, min_eig
from mapcones.randgen import (
    RngStream,
    ball_body,
    body_from_spec,
    cube_body,
    ginibre,
    haar_unitary,
    hit_and_run_step,
    random_channel_tp,
    random_product_state,
    random_state_hs,
    start_state,
)


def test_stream_determinism():
    a = RngStream(42, 3).generator().standard_normal(16)
    b = RngStream(42, 3).generator().standard_normal(16)
    c = RngStream(42, 4).generator().standard_normal(16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_ginibre_moments():
    rng = RngStream(7).generator()
    z = ginibre(1000, 1000, rng)
    mean = z.mean()
    # 1e6 draws of unit-variance entries: mean within 4 sigma of zero
    assert abs(mean) < 4 / np.sqrt(z.size)
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01


def test_ginibre_seed_reproducible():
    z1 = ginibre(2, 2, RngStream(5).generator())[0, 0]
    z2 = ginibre(2, 2, RngStream(5).generator())[0, 0]
    assert z1 == z2


def test_random_state_hs_properties():
    rng = RngStream(8).generator()
    acc = np.zeros((4, 4), dtype=complex)
    k = 20_000
    for _ in range(k):
        rho = random_state_hs(4, rng)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        acc += rho
    assert np.max(np.abs(acc / k - np.eye(4) / 4)) < 1e-2
    assert min_eig(random_state_hs(4, rng)) > -1e-14


def test_random_state_d1():
    rho = random_state_hs(1, RngStream(3).generator())
    assert rho.shape == (1, 1)
    assert rho[0, 0] == pytest.approx(1.0)


def test_haar_unitary_properties():
    rng = RngStream(9).generator()
    d = 4
    u = haar_unitary(d, rng)
    assert np.linalg.norm(u @ u.conj().T - np.eye(d)) < 1e-10
    # |U_00|^2 has mean 1/d under the invariant measure
    k = 100_000
    g = (rng.standard_normal((k, d, d)) + 1j * rng.standard_normal((k, d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.einsum("kii->ki", r).copy()
    ph /= np.abs(ph)
    u00 = np.abs(q[:, :, 0] * ph[:, None, 0])[:, 0] ** 2
    sigma = u00.std() / np.sqrt(k)
    assert abs(u00.mean() - 1 / d) < 3 * sigma + 1e-4


def test_haar_unitary_d1():
    u = haar_unitary(1, RngStream(2).generator())
    assert abs(abs(u[0, 0]) - 1) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_random_channel_tp(n):
    rng = RngStream(11).generator()
    d = random_channel_tp(n, rng)
    assert slice_membership(d, BodySpec(Cone.CP, n, Slice.TP)).status == Status.IN
    assert np.trace(d).real == pytest.approx(n, abs=1e-10)
    assert np.linalg.norm(choi.partial_trace(d, "B") - np.eye(n)) < 1e-10


def test_random_channel_mean_is_tp():
    rng = RngStream(12).generator()
    acc = np.zeros((4, 4), dtype=complex)
    k = 10_000
    for _ in range(k):
        acc += random_channel_tp(2, rng)
    mean = acc / k
    assert np.linalg.norm(choi.partial_trace(mean, "B") - np.eye(2)) < 1e-10


def test_random_product_state():
    rng = RngStream(13).generator()
    for n in (2, 3):
        rho = random_product_state(n, rng)
        w = np.linalg.eigvalsh(rho)
        assert w[-1] == pytest.approx(1.0, abs=1e-12)  # rank one
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        assert min_eig(choi.partial_transpose(rho)) > -1e-12  # separable => PPT
    from mapcones.cones import cone_membership

    v = cone_membership(2 * random_product_state(2, rng), Cone.SP)
    assert v.status == Status.IN


# ---------------------------------------------------------------------------
# hit-and-run
# ---------------------------------------------------------------------------

def test_walk_determinism():
    body = body_from_spec(BodySpec(Cone.CP, 2, Slice.BASE))

    def run():
        rng = RngStream(21, 0).generator()
        state = start_state(body)
        for _ in range(50):
            hit_and_run_step(state, rng)
        return state.current

    assert np.array_equal(run(), run())


def test_ball_moment_against_rejection_oracle():
    # independent oracle: rejection sampling from the bounding cube
    r = 1 / np.sqrt(2)
    rng = RngStream(22).generator()
    pts = rng.uniform(-r, r, size=(400_000, 3))
    inside = pts[np.linalg.norm(pts, axis=1) <= r]
    oracle = float(np.mean(np.sum(inside ** 2, axis=1)))
    assert oracle == pytest.approx((r ** 2) * 3 / 5, rel=0.01)

    body = ball_body(3, r)
    state = start_state(body)
    wrng = RngStream(23).generator()
    acc = 0.0
    k = 100_000
    for _ in range(k):
        hit_and_run_step(state, wrng)
        acc += float(state.current @ state.current)
    assert acc / k == pytest.approx(0.3, rel=0.02)


def test_oracle_chord_agrees_with_analytic():
    from mapcones.randgen import chord_endpoints

    r = 1 / np.sqrt(2)
    analytic = ball_body(3, r)
    rng = RngStream(24).generator()
    x = np.array([0.1, -0.2, 0.3])
    for _ in range(50):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        t_lo, t_hi = analytic.chord(x, u)
        b_lo, b_hi = chord_endpoints(x, u, analytic.member, step0=r / 2, tmax=4 * r)
        assert b_lo == pytest.approx(t_lo, abs=1e-8)
        assert b_hi == pytest.approx(t_hi, abs=1e-8)


def test_ball_moment_oracle_path():
    # same walk through the doubling + bisection chord finder
    body = ball_body(3, 1 / np.sqrt(2), analytic_chord=False)
    state = start_state(body)
    rng = RngStream(25).generator()
    acc = 0.0
    k = 20_000
    for _ in range(k):
        hit_and_run_step(state, rng)
        acc += float(state.current @ state.current)
    assert acc / k == pytest.approx(0.3, rel=0.04)


def test_cp_base_walk_stays_in_body():
    body = body_from_spec(BodySpec(Cone.CP, 2, Slice.BASE))
    state = start_state(body)
    rng = RngStream(26).generator()
    for k in range(20_000):
        hit_and_run_step(state, rng)
        if k % 20 == 0:
            d = state.current
            assert np.trace(d).real == pytest.approx(2.0, abs=1e-8)
            assert is_psd(d, 1e-8)
    assert state.stuck == 0


def test_tp_walk_constraint_drift():
    # visited points keep the affine residual bounded over a long walk
    body = body_from_spec(BodySpec(Cone.CP, 2, Slice.TP))
    state = start_state(body)
    rng = RngStream(27).generator()
    worst = 0.0
    for k in range(100_000):
        hit_and_run_step(state, rng)
        if k % 50 == 0:
            resid = np.linalg.norm(choi.partial_trace(state.current, "B") - np.eye(2))
            worst = max(worst, resid)
            assert is_psd(state.current, 1e-8)
    assert worst <= 1e-8


def test_cube_uniformity_chi2():
    # marginal histograms over 1e6 samples, 20 bins per axis
    body = cube_body(3)
    state = start_state(body)
    rng = RngStream(28).generator()
    thin = 5
    k = 1_000_000
    counts = np.zeros((3, 20), dtype=np.int64)
    for _ in range(k):
        for _ in range(thin):
            hit_and_run_step(state, rng)
        idx = np.minimum(((state.current + 1) * 10).astype(int), 19)
        for ax in range(3):
            counts[ax, idx[ax]] += 1
    expected = k / 20
    stat = float(((counts - expected) ** 2 / expected).sum())
    dof = 3 * (20 - 1)
    p = float(chi2.sf(stat, dof))
    assert p > 0.01, f"chi2={stat:.1f}, dof={dof}, p={p:.4f}"


def test_stuck_chord_keeps_point():
    body = ball_body(3, 1e-13)
    state = start_state(body)
    rng = RngStream(29).generator()
    before = state.current.copy()
    hit_and_run_step(state, rng)
    assert state.stuck == 1
    assert np.array_equal(state.current, before)


def test_walkable_bodies_reject_unsupported():
    with pytest.raises(ValueError):
        body_from_spec(BodySpec(Cone.P, 3, Slice.BASE))
    with pytest.raises(ValueError):
        body_from_spec(BodySpec(Cone.SP, 3, Slice.BASE))
    with pytest.raises(ValueError):
        body_from_spec(BodySpec(Cone.T, 2, Slice.TNI))


def test_sample_dump_roundtrip(tmp_path):
    body = body_from_spec(BodySpec(Cone.CP, 2, Slice.BASE))
    samples, _ = randgen.run_walk(body, RngStream(31).generator(),
                                  n_samples=20, thin=2, burn=10)
    path = tmp_path / "samples.bin"
    randgen.save_samples(path, samples, body, seed=31)
    header, back = randgen.load_samples(path)
    assert header["spec"] == {"cone": "CP", "n": 2, "slice": "base"}
    assert header["count"] == 20
    assert np.array_equal(back, samples)

    csv_path = tmp_path / "obs.csv"
    randgen.save_observables_csv(csv_path, samples, {
        "trace": lambda s: np.trace(s).real,
        "dist": lambda s: np.linalg.norm(s - np.eye(4) / 2),
    })
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].strip() == "index,trace,dist"
    assert len(lines) == 21
    assert float(lines[1].split(",")[1]) == pytest.approx(2.0, abs=1e-8)


def test_volume_seed_determinism():
    from mapcones.geometry import VolumeSchedule, volume_mcmc

    sched = VolumeSchedule(chains=2, samples_per_phase=24, thin=1, ratio_abort=1.0)
    a = volume_mcmc(cube_body(3), seed=9, schedule=sched)
    b = volume_mcmc(cube_body(3), seed=9, schedule=sched)
    c = volume_mcmc(cube_body(3), seed=10, schedule=sched)
    assert a.vrad.value == b.vrad.value
    assert a.log_volume.value == b.log_volume.value
    assert a.vrad.value != c.vrad.value


def test_tni_body_walk():
    body = body_from_spec(BodySpec(Cone.CP, 2, Slice.TNI))
    state = start_state(body)
    rng = RngStream(30).generator()
    for k in range(2000):
        hit_and_run_step(state, rng)
        if k % 40 == 0:
            d = state.current
            assert is_psd(d, 1e-8)
            assert min_eig(np.eye(2) - choi.partial_trace(d, "B")) > -1e-8
