import random

import numpy as np
import pytest

from pairml.lpr import (
    LprCiphertext,
    cbd_poly,
    decrypt,
    encrypt,
    keygen,
    measure_noise,
    NOISE_ETA,
)
from pairml.hss import (
    BeaverShare,
    PackingError,
    TripleGenSession,
    TripleStateError,
    dealer_convert_column,
    dealer_setup,
    hss_mult,
    mult_noise_bound,
    plan_packing,
)
from pairml.params import ProtocolParams
from pairml.ring import RingPoly, poly_to_vec, vec_to_poly


@pytest.fixture(scope="module")
def pr():
    return ProtocolParams.testing()  # N=256, ~30-bit p, q = p * two 60-bit primes


def _run_triples(params, dims, seed, b_override=None):
    """Full two-party triple run in one process; returns reconstruction data."""
    rng_d = random.Random(seed)
    rng0 = random.Random(seed + 1)
    rng1 = random.Random(seed + 2)
    p = params.p
    keys, d0, d1 = dealer_setup(params, rng_d)
    plan = plan_packing(params, dims)
    b0s, b1s, conv0, conv1 = {}, {}, {}, {}
    for job in plan.jobs:
        if b_override is not None:
            b_true = b_override[job.job_id]
            b0 = np.array([[rng0.randrange(p) for _ in range(job.m)]
                           for _ in range(job.n)], dtype=object)
            b1 = (np.array(b_true, dtype=object) - b0) % p
        else:
            b0 = np.array([[rng0.randrange(p) for _ in range(job.m)]
                           for _ in range(job.n)], dtype=object)
            b1 = np.array([[rng1.randrange(p) for _ in range(job.m)]
                           for _ in range(job.n)], dtype=object)
        b0s[job.job_id], b1s[job.job_id] = b0, b1
        lo, hi = plan.slot_range(job)
        for t in range(job.m):
            s0 = np.zeros(params.n_ring, dtype=np.int64)
            s1 = np.zeros(params.n_ring, dtype=np.int64)
            s0[lo:hi] = b0[:, t].astype(np.int64)
            s1[lo:hi] = b1[:, t].astype(np.int64)
            c0, c1 = dealer_convert_column(params, d0.s_share, d1.s_share,
                                           s0, s1, rng_d)
            conv0[(job.job_id, t)] = c0
            conv1[(job.job_id, t)] = c1
    sess0 = TripleGenSession(params, plan, 0, d0, b0s, conv0, rng0)
    sess1 = TripleGenSession(params, plan, 1, d1, b1s, conv1, rng1)
    blobs0, blobs1 = sess0.start(), sess1.start()
    sess0.feed(blobs1)
    sess1.feed(blobs0)
    return plan, sess0.output, sess1.output, (b0s, b1s)


def _check_triple(p, t0: BeaverShare, t1: BeaverShare, b0, b1):
    a = (t0.a.astype(object) + t1.a.astype(object)) % p
    B = (b0 + b1) % p
    c = (t0.c.astype(object) + t1.c.astype(object)) % p
    expect = (a @ B) % p
    return list(c) == list(expect)


# -- LPR ------------------------------------------------------------------------


def test_keygen_secret_ternary(pr):
    rng = random.Random(1)
    keys = keygen(pr, rng)
    q0 = pr.q_primes[0]
    for v in keys.s.data[0]:
        assert int(v) in (0, 1, q0 - 1)


def test_encrypt_decrypt_round_trip(pr):
    rng = random.Random(2)
    keys = keygen(pr, rng)
    m = RingPoly.random(pr, rng, tag="p")
    ct = encrypt(pr, keys.pk, m, rng)
    assert decrypt(pr, keys.s, ct) == m


def test_fresh_noise_under_bound(pr):
    rng = random.Random(3)
    keys = keygen(pr, rng)
    m = RingPoly.random(pr, rng, tag="p")
    ct = encrypt(pr, keys.pk, m, rng)
    assert measure_noise(pr, keys.s, ct, m) <= ct.noise_bound


def test_homomorphic_add(pr):
    rng = random.Random(4)
    keys = keygen(pr, rng)
    z = RingPoly.zero(pr, tag="p")
    csum = encrypt(pr, keys.pk, z, rng) + encrypt(pr, keys.pk, z, rng)
    assert decrypt(pr, keys.s, csum) == z
    ma, mb = RingPoly.random(pr, rng, tag="p"), RingPoly.random(pr, rng, tag="p")
    ca, cb = encrypt(pr, keys.pk, ma, rng), encrypt(pr, keys.pk, mb, rng)
    csum = ca + cb
    assert decrypt(pr, keys.s, csum) == ma + mb
    assert measure_noise(pr, keys.s, csum, ma + mb) <= ca.noise_bound + cb.noise_bound


def test_cbd_range(pr):
    rng = random.Random(5)
    e = cbd_poly(pr, rng)
    q0 = pr.q_primes[0]
    for v in e.data[0]:
        c = int(v) if int(v) <= q0 // 2 else int(v) - q0
        assert abs(c) <= NOISE_ETA


def test_ciphertext_serialization(pr):
    rng = random.Random(6)
    keys = keygen(pr, rng)
    ct = encrypt(pr, keys.pk, RingPoly.random(pr, rng, tag="p"), rng)
    buf = ct.serialize()
    again = LprCiphertext.deserialize(pr, buf)
    assert again.serialize() == buf
    assert decrypt(pr, keys.s, again) == decrypt(pr, keys.s, ct)
    other = ProtocolParams.testing(n_ring=512)
    with pytest.raises(ValueError):
        LprCiphertext.deserialize(other, buf)


# -- dealer ---------------------------------------------------------------------


def test_dealer_setup_share_identity(pr):
    rng = random.Random(7)
    keys, d0, d1 = dealer_setup(pr, rng)
    assert d0.s_share + d1.s_share == keys.s
    m = RingPoly.random(pr, rng, tag="p")
    assert decrypt(pr, keys.s, encrypt(pr, d0.pk, m, rng)) == m


def test_dealer_convert_column_zero(pr):
    rng = random.Random(8)
    keys, d0, d1 = dealer_setup(pr, rng)
    z = np.zeros(pr.n_ring, dtype=np.int64)
    c0, c1 = dealer_convert_column(pr, d0.s_share, d1.s_share, z, z, rng)
    assert c0.ys_share + c1.ys_share == RingPoly.zero(pr, tag="q")
    assert c0.y_share + c1.y_share == RingPoly.zero(pr, tag="q")


def test_dealer_convert_column_matches_direct(pr):
    rng = random.Random(9)
    keys, d0, d1 = dealer_setup(pr, rng)
    col = np.array([rng.randrange(pr.p) for _ in range(pr.n_ring)], dtype=np.int64)
    sh0 = np.array([rng.randrange(pr.p) for _ in range(pr.n_ring)], dtype=np.int64)
    sh1 = (col - sh0) % pr.p
    c0, c1 = dealer_convert_column(pr, d0.s_share, d1.s_share, sh0, sh1, rng)
    direct = vec_to_poly(pr, col).lift_to_q(centered=True) * keys.s
    assert c0.ys_share + c1.ys_share == direct
    # rerandomization: same input, different shares, same sum
    c0b, c1b = dealer_convert_column(pr, d0.s_share, d1.s_share, sh0, sh1, rng)
    assert c0b.ys_share != c0.ys_share
    assert c0b.ys_share + c1b.ys_share == direct


# -- Mult -----------------------------------------------------------------------


def test_hss_mult_zero_plaintext(pr):
    rng = random.Random(10)
    keys, d0, d1 = dealer_setup(pr, rng)
    ct = encrypt(pr, keys.pk, RingPoly.zero(pr, tag="p"), rng)
    col = np.array([rng.randrange(pr.p) for _ in range(pr.n_ring)], dtype=np.int64)
    sh0 = np.array([rng.randrange(pr.p) for _ in range(pr.n_ring)], dtype=np.int64)
    sh1 = (col - sh0) % pr.p
    c0, c1 = dealer_convert_column(pr, d0.s_share, d1.s_share, sh0, sh1, rng)
    o0 = hss_mult(pr, 0, c0.y_share, c0.ys_share, ct)
    o1 = hss_mult(pr, 1, c1.y_share, c1.ys_share, ct)
    got = (o0.astype(object) + o1.astype(object)) % pr.p
    assert not any(got)


def test_hss_mult_random_product(pr):
    rng = random.Random(11)
    keys, d0, d1 = dealer_setup(pr, rng)
    x = [rng.randrange(pr.p) for _ in range(pr.n_ring)]
    y = [rng.randrange(pr.p) for _ in range(pr.n_ring)]
    ct = encrypt(pr, keys.pk, vec_to_poly(pr, x), rng)
    sh0 = np.array([rng.randrange(pr.p) for _ in range(pr.n_ring)], dtype=np.int64)
    sh1 = (np.array(y, dtype=np.int64) - sh0) % pr.p
    c0, c1 = dealer_convert_column(pr, d0.s_share, d1.s_share, sh0, sh1, rng)
    o0 = hss_mult(pr, 0, c0.y_share, c0.ys_share, ct)
    o1 = hss_mult(pr, 1, c1.y_share, c1.ys_share, ct)
    got = poly_to_vec(RingPoly.from_coeffs(
        pr, (o0.astype(object) + o1.astype(object)) % pr.p, tag="p"))
    assert list(got) == [a * b % pr.p for a, b in zip(x, y)]
    assert mult_noise_bound(pr, ct) * 4 < pr.delta


# -- packing ------------------------------------------------------------------------


def test_plan_two_jobs_one_poly(pr):
    plan = plan_packing(pr, [(128, 4), (128, 4)])
    assert plan.seg_len == 128 and plan.k == 2
    assert plan.n_polys == 1 and plan.ciphertext_count == 1
    assert plan.jobs[0].seg != plan.jobs[1].seg


def test_plan_full_width_identity(pr):
    plan = plan_packing(pr, [(pr.n_ring, 2)])
    assert plan.k == 1 and plan.seg_len == pr.n_ring
    assert plan.ciphertext_count == 1


def test_plan_ceiling_formula(pr):
    jobs = [(32, 3)] * 10  # 10 segments of 32 -> ceil(320/256) = 2 polys
    plan = plan_packing(pr, jobs)
    demand = sum(32 for _ in jobs)
    assert plan.ciphertext_count == -(-demand // pr.n_ring)


def test_plan_oversized_rejected(pr):
    with pytest.raises(PackingError):
        plan_packing(pr, [(pr.n_ring + 1, 1)])


# -- end-to-end triples ----------------------------------------------------------------


def test_triples_identity_matrix(pr):
    n = 8
    eye = np.eye(n, dtype=object)
    plan, out0, out1, (b0s, b1s) = _run_triples(pr, [(n, n)], 100,
                                                b_override={0: eye})
    a = (out0[0].a.astype(object) + out1[0].a.astype(object)) % pr.p
    c = (out0[0].c.astype(object) + out1[0].c.astype(object)) % pr.p
    assert list(c) == list(a)


def test_triples_random_8x8(pr):
    for seed in range(200, 206):
        plan, out0, out1, (b0s, b1s) = _run_triples(pr, [(8, 8)], seed)
        assert _check_triple(pr.p, out0[0], out1[0], b0s[0], b1s[0])


def test_triples_packed_pair(pr):
    plan, out0, out1, (b0s, b1s) = _run_triples(pr, [(8, 8), (8, 8)], 300)
    assert plan.ciphertext_count == 1  # both triples share one ciphertext
    for j in range(2):
        assert _check_triple(pr.p, out0[j], out1[j], b0s[j], b1s[j])


def test_triples_rectangular(pr):
    plan, out0, out1, (b0s, b1s) = _run_triples(pr, [(16, 5)], 400)
    assert _check_triple(pr.p, out0[0], out1[0], b0s[0], b1s[0])


def test_packed_vs_unpacked_ciphertext_economy(pr):
    # k jobs of width N/k share one ciphertext; unpacked they need one each
    k = 4
    n = pr.n_ring // k
    packed = plan_packing(pr, [(n, 2)] * k)
    assert packed.ciphertext_count == 1
    unpacked = [plan_packing(pr, [(n, 2)]) for _ in range(k)]
    assert sum(pl.ciphertext_count for pl in unpacked) == k


def test_session_double_start_raises(pr):
    rng = random.Random(12)
    keys, d0, d1 = dealer_setup(pr, rng)
    plan = plan_packing(pr, [(8, 1)])
    b = {0: np.zeros((8, 1), dtype=object)}
    conv = {}
    s0 = np.zeros(pr.n_ring, dtype=np.int64)
    c0, c1 = dealer_convert_column(pr, d0.s_share, d1.s_share, s0, s0, rng)
    conv[(0, 0)] = c0
    sess = TripleGenSession(pr, plan, 0, d0, b, conv, rng)
    sess.start()
    with pytest.raises(TripleStateError):
        sess.start()


def test_beaver_share_consume_once(pr):
    sh = BeaverShare(0, np.zeros(1, dtype=np.int64),
                     np.zeros((1, 1), dtype=object), np.zeros(1, dtype=np.int64))
    sh.consume()
    with pytest.raises(TripleStateError):
        sh.consume()


def test_rounding_failure_rate_sample(pr):
    # ~8 * 256 = 2048 coefficients; at the configured margin none may fail
    fails = total = 0
    for seed in range(500, 508):
        plan, out0, out1, (b0s, b1s) = _run_triples(pr, [(16, 16)], seed)
        p = pr.p
        a = (out0[0].a.astype(object) + out1[0].a.astype(object)) % p
        B = (b0s[0] + b1s[0]) % p
        c = (out0[0].c.astype(object) + out1[0].c.astype(object)) % p
        expect = (a @ B) % p
        total += len(c)
        fails += sum(int(x != y) for x, y in zip(c, expect))
    assert fails == 0
