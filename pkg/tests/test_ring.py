import random

import numpy as np
import pytest

from pairml.params import ProtocolParams, ParameterError, is_prime, ntt_prime
from pairml.ring import (
    DimensionError,
    ModulusError,
    RingPoly,
    negacyclic_mul,
    ntt_context,
    poly_to_vec,
    schoolbook_negacyclic,
    vec_to_poly,
)
from pairml.fixedpoint import (
    FixedPointCodec,
    RangeError,
    exact_truncate,
    to_signed,
    truncate_share,
)


@pytest.fixture(scope="module")
def tiny():
    # N=8 ring with a small prime, small enough for schoolbook oracles
    return ProtocolParams.generate(n_ring=8, p_bits=10, aux_bits=(40,),
                                   noise_margin=16, test_mode=True)


@pytest.fixture(scope="module")
def small():
    return ProtocolParams.testing()


def test_param_generation():
    pr = ProtocolParams.testing()
    assert is_prime(pr.p) and pr.p % (2 * pr.n_ring) == 1
    for qi in pr.q_primes:
        assert is_prime(qi) and qi % (2 * pr.n_ring) == 1
    assert pr.q % pr.p == 0
    assert pr.q // pr.p > (1 << pr.noise_margin)


def test_param_production_shape():
    # 52-bit plaintext prime over an 8192-dim ring
    p = ntt_prime(52, 2 * 8192)
    assert p.bit_length() == 52 and p % 16384 == 1


def test_param_file_round_trip(small):
    text = small.dump()
    again = ProtocolParams.load(text)
    assert again == small


def test_param_rejects_bad_modulus():
    with pytest.raises(ParameterError):
        ProtocolParams(p=17, n_ring=8, q_primes=(17, 97))


def test_ntt_matches_schoolbook(tiny):
    rng = random.Random(7)
    p, n = tiny.p, tiny.n_ring
    for _ in range(50):
        a = [rng.randrange(p) for _ in range(n)]
        b = [rng.randrange(p) for _ in range(n)]
        pa = RingPoly.from_coeffs(tiny, a)
        pb = RingPoly.from_coeffs(tiny, b)
        via_slots = (pa.to_slots() * pb.to_slots()).to_coeffs()
        expect = schoolbook_negacyclic(a, b, p)
        assert list(via_slots.data) == expect


def test_fft_mul_matches_schoolbook(tiny):
    rng = random.Random(8)
    p, n = tiny.p, tiny.n_ring
    for m in [p, tiny.q_primes[1]]:
        for _ in range(30):
            a = np.array([rng.randrange(m) for _ in range(n)], dtype=np.int64)
            b = np.array([rng.randrange(m) for _ in range(n)], dtype=np.int64)
            got = negacyclic_mul(a, b, m)
            assert list(got) == schoolbook_negacyclic(a, b, m)


def test_fft_mul_large_modulus_stress(small):
    # 60-bit prime at production-ish dimension exercises the limb split
    rng = random.Random(9)
    m = small.q_primes[1]
    n = small.n_ring
    a = np.array([rng.randrange(m) for _ in range(n)], dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)
    b[0] = 1  # multiplicative identity
    assert list(negacyclic_mul(a, b, m)) == list(a)
    # x^k rotation: multiply by x^(n/2), coefficients shift negacyclically
    c = np.zeros(n, dtype=np.int64)
    c[n // 2] = 1
    got = negacyclic_mul(a, c, m)
    expect = [(-int(a[(i - n // 2) % n])) % m if i < n // 2 else int(a[i - n // 2])
              for i in range(n)]
    assert list(got) == expect


def test_vec_poly_round_trip_exhaustive_small(tiny):
    p, n = tiny.p, tiny.n_ring
    for trial in range(200):
        rng = random.Random(trial)
        ln = rng.randrange(n + 1)
        v = [rng.randrange(p) for _ in range(ln)]
        poly = vec_to_poly(tiny, v)
        back = poly_to_vec(poly)
        assert list(back[:ln]) == v
        assert all(x == 0 for x in back[ln:])


def test_vec_poly_round_trip_large(small):
    rng = random.Random(11)
    v = [rng.randrange(small.p) for _ in range(small.n_ring)]
    assert list(poly_to_vec(vec_to_poly(small, v))) == v


def test_slot_homomorphism(tiny):
    rng = random.Random(12)
    p, n = tiny.p, tiny.n_ring
    u = [rng.randrange(p) for _ in range(n)]
    v = [rng.randrange(p) for _ in range(n)]
    prod = vec_to_poly(tiny, u) * vec_to_poly(tiny, v)
    slots = poly_to_vec(prod)
    assert list(slots) == [a * b % p for a, b in zip(u, v)]
    # against the schoolbook negacyclic product as an independent oracle
    direct = schoolbook_negacyclic(vec_to_poly(tiny, u).data,
                                   vec_to_poly(tiny, v).data, p)
    assert list(prod.to_coeffs().data) == direct


def test_vec_to_poly_zero_and_ones(small):
    zero = vec_to_poly(small, [0] * small.n_ring)
    assert not any(zero.data)
    ones = vec_to_poly(small, [1] * small.n_ring)
    rng = random.Random(3)
    a = RingPoly.random(small, rng)
    assert list(poly_to_vec(a * ones.to_coeffs() if a.form == "coeff" else a)) == \
        list(poly_to_vec(a))


def test_vec_to_poly_dimension_error(small):
    with pytest.raises(DimensionError):
        vec_to_poly(small, [0] * (small.n_ring + 1))


def test_poly_to_vec_rejects_mod_q(small):
    q = RingPoly.zero(small, tag="q")
    with pytest.raises(ModulusError):
        poly_to_vec(q)


def test_modulus_mismatch_raises(small):
    a = RingPoly.zero(small, tag="p")
    b = RingPoly.zero(small, tag="q")
    with pytest.raises(ModulusError):
        _ = a * b


def test_serialization_round_trip(small):
    rng = random.Random(4)
    for tag in ("p", "q"):
        poly = RingPoly.random(small, rng, tag=tag)
        buf = poly.serialize()
        assert len(buf) >= 16
        again = RingPoly.deserialize(small, buf)
        assert again == poly
        assert again.serialize() == buf


def test_ntt_big_prime():
    pr = ProtocolParams.generate(n_ring=8, p_bits=40, aux_bits=(60,),
                                 noise_margin=16, test_mode=True)
    rng = random.Random(5)
    a = [rng.randrange(pr.p) for _ in range(8)]
    b = [rng.randrange(pr.p) for _ in range(8)]
    pa, pb = RingPoly.from_coeffs(pr, a), RingPoly.from_coeffs(pr, b)
    got = (pa.to_slots() * pb.to_slots()).to_coeffs()
    assert list(got.data) == schoolbook_negacyclic(a, b, pr.p)


# -- fixed point ---------------------------------------------------------------


def test_fp_encode_known_values(small):
    codec = FixedPointCodec(small, scale_bits=12)
    assert codec.encode(0.0) == 0
    assert codec.encode(-1.0) == small.p - (1 << 12)
    assert codec.encode(1.5) == 6144  # 1.5 * 2^12


def test_fp_round_trip_random(small):
    codec = FixedPointCodec(small)
    rng = random.Random(13)
    bound = codec.magnitude_bound / codec.scale / 2
    tol = 2.0 ** -codec.fbits
    for _ in range(100_000):
        x = rng.uniform(-bound, bound)
        assert abs(codec.decode(codec.encode(x)) - x) <= tol


def test_fp_range_error(small):
    codec = FixedPointCodec(small)
    with pytest.raises(RangeError):
        codec.encode(float(small.p))


def test_signed_mapping(small):
    p = small.p
    assert to_signed(0, p) == 0
    assert to_signed(p - 1, p) == -1
    assert to_signed((p - 1) // 2, p) == (p - 1) // 2


def test_truncation_small_p_simulation():
    # exhaustive over a small prime: reconstructed truncation within +-1 of
    # signed floor division, for every secret and every share split
    p = 257
    f = 4
    fails = 0
    total = 0
    for z in list(range(0, 40)) + list(range(p - 40, p)):
        expect = exact_truncate(z, f, p)
        for s0 in range(p):
            s1 = (z - s0) % p
            got = (truncate_share(s0, f, 0, p) + truncate_share(s1, f, 1, p)) % p
            diff = to_signed(got - expect, p)
            total += 1
            if abs(diff) > 1:
                fails += 1
    # failure probability bounded by ~2*magnitude/p per element
    assert fails / total < 2 * 40 / p


def test_truncation_named_cases():
    p = ProtocolParams.testing().p
    f = 8
    rng = random.Random(14)
    for z in (1 << f, 0, p - (1 << f)):  # +1, 0, -1 after truncation
        expect = exact_truncate(z, f, p)
        for _ in range(200):
            s0 = rng.randrange(p)
            s1 = (z - s0) % p
            got = (truncate_share(s0, f, 0, p) + truncate_share(s1, f, 1, p)) % p
            assert abs(to_signed(got - expect, p)) <= 1
