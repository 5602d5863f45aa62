"""Beaver triple generation from homomorphic secret sharing.

The servers hold additive shares of a random vector a and matrix B and want
shares of c = a*B without revealing either.  Each server encrypts its share
of a (packed into ring slots), the ciphertexts are exchanged and summed, and
the HSS Mult instruction applied per packed column turns the ciphertext of a
plus dealer-supplied shares of (B[i], B[i]*s) into additive shares of the
slot-wise products, whose segment sums are the c entries.

The dealer here is an ideal stand-in for the garbled-circuit steps of the
original setup/model-loading flow: stateless, takes both parties' inputs,
returns fresh random sharings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lpr import LprCiphertext, LprKeys, encrypt, keygen
from .params import ProtocolParams
from .ring import RingPoly, rns_context, vec_to_poly, poly_to_vec


class PackingError(ValueError):
    pass


class TripleStateError(RuntimeError):
    pass


# -- packing ------------------------------------------------------------------------


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class PackJob:
    job_id: int
    n: int
    m: int
    poly: int  # which a-poly / ciphertext bank
    seg: int   # segment index within the poly


@dataclass(frozen=True)
class PackPlan:
    """Slot layout packing several (n, m) triple jobs into shared polynomials.

    Segment length is uniform (the largest padded n), so segments never
    overlap and ciphertext count is the slot-demand ceiling.
    """

    n_ring: int
    seg_len: int
    k: int  # segments per poly
    jobs: tuple[PackJob, ...]

    @property
    def n_polys(self) -> int:
        return max(j.poly for j in self.jobs) + 1

    @property
    def ciphertext_count(self) -> int:
        return self.n_polys

    def slot_range(self, job: PackJob) -> tuple[int, int]:
        start = job.seg * self.seg_len
        return start, start + job.n

    def bank_columns(self, poly: int) -> int:
        return max((j.m for j in self.jobs if j.poly == poly), default=0)


def plan_packing(params: ProtocolParams, jobs: list[tuple[int, int]]) -> PackPlan:
    """Greedy first-fit assignment of jobs to poly segments."""
    n_ring = params.n_ring
    if not jobs:
        raise PackingError("no jobs to pack")
    for n, m in jobs:
        if n < 1 or m < 1:
            raise PackingError(f"bad job dims ({n}, {m})")
        if n > n_ring:
            raise PackingError(
                f"job width {n} exceeds ring dimension {n_ring}; "
                "split oversized products upstream")
    seg_len = max(_next_pow2(n) for n, _ in jobs)
    k = n_ring // seg_len
    packed = []
    for jid, (n, m) in enumerate(jobs):
        packed.append(PackJob(job_id=jid, n=n, m=m, poly=jid // k, seg=jid % k))
    return PackPlan(n_ring=n_ring, seg_len=seg_len, k=k, jobs=tuple(packed))


# -- ideal dealer -------------------------------------------------------------------


@dataclass(frozen=True)
class DealerSetup:
    """Per-party output of the key-setup functionality."""

    pk: tuple[RingPoly, RingPoly]
    s_share: RingPoly  # additive share of s over R_q


@dataclass(frozen=True)
class ConvertedColumn:
    """Per-party output of the column conversion: shares of (y, y*s) over R_q,
    where y is the slot-placed polynomial encoding of one matrix column."""

    y_share: RingPoly
    ys_share: RingPoly


def dealer_setup(params: ProtocolParams, rng) -> tuple[LprKeys, DealerSetup, DealerSetup]:
    """Ideal key dealer: one keygen, fresh additive split of s.

    Returns the full keys only so trusted-test harnesses can measure noise;
    the protocol parties receive just their DealerSetup.
    """
    keys = keygen(params, rng)
    sh0 = RingPoly.random(params, rng, tag="q")
    sh1 = keys.s - sh0
    return keys, DealerSetup(keys.pk, sh0), DealerSetup(keys.pk, sh1)


def dealer_convert_column(params: ProtocolParams, s0: RingPoly, s1: RingPoly,
                          col0: np.ndarray, col1: np.ndarray, rng
                          ) -> tuple[ConvertedColumn, ConvertedColumn]:
    """Ideal conversion: slot-placed column shares -> R_q shares of (y, y*s).

    col0/col1 are length-N slot vectors (already positioned per the pack
    plan).  The functionality is stateless: the secret is reconstructed from
    the callers' key shares for the duration of the call only.
    """
    p = params.p
    s = s0 + s1
    slots = [(int(a) + int(b)) % p for a, b in zip(col0, col1)]
    y = vec_to_poly(params, slots)
    y_q = y.lift_to_q(centered=True)
    ys = y_q * s
    y_sh0 = RingPoly.random(params, rng, tag="q")
    ys_sh0 = RingPoly.random(params, rng, tag="q")
    out0 = ConvertedColumn(y_share=y_sh0, ys_share=ys_sh0)
    out1 = ConvertedColumn(y_share=y_q - y_sh0, ys_share=ys - ys_sh0)
    return out0, out1


# -- the Mult instruction -------------------------------------------------------------


def hss_mult(params: ProtocolParams, party: int, y_share: RingPoly,
             ys_share: RingPoly, ct: LprCiphertext) -> np.ndarray:
    """Party's additive mod-p share of x*y from ct(x) and shares of (y, y*s).

    t_b = c0*sh_b(y) + c1*sh_b(y*s) over R_q; rounding each coefficient by
    p/q turns the pair into additive shares of the ring product x*y mod p,
    up to the configured failure probability.
    """
    t = ct.c0 * y_share + ct.c1 * ys_share
    delta = params.delta
    p = params.p
    return np.array([(v + delta // 2) // delta % p for v in t.coeff_ints()],
                    dtype=np.int64)


def mult_noise_bound(params: ProtocolParams, ct: LprCiphertext) -> int:
    """Analytic |y * e_ct| bound used to validate the rounding margin."""
    return params.n_ring * (params.p // 2) * ct.noise_bound


# -- triple generation protocol --------------------------------------------------------


@dataclass
class BeaverShare:
    """One server's share of (a, B, c = a*B) for one job."""

    job_id: int
    a: np.ndarray  # (n,) mod-p
    b_mat: np.ndarray  # (n, m) mod-p, dtype object
    c: np.ndarray  # (m,) mod-p
    consumed: bool = False

    def consume(self):
        if self.consumed:
            raise TripleStateError("Beaver triple consumed twice")
        self.consumed = True


class TripleGenSession:
    """Party-side state machine for one generate_triples run.

    start() returns serialized ciphertexts of this party's packed a-shares
    (the only wide-area payload); feed() takes the peer's ciphertexts and
    completes the run locally via Mult.
    """

    def __init__(self, params: ProtocolParams, plan: PackPlan, party: int,
                 setup: DealerSetup,
                 b_shares: dict[int, np.ndarray],
                 converted: dict[tuple[int, int], ConvertedColumn],
                 rng):
        self.params = params
        self.plan = plan
        self.party = party
        self.setup = setup
        self.b_shares = b_shares
        self.converted = converted
        self.rng = rng
        self.a_shares: dict[int, np.ndarray] = {}
        self.my_cts: list[LprCiphertext] = []
        self.output: list[BeaverShare] | None = None
        self._started = False

    def start(self) -> list[bytes]:
        if self._started:
            raise TripleStateError("triple session already started")
        self._started = True
        params, plan = self.params, self.plan
        p = params.p
        slot_vecs = [np.zeros(params.n_ring, dtype=np.int64)
                     for _ in range(plan.n_polys)]
        for job in plan.jobs:
            a = np.array([self.rng.randrange(p) for _ in range(job.n)],
                         dtype=np.int64)
            self.a_shares[job.job_id] = a
            lo, hi = plan.slot_range(job)
            slot_vecs[job.poly][lo:hi] = a
        self.my_cts = [
            encrypt(params, self.setup.pk, vec_to_poly(params, vec), self.rng)
            for vec in slot_vecs
        ]
        return [ct.serialize() for ct in self.my_cts]

    def feed(self, peer_ct_blobs: list[bytes]) -> None:
        params, plan = self.params, self.plan
        p = params.p
        if len(peer_ct_blobs) != plan.n_polys:
            raise TripleStateError("ciphertext count mismatch")
        cts = [mine + LprCiphertext.deserialize(params, blob)
               for mine, blob in zip(self.my_cts, peer_ct_blobs)]
        c_shares = {job.job_id: np.zeros(job.m, dtype=np.int64)
                    for job in plan.jobs}
        for poly_idx in range(plan.n_polys):
            bank_jobs = [j for j in plan.jobs if j.poly == poly_idx]
            for t in range(plan.bank_columns(poly_idx)):
                y_share = ys_share = None
                users = [j for j in bank_jobs if t < j.m]
                for job in users:
                    conv = self.converted[(job.job_id, t)]
                    if y_share is None:
                        y_share, ys_share = conv.y_share, conv.ys_share
                    else:
                        y_share = y_share + conv.y_share
                        ys_share = ys_share + conv.ys_share
                prod = hss_mult(params, self.party, y_share, ys_share,
                                cts[poly_idx])
                slots = poly_to_vec(RingPoly.from_coeffs(params, prod, tag="p"))
                for job in users:
                    lo, hi = plan.slot_range(job)
                    c_shares[job.job_id][t] = int(np.sum(
                        slots[lo:hi].astype(object))) % p
        self.output = [
            BeaverShare(job_id=job.job_id, a=self.a_shares[job.job_id],
                        b_mat=self.b_shares[job.job_id],
                        c=c_shares[job.job_id])
            for job in plan.jobs
        ]
        return None
