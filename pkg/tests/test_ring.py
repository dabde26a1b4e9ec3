import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elsq import kernels
from elsq.ring import RingContext, negacyclic_schoolbook


def poly(coeffs, d):
    out = np.zeros(d, dtype=object)
    out[: len(coeffs)] = [int(c) for c in coeffs]
    return out


def test_schoolbook_wraparound():
    # (1 + x)^2 = 1 + 2x + x^2 = 2x in Z[x]/(x^2 + 1)
    out = negacyclic_schoolbook([1, 1], [1, 1], 2)
    assert out.tolist() == [0, 2]


def test_schoolbook_negacyclic_sign():
    d = 8
    half = poly([0] * (d // 2) + [1], d)
    out = negacyclic_schoolbook(half, half, d)
    assert out.tolist() == [-1] + [0] * (d - 1)


def test_ntt_primes_properties():
    two_d = 64
    primes = kernels.ntt_primes(200, two_d)
    assert len(set(primes)) == len(primes)
    total_bits = 0
    for p in primes:
        assert p < 2 ** 31
        assert (p - 1) % two_d == 0
        assert kernels._is_probable_prime(p)
        total_bits += p.bit_length() - 1
    assert total_bits > 200


def test_forward_inverse_identity():
    d = 32
    tr = kernels.PrimeTransform(kernels.ntt_primes(20, 2 * d)[0], d)
    rng = np.random.default_rng(5)
    a = rng.integers(0, tr.p, size=d, dtype=np.int64)
    back = tr.inverse(tr.forward(a))
    assert np.array_equal(back, a)


def test_ring_rejects_bad_degree():
    with pytest.raises(ValueError):
        RingContext(48, 64)
    with pytest.raises(ValueError):
        RingContext(1, 64)


@pytest.mark.parametrize("d", [8, 32, 64])
def test_multiply_matches_schoolbook_random(d):
    rng = np.random.default_rng(d)
    bound = 2 ** 100
    ctx = RingContext(d, 2 * 101 + d.bit_length())
    for _ in range(10):
        a = np.array([int(x) for x in rng.integers(-(2 ** 62), 2 ** 62, size=d)], dtype=object)
        b = np.array([int(x) for x in rng.integers(-(2 ** 62), 2 ** 62, size=d)], dtype=object)
        a = a * int(bound // 2 ** 62)
        b = b * int(bound // 2 ** 62)
        assert ctx.multiply(a, b).tolist() == negacyclic_schoolbook(a, b, d).tolist()


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(min_value=-(2 ** 40), max_value=2 ** 40), min_size=8, max_size=8),
    st.lists(st.integers(min_value=-(2 ** 40), max_value=2 ** 40), min_size=8, max_size=8),
)
def test_multiply_matches_schoolbook_property(a, b):
    d = 8
    ctx = RingContext(d, 2 * 41 + 4)
    pa = poly(a, d)
    pb = poly(b, d)
    assert ctx.multiply(pa, pb).tolist() == negacyclic_schoolbook(pa, pb, d).tolist()


def test_reconstruct_is_centered():
    ctx = RingContext(8, 40)
    val = -(2 ** 39)
    res = ctx.to_residues(poly([val], 8))
    rec = ctx.reconstruct(res)
    assert rec[0] == val


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.integers(min_value=-(2 ** 120), max_value=2 ** 120), min_size=16, max_size=16
    )
)
def test_chunked_residues_match_direct_reduction(coeffs):
    ctx = RingContext(16, 120)
    p = poly(coeffs, 16)
    fast = ctx.to_residues(p)
    assert np.array_equal(fast, ctx._to_residues_ref(p))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_chunked_crt_matches_object_combine(data):
    ctx = RingContext(8, 90)
    rows = [
        data.draw(
            st.lists(st.integers(min_value=0, max_value=p - 1), min_size=8, max_size=8)
        )
        for p in ctx.primes
    ]
    residues = np.array(rows, dtype=np.int64)
    for centered in (True, False):
        fast = ctx.reconstruct(residues, centered=centered)
        ref = ctx._reconstruct_ref(residues, centered=centered)
        assert fast.tolist() == ref.tolist()


def test_oversized_coefficients_fall_back_to_direct_reduction():
    ctx = RingContext(8, 60)
    huge = poly([1 << 200], 8)
    assert np.array_equal(ctx.to_residues(huge), ctx._to_residues_ref(huge))


def test_pointwise_acc_matches_sum_of_products():
    d = 16
    ctx = RingContext(d, 80)
    rng = np.random.default_rng(3)
    polys = [
        (
            np.array([int(x) for x in rng.integers(-50, 50, size=d)], dtype=object),
            np.array([int(x) for x in rng.integers(-50, 50, size=d)], dtype=object),
        )
        for _ in range(4)
    ]
    acc = ctx.zeros_ntt()
    expected = np.zeros(d, dtype=object)
    for a, b in polys:
        ctx.pointwise_acc(acc, ctx.ntt(a), ctx.ntt(b))
        expected = expected + negacyclic_schoolbook(a, b, d)
    ctx.intt(acc)
    assert ctx.reconstruct(acc).tolist() == expected.tolist()
