import numpy as np
import pytest

from elsq import fv
from elsq.encoding import EncodingConfig, encode_scalar
from elsq.ring import negacyclic_schoolbook

SMALL = fv.FvParams(d=16, t=2 ** 16 + 1, q=2 ** 60)


@pytest.fixture(scope="module")
def small_ctx():
    return fv.FvContext(SMALL)


@pytest.fixture(scope="module")
def small_keys(small_ctx):
    return fv.keygen(small_ctx, b"unit-test-keys")


def random_plaintext(rng, params):
    half = params.t // 2
    return np.array([int(x) for x in rng.integers(-half, half + 1, size=params.d)], dtype=object)


def test_params_validation():
    with pytest.raises(fv.FvParameterError):
        fv.FvParams(d=15, t=17, q=2 ** 30)
    with pytest.raises(fv.FvParameterError):
        fv.FvParams(d=16, t=2 ** 30, q=2 ** 20)
    with pytest.raises(fv.FvParameterError):
        fv.FvParams(d=16, t=1, q=2 ** 20)


def test_keygen_deterministic(small_ctx):
    k1 = fv.keygen(small_ctx, b"same-seed")
    k2 = fv.keygen(small_ctx, b"same-seed")
    assert k1.secret_key.tolist() == k2.secret_key.tolist()
    assert k1.public_key[0].tolist() == k2.public_key[0].tolist()
    assert all(
        a1.tolist() == a2.tolist() and b1.tolist() == b2.tolist()
        for (b1, a1), (b2, a2) in zip(k1.relin_key, k2.relin_key)
    )


def test_encrypt_decrypt_roundtrip(small_ctx, small_keys):
    rng = np.random.default_rng(7)
    for i in range(100):
        m = random_plaintext(rng, SMALL)
        ct = fv.encrypt(small_ctx, small_keys, m, b"enc-%d" % i)
        assert ct.level == 0
        back = fv.decrypt(small_ctx, small_keys, ct)
        assert back.tolist() == m.tolist()


def test_encrypt_is_randomized(small_ctx, small_keys):
    m = np.zeros(SMALL.d, dtype=object)
    m[0] = 42
    c1 = fv.encrypt(small_ctx, small_keys, m, b"seed-a")
    c2 = fv.encrypt(small_ctx, small_keys, m, b"seed-b")
    assert c1.parts[0].tolist() != c2.parts[0].tolist()
    assert fv.decrypt(small_ctx, small_keys, c1).tolist() == fv.decrypt(small_ctx, small_keys, c2).tolist()


def test_hom_add_identities(small_ctx, small_keys):
    rng = np.random.default_rng(13)
    t = SMALL.t
    for i in range(100):
        m1 = random_plaintext(rng, SMALL)
        m2 = random_plaintext(rng, SMALL)
        c1 = fv.encrypt(small_ctx, small_keys, m1, b"a%d" % i)
        c2 = fv.encrypt(small_ctx, small_keys, m2, b"b%d" % i)
        got = fv.decrypt(small_ctx, small_keys, fv.hom_add(small_ctx, c1, c2))
        want = small_ctx.centered_t((m1 + m2) % t)
        assert got.tolist() == want.tolist()
        got_rev = fv.decrypt(small_ctx, small_keys, fv.hom_add(small_ctx, c2, c1))
        assert got_rev.tolist() == want.tolist()


def test_hom_add_zero_is_identity(small_ctx, small_keys):
    rng = np.random.default_rng(17)
    m = random_plaintext(rng, SMALL)
    c = fv.encrypt(small_ctx, small_keys, m, b"z1")
    zero = fv.encrypt(small_ctx, small_keys, np.zeros(SMALL.d, dtype=object), b"z2")
    assert fv.decrypt(small_ctx, small_keys, fv.hom_add(small_ctx, c, zero)).tolist() == m.tolist()


def test_hom_mul_small_values(small_ctx, small_keys):
    two = fv.plaintext_from_int(SMALL, 2)
    three = fv.plaintext_from_int(SMALL, 3)
    c2 = fv.encrypt(small_ctx, small_keys, two, b"m2")
    c3 = fv.encrypt(small_ctx, small_keys, three, b"m3")
    prod = fv.hom_mul(small_ctx, c2, c3, small_keys)
    assert prod.level == 1
    assert len(prod.parts) == 2
    decoded = fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, prod))
    assert decoded == 6


def test_hom_mul_identity_element(small_ctx, small_keys):
    rng = np.random.default_rng(23)
    m = random_plaintext(rng, SMALL)
    c = fv.encrypt(small_ctx, small_keys, m, b"i1")
    one = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, 1), b"i2")
    assert fv.decrypt(small_ctx, small_keys, fv.hom_mul(small_ctx, c, one, small_keys)).tolist() == m.tolist()


def test_hom_mul_is_ring_product(small_ctx, small_keys):
    rng = np.random.default_rng(29)
    t = SMALL.t
    for i in range(100):
        m1 = random_plaintext(rng, SMALL)
        m2 = random_plaintext(rng, SMALL)
        c1 = fv.encrypt(small_ctx, small_keys, m1, b"p%d" % i)
        c2 = fv.encrypt(small_ctx, small_keys, m2, b"q%d" % i)
        got = fv.decrypt(small_ctx, small_keys, fv.hom_mul(small_ctx, c1, c2, small_keys))
        want = small_ctx.centered_t(negacyclic_schoolbook(m1, m2, SMALL.d) % t)
        assert got.tolist() == want.tolist()


def test_mul_then_add_vs_cleartext(small_ctx, small_keys):
    rng = np.random.default_rng(31)
    for i in range(20):
        a, b, c = (int(x) for x in rng.integers(-50, 50, size=3))
        ca = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, a), b"x%d" % i)
        cb = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, b), b"y%d" % i)
        cc = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, c), b"z%d" % i)
        expr = fv.hom_add(small_ctx, fv.hom_mul(small_ctx, ca, cb, small_keys), cc)
        got = fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, expr))
        assert got == a * b + c


def test_plain_ops(small_ctx, small_keys):
    seven = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, 7), b"s")
    doubled = fv.plain_mul(small_ctx, seven, fv.plaintext_from_int(SMALL, 2))
    assert doubled.level == 1
    assert fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, doubled)) == 14
    same = fv.plain_add(small_ctx, seven, np.zeros(SMALL.d, dtype=object))
    assert same.level == 0
    assert fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, same)) == 7
    shifted = fv.plain_add(small_ctx, seven, fv.plaintext_from_int(SMALL, -9))
    assert fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, shifted)) == -2


def test_weighted_sum_binomial_weights(small_ctx, small_keys):
    # mirrors the accelerated-combination pattern: sum of w_k * ct_k
    import math

    vals = [3, -5, 11]
    weights = [math.comb(2, j) for j in range(3)]
    cts = [
        fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, v), b"w%d" % i)
        for i, v in enumerate(vals)
    ]
    total = None
    for w, ct in zip(weights, cts):
        term = fv.plain_mul(small_ctx, ct, fv.plaintext_from_int(SMALL, w))
        total = term if total is None else fv.hom_add(small_ctx, total, term)
    got = fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, total))
    assert got == sum(w * v for w, v in zip(weights, vals))


def test_tensor_accumulator_matches_sum_of_muls(small_ctx, small_keys):
    rng = np.random.default_rng(37)
    pairs = [(int(a), int(b)) for a, b in rng.integers(-30, 30, size=(5, 2))]
    acc = fv.TensorAccumulator(small_ctx)
    for i, (a, b) in enumerate(pairs):
        ca = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, a), b"ta%d" % i)
        cb = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, b), b"tb%d" % i)
        acc.add_product(ca, cb)
    out = acc.finalize(small_keys)
    assert out.level == 1
    got = fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, out))
    assert got == sum(a * b for a, b in pairs)


def test_noise_budget_positive_and_monotone(small_ctx, small_keys):
    m = fv.plaintext_from_int(SMALL, 3)
    ct = fv.encrypt(small_ctx, small_keys, m, b"nb")
    fresh = fv.noise_budget(small_ctx, small_keys, ct)
    assert fresh > 0
    deeper = fv.hom_mul(small_ctx, ct, ct, small_keys)
    after_mul = fv.noise_budget(small_ctx, small_keys, deeper)
    assert after_mul < fresh
    summed = fv.hom_add(small_ctx, deeper, deeper)
    assert fv.noise_budget(small_ctx, small_keys, summed) <= after_mul


def test_hom_sub(small_ctx, small_keys):
    ca = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, 20), b"d1")
    cb = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, 33), b"d2")
    got = fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, fv.hom_sub(small_ctx, ca, cb)))
    assert got == -13


def test_full_stack_encoding_roundtrip(small_ctx, small_keys):
    cfg = EncodingConfig(phi=2)
    v = encode_scalar(1.23, cfg)
    assert v == 123
    ct = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, v), b"fs")
    assert fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, ct)) == 123


def test_ciphertext_serialization_roundtrip(small_ctx, small_keys):
    ct = fv.encrypt(small_ctx, small_keys, fv.plaintext_from_int(SMALL, -77), b"ser")
    blob = fv.serialize_ciphertext(SMALL, ct)
    params2, ct2 = fv.deserialize_ciphertext(blob)
    assert params2 == SMALL
    assert ct2.level == ct.level
    assert all(p1.tolist() == p2.tolist() for p1, p2 in zip(ct.parts, ct2.parts))
    assert fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, small_keys, ct2)) == -77


def test_key_serialization_roundtrip(small_ctx, small_keys):
    blob = fv.serialize_keys(SMALL, small_keys)
    params2, keys2 = fv.deserialize_keys(blob)
    assert params2 == SMALL
    assert keys2.secret_key.tolist() == small_keys.secret_key.tolist()
    ct = fv.encrypt(small_ctx, keys2, fv.plaintext_from_int(SMALL, 5), b"ks")
    assert fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, keys2, ct)) == 5
    prod = fv.hom_mul(small_ctx, ct, ct, keys2)
    assert fv.plaintext_to_int(SMALL, fv.decrypt(small_ctx, keys2, prod)) == 25
