"""Fan-Vercauteren somewhat-homomorphic encryption, single-modulus textbook form.

Plaintexts are polynomials over Z_t in Z[x]/(x^d + 1), ciphertexts pairs of
polynomials over Z_q. Multiplication tensors two ciphertexts, scales by t/q
with exact rounding, and relinearizes back to two parts with a base-w digit
decomposition key. No modulus switching and no bootstrapping: parameters are
chosen up front for the multiplicative depth of the target circuit.

All polynomial products run through the exact CRT/NTT machinery in ring.py.
Ciphertext parts are stored canonically in [0, q); lifts to centered
representatives happen at tensor and decryption boundaries. For dot products
the backend accumulates tensors in the transform domain and applies a single
rounding and relinearization per sum, which is both faster and strictly less
noisy than rounding every term.

Coefficient-magnitude correctness (every true integer coefficient staying
under t/2) is the planner's job; this module only guarantees arithmetic
mod t.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .ring import RingContext

SCHEME_VERSION = 1

# headroom bits for in-transform accumulation of tensor sums
_ACCUM_BITS = 32


class FvParameterError(ValueError):
    """Raised for structurally invalid scheme parameters."""


class FvUsageError(ValueError):
    """Raised for mismatched keys, params, or malformed ciphertexts."""


@dataclass(frozen=True)
class FvParams:
    """Scheme parameters: ring degree d, plaintext modulus t, ciphertext
    modulus q, error stddev sigma, relinearization base 2**relin_w_bits."""

    d: int
    t: int
    q: int
    sigma: float = 3.24
    relin_w_bits: int = 0

    def __post_init__(self):
        if self.d < 2 or self.d & (self.d - 1):
            raise FvParameterError(f"ring degree must be a power of two >= 2, got {self.d}")
        if self.t < 2:
            raise FvParameterError(f"plaintext modulus must be >= 2, got {self.t}")
        if self.q <= self.t:
            raise FvParameterError(f"need q > t, got q={self.q}, t={self.t}")
        if self.sigma <= 0:
            raise FvParameterError(f"error stddev must be positive, got {self.sigma}")
        if self.relin_w_bits == 0:
            # base grows with q so the digit count stays small at large moduli
            object.__setattr__(self, "relin_w_bits", max(8, self.q.bit_length() // 4))

    @property
    def delta(self) -> int:
        return self.q // self.t

    @property
    def qbits(self) -> int:
        return self.q.bit_length()

    @property
    def error_bound(self) -> int:
        """Hard bound of the centered binomial sampler (also its parameter)."""
        return max(1, round(2 * self.sigma * self.sigma))

    @property
    def relin_w(self) -> int:
        return 1 << self.relin_w_bits

    @property
    def relin_ell(self) -> int:
        return -(-self.qbits // self.relin_w_bits)


@dataclass
class Ciphertext:
    """parts: polynomials mod q (two, or three before relinearization);
    level counts multiplications on the deepest input path."""

    parts: list
    level: int = 0
    ntt_parts: list = field(default=None, repr=False, compare=False)

    def byte_size(self, params: FvParams) -> int:
        width = (params.qbits + 7) // 8
        return len(self.parts) * params.d * width


@dataclass
class KeyPair:
    secret_key: np.ndarray
    public_key: tuple
    relin_key: list
    _pk_ntt: tuple = field(default=None, repr=False, compare=False)
    _rlk_ntt: list = field(default=None, repr=False, compare=False)


class FvContext:
    """Binds parameters to the CRT/NTT ring machinery sized for them."""

    def __init__(self, params: FvParams):
        self.params = params
        product_bits = 2 * params.qbits + params.d.bit_length() + _ACCUM_BITS
        self.ring = RingContext(params.d, product_bits)

    # sampling ------------------------------------------------------------

    def _rng(self, seed: bytes):
        if not isinstance(seed, (bytes, bytearray)):
            raise FvUsageError("rng seed must be a byte string")
        return np.random.default_rng(np.random.SeedSequence(int.from_bytes(seed, "little")))

    def sample_uniform_q(self, rng) -> np.ndarray:
        q = self.params.q
        nbytes = (q.bit_length() + 7) // 8 + 8
        raw = rng.bytes(nbytes * self.params.d)
        out = np.empty(self.params.d, dtype=object)
        for i in range(self.params.d):
            out[i] = int.from_bytes(raw[i * nbytes : (i + 1) * nbytes], "little") % q
        return out

    def sample_ternary(self, rng) -> np.ndarray:
        return np.array([int(x) for x in rng.integers(-1, 2, size=self.params.d)], dtype=object)

    def sample_error(self, rng) -> np.ndarray:
        eta = self.params.error_bound
        ups = rng.integers(0, 2, size=(eta, self.params.d)).sum(axis=0)
        downs = rng.integers(0, 2, size=(eta, self.params.d)).sum(axis=0)
        return np.array([int(x) for x in (ups - downs)], dtype=object)

    # representation helpers ----------------------------------------------

    def mod_q(self, poly: np.ndarray) -> np.ndarray:
        return poly % self.params.q

    def centered_q(self, poly: np.ndarray) -> np.ndarray:
        q = self.params.q
        return np.where(poly > q >> 1, poly - q, poly)

    def centered_t(self, poly: np.ndarray) -> np.ndarray:
        t = self.params.t
        red = poly % t
        return np.where(red > t >> 1, red - t, red)

    def ntt_ct(self, ct: Ciphertext) -> list:
        """Transform-domain centered lifts of the parts, cached on the object."""
        if ct.ntt_parts is None:
            ct.ntt_parts = [self.ring.ntt(self.centered_q(p)) for p in ct.parts]
        return ct.ntt_parts

    def _round_scale(self, poly: np.ndarray) -> np.ndarray:
        """Elementwise round(t * x / q), exact on arbitrary-precision ints."""
        t, q = self.params.t, self.params.q
        return (2 * t * poly + q) // (2 * q)


def keygen(ctx: FvContext, seed: bytes) -> KeyPair:
    """Generate secret, public, and relinearization keys deterministically."""
    params = ctx.params
    rng = ctx._rng(seed)
    s = ctx.sample_ternary(rng)
    a = ctx.sample_uniform_q(rng)
    e = ctx.sample_error(rng)
    b = ctx.mod_q(-(ctx.ring.multiply(a, s) + e))
    s_sq = ctx.ring.multiply(s, s)
    rlk = []
    w = params.relin_w
    power = 1
    for _ in range(params.relin_ell):
        a_i = ctx.sample_uniform_q(rng)
        e_i = ctx.sample_error(rng)
        b_i = ctx.mod_q(-(ctx.ring.multiply(a_i, s) + e_i) + power * s_sq)
        rlk.append((b_i, a_i))
        power *= w
    return KeyPair(secret_key=s, public_key=(b, a), relin_key=rlk)


def _pk_ntt(ctx: FvContext, keys: KeyPair):
    if keys._pk_ntt is None:
        b, a = keys.public_key
        keys._pk_ntt = (ctx.ring.ntt(ctx.centered_q(b)), ctx.ring.ntt(ctx.centered_q(a)))
    return keys._pk_ntt


def _rlk_ntt(ctx: FvContext, keys: KeyPair):
    if keys._rlk_ntt is None:
        keys._rlk_ntt = [
            (ctx.ring.ntt(ctx.centered_q(b_i)), ctx.ring.ntt(ctx.centered_q(a_i)))
            for b_i, a_i in keys.relin_key
        ]
    return keys._rlk_ntt


def encrypt(ctx: FvContext, keys: KeyPair, m: np.ndarray, seed: bytes) -> Ciphertext:
    """Encrypt a plaintext polynomial (coefficients taken mod t)."""
    params = ctx.params
    m = np.asarray(m, dtype=object)
    if m.shape != (params.d,):
        raise FvUsageError(f"plaintext must have {params.d} coefficients")
    rng = ctx._rng(seed)
    u = ctx.sample_ternary(rng)
    e1 = ctx.sample_error(rng)
    e2 = ctx.sample_error(rng)
    pk0_hat, pk1_hat = _pk_ntt(ctx, keys)
    u_hat = ctx.ring.ntt(u)
    p0u = ctx.ring.reconstruct(ctx.ring.intt(ctx.ring.pointwise(pk0_hat, u_hat)))
    p1u = ctx.ring.reconstruct(ctx.ring.intt(ctx.ring.pointwise(pk1_hat, u_hat)))
    scaled_m = params.delta * ctx.centered_t(m)
    c0 = ctx.mod_q(scaled_m + p0u + e1)
    c1 = ctx.mod_q(p1u + e2)
    return Ciphertext(parts=[c0, c1], level=0)


def _eval_at_secret(ctx: FvContext, keys: KeyPair, ct: Ciphertext) -> np.ndarray:
    """Horner evaluation c0 + c1 s + c2 s^2 + ..., reduced mod q each step."""
    s = keys.secret_key
    acc = ct.parts[-1].astype(object)
    for part in reversed(ct.parts[:-1]):
        acc = ctx.mod_q(ctx.ring.multiply(acc, s) + part)
    return acc


def decrypt(ctx: FvContext, keys: KeyPair, ct: Ciphertext) -> np.ndarray:
    """Recover the plaintext polynomial, centered in (-t/2, t/2]."""
    lifted = ctx.centered_q(_eval_at_secret(ctx, keys, ct))
    return ctx.centered_t(ctx._round_scale(lifted))


def noise_budget(ctx: FvContext, keys: KeyPair, ct: Ciphertext) -> float:
    """Remaining log2 headroom before noise defeats decryption (<= 0 is bad)."""
    params = ctx.params
    m = decrypt(ctx, keys, ct)
    acc = _eval_at_secret(ctx, keys, ct)
    noise = ctx.centered_q(ctx.mod_q(acc - params.delta * m))
    worst = max(int(abs(c)) for c in noise)
    r_t = params.q - params.delta * params.t
    ceiling = (params.delta - r_t) / 2
    if worst == 0:
        worst = 1
    return math.log2(ceiling) - math.log2(worst)


def hom_add(ctx: FvContext, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    n = max(len(c1.parts), len(c2.parts))
    parts = []
    for i in range(n):
        p1 = c1.parts[i] if i < len(c1.parts) else 0
        p2 = c2.parts[i] if i < len(c2.parts) else 0
        parts.append(ctx.mod_q(p1 + p2))
    return Ciphertext(parts=parts, level=max(c1.level, c2.level))


def hom_neg(ctx: FvContext, ct: Ciphertext) -> Ciphertext:
    return Ciphertext(parts=[ctx.mod_q(-p) for p in ct.parts], level=ct.level)


def hom_sub(ctx: FvContext, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    return hom_add(ctx, c1, hom_neg(ctx, c2))


def plain_add(ctx: FvContext, ct: Ciphertext, p: np.ndarray) -> Ciphertext:
    """Add a plaintext polynomial; depth-free."""
    shifted = ctx.mod_q(ct.parts[0] + ctx.params.delta * ctx.centered_t(np.asarray(p, dtype=object)))
    return Ciphertext(parts=[shifted] + [part.copy() for part in ct.parts[1:]], level=ct.level)


def plain_mul(ctx: FvContext, ct: Ciphertext, p: np.ndarray) -> Ciphertext:
    """Multiply by a plaintext polynomial; counts one multiplicative level."""
    p_hat = ctx.ring.ntt(ctx.centered_t(np.asarray(p, dtype=object)))
    out = []
    for part_hat in ctx.ntt_ct(ct):
        prod = ctx.ring.pointwise(part_hat, p_hat)
        out.append(ctx.mod_q(ctx.ring.reconstruct(ctx.ring.intt(prod))))
    return Ciphertext(parts=out, level=ct.level + 1)


def relinearize(ctx: FvContext, parts3: list, keys: KeyPair) -> list:
    """Fold the quadratic part back onto (c0, c1) with the relin key."""
    params = ctx.params
    c0, c1, c2 = parts3
    digits = []
    rem = c2.astype(object)
    mask = params.relin_w - 1
    for _ in range(params.relin_ell):
        digits.append(rem & mask)
        rem = rem >> params.relin_w_bits
    acc0 = ctx.ring.zeros_ntt()
    acc1 = ctx.ring.zeros_ntt()
    for digit, (rb_hat, ra_hat) in zip(digits, _rlk_ntt(ctx, keys)):
        d_hat = ctx.ring.ntt(digit)
        ctx.ring.pointwise_acc(acc0, d_hat, rb_hat)
        ctx.ring.pointwise_acc(acc1, d_hat, ra_hat)
    add0 = ctx.ring.reconstruct(ctx.ring.intt(acc0))
    add1 = ctx.ring.reconstruct(ctx.ring.intt(acc1))
    return [ctx.mod_q(c0 + add0), ctx.mod_q(c1 + add1)]


class TensorAccumulator:
    """Accumulates ciphertext products in the transform domain.

    add_product tensors two 2-part ciphertexts pointwise; finalize applies the
    t/q rounding and relinearization once for the whole sum.
    """

    def __init__(self, ctx: FvContext):
        self.ctx = ctx
        self.acc = [ctx.ring.zeros_ntt() for _ in range(3)]
        self.level_in = 0
        self.count = 0

    def add_product(self, c1: Ciphertext, c2: Ciphertext):
        if len(c1.parts) != 2 or len(c2.parts) != 2:
            raise FvUsageError("tensor accumulation needs relinearized (2-part) inputs")
        ring = self.ctx.ring
        a0, a1 = self.ctx.ntt_ct(c1)
        b0, b1 = self.ctx.ntt_ct(c2)
        ring.pointwise_acc(self.acc[0], a0, b0)
        ring.pointwise_acc(self.acc[1], a0, b1)
        ring.pointwise_acc(self.acc[1], a1, b0)
        ring.pointwise_acc(self.acc[2], a1, b1)
        self.level_in = max(self.level_in, c1.level, c2.level)
        self.count += 1

    def finalize(self, keys: KeyPair) -> Ciphertext:
        if self.count == 0:
            raise FvUsageError("empty tensor accumulation")
        ctx = self.ctx
        parts3 = []
        for acc in self.acc:
            exact = ctx.ring.reconstruct(ctx.ring.intt(acc))
            parts3.append(ctx.mod_q(ctx._round_scale(exact)))
        parts = relinearize(ctx, parts3, keys)
        return Ciphertext(parts=parts, level=self.level_in + 1)


def hom_mul(ctx: FvContext, c1: Ciphertext, c2: Ciphertext, keys: KeyPair) -> Ciphertext:
    """Homomorphic product with relinearization; level = max(levels) + 1."""
    acc = TensorAccumulator(ctx)
    acc.add_product(c1, c2)
    return acc.finalize(keys)


def plaintext_from_int(params: FvParams, v: int) -> np.ndarray:
    """Signed-binary message polynomial of v, padded to ring length."""
    from .encoding import to_message_poly

    mp = to_message_poly(v)
    if mp.degree >= params.d:
        raise FvUsageError(
            f"integer needs degree {mp.degree} but ring degree is {params.d}"
        )
    out = np.zeros(params.d, dtype=object)
    out[: len(mp.coeffs)] = mp.coeffs
    return out


def plaintext_to_int(params: FvParams, poly: np.ndarray) -> int:
    """Evaluate a centered plaintext polynomial at x=2."""
    total = 0
    for i, c in enumerate(poly):
        c = int(c)
        if c:
            total += c << i
    return total


# serialization -----------------------------------------------------------

_MAGIC = b"ELSQ"
_KIND_CT = 1
_KIND_SK = 2
_KIND_PK = 3
_KIND_RLK = 4


def _header(params: FvParams, kind: int) -> bytes:
    t_bytes = params.t.to_bytes((params.t.bit_length() + 7) // 8, "little")
    q_bytes = params.q.to_bytes((params.qbits + 7) // 8, "little")
    return (
        _MAGIC
        + struct.pack("<HBI", SCHEME_VERSION, kind, params.d)
        + struct.pack("<I", len(t_bytes))
        + t_bytes
        + struct.pack("<I", len(q_bytes))
        + q_bytes
        + struct.pack("<dB", params.sigma, params.relin_w_bits)
    )


def _read_header(buf: bytes):
    if buf[:4] != _MAGIC:
        raise FvUsageError("bad magic in serialized data")
    version, kind, d = struct.unpack_from("<HBI", buf, 4)
    if version != SCHEME_VERSION:
        raise FvUsageError(f"unsupported scheme version {version}")
    off = 11
    (tlen,) = struct.unpack_from("<I", buf, off)
    off += 4
    t = int.from_bytes(buf[off : off + tlen], "little")
    off += tlen
    (qlen,) = struct.unpack_from("<I", buf, off)
    off += 4
    q = int.from_bytes(buf[off : off + qlen], "little")
    off += qlen
    sigma, w_bits = struct.unpack_from("<dB", buf, off)
    off += 9
    params = FvParams(d=d, t=t, q=q, sigma=sigma, relin_w_bits=w_bits)
    return params, kind, off


def _pack_poly(poly: np.ndarray, width: int) -> bytes:
    return b"".join(int(c).to_bytes(width, "little") for c in poly)


def _unpack_poly(buf: bytes, off: int, d: int, width: int):
    out = np.empty(d, dtype=object)
    for i in range(d):
        out[i] = int.from_bytes(buf[off : off + width], "little")
        off += width
    return out, off


def serialize_ciphertext(params: FvParams, ct: Ciphertext) -> bytes:
    width = (params.qbits + 7) // 8
    body = struct.pack("<IB", ct.level, len(ct.parts))
    for part in ct.parts:
        body += _pack_poly(part, width)
    return _header(params, _KIND_CT) + body


def deserialize_ciphertext(buf: bytes):
    params, kind, off = _read_header(buf)
    if kind != _KIND_CT:
        raise FvUsageError("serialized object is not a ciphertext")
    width = (params.qbits + 7) // 8
    level, n_parts = struct.unpack_from("<IB", buf, off)
    off += 5
    parts = []
    for _ in range(n_parts):
        poly, off = _unpack_poly(buf, off, params.d, width)
        parts.append(poly)
    return params, Ciphertext(parts=parts, level=level)


def serialize_keys(params: FvParams, keys: KeyPair) -> bytes:
    width = (params.qbits + 7) // 8
    q = params.q
    body = struct.pack("<I", len(keys.relin_key))
    body += _pack_poly(keys.secret_key % q, width)
    body += _pack_poly(keys.public_key[0], width)
    body += _pack_poly(keys.public_key[1], width)
    for b_i, a_i in keys.relin_key:
        body += _pack_poly(b_i, width)
        body += _pack_poly(a_i, width)
    return _header(params, _KIND_SK) + body


def deserialize_keys(buf: bytes):
    params, kind, off = _read_header(buf)
    if kind != _KIND_SK:
        raise FvUsageError("serialized object is not a key set")
    width = (params.qbits + 7) // 8
    (n_rlk,) = struct.unpack_from("<I", buf, off)
    off += 4
    q = params.q
    sk_raw, off = _unpack_poly(buf, off, params.d, width)
    sk = np.where(sk_raw > q >> 1, sk_raw - q, sk_raw)
    pk0, off = _unpack_poly(buf, off, params.d, width)
    pk1, off = _unpack_poly(buf, off, params.d, width)
    rlk = []
    for _ in range(n_rlk):
        b_i, off = _unpack_poly(buf, off, params.d, width)
        a_i, off = _unpack_poly(buf, off, params.d, width)
        rlk.append((b_i, a_i))
    return params, KeyPair(secret_key=sk, public_key=(pk0, pk1), relin_key=rlk)
