"""Backend abstraction over encrypted integer arithmetic.

The descent engine is written against a tiny scalar interface (add, multiply,
plaintext ops, dot product) so the same circuit runs on three backends:

* FvBackend: real ciphertexts under the encryption scheme.
* OracleBackend: exact unreduced integers, optionally tracking the full
  message polynomial each value would occupy, which doubles as the empirical
  probe for the degree/coefficient growth bounds.
* BoundBackend: no values at all, just worst-case degree, term-count, and
  coefficient-magnitude bounds, used by the parameter planner to size the
  plaintext modulus for circuits the growth recursion does not cover.

Every backend applies the same depth law: multiplications (ciphertext or
plaintext) count one level, additions and negation are depth-free.
"""

from dataclasses import dataclass

from . import fv
from .encoding import to_message_poly


class BackendError(ValueError):
    """Raised for cross-backend mixing and malformed scalar operands."""


def _check_same(backend, *scalars):
    for s in scalars:
        if s.backend is not backend:
            raise BackendError("scalars belong to a different backend instance")


# --- exact integer oracle -------------------------------------------------


@dataclass
class OracleScalar:
    backend: object
    value: int
    depth: int
    poly: list = None  # message-polynomial coefficients, when tracking


def _conv_ref(p1, p2):
    out = [0] * (len(p1) + len(p2) - 1)
    for i, a in enumerate(p1):
        if a == 0:
            continue
        for j, b in enumerate(p2):
            if b:
                out[i + j] += a * b
    return out


def _pack(vals, nb):
    return int.from_bytes(b"".join(v.to_bytes(nb, "little") for v in vals), "little")


def _unpack(n, count, nb):
    raw = n.to_bytes(count * nb, "little")
    return [int.from_bytes(raw[i * nb : (i + 1) * nb], "little") for i in range(count)]


def _conv(p1, p2):
    """Polynomial product, packed into big-integer multiplications.

    Each polynomial is split into its positive and negative parts, the parts
    are packed into integers with a limb wide enough that no product digit
    can carry into its neighbour, and the four part products reduce to two
    C-speed multiplications per sign of the result. Small operands keep the
    schoolbook loop; _conv_ref stays the oracle either way.
    """
    n1, n2 = len(p1), len(p2)
    if n1 * n2 <= 256:
        return _conv_ref(p1, p2)
    bits1 = max(abs(c).bit_length() for c in p1)
    bits2 = max(abs(c).bit_length() for c in p2)
    if bits1 == 0 or bits2 == 0:
        return [0] * (n1 + n2 - 1)
    nb = (bits1 + bits2 + min(n1, n2).bit_length() + 2 + 7) // 8
    pos1 = _pack([c if c > 0 else 0 for c in p1], nb)
    neg1 = _pack([-c if c < 0 else 0 for c in p1], nb)
    pos2 = _pack([c if c > 0 else 0 for c in p2], nb)
    neg2 = _pack([-c if c < 0 else 0 for c in p2], nb)
    plus = _unpack(pos1 * pos2 + neg1 * neg2, n1 + n2 - 1, nb)
    minus = _unpack(pos1 * neg2 + neg1 * pos2, n1 + n2 - 1, nb)
    return [a - b for a, b in zip(plus, minus)]


def _padd(p1, p2):
    n = max(len(p1), len(p2))
    return [(p1[i] if i < len(p1) else 0) + (p2[i] if i < len(p2) else 0) for i in range(n)]


class OracleBackend:
    """Computes the exact integers a noiseless evaluation would decrypt to."""

    def __init__(self, track_polynomials: bool = False):
        self.track_polynomials = track_polynomials

    def encrypt_int(self, v: int) -> OracleScalar:
        poly = list(to_message_poly(int(v)).coeffs) if self.track_polynomials else None
        return OracleScalar(self, int(v), 0, poly)

    def zero(self) -> OracleScalar:
        return self.encrypt_int(0)

    def decrypt_int(self, s: OracleScalar) -> int:
        _check_same(self, s)
        return s.value

    def b_add(self, a, b) -> OracleScalar:
        _check_same(self, a, b)
        poly = _padd(a.poly, b.poly) if self.track_polynomials else None
        return OracleScalar(self, a.value + b.value, max(a.depth, b.depth), poly)

    def b_neg(self, a) -> OracleScalar:
        _check_same(self, a)
        poly = [-c for c in a.poly] if self.track_polynomials else None
        return OracleScalar(self, -a.value, a.depth, poly)

    def b_sub(self, a, b) -> OracleScalar:
        return self.b_add(a, self.b_neg(b))

    def b_mul(self, a, b) -> OracleScalar:
        _check_same(self, a, b)
        poly = _conv(a.poly, b.poly) if self.track_polynomials else None
        return OracleScalar(self, a.value * b.value, max(a.depth, b.depth) + 1, poly)

    def b_plain_mul(self, a, w: int) -> OracleScalar:
        _check_same(self, a)
        poly = _conv(a.poly, to_message_poly(int(w)).coeffs) if self.track_polynomials else None
        return OracleScalar(self, a.value * int(w), a.depth + 1, poly)

    def b_plain_add(self, a, w: int) -> OracleScalar:
        _check_same(self, a)
        poly = _padd(a.poly, to_message_poly(int(w)).coeffs) if self.track_polynomials else None
        return OracleScalar(self, a.value + int(w), a.depth, poly)

    def b_dot(self, avec, bvec) -> OracleScalar:
        if len(avec) != len(bvec) or not avec:
            raise BackendError(f"dot needs equal nonempty lengths, got {len(avec)} and {len(bvec)}")
        total = self.b_mul(avec[0], bvec[0])
        for a, b in zip(avec[1:], bvec[1:]):
            total = self.b_add(total, self.b_mul(a, b))
        return total

    def b_product(self, vec) -> OracleScalar:
        # sequential fold: depth P-1 on P fresh inputs under the max+1 law
        if not vec:
            raise BackendError("empty product")
        total = vec[0]
        for s in vec[1:]:
            total = self.b_mul(total, s)
        return total


# --- real encryption ------------------------------------------------------


@dataclass
class FvScalar:
    backend: object
    ct: fv.Ciphertext

    @property
    def depth(self) -> int:
        return self.ct.level

    @property
    def value(self):  # convenience in tests; requires the secret key
        return self.backend.decrypt_int(self)


class FvBackend:
    """Runs the circuit on real ciphertexts; one encrypted value per scalar."""

    def __init__(self, ctx: fv.FvContext, keys: fv.KeyPair, seed: bytes = b"fv-backend"):
        self.ctx = ctx
        self.keys = keys
        self._seed = bytes(seed)
        self._counter = 0

    def _next_seed(self) -> bytes:
        self._counter += 1
        return self._seed + self._counter.to_bytes(8, "little")

    def encrypt_int(self, v: int) -> FvScalar:
        m = fv.plaintext_from_int(self.ctx.params, int(v))
        return FvScalar(self, fv.encrypt(self.ctx, self.keys, m, self._next_seed()))

    def zero(self) -> FvScalar:
        return self.encrypt_int(0)

    def decrypt_int(self, s: FvScalar) -> int:
        _check_same(self, s)
        return fv.plaintext_to_int(self.ctx.params, fv.decrypt(self.ctx, self.keys, s.ct))

    def noise_budget(self, s: FvScalar) -> float:
        _check_same(self, s)
        return fv.noise_budget(self.ctx, self.keys, s.ct)

    def b_add(self, a, b) -> FvScalar:
        _check_same(self, a, b)
        return FvScalar(self, fv.hom_add(self.ctx, a.ct, b.ct))

    def b_neg(self, a) -> FvScalar:
        _check_same(self, a)
        return FvScalar(self, fv.hom_neg(self.ctx, a.ct))

    def b_sub(self, a, b) -> FvScalar:
        _check_same(self, a, b)
        return FvScalar(self, fv.hom_sub(self.ctx, a.ct, b.ct))

    def b_mul(self, a, b) -> FvScalar:
        _check_same(self, a, b)
        return FvScalar(self, fv.hom_mul(self.ctx, a.ct, b.ct, self.keys))

    def b_plain_mul(self, a, w: int) -> FvScalar:
        _check_same(self, a)
        p = fv.plaintext_from_int(self.ctx.params, int(w))
        return FvScalar(self, fv.plain_mul(self.ctx, a.ct, p))

    def b_plain_add(self, a, w: int) -> FvScalar:
        _check_same(self, a)
        p = fv.plaintext_from_int(self.ctx.params, int(w))
        return FvScalar(self, fv.plain_add(self.ctx, a.ct, p))

    def b_dot(self, avec, bvec) -> FvScalar:
        if len(avec) != len(bvec) or not avec:
            raise BackendError(f"dot needs equal nonempty lengths, got {len(avec)} and {len(bvec)}")
        _check_same(self, *avec)
        _check_same(self, *bvec)
        acc = fv.TensorAccumulator(self.ctx)
        for a, b in zip(avec, bvec):
            acc.add_product(a.ct, b.ct)
        return FvScalar(self, acc.finalize(self.keys))

    def b_product(self, vec) -> FvScalar:
        if not vec:
            raise BackendError("empty product")
        total = vec[0]
        for s in vec[1:]:
            total = self.b_mul(total, s)
        return total


# --- worst-case bound propagation ----------------------------------------


@dataclass
class BoundScalar:
    backend: object
    degree: int
    terms: int  # bound on the number of nonzero coefficients
    coeff: int  # bound on the largest absolute coefficient
    depth: int


class BoundBackend:
    """Propagates worst-case message-polynomial shape through the circuit.

    Products use the standard convolution estimate
    ||a*b||_inf <= min(terms_a, terms_b) * ||a||_inf * ||b||_inf.
    """

    def __init__(self, data_degree: int):
        self.data_degree = data_degree

    def data_scalar(self) -> BoundScalar:
        # a freshly encoded data value: signed binary polynomial
        return BoundScalar(self, self.data_degree, self.data_degree + 1, 1, 0)

    def encrypt_int(self, v: int) -> BoundScalar:
        mp = to_message_poly(int(v))
        terms = sum(1 for c in mp.coeffs if c)
        return BoundScalar(self, mp.degree, max(terms, 1), 1 if terms else 0, 0)

    def zero(self) -> BoundScalar:
        return BoundScalar(self, 0, 0, 0, 0)

    def decrypt_int(self, s):
        raise BackendError("bound backend carries no values to decrypt")

    def b_add(self, a, b) -> BoundScalar:
        _check_same(self, a, b)
        deg = max(a.degree, b.degree)
        return BoundScalar(
            self, deg, min(a.terms + b.terms, deg + 1), a.coeff + b.coeff, max(a.depth, b.depth)
        )

    def b_neg(self, a) -> BoundScalar:
        _check_same(self, a)
        return BoundScalar(self, a.degree, a.terms, a.coeff, a.depth)

    def b_sub(self, a, b) -> BoundScalar:
        return self.b_add(a, self.b_neg(b))

    def _mul_bounds(self, a, b, depth):
        if a.coeff == 0 or b.coeff == 0:
            return BoundScalar(self, 0, 0, 0, depth)
        deg = a.degree + b.degree
        terms = min(a.terms * b.terms, deg + 1)
        coeff = min(a.terms, b.terms) * a.coeff * b.coeff
        return BoundScalar(self, deg, terms, coeff, depth)

    def b_mul(self, a, b) -> BoundScalar:
        _check_same(self, a, b)
        return self._mul_bounds(a, b, max(a.depth, b.depth) + 1)

    def b_plain_mul(self, a, w: int) -> BoundScalar:
        _check_same(self, a)
        return self._mul_bounds(a, self.encrypt_int(w), a.depth + 1)

    def b_plain_add(self, a, w: int) -> BoundScalar:
        _check_same(self, a)
        return self.b_add(a, self.encrypt_int(w))

    def b_dot(self, avec, bvec) -> BoundScalar:
        if len(avec) != len(bvec) or not avec:
            raise BackendError(f"dot needs equal nonempty lengths, got {len(avec)} and {len(bvec)}")
        total = self.b_mul(avec[0], bvec[0])
        for a, b in zip(avec[1:], bvec[1:]):
            total = self.b_add(total, self.b_mul(a, b))
        return total

    def b_product(self, vec) -> BoundScalar:
        if not vec:
            raise BackendError("empty product")
        total = vec[0]
        for s in vec[1:]:
            total = self.b_mul(total, s)
        return total
