"""Modular number-theoretic transform kernels.

The exact big-integer polynomial products in the ring Z[x]/(x^d + 1) are
assembled from negacyclic convolutions modulo several machine-word primes.
These are the hot loops, so they come in two flavours: numba-jitted scalar
loops and a vectorized numpy fallback. Set ELSQ_NO_NUMBA=1 to force the
fallback (it is also used automatically when numba is unavailable).

Transforms use the standard decimation pairing: the forward pass takes natural
order to bit-reversed order and the inverse pass takes bit-reversed order back
to natural, so no explicit permutation is ever applied. Twiddle tables store
powers of a primitive 2d-th root psi indexed in bit-reversed order, which
folds the negacyclic twist into the transform itself.
"""

import os

import numpy as np

USING_NUMBA = os.environ.get("ELSQ_NO_NUMBA", "") != "1"
if USING_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - depends on environment
        USING_NUMBA = False


def _ntt_forward_py(a, psis, p):
    """In-place forward transform, natural order in, bit-reversed out.

    Each stage views the array as (blocks, 2*t) so the butterflies are
    contiguous slice arithmetic; no index matrices."""
    n = a.shape[0]
    t = n
    m = 1
    while m < n:
        t //= 2
        blk = a.reshape(m, 2 * t)
        u = blk[:, :t].copy()
        v = blk[:, t:] * psis[m : 2 * m, None] % p
        blk[:, :t] = (u + v) % p
        blk[:, t:] = (u - v) % p
        m *= 2


def _ntt_inverse_py(a, inv_psis, p, n_inv):
    """In-place inverse transform, bit-reversed order in, natural out."""
    n = a.shape[0]
    t = 1
    m = n
    while m > 1:
        h = m // 2
        blk = a.reshape(h, 2 * t)
        u = blk[:, :t].copy()
        v = blk[:, t:]
        blk[:, :t] = (u + v) % p
        blk[:, t:] = (u - v) * inv_psis[h : 2 * h, None] % p
        t *= 2
        m = h
    a *= n_inv
    a %= p


def _pointwise_mul_acc_py(acc, a, b, p):
    acc += a * b % p
    acc %= p


def _pointwise_mul_py(a, b, p):
    return a * b % p


def _residues_from_chunks_py(chunks, negs, primes, pow16):
    """Fold 16-bit magnitude chunks into residues mod each prime.

    chunks[j, l] holds bits [16l, 16l+16) of |coefficient j|; pow16[i, l] is
    2^(16l) mod primes[i]. Each dot product stays below 2^53, so the int64
    matmul is exact."""
    out = np.empty((primes.shape[0], chunks.shape[0]), dtype=np.int64)
    for i in range(primes.shape[0]):
        p = primes[i]
        r = (chunks @ pow16[i]) % p
        out[i] = np.where(negs != 0, (p - r) % p, r)
    return out


def _crt_digits_py(residues_t, c16_t, extra):
    """Combine residues against 16-bit chunked CRT constants.

    residues_t is (d, n_primes); c16_t[l, i] holds bits [16l, 16l+16) of the
    i-th CRT constant. Returns base-2^16 digits of sum_i residues[i] * c_i per
    coefficient, carry-propagated; the caller still reduces mod the full CRT
    modulus."""
    acc = residues_t @ c16_t.T
    n, width = acc.shape
    out = np.zeros((n, width + extra), dtype=np.int64)
    carry = np.zeros(n, dtype=np.int64)
    for l in range(width):
        v = acc[:, l] + carry
        out[:, l] = v & 0xFFFF
        carry = v >> 16
    for l in range(width, width + extra):
        out[:, l] = carry & 0xFFFF
        carry >>= 16
    return out


if USING_NUMBA:

    @njit(cache=True)
    def _ntt_forward_nb(a, psis, p):
        n = a.shape[0]
        t = n
        m = 1
        while m < n:
            t //= 2
            for i in range(m):
                j1 = 2 * i * t
                s = psis[m + i]
                for j in range(j1, j1 + t):
                    u = a[j]
                    v = a[j + t] * s % p
                    a[j] = (u + v) % p
                    a[j + t] = (u - v) % p
            m *= 2

    @njit(cache=True)
    def _ntt_inverse_nb(a, inv_psis, p, n_inv):
        n = a.shape[0]
        t = 1
        m = n
        while m > 1:
            h = m // 2
            for i in range(h):
                j1 = 2 * i * t
                s = inv_psis[h + i]
                for j in range(j1, j1 + t):
                    u = a[j]
                    v = a[j + t]
                    a[j] = (u + v) % p
                    a[j + t] = (u - v) * s % p
            t *= 2
            m = h
        for j in range(n):
            a[j] = a[j] * n_inv % p

    @njit(cache=True)
    def _pointwise_mul_acc_nb(acc, a, b, p):
        for j in range(acc.shape[0]):
            acc[j] = (acc[j] + a[j] * b[j]) % p

    @njit(cache=True)
    def _pointwise_mul_nb(a, b, p):
        out = np.empty_like(a)
        for j in range(a.shape[0]):
            out[j] = a[j] * b[j] % p
        return out

    @njit(cache=True)
    def _residues_from_chunks_nb(chunks, negs, primes, pow16):
        n, width = chunks.shape
        out = np.empty((primes.shape[0], n), dtype=np.int64)
        for i in range(primes.shape[0]):
            p = primes[i]
            for j in range(n):
                acc = 0
                for l in range(width):
                    acc += chunks[j, l] * pow16[i, l]
                r = acc % p
                if negs[j] != 0 and r != 0:
                    r = p - r
                out[i, j] = r
        return out

    @njit(cache=True)
    def _crt_digits_nb(residues_t, c16_t, extra):
        n, n_primes = residues_t.shape
        width = c16_t.shape[0]
        out = np.zeros((n, width + extra), dtype=np.int64)
        for j in range(n):
            carry = 0
            for l in range(width):
                v = carry
                for i in range(n_primes):
                    v += residues_t[j, i] * c16_t[l, i]
                out[j, l] = v & 0xFFFF
                carry = v >> 16
            for l in range(width, width + extra):
                out[j, l] = carry & 0xFFFF
                carry >>= 16
        return out

    ntt_forward = _ntt_forward_nb
    ntt_inverse = _ntt_inverse_nb
    pointwise_mul_acc = _pointwise_mul_acc_nb
    pointwise_mul = _pointwise_mul_nb
    residues_from_chunks = _residues_from_chunks_nb
    crt_digits = _crt_digits_nb
else:
    ntt_forward = _ntt_forward_py
    ntt_inverse = _ntt_inverse_py
    pointwise_mul_acc = _pointwise_mul_acc_py
    pointwise_mul = _pointwise_mul_py
    residues_from_chunks = _residues_from_chunks_py
    crt_digits = _crt_digits_py

# The pure-python variants stay importable under either configuration so the
# benchmark can compare both paths in one process.
ntt_forward_py = _ntt_forward_py
ntt_inverse_py = _ntt_inverse_py


def _is_probable_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24 (covers all 64-bit inputs)."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _primitive_root(p: int) -> int:
    """Smallest generator of the multiplicative group mod prime p."""
    order = p - 1
    factors = set()
    m = order
    f = 2
    while f * f <= m:
        if m % f == 0:
            factors.add(f)
            while m % f == 0:
                m //= f
        f += 1
    if m > 1:
        factors.add(m)
    g = 2
    while True:
        if all(pow(g, order // f, p) != 1 for f in factors):
            return g
        g += 1


def ntt_primes(min_product_bits: int, two_d: int) -> list:
    """Primes p = 1 (mod two_d) below 2^31 whose product exceeds the bound.

    Keeping each prime under 2^31 means butterfly products fit in int64.
    """
    primes = []
    bits = 0
    candidate = (2 ** 31 // two_d) * two_d + 1
    while bits <= min_product_bits:
        while candidate >= 2 ** 31 or not _is_probable_prime(candidate):
            candidate -= two_d
            if candidate < 3:
                raise ValueError(
                    f"not enough NTT primes below 2^31 for two_d={two_d}"
                )
        primes.append(candidate)
        bits += candidate.bit_length() - 1
        candidate -= two_d
    return primes


class PrimeTransform:
    """Per-prime twiddle tables for negacyclic transforms of length d."""

    def __init__(self, p: int, d: int):
        if (p - 1) % (2 * d) != 0:
            raise ValueError(f"prime {p} does not support transform length {d}")
        self.p = p
        self.d = d
        g = _primitive_root(p)
        psi = pow(g, (p - 1) // (2 * d), p)
        inv_psi = pow(psi, p - 2, p)
        logd = d.bit_length() - 1
        rev = np.zeros(d, dtype=np.int64)
        for i in range(1, d):
            rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (logd - 1))
        psis = np.array([pow(psi, int(r), p) for r in rev], dtype=np.int64)
        inv_psis = np.array([pow(inv_psi, int(r), p) for r in rev], dtype=np.int64)
        self.psis = psis
        self.inv_psis = inv_psis
        self.n_inv = pow(d, p - 2, p)

    def forward(self, a: np.ndarray) -> np.ndarray:
        out = np.ascontiguousarray(a, dtype=np.int64).copy()
        ntt_forward(out, self.psis, self.p)
        return out

    def inverse(self, a: np.ndarray) -> np.ndarray:
        out = np.ascontiguousarray(a, dtype=np.int64).copy()
        ntt_inverse(out, self.inv_psis, self.p, self.n_inv)
        return out
