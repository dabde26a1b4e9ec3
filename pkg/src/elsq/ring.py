"""Exact polynomial arithmetic in Z[x]/(x^d + 1) over arbitrary-precision ints.

Coefficients live in numpy object arrays of Python ints. Products are computed
exactly by reducing modulo a set of NTT-friendly machine primes, convolving in
the transform domain, and reconstructing with the Chinese remainder theorem.
A quadratic-time schoolbook multiplier is kept alongside as the correctness
oracle for the fast path.
"""

import numpy as np

from . import kernels


def negacyclic_schoolbook(a, b, d: int):
    """Quadratic-time negacyclic product; the oracle the NTT path must match."""
    res = [0] * d
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        ai = int(ai)
        for j, bj in enumerate(b):
            if bj == 0:
                continue
            k = i + j
            if k < d:
                res[k] += ai * int(bj)
            else:
                res[k - d] -= ai * int(bj)
    return np.array(res, dtype=object)


class RingContext:
    """Negacyclic NTT/CRT machinery for one ring degree and coefficient bound.

    product_bits is the worst-case bit size of any integer this context must
    represent exactly (products plus accumulation headroom); the prime set is
    sized so the CRT modulus comfortably exceeds it.
    """

    def __init__(self, d: int, product_bits: int):
        if d < 2 or d & (d - 1):
            raise ValueError(f"ring degree must be a power of two >= 2, got {d}")
        self.d = d
        # one extra bit so centered representatives in (-M/2, M/2] cover the bound
        self.primes = kernels.ntt_primes(product_bits + 2, 2 * d)
        self.transforms = [kernels.PrimeTransform(p, d) for p in self.primes]
        m_total = 1
        for p in self.primes:
            m_total *= p
        self.modulus = m_total
        self._crt_consts = np.array(
            [
                (m_total // p) * pow(m_total // p, -1, p)
                for p in self.primes
            ],
            dtype=object,
        )
        # chunked tables for the fast conversion kernels; coefficients are
        # split into base-2^16 digits so every int64 dot product stays exact
        self._primes_arr = np.array(self.primes, dtype=np.int64)
        self._max_chunks = (product_bits + 2 + 15) // 16 + 1
        self._pow16 = np.empty((len(self.primes), self._max_chunks), dtype=np.int64)
        for i, p in enumerate(self.primes):
            self._pow16[i] = [pow(2, 16 * l, p) for l in range(self._max_chunks)]
        mod_digits = (m_total.bit_length() + 15) // 16
        self._c16_t = np.zeros((mod_digits, len(self.primes)), dtype=np.int64)
        for i, const in enumerate(self._crt_consts):
            v = int(const) % m_total
            for l in range(mod_digits):
                self._c16_t[l, i] = (v >> (16 * l)) & 0xFFFF
        # headroom limbs for the carry left after the digit sum
        slack = (len(self.primes) * (1 << 31)).bit_length()
        self._crt_extra = slack // 16 + 2

    def _to_residues_ref(self, poly) -> np.ndarray:
        """Per-element modular reduction; the oracle for the chunked kernel."""
        out = np.empty((len(self.primes), self.d), dtype=np.int64)
        for i, p in enumerate(self.primes):
            out[i] = (poly % p).astype(np.int64)
        return out

    def to_residues(self, poly) -> np.ndarray:
        """Reduce an object-coefficient polynomial mod each prime."""
        poly = np.asarray(poly, dtype=object)
        if poly.shape != (self.d,):
            raise ValueError(f"expected {self.d} coefficients, got shape {poly.shape}")
        ints = [int(c) for c in poly]
        bits = max(map(int.bit_length, ints), default=0)
        if bits > 16 * (self._max_chunks - 1):
            return self._to_residues_ref(poly)
        nbytes = 2 * max(1, (bits + 15) // 16)
        buf = b"".join((v if v >= 0 else -v).to_bytes(nbytes, "little") for v in ints)
        chunks = (
            np.frombuffer(buf, dtype="<u2").reshape(self.d, nbytes // 2).astype(np.int64)
        )
        negs = np.array([v < 0 for v in ints], dtype=np.uint8)
        pow16 = np.ascontiguousarray(self._pow16[:, : nbytes // 2])
        return kernels.residues_from_chunks(chunks, negs, self._primes_arr, pow16)

    def ntt(self, poly) -> np.ndarray:
        """Forward transform of an object-coefficient polynomial, per prime."""
        res = self.to_residues(poly)
        for i, tr in enumerate(self.transforms):
            kernels.ntt_forward(res[i], tr.psis, tr.p)
        return res

    def intt(self, mat: np.ndarray) -> np.ndarray:
        """Inverse transform a (n_primes, d) NTT-domain matrix, in place."""
        for i, tr in enumerate(self.transforms):
            kernels.ntt_inverse(mat[i], tr.inv_psis, tr.p, tr.n_inv)
        return mat

    def pointwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.empty_like(a)
        for i, p in enumerate(self.primes):
            out[i] = kernels.pointwise_mul(a[i], b[i], p)
        return out

    def pointwise_acc(self, acc: np.ndarray, a: np.ndarray, b: np.ndarray):
        for i, p in enumerate(self.primes):
            kernels.pointwise_mul_acc(acc[i], a[i], b[i], p)

    def zeros_ntt(self) -> np.ndarray:
        return np.zeros((len(self.primes), self.d), dtype=np.int64)

    def _reconstruct_ref(self, residues: np.ndarray, centered: bool = True) -> np.ndarray:
        """Object-arithmetic CRT combine; the oracle for the chunked kernel."""
        obj = residues.astype(object)
        total = (self._crt_consts[:, None] * obj).sum(axis=0) % self.modulus
        if centered:
            half = self.modulus >> 1
            total = np.where(total > half, total - self.modulus, total)
        return total

    def reconstruct(self, residues: np.ndarray, centered: bool = True) -> np.ndarray:
        """CRT-combine a (n_primes, d) residue matrix into exact integers."""
        digits = kernels.crt_digits(
            np.ascontiguousarray(residues.T), self._c16_t, self._crt_extra
        )
        raw = digits.astype("<u2").tobytes()
        row = 2 * digits.shape[1]
        mod = self.modulus
        total = np.array(
            [int.from_bytes(raw[i * row : (i + 1) * row], "little") % mod for i in range(self.d)],
            dtype=object,
        )
        if centered:
            half = mod >> 1
            total = np.where(total > half, total - mod, total)
        return total

    def multiply(self, a, b) -> np.ndarray:
        """Exact negacyclic product of two object-coefficient polynomials."""
        fa = self.ntt(np.asarray(a, dtype=object))
        fb = self.ntt(np.asarray(b, dtype=object))
        prod = self.pointwise(fa, fb)
        self.intt(prod)
        return self.reconstruct(prod)
