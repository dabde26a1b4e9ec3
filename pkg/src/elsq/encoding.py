"""Fixed-point integer encoding and signed binary message polynomials.

Real data enters the cryptosystem as integers: a value z is scaled by 10**phi
and rounded, and the resulting integer is carried as a polynomial with
coefficients in {-1, 0, 1} whose value at x=2 is the integer. Homomorphic
arithmetic then acts on these polynomials; the secret-key holder decodes by
evaluating at 2 and dividing out the accumulated scale.
"""

from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from fractions import Fraction
import math

import numpy as np


class EncodingError(ValueError):
    """Raised for inputs the fixed-point encoding cannot represent."""


@dataclass(frozen=True)
class EncodingConfig:
    """Number of decimal places retained by the encoding (scale 10**phi)."""

    phi: int

    def __post_init__(self):
        if not isinstance(self.phi, int) or self.phi < 0:
            raise EncodingError(f"phi must be a non-negative integer, got {self.phi!r}")

    @property
    def factor(self) -> int:
        return 10 ** self.phi


@dataclass
class MessagePoly:
    """Signed binary decomposition of an integer: coefficients in {-1, 0, 1}.

    Evaluating the polynomial at x=2 recovers the integer exactly. All
    coefficients share the sign of the integer, so negation is coefficient
    negation.
    """

    coeffs: list

    def __post_init__(self):
        if not self.coeffs:
            self.coeffs = [0]
        for c in self.coeffs:
            if c not in (-1, 0, 1):
                raise EncodingError(f"message coefficients must be in {{-1,0,1}}, got {c}")

    @property
    def degree(self) -> int:
        for i in range(len(self.coeffs) - 1, -1, -1):
            if self.coeffs[i] != 0:
                return i
        return 0


def encode_scalar(z, cfg: EncodingConfig) -> int:
    """Round 10**phi * z to the nearest integer, ties away from zero.

    The input is read at face value as a decimal numeral (via its shortest
    repr), so literals like -1.005 round on their written digits rather than
    on the nearest binary double.
    """
    if hasattr(z, "item"):
        z = z.item()
    if isinstance(z, float) and not math.isfinite(z):
        raise EncodingError(f"cannot encode non-finite value {z!r}")
    try:
        dec = Decimal(str(z)) if not isinstance(z, Decimal) else z
    except ArithmeticError as exc:
        raise EncodingError(f"cannot encode {z!r}") from exc
    if not dec.is_finite():
        raise EncodingError(f"cannot encode non-finite value {z!r}")
    scaled = dec.scaleb(cfg.phi)
    return int(scaled.to_integral_value(rounding=ROUND_HALF_UP))


def decode_scalar(v: int, total_scale: int) -> float:
    """Exact rational v / total_scale, returned as the nearest float."""
    if total_scale <= 0:
        raise EncodingError(f"total_scale must be positive, got {total_scale}")
    return float(Fraction(int(v), int(total_scale)))


def to_message_poly(v: int) -> MessagePoly:
    """Signed binary decomposition with all coefficients sharing sign(v)."""
    v = int(v)
    if v == 0:
        return MessagePoly([0])
    sign = 1 if v > 0 else -1
    mag = abs(v)
    coeffs = []
    while mag:
        coeffs.append(sign * (mag & 1))
        mag >>= 1
    return MessagePoly(coeffs)


def from_message_poly(p: MessagePoly) -> int:
    """Evaluate the polynomial at x=2 with exact integer arithmetic."""
    total = 0
    for i, c in enumerate(p.coeffs):
        if c:
            total += c << i
    return total


def encode_matrix(data, cfg: EncodingConfig) -> np.ndarray:
    """Elementwise encode_scalar over a real matrix; shape preserved.

    Returns an object-dtype array of Python ints so entries never overflow.
    """
    arr = np.asarray(data)
    out = np.empty(arr.shape, dtype=object)
    flat_in = arr.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = encode_scalar(flat_in[i], cfg)
    return out
