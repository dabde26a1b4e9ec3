"""Encrypted descent algorithms with exact integer scale bookkeeping.

Division is impossible on ciphertexts, so every update is multiplied through
by known integer factors: the step size delta = 1/nu enters as nu, and each
level of arithmetic adds powers of the encoding factor 10^phi. The resulting
iterates are exact integer multiples of the real-valued recursion on the
encoded data; the bookkeeping here tracks those multiples so the secret-key
holder can divide them out after decryption.

Scales (K iterations, encoding factor 10^phi, step denominator nu):

* simultaneous updates:  beta_k carries 10^((2k+1)phi) nu^k
* momentum variant:      beta_k carries 10^((3k+1)phi) nu^k, the momentum
  buffer s_k carries 10^(3k phi) nu^k
* averaged combination:  2^(K-k*) 10^((2K+1)phi) nu^K with k* = floor(K/3)+1
* sequential updates:    per-coordinate scales nu^u 10^((2u+1)phi), u the
  global update index that last touched the coordinate; unified on demand

Sequential updates keep the critical path at two levels per update by
attaching the catch-up factors (ratios between coordinate scales) to the
depth-0 data ciphertexts rather than to the iterates; the factor on the
just-updated coordinate is always 1 and is skipped, which is what makes the
depth data-independent.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .depth import CD, GD, GD_VWT, NAG, FitPlan, PlanError, precondition
from .encoding import EncodingConfig, encode_scalar

__all__ = [
    "ScalingState",
    "EncryptedDataset",
    "EncryptedCoefficients",
    "NagState",
    "FitResult",
    "encrypt_dataset",
    "gd_step",
    "run_gd",
    "nag_step",
    "run_nag",
    "cd_step",
    "run_cd",
    "unify_cd_scaling",
    "vwt_combine",
    "run_plan",
    "predict",
    "decode_coefficients",
    "ridge_augment",
    "precondition",
    "gd_scale",
    "nag_scale",
    "nag_momentum_scale",
    "vwt_scale",
    "default_momentum",
]


@dataclass
class ScalingState:
    """Iteration-indexed decode factor for a coefficient vector."""

    k: int
    phi: int
    nu: int
    algorithm: str
    scale: int


@dataclass
class EncryptedDataset:
    X: list  # N rows of P scalars
    y: list  # N scalars
    N: int
    P: int


@dataclass
class EncryptedCoefficients:
    beta: list
    scaling: ScalingState
    per_coordinate_scales: list = None


@dataclass
class NagState:
    beta: list
    s: list
    scaling: ScalingState


@dataclass
class FitResult:
    coefficients: EncryptedCoefficients
    iterates: list = None  # retained per-iteration coefficients, for combining
    trace: list = field(default_factory=list)  # per-iteration live scalars


def gd_scale(k: int, phi: int, nu: int) -> int:
    return 10 ** ((2 * k + 1) * phi) * nu ** k

def nag_scale(k: int, phi: int, nu: int) -> int:
    return 10 ** ((3 * k + 1) * phi) * nu ** k

def nag_momentum_scale(k: int, phi: int, nu: int) -> int:
    return 10 ** (3 * k * phi) * nu ** k

def vwt_scale(K: int, phi: int, nu: int) -> int:
    k_star = K // 3 + 1
    return 2 ** (K - k_star) * gd_scale(K, phi, nu)


def encrypt_dataset(bk, X_enc, y_enc) -> EncryptedDataset:
    """Encrypt an integer-encoded design matrix and response vector."""
    X_enc = np.asarray(X_enc, dtype=object)
    y_enc = np.asarray(y_enc, dtype=object)
    n, p = X_enc.shape
    X = [[bk.encrypt_int(int(X_enc[i, j])) for j in range(p)] for i in range(n)]
    y = [bk.encrypt_int(int(y_enc[i])) for i in range(n)]
    return EncryptedDataset(X=X, y=y, N=n, P=p)


def _gradient_leg(bk, data: EncryptedDataset, beta: list, y_factor: int, own_factor: int):
    """Shared body of the simultaneous update:
    new_j = own_factor * beta_j + X_col_j . (y_factor * y - X beta)."""
    resid = []
    for i in range(data.N):
        yi = bk.b_plain_mul(data.y[i], y_factor)
        xb = bk.b_dot(data.X[i], beta)
        resid.append(bk.b_sub(yi, xb))
    out = []
    for j in range(data.P):
        own = bk.b_plain_mul(beta[j], own_factor)
        col = [data.X[i][j] for i in range(data.N)]
        out.append(bk.b_add(own, bk.b_dot(col, resid)))
    return out


def init_gd_state(bk, plan: FitPlan) -> EncryptedCoefficients:
    beta = [bk.zero() for _ in range(plan.P)]
    scaling = ScalingState(0, plan.phi, plan.nu, plan.algorithm, gd_scale(0, plan.phi, plan.nu))
    return EncryptedCoefficients(beta, scaling)


def gd_step(bk, state: EncryptedCoefficients, data: EncryptedDataset, plan: FitPlan) -> EncryptedCoefficients:
    """One simultaneous update; ciphertext depth grows by exactly 2."""
    k = state.scaling.k + 1
    phi, nu = plan.phi, plan.nu
    nu_t = 10 ** phi * nu
    y_factor = 10 ** (k * phi) * nu_t ** (k - 1)
    own_factor = 10 ** phi * nu_t
    beta = _gradient_leg(bk, data, state.beta, y_factor, own_factor)
    scaling = ScalingState(k, phi, nu, state.scaling.algorithm, gd_scale(k, phi, nu))
    return EncryptedCoefficients(beta, scaling)


def run_gd(bk, data: EncryptedDataset, plan: FitPlan) -> FitResult:
    """K simultaneous updates; retains every iterate when combining is planned."""
    if plan.algorithm not in (GD, GD_VWT):
        raise PlanError(f"expected a simultaneous-update plan, got {plan.algorithm}")
    state = init_gd_state(bk, plan)
    retain = plan.algorithm == GD_VWT
    iterates = []
    trace = [list(state.beta)]
    for _ in range(plan.K):
        state = gd_step(bk, state, data, plan)
        trace.append(list(state.beta))
        if retain:
            iterates.append(state)
    if retain:
        combined = vwt_combine(bk, iterates, plan.K, plan)
        return FitResult(coefficients=combined, iterates=iterates, trace=trace)
    return FitResult(coefficients=state, trace=trace)


def default_momentum(k: int) -> float:
    """eta_k = -(k-1)/(k+2): the standard magnitude with the negative sign."""
    return -(k - 1) / (k + 2)


def init_nag_state(bk, plan: FitPlan) -> NagState:
    scaling = ScalingState(0, plan.phi, plan.nu, NAG, nag_scale(0, plan.phi, plan.nu))
    return NagState(
        beta=[bk.zero() for _ in range(plan.P)],
        s=[bk.zero() for _ in range(plan.P)],
        scaling=scaling,
    )


def nag_step(bk, state: NagState, data: EncryptedDataset, plan: FitPlan, eta_k: float) -> NagState:
    """Gradient leg then momentum combination; depth grows by exactly 3."""
    k = state.scaling.k + 1
    phi, nu = plan.phi, plan.nu
    nu_t = 10 ** phi * nu
    y_factor = 10 ** ((3 * k - 2) * phi) * nu ** (k - 1)
    own_factor = 10 ** (2 * phi) * nu
    s_new = _gradient_leg(bk, data, state.beta, y_factor, own_factor)
    eta_enc = encode_scalar(eta_k, EncodingConfig(phi))
    c_new = 10 ** phi + eta_enc
    c_old = 10 ** (2 * phi) * nu_t * eta_enc
    beta = [
        bk.b_sub(bk.b_plain_mul(s_new[j], c_new), bk.b_plain_mul(state.s[j], c_old))
        for j in range(data.P)
    ]
    scaling = ScalingState(k, phi, nu, NAG, nag_scale(k, phi, nu))
    return NagState(beta=beta, s=s_new, scaling=scaling)


def run_nag(bk, data: EncryptedDataset, plan: FitPlan, momentum=None) -> FitResult:
    if plan.algorithm != NAG:
        raise PlanError(f"expected a momentum plan, got {plan.algorithm}")
    momentum = momentum or default_momentum
    state = init_nag_state(bk, plan)
    trace = [list(state.beta) + list(state.s)]
    for k in range(1, plan.K + 1):
        state = nag_step(bk, state, data, plan, momentum(k))
        trace.append(list(state.beta) + list(state.s))
    coeffs = EncryptedCoefficients(state.beta, state.scaling)
    return FitResult(coefficients=coeffs, trace=trace)


def init_cd_state(bk, plan: FitPlan) -> EncryptedCoefficients:
    phi = plan.phi
    scaling = ScalingState(0, phi, plan.nu, CD, 10 ** phi)
    return EncryptedCoefficients(
        beta=[bk.zero() for _ in range(plan.P)],
        scaling=scaling,
        per_coordinate_scales=[10 ** phi] * plan.P,
    )


def cd_step(bk, state: EncryptedCoefficients, data: EncryptedDataset, plan: FitPlan, j: int) -> EncryptedCoefficients:
    """Update coordinate j from the most recent values of all coordinates.

    Depth grows by exactly 2: catch-up factors between coordinate scales
    multiply the depth-0 data ciphertexts, never the iterates, and the factor
    for the deepest (just-updated) coordinate is always 1 and skipped.
    """
    u = state.scaling.k + 1
    phi, nu = plan.phi, plan.nu
    sigma = state.per_coordinate_scales
    l_u = nu ** (u - 1) * 10 ** ((2 * u - 1) * phi)
    sigma_new = nu * 10 ** (2 * phi) * l_u
    resid = []
    catch_up = []
    for l in range(data.P):
        f_l, rem = divmod(l_u, sigma[l])
        if rem:
            raise PlanError("coordinate scales out of sync with the update index")
        catch_up.append(f_l)
    for i in range(data.N):
        yi = bk.b_plain_mul(data.y[i], l_u)
        row = [
            data.X[i][l] if catch_up[l] == 1 else bk.b_plain_mul(data.X[i][l], catch_up[l])
            for l in range(data.P)
        ]
        resid.append(bk.b_sub(yi, bk.b_dot(row, state.beta)))
    own = bk.b_plain_mul(state.beta[j], sigma_new // sigma[j])
    col = [data.X[i][j] for i in range(data.N)]
    new_j = bk.b_add(own, bk.b_dot(col, resid))
    beta = list(state.beta)
    beta[j] = new_j
    scales = list(sigma)
    scales[j] = sigma_new
    scaling = ScalingState(u, phi, nu, CD, sigma_new)
    return EncryptedCoefficients(beta, scaling, scales)


def run_cd(bk, data: EncryptedDataset, plan: FitPlan) -> FitResult:
    """K cyclic sweeps over the P coordinates."""
    if plan.algorithm != CD:
        raise PlanError(f"expected a sequential-update plan, got {plan.algorithm}")
    state = init_cd_state(bk, plan)
    trace = [list(state.beta)]
    for _ in range(plan.K):
        for j in range(plan.P):
            state = cd_step(bk, state, data, plan, j)
        trace.append(list(state.beta))
    return FitResult(coefficients=state, trace=trace)


def unify_cd_scaling(bk, state: EncryptedCoefficients) -> EncryptedCoefficients:
    """Bring all coordinates to the maximal scale; depth +1."""
    if state.per_coordinate_scales is None:
        raise PlanError("coefficients already carry a uniform scale")
    top = max(state.per_coordinate_scales)
    beta = []
    for b, s in zip(state.beta, state.per_coordinate_scales):
        comp, rem = divmod(top, s)
        if rem:
            raise PlanError("coordinate scales do not divide the maximal scale")
        beta.append(bk.b_plain_mul(b, comp))
    scaling = ScalingState(
        state.scaling.k, state.scaling.phi, state.scaling.nu, CD, top
    )
    return EncryptedCoefficients(beta, scaling)


def vwt_combine(bk, iterates: list, K: int, plan: FitPlan) -> EncryptedCoefficients:
    """Binomially weighted combination of the retained iterates.

    Each iterate is first brought to the common scale 10^((2K+1)phi) nu^K by a
    plaintext factor, fused with its binomial weight into a single plaintext
    multiplication. The multiplication is applied even when the fused
    constant is 1 so the total depth is always 2K+1. The decode divisor picks
    up an extra 2^(K-k*)."""
    if not iterates:
        raise PlanError("empty iterate list")
    if len(iterates) < K:
        raise PlanError(f"need all {K} iterates, got {len(iterates)}")
    phi, nu = plan.phi, plan.nu
    k_star = K // 3 + 1
    p = len(iterates[0].beta)
    totals = None
    for k in range(k_star, K + 1):
        fused = math.comb(K - k_star, k - k_star) * 10 ** (2 * (K - k) * phi) * nu ** (K - k)
        terms = [bk.b_plain_mul(b, fused) for b in iterates[k - 1].beta]
        totals = terms if totals is None else [bk.b_add(t, x) for t, x in zip(totals, terms)]
    scaling = ScalingState(K, phi, nu, GD_VWT, vwt_scale(K, phi, nu))
    return EncryptedCoefficients(totals, scaling)


def run_plan(bk, data: EncryptedDataset, plan: FitPlan) -> FitResult:
    """Dispatch to the planned algorithm."""
    if plan.algorithm in (GD, GD_VWT):
        return run_gd(bk, data, plan)
    if plan.algorithm == NAG:
        return run_nag(bk, data, plan)
    return run_cd(bk, data, plan)


def predict(bk, row: list, coeffs: EncryptedCoefficients):
    """Encrypted prediction for one encoded covariate row; depth +1.

    Returns (scalar, decode divisor); the divisor gains a factor 10^phi from
    the encoded covariates."""
    if coeffs.per_coordinate_scales is not None:
        raise PlanError("coordinates carry unequal scales; unify before predicting")
    if len(row) != len(coeffs.beta):
        raise PlanError(f"row has {len(row)} entries for {len(coeffs.beta)} coefficients")
    pred = bk.b_dot(row, coeffs.beta)
    return pred, 10 ** coeffs.scaling.phi * coeffs.scaling.scale


def decode_coefficients(bk, coeffs: EncryptedCoefficients) -> np.ndarray:
    """Decrypt and divide out the tracked scales."""
    from .encoding import decode_scalar

    if coeffs.per_coordinate_scales is not None:
        return np.array(
            [
                decode_scalar(bk.decrypt_int(b), s)
                for b, s in zip(coeffs.beta, coeffs.per_coordinate_scales)
            ]
        )
    scale = coeffs.scaling.scale
    return np.array([decode_scalar(bk.decrypt_int(b), scale) for b in coeffs.beta])


def ridge_augment(X: np.ndarray, y: np.ndarray, alpha: float):
    """Append sqrt(alpha) I rows to X and zeros to y; least squares on the
    augmented data equals the penalized solution on the original."""
    if alpha < 0:
        raise PlanError(f"penalty must be non-negative, got {alpha}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    X_aug = np.vstack([X, math.sqrt(alpha) * np.eye(p)])
    y_aug = np.concatenate([y, np.zeros(p)])
    return X_aug, y_aug
