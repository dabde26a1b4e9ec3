"""Multiplicative depth accounting, growth bounds, and parameter selection.

Every fit is described by a FitPlan before any encryption happens. From the
plan alone this module derives the circuit's maximum multiplicative depth, an
upper bound on how large the message polynomials can grow (degree and
coefficient magnitude), and scheme parameters (d, t, q) that guarantee exact
decryption of the full run at >= 80-bit security.

The degree/coefficient recursion is proved for simultaneous-update descent
only; plans for the other algorithms are sized by propagating worst-case
bounds through the actual circuit instead (empirical, validated by the
observed-growth tests rather than by the closed-form recursion).
"""

import json
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources

GD = "GD"
CD = "CD"
NAG = "NAG"
GD_VWT = "GD+VWT"
ALGORITHMS = (GD, CD, NAG, GD_VWT)

# upper bound on log2(10), exact rational, 40 significant digits rounded up;
# using an upper bound keeps every ceiled recursion step a true upper bound
LOG2_10_UB = Fraction(3321928094887362347870319429489390175865, 10 ** 39)

# hard bound of the error sampler at the default sigma (centered binomial)
_ERR_BOUND = 21


class PlanError(ValueError):
    """Raised for invalid or unsupported fit plans."""


class CapacityError(RuntimeError):
    """No tabulated parameter set supports the plan; names the binding constraint."""

    def __init__(self, constraint: str, message: str):
        super().__init__(message)
        self.constraint = constraint


@dataclass(frozen=True)
class FitPlan:
    """Everything the parameter planner needs to know before encryption."""

    algorithm: str
    K: int
    P: int
    N: int
    phi: int
    nu: int
    alpha: float = 0.0
    preconditioned: bool = False
    include_prediction: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise PlanError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not isinstance(self.K, int) or self.K < 0:
            raise PlanError(f"K must be a non-negative integer, got {self.K!r}")
        if self.algorithm == GD_VWT and self.K < 1:
            raise PlanError("the averaged combination needs at least one iteration")
        for name in ("P", "N"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise PlanError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.phi, int) or self.phi < 0:
            raise PlanError(f"phi must be a non-negative integer, got {self.phi!r}")
        if not isinstance(self.nu, int) or self.nu < 1:
            raise PlanError(f"nu must be an integer >= 1, got {self.nu!r}")
        if self.alpha < 0:
            raise PlanError(f"alpha must be non-negative, got {self.alpha!r}")


@dataclass
class GrowthBounds:
    degree_bound_per_iter: list
    coeff_bound_per_iter: list
    n_param: float


@dataclass
class ObservedGrowth:
    degree_per_iter: list
    coeff_per_iter: list


def mmd_of(plan: FitPlan) -> int:
    """Maximum multiplicative depth of the planned circuit."""
    if plan.algorithm == GD:
        depth = 2 * plan.K
    elif plan.algorithm == GD_VWT:
        depth = 2 * plan.K + 1
    elif plan.algorithm == NAG:
        depth = 3 * plan.K
    else:
        depth = 2 * plan.K * plan.P
    if plan.include_prediction:
        # sequential updates leave coordinates at unequal scales, so
        # prediction costs an extra unification level on top of the dot
        depth += 2 if plan.algorithm == CD else 1
    return depth


def data_degree(phi: int) -> int:
    """Bit length bound of an encoded data value in the growth model."""
    return math.ceil((phi + 1) * LOG2_10_UB)


def growth_recursion_bounds(plan: FitPlan) -> GrowthBounds:
    """Per-iteration degree and coefficient bounds for simultaneous updates.

    n = (phi+1)log2(10); the recursion is seeded at k=1 with degree 3n and
    coefficient n(n+1)N, and each step is ceiled to an integer. Exact rational
    arithmetic throughout; n enters as a rational upper bound so the ceilings
    stay valid.
    """
    if plan.algorithm not in (GD, GD_VWT):
        raise PlanError(f"growth bounds are only defined for simultaneous updates, got {plan.algorithm}")
    n = (plan.phi + 1) * LOG2_10_UB
    N, P = plan.N, plan.P
    amp = (4 * n + (n + 1) ** 2) * N * P
    degs = []
    coeffs = []
    for k in range(1, plan.K + 1):
        if k == 1:
            d_k = math.ceil(3 * n)
            c_k = math.ceil(n * (n + 1) * N)
        else:
            d_k = math.ceil(max(4 * n + degs[-1], (4 * k - 1) * n))
            c_k = math.ceil(amp * coeffs[-1] + (4 * k - 3) * n * (n + 1) * N)
        degs.append(d_k)
        coeffs.append(c_k)
    return GrowthBounds(degs, coeffs, float(n))


def observed_growth(trace) -> ObservedGrowth:
    """Observed polynomial degree and max |coefficient| per iteration.

    The trace comes from an oracle-backend run with polynomial tracking: an
    iterable of iterations, each an iterable of scalars carrying .poly.
    """
    degs = []
    coeffs = []
    for iteration in trace:
        worst_deg = 0
        worst_coeff = 0
        for s in iteration:
            if s.poly is None:
                raise PlanError("observed_growth needs a polynomial-tracking oracle trace")
            deg = 0
            for i, c in enumerate(s.poly):
                if c:
                    deg = i
                    worst_coeff = max(worst_coeff, abs(int(c)))
            worst_deg = max(worst_deg, deg)
        degs.append(worst_deg)
        coeffs.append(worst_coeff)
    return ObservedGrowth(degs, coeffs)


def load_security_table() -> dict:
    """The shipped (d, max log2 q) table targeting >= 80-bit security."""
    with resources.files("elsq").joinpath("security_table.json").open("r") as fh:
        return json.load(fh)


def _vwt_combine_bounds(plan: FitPlan, degs, coeffs):
    """Degree/coefficient bounds after the binomially weighted combination."""
    from .encoding import to_message_poly

    K, phi, nu = plan.K, plan.phi, plan.nu
    k_star = K // 3 + 1
    total_coeff = 0
    total_deg = 0
    for k in range(k_star, K + 1):
        factor = math.comb(K - k_star, k - k_star) * 10 ** (2 * (K - k) * phi) * nu ** (K - k)
        mp = to_message_poly(factor)
        nnz = sum(1 for c in mp.coeffs if c)
        total_coeff += nnz * coeffs[k - 1]
        total_deg = max(total_deg, mp.degree + degs[k - 1])
    return total_deg, total_coeff


def _prediction_bounds(plan: FitPlan, deg: int, coeff: int):
    nd = data_degree(plan.phi)
    return deg + nd, plan.P * (nd + 1) * coeff


def _walk_circuit_bounds(plan: FitPlan):
    """Worst-case plaintext bounds from a dry run of the actual circuit."""
    from . import engine
    from .backend import BoundBackend

    bk = BoundBackend(data_degree(plan.phi))
    data = engine.EncryptedDataset(
        X=[[bk.data_scalar() for _ in range(plan.P)] for _ in range(plan.N)],
        y=[bk.data_scalar() for _ in range(plan.N)],
        N=plan.N,
        P=plan.P,
    )
    result = engine.run_plan(bk, data, plan)
    outputs = list(result.coefficients.beta)
    if plan.include_prediction:
        coeffs = result.coefficients
        if plan.algorithm == CD:
            coeffs = engine.unify_cd_scaling(bk, coeffs)
        row = [bk.data_scalar() for _ in range(plan.P)]
        pred, _ = engine.predict(bk, row, coeffs)
        outputs.append(pred)
    deg = max(s.degree for s in outputs)
    coeff = max(s.coeff for s in outputs)
    return deg, coeff


def plaintext_bounds(plan: FitPlan):
    """(degree, coefficient) bounds the plaintext ring must accommodate."""
    if plan.K == 0:
        deg, coeff = 0, 0
    elif plan.algorithm in (GD, GD_VWT):
        gb = growth_recursion_bounds(plan)
        deg, coeff = gb.degree_bound_per_iter[-1], gb.coeff_bound_per_iter[-1]
        if plan.algorithm == GD_VWT:
            deg, coeff = _vwt_combine_bounds(plan, gb.degree_bound_per_iter, gb.coeff_bound_per_iter)
    else:
        deg, coeff = _walk_circuit_bounds(plan)
        plan = replace(plan, include_prediction=False)  # the walk covered it
    if plan.include_prediction:
        deg, coeff = _prediction_bounds(plan, deg, coeff)
    # the freshly encoded data must fit the plaintext ring as well
    return max(deg, data_degree(plan.phi)), max(coeff, 1)


def _plain_l1_bound(plan: FitPlan) -> int:
    """l1 bound of any plaintext multiplicand the circuit can use."""
    worst = (
        10 ** ((3 * plan.K + 2) * plan.phi)
        * plan.nu ** (plan.K + 1)
        * math.comb(plan.K, plan.K // 2)
        * 2 ** plan.K
    )
    return worst.bit_length() + 1


def _noise_after(d: int, t: int, depth: int, w_l1: int, fanin: int, qbits: int) -> int:
    """Hard worst-case noise bound after `depth` multiplicative levels."""
    w_bits = max(8, qbits // 4)
    ell = -(-qbits // w_bits)
    relin = ell * d * _ERR_BOUND * (1 << w_bits) // 2
    v = _ERR_BOUND * (2 * d + 1)
    for _ in range(depth):
        v = d * t * (d + 2) * w_l1 * fanin * v + d * d * t * t + relin
    return v


def _min_feasible_qbits(d: int, t_bits: int, depth: int, w_l1: int, fanin: int, cap: int):
    """Smallest log2 q within the security cap that decrypts the circuit."""
    t = 1 << t_bits
    # quick lower bound: each level multiplies noise by at least d*t*(d+2)
    per_level = (d * t * (d + 2)).bit_length() - 1
    lo = max(t_bits + 8, _ERR_BOUND.bit_length() + depth * per_level)
    if lo > cap:
        return None

    def feasible(qbits: int) -> bool:
        return 2 * t * _noise_after(d, t, depth, w_l1, fanin, qbits) < (1 << qbits)

    if not feasible(cap):
        return None
    hi = cap
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid + 1
    return hi


def select_params(plan: FitPlan, sigma: float = 3.24):
    """Choose (d, t, q) for the plan, or refuse naming the binding constraint."""
    from .fv import FvParams

    report = plan_report(plan, sigma)
    if "error" in report:
        raise CapacityError(report["error"], report["message"])
    return FvParams(
        d=report["d"], t=report["t"], q=1 << report["qbits"], sigma=sigma
    )


def plan_report(plan: FitPlan, sigma: float = 3.24) -> dict:
    """Parameter selection with the full reasoning attached."""
    depth = mmd_of(plan)
    deg_bound, coeff_bound = plaintext_bounds(plan)
    t_bits = max(2, (2 * coeff_bound).bit_length())
    table = load_security_table()
    rows = sorted(table["rows"], key=lambda r: r["d"])
    w_l1 = _plain_l1_bound(plan)
    fanin = max(plan.N, plan.P) + 1
    report = {
        "mmd": depth,
        "degree_bound": deg_bound,
        "coeff_bound": coeff_bound,
        "t_bits": t_bits,
        "plan": plan,
    }
    binding = None
    for row in rows:
        if row["d"] <= deg_bound:
            binding = "degree"
            continue
        if t_bits + 8 > row["max_log2_q"]:
            binding = "coefficient"
            continue
        qbits = _min_feasible_qbits(row["d"], t_bits, depth, w_l1, fanin, row["max_log2_q"])
        if qbits is None:
            binding = "depth"
            continue
        report.update(
            d=row["d"],
            t=1 << t_bits,
            qbits=qbits,
            max_log2_q=row["max_log2_q"],
            security=row["security"],
            binding_constraint=binding or "table minimum",
        )
        return report
    largest = rows[-1]
    if deg_bound >= largest["d"]:
        constraint = "degree"
    elif t_bits + 8 > largest["max_log2_q"]:
        constraint = "coefficient"
    else:
        constraint = "depth"
    report["error"] = constraint
    report["message"] = (
        f"no tabulated parameter set supports this plan (binding constraint: {constraint}; "
        f"mmd={depth}, degree bound={deg_bound}, coefficient bound ~2^{coeff_bound.bit_length()}, "
        f"largest table row d={largest['d']} with log2 q <= {largest['max_log2_q']})"
    )
    return report


def precondition(plan: FitPlan) -> FitPlan:
    """Fold the approximate diagonal preconditioner into the step size.

    Standardized columns have squared norm close to N, so dividing the step
    by N is the whole preconditioner; only nu changes.
    """
    if plan.preconditioned:
        return plan
    return replace(plan, nu=plan.nu * plan.N, preconditioned=True)
