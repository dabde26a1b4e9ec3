"""End-to-end fits: on-disk artifacts, bootstrap standard errors, benchmarks.

An artifact is a directory holding a manifest (plan, scaling metadata, depth
report, standardization constants) plus the encrypted coefficient files. The
manifest deliberately contains no timing, so a fixed (dataset seed, key seed,
plan) triple reproduces every output byte.
"""

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import engine, fv, reference
from .backend import FvBackend, FvScalar, OracleBackend
from .data import DataError, DatasetBundle
from .depth import (
    CD,
    GD,
    GD_VWT,
    NAG,
    CapacityError,
    FitPlan,
    PlanError,
    mmd_of,
    observed_growth,
    plan_report,
    select_params,
)
from .encoding import EncodingConfig, decode_scalar, encode_matrix

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
ARTIFACT_VERSION = 1
# known plaintext encrypted alongside the fit; failing to decrypt it back
# means the supplied key is not the one the artifact was produced under
CANARY_INT = 314159

__all__ = [
    "KeyMismatchError",
    "BenchmarkRecord",
    "fit_pipeline",
    "encrypt_dataset_to_dir",
    "fit_encrypted",
    "decrypt_report",
    "predict_from_artifact",
    "bootstrap_se",
    "benchmark",
    "k_for_mmd",
    "keygen_to_file",
    "load_keys",
    "default_workers",
]


class KeyMismatchError(RuntimeError):
    """The supplied key material does not match the artifact."""


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ELSQ_WORKERS", "1")))
    except ValueError:
        return 1


def keygen_to_file(plan: FitPlan, path, seed: bytes = b"elsq-keys") -> fv.FvParams:
    """Select parameters for the plan and write a fresh key set."""
    params = select_params(plan)
    ctx = fv.FvContext(params)
    keys = fv.keygen(ctx, seed=seed)
    Path(path).write_bytes(fv.serialize_keys(params, keys))
    return params


def load_keys(path):
    return fv.deserialize_keys(Path(path).read_bytes())


def _np_list(a):
    return [float(v) for v in np.asarray(a).ravel()]


def _augment_if_ridge(X, y, plan):
    """Append the penalty rows for a positive ridge penalty.

    The plan's N is bumped to the augmented row count so the depth and
    growth bounds see the widened inner products."""
    if plan.alpha <= 0:
        return X, y, plan
    X_aug, y_aug = engine.ridge_augment(X, y, plan.alpha)
    return X_aug, y_aug, replace(plan, N=X_aug.shape[0])


def fit_pipeline(bundle: DatasetBundle, plan: FitPlan, out_dir, backend_kind: str = "oracle", keys_path=None, key_seed: bytes = b"elsq-keys"):
    """Encrypt the bundle, run the planned fit, and write the artifact.

    Parameter selection runs first and refuses infeasible plans before any
    encryption happens. Returns (manifest dict, timings dict)."""
    if plan.N != bundle.N or plan.P != bundle.P:
        raise DataError(
            f"plan is for N={plan.N}, P={plan.P} but the bundle has N={bundle.N}, P={bundle.P}"
        )
    X_fit, y_fit, plan = _augment_if_ridge(bundle.X, bundle.y, plan)
    report = plan_report(plan)
    if "error" in report:
        raise CapacityError(report["error"], report["message"])

    cfg = EncodingConfig(plan.phi)
    X_enc = encode_matrix(X_fit, cfg)
    y_enc = encode_matrix(y_fit, cfg)

    if backend_kind == "oracle":
        bk = OracleBackend(track_polynomials=True)
        params = None
    elif backend_kind == "fv":
        params = fv.FvParams(d=report["d"], t=report["t"], q=1 << report["qbits"])
        if keys_path is not None:
            loaded_params, keys = load_keys(keys_path)
            if (loaded_params.d, loaded_params.t, loaded_params.q) != (params.d, params.t, params.q):
                raise KeyMismatchError(
                    f"key file is for (d={loaded_params.d}, log2 q={loaded_params.qbits}) "
                    f"but the plan needs (d={params.d}, log2 q={params.qbits})"
                )
            ctx = fv.FvContext(params)
        else:
            ctx = fv.FvContext(params)
            keys = fv.keygen(ctx, seed=key_seed)
        bk = FvBackend(ctx, keys)
    else:
        raise DataError(f"unknown backend {backend_kind!r}; expected 'oracle' or 'fv'")

    t0 = time.perf_counter()
    data_enc = engine.encrypt_dataset(bk, X_enc, y_enc)
    t1 = time.perf_counter()
    result = engine.run_plan(bk, data_enc, plan)
    t2 = time.perf_counter()
    timings = {"encrypt_s": t1 - t0, "fit_s": t2 - t1}
    standardization = {
        "x_means": _np_list(bundle.x_means),
        "x_scales": _np_list(bundle.x_scales),
        "y_mean": float(bundle.y_mean),
        "columns": bundle.columns,
    }
    manifest = _write_artifact(
        out_dir, plan, report, result, bk, backend_kind, params, standardization
    )
    return manifest, timings


def _write_artifact(out_dir, plan, report, result, bk, backend_kind, params, standardization):
    coeffs = result.coefficients
    manifest = {
        "format_version": ARTIFACT_VERSION,
        "backend": backend_kind,
        "plan": {
            "algorithm": plan.algorithm,
            "K": plan.K,
            "P": plan.P,
            "N": plan.N,
            "phi": plan.phi,
            "nu": plan.nu,
            "alpha": plan.alpha,
            "preconditioned": plan.preconditioned,
            "include_prediction": plan.include_prediction,
        },
        "scaling": {
            "k": coeffs.scaling.k,
            "scale": str(coeffs.scaling.scale),
            "per_coordinate_scales": (
                None
                if coeffs.per_coordinate_scales is None
                else [str(s) for s in coeffs.per_coordinate_scales]
            ),
        },
        "standardization": standardization,
        "depth": {"mmd": report["mmd"], "measured": [int(b.depth) for b in coeffs.beta]},
        "bounds": {
            "degree": report["degree_bound"],
            "coefficient": str(report["coeff_bound"]),
            "t_bits": report["t_bits"],
        },
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if backend_kind == "oracle":
        obs = observed_growth(result.trace)
        manifest["observed_growth"] = {
            "degree": max(obs.degree_per_iter),
            "coefficient": str(max(obs.coeff_per_iter)),
        }
        manifest["coefficients"] = [str(bk.decrypt_int(b)) for b in coeffs.beta]
        manifest["ciphertext_bytes"] = sum(
            (abs(bk.decrypt_int(b)).bit_length() + 7) // 8 for b in coeffs.beta
        )
    else:
        manifest["params"] = {"d": params.d, "t": params.t, "qbits": params.qbits}
        files = []
        total = 0
        for j, b in enumerate(coeffs.beta):
            name = f"beta{j}.ct"
            blob = fv.serialize_ciphertext(params, b.ct)
            (out_dir / name).write_bytes(blob)
            files.append(name)
            total += b.ct.byte_size(params)
        canary = bk.encrypt_int(CANARY_INT)
        (out_dir / "canary.ct").write_bytes(fv.serialize_ciphertext(params, canary.ct))
        manifest["coefficient_files"] = files
        manifest["ciphertext_bytes"] = total
        manifest["noise_budget_min"] = min(bk.noise_budget(b) for b in coeffs.beta)
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def encrypt_dataset_to_dir(bundle: DatasetBundle, phi: int, keys_path, out_dir, plan: FitPlan):
    """Encrypt a standardized bundle into a directory the fit step can load.

    The plan is needed up front because the ciphertext parameters are sized
    for the whole circuit that will later run on this data."""
    report = plan_report(plan)
    if "error" in report:
        raise CapacityError(report["error"], report["message"])
    params, keys = load_keys(keys_path)
    want = (report["d"], report["t"], 1 << report["qbits"])
    if (params.d, params.t, params.q) != want:
        raise KeyMismatchError(
            f"key file is for (d={params.d}, log2 q={params.qbits}) but the plan needs "
            f"(d={want[0]}, log2 q={want[2].bit_length() - 1})"
        )
    ctx = fv.FvContext(params)
    bk = FvBackend(ctx, keys)
    cfg = EncodingConfig(phi)
    X_enc = encode_matrix(bundle.X, cfg)
    y_enc = encode_matrix(bundle.y, cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_enc = engine.encrypt_dataset(bk, X_enc, y_enc)
    for i in range(bundle.N):
        for j in range(bundle.P):
            (out_dir / f"x{i}_{j}.ct").write_bytes(
                fv.serialize_ciphertext(params, data_enc.X[i][j].ct)
            )
        (out_dir / f"y{i}.ct").write_bytes(fv.serialize_ciphertext(params, data_enc.y[i].ct))
    meta = {
        "format_version": ARTIFACT_VERSION,
        "N": bundle.N,
        "P": bundle.P,
        "phi": phi,
        "params": {"d": params.d, "t": params.t, "qbits": params.qbits},
        "standardization": {
            "x_means": _np_list(bundle.x_means),
            "x_scales": _np_list(bundle.x_scales),
            "y_mean": float(bundle.y_mean),
            "columns": bundle.columns,
        },
    }
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    return meta


def fit_encrypted(enc_dir, plan: FitPlan, out_dir, keys_path):
    """Run the planned fit on a directory of pre-encrypted data."""
    enc_dir = Path(enc_dir)
    meta_path = enc_dir / "meta.json"
    if not meta_path.exists():
        raise DataError(f"no meta.json in {enc_dir}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    if (meta["N"], meta["P"], meta["phi"]) != (plan.N, plan.P, plan.phi):
        raise DataError(
            f"encrypted data is (N={meta['N']}, P={meta['P']}, phi={meta['phi']}) but the plan "
            f"wants (N={plan.N}, P={plan.P}, phi={plan.phi})"
        )
    report = plan_report(plan)
    if "error" in report:
        raise CapacityError(report["error"], report["message"])
    params, keys = load_keys(keys_path)
    art = meta["params"]
    if (params.d, params.t, params.qbits) != (art["d"], art["t"], art["qbits"]):
        raise KeyMismatchError(
            "key file parameters do not match the encrypted dataset"
        )
    ctx = fv.FvContext(params)
    bk = FvBackend(ctx, keys, seed=b"fit-encrypted")

    def load_ct(name):
        _, ct = fv.deserialize_ciphertext((enc_dir / name).read_bytes())
        return FvScalar(bk, ct)

    data_enc = engine.EncryptedDataset(
        X=[[load_ct(f"x{i}_{j}.ct") for j in range(plan.P)] for i in range(plan.N)],
        y=[load_ct(f"y{i}.ct") for i in range(plan.N)],
        N=plan.N,
        P=plan.P,
    )
    t0 = time.perf_counter()
    result = engine.run_plan(bk, data_enc, plan)
    timings = {"fit_s": time.perf_counter() - t0}
    manifest = _write_artifact(
        out_dir, plan, report, result, bk, "fv", params, meta["standardization"]
    )
    return manifest, timings


def _load_artifact(artifact_dir):
    path = Path(artifact_dir) / MANIFEST_NAME
    if not path.exists():
        raise DataError(f"no {MANIFEST_NAME} in {artifact_dir}")
    with open(path) as fh:
        return json.load(fh)


def _artifact_plan(manifest) -> FitPlan:
    p = dict(manifest["plan"])
    return FitPlan(
        p["algorithm"], K=p["K"], P=p["P"], N=p["N"], phi=p["phi"], nu=p["nu"],
        alpha=p["alpha"], preconditioned=p["preconditioned"],
        include_prediction=p["include_prediction"],
    )


def _decrypt_coefficient_ints(manifest, artifact_dir, keys_path):
    """Integers under the artifact's scaling, plus the live backend state."""
    if manifest["backend"] == "oracle":
        return [int(v) for v in manifest["coefficients"]], None, None
    if keys_path is None:
        raise KeyMismatchError("this artifact holds real ciphertexts; a key file is required")
    key_params, keys = load_keys(keys_path)
    art = manifest["params"]
    if (key_params.d, key_params.t, key_params.qbits) != (art["d"], art["t"], art["qbits"]):
        raise KeyMismatchError(
            f"key file is for (d={key_params.d}, log2 q={key_params.qbits}) but the artifact "
            f"was produced at (d={art['d']}, log2 q={art['qbits']})"
        )
    ctx = fv.FvContext(key_params)
    canary_blob = (Path(artifact_dir) / "canary.ct").read_bytes()
    _, canary = fv.deserialize_ciphertext(canary_blob)
    if fv.plaintext_to_int(key_params, fv.decrypt(ctx, keys, canary)) != CANARY_INT:
        raise KeyMismatchError("the supplied secret key does not decrypt this artifact")
    values = []
    for name in manifest["coefficient_files"]:
        _, ct = fv.deserialize_ciphertext((Path(artifact_dir) / name).read_bytes())
        values.append(fv.plaintext_to_int(key_params, fv.decrypt(ctx, keys, ct)))
    return values, (ctx, keys), key_params


def decrypt_report(artifact_dir, keys_path=None) -> dict:
    """Decode an artifact into coefficients and diagnostics."""
    manifest = _load_artifact(artifact_dir)
    ints, _, _ = _decrypt_coefficient_ints(manifest, artifact_dir, keys_path)
    scaling = manifest["scaling"]
    if scaling["per_coordinate_scales"] is not None:
        scales = [int(s) for s in scaling["per_coordinate_scales"]]
        std = [decode_scalar(v, s) for v, s in zip(ints, scales)]
    else:
        scale = int(scaling["scale"])
        std = [decode_scalar(v, scale) for v in ints]
    st = manifest["standardization"]
    raw = [b / s for b, s in zip(std, st["x_scales"])]
    intercept = st["y_mean"] - sum(b * m for b, m in zip(raw, st["x_means"]))
    report = {
        "algorithm": manifest["plan"]["algorithm"],
        "K": manifest["plan"]["K"],
        "backend": manifest["backend"],
        "coefficients_standardized": std,
        "coefficients_raw": raw,
        "intercept": intercept,
        "columns": st["columns"],
        "mmd": manifest["depth"]["mmd"],
        "depth_measured": max(manifest["depth"]["measured"]),
        "bounds": manifest["bounds"],
    }
    if "observed_growth" in manifest:
        report["observed_growth"] = manifest["observed_growth"]
    if "noise_budget_min" in manifest:
        report["noise_budget_min"] = manifest["noise_budget_min"]
    return report


def predict_from_artifact(artifact_dir, raw_row, keys_path=None) -> float:
    """Standardize a raw covariate row, run the encrypted dot product against
    the stored coefficients, and decode the prediction in raw response units."""
    manifest = _load_artifact(artifact_dir)
    plan = _artifact_plan(manifest)
    st = manifest["standardization"]
    raw_row = np.asarray(raw_row, dtype=float)
    if raw_row.shape != (plan.P,):
        raise DataError(f"expected a row of {plan.P} covariates, got shape {raw_row.shape}")
    row_std = (raw_row - np.array(st["x_means"])) / np.array(st["x_scales"])
    cfg = EncodingConfig(plan.phi)
    row_enc = encode_matrix(row_std, cfg)

    scaling = manifest["scaling"]
    per_scales = scaling["per_coordinate_scales"]
    if manifest["backend"] == "oracle":
        bk = OracleBackend()
        beta = [bk.encrypt_int(int(v)) for v in manifest["coefficients"]]
    else:
        _, live, params = _decrypt_coefficient_ints(manifest, artifact_dir, keys_path)
        ctx, keys = live
        bk = FvBackend(ctx, keys, seed=b"predict")
        beta = []
        for name in manifest["coefficient_files"]:
            _, ct = fv.deserialize_ciphertext((Path(artifact_dir) / name).read_bytes())
            beta.append(FvScalar(bk, ct))
    coeffs = engine.EncryptedCoefficients(
        beta=beta,
        scaling=engine.ScalingState(
            scaling["k"], plan.phi, plan.nu, plan.algorithm, int(scaling["scale"])
        ),
        per_coordinate_scales=None if per_scales is None else [int(s) for s in per_scales],
    )
    if coeffs.per_coordinate_scales is not None:
        coeffs = engine.unify_cd_scaling(bk, coeffs)
    row_ct = [bk.encrypt_int(int(v)) for v in row_enc]
    pred, divisor = engine.predict(bk, row_ct, coeffs)
    value = bk.decrypt_int(pred)
    return decode_scalar(value, divisor) + st["y_mean"]


def _bootstrap_single(args):
    X, y, plan, seed, b = args
    n, p = X.shape
    cfg = EncodingConfig(plan.phi)
    for attempt in range(20):
        rng = np.random.default_rng(np.random.SeedSequence([seed, b, attempt]))
        idx = rng.integers(0, n, size=n)
        Xb, yb = X[idx], y[idx]
        if np.linalg.matrix_rank(Xb) < p:
            logger.warning("bootstrap resample %d attempt %d is rank-deficient; redrawing", b, attempt)
            continue
        Xb, yb, plan_b = _augment_if_ridge(Xb, yb, plan)
        bk = OracleBackend()
        data_enc = engine.encrypt_dataset(bk, encode_matrix(Xb, cfg), encode_matrix(yb, cfg))
        result = engine.run_plan(bk, data_enc, plan_b)
        return engine.decode_coefficients(bk, result.coefficients)
    raise DataError(f"bootstrap resample {b} was rank-deficient 20 times in a row")


def bootstrap_se(bundle: DatasetBundle, plan: FitPlan, B: int, seed: int, workers: int = None) -> np.ndarray:
    """Coordinatewise standard deviation of B independently refitted
    bootstrap resamples. Resampling happens in the clear; each resample is
    encoded, encrypted, and fitted separately."""
    if B < 2:
        raise DataError(f"need at least 2 resamples, got {B}")
    workers = workers or default_workers()
    jobs = [(bundle.X, bundle.y, plan, seed, b) for b in range(B)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            betas = list(pool.map(_bootstrap_single, jobs))
    else:
        betas = [_bootstrap_single(j) for j in jobs]
    return np.stack(betas).std(axis=0, ddof=1)


@dataclass
class BenchmarkRecord:
    algorithm: str
    K: int
    mmd: int
    error_vs_ols: float  # root mean squared deviation
    wall_time_s: float
    ciphertext_bytes: int


def k_for_mmd(algorithm: str, mmd: int, P: int) -> int:
    """Largest K whose circuit fits the depth budget (exact floor inverse)."""
    if algorithm == GD:
        k = mmd // 2
    elif algorithm == GD_VWT:
        k = (mmd - 1) // 2
    elif algorithm == NAG:
        k = mmd // 3
    elif algorithm == CD:
        k = mmd // (2 * P)
    else:
        raise PlanError(f"unknown algorithm {algorithm!r}")
    if k < 1:
        raise PlanError(f"depth budget {mmd} is too small for {algorithm} at P={P}")
    return k


def benchmark(bundle: DatasetBundle, entries, phi: int = 2, nu: int = None, csv_path=None):
    """Run each (algorithm, K-or-budget) entry on the exact-integer backend.

    entries: iterable of (algorithm, {"K": k}) or (algorithm, {"mmd": m}).
    Returns BenchmarkRecord rows; optionally writes them as CSV."""
    nu = nu or reference.suggest_nu(bundle.X)
    beta_ols = reference.ols_closed_form(bundle.X, bundle.y)
    cfg = EncodingConfig(phi)
    X_enc = encode_matrix(bundle.X, cfg)
    y_enc = encode_matrix(bundle.y, cfg)
    records = []
    for algorithm, spec in entries:
        if "K" in spec:
            K = spec["K"]
        else:
            K = k_for_mmd(algorithm, spec["mmd"], bundle.P)
        plan = FitPlan(algorithm, K=K, P=bundle.P, N=bundle.N, phi=phi, nu=nu)
        bk = OracleBackend()
        t0 = time.perf_counter()
        data_enc = engine.encrypt_dataset(bk, X_enc, y_enc)
        result = engine.run_plan(bk, data_enc, plan)
        wall = time.perf_counter() - t0
        decoded = engine.decode_coefficients(bk, result.coefficients)
        err = float(np.sqrt(np.mean((decoded - beta_ols) ** 2)))
        size = sum(
            (abs(bk.decrypt_int(b)).bit_length() + 7) // 8 for b in result.coefficients.beta
        )
        records.append(BenchmarkRecord(algorithm, K, mmd_of(plan), err, wall, size))
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algorithm", "K", "mmd", "error_vs_ols", "wall_time_s", "ciphertext_bytes"])
            for r in records:
                writer.writerow([r.algorithm, r.K, r.mmd, f"{r.error_vs_ols:.10g}", f"{r.wall_time_s:.6f}", r.ciphertext_bytes])
    return records
