"""Command-line interface.

Subcommands cover the whole workflow: simulate or ingest data, inspect the
parameters a plan would need, generate keys, encrypt, fit, decrypt, predict,
bootstrap, and benchmark. Every flag can also be supplied through a config
file of KEY=VALUE lines (--config); explicit flags win over the file.

Exit codes: 0 success, 2 no parameter set supports the plan, 3 bad input
data or plan, 4 key material does not match.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import pipeline, reference
from .data import DataError
from .depth import (
    ALGORITHMS,
    CapacityError,
    FitPlan,
    PlanError,
    mmd_of,
    plan_report,
    precondition,
)
from .encoding import EncodingError
from .fv import FvParameterError, FvUsageError
from .pipeline import KeyMismatchError

EXIT_OK = 0
EXIT_CAPACITY = 2
EXIT_DATA = 3
EXIT_KEYS = 4


def _read_config(path):
    """KEY=VALUE lines, # comments; keys are long option names."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip().lower().replace("_", "-"), value.strip()))
    return pairs


def _argv_with_config(argv):
    """Expand --config FILE into equivalent flags ahead of the explicit ones."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise DataError("--config needs a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    injected = []
    for key, value in _read_config(path):
        if value.lower() in ("true", "yes", "1") and key in ("precondition", "include-prediction"):
            injected.append(f"--{key}")
        elif value.lower() in ("false", "no", "0") and key in ("precondition", "include-prediction"):
            continue
        else:
            injected.extend([f"--{key}", value])
    # subcommand first, then config-derived flags, then explicit flags (which win)
    return rest[:1] + injected + rest[1:]


def _add_plan_args(sp, need_shape=False):
    sp.add_argument("--algorithm", choices=ALGORITHMS, default="GD")
    sp.add_argument("--k", type=int, default=2, help="number of iterations")
    sp.add_argument("--phi", type=int, default=2, help="decimal digits kept when encoding")
    sp.add_argument("--nu", default="auto", help="integer step denominator, or 'auto'")
    sp.add_argument("--alpha", type=float, default=0.0, help="ridge penalty")
    sp.add_argument("--precondition", action="store_true", help="fold 1/N into the step size")
    sp.add_argument("--include-prediction", action="store_true", help="budget depth for prediction")
    if need_shape:
        sp.add_argument("--n", type=int, required=True, help="number of observations")
        sp.add_argument("--p", type=int, required=True, help="number of covariates")


def _add_data_args(sp):
    sp.add_argument("--data", required=True, help="CSV file with a header row")
    sp.add_argument("--response", required=True, help="name of the response column")


def _build_plan(args, n, p):
    if args.nu == "auto":
        nu = None
    else:
        try:
            nu = int(args.nu)
        except ValueError:
            raise PlanError(f"--nu must be an integer or 'auto', got {args.nu!r}") from None
        if nu < 1:
            raise PlanError(f"--nu must be at least 1, got {nu}")
    plan = FitPlan(
        args.algorithm,
        K=args.k,
        P=p,
        N=n,
        phi=args.phi,
        nu=nu if nu is not None else 1,
        alpha=args.alpha,
        include_prediction=args.include_prediction,
    )
    return plan, nu is None


def _finalize_plan(args, bundle):
    plan, auto = _build_plan(args, bundle.N, bundle.P)
    if auto:
        from dataclasses import replace

        plan = replace(plan, nu=reference.suggest_nu(bundle.X))
    if args.precondition:
        plan = precondition(plan)
    return plan


def cmd_simulate(args):
    spec = data_mod.SimulationSpec(
        N=args.n, P=args.p, rho=args.rho, sigma=args.sigma, seed=args.seed
    )
    bundle = data_mod.simulate(spec)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(args.p)] + ["y"])
        for i in range(args.n):
            writer.writerow(
                [f"{v:.12g}" for v in bundle.raw_X[i]] + [f"{bundle.raw_y[i]:.12g}"]
            )
    if args.beta_out:
        with open(args.beta_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["coefficient"])
            for v in bundle.beta_true:
                writer.writerow([f"{v:.12g}"])
    print(f"wrote {args.n} rows ({args.p} covariates) to {args.out}")
    return EXIT_OK


def cmd_params(args):
    plan, auto = _build_plan(args, args.n, args.p)
    if auto:
        raise PlanError("params needs an explicit --nu (there is no data to derive it from)")
    if args.precondition:
        plan = precondition(plan)
    report = plan_report(plan)
    print(f"algorithm            {plan.algorithm}")
    print(f"iterations K         {plan.K}")
    print(f"multiplicative depth {report['mmd']}")
    print(f"degree bound         {report['degree_bound']}")
    print(f"coefficient bound    ~2^{report['coeff_bound'].bit_length()}")
    print(f"plaintext modulus t  2^{report['t_bits']}")
    if "error" in report:
        print(f"refused: {report['message']}", file=sys.stderr)
        return EXIT_CAPACITY
    print(f"ring degree d        {report['d']}")
    print(f"ciphertext modulus q 2^{report['qbits']} (table cap 2^{report['max_log2_q']})")
    print(f"security             {report['security']}")
    print(f"binding constraint   {report['binding_constraint']}")
    return EXIT_OK


def cmd_keygen(args):
    plan, auto = _build_plan(args, args.n, args.p)
    if auto:
        raise PlanError("keygen needs an explicit --nu (there is no data to derive it from)")
    if args.precondition:
        plan = precondition(plan)
    params = pipeline.keygen_to_file(plan, args.out, seed=args.seed.encode())
    print(f"wrote keys for d={params.d}, t=2^{params.t.bit_length() - 1}, q=2^{params.qbits} to {args.out}")
    return EXIT_OK


def cmd_encrypt(args):
    bundle = data_mod.ingest_csv(args.data, response_column=args.response)
    plan = _finalize_plan(args, bundle)
    meta = pipeline.encrypt_dataset_to_dir(bundle, plan.phi, args.keys, args.out, plan)
    n_files = meta["N"] * meta["P"] + meta["N"]
    print(f"encrypted {meta['N']}x{meta['P']} dataset to {args.out} ({n_files} ciphertexts)")
    return EXIT_OK


def cmd_fit(args):
    if args.encrypted:
        plan, auto = _build_plan(args, args.n, args.p)
        if auto:
            raise PlanError("fit --encrypted needs an explicit --nu")
        if args.precondition:
            plan = precondition(plan)
        manifest, timings = pipeline.fit_encrypted(args.encrypted, plan, args.out, args.keys)
    else:
        bundle = data_mod.ingest_csv(args.data, response_column=args.response)
        plan = _finalize_plan(args, bundle)
        manifest, timings = pipeline.fit_pipeline(
            bundle,
            plan,
            args.out,
            backend_kind=args.backend,
            keys_path=args.keys,
        )
    print(
        f"fit {manifest['plan']['algorithm']} K={manifest['plan']['K']} "
        f"(depth {max(manifest['depth']['measured'])}/{manifest['depth']['mmd']}) "
        f"in {timings['fit_s']:.2f}s -> {args.out}"
    )
    if "noise_budget_min" in manifest:
        print(f"remaining noise budget: {manifest['noise_budget_min']:.1f} bits")
    return EXIT_OK


def cmd_decrypt(args):
    report = pipeline.decrypt_report(args.artifact, keys_path=args.keys)
    names = report["columns"] or [f"x{j + 1}" for j in range(len(report["coefficients_raw"]))]
    print(f"algorithm {report['algorithm']}, K={report['K']}, backend {report['backend']}")
    print(f"depth {report['depth_measured']} (budgeted {report['mmd']})")
    if "observed_growth" in report:
        og = report["observed_growth"]
        print(
            f"message growth: degree {og['degree']} <= {report['bounds']['degree']}, "
            f"coefficient ~2^{int(og['coefficient']).bit_length()} <= 2^{int(report['bounds']['coefficient']).bit_length()}"
        )
    if "noise_budget_min" in report:
        print(f"remaining noise budget: {report['noise_budget_min']:.1f} bits")
    print(f"{'column':>12}  {'standardized':>14}  {'raw':>14}")
    for name, s, r in zip(names, report["coefficients_standardized"], report["coefficients_raw"]):
        print(f"{name:>12}  {s:>14.6f}  {r:>14.6f}")
    print(f"{'intercept':>12}  {'':>14}  {report['intercept']:>14.6f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["column", "standardized", "raw"])
            for name, s, r in zip(
                names, report["coefficients_standardized"], report["coefficients_raw"]
            ):
                writer.writerow([name, f"{s:.12g}", f"{r:.12g}"])
            writer.writerow(["intercept", "", f"{report['intercept']:.12g}"])
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_predict(args):
    try:
        row = [float(v) for v in args.row.split(",")]
    except ValueError:
        raise DataError(f"--row must be comma-separated numbers, got {args.row!r}") from None
    value = pipeline.predict_from_artifact(args.artifact, row, keys_path=args.keys)
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_bootstrap(args):
    bundle = data_mod.ingest_csv(args.data, response_column=args.response)
    plan = _finalize_plan(args, bundle)
    ses = pipeline.bootstrap_se(bundle, plan, B=args.b, seed=args.seed, workers=args.workers)
    names = bundle.columns or [f"x{j + 1}" for j in range(bundle.P)]
    print(f"{'column':>12}  {'bootstrap SE':>14}")
    for name, se in zip(names, ses):
        print(f"{name:>12}  {se:>14.6f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["column", "bootstrap_se"])
            for name, se in zip(names, ses):
                writer.writerow([name, f"{se:.12g}"])
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_benchmark(args):
    bundle = data_mod.ingest_csv(args.data, response_column=args.response)
    algorithms = [a.strip() for a in args.algorithms.split(",")]
    for a in algorithms:
        if a not in ALGORITHMS:
            raise PlanError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
    entries = []
    if args.mmd:
        for budget in (int(m) for m in args.mmd.split(",")):
            for a in algorithms:
                entries.append((a, {"mmd": budget}))
    else:
        for a in algorithms:
            entries.append((a, {"K": args.k}))
    nu = None if args.nu == "auto" else int(args.nu)
    records = pipeline.benchmark(bundle, entries, phi=args.phi, nu=nu, csv_path=args.out)
    print(f"{'algorithm':>10} {'K':>3} {'depth':>5} {'error vs OLS':>14} {'time (s)':>9} {'bytes':>10}")
    for r in records:
        print(
            f"{r.algorithm:>10} {r.K:>3} {r.mmd:>5} {r.error_vs_ols:>14.6g} "
            f"{r.wall_time_s:>9.3f} {r.ciphertext_bytes:>10}"
        )
    if args.out:
        print(f"wrote {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="elsq",
        description="Least-squares and ridge regression on homomorphically encrypted data.",
    )
    parser.add_argument("--config", help="KEY=VALUE file supplying default flags")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw a correlated Gaussian dataset to CSV")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--rho", type=float, default=0.0, help="pairwise correlation")
    sp.add_argument("--sigma", type=float, default=1.0, help="noise standard deviation")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--beta-out", help="also write the true coefficients")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("params", help="show the scheme parameters a plan needs")
    _add_plan_args(sp, need_shape=True)
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("keygen", help="generate keys sized for a plan")
    _add_plan_args(sp, need_shape=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", default="elsq-keys", help="key generation seed string")
    sp.set_defaults(func=cmd_keygen)

    sp = sub.add_parser("encrypt", help="encrypt a CSV dataset for a later fit")
    _add_data_args(sp)
    _add_plan_args(sp)
    sp.add_argument("--keys", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_encrypt)

    sp = sub.add_parser("fit", help="run an encrypted fit and write the artifact")
    sp.add_argument("--data", help="CSV file with a header row")
    sp.add_argument("--response", help="name of the response column")
    sp.add_argument("--encrypted", help="directory produced by 'encrypt' (instead of --data)")
    _add_plan_args(sp)
    sp.add_argument("--n", type=int, help="rows (only with --encrypted)")
    sp.add_argument("--p", type=int, help="covariates (only with --encrypted)")
    sp.add_argument("--backend", choices=["oracle", "fv"], default="oracle")
    sp.add_argument("--keys", help="key file (fv backend)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("decrypt", help="decode an artifact into coefficients")
    sp.add_argument("--artifact", required=True)
    sp.add_argument("--keys")
    sp.add_argument("--csv", help="also write the coefficients as CSV")
    sp.set_defaults(func=cmd_decrypt)

    sp = sub.add_parser("predict", help="encrypted prediction for one covariate row")
    sp.add_argument("--artifact", required=True)
    sp.add_argument("--keys")
    sp.add_argument("--row", required=True, help="comma-separated raw covariate values")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("bootstrap", help="bootstrap standard errors")
    _add_data_args(sp)
    _add_plan_args(sp)
    sp.add_argument("--b", type=int, default=50, help="number of resamples")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, help="parallel fits (default $ELSQ_WORKERS or 1)")
    sp.add_argument("--csv", help="also write the standard errors as CSV")
    sp.set_defaults(func=cmd_bootstrap)

    sp = sub.add_parser("benchmark", help="compare algorithms at fixed depth budgets")
    _add_data_args(sp)
    sp.add_argument("--algorithms", default="GD,CD,NAG,GD+VWT")
    sp.add_argument("--mmd", help="comma-separated depth budgets (K derived per algorithm)")
    sp.add_argument("--k", type=int, default=2, help="fixed K when no --mmd is given")
    sp.add_argument("--phi", type=int, default=2)
    sp.add_argument("--nu", default="auto")
    sp.add_argument("--out", help="plot-ready CSV path")
    sp.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _argv_with_config(argv)
        args = parser.parse_args(argv)
        if args.command == "fit":
            if args.encrypted:
                if args.n is None or args.p is None:
                    raise DataError("fit --encrypted needs --n and --p")
            elif not (args.data and args.response):
                raise DataError("fit needs --data and --response (or --encrypted)")
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except KeyMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_KEYS
    except (DataError, PlanError, EncodingError, FvParameterError, FvUsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
