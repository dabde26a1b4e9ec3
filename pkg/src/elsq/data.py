"""Dataset handling: simulation, CSV ingestion, and standardization.

Covariate columns are standardized to mean 0 and sample variance 1 and the
response is centred before anything is encoded or encrypted; the bundle keeps
the column means and scales so decoded coefficients can be mapped back to the
raw units.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "SimulationSpec",
    "DatasetBundle",
    "standardize",
    "simulate",
    "ingest_csv",
    "ar2_standin",
    "load_prostate",
]


class DataError(ValueError):
    """Raised for malformed, missing, or degenerate input data."""


@dataclass(frozen=True)
class SimulationSpec:
    """Equicorrelated Gaussian design with Gaussian noise."""

    N: int
    P: int
    rho: float = 0.0
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.N < 2 or self.P < 1:
            raise DataError(f"need N >= 2 and P >= 1, got N={self.N}, P={self.P}")
        if not 0.0 <= self.rho < 1.0:
            raise DataError(f"pairwise correlation must lie in [0, 1), got {self.rho}")
        if self.sigma < 0:
            raise DataError(f"noise scale must be non-negative, got {self.sigma}")


@dataclass
class DatasetBundle:
    """Raw data plus its standardized/centred form and the undo information."""

    raw_X: np.ndarray
    raw_y: np.ndarray
    X: np.ndarray
    y: np.ndarray
    x_means: np.ndarray
    x_scales: np.ndarray
    y_mean: float
    columns: list = None
    beta_true: np.ndarray = None

    def __post_init__(self):
        n = self.X.shape[0]
        col_means = self.X.mean(axis=0)
        col_vars = self.X.var(axis=0, ddof=1)
        if np.abs(col_means).max() >= 1e-10:
            raise DataError("standardized columns are not mean-centred")
        if np.abs(col_vars - 1.0).max() >= 1e-10:
            raise DataError("standardized columns do not have unit sample variance")
        if abs(float(self.y.mean())) >= 1e-10 * max(1.0, np.abs(self.raw_y).max()):
            raise DataError("response is not centred")
        if self.raw_X.shape != self.X.shape or len(self.y) != n:
            raise DataError("bundle arrays have inconsistent shapes")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def P(self) -> int:
        return self.X.shape[1]

    def destandardize_coefficients(self, beta: np.ndarray):
        """Map standardized-scale coefficients back to raw units.

        Returns (raw-scale coefficients, intercept)."""
        beta = np.asarray(beta, dtype=float)
        raw = beta / self.x_scales
        intercept = self.y_mean - float(raw @ self.x_means)
        return raw, intercept


def standardize(raw_X, raw_y, columns=None, beta_true=None) -> DatasetBundle:
    raw_X = np.asarray(raw_X, dtype=float)
    raw_y = np.asarray(raw_y, dtype=float)
    if raw_X.ndim != 2:
        raise DataError(f"design matrix must be 2-D, got shape {raw_X.shape}")
    if raw_X.shape[0] != len(raw_y):
        raise DataError(
            f"{raw_X.shape[0]} design rows for {len(raw_y)} responses"
        )
    if raw_X.shape[0] < 2:
        raise DataError("need at least two rows to standardize")
    means = raw_X.mean(axis=0)
    scales = raw_X.std(axis=0, ddof=1)
    constant = np.flatnonzero(scales == 0)
    if constant.size:
        names = (
            [columns[j] for j in constant] if columns else [str(j) for j in constant]
        )
        raise DataError(f"constant column(s) cannot be standardized: {', '.join(names)}")
    X = (raw_X - means) / scales
    y_mean = float(raw_y.mean())
    return DatasetBundle(
        raw_X=raw_X,
        raw_y=raw_y,
        X=X,
        y=raw_y - y_mean,
        x_means=means,
        x_scales=scales,
        y_mean=y_mean,
        columns=list(columns) if columns else None,
        beta_true=beta_true,
    )


def simulate(spec: SimulationSpec) -> DatasetBundle:
    """Draw beta ~ N(0, I), X rows ~ N(0, Sigma) with equal pairwise
    correlation rho, and y ~ N(X beta, sigma^2 I)."""
    rng = np.random.default_rng(spec.seed)
    cov = np.full((spec.P, spec.P), spec.rho) + (1.0 - spec.rho) * np.eye(spec.P)
    beta = rng.normal(size=spec.P)
    raw_X = rng.multivariate_normal(np.zeros(spec.P), cov, size=spec.N, method="cholesky")
    raw_y = raw_X @ beta + spec.sigma * rng.normal(size=spec.N)
    return standardize(raw_X, raw_y, beta_true=beta)


def _parse_cell(text, row, col_name):
    text = text.strip()
    if text == "" or text.lower() in ("na", "nan"):
        raise DataError(f"missing value in row {row}, column {col_name!r}")
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"non-numeric value {text!r} in row {row}, column {col_name!r}"
        ) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value in row {row}, column {col_name!r}")
    return value


def ingest_csv(path, response_column: str) -> DatasetBundle:
    """Read a rectangular numeric CSV with a header row and standardize it."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if response_column not in header:
        raise DataError(
            f"response column {response_column!r} not found; header has {header}"
        )
    y_idx = header.index(response_column)
    x_names = [h for i, h in enumerate(header) if i != y_idx]
    X_rows, y_vals = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"row {r} has {len(row)} cells, header has {len(header)}"
            )
        parsed = [_parse_cell(c, r, header[i]) for i, c in enumerate(row)]
        y_vals.append(parsed[y_idx])
        X_rows.append([v for i, v in enumerate(parsed) if i != y_idx])
    if not X_rows:
        raise DataError(f"{path} has a header but no data rows")
    return standardize(np.array(X_rows), np.array(y_vals), columns=x_names)


def ar2_standin(seed: int, n: int = 28, a1: float = 0.2, a2: float = -0.4, noise: float = 1.0) -> DatasetBundle:
    """Second-order autoregressive series arranged as a lagged regression.

    The response is the series value and the two covariates are its first and
    second lags, mirroring the shape (N=28, P=2) of a small longitudinal
    study; the default coefficients keep the lag columns mildly correlated so
    a couple of descent iterations suffice."""
    if n < 4:
        raise DataError(f"need at least 4 observations, got {n}")
    rng = np.random.default_rng(seed)
    burn = 100
    z = np.zeros(burn + n + 2)
    eps = rng.normal(scale=noise, size=z.size)
    for t in range(2, z.size):
        z[t] = a1 * z[t - 1] + a2 * z[t - 2] + eps[t]
    z = z[burn:]
    raw_X = np.column_stack([z[1:-1], z[:-2]])
    raw_y = z[2:]
    return standardize(raw_X, raw_y, columns=["lag1", "lag2"])


PROSTATE_COLUMNS = [
    "lcavol",
    "lweight",
    "age",
    "lbph",
    "svi",
    "lcp",
    "gleason",
    "pgg45",
    "lpsa",
]


def load_prostate(path) -> DatasetBundle:
    """Load the prostate cancer study table (97 rows, 8 covariates, response
    lpsa). The file is fetched by scripts/fetch_prostate.py, not vendored."""
    bundle = ingest_csv(path, response_column="lpsa")
    if bundle.columns != PROSTATE_COLUMNS[:-1]:
        raise DataError(
            f"unexpected columns {bundle.columns}; expected {PROSTATE_COLUMNS[:-1]}"
        )
    if bundle.N != 97:
        raise DataError(f"expected 97 rows, got {bundle.N}")
    return bundle
