"""Data ingestion, feature standardization and the trace-normalized spectrum."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import DegenerateFeature, DegenerateSpectrum, NumericalError, ParseError, RangeError, ShapeError

ZERO_CLAMP = 1e-12
TRACE_RTOL = 1e-8
JACOBI_MAX_SWEEPS = 100
MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none", "inf", "-inf", "+inf", "infinity", "-infinity"}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DataMatrix:
    """n units (rows) by m features (columns)."""

    values: np.ndarray
    unit_labels: Optional[tuple] = None
    feature_labels: Optional[tuple] = None

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise ShapeError(f"expected a 2-d matrix, got {v.ndim} dimension(s)")
        n, m = v.shape
        if n < 3 or m < 2:
            raise ShapeError(f"need at least 3 units and 2 features, got n={n}, m={m}")
        if not np.all(np.isfinite(v)):
            i, j = np.argwhere(~np.isfinite(v))[0]
            raise ParseError(f"non-finite entry at unit {i}, feature {j}")
        if self.unit_labels is not None and len(self.unit_labels) != n:
            raise ShapeError("unit_labels length does not match n")
        if self.feature_labels is not None and len(self.feature_labels) != m:
            raise ShapeError("feature_labels length does not match m")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def transpose(self) -> "DataMatrix":
        return DataMatrix(self.values.T, self.feature_labels, self.unit_labels)


@dataclass(frozen=True)
class EigenSpectrum:
    """Descending eigenvalues summing to n, plus the feature count m."""

    eigenvalues: np.ndarray
    m: int

    def __post_init__(self):
        lam = _frozen(self.eigenvalues)
        if lam.ndim != 1 or lam.size < 3:
            raise ShapeError("a spectrum needs at least 3 eigenvalues")
        if not np.all(np.isfinite(lam)) or lam.min() < 0:
            raise RangeError("eigenvalues must be finite and non-negative")
        if np.any(np.diff(lam) > 0):
            raise RangeError("eigenvalues must be sorted in descending order")
        n = lam.size
        if abs(lam.sum() - n) > TRACE_RTOL * n:
            raise RangeError(f"eigenvalues sum to {lam.sum():.12g}, expected n={n}")
        if int(self.m) < 1:
            raise RangeError("m must be positive")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "m", int(self.m))

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @classmethod
    def from_values(cls, values: Sequence[float], m: int) -> "EigenSpectrum":
        """Sort descending and rescale so the values sum to n."""
        lam = np.sort(np.asarray(values, dtype=float))[::-1]
        if lam.size and lam.sum() <= 0:
            raise DegenerateSpectrum("eigenvalues sum to zero")
        lam = lam * (lam.size / lam.sum())
        return cls(np.where(lam < ZERO_CLAMP, 0.0, lam), m)


# ---------------------------------------------------------------------------
# loading

def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return cell.strip().lower() not in MISSING_TOKENS


def _is_label(cell: str) -> bool:
    return not _is_number(cell) and cell.strip().lower() not in MISSING_TOKENS


def load_matrix(path, format: Optional[str] = None, orientation: str = "units-as-rows",
                header: Optional[bool] = None, row_labels: Optional[bool] = None) -> DataMatrix:
    """Read a CSV/TSV table of numbers.

    A leading label row and/or label column is detected automatically unless
    `header` / `row_labels` force the choice. The returned matrix always has
    units along rows.
    """
    path = Path(path)
    if format is None:
        format = "tsv" if path.suffix.lower() in (".tsv", ".tab", ".txt") else "csv"
    if format not in ("csv", "tsv"):
        raise ParseError(f"unknown format {format!r}")
    if orientation not in ("units-as-rows", "units-as-columns"):
        raise ParseError(f"unknown orientation {orientation!r}")
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh, delimiter="," if format == "csv" else "\t") if r]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ParseError(f"{path} is empty")

    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(f"ragged table: line {i + 1} has {len(r)} fields, expected {width}")

    if header is None:
        header = len(rows) > 1 and all(_is_label(c) for c in rows[0][1:] or rows[0])
    body = rows[1:] if header else rows
    if row_labels is None:
        row_labels = width > 1 and len(body) > 0 and all(_is_label(r[0]) for r in body)
    col0 = 1 if row_labels else 0

    values = np.empty((len(body), width - col0))
    for i, r in enumerate(body):
        for j, cell in enumerate(r[col0:]):
            ok = _is_number(cell)
            v = float(cell) if ok else np.nan
            if not ok or not np.isfinite(v):
                raise ParseError(f"non-numeric value {cell!r} at row {i + 1 + int(header)}, column {j + 1 + col0}")
            values[i, j] = v

    col_names = tuple(rows[0][col0:]) if header else None
    row_names = tuple(r[0] for r in body) if row_labels else None
    if values.size == 0:
        raise ShapeError(f"{path} contains no numeric data")
    if orientation == "units-as-columns":
        values, col_names, row_names = values.T, row_names, col_names
    return DataMatrix(values, row_names, col_names)


# ---------------------------------------------------------------------------
# standardization

def standardize_features(d: DataMatrix, drop_constant: bool = False, rank_transform: bool = False) -> DataMatrix:
    """Z-score every feature across units (n-1 divisor).

    With `rank_transform`, each feature is first mapped to Blom normal scores
    (ranks pushed through the normal quantile function).
    """
    X = d.values
    spread = np.ptp(X, axis=0)
    const = spread <= 1e-14 * np.maximum(1.0, np.abs(X).max(axis=0))
    labels = d.feature_labels
    if const.any():
        if not drop_constant:
            j = int(np.flatnonzero(const)[0])
            name = labels[j] if labels else j
            raise DegenerateFeature(f"feature {name} is constant across units")
        X = X[:, ~const]
        if labels is not None:
            labels = tuple(l for l, c in zip(labels, const) if not c)
        if X.shape[1] < 2:
            raise ShapeError("fewer than 2 non-constant features remain")
    if rank_transform:
        n = X.shape[0]
        X = ndtri((rankdata(X, axis=0) - 0.375) / (n + 0.25))
    Z = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    return DataMatrix(Z, d.unit_labels, labels)


# ---------------------------------------------------------------------------
# eigensolver

def _round_robin(n: int) -> list:
    """n-1 (or n) rounds of disjoint index pairs covering every pair once."""
    N = n + n % 2
    order = list(range(N))
    rounds = []
    for _ in range(N - 1):
        pairs = [(order[i], order[N - 1 - i]) for i in range(N // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        order = [order[0], order[-1]] + order[1:-1]
    return rounds


def jacobi_eigh(S: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS, tol: Optional[float] = None):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in round-robin order, so each round annihilates
    n/2 disjoint off-diagonal pairs with one pair of matrix products. Returns (eigenvalues, vectors)
    sorted by descending eigenvalue.
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("jacobi_eigh needs a square matrix")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if tol is None:
        tol = 1e-12 * n * scale
    rounds = _round_robin(n) if n > 1 else []
    # small matrices: a BLAS product per round beats fancy indexing
    dense = n <= 128

    offdiag = ~np.eye(n, dtype=bool)

    def off_norm():
        return np.sqrt(np.sum(A[offdiag] ** 2))

    polished = False
    for _ in range(max_sweeps):
        if off_norm() <= tol:
            if polished:
                break
            polished = True  # one more sweep pushes the residual to round-off
        for P, Q in rounds:
            apq = A[P, Q]
            active = apq != 0.0
            if not active.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = (A[Q, Q] - A[P, P]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            t = np.where(active & np.isfinite(t), t, 0.0)
            t = np.where(active & (theta == 0.0), 1.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            if dense:
                J = np.eye(n)
                J[P, P] = c
                J[Q, Q] = c
                J[P, Q] = s
                J[Q, P] = -s
                A = J.T @ A @ J
                V = V @ J
            else:
                Ap, Aq = A[:, P].copy(), A[:, Q].copy()
                A[:, P] = c * Ap - s * Aq
                A[:, Q] = s * Ap + c * Aq
                Ap, Aq = A[P, :].copy(), A[Q, :].copy()
                A[P, :] = c[:, None] * Ap - s[:, None] * Aq
                A[Q, :] = s[:, None] * Ap + c[:, None] * Aq
                Vp, Vq = V[:, P].copy(), V[:, Q].copy()
                V[:, P] = c * Vp - s * Vq
                V[:, Q] = s * Vp + c * Vq
            A[P, Q] = 0.0
            A[Q, P] = 0.0
    else:
        if off_norm() > tol:
            raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off_norm():.3e})")

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def sample_spectrum(d: DataMatrix, standardize: bool = True, rank_transform: bool = False,
                    drop_constant: bool = False, solver: str = "jacobi") -> EigenSpectrum:
    """Eigenvalues of the n x n unit covariance, rescaled to sum to n.

    Features are z-scored across units (unless `standardize` is off) and each
    unit's row is mean-centered before forming S = Y Y^T / m.
    """
    if standardize:
        d = standardize_features(d, drop_constant=drop_constant, rank_transform=rank_transform)
    n, m = d.n, d.m
    if m < n:
        warnings.warn(f"m={m} < n={n}: the spectrum is rank deficient and ties at zero are expected",
                      RuntimeWarning, stacklevel=2)
    Y = d.values - d.values.mean(axis=1, keepdims=True)
    S = Y @ Y.T / m
    tr = np.trace(S)
    if not tr > 0:
        raise DegenerateSpectrum("covariance has zero trace after centering")
    S *= n / tr
    if solver == "jacobi":
        lam, _ = jacobi_eigh(S)
    elif solver == "lapack":
        lam = np.linalg.eigvalsh(S)[::-1]
    else:
        raise ValueError(f"unknown solver {solver!r}")
    lam = np.where(lam < ZERO_CLAMP, 0.0, lam)
    return EigenSpectrum(np.sort(lam)[::-1], m)
