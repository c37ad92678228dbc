"""Least squares core and the two estimator assemblies.

``ols_fit`` is the generic dense path: pivoted QR, never normal equations,
with empty / collinear columns dropped at a 1e-10 relative tolerance and
reported.  ``regress_later_fit`` / ``regress_now_fit`` exploit the disjoint
bin supports of the sieve basis: the global least squares problem decouples
into per-bin two-column problems, solved from the kernel backend's per-bin
thin-QR factors (identical solution to a global orthogonal decomposition).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .basis import SieveBasis, _block_stats, _gram_blocks_from_qr, projection_coefficients
from .distributions import DistSpec
from .errors import ConfigurationError, DegenerateDesignError
from .model import SampleSet

COLUMN_NORM_TOL = 1e-10
RANK_TOL = 1e-10
PROJECTION_ERROR_TOL = 1e-8


@dataclass(frozen=True)
class FitResult:
    """Estimated coefficients plus rank / conditioning diagnostics."""

    coefficients: np.ndarray
    rank: int
    dropped_columns: tuple[int, ...]
    residual_l2: float
    gram_frobenius_dist: float
    gram_lambda_min: float
    mode: str  # later | now | ols
    n: int

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=np.float64)
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "rank": self.rank,
            "dropped_columns": list(self.dropped_columns),
            "residual_l2": self.residual_l2,
            "gram_frobenius_dist": self.gram_frobenius_dist,
            "gram_lambda_min": self.gram_lambda_min,
            "coefficients": self.coefficients.tolist(),
        }


@dataclass(frozen=True)
class NowDiagnostics:
    """Residual variance estimate of the time-t regression.

    sigma2 estimates the projection-error variance; the flag is a heuristic
    (sigma2 above 1e-8).  Constancy of the conditional variance is assumed by
    the rate theory but not tested here: it fails for most payoffs, and only
    the average enters the K/N term.
    """

    residual_variance_estimate: float
    projection_error_present: bool


def ols_fit(design_rows, targets, mode: str = "ols") -> FitResult:
    """Dense least squares via column-pivoted QR.

    Columns with norm below 1e-10 sqrt(N) (e.g. empty bins) and columns
    pivoted out at relative rank tolerance 1e-10 are dropped with exact zero
    coefficients.
    """
    A = np.asarray(design_rows, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if A.ndim != 2 or A.shape[0] != y.shape[0]:
        raise ConfigurationError("design rows and targets disagree on the sample size")
    n, p = A.shape
    if n < 1:
        raise ConfigurationError("need at least one sample")
    norms = np.linalg.norm(A, axis=0)
    keep = np.nonzero(norms > COLUMN_NORM_TOL * np.sqrt(n))[0]
    if keep.size == 0:
        raise DegenerateDesignError("all design columns are numerically zero")
    Q, R, piv = scipy.linalg.qr(A[:, keep], mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        raise DegenerateDesignError("design has no usable pivot")
    rank = int(np.sum(diag > RANK_TOL * diag[0]))
    z = Q.T @ y
    sub = scipy.linalg.solve_triangular(R[:rank, :rank], z[:rank])
    coef = np.zeros(p)
    coef[keep[piv[:rank]]] = sub
    dropped = sorted(set(range(p)) - set(keep[piv[:rank]].tolist()))
    resid = y - A @ coef
    gram = A.T @ A / n
    eig = np.linalg.eigvalsh(gram)
    return FitResult(
        coefficients=coef,
        rank=rank,
        dropped_columns=tuple(dropped),
        residual_l2=float(np.linalg.norm(resid)),
        gram_frobenius_dist=float(np.linalg.norm(gram - np.eye(p), "fro")),
        gram_lambda_min=float(eig[0]),
        mode=mode,
        n=n,
    )


def predict(basis: SieveBasis, coefficients: np.ndarray, u) -> np.ndarray:
    """Fitted piecewise-linear function at u (zero outside the domain)."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    idx = _kernels.bin_indices(basis.partition.edges, arr)
    out = np.zeros(arr.shape)
    inside = idx >= 0
    k = idx[inside]
    out[inside] = (coefficients[2 * k] * basis.norm0[k]
                   + coefficients[2 * k + 1] * basis.norm1[k] * (arr[inside] - basis.centers[k]))
    return float(out[0]) if np.ndim(u) == 0 else out


def _fit_on_basis(u: np.ndarray, x: np.ndarray, basis: SieveBasis, mode: str) -> FitResult:
    n = u.shape[0]
    if n < 1:
        raise ConfigurationError("need at least one sample")
    R, z, _ = _kernels.binned_qr(basis.partition.edges, basis.centers,
                                 basis.norm0, basis.norm1, u, x)
    coef = np.zeros(2 * basis.K)
    dropped: list[int] = []
    floor = COLUMN_NORM_TOL * np.sqrt(n)
    for k in range(basis.K):
        r11, r12, r22 = R[k]
        if r11 <= floor:  # empty bin: both columns gone
            dropped.extend((2 * k, 2 * k + 1))
            continue
        norm2 = np.hypot(r12, r22)
        if r22 <= max(RANK_TOL * norm2, floor):
            # centered-linear column degenerate within the bin
            dropped.append(2 * k + 1)
            coef[2 * k] = z[k, 0] / r11
        else:
            a1 = z[k, 1] / r22
            coef[2 * k + 1] = a1
            coef[2 * k] = (z[k, 0] - r12 * a1) / r11
    if len(dropped) == 2 * basis.K:
        raise DegenerateDesignError("every basis column is empty on this sample")
    resid = x - predict(basis, coef, u)
    stats = _block_stats(_gram_blocks_from_qr(R, n))
    return FitResult(
        coefficients=coef,
        rank=2 * basis.K - len(dropped),
        dropped_columns=tuple(sorted(dropped)),
        residual_l2=float(np.linalg.norm(resid)),
        gram_frobenius_dist=stats.frobenius_dist,
        gram_lambda_min=stats.lambda_min,
        mode=mode,
        n=n,
    )


def _univariate_features(sample: SampleSet) -> np.ndarray:
    if sample.dim != 1:
        raise ConfigurationError("regression expects a univariate feature sample")
    return sample.feature_column()


def _targets(sample: SampleSet) -> np.ndarray:
    if sample.payoffs is None:
        raise ConfigurationError("sample carries no payoffs to regress")
    return sample.payoffs


def regress_later_fit(sample: SampleSet, basis: SieveBasis) -> FitResult:
    """Regress the payoff on basis functions of the same-date feature."""
    return _fit_on_basis(_univariate_features(sample), _targets(sample), basis, "later")


def regress_now_fit(sample: SampleSet, basis: SieveBasis) -> tuple[FitResult, NowDiagnostics]:
    """Regress the payoff on basis functions of the earlier-date feature.

    The residual now contains an irreducible projection error; its variance
    is estimated as RSS / (N - rank).
    """
    fit = _fit_on_basis(_univariate_features(sample), _targets(sample), basis, "now")
    df = fit.n - fit.rank
    sigma2 = fit.residual_l2 ** 2 / df if df > 0 else float("nan")
    return fit, NowDiagnostics(float(sigma2), bool(sigma2 > PROJECTION_ERROR_TOL))


def coefficient_error(fit: FitResult, basis: SieveBasis, gT, dist: DistSpec,
                      true_coefficients: np.ndarray | None = None) -> float:
    """(alpha_hat - alpha)^T (alpha_hat - alpha) against the quadrature
    projection coefficients; dropped coordinates enter at zero."""
    alpha = projection_coefficients(gT, basis, dist) if true_coefficients is None \
        else np.asarray(true_coefficients, dtype=np.float64)
    if alpha.shape != fit.coefficients.shape:
        raise ConfigurationError("coefficient vectors disagree in length")
    diff = fit.coefficients - alpha
    return float(diff @ diff)
