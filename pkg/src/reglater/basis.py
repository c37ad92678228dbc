"""Orthonormal piecewise-linear sieve basis on equal-probability bins.

The domain is split into K bins carrying mass 1/K each under the feature
law.  Bin k carries two functions: a normalized indicator (constant sqrt(K))
and a normalized centered-linear term.  With centers at the bin conditional
means and closed-form normalization constants the 2K functions form an
orthonormal system, so the population Gram matrix is the identity and the
sample Gram converges to it.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _kernels
from .distributions import DistSpec, Empirical
from .errors import BasisConstructionError, ConfigurationError
from .model import Domain, SampleSet
from .payoff import PayoffSpec, eval_payoff

ANALYTIC_MASS_TOL = 1e-12
EMPIRICAL_MASS_TOL = 1e-3
MIN_PILOT_FACTOR = 10
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class BinPartition:
    """Equal-probability bin edges over a compact domain."""

    edges: np.ndarray
    K: int
    domain: Domain
    mode: str  # analytic | empirical

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        if edges.ndim != 1 or edges.size != self.K + 1:
            raise BasisConstructionError("partition: needs K+1 edges")
        if not np.all(np.diff(edges) > 0):
            raise BasisConstructionError("partition: edges must be strictly increasing")
        if edges[0] != self.domain.a1 or edges[-1] != self.domain.a2:
            raise BasisConstructionError("partition: edges must span the domain exactly")
        if self.mode not in ("analytic", "empirical"):
            raise BasisConstructionError(f"partition: unknown mode {self.mode!r}")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


@dataclass(frozen=True)
class SieveBasis:
    """Partition plus the per-bin centers and normalization constants."""

    partition: BinPartition
    centers: np.ndarray
    norm0: np.ndarray
    norm1: np.ndarray

    def __post_init__(self):
        K = self.partition.K
        centers = np.asarray(self.centers, dtype=np.float64)
        norm0 = np.asarray(self.norm0, dtype=np.float64)
        norm1 = np.asarray(self.norm1, dtype=np.float64)
        if centers.shape != (K,) or norm0.shape != (K,) or norm1.shape != (K,):
            raise BasisConstructionError("basis: per-bin arrays must have length K")
        if not np.allclose(norm0, np.sqrt(K), rtol=0, atol=0):
            raise BasisConstructionError("basis: indicator normalization must be sqrt(K)")
        if not np.all(norm1 > 0):
            raise BasisConstructionError("basis: linear normalization must be positive")
        edges = self.partition.edges
        if np.any(centers < edges[:-1]) or np.any(centers > edges[1:]):
            raise BasisConstructionError("basis: centers must lie inside their bins")
        for arr in (centers, norm0, norm1):
            arr.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "norm0", norm0)
        object.__setattr__(self, "norm1", norm1)

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def dim(self) -> int:
        return 2 * self.partition.K

    def to_json_dict(self) -> dict:
        dom = self.partition.domain
        return {
            "K": self.K,
            "mode": self.partition.mode,
            "domain": {"a1": dom.a1, "a2": dom.a2, "mass": dom.mass},
            "edges": self.partition.edges.tolist(),
            "centers": self.centers.tolist(),
            "norm0": self.norm0.tolist(),
            "norm1": self.norm1.tolist(),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def basis_from_json_dict(doc: dict) -> SieveBasis:
    dom = Domain(doc["domain"]["a1"], doc["domain"]["a2"], doc["domain"]["mass"])
    part = BinPartition(np.asarray(doc["edges"], dtype=np.float64), int(doc["K"]), dom, doc["mode"])
    return SieveBasis(part, np.asarray(doc["centers"]), np.asarray(doc["norm0"]),
                      np.asarray(doc["norm1"]))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _law_mass(dist: DistSpec) -> float:
    """Mass of the support under the original (untruncated) feature law."""
    return getattr(dist, "truncation_mass", 1.0)


def build_partition(dist: DistSpec, K: int) -> BinPartition:
    """Equal-probability edges: inverse CDF for analytic laws, order
    statistics of the pilot for empirical ones."""
    if K < 1:
        raise ConfigurationError("K: must be >= 1")
    a1, a2 = dist.support
    if isinstance(dist, Empirical):
        n = dist.sample.size
        if n < MIN_PILOT_FACTOR * K:
            raise ConfigurationError(
                f"empirical partition needs a pilot of at least {MIN_PILOT_FACTOR * K} "
                f"points for K={K}, got {n}")
        edges = np.array([a1] + [dist.quantile(k / K) for k in range(1, K)] + [a2])
        if not np.all(np.diff(edges) > 0):
            raise BasisConstructionError("empirical partition degenerate: repeated edges")
        mode = "empirical"
        tol = max(EMPIRICAL_MASS_TOL, 2.0 / n)
    else:
        edges = np.array([dist.quantile(k / K) for k in range(K + 1)])
        edges[0], edges[-1] = a1, a2  # pin the outer edges exactly
        mode = "analytic"
        tol = ANALYTIC_MASS_TOL
    part = BinPartition(edges, K, Domain(a1, a2, _law_mass(dist)), mode)
    masses = np.array([dist.partial_central_moments(lo, hi, 0.0, 0)[0]
                       for lo, hi in zip(edges[:-1], edges[1:])])
    if np.max(np.abs(masses - 1.0 / K)) > tol:
        raise BasisConstructionError(
            f"partition masses deviate from 1/K by {np.max(np.abs(masses - 1.0/K)):.2e} "
            f"(tolerance {tol:.0e})")
    return part


def bin_moments(partition: BinPartition, dist: DistSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centers and normalization constants (c, C0, C1) from partial moments."""
    K = partition.K
    edges = partition.edges
    c = np.empty(K)
    c1 = np.empty(K)
    for k in range(K):
        lo, hi = edges[k], edges[k + 1]
        first = dist.partial_central_moments(lo, hi, 0.0, 1)[1]
        c[k] = K * first
        m2 = dist.partial_central_moments(lo, hi, c[k], 2)[2]
        if not (m2 > 0 and np.isfinite(m2)):
            raise BasisConstructionError(f"bin {k}: degenerate second moment {m2!r}")
        c1[k] = 1.0 / np.sqrt(m2)
    c0 = np.full(K, np.sqrt(K))
    return c, c0, c1


def build_basis(dist: DistSpec, K: int) -> SieveBasis:
    part = build_partition(dist, K)
    c, c0, c1 = bin_moments(part, dist)
    return SieveBasis(part, c, c0, c1)


# ---------------------------------------------------------------------------
# evaluation & diagnostics
# ---------------------------------------------------------------------------

def eval_basis(basis: SieveBasis, u) -> np.ndarray:
    """Basis vector(s) at u: zero outside the domain, at most two nonzero
    entries (the owning bin's pair), top bin right-closed."""
    arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    mat = _kernels.design_matrix(basis.partition.edges, basis.centers,
                                 basis.norm0, basis.norm1, arr)
    return mat[0] if np.ndim(u) == 0 else mat


class GramDiagnostics(NamedTuple):
    frobenius_dist: float
    lambda_min: float


def _gram_blocks_from_qr(R: np.ndarray, n: int) -> np.ndarray:
    """Per-bin 2x2 blocks of (1/n) E^T E recovered from the thin-QR factors."""
    g = np.empty((R.shape[0], 3))
    g[:, 0] = R[:, 0] ** 2 / n
    g[:, 1] = R[:, 0] * R[:, 1] / n
    g[:, 2] = (R[:, 1] ** 2 + R[:, 2] ** 2) / n
    return g


def _block_stats(blocks: np.ndarray) -> GramDiagnostics:
    fro2 = np.sum((blocks[:, 0] - 1.0) ** 2 + 2.0 * blocks[:, 1] ** 2 + (blocks[:, 2] - 1.0) ** 2)
    tr = blocks[:, 0] + blocks[:, 2]
    det = blocks[:, 0] * blocks[:, 2] - blocks[:, 1] ** 2
    lmin = np.min(0.5 * tr - np.sqrt(np.maximum(0.25 * tr**2 - det, 0.0)))
    return GramDiagnostics(float(np.sqrt(fro2)), float(lmin))


def gram_diagnostics(basis: SieveBasis, sample) -> GramDiagnostics:
    """Frobenius distance of the sample Gram matrix from the identity and its
    smallest eigenvalue.  The Gram is block-diagonal (disjoint bin supports),
    so both statistics reduce to per-bin 2x2 blocks."""
    u = sample.feature_column() if isinstance(sample, SampleSet) else np.asarray(sample, dtype=np.float64)
    n = u.shape[0]
    if n < basis.dim:
        warnings.warn(f"sample size {n} below basis dimension {basis.dim}: "
                      "Gram matrix is rank deficient", RuntimeWarning, stacklevel=2)
    R, _, _ = _kernels.binned_qr(basis.partition.edges, basis.centers,
                                 basis.norm0, basis.norm1, u, np.zeros(n))
    return _block_stats(_gram_blocks_from_qr(R, n))


def _require_density(dist: DistSpec) -> None:
    if not dist.analytic:
        raise ConfigurationError("operation requires an analytic feature law")


def quadrature_gram(basis: SieveBasis, dist: DistSpec, nodes_per_bin: int = 64) -> np.ndarray:
    """Full 2K x 2K Gram matrix by per-bin Gauss-Legendre integration.

    Independent numeric check of the closed-form normalization: cross-bin
    entries are structurally zero (disjoint supports), within-bin entries are
    integrated against the density.
    """
    _require_density(dist)
    K = basis.K
    edges = basis.partition.edges
    xg, wg = leggauss(nodes_per_bin)
    G = np.zeros((2 * K, 2 * K))
    for k in range(K):
        lo, hi = edges[k], edges[k + 1]
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        u = mid + half * xg
        w = half * wg * dist.density(u)
        e0 = np.full_like(u, basis.norm0[k])
        e1 = basis.norm1[k] * (u - basis.centers[k])
        G[2 * k, 2 * k] = np.sum(w * e0 * e0)
        G[2 * k, 2 * k + 1] = G[2 * k + 1, 2 * k] = np.sum(w * e0 * e1)
        G[2 * k + 1, 2 * k + 1] = np.sum(w * e1 * e1)
    return G


def h_tilde(basis: SieveBasis, dist: DistSpec, N: int) -> float:
    """(1/N) E[(e^T e)^2]: the net controlling admissible growth of K with N.

    Disjoint supports reduce the square of the 2K-term sum to per-bin terms
    K^2 1_k + 2 K C1_k^2 1_k (U-c_k)^2 + C1_k^4 1_k (U-c_k)^4.
    """
    if basis.partition.mode != "analytic":
        raise ConfigurationError("h_tilde requires an analytic basis")
    if N < 1:
        raise ConfigurationError("N: must be >= 1")
    K = basis.K
    edges = basis.partition.edges
    total = 0.0
    for k in range(K):
        m = dist.partial_central_moments(edges[k], edges[k + 1], basis.centers[k], 4)
        total += K * K * m[0] + 2.0 * K * basis.norm1[k] ** 2 * m[2] + basis.norm1[k] ** 4 * m[4]
    return float(total) / N


# ---------------------------------------------------------------------------
# projection coefficients and deterministic approximation error
# ---------------------------------------------------------------------------

def _as_function(g) -> Callable:
    if isinstance(g, PayoffSpec):
        return lambda u: np.asarray(eval_payoff(g, u), dtype=np.float64)
    if callable(g):
        return g
    raise ConfigurationError("expected a PayoffSpec or a callable")


def _adaptive_bin_quad(f: Callable, lo: float, hi: float, tol: float = QUAD_TOL,
                       start: int = 16, cap: int = 2048) -> np.ndarray:
    """Integrate a vector-valued integrand over [lo, hi], doubling the
    Gauss-Legendre order until the change falls below tol."""
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    prev = None
    n = start
    while True:
        xg, wg = leggauss(n)
        vals = np.asarray(f(mid + half * xg))
        est = half * (vals @ wg)
        if prev is not None and np.max(np.abs(est - prev)) <= tol:
            return est
        if n >= cap:
            return est
        prev = est
        n *= 2


def projection_coefficients(g, basis: SieveBasis, dist: DistSpec) -> np.ndarray:
    """True (population) coefficients alpha_k = E[g e_k] by quadrature."""
    _require_density(dist)
    gf = _as_function(g)
    K = basis.K
    edges = basis.partition.edges
    alpha = np.zeros(2 * K)
    for k in range(K):
        lo, hi = edges[k], edges[k + 1]

        def integrand(u, k=k):
            gu = gf(u)
            f = dist.density(u)
            return np.stack([gu * f, gu * (u - basis.centers[k]) * f])

        pair = _adaptive_bin_quad(integrand, lo, hi)
        alpha[2 * k] = basis.norm0[k] * pair[0]
        alpha[2 * k + 1] = basis.norm1[k] * pair[1]
    return alpha


@dataclass(frozen=True)
class ApproxErrorMoments:
    """Deterministic approximation error of the best K-term representation:
    l2 is the L2 norm, fourth_root the square root of the fourth moment."""

    l2: float
    fourth_root: float

    @property
    def mean_square(self) -> float:
        """Squared L2 error: the floor any Monte Carlo MSE plateaus at."""
        return self.l2 ** 2


def approx_error_moments(gT, basis: SieveBasis, dist: DistSpec,
                         coefficients: np.ndarray | None = None) -> ApproxErrorMoments:
    """L2 and fourth-moment errors of the quadrature projection of gT."""
    _require_density(dist)
    gf = _as_function(gT)
    alpha = projection_coefficients(gf, basis, dist) if coefficients is None else coefficients
    K = basis.K
    edges = basis.partition.edges
    m2 = 0.0
    m4 = 0.0
    for k in range(K):
        lo, hi = edges[k], edges[k + 1]
        a0, a1 = alpha[2 * k], alpha[2 * k + 1]

        def integrand(u, k=k, a0=a0, a1=a1):
            err = gf(u) - a0 * basis.norm0[k] - a1 * basis.norm1[k] * (u - basis.centers[k])
            f = dist.density(u)
            e2 = err * err
            return np.stack([e2 * f, e2 * e2 * f])

        pair = _adaptive_bin_quad(integrand, lo, hi)
        m2 += pair[0]
        m4 += pair[1]
    return ApproxErrorMoments(float(np.sqrt(max(m2, 0.0))), float(np.sqrt(max(m4, 0.0))))
