"""Time the compiled kernels against the pure-numpy fallback.

Run after an editable install:

    python benchmarks/bench_backends.py [N]

The fitting pipeline is dominated by the per-bin QR accumulation, so that is
what we time (plus bin lookup and dense design assembly for reference).
"""
from __future__ import annotations

import sys
import time

import numpy as np

from reglater import _kernels
from reglater._kernels import _py
from reglater.basis import build_basis
from reglater.distributions import TruncatedNormal
from scipy.special import ndtri

try:
    from reglater._kernels import _core
except ImportError:
    _core = None


def bench(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    K = 16
    q = float(ndtri(1 - 5e-5)) * np.sqrt(10.0)
    dist = TruncatedNormal(0.0, 10.0, -q, q)
    basis = build_basis(dist, K)
    rng = np.random.default_rng(0)
    u = np.clip(rng.normal(0.0, np.sqrt(10.0), n), -q, q)
    x = np.tanh(u)
    edges, centers = basis.partition.edges, basis.centers
    norm0, norm1 = basis.norm0, basis.norm1

    backends = [("python", _py)]
    if _core is not None:
        backends.append(("cython", _core))
    else:
        print("compiled backend not built; run pip install -e . --no-build-isolation")

    print(f"N={n}, K={K} (design dim {2*K}); best of 5, seconds")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name, _ in backends) + "   speedup")
    rows = [
        ("bin_indices", lambda m: m.bin_indices(edges, u)),
        ("design_matrix", lambda m: m.design_matrix(edges, centers, norm0, norm1, u)),
        ("binned_qr", lambda m: m.binned_qr(edges, centers, norm0, norm1, u, x)),
    ]
    for label, call in rows:
        times = [bench(lambda mod=mod: call(mod)) for _, mod in backends]
        ratio = times[0] / times[-1] if len(times) > 1 else float("nan")
        print(f"{label:<16}" + "".join(f"{t:12.4f}" for t in times) + f"   {ratio:6.1f}x")

    # agreement check between the backends
    if _core is not None:
        Rp, zp, cp = _py.binned_qr(edges, centers, norm0, norm1, u, x)
        Rc, zc, cc = _core.binned_qr(edges, centers, norm0, norm1, u, x)
        print("max |R_py - R_cy|:", np.max(np.abs(Rp - Rc)))
        print("max |z_py - z_cy|:", np.max(np.abs(zp - zc)))
        assert np.array_equal(cp, cc)
    print("active backend at import:", _kernels.BACKEND)
    return 0


if __name__ == "__main__":
    sys.exit(main())
