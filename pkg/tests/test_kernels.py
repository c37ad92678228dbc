"""Backend contract tests: the compiled kernels and the numpy fallback must
agree with each other and with a dense orthogonal-decomposition solve."""
import numpy as np
import pytest

import reglater as rl
from reglater._kernels import _py

try:
    from reglater._kernels import _core
except ImportError:
    _core = None

BACKENDS = [("python", _py)] + ([("cython", _core)] if _core else [])


@pytest.fixture(scope="module")
def problem(basis_cache, w10_law):
    basis = basis_cache(12)
    gen = np.random.default_rng(42)
    a1, a2 = basis.partition.domain.a1, basis.partition.domain.a2
    u = gen.uniform(a1 - 1.0, a2 + 1.0, 20_000)  # includes out-of-domain points
    x = np.tanh(u) + 0.1 * gen.standard_normal(u.size)
    return basis, u, x


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_bin_indices_conventions(name, mod, basis_cache):
    basis = basis_cache(4)
    e = basis.partition.edges
    u = np.array([e[0] - 1.0, e[0], 0.5 * (e[1] + e[2]), e[2], e[4], e[4] + 1e-9])
    idx = mod.bin_indices(e, u)
    assert list(idx) == [-1, 0, 1, 2, 3, -1]


def test_backends_agree(problem):
    if _core is None:
        pytest.skip("compiled backend not built")
    basis, u, x = problem
    args = (basis.partition.edges, basis.centers, basis.norm0, basis.norm1)
    assert np.array_equal(_py.bin_indices(args[0], u), _core.bin_indices(args[0], u))
    Dp = _py.design_matrix(*args, u)
    Dc = _core.design_matrix(*args, u)
    assert np.array_equal(Dp, Dc)
    Rp, zp, cp = _py.binned_qr(*args, u, x)
    Rc, zc, cc = _core.binned_qr(*args, u, x)
    assert np.array_equal(cp, cc)
    assert np.max(np.abs(Rp - Rc)) < 1e-9
    assert np.max(np.abs(zp - zc)) < 1e-9


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_binned_qr_matches_dense_ols(name, mod, problem):
    basis, u, x = problem
    inside = mod.bin_indices(basis.partition.edges, u) >= 0
    u_in, x_in = u[inside], x[inside]
    design = mod.design_matrix(basis.partition.edges, basis.centers, basis.norm0,
                               basis.norm1, u_in)
    dense = rl.ols_fit(design, x_in)
    samp = rl.SampleSet(u_in.reshape(-1, 1), x_in, 0, u_in.size)
    binned = rl.regress_later_fit(samp, basis)
    assert np.max(np.abs(dense.coefficients - binned.coefficients)) < 1e-9
    assert binned.residual_l2 == pytest.approx(dense.residual_l2, rel=1e-10)
    assert dense.rank == binned.rank


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_qr_factor_reproduces_gram(name, mod, problem):
    basis, u, x = problem
    R, _, counts = mod.binned_qr(basis.partition.edges, basis.centers, basis.norm0,
                                 basis.norm1, u, x)
    D = mod.design_matrix(basis.partition.edges, basis.centers, basis.norm0,
                          basis.norm1, u)
    G = D.T @ D
    for k in range(basis.K):
        r11, r12, r22 = R[k]
        assert r11**2 == pytest.approx(G[2 * k, 2 * k], rel=1e-10, abs=1e-9)
        assert r11 * r12 == pytest.approx(G[2 * k, 2 * k + 1], rel=1e-8, abs=1e-8)
        assert r12**2 + r22**2 == pytest.approx(G[2 * k + 1, 2 * k + 1], rel=1e-9, abs=1e-9)
    assert counts.sum() == np.sum(mod.bin_indices(basis.partition.edges, u) >= 0)
