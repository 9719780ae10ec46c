import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from calogero_susy import ModelParams, build_grid, build_supercharge_components
from calogero_susy.operators import CubicalComplex, build_sector, laplacian
from calogero_susy.spectral import (
    EigenSet,
    NonConvergenceError,
    canonical_sign,
    convergence_study,
    eigensolve,
    intertwine_eigenfunction,
    pair_spectra,
    read_eigenset,
    richardson,
    write_eigenset,
)


def dirichlet_levels(n, h, k):
    s = (2.0 / h**2) * np.sin(np.arange(1, n + 1) * np.pi / (2 * (n + 1))) ** 2
    return np.sort(np.add.outer(s, s).ravel())[:k]


@pytest.mark.parametrize("n", [32, 72])
def test_laplacian_levels_exact(n):
    axis = np.linspace(-1, 1, n)
    h = axis[1] - axis[0]
    op = -0.5 * laplacian(axis, 2)
    es = eigensolve(op, 8, tol=1e-10)
    assert es.meta["solver"] == ("dense" if n * n <= 4096 else "lanczos")
    assert np.allclose(es.eigenvalues, dirichlet_levels(n, h, 8), rtol=1e-10, atol=0)
    assert np.all(es.residuals <= 1e-10 * np.maximum(1, es.eigenvalues))


def test_lanczos_agrees_with_plain_mode():
    axis = np.linspace(-1, 1, 72)
    op = -0.5 * laplacian(axis, 2)
    a = eigensolve(op, 6, tol=1e-10)
    b = eigensolve(op, 6, tol=1e-10, sigma=None)
    ref = spla.eigsh(op, k=6, which="SA")[0]
    assert np.allclose(a.eigenvalues, b.eigenvalues, rtol=1e-10)
    assert np.allclose(a.eigenvalues, np.sort(ref), rtol=1e-9)


def test_eigensolve_is_deterministic():
    op = build_sector(ModelParams(), build_grid(7.5, 72), 0)
    a = eigensolve(op, 4, seed=3)
    b = eigensolve(op, 4, seed=3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_eigensolve_rejects_bad_k():
    with pytest.raises(ValueError):
        eigensolve(sp.identity(5), 5)


def test_nonconvergence_reports_best_effort():
    op = -0.5 * laplacian(np.linspace(-1, 1, 72), 2)
    with pytest.raises(NonConvergenceError):
        eigensolve(op, 6, sigma=None, max_iter=1)


def test_canonical_sign():
    v = np.array([[0.1, -0.3], [-0.9, 0.2], [0.2, 0.3]])
    out = canonical_sign(v)
    assert out[1, 0] == 0.9
    assert out[1, 1] == -0.2  # tie at 0.3, first occurrence is negative
    assert out[0, 1] == 0.3


def test_pairing_basic_and_multiplicity():
    rep = pair_spectra([1.0005, 2.5, 3.0, 3.0], [1.0, 3.0], [2.5], mode="value")
    assert len(rep.matched) == 3
    assert rep.unmatched[0][0] == 3.0
    assert rep.counts() == {"h0": 2, "h2": 1}
    assert rep.max_gap == pytest.approx(5e-4)


def test_pairing_edge_cases():
    e0, e2 = [1.0, 2.0], [3.0]
    assert pair_spectra([], e0, e2).all_matched
    assert not pair_spectra([1.0, 2.0], e0, e2, tol=0.0).matched
    assert not pair_spectra([1.0], [], []).matched
    with pytest.raises(ValueError):
        pair_spectra([1.0], e0, e2, mode="bogus")


def test_pairing_shift_invariant_in_spacing_mode():
    rng = np.random.default_rng(7)
    e0 = np.sort(rng.uniform(0, 10, 8))
    e2 = np.sort(rng.uniform(0, 10, 8))
    e1 = np.sort(np.concatenate([e0[:5], e2[:5]]) + rng.normal(0, 1e-4, 10))
    a = pair_spectra(e1, e0, e2)
    b = pair_spectra(e1 + 100.0, e0 + 100.0, e2 + 100.0)
    assert [m[1] for m in a.matched] == [m[1] for m in b.matched]
    assert np.allclose([m[3] for m in a.matched], [m[3] for m in b.matched], rtol=1e-8)


@pytest.fixture(scope="module")
def negative_chain():
    p = ModelParams(gamma=-1.5)
    g = build_grid(7.5, 48)
    cx = CubicalComplex(p, g)
    hs = [build_sector(p, g, m, cx) for m in range(3)]
    up = build_supercharge_components(p, g, 0, cx)
    return g, hs, up


def test_intertwining_transports_eigenvectors(negative_chain):
    g, hs, up = negative_chain
    es = eigensolve(hs[0], 10, tol=1e-10)
    out = [intertwine_eigenfunction(lam, v, up, "up", hs[1], g.h) for lam, v in zip(es.eigenvalues, es.eigenvectors.T)]
    assert all(r.annihilated for r in out[:6])
    live = [r for r in out if not r.annihilated]
    assert live
    for r, lam in zip(live, es.eigenvalues[6:]):
        assert r.residual <= 1e-8 * lam
        assert r.energy == pytest.approx(lam, rel=1e-9)


def test_intertwine_down_and_errors(negative_chain):
    g, hs, up = negative_chain
    es = eigensolve(hs[1], 3, tol=1e-10)
    r = intertwine_eigenfunction(es.eigenvalues[0], es.eigenvectors[:, 0], up, "down", hs[0], g.h)
    assert r.residual <= 1e-8 * max(1, es.eigenvalues[0])
    with pytest.raises(ValueError):
        intertwine_eigenfunction(1.0, es.eigenvectors[:, 0], up, "sideways", hs[0], g.h)


def test_convergence_study_recovers_second_order():
    def builder(n):
        axis = np.arange(1, n) / n
        return eigensolve(-0.5 * laplacian(axis, 2), 3, tol=1e-12).eigenvalues

    rep = convergence_study(builder, [16, 24, 32, 48])
    assert rep.values.shape == (4, 3)
    assert np.allclose(rep.orders, 2.0, atol=0.05)
    exact = 0.5 * np.pi**2 * np.array([2, 5, 5])
    assert np.all(np.abs(rep.extrapolated - exact) < np.abs(rep.values[-1] - exact) / 20)
    assert rep.within_expected.all()


def test_convergence_study_needs_three_grids():
    with pytest.raises(ValueError):
        convergence_study(lambda n: np.ones(1), [16, 32])


def test_richardson_exact_for_quadratic_error():
    exact, c = 3.0, 5.0
    coarse, fine = exact + c * 0.1**2, exact + c * 0.05**2
    assert richardson(coarse, fine, 2.0) == pytest.approx(exact, rel=1e-14)


def test_eigenset_cache_round_trip(tmp_path):
    es = eigensolve(-0.5 * laplacian(np.linspace(-1, 1, 20), 2), 4)
    path = tmp_path / "eig.bin"
    digest = write_eigenset(path, es, {"label": "lap"})
    back = read_eigenset(path)
    assert len(digest) == 64
    assert np.array_equal(back.eigenvalues, es.eigenvalues)
    assert np.array_equal(back.eigenvectors, es.eigenvectors)
    assert np.array_equal(back.residuals, es.residuals)
    assert back.meta["label"] == "lap"


def test_eigenset_cache_detects_tampering(tmp_path):
    es = EigenSet(np.array([1.0]), np.ones((3, 1)), np.zeros(1), {})
    path = tmp_path / "eig.bin"
    write_eigenset(path, es)
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="hash"):
        read_eigenset(path)
    assert read_eigenset(path, verify=False).eigenvalues.shape == (1,)
    path.write_bytes(b"garbage!" + bytes(raw[8:]))
    with pytest.raises(ValueError, match="magic"):
        read_eigenset(path)
