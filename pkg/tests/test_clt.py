import math

import numpy as np
import pytest

from oracles import complex_normal
from rtescatter import (
    DomainError,
    IllConditionedError,
    clt_full_moments,
    clt_moments,
    clt_tilde_moments,
    commutation_matrix,
    covariance_bg,
    f_tilde,
    make_model,
    quadratic_form_variance,
    sigma_zero,
    toeplitz_covariance,
    uncentered_bg,
    unvec,
    vec,
)
from rtescatter.special import beta


def _psd(M, floor=-1e-8):
    return np.allclose(M, M.conj().T, atol=1e-8) and np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min() >= floor


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_vec_kronecker_identity():
    rng = np.random.default_rng(0)
    A, X, B = (complex_normal(rng, (3, 3)) for _ in range(3))
    assert np.abs(vec(A @ X @ B) - np.kron(B.T, A) @ vec(X)).max() <= 1e-12


def test_vec_is_column_stacking():
    A = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(vec(A), [1, 3, 2, 4])
    np.testing.assert_array_equal(unvec(vec(A), 2), A)
    stack = np.stack([A, 2 * A])
    np.testing.assert_array_equal(vec(stack)[1], [2, 6, 4, 8])


def test_commutation_matrix():
    A = complex_normal(np.random.default_rng(1), (3, 3))
    K = commutation_matrix(3)
    np.testing.assert_array_equal(K @ vec(A), vec(A.T))
    np.testing.assert_array_equal(K @ K, np.eye(9))


def test_bg_identity_weights():
    B, G, Xi = covariance_bg([1.0, 1.0])
    np.testing.assert_allclose(vec(Xi), [0.5, 0, 0, 0.5])
    assert B[0, 0] == pytest.approx(1 / 12, abs=1e-12)
    assert B[0, 3] == pytest.approx(1 / 6 - 1 / 4, abs=1e-12)
    assert B[1, 1] == pytest.approx(1 / 6, abs=1e-12)


def test_uncentered_block_structure():
    b = beta([0.3, 1.0, 2.5])
    Bt, Gt = uncentered_bg(b)
    N = 3
    # E[vec(T) vec(T)^*] entry ((k,l),(i,j)) = E[T_kl conj(T_ij)], T = w w^*/(w^* D w)
    idx = lambda r, c: r + N * c
    for k in range(N):
        for l in range(N):
            for i in range(N):
                for j in range(N):
                    exp_b = (b[k, i] if (k == l and i == j) else 0) + (b[k, l] if (k == i and l == j and k != l) else 0)
                    assert Bt[idx(k, l), idx(i, j)] == pytest.approx(exp_b)
                    exp_g = (b[k, i] if (k == l and i == j) else 0) + (b[k, l] if (k == j and l == i and k != l) else 0)
                    assert Gt[idx(k, l), idx(i, j)] == pytest.approx(exp_g)
    # the all-equal index term E|w_i|^4/(.)^2 appears once, not twice
    assert Gt[idx(1, 1), idx(1, 1)] == pytest.approx(b[1, 1])


def _bg_mc(d, draws, seed):
    rng = np.random.default_rng(seed)
    N = d.size
    w = complex_normal(rng, (draws, N))
    T = w[:, :, None] * w.conj()[:, None, :] / ((np.abs(w) ** 2) @ d)[:, None, None]
    v = vec(T)
    v = v - v.mean(0)
    outer_b = v[:, :, None] * v.conj()[:, None, :]
    outer_g = v[:, :, None] * v[:, None, :]
    return outer_b.mean(0), outer_g.mean(0), outer_b.std(0) / math.sqrt(draws), outer_g.std(0) / math.sqrt(draws)


def _within(est, ref, se, k=4.0):
    # real and imaginary parts separately
    re = np.abs(est.real - ref.real) <= k * se + 1e-12
    im = np.abs(est.imag - ref.imag) <= k * se + 1e-12
    return bool(np.all(re) and np.all(im))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_bg_match_monte_carlo(seed):
    d = np.exp(np.random.default_rng(100 + seed).uniform(np.log(0.1), np.log(10), 2))
    B, G, _ = covariance_bg(d)
    Bm, Gm, Bse, Gse = _bg_mc(d, 1_000_000, seed)
    assert _within(Bm, B, Bse)
    assert _within(Gm, G, Gse)


def test_b_hermitian_psd():
    rng = np.random.default_rng(3)
    for N in (2, 3, 4):
        B, G, _ = covariance_bg(np.exp(rng.uniform(-2, 2, N)))
        assert _psd(B)
        np.testing.assert_allclose(G, G.T, atol=1e-14)


def test_identity_model_tilde():
    m = make_model(np.eye(3))
    lim = sigma_zero(m, 0.4)
    M1t, M2t = clt_tilde_moments(m, lim)
    B, G, _ = covariance_bg(lim.d)
    np.testing.assert_allclose(M1t, 9 * 0.36 * B, atol=1e-9)
    np.testing.assert_allclose(M2t, 9 * 0.36 * G, atol=1e-9)


def test_identity_model_f_tilde_fixes_identity():
    for rho in (0.1, 0.5, 0.9):
        m = make_model(np.eye(3))
        F = f_tilde(m, sigma_zero(m, rho))
        np.testing.assert_allclose(F @ vec(np.eye(3)), (1 - rho) * vec(np.eye(3)), atol=1e-9)


def test_identity_model_full_moments_reduce():
    m = make_model(np.eye(2))
    lim = sigma_zero(m, 0.3)
    mom = clt_moments(m, lim)
    R = np.linalg.inv(np.eye(4) - mom.F_tilde)
    np.testing.assert_allclose(mom.M1, R @ mom.M1_tilde @ R.conj().T, atol=1e-10)
    np.testing.assert_allclose(mom.M2, R @ mom.M2_tilde @ R.T, atol=1e-10)


def test_rho_one_is_degenerate():
    m = toeplitz_covariance(3, 0.5j)
    lim = sigma_zero(m, 1.0)
    mom = clt_moments(m, lim)
    for name in ("M1_tilde", "M2_tilde", "F_tilde", "M1", "M2"):
        assert np.abs(getattr(mom, name)).max() <= 1e-14
    p = np.ones(3) / math.sqrt(3)
    assert quadratic_form_variance(p, m, lim, mom) == 0.0


@pytest.mark.parametrize("seed", range(8))
def test_moment_structure(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 5))
    b = 0.9 * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
    rho = rng.uniform(0.05, 1.0)
    m = toeplitz_covariance(N, b)
    mom = clt_moments(m, sigma_zero(m, rho))
    assert np.linalg.norm(mom.F_tilde, 2) < 1
    assert _psd(mom.B) and _psd(mom.M1_tilde) and _psd(mom.M1)
    np.testing.assert_allclose(mom.M2, mom.M2.T, atol=1e-8)
    # C - Sigma0 is Hermitian, so the pseudo-covariance is the covariance with transposed columns
    np.testing.assert_allclose(mom.M2, mom.M1 @ commutation_matrix(N), atol=1e-10)


def test_f_tilde_norm_bound_over_rho():
    m = toeplitz_covariance(4, 0.9)
    for rho in np.linspace(0.05, 1.0, 12):
        lim = sigma_zero(m, rho)
        assert np.linalg.norm(f_tilde(m, lim), 2) <= np.linalg.norm(np.eye(4) - rho * lim.sigma0_inv, 2) + 1e-9


def test_resolvent_guard():
    m = toeplitz_covariance(2, 0.5)
    lim = sigma_zero(m, 0.5)
    with pytest.raises(IllConditionedError):
        clt_full_moments(m, lim, F=np.eye(4))


def test_quadratic_form_variance_validation(quad_form_setup):
    s = quad_form_setup
    with pytest.raises(DomainError):
        quadratic_form_variance(np.ones(4), s.model, s.limit, s.moments)
    with pytest.raises(DomainError):
        quadratic_form_variance(np.ones(3) / math.sqrt(3), s.model, s.limit, s.moments)
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = complex_normal(rng, 4)
        assert quadratic_form_variance(p / np.linalg.norm(p), s.model, s.limit, s.moments) >= 0


@pytest.mark.slow
def test_quadratic_form_variance_monte_carlo(quad_form_stats):
    # the statistics are studentised by the predicted variance, so their variance should be ~1
    assert abs(np.var(quad_form_stats, ddof=1) - 1) <= 0.10


@pytest.mark.slow
def test_tilde_covariance_monte_carlo(fluctuation_setup, fluctuation_sample):
    s = fluctuation_setup
    _, St = fluctuation_sample
    delta = math.sqrt(2000) * vec(St - s.limit.sigma0)
    emp = delta.T @ delta.conj() / delta.shape[0]
    assert _rel(emp, s.moments.M1_tilde) <= 0.10
    emp2 = delta.T @ delta / delta.shape[0]
    assert _rel(emp2, s.moments.M2_tilde) <= 0.10
