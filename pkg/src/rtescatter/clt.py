"""Second-order (central limit) moments of the regularized Tyler estimator.

``vec`` stacks columns, so ``vec(A X B) = (B^T kron A) vec(X)``; every
Kronecker factor below follows from that identity. Matrices of size
``N^2 x N^2`` are stored dense and complex.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_rho
from .exceptions import DomainError, IllConditionedError
from .special import DEFAULT_QUAD_TOL, ratio_moments

__all__ = [
    "CltMoments",
    "clt_full_moments",
    "clt_moments",
    "clt_tilde_moments",
    "commutation_matrix",
    "covariance_bg",
    "f_tilde",
    "quadratic_form_variance",
    "uncentered_bg",
    "unvec",
    "vec",
]

MAX_CONDITION = 1e10


def vec(A):
    """Column-stacking vectorisation of the last two axes."""
    A = np.asarray(A)
    return np.swapaxes(A, -1, -2).reshape(A.shape[:-2] + (-1,))


def unvec(v, N):
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (N, N)), -1, -2)


def commutation_matrix(N):
    """Permutation ``K`` with ``K vec(A) = vec(A^T)``."""
    idx = np.arange(N * N).reshape(N, N)  # idx[col, row] = row + N*col
    K = np.zeros((N * N, N * N))
    K[idx.T.ravel(), idx.ravel()] = 1.0
    return K


def _diag_positions(N):
    # vec index of entry (i, i)
    return np.arange(N) * (N + 1)


def uncentered_bg(beta):
    """Uncentered second moments of ``vec(w w^*) / (w^* D w)``.

    Returns ``(B_tilde, G_tilde)`` with ``B_tilde = E[v v^*]`` and
    ``G_tilde = E[v v^T]`` built from the ``beta`` matrix alone.
    """
    beta = np.asarray(beta, dtype=float)
    N = beta.shape[0]
    p = _diag_positions(N)
    off = beta - np.diag(np.diag(beta))

    # E[w_k conj(w_i) conj(w_l) w_j] survives for (k=l, i=j) or (k=i, l=j)
    Bt = np.diag(vec(beta)).astype(np.complex128)
    Bt[np.ix_(p, p)] += off

    # E[w_k conj(w_i) w_l conj(w_j)] survives for (k=i, l=j) or (k=j, l=i);
    # when i=j=k=l both describe the same term E|w_i|^4, counted once
    Gt = np.zeros((N * N, N * N), dtype=np.complex128)
    Gt[np.ix_(p, p)] = beta
    i, j = np.nonzero(~np.eye(N, dtype=bool))
    Gt[j + N * i, i + N * j] = beta[i, j]
    return Bt, Gt


def covariance_bg(d, *, tol=DEFAULT_QUAD_TOL, moments=None):
    """Covariance ``B(D)`` and pseudo-covariance ``G(D)`` of ``vec(w w^*) / (w^* D w)``.

    Parameters
    ----------
    d : array-like of shape (N,)
        Positive diagonal of ``D``.
    moments : RatioMoments, optional
        Precomputed ratio moments for ``d``.

    Returns
    -------
    B, G : ndarray of shape (N^2, N^2)
    Xi : ndarray of shape (N, N)
        ``diag(alpha(D))``, the mean of ``w w^* / (w^* D w)``.
    """
    rm = moments if moments is not None else ratio_moments(d, tol=tol)
    Bt, Gt = uncentered_bg(rm.beta)
    Xi = np.diag(rm.alpha)
    m = vec(Xi)
    outer = np.outer(m, m)
    return Bt - outer, Gt - outer, Xi


def _kron_factor(limit, diag):
    # A = U diag^{1/2}; vec(A X A^*) = (conj(A) kron A) vec(X)
    A = limit.eigvecs * np.sqrt(diag)
    return np.kron(A.conj(), A)


def clt_tilde_moments(model, limit, *, bg=None):
    """Covariance and pseudo-covariance of ``sqrt(n) vec(Sigma_tilde - Sigma0)``.

    Returns ``(M1_tilde, M2_tilde)``::

        M1_tilde = N^2 (1-rho)^2 K B(D) K^*,   M2_tilde = N^2 (1-rho)^2 K G(D) K^T

    with ``K = conj(U) Lambda^{1/2} kron U Lambda^{1/2}``.
    """
    N = model.dim
    rho = limit.rho
    B, G, _ = bg if bg is not None else covariance_bg(limit.d)
    K = _kron_factor(limit, model.eigvals)
    c = (N * (1.0 - rho)) ** 2
    return c * K @ B @ K.conj().T, c * K @ G @ K.T


def f_tilde(model, limit, *, Bt=None):
    """Linear-response matrix ``N (1-rho) K_D B_tilde(D) K_D^*`` with ``K_D = conj(U) D^{1/2} kron U D^{1/2}``."""
    N = model.dim
    if Bt is None:
        Bt, _ = uncentered_bg(ratio_moments(limit.d).beta)
    K = _kron_factor(limit, limit.d)
    return N * (1.0 - limit.rho) * K @ Bt @ K.conj().T


def _transfer(limit, F):
    """``T = (S^{1/2T} kron S^{1/2}) (I - F)^{-1} (S^{-1/2T} kron S^{-1/2})`` with ``S = Sigma0``."""
    N = limit.dim
    fnorm = np.linalg.norm(F, 2)
    if fnorm >= 1.0 - 1e-6:
        raise IllConditionedError(f"||F_tilde|| = {fnorm:.6f} is not below 1")
    I_F = np.eye(N * N) - F
    cond = np.linalg.cond(I_F)
    if cond > MAX_CONDITION:
        raise IllConditionedError(f"I - F_tilde has condition number {cond:.3e}")
    S_half = limit.sigma0_power(0.5)
    S_mhalf = limit.sigma0_power(-0.5)
    P = np.kron(S_half.T, S_half)
    Q = np.kron(S_mhalf.T, S_mhalf)
    return P @ np.linalg.solve(I_F, Q)


def clt_full_moments(model, limit, *, tilde=None, F=None):
    """Covariance ``M1`` and pseudo-covariance ``M2`` of ``sqrt(n) vec(C_hat - Sigma0)``.

    With ``T`` the transfer matrix ``(S^{1/2T} kron S^{1/2}) (I - F)^{-1} (S^{-1/2T} kron S^{-1/2})``,
    ``M1 = T M1_tilde T^*`` and ``M2 = T M2_tilde T^T``.

    Raises
    ------
    IllConditionedError
        If ``||F_tilde|| >= 1 - 1e-6`` or ``I - F_tilde`` is numerically singular.
    """
    M1t, M2t = tilde if tilde is not None else clt_tilde_moments(model, limit)
    if F is None:
        F = f_tilde(model, limit)
    T = _transfer(limit, F)
    M1 = T @ M1t @ T.conj().T
    M2 = T @ M2t @ T.T
    return 0.5 * (M1 + M1.conj().T), 0.5 * (M2 + M2.T)


@dataclass(frozen=True, eq=False)
class CltMoments:
    """All second-order moment matrices for one ``(model, rho)``."""

    dim: int
    rho: float
    B: np.ndarray
    G: np.ndarray
    B_tilde: np.ndarray
    G_tilde: np.ndarray
    Xi: np.ndarray
    M1_tilde: np.ndarray
    M2_tilde: np.ndarray
    F_tilde: np.ndarray
    M1: np.ndarray
    M2: np.ndarray


def clt_moments(model, limit, *, tol=DEFAULT_QUAD_TOL):
    """Assemble :class:`CltMoments` with a single ratio-moment evaluation."""
    check_rho(limit.rho)
    rm = ratio_moments(limit.d, tol=tol)
    Bt, Gt = uncentered_bg(rm.beta)
    bg = covariance_bg(limit.d, moments=rm)
    M1t, M2t = clt_tilde_moments(model, limit, bg=bg)
    F = f_tilde(model, limit, Bt=Bt)
    if limit.rho == 1.0:
        zero = np.zeros_like(F)
        M1, M2 = zero, zero.copy()
    else:
        M1, M2 = clt_full_moments(model, limit, tilde=(M1t, M2t), F=F)
    return CltMoments(
        dim=model.dim, rho=limit.rho, B=bg[0], G=bg[1], B_tilde=Bt, G_tilde=Gt, Xi=bg[2], M1_tilde=M1t,
        M2_tilde=M2t, F_tilde=F, M1=M1, M2=M2,
    )


def quadratic_form_variance(p, model, limit, moments=None):
    """Asymptotic variance of ``sqrt(n) (1/N) (p^* C_hat^{-1} p - p^* Sigma0^{-1} p)``.

    Delta-method variance ``(1/N^2) g^* M1 g`` with
    ``g = (Sigma0^{-1})^T conj(p) kron Sigma0^{-1} p``.
    """
    p = np.asarray(p, dtype=np.complex128).ravel()
    N = model.dim
    if p.size != N:
        raise DomainError(f"p must have {N} entries, got {p.size}")
    if abs(np.linalg.norm(p) - 1.0) > 1e-10:
        raise DomainError(f"p must have unit norm, got {np.linalg.norm(p):.6g}")
    if moments is None:
        moments = clt_moments(model, limit)
    a = limit.sigma0_inv @ p
    g = np.kron(a.conj(), a)
    val = (g.conj() @ moments.M1 @ g).real / N**2
    return max(float(val), 0.0)
