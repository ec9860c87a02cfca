"""Deterministic large-n limit of the regularized Tyler estimator.

For fixed ``N`` and ``n -> infinity`` the estimator converges to ``Sigma0``,
which shares its eigenvectors with the population covariance and has
eigenvalues ``s_i = lambda_i / d_i``, where ``d`` is the positive solution of::

    1 / d_i = rho / lambda_i + N (1 - rho) alpha_i(diag(d))

The map ``d -> 1 / (rho/lambda + N (1 - rho) alpha(diag(d)))`` is a standard
interference function (positive, monotone, scalable for ``rho > 0``), so the
plain iteration converges to the unique fixed point from any positive start.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_positive_int, check_rho
from .exceptions import DomainError, NonConvergenceError
from .special import alpha

__all__ = [
    "AsymptoticLimit",
    "asymptotic_bias",
    "bias_functional",
    "d_residual",
    "sigma_zero",
    "solve_d",
]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 1000


def _check_lambda(lam):
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise DomainError("eigenvalues must be a non-empty vector of positive reals")
    return lam


def d_residual(d, lam, rho, *, quad_tol=1e-12):
    """``max_i |1/d_i - rho/lambda_i - N (1 - rho) alpha_i(diag(d))|``."""
    d = np.asarray(d, dtype=float)
    lam = np.asarray(lam, dtype=float)
    a = alpha(d, tol=quad_tol)
    return float(np.max(np.abs(1.0 / d - rho / lam - d.size * (1.0 - rho) * a)))


def solve_d(lam, rho, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, return_info=False):
    """Solve the per-eigenvalue fixed-point system for ``d``.

    Parameters
    ----------
    lam : array-like of shape (N,)
        Positive eigenvalues of the population covariance.
    rho : float
        Regularization in ``(0, 1]``.
    tol : float, default=1e-9
        Stop when ``max_i |d_i^{t+1} - d_i^t| / d_i^t <= tol``.
    max_iter : int, default=1000
    return_info : bool, default=False
        Also return ``(iterations, last relative change)``.

    Returns
    -------
    d : ndarray of shape (N,)
    """
    lam = _check_lambda(lam)
    rho = check_rho(rho)
    tol = check_positive(tol, "tol")
    max_iter = check_positive_int(max_iter, "max_iter")
    N = lam.size
    quad_tol = tol / 100.0
    cap = 10.0 / lam.min()
    d = lam.copy()
    change = np.inf
    for it in range(1, max_iter + 1):
        if rho == 1.0:
            d_new = lam.copy()
        else:
            # quadrature error relative to the scale of alpha ~ 1/(N d)
            a = alpha(d, tol=quad_tol / (N * d.max()))
            d_new = 1.0 / (rho / lam + N * (1.0 - rho) * a)
        if np.any(d_new > cap):
            raise NonConvergenceError(
                f"d iterate exceeded divergence cap 10/lambda_min = {cap:.3g}", last_iterate=d_new, iterations=it
            )
        change = float(np.max(np.abs(d_new - d) / d))
        d = d_new
        if change <= tol:
            return (d, it, change) if return_info else d
    raise NonConvergenceError(
        f"d iteration did not reach tol={tol:g} in {max_iter} iterations", last_iterate=d, residual=change,
        iterations=max_iter,
    )


@dataclass(frozen=True, eq=False)
class AsymptoticLimit:
    """Large-n limit ``Sigma0 = U diag(s) U^*`` for one model and ``rho``."""

    rho: float
    eigvecs: np.ndarray
    lam: np.ndarray
    d: np.ndarray
    s: np.ndarray
    iterations: int
    residual: float

    @property
    def dim(self):
        return self.lam.size

    @property
    def sigma0(self):
        U = self.eigvecs
        return (U * self.s) @ U.conj().T

    @property
    def sigma0_inv(self):
        U = self.eigvecs
        return (U / self.s) @ U.conj().T

    def sigma0_power(self, p):
        """``Sigma0 ** p`` through the shared eigenbasis."""
        U = self.eigvecs
        return (U * self.s**p) @ U.conj().T


def sigma_zero(model, rho, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Compute the large-n limit ``Sigma0(rho)`` of the RTE for ``model``."""
    d, it, change = solve_d(model.eigvals, rho, tol=tol, max_iter=max_iter, return_info=True)
    return AsymptoticLimit(
        rho=float(rho), eigvecs=model.eigvecs, lam=model.eigvals, d=d, s=model.eigvals / d, iterations=it,
        residual=change,
    )


def bias_functional(sigma_inv, C, *, per_dim=True, average="matrix"):
    """Squared Frobenius distance of the trace-normalised ``Sigma^{-1} C`` to ``I``.

    Parameters
    ----------
    sigma_inv : ndarray of shape (N, N)
    C : ndarray of shape (N, N) or (R, N, N)
        One estimate or a stack of replications.
    per_dim : bool, default=True
        Divide by ``N``.
    average : {"matrix", "loss"}, default="matrix"
        For a stack, ``"matrix"`` averages the normalised matrices and then
        measures the distance (a pure bias). ``"loss"`` averages the
        per-replication distances instead, which adds the replication
        dispersion ``E||A - E A||^2`` on top of the bias.
    """
    if average not in ("matrix", "loss"):
        raise DomainError(f"average must be 'matrix' or 'loss', got {average!r}")
    C = np.asarray(C)
    N = C.shape[-1]
    A = sigma_inv @ C
    tr = np.trace(A, axis1=-2, axis2=-1).real
    A = N * A / tr[..., None, None]
    if A.ndim == 3 and average == "matrix":
        A = A.mean(axis=0)
    val = float(np.mean(np.linalg.norm(A - np.eye(N), axis=(-2, -1)) ** 2))
    return val / N if per_dim else val


def asymptotic_bias(model, rho, *, per_dim=True, limit=None, tol=DEFAULT_TOL):
    """Large-n limit of the scale-invariant bias of the RTE.

    Parameters
    ----------
    model : CovarianceModel
    rho : float
    per_dim : bool, default=True
        Report ``(1/N) ||.||_F^2``. With ``False`` the plain squared
        Frobenius norm is returned (``N`` times larger).
    limit : AsymptoticLimit, optional
        Precomputed ``Sigma0`` for the same model and ``rho``.

    Notes
    -----
    ``Sigma`` and ``Sigma0`` share eigenvectors, so with ``r_i = s_i/lambda_i``
    the unnormalised value is ``sum_i (N r_i / sum_j r_j - 1)^2``.
    """
    if limit is None:
        limit = sigma_zero(model, rho, tol=tol)
    r = limit.s / limit.lam
    N = r.size
    val = float(np.sum((N * r / r.sum() - 1.0) ** 2))
    return val / N if per_dim else val
