"""Regularized Tyler estimator of scatter and its random equivalents.

The estimator is the unique Hermitian solution of::

    C = (1 - rho) (1/n) sum_i x_i x_i^* / ((1/N) x_i^* C^{-1} x_i) + rho I

for ``rho`` in ``(max(0, 1 - n/N), 1]``. It is computed by plain Picard
iteration from ``C = I``.
"""

from dataclasses import dataclass
from numbers import Integral

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator

from ._validation import check_positive, check_positive_int, check_rho, check_samples
from .exceptions import DegenerateSampleError, DomainError, NonConvergenceError
from .model import CovarianceModel, Dataset

__all__ = [
    "RegularizedTylerEstimator",
    "ScatterEstimate",
    "gamma_n",
    "rte_map",
    "rte_residual",
    "s_hat",
    "sigma_tilde",
    "solve_rte",
    "solve_rte_batch",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class ScatterEstimate:
    """Solved RTE with iteration diagnostics."""

    matrix: np.ndarray
    rho: float
    iterations: int
    residual: float
    converged: bool


def _samples_of(data):
    if isinstance(data, Dataset):
        return data.samples
    return check_samples(data)


def _outer_weighted(X, weights):
    # sum_i weights_i x_i x_i^*, batched over leading axes
    return np.swapaxes(X * weights[..., None], -1, -2) @ X.conj()


def _quad_forms(X, Cinv):
    # x_i^* Cinv x_i for every row, batched
    return np.sum((X.conj() @ Cinv) * X, axis=-1).real


def _hermitize(C):
    return 0.5 * (C + np.swapaxes(C, -1, -2).conj())


def rte_map(C, X, rho):
    """Right-hand side of the RTE fixed-point equation evaluated at ``C``.

    ``X`` has shape ``(..., n, N)``; ``C`` has shape ``(..., N, N)``.
    """
    n, N = X.shape[-2:]
    q = _quad_forms(X, np.linalg.inv(C)) / N
    out = (1.0 - rho) / n * _outer_weighted(X, 1.0 / q)
    out = out + rho * np.eye(N)
    return _hermitize(out)


def rte_residual(C, X, rho):
    """Relative Frobenius distance between ``C`` and ``rte_map(C, X, rho)``."""
    X = _samples_of(X)
    C = np.asarray(C, dtype=np.complex128)
    return float(np.linalg.norm(rte_map(C, X, rho) - C) / np.linalg.norm(C))


def _hermitian_features(X):
    # real coordinates of x x^*: diag, sqrt2 Re / Im of the strict upper triangle.
    # Under this map tr(A B) is the Euclidean inner product for Hermitian A, B.
    N = X.shape[-1]
    iu, ju = np.triu_indices(N, 1)
    off = X[..., iu] * X[..., ju].conj()
    return np.concatenate([np.abs(X) ** 2, np.sqrt(2) * off.real, np.sqrt(2) * off.imag], axis=-1)


def _matrix_features(H):
    N = H.shape[-1]
    iu, ju = np.triu_indices(N, 1)
    up = H[..., iu, ju]
    return np.concatenate(
        [np.diagonal(H, axis1=-2, axis2=-1).real, np.sqrt(2) * up.real, np.sqrt(2) * up.imag], axis=-1
    )


def _features_to_matrix(f, N):
    iu, ju = np.triu_indices(N, 1)
    m = iu.size
    H = np.zeros(f.shape[:-1] + (N, N), dtype=np.complex128)
    k = np.arange(N)
    H[..., k, k] = f[..., :N]
    up = (f[..., N:N + m] + 1j * f[..., N + m:]) / np.sqrt(2)
    H[..., iu, ju] = up
    H[..., ju, iu] = up.conj()
    return H


def solve_rte_batch(X, rho, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve independent RTE problems stacked along the leading axes of ``X``.

    Parameters
    ----------
    X : ndarray of shape (..., n, N)
        Samples, one problem per leading index.
    rho, tol, max_iter
        As in :func:`solve_rte`.

    Returns
    -------
    C : ndarray of shape (..., N, N)
    iterations : int
        Iterations until every problem met ``tol``.
    residual : ndarray of shape (...)
        Relative Frobenius change of the last step, per problem.

    Raises
    ------
    NonConvergenceError
        If some problem has not met ``tol`` after ``max_iter`` steps.

    Notes
    -----
    Each outer product ``x_i x_i^*`` is stored once as ``N^2`` real
    coordinates, so an iteration costs two real matrix-vector products per
    problem instead of many tiny complex ones.
    """
    X = np.asarray(X, dtype=np.complex128)
    n, N = X.shape[-2:]
    rho = check_rho(rho, n_samples=n, dim=N)
    tol = check_positive(tol, "tol")
    max_iter = check_positive_int(max_iter, "max_iter")
    if np.any(np.all(X == 0, axis=-1)):
        raise DegenerateSampleError("a sample vector is identically zero")
    batch = X.shape[:-2]
    P = _hermitian_features(X).reshape((-1, n, N * N))
    eye = _matrix_features(np.eye(N, dtype=np.complex128))
    c = np.broadcast_to(eye, (P.shape[0], N * N)).copy()
    residual = np.full(P.shape[0], np.inf)
    scale = (1.0 - rho) * N / n
    # problems leave the active set once converged, so every problem follows the
    # same iterate sequence it would have alone
    active = np.arange(P.shape[0])
    Pa = P
    for it in range(1, max_iter + 1):
        ca = c[active]
        Cinv = np.linalg.inv(_features_to_matrix(ca, N))
        q = (Pa @ _matrix_features(Cinv)[..., None])[..., 0]
        c_new = scale * (Pa.transpose(0, 2, 1) @ (1.0 / q)[..., None])[..., 0] + rho * eye
        # the feature map is an isometry for the Frobenius norm
        res = np.linalg.norm(c_new - ca, axis=-1) / np.linalg.norm(ca, axis=-1)
        c[active] = c_new
        residual[active] = res
        keep = res > tol
        if not keep.all():
            active, Pa = active[keep], Pa[keep]
        if active.size == 0:
            C = _features_to_matrix(c, N).reshape(batch + (N, N))
            return C, it, residual.reshape(batch)
    raise NonConvergenceError(
        f"RTE iteration did not reach tol={tol:g} in {max_iter} iterations (residual {np.max(residual):.3e})",
        last_iterate=_features_to_matrix(c, N).reshape(batch + (N, N)),
        residual=float(np.max(residual)),
        iterations=max_iter,
    )


def solve_rte(data, rho, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Regularized Tyler estimate for one dataset.

    Parameters
    ----------
    data : Dataset or array-like of shape (n_samples, n_features)
        Complex observations, one per row.
    rho : float
        Regularization, in ``(max(0, 1 - n/N), 1]``.
    tol : float, default=1e-10
        Stop when ``||C_{t+1} - C_t||_F / ||C_t||_F <= tol``.
    max_iter : int, default=500

    Returns
    -------
    ScatterEstimate
    """
    X = _samples_of(data)
    C, it, res = solve_rte_batch(X, rho, tol=tol, max_iter=max_iter)
    return ScatterEstimate(matrix=C, rho=float(rho), iterations=it, residual=float(res), converged=True)


def gamma_n(model, rho, *, tol=1e-12):
    """Scale ``gamma`` solving ``1 = (1/N) tr Sigma (rho gamma + (1 - rho) Sigma)^{-1}``.

    The right-hand side is strictly decreasing in ``gamma`` and crosses 1
    inside ``[lambda_min, lambda_max]``, so a bracketing root finder is used.
    """
    lam = model.eigvals if isinstance(model, CovarianceModel) else np.asarray(model, dtype=float)
    rho = check_rho(rho)

    def excess(g):
        return np.mean(lam / (rho * g + (1.0 - rho) * lam)) - 1.0

    lo, hi = float(lam.min()), float(lam.max())
    if excess(lo) * excess(hi) > 0:
        # only reachable without trace normalisation
        lo, hi = lo / 2.0, hi * 2.0
        while excess(lo) < 0:
            lo /= 2.0
        while excess(hi) > 0:
            hi *= 2.0
    if excess(lo) == 0:
        return lo
    if excess(hi) == 0:
        return hi
    g = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(excess(g)) > tol:
        g = optimize.bisect(excess, lo, hi, xtol=1e-16, maxiter=2000)
    return float(g)


def s_hat(data, model, rho):
    """Random equivalent of the RTE in the joint large ``(n, N)`` regime.

    Returns::

        (1/gamma) (1 - rho) / (1 - (1 - rho) c) (1/n) sum_i x_i x_i^* + rho I

    with ``c = N / n`` and ``x_i = Sigma^{1/2} w_i`` rebuilt from the whitened
    vectors carried by ``data``.
    """
    W = data.whitened
    n, N = W.shape
    rho = check_rho(rho, n_samples=n, dim=N)
    c = N / n
    if (1.0 - rho) * c >= 1.0:
        raise DomainError(f"(1 - rho) N/n = {(1 - rho) * c:.3f} must be < 1")
    if rho == 1.0:
        return np.eye(N, dtype=np.complex128)
    g = gamma_n(model, rho)
    Z = W @ model.sqrt.T
    scm = _outer_weighted(Z, np.full(n, 1.0 / n))
    return _hermitize((1.0 - rho) / ((1.0 - (1.0 - rho) * c) * g) * scm + rho * np.eye(N))


def sigma_tilde(data, limit):
    """Explicit random equivalent ``N (1 - rho) (1/n) sum x x^* / (x^* Sigma0^{-1} x) + rho I``.

    ``data`` may be a :class:`Dataset`, an ``(n, N)`` array or a stack
    ``(..., n, N)`` of sample sets.
    """
    X = data.samples if isinstance(data, Dataset) else np.asarray(data, dtype=np.complex128)
    n, N = X.shape[-2:]
    rho = limit.rho
    q = _quad_forms(X, limit.sigma0_inv)
    if np.any(q <= 0):
        raise DegenerateSampleError("x_i^* Sigma0^{-1} x_i vanished for some sample")
    out = N * (1.0 - rho) / n * _outer_weighted(X, 1.0 / q) + rho * np.eye(N)
    return _hermitize(out)


class RegularizedTylerEstimator(BaseEstimator):
    """Regularized Tyler M-estimator of scatter.

    Parameters
    ----------
    rho : float, default=0.5
        Shrinkage towards the identity; every eigenvalue of the estimate is
        at least ``rho``.
    tol : float, default=1e-10
        Relative Frobenius change at which the fixed-point iteration stops.
    max_iter : int, default=500
        Iteration budget.

    Attributes
    ----------
    covariance_ : ndarray of shape (n_features, n_features)
        Estimated scatter matrix.
    precision_ : ndarray of shape (n_features, n_features)
        Its inverse.
    n_iter_ : int
    residual_ : float
    n_features_in_ : int

    Examples
    --------
    >>> from rtescatter import RegularizedTylerEstimator, toeplitz_covariance, sample_dataset
    >>> data = sample_dataset(toeplitz_covariance(3, 0.5), n=200, seed=0)
    >>> est = RegularizedTylerEstimator(rho=0.3).fit(data.samples)
    >>> est.covariance_.shape
    (3, 3)
    """

    def __init__(self, rho=0.5, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.rho = rho
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_samples(X)
        if not isinstance(self.max_iter, Integral):
            raise DomainError("max_iter must be an integer")
        est = solve_rte(X, self.rho, tol=self.tol, max_iter=self.max_iter)
        self.covariance_ = est.matrix
        self.precision_ = np.linalg.inv(est.matrix)
        self.n_iter_ = est.iterations
        self.residual_ = est.residual
        self.n_features_in_ = X.shape[1]
        return self

    def get_precision(self):
        return self.precision_

    def mahalanobis(self, X):
        """Squared Mahalanobis distances ``x_i^* C^{-1} x_i`` under the fitted scatter."""
        X = check_samples(X)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return _quad_forms(X, self.precision_)
