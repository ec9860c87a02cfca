"""Population covariance models and complex Gaussian data generation.

Observations follow ``x_i = Sigma^{1/2} w_i`` with ``w_i`` i.i.d. circular
complex Gaussian ``CN(0, I_N)`` (``E|w_ik|^2 = 1``). The population covariance
is normalised so that ``trace(Sigma) / N = 1``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_hermitian, check_positive_int
from .exceptions import DomainError, NotPSDError

__all__ = [
    "CovarianceModel",
    "Dataset",
    "hermitian_sqrt",
    "make_model",
    "replication_rng",
    "sample_dataset",
    "toeplitz_covariance",
]


def hermitian_sqrt(M, *, inverse=False, psd_tol=1e-10):
    """Principal square root of a Hermitian positive semi-definite matrix.

    Parameters
    ----------
    M : array-like of shape (N, N)
        Hermitian PSD matrix.
    inverse : bool, default=False
        Return ``M^{-1/2}`` instead (requires ``M`` positive definite).
    psd_tol : float, default=1e-10
        Eigenvalues in ``[-psd_tol, 0)`` are clipped to zero; anything more
        negative raises :class:`NotPSDError`.

    Returns
    -------
    S : ndarray of shape (N, N)
        Hermitian matrix with ``S @ S == M`` (or ``S @ S == inv(M)``).
    """
    M = check_hermitian(M, name="M")
    w, V = np.linalg.eigh(M)
    if w.size and w.min() < -psd_tol:
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3e} < -{psd_tol:g}")
    w = np.clip(w, 0.0, None)
    if inverse:
        if w.size and w.min() <= 0.0:
            raise NotPSDError("inverse square root of a singular matrix")
        w = 1.0 / w
    S = (V * np.sqrt(w)) @ V.conj().T
    return 0.5 * (S + S.conj().T)


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Population covariance with its cached eigendecomposition.

    Attributes
    ----------
    sigma : ndarray of shape (N, N)
        Hermitian positive-definite covariance, ``trace / N == 1``.
    eigvecs : ndarray of shape (N, N)
        Unitary ``U`` with ``sigma = U diag(eigvals) U^*``.
    eigvals : ndarray of shape (N,)
        Eigenvalues sorted in decreasing order.
    sqrt, inv_sqrt : ndarray of shape (N, N)
        ``sigma^{1/2}`` and ``sigma^{-1/2}``.
    """

    sigma: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    sqrt: np.ndarray
    inv_sqrt: np.ndarray

    @property
    def dim(self):
        return self.sigma.shape[0]

    @property
    def lambda_min(self):
        return float(self.eigvals[-1])

    @property
    def lambda_max(self):
        return float(self.eigvals[0])


def make_model(sigma, *, normalize=False):
    """Build a :class:`CovarianceModel` from a Hermitian positive-definite matrix.

    ``normalize=True`` rescales ``sigma`` to unit normalised trace; otherwise a
    trace differing from ``N`` by more than ``1e-12 N`` is rejected.
    """
    sigma = check_hermitian(sigma, name="sigma")
    N = sigma.shape[0]
    tr = float(np.trace(sigma).real)
    if normalize:
        if tr <= 0:
            raise DomainError("sigma must have positive trace")
        sigma = sigma * (N / tr)
    elif abs(tr / N - 1.0) > 1e-12:
        raise DomainError(f"trace(sigma)/N = {tr / N!r}, expected 1 (pass normalize=True)")
    w, V = np.linalg.eigh(sigma)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    if w[-1] <= 0:
        raise DomainError(f"sigma must be positive definite (lambda_min = {w[-1]:.3e})")
    rw = np.sqrt(w)
    S = (V * rw) @ V.conj().T
    Si = (V / rw) @ V.conj().T
    arrays = [sigma, V, w, 0.5 * (S + S.conj().T), 0.5 * (Si + Si.conj().T)]
    for a in arrays:
        a.setflags(write=False)
    return CovarianceModel(*arrays)


def toeplitz_covariance(dim, b):
    """Toeplitz correlation model with entries ``b^(j-i)`` above the diagonal.

    Entry ``(i, j)`` is ``b**(j - i)`` for ``i <= j`` and ``conj(b**(i - j))``
    below the diagonal, so the matrix is Hermitian with unit diagonal.

    Parameters
    ----------
    dim : int
        Dimension ``N >= 1``.
    b : complex
        Correlation coefficient with ``|b| < 1``.
    """
    dim = check_positive_int(dim, "dim")
    b = complex(b)
    if not abs(b) < 1:
        raise DomainError(f"|b| must be < 1, got {abs(b)}")
    k = np.arange(dim)
    lag = k[None, :] - k[:, None]
    powers = b ** np.abs(lag)
    sigma = np.where(lag >= 0, powers, powers.conj())
    sigma[k, k] = 1.0
    return make_model(sigma)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Complex observations ``x_i`` (rows) with their whitened counterparts ``w_i``."""

    samples: np.ndarray
    whitened: np.ndarray
    seed: object = field(default=None)

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]


def replication_rng(seed, replication=None):
    """Independent generator for ``(seed, replication)``.

    Streams are derived through :class:`numpy.random.SeedSequence`, so
    replications can be generated in any order or in parallel.
    """
    entropy = [int(seed)] if replication is None else [int(seed), int(replication)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def standard_complex_normal(rng, size):
    """Draw ``CN(0, 1)`` entries: independent real/imaginary parts of variance 1/2."""
    z = rng.standard_normal(size=(*np.atleast_1d(size), 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def sample_dataset(model, n, seed, replication=None):
    """Draw ``n`` observations ``x_i = sigma^{1/2} w_i`` with ``w_i ~ CN(0, I_N)``.

    The result is a deterministic function of ``(model, n, seed, replication)``.
    """
    n = check_positive_int(n, "n")
    rng = seed if isinstance(seed, np.random.Generator) else replication_rng(seed, replication)
    W = standard_complex_normal(rng, (n, model.dim))
    X = W @ model.sqrt.T
    W.setflags(write=False)
    X.setflags(write=False)
    tag = None if isinstance(seed, np.random.Generator) else (seed if replication is None else (seed, replication))
    return Dataset(samples=X, whitened=W, seed=tag)
