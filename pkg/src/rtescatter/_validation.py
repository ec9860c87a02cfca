"""Input validation helpers (sklearn's ``check_array`` rejects complex data)."""

from numbers import Integral, Real

import numpy as np

from .exceptions import DomainError


def check_samples(X, *, min_samples=1):
    """Validate an ``(n_samples, n_features)`` array, promoting it to complex128."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise DomainError(f"expected a 2-D array of samples, got shape {X.shape}")
    if X.shape[0] < min_samples or X.shape[1] < 1:
        raise DomainError(f"need at least {min_samples} sample(s) of dimension >= 1, got shape {X.shape}")
    X = X.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(X)):
        raise DomainError("samples contain NaN or infinite entries")
    return X


def check_hermitian(M, *, atol=1e-10, name="matrix"):
    """Return ``M`` as a square complex array, symmetrised, after checking Hermitian-ness."""
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"{name} must be square, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.conj().T), initial=0.0) > atol * scale:
        raise DomainError(f"{name} is not Hermitian")
    return 0.5 * (M + M.conj().T)


def check_rho(rho, *, n_samples=None, dim=None, allow_zero=False):
    """Check the regularization parameter.

    Without sample information the admissible range is ``(0, 1]``
    (``[0, 1]`` when ``allow_zero``). With ``n_samples`` and ``dim`` it is
    ``(max(0, 1 - n/N), 1]``.
    """
    if isinstance(rho, bool) or not isinstance(rho, Real):
        raise DomainError(f"rho must be a real number, got {rho!r}")
    rho = float(rho)
    lower = 0.0
    if n_samples is not None and dim is not None:
        lower = max(0.0, 1.0 - n_samples / dim)
    ok = (lower <= rho <= 1.0) if (allow_zero and lower == 0.0) else (lower < rho <= 1.0)
    if not ok:
        raise DomainError(f"rho={rho} outside admissible range ({lower}, 1]")
    return rho


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise DomainError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive(value, name):
    if isinstance(value, bool) or not isinstance(value, Real) or not value > 0:
        raise DomainError(f"{name} must be a positive real, got {value!r}")
    return float(value)
