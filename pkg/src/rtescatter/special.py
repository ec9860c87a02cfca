"""Ratio moments of complex Gaussian quadratic forms.

For ``w ~ CN(0, I_N)`` and a positive diagonal ``D = diag(d)`` this module
evaluates

* ``alpha_i(D) = E[|w_i|^2 / (w^* D w)]``
* ``beta_ij(D) = E[|w_i|^2 |w_j|^2 / (w^* D w)^2]``

through one-dimensional integrals on ``[0, 1]``. Writing
``g_k(v) = d_k (1 - v) + v / 2`` (which interpolates between ``d_k`` and
``1/2``), the integrands are::

    alpha_i = 2^-N     int_0^1 v^(N-1)         / (g_i        prod_k g_k) dv
    beta_ii = 2^-(N-1) int_0^1 (1-v) v^(N-1)   / (g_i^2      prod_k g_k) dv
    beta_ij = 2^-N     int_0^1 (1-v) v^(N-1)   / (g_i g_j    prod_k g_k) dv

All coefficients for one ``D`` are integrated together with an adaptive
vector-valued Gauss-Kronrod scheme. Both moments are homogeneous
(``alpha(cD) = alpha(D)/c``, ``beta(cD) = beta(D)/c^2``), which is used to
rescale ``D`` to ``max(d) = 1/2`` before integrating; the integrand is then
monotone-factor bounded and free of the endpoint peak that appears when
``max(d) >> min(d)``.

The Lauricella ``F_D`` form of the same quantities is available through
:func:`lauricella_fd`, :func:`alpha_lauricella` and :func:`beta_lauricella`.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .exceptions import AccuracyError, DomainError

__all__ = [
    "DEFAULT_QUAD_TOL",
    "RatioMoments",
    "alpha",
    "alpha_lauricella",
    "beta",
    "beta_lauricella",
    "lauricella_fd",
    "ratio_moments",
]

DEFAULT_QUAD_TOL = 1e-10
MAX_SUBINTERVALS = 10_000
MAX_CONDITIONING = 1e8
# relative floor: an absolute tolerance below double precision of the value is not attainable
QUAD_RTOL = 1e-12


def _check_weights(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise DomainError(f"d must be a non-empty 1-D vector, got shape {d.shape}")
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise DomainError("all diagonal weights d_i must be finite and > 0")
    if d.max() / d.min() > MAX_CONDITIONING:
        raise AccuracyError(
            f"max(d)/min(d) = {d.max() / d.min():.3e} exceeds {MAX_CONDITIONING:.0e}; "
            "quadrature accuracy cannot be guaranteed"
        )
    return d


def _integrate(f, tol, what):
    res, err, info = integrate.quad_vec(
        f, 0.0, 1.0, epsabs=tol, epsrel=QUAD_RTOL, norm="max", limit=MAX_SUBINTERVALS, full_output=True
    )
    if not info.success or err > max(tol, QUAD_RTOL * np.max(np.abs(res))):
        raise AccuracyError(f"{what}: quadrature did not reach tolerance {tol:g}", estimate=res, error_bound=err)
    return np.atleast_1d(res), float(err)


def _alpha_scaled(e, tol):
    N = e.size
    kern = 2.0 ** -N

    def f(v):
        g = e * (1.0 - v) + 0.5 * v
        return kern * v ** (N - 1) / (g * np.prod(g))

    return _integrate(f, tol, "alpha")


def _beta_scaled(e, tol):
    N = e.size
    iu, ju = np.triu_indices(N)
    kern = np.where(iu == ju, 2.0 ** -(N - 1), 2.0 ** -N)

    def f(v):
        g = e * (1.0 - v) + 0.5 * v
        return kern * (1.0 - v) * v ** (N - 1) / (g[iu] * g[ju] * np.prod(g))

    vals, err = _integrate(f, tol, "beta")
    out = np.empty((N, N))
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out, err


def alpha(d, *, tol=DEFAULT_QUAD_TOL):
    """First ratio moments ``alpha_i(D) = E[|w_i|^2 / (w^* D w)]``.

    Parameters
    ----------
    d : array-like of shape (N,)
        Strictly positive diagonal of ``D``.
    tol : float, default=1e-10
        Absolute quadrature tolerance on the returned values.

    Returns
    -------
    alpha : ndarray of shape (N,)
    """
    return ratio_moments(d, tol=tol, with_beta=False).alpha


def beta(d, *, tol=DEFAULT_QUAD_TOL):
    """Second ratio moments ``beta_ij(D) = E[|w_i|^2 |w_j|^2 / (w^* D w)^2]``.

    Returns a symmetric ``(N, N)`` array.
    """
    return ratio_moments(d, tol=tol).beta


@dataclass(frozen=True, eq=False)
class RatioMoments:
    """``alpha`` (N,) and ``beta`` (N, N) for one diagonal ``d``, with the achieved tolerance."""

    d: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    quad_tolerance: float


def ratio_moments(d, *, tol=DEFAULT_QUAD_TOL, with_beta=True):
    """Compute ``alpha`` and (optionally) ``beta`` for the same weights.

    ``tol`` bounds the absolute error of the returned (unscaled) values.
    """
    d = _check_weights(d)
    scale = 2.0 * d.max()
    e = d / scale
    # alpha scales as 1/scale and beta as 1/scale**2
    a_scaled, a_err = _alpha_scaled(e, tol * scale)
    a = a_scaled / scale
    err = a_err / scale
    b = None
    if with_beta:
        b_scaled, b_err = _beta_scaled(e, tol * scale**2)
        b = b_scaled / scale**2
        err = max(err, b_err / scale**2)
    return RatioMoments(d=d, alpha=a, beta=b, quad_tolerance=err)


def lauricella_fd(a, b, c, x, *, tol=DEFAULT_QUAD_TOL):
    """Lauricella hypergeometric function ``F_D^{(n)}(a; b_1..b_n; c; x_1..x_n)``.

    Evaluated from the Euler-type integral::

        Gamma(c) / (Gamma(a) Gamma(c - a)) int_0^1 t^(a-1) (1-t)^(c-a-1) prod_i (1 - x_i t)^(-b_i) dt

    valid for ``c > a > 0`` and real ``x_i < 1``.
    """
    b = np.atleast_1d(np.asarray(b, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if b.shape != x.shape:
        raise DomainError(f"b and x must have the same length, got {b.shape} and {x.shape}")
    if not c > a > 0:
        raise DomainError(f"integral representation requires c > a > 0, got a={a}, c={c}")
    if np.any(x >= 1):
        raise DomainError("all x_i must be < 1")
    norm = np.exp(special.gammaln(c) - special.gammaln(a) - special.gammaln(c - a))

    def f(t):
        return t ** (a - 1) * (1 - t) ** (c - a - 1) * np.prod((1 - x * t) ** (-b))

    val, err, *rest = integrate.quad(f, 0.0, 1.0, epsabs=tol / norm, epsrel=1e-13, limit=MAX_SUBINTERVALS, full_output=1)
    if err * norm > tol and len(rest) > 1:
        raise AccuracyError(f"lauricella_fd: {rest[1]}", estimate=norm * val, error_bound=norm * err)
    return float(norm * val)


def _lauricella_args(d):
    d = _check_weights(d)
    return d, (d - 0.5) / d


def alpha_lauricella(d, *, tol=DEFAULT_QUAD_TOL):
    """``alpha`` via the closed form in terms of ``F_D^{(N)}(N; 1..2..1; N+1; x)``."""
    d, x = _lauricella_args(d)
    N = d.size
    out = np.empty(N)
    for i in range(N):
        bb = np.ones(N)
        bb[i] = 2.0
        pre = 1.0 / (2.0**N * N * d[i] * np.prod(d))
        out[i] = pre * lauricella_fd(N, bb, N + 1, x, tol=tol / pre)
    return out


def beta_lauricella(d, *, tol=DEFAULT_QUAD_TOL):
    """``beta`` via its ``F_D^{(N)}(N; ...; N+2; x)`` closed forms."""
    d, x = _lauricella_args(d)
    N = d.size
    out = np.empty((N, N))
    for i in range(N):
        for j in range(i, N):
            bb = np.ones(N)
            if i == j:
                bb[i] = 3.0
                pre = 1.0 / (2.0 ** (N - 1) * N * (N + 1) * d[i] ** 2 * np.prod(d))
            else:
                bb[i] = bb[j] = 2.0
                pre = 1.0 / (2.0**N * N * (N + 1) * d[i] * d[j] * np.prod(d))
            out[i, j] = out[j, i] = pre * lauricella_fd(N, bb, N + 2, x, tol=tol / pre)
    return out
