"""Independent Monte Carlo oracles shared by the test modules."""

import numpy as np


def ratio_moments_mc(d, draws, seed, chunk=1_000_000):
    """MC means and standard errors of ``u_i / (d.u)`` and ``u_i u_j / (d.u)^2``.

    ``u_k = |w_k|^2`` are i.i.d. unit-mean exponentials for ``w ~ CN(0, I)``.
    """
    d = np.asarray(d, dtype=float)
    N = d.size
    rng = np.random.default_rng(seed)
    s1 = np.zeros(N)
    s1sq = np.zeros(N)
    s2 = np.zeros((N, N))
    s2sq = np.zeros((N, N))
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        u = rng.exponential(size=(m, N))
        r = u / (u @ d)[:, None]
        s1 += r.sum(0)
        s1sq += (r**2).sum(0)
        rr = r[:, :, None] * r[:, None, :]
        s2 += rr.sum(0)
        s2sq += (rr**2).sum(0)
        done += m
    a = s1 / draws
    b = s2 / draws
    a_se = np.sqrt((s1sq / draws - a**2) / draws)
    b_se = np.sqrt((s2sq / draws - b**2) / draws)
    return a, a_se, b, b_se


def complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def fd_series(a, b, c, x, terms=400):
    """Single-variable Gauss 2F1(a, b; c; x) by its Pochhammer power series."""
    total, term = 0.0, 1.0
    for k in range(terms):
        total += term
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * x
    return total
