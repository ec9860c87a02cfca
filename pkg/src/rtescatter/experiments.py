"""Monte Carlo experiments: regime accuracy, bias curves and CLT validation.

Every replication draws its data from its own stream
``replication_rng(seed, r)``, replications are processed in fixed-size
chunks and per-replication results are stored by index before reduction, so
results are reproducible regardless of ``n_jobs``.
"""

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from ._validation import check_positive_int, check_rho
from .clt import clt_moments, quadratic_form_variance, vec
from .exceptions import DomainError
from .limit import asymptotic_bias, bias_functional, sigma_zero
from .model import replication_rng, standard_complex_normal, toeplitz_covariance
from .rte import DEFAULT_MAX_ITER, DEFAULT_TOL, gamma_n, sigma_tilde, solve_rte_batch

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "ExperimentReport",
    "MCEstimate",
    "Record",
    "clt_ks_experiment",
    "clt_statistics",
    "empirical_bias",
    "ks_normal",
    "metric_regime",
    "moments_check",
    "rte_replications",
    "run",
]

FORMAT_VERSION = 1
EXPERIMENT_KINDS = ("bias", "regime-compare", "clt-ks", "moments-check")
RHO_FLOOR = 0.05
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error."""

    value: float
    stderr: float

    def __iter__(self):
        yield self.value
        yield self.stderr


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return MCEstimate(float(x.mean()), se)


def _chunks(replications, n, dim):
    size = max(1, _CHUNK_ELEMENTS // (n * dim))
    return [(s, min(s + size, replications)) for s in range(0, replications, size)]


def _draw_whitened(dim, n, seed, start, stop):
    return np.stack([standard_complex_normal(replication_rng(seed, r), (n, dim)) for r in range(start, stop)])


def _run_chunks(fn, chunks, n_jobs):
    if n_jobs == 1:
        parts = [fn(a, b) for a, b in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(fn)(a, b) for a, b in chunks)
    return parts


def rte_replications(model, rho, n, replications, seed, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                     n_jobs=1, tilde_limit=None):
    """Solve the RTE on ``replications`` independent datasets.

    Returns an array of shape ``(replications, N, N)``. If ``tilde_limit``
    (an :class:`AsymptoticLimit`) is given, the random equivalent
    ``Sigma_tilde`` of every dataset is returned as a second array, so the
    samples themselves never need to be kept.
    """
    replications = check_positive_int(replications, "replications")
    n = check_positive_int(n, "n")
    check_rho(rho, n_samples=n, dim=model.dim)

    def work(a, b):
        X = _draw_whitened(model.dim, n, seed, a, b) @ model.sqrt.T
        C, _, _ = solve_rte_batch(X, rho, tol=tol, max_iter=max_iter)
        return C, (None if tilde_limit is None else sigma_tilde(X, tilde_limit))

    parts = _run_chunks(work, _chunks(replications, n, model.dim), n_jobs)
    C = np.concatenate([p[0] for p in parts])
    if tilde_limit is not None:
        return C, np.concatenate([p[1] for p in parts])
    return C


def metric_regime(model, rho, n, replications, seed, *, limit=None, tol=DEFAULT_TOL, n_jobs=1):
    """Closeness of the RTE to its two random equivalents.

    Returns ``(E_n, E_nN)`` as :class:`MCEstimate` pairs estimating
    ``(1/N) E||C - Sigma_tilde||_F^2`` and ``(1/N) E||C - S_hat||_F^2``.
    All three matrices are computed from the same datasets.
    """
    N = model.dim
    rho = check_rho(rho, n_samples=n, dim=N)
    if (1.0 - rho) * N / n >= 1.0:
        raise DomainError("(1 - rho) N/n must be < 1 for S_hat")
    if limit is None:
        limit = sigma_zero(model, rho)
    g = gamma_n(model, rho)
    scale = (1.0 - rho) / ((1.0 - (1.0 - rho) * N / n) * g)

    def work(a, b):
        W = _draw_whitened(N, n, seed, a, b)
        X = W @ model.sqrt.T
        C, _, _ = solve_rte_batch(X, rho, tol=tol)
        St = sigma_tilde(X, limit)
        S = scale * (np.swapaxes(X, -1, -2) @ X.conj()) / n + rho * np.eye(N)
        e1 = np.linalg.norm(C - St, axis=(-2, -1)) ** 2 / N
        e2 = np.linalg.norm(C - S, axis=(-2, -1)) ** 2 / N
        return e1, e2

    parts = _run_chunks(work, _chunks(replications, n, N), n_jobs)
    e1 = np.concatenate([p[0] for p in parts])
    e2 = np.concatenate([p[1] for p in parts])
    return _mean_se(e1), _mean_se(e2)


def empirical_bias(model, rho, n, replications, seed, *, per_dim=True, average="matrix", tol=DEFAULT_TOL,
                   n_jobs=1, groups=20):
    """Monte Carlo estimate of the scale-invariant bias of the RTE at sample size ``n``.

    By default the trace-normalised ``Sigma^{-1} C`` is averaged over
    replications before taking the squared Frobenius distance to ``I``
    (divided by ``N`` when ``per_dim``). ``average="loss"`` averages the
    per-replication distances instead; see :func:`bias_functional`. The
    standard error is a delete-one-group jackknife over ``groups`` contiguous
    blocks of replications.
    """
    C = rte_replications(model, rho, n, replications, seed, tol=tol, n_jobs=n_jobs)
    sinv = model.inv_sqrt @ model.inv_sqrt
    value = bias_functional(sinv, C, per_dim=per_dim, average=average)
    groups = min(groups, replications)
    if groups < 2:
        return MCEstimate(value, float("nan"))
    blocks = np.array_split(np.arange(replications), groups)
    loo = np.array([bias_functional(sinv, np.delete(C, blk, axis=0), per_dim=per_dim, average=average)
                    for blk in blocks])
    se = math.sqrt((groups - 1) / groups * np.sum((loo - loo.mean()) ** 2))
    return MCEstimate(value, se)


def ks_normal(samples):
    """Kolmogorov-Smirnov distance between the empirical CDF of ``samples`` and ``N(0, 1)``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise DomainError("ks_normal needs at least one sample")
    return float(stats.kstest(samples, "norm").statistic)


def _unit(p, N):
    p = np.ones(N, dtype=np.complex128) if p is None else np.asarray(p, dtype=np.complex128).ravel()
    nrm = np.linalg.norm(p)
    if p.size != N or nrm == 0:
        raise DomainError(f"p must be a nonzero vector of length {N}")
    return p / nrm


def clt_statistics(model, rho, n, replications, seed, *, p=None, limit=None, moments=None, tol=DEFAULT_TOL,
                   n_jobs=1):
    """Studentised statistics ``T_n`` for the quadratic form ``(1/N) p^* C^{-1} p``.

    ``p`` defaults to the all-ones vector and is normalised to unit norm.
    """
    N = model.dim
    rho = check_rho(rho, n_samples=n, dim=N)
    if rho == 1.0:
        raise DomainError("rho = 1 gives a degenerate (zero-variance) statistic")
    p = _unit(p, N)
    if limit is None:
        limit = sigma_zero(model, rho)
    var = quadratic_form_variance(p, model, limit, moments)
    if var <= 0:
        raise DomainError("asymptotic variance is zero")
    C = rte_replications(model, rho, n, replications, seed, tol=tol, n_jobs=n_jobs)
    q_hat = np.einsum("a,rab,b->r", p.conj(), np.linalg.inv(C), p).real / N
    q0 = (p.conj() @ limit.sigma0_inv @ p).real / N
    return math.sqrt(n) * (q_hat - q0) / math.sqrt(var)


def clt_ks_experiment(model, rho, n, p, replications, seed, **kwargs):
    """KS distance between the ``T_n`` sample and the standard normal."""
    return ks_normal(clt_statistics(model, rho, n, replications, seed, p=p, **kwargs))


def moments_check(model, rho, n, replications, seed, *, limit=None, moments=None, tol=DEFAULT_TOL, n_jobs=1):
    """Relative Frobenius gaps between empirical and predicted fluctuation covariances.

    Returns a dict with keys ``"M1"`` (for ``sqrt(n) vec(C - Sigma0)``),
    ``"M2"`` (its pseudo-covariance) and ``"M1_tilde"`` (for ``Sigma_tilde``).
    """
    if limit is None:
        limit = sigma_zero(model, rho)
    if moments is None:
        moments = clt_moments(model, limit)
    C, St = rte_replications(model, rho, n, replications, seed, tol=tol, n_jobs=n_jobs, tilde_limit=limit)
    s0 = limit.sigma0
    delta = math.sqrt(n) * vec(C - s0)
    delta_t = math.sqrt(n) * vec(St - s0)
    R = replications

    def rel(emp, ref):
        return float(np.linalg.norm(emp - ref) / np.linalg.norm(ref))

    return {
        "M1": rel(delta.T @ delta.conj() / R, moments.M1),
        "M2": rel(delta.T @ delta / R, moments.M2),
        "M1_tilde": rel(delta_t.T @ delta_t.conj() / R, moments.M1_tilde),
    }


@dataclass
class ExperimentConfig:
    """Grid description for :func:`run`.

    ``ns`` lists sample sizes; ``ratios`` lists ``n/N`` values (used when
    ``ns`` is empty). ``bs`` lists Toeplitz coefficients (complex allowed).
    """

    kind: str
    dim: int = 2
    bs: list = field(default_factory=lambda: [0.7])
    rhos: list = field(default_factory=lambda: [0.5])
    ns: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    replications: int = 10_000
    seed: int = 0
    tol: float = DEFAULT_TOL
    p: Optional[list] = None
    per_dim_bias: bool = True
    bias_average: str = "matrix"
    n_jobs: int = 1

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}; choose from {EXPERIMENT_KINDS}")
        check_positive_int(self.dim, "dim")
        check_positive_int(self.replications, "replications")
        for rho in self.rhos:
            if not RHO_FLOOR < float(rho) <= 1.0:
                raise DomainError(f"rho={rho} outside ({RHO_FLOOR}, 1]")
        if self.bias_average not in ("matrix", "loss"):
            raise DomainError(f"bias_average must be 'matrix' or 'loss', got {self.bias_average!r}")
        for b in self.bs:
            if not abs(complex(b)) < 1:
                raise DomainError(f"|b| must be < 1, got {b}")
        for n in self.sample_sizes():
            check_positive_int(n, "n")
        return self

    def sample_sizes(self):
        if self.ns:
            return [int(n) for n in self.ns]
        return [int(round(r * self.dim)) for r in self.ratios]

    def to_dict(self):
        d = asdict(self)
        d["bs"] = [_fmt_b(b) for b in self.bs]
        if self.p is not None:
            d["p"] = [_fmt_b(x) for x in self.p]
        return d


def _fmt_b(b):
    b = complex(b)
    return repr(b.real) if b.imag == 0 else str(b)


@dataclass
class Record:
    """One reported cell. ``x``/``y``/``stderr``/``series`` are plot-ready."""

    experiment: str
    series: str
    metric: str
    x: float
    y: float
    stderr: float
    dim: int
    b: str
    rho: float
    n: int
    replications: int
    seed: int
    status: str = "ok"
    message: str = ""
    runtime: float = 0.0


CSV_COLUMNS = [f for f in Record.__dataclass_fields__ if f != "runtime"]


@dataclass
class ExperimentReport:
    config: dict
    records: list = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    @property
    def failed(self):
        return [r for r in self.records if r.status != "ok"]

    def to_csv(self):
        """CSV text: ``#``-prefixed header with config JSON and runtimes, then the body."""
        buf = io.StringIO()
        buf.write(f"# format_version: {self.format_version}\n")
        buf.write(f"# config: {json.dumps(self.config, sort_keys=True)}\n")
        buf.write(f"# runtimes_s: {json.dumps([round(r.runtime, 4) for r in self.records])}\n")
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in self.records:
            row = {k: v for k, v in asdict(r).items() if k in CSV_COLUMNS}
            for k in ("x", "y", "stderr", "rho"):
                row[k] = repr(float(row[k]))
            writer.writerow(row)
        return buf.getvalue()

    def to_json(self):
        return json.dumps(
            {"format_version": self.format_version, "config": self.config,
             "records": [asdict(r) for r in self.records]},
            indent=2, sort_keys=True, default=str,
        )

    def write(self, path=None, fmt="csv"):
        text = self.to_csv() if fmt == "csv" else self.to_json()
        if path is None or str(path) == "-":
            return text
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return text


def _cell(records, base, fn):
    t0 = time.perf_counter()
    try:
        for rec in fn():
            rec.runtime = time.perf_counter() - t0
            records.append(rec)
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        records.append(Record(**base, status="failed", message=f"{type(exc).__name__}: {exc}",
                              runtime=time.perf_counter() - t0))


def run(config):
    """Evaluate every cell of ``config``'s grid and collect an :class:`ExperimentReport`.

    Solver failures inside a cell are recorded as ``status="failed"`` rows
    rather than aborting the run.
    """
    config.validate()
    report = ExperimentReport(config=config.to_dict())
    recs = report.records
    R, seed, N = config.replications, config.seed, config.dim
    nan = float("nan")

    for b in config.bs:
        model = toeplitz_covariance(N, b)
        bstr = _fmt_b(b)
        for rho in config.rhos:
            rho = float(rho)
            common = dict(experiment=config.kind, dim=N, b=bstr, rho=rho, replications=R, seed=seed)
            if config.kind == "bias":
                xb = complex(b).real if complex(b).imag == 0 else abs(complex(b))
                base = dict(common, series=f"asymptotic rho={rho:g}", metric="bias", x=xb, y=nan, stderr=nan, n=0)
                _cell(recs, base, lambda: [Record(**dict(
                    base, y=asymptotic_bias(model, rho, per_dim=config.per_dim_bias), stderr=0.0))])
                for n in config.sample_sizes():
                    metric = "bias" if config.bias_average == "matrix" else "mean_loss"
                    nb = dict(base, series=f"empirical rho={rho:g} n={n}", metric=metric, n=n)

                    def emp(nb=nb, n=n):
                        est = empirical_bias(model, rho, n, R, seed, per_dim=config.per_dim_bias,
                                             average=config.bias_average, tol=config.tol,
                                             n_jobs=config.n_jobs)
                        return [Record(**dict(nb, y=est.value, stderr=est.stderr))]

                    _cell(recs, nb, emp)
                continue

            limit_holder = {}

            def get_limit():
                if "limit" not in limit_holder:
                    limit_holder["limit"] = sigma_zero(model, rho)
                return limit_holder["limit"]

            for n in config.sample_sizes():
                x = n / N
                base = dict(common, series="", metric="", x=x, y=nan, stderr=nan, n=n)
                if config.kind == "regime-compare":
                    def regime(base=base, n=n):
                        e_n, e_nn = metric_regime(model, rho, n, R, seed, limit=get_limit(), tol=config.tol,
                                                  n_jobs=config.n_jobs)
                        return [Record(**dict(base, series="large-n", metric="E_n", y=e_n.value, stderr=e_n.stderr)),
                                Record(**dict(base, series="large-n,N", metric="E_nN", y=e_nn.value,
                                              stderr=e_nn.stderr))]

                    _cell(recs, dict(base, series="large-n", metric="E_n"), regime)
                elif config.kind == "clt-ks":
                    def ks(base=base, n=n):
                        val = clt_ks_experiment(model, rho, n, config.p, R, seed, limit=get_limit(), tol=config.tol,
                                                n_jobs=config.n_jobs)
                        # spread of the KS distance under exact normality
                        se = float(stats.kstwobign.std() / math.sqrt(R))
                        return [Record(**dict(base, series="T_n", metric="ks", y=val, stderr=se))]

                    _cell(recs, dict(base, series="T_n", metric="ks"), ks)
                else:
                    def mom(base=base, n=n):
                        gaps = moments_check(model, rho, n, R, seed, limit=get_limit(), tol=config.tol,
                                             n_jobs=config.n_jobs)
                        return [Record(**dict(base, series=k, metric="rel_fro_gap", y=v, stderr=nan))
                                for k, v in gaps.items()]

                    _cell(recs, dict(base, series="M1", metric="rel_fro_gap"), mom)
    return report
