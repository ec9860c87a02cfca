"""Command-line entry point: ``rtescatter <subcommand> [options]``.

Exit status is 0 on success, 1 when any experiment cell failed and 2 on
configuration errors.
"""

import argparse
import json
import sys

import numpy as np

from .clt import clt_moments
from .exceptions import DomainError, NonConvergenceError
from .experiments import ExperimentConfig, _fmt_b, run
from .limit import asymptotic_bias, sigma_zero
from .model import toeplitz_covariance
from .rte import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_rte

EXIT_OK, EXIT_CELL_FAILURE, EXIT_CONFIG = 0, 1, 2


def read_samples(path):
    """Load complex samples stored as interleaved ``re, im`` columns, one row per sample."""
    raw = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if raw.shape[1] % 2:
        raise DomainError(f"{path}: expected an even number of columns (re/im pairs), got {raw.shape[1]}")
    return raw[:, 0::2] + 1j * raw[:, 1::2]


def _matrix_json(M):
    M = np.asarray(M)
    return {"real": M.real.tolist(), "imag": M.imag.tolist()}


def _matrix_csv(name, M):
    rows = [f"# {name} ({M.shape[0]}x{M.shape[1]}), entries as re,im pairs"]
    for row in np.asarray(M):
        rows.append(",".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    return "\n".join(rows)


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _add_common(p, *, rho_default=(0.5,)):
    p.add_argument("--n", type=int, action="append", help="sample size (repeatable)")
    p.add_argument("--ratio", type=float, action="append", help="n/N ratio (repeatable; used when --n is absent)")
    p.add_argument("--dim", type=int, default=2, help="dimension N (default: 2)")
    p.add_argument("--b", type=complex, action="append", help="Toeplitz coefficient, e.g. 0.7 or 0.7j (repeatable)")
    p.add_argument("--rho", type=float, action="append", help=f"regularization (repeatable, default {rho_default})")
    p.add_argument("--reps", type=int, default=10_000, help="Monte Carlo replications (default: 10000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for replications")
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(rho_default=list(rho_default))


def build_parser():
    parser = argparse.ArgumentParser(prog="rtescatter", description="Regularized Tyler estimator toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="solve the RTE on samples read from a file")
    p.add_argument("input", help="CSV file: one sample per row, columns re1,im1,re2,im2,...")
    _add_common(p)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)

    p = sub.add_parser("limit", help="print the large-n limit Sigma0 and the asymptotic bias")
    _add_common(p)

    p = sub.add_parser("moments", help="emit the CLT matrices M1, M2 and F_tilde")
    _add_common(p)

    p = sub.add_parser("bias", help="asymptotic and empirical bias over a (b, rho) grid")
    _add_common(p, rho_default=(0.2, 0.5, 0.9))
    p.add_argument("--unnormalized", action="store_true", help="report ||.||_F^2 instead of (1/N)||.||_F^2")
    p.add_argument("--average", choices=("matrix", "loss"), default="matrix",
                   help="average normalised estimates before the norm (matrix) or the per-replication norms (loss)")

    p = sub.add_parser("regime-compare", help="E_n and E_nN accuracy metrics over n")
    _add_common(p)

    p = sub.add_parser("clt-ks", help="KS distance of the studentised quadratic-form statistic")
    _add_common(p)
    p.add_argument("--p", type=complex, nargs="+", help="direction vector (default all ones; normalised)")

    p = sub.add_parser("moments-check", help="empirical vs predicted fluctuation covariances")
    _add_common(p)
    return parser


def _rhos(args):
    return args.rho if args.rho else args.rho_default


def _cmd_estimate(args):
    X = read_samples(args.input)
    blocks = []
    payload = []
    for rho in _rhos(args):
        est = solve_rte(X, rho, tol=args.tol, max_iter=args.max_iter)
        payload.append({"rho": rho, "iterations": est.iterations, "residual": est.residual,
                        "matrix": _matrix_json(est.matrix)})
        blocks.append(f"# rho={rho!r} iterations={est.iterations} residual={est.residual:.3e}\n"
                      + _matrix_csv("C_hat", est.matrix))
    text = json.dumps(payload, indent=2) if args.format == "json" else "\n".join(blocks)
    _emit(text, args.out)
    return EXIT_OK


def _models(args):
    return [(b, toeplitz_covariance(args.dim, b)) for b in (args.b or [0.7])]


def _cmd_limit(args):
    payload, blocks = [], []
    for b, model in _models(args):
        for rho in _rhos(args):
            lim = sigma_zero(model, rho, tol=min(args.tol * 10, 1e-9))
            bias = asymptotic_bias(model, rho, limit=lim)
            payload.append({"b": _fmt_b(b), "rho": rho, "d": lim.d.tolist(), "s": lim.s.tolist(), "bias": bias,
                            "sigma0": _matrix_json(lim.sigma0)})
            blocks.append(f"# b={_fmt_b(b)} rho={rho!r} bias={bias!r}\n" + _matrix_csv("Sigma0", lim.sigma0))
    _emit(json.dumps(payload, indent=2) if args.format == "json" else "\n".join(blocks), args.out)
    return EXIT_OK


def _cmd_moments(args):
    payload, blocks = [], []
    for b, model in _models(args):
        for rho in _rhos(args):
            lim = sigma_zero(model, rho)
            m = clt_moments(model, lim)
            entry = {"b": _fmt_b(b), "rho": rho, "F_tilde_norm": float(np.linalg.norm(m.F_tilde, 2))}
            for name in ("M1", "M2", "F_tilde"):
                entry[name] = _matrix_json(getattr(m, name))
                blocks.append(f"# b={_fmt_b(b)} rho={rho!r}\n" + _matrix_csv(name, getattr(m, name)))
            payload.append(entry)
    _emit(json.dumps(payload, indent=2) if args.format == "json" else "\n".join(blocks), args.out)
    return EXIT_OK


def _cmd_experiment(args):
    kind = args.command
    cfg = ExperimentConfig(
        kind=kind,
        dim=args.dim,
        bs=list(args.b or [0.7]),
        rhos=list(_rhos(args)),
        ns=list(args.n or []),
        ratios=list(args.ratio or []),
        replications=args.reps,
        seed=args.seed,
        tol=args.tol,
        p=list(args.p) if getattr(args, "p", None) else None,
        per_dim_bias=not getattr(args, "unnormalized", False),
        bias_average=getattr(args, "average", "matrix"),
        n_jobs=args.jobs,
    )
    cfg.validate()
    report = run(cfg)
    text = report.write(None, args.format)
    _emit(text, args.out)
    return EXIT_CELL_FAILURE if report.failed else EXIT_OK


COMMANDS = {
    "estimate": _cmd_estimate,
    "limit": _cmd_limit,
    "moments": _cmd_moments,
    "bias": _cmd_experiment,
    "regime-compare": _cmd_experiment,
    "clt-ks": _cmd_experiment,
    "moments-check": _cmd_experiment,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DomainError, OSError) as exc:
        print(f"rtescatter: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"rtescatter: error: {exc}", file=sys.stderr)
        return EXIT_CELL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
