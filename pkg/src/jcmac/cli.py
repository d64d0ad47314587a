"""Command-line front end.

Every command reads a model file, runs over an SNR sweep and writes CSV to
standard output.  Exit codes: 0 ok, 1 acceptance failure (compare),
2 invalid input, 3 no convergence.
"""

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .capacity_opt import OptConfig, optimize
from .channel_model import validate
from .de_core import SolverConfig
from .errors import JCMACError, NoConvergence
from .mc_oracle import DEFAULT_SEED, MCConfig, ergodic_mi
from .shannon import evaluate
from .stats_extract import extract_full

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NOCONV = 0, 1, 2, 3
LN2 = np.log(2.0)
DEFAULT_SNR_DB = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


def snr_db_to_x(snr_db, m):
    """Noise variance x for SNR = 1 / (M x)."""
    return 1.0 / (m * 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0))


def x_to_snr_db(x, m):
    return 10.0 * np.log10(1.0 / (m * np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class SweepSpec:
    snr_db: Sequence[float]

    def __post_init__(self):
        vals = tuple(float(s) for s in self.snr_db)
        if not vals:
            raise ValueError("empty SNR sweep")
        if not all(np.isfinite(vals)):
            raise ValueError("SNR values must be finite")
        object.__setattr__(self, "snr_db", vals)

    def xs(self, m):
        return [float(snr_db_to_x(s, m)) for s in self.snr_db]


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(header, rows, out=None):
    w = csv.writer(out or sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])


def _pool_map(fn, items, threads):
    """Map in input order, optionally over a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def _solver_cfg(args):
    return SolverConfig(tol=args.tol, max_iters=args.max_iters, damping=args.damping)


def _mc_cfg(args, stream):
    return MCConfig(
        realizations=args.realizations,
        seed=args.seed,
        antithetic=args.antithetic,
        stream=stream,
    )


def _load(args):
    model = io.load_model(args.model)
    problems = validate(model, normalization=False)
    if problems:
        raise _InvalidModel(problems)
    for msg in validate(model):
        if msg not in problems:
            print(f"warning: {msg}", file=sys.stderr)
    q = io.load_covariances(args.q, model.dims) if getattr(args, "q", None) else None
    return model, q


class _InvalidModel(Exception):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = problems


def _mi_unit(args):
    return ("nats", 1.0) if args.nats else ("bits", LN2)


def cmd_solve(args):
    model, q = _load(args)
    cfg = _solver_cfg(args)
    sweep = SweepSpec(args.snr_db)
    unit, div = _mi_unit(args)

    def point(snr):
        x = float(snr_db_to_x(snr, model.dims.M))
        t = time.perf_counter()
        r = evaluate(model, q, x, cfg, form=args.form)
        ms = 1e3 * (time.perf_counter() - t)
        return [snr, x, r.V, r.I / div, float(np.real(r.G)), r.iters, r.residual, ms]

    rows = _pool_map(point, sweep.snr_db, args.threads)
    write_csv(["snr_db", "x", "V_nats", f"I_{unit}", "cauchy", "iters", "residual", "wall_ms"], rows)
    return EXIT_OK


def cmd_montecarlo(args):
    model, q = _load(args)
    sweep = SweepSpec(args.snr_db)
    unit, div = _mi_unit(args)

    def point(item):
        i, snr = item
        x = float(snr_db_to_x(snr, model.dims.M))
        t = time.perf_counter()
        e = ergodic_mi(model, q, x, _mc_cfg(args, i))
        ms = 1e3 * (time.perf_counter() - t)
        return [snr, e.mean / div, e.stderr / div, e.R, e.seed, ms]

    rows = _pool_map(point, enumerate(sweep.snr_db), args.threads)
    write_csv(["snr_db", "mi_mean", "mi_stderr", "R", "seed", "wall_ms"], rows)
    return EXIT_OK


def acceptance_envelope(de, mc_mean, mc_se, n_se=3.0, rel=0.01):
    """|DE - MC| <= max(n_se * SE, rel * |MC|)."""
    return abs(de - mc_mean) <= max(n_se * mc_se, rel * abs(mc_mean))


def cmd_compare(args):
    model, q = _load(args)
    cfg = _solver_cfg(args)
    sweep = SweepSpec(args.snr_db)
    unit, div = _mi_unit(args)

    def point(item):
        i, snr = item
        x = float(snr_db_to_x(snr, model.dims.M))
        t = time.perf_counter()
        r = evaluate(model, q, x, cfg, form=args.form)
        de_ms = 1e3 * (time.perf_counter() - t)
        t = time.perf_counter()
        e = ergodic_mi(model, q, x, _mc_cfg(args, i))
        mc_ms = 1e3 * (time.perf_counter() - t)
        diff = abs(r.I - e.mean)
        in_se = diff / e.stderr if e.stderr > 0 else (0.0 if diff == 0 else np.inf)
        ok = acceptance_envelope(r.I, e.mean, e.stderr)
        return [snr, x, r.I / div, e.mean / div, e.stderr / div, diff / div, in_se,
                diff / abs(e.mean) if e.mean else 0.0, de_ms, mc_ms, ok]

    rows = _pool_map(point, enumerate(sweep.snr_db), args.threads)
    write_csv(
        ["snr_db", "x", f"I_de_{unit}", f"mi_mean_{unit}", "mi_stderr", "abs_diff", "diff_in_se",
         "rel_diff", "de_ms", "mc_ms", "pass"],
        rows,
    )
    failed = [r[0] for r in rows if not r[-1]]
    if failed:
        print("acceptance envelope exceeded at SNR dB: " + ", ".join(fmt(s) for s in failed),
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_optimize(args):
    model, _ = _load(args)
    cfg = OptConfig(inner=_solver_cfg(args), outer_tol=args.outer_tol, max_outer=args.max_outer)
    sweep = SweepSpec(args.snr_db)
    if args.emit_q:
        Path(args.emit_q).mkdir(parents=True, exist_ok=True)

    def point(item):
        i, snr = item
        x = float(snr_db_to_x(snr, model.dims.M))
        res = optimize(model, x, cfg)
        if args.emit_q:
            path = Path(args.emit_q) / f"q_{i:03d}.json"
            io.save_covariances(res.q_star, model.dims, path, snr_db=snr, x=x, V=res.v_star)
        return res, [snr, res.v_uniform, res.v_star, res.v_star - res.v_uniform,
                     res.outer_iters, res.converged, res.kkt_residual]

    out = _pool_map(point, enumerate(sweep.snr_db), args.threads)
    write_csv(["snr_db", "V_uniform", "V_opt", "gain", "outer_iters", "converged", "kkt_residual"],
              [row for _, row in out])
    if not all(res.converged for res, _ in out):
        print("optimization stopped at max_outer before |dV| <= outer_tol", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


def cmd_extract(args):
    ss = io.load_samples(args.samples)
    ex = extract_full(ss)
    io.save_model(ex.model, args.output)
    print(f"energy_residual,{fmt(ex.energy_residual)}")
    print(f"max_imag,{fmt(ex.max_imag)}")
    return EXIT_OK


def cmd_validate(args):
    model = io.load_model(args.model)
    problems = validate(model, normalization=not args.no_normalization)
    for p in problems:
        print(p)
    if problems:
        return EXIT_INPUT
    print("ok")
    return EXIT_OK


def _common(parser):
    g = parser.add_argument_group("solver and sampling")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    g.add_argument("--tol", type=float, default=SolverConfig.tol)
    g.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    g.add_argument("--damping", type=float, default=SolverConfig.damping)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--realizations", type=int, default=MCConfig.realizations)
    g.add_argument("--antithetic", action="store_true")
    g.add_argument("--form", choices=("auto", "general", "reduced", "l1"), default="auto")
    g.add_argument("--nats", action="store_true", help="report mutual information in nats")
    g.add_argument("--emit-q", metavar="DIR", help="write optimized covariances here")
    g.add_argument("--snr-db", type=float, nargs="+", default=list(DEFAULT_SNR_DB))


def build_parser():
    p = argparse.ArgumentParser(prog="jcmac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("solve", cmd_solve, "deterministic-equivalent mutual information"),
        ("montecarlo", cmd_montecarlo, "Monte-Carlo ergodic mutual information"),
        ("compare", cmd_compare, "DE vs Monte-Carlo with acceptance check"),
        ("optimize", cmd_optimize, "waterfilling input covariance optimization"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("model")
        if name in ("solve", "montecarlo", "compare"):
            s.add_argument("--q", help="covariance file (default Q_k = I)")
        if name == "optimize":
            s.add_argument("--outer-tol", type=float, default=OptConfig.outer_tol)
            s.add_argument("--max-outer", type=int, default=OptConfig.max_outer)
        _common(s)
        s.set_defaults(func=fn)

    s = sub.add_parser("extract", help="identify a model from channel samples")
    s.add_argument("samples")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("validate", help="check model invariants")
    s.add_argument("model")
    s.add_argument("--no-normalization", action="store_true")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _InvalidModel as exc:
        for msg in exc.problems:
            print(msg, file=sys.stderr)
        return EXIT_INPUT
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (JCMACError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
