"""Sum-rate gain of iterative waterfilling over Q = I across SNR, with an
optional Monte-Carlo check of the optimized covariances.

    python scripts/optimize_sweep.py --model kronecker --realizations 5000
"""

import argparse
import sys

import numpy as np

from jcmac import (
    Dimensions,
    MCConfig,
    ergodic_mi,
    from_kronecker,
    normalize,
    optimize,
    random_jointly_correlated,
)
from jcmac.cli import snr_db_to_x, write_csv
from jcmac.linalg import random_unitary
from jcmac.mc_oracle import DEFAULT_SEED


def kronecker_model(n, m, k, cond, seed):
    """Two antenna sets; each user has one transmit correlation with
    condition number ``cond`` shared by both sets."""
    rng = np.random.default_rng(seed)

    def psd(size, ev):
        u = random_unitary(size, rng)
        return (u * ev) @ u.conj().T

    t = [psd(m, np.geomspace(1.0, 1.0 / cond, m)) for _ in range(k)]
    r = [[psd(n, rng.uniform(0.5, 1.5, n)) for _ in range(k)] for _ in range(2)]
    return normalize(from_kronecker(r, [t, t]))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--model", choices=("kronecker", "random"), default="kronecker")
    p.add_argument("--n-l", type=int, default=16)
    p.add_argument("--m-k", type=int, default=4)
    p.add_argument("--users", type=int, default=3)
    p.add_argument("--cond", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=8)
    p.add_argument("--snr-db", type=float, nargs="+", default=[-10, -5, 0, 5, 10, 15, 20])
    p.add_argument("--realizations", type=int, default=0, help="Monte-Carlo draws per point (0 skips)")
    a = p.parse_args(argv)
    if a.model == "kronecker":
        model = kronecker_model(a.n_l, a.m_k, a.users, a.cond, a.seed)
    else:
        dims = Dimensions((a.n_l, a.n_l), (a.m_k,) * a.users)
        model = random_jointly_correlated(dims, a.seed)
    rows = []
    for i, snr in enumerate(a.snr_db):
        x = float(snr_db_to_x(snr, model.dims.M))
        res = optimize(model, x)
        row = [snr, res.v_uniform * model.dims.N, res.v_star * model.dims.N, res.outer_iters, res.kkt_residual]
        if a.realizations:
            base = ergodic_mi(model, None, x, MCConfig(a.realizations, seed=DEFAULT_SEED, stream=2 * i))
            best = ergodic_mi(model, res.q_star, x, MCConfig(a.realizations, seed=DEFAULT_SEED, stream=2 * i + 1))
            row += [base.mean, best.mean, np.hypot(base.stderr, best.stderr)]
        rows.append(row)
    header = ["snr_db", "I_de_uniform", "I_de_opt", "outer_iters", "kkt_residual"]
    if a.realizations:
        header += ["I_mc_uniform", "I_mc_opt", "gain_stderr"]
    write_csv(header, rows, sys.stdout)


if __name__ == "__main__":
    main()
