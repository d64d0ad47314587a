"""Wall time of the deterministic equivalent against Monte-Carlo averaging
for growing antenna counts (single thread).

    python scripts/timing_table.py --n-l 16 32 64 128 --realizations 2000
"""

import argparse
import statistics
import sys
import time

from jcmac import Dimensions, MCConfig, ergodic_mi, evaluate, random_jointly_correlated
from jcmac.cli import snr_db_to_x, write_csv
from jcmac.mc_oracle import DEFAULT_SEED


def time_point(n, m, k, snr_db, realizations, repeats):
    dims = Dimensions((n, n), (m,) * k)
    model = random_jointly_correlated(dims, DEFAULT_SEED)
    x = float(snr_db_to_x(snr_db, dims.M))
    evaluate(model, None, x)
    de = []
    for _ in range(repeats):
        t = time.perf_counter()
        r = evaluate(model, None, x)
        de.append(time.perf_counter() - t)
    t = time.perf_counter()
    ergodic_mi(model, None, x, MCConfig(realizations, threads=1))
    mc = time.perf_counter() - t
    de_med = statistics.median(de)
    return [n, m, k, r.iters, de_med, mc, de_med / mc]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-l", type=int, nargs="+", default=[16, 32, 64])
    p.add_argument("--m-k", type=int, default=4)
    p.add_argument("--users", type=int, default=3)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--realizations", type=int, default=2000)
    p.add_argument("--repeats", type=int, default=5)
    a = p.parse_args(argv)
    rows = [time_point(n, a.m_k, a.users, a.snr_db, a.realizations, a.repeats) for n in a.n_l]
    write_csv(["N_l", "M_k", "K", "de_iters", "de_s", "mc_s", "ratio"], rows, sys.stdout)


if __name__ == "__main__":
    main()
