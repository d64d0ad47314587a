"""Independent reference computations used by the tests.

None of these call into the package's solvers: they are closed forms,
scalar iterations for special structures, or numerical quadrature.
"""

import numpy as np
from scipy import integrate, special


def kronecker_de(r_list, t_list, x, scale=None, tol=1e-14, max_iters=100000):
    """Deterministic equivalent for Kronecker links H~_lk = R_lk^{1/2} W T_lk^{1/2}.

    ``r_list[l][k]``, ``t_list[l][k]`` are the one-sided correlations.  With
    a_lk = (1/x) tr(T_lk (I + sum_l' b_l'k T_l'k)^{-1}) * s_k and
    b_lk = (1/x) tr(R_lk (I + sum_k' a_lk' R_lk')^{-1}) * s_k, the mutual
    information is sum_l log det(I + sum_k a_lk R_lk)
    + sum_k log det(I + sum_l b_lk T_lk) - x sum_lk a_lk b_lk / s_k.

    Returns (I, cauchy, a, b).
    """
    L, K = len(r_list), len(r_list[0])
    s = np.ones(K) if scale is None else np.asarray(scale, dtype=float)
    a = np.zeros((L, K))
    b = np.zeros((L, K))
    for _ in range(max_iters):
        rx = [np.eye(r_list[l][0].shape[0]) + sum(a[l, k] * r_list[l][k] for k in range(K)) for l in range(L)]
        rx_inv = [np.linalg.inv(m) for m in rx]
        b_new = np.array(
            [[s[k] * np.trace(r_list[l][k] @ rx_inv[l]).real / x for k in range(K)] for l in range(L)]
        )
        tx_inv = [
            np.linalg.inv(np.eye(t_list[0][k].shape[0]) + sum(b_new[l, k] * t_list[l][k] for l in range(L)))
            for k in range(K)
        ]
        a_new = np.array(
            [[s[k] * np.trace(t_list[l][k] @ tx_inv[k]).real / x for k in range(K)] for l in range(L)]
        )
        done = max(np.max(np.abs(a_new - a)), np.max(np.abs(b_new - b))) < tol
        a, b = a_new, b_new
        if done:
            break
    n = sum(r_list[l][0].shape[0] for l in range(L))
    total = 0.0
    trace_g = 0.0
    for l in range(L):
        m = np.eye(r_list[l][0].shape[0]) + sum(a[l, k] * r_list[l][k] for k in range(K))
        total += np.linalg.slogdet(m)[1]
        trace_g += -np.trace(np.linalg.inv(m)).real / x
    for k in range(K):
        m = np.eye(t_list[0][k].shape[0]) + sum(b[l, k] * t_list[l][k] for l in range(L))
        total += np.linalg.slogdet(m)[1]
    total -= x * float(np.sum(a * b / s))
    return total, trace_g / n, a, b


def mp_cauchy_quadratic(n, m, x):
    """(1/N) tr E(-xI - HH^H)^{-1} for N x M i.i.d. entries of variance 1/M,
    from the root of x a^2 + (x + c - 1) a - 1 = 0, c = N/M."""
    c = n / m
    p = x + c - 1.0
    a = (-p + np.sqrt(p * p + 4.0 * x)) / (2.0 * x)
    return -1.0 / (x * (1.0 + a))


def _mp_density(c):
    lo, hi = (1 - np.sqrt(c)) ** 2, (1 + np.sqrt(c)) ** 2

    def f(lam):
        return np.sqrt(max((hi - lam) * (lam - lo), 0.0)) / (2.0 * np.pi * c * lam)

    atom = max(0.0, 1.0 - 1.0 / c)
    return f, lo, hi, atom


def mp_quadrature(n, m, x):
    """Cauchy transform and per-antenna Shannon transform of (1/M) W W^H
    (W is N x M) by integrating the Marchenko-Pastur density."""
    c = n / m
    f, lo, hi, atom = _mp_density(c)
    opts = dict(limit=200, epsabs=1e-13, epsrel=1e-12)
    g = integrate.quad(lambda t: f(t) / (-x - t), lo, hi, **opts)[0] + atom / (-x)
    v = integrate.quad(lambda t: f(t) * np.log1p(t / x), lo, hi, **opts)[0]
    return g, v


def verdu_mi(n, m, x):
    """Large-system closed form of E log det(I + HH^H / x) in nats for
    H of size N x M with i.i.d. variance-1/M entries."""
    beta = m / n
    # H = sqrt(N/M) H_v with H_v of variance 1/N, so the SNR is N/(M x)
    snr = n / (m * x)
    f = (np.sqrt(snr * (1 + np.sqrt(beta)) ** 2 + 1) - np.sqrt(snr * (1 - np.sqrt(beta)) ** 2 + 1)) ** 2
    c = beta * np.log1p(snr - f / 4) + np.log1p(snr * beta - f / 4) - f / (4 * snr)
    return n * c


def scalar_rayleigh_mi_quadrature():
    """E log(1 + |h|^2), h ~ CN(0, 1): integral of log(1 + t) e^{-t}."""
    return integrate.quad(lambda t: np.log1p(t) * np.exp(-t), 0, np.inf, epsabs=1e-14, epsrel=1e-13)[0]


def scalar_rayleigh_mi_closed():
    return float(np.e * special.exp1(1.0))


def deterministic_mi(h, x):
    return float(np.linalg.slogdet(np.eye(h.shape[0]) + h @ h.conj().T / x)[1])


def deterministic_cauchy(h, x):
    n = h.shape[0]
    return complex(np.trace(np.linalg.inv(-x * np.eye(n) - h @ h.conj().T)) / n)
