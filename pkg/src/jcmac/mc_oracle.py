"""Seeded Monte-Carlo estimates of ergodic mutual information and resolvent traces.

Realization ``r`` draws its Gaussian matrix from a Philox stream keyed by
``SeedSequence(seed, spawn_key=(stream, r))``, so results do not depend on
chunking or on the order in which chunks are evaluated.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelModel, LinkStatistics
from .de_core import _covariances
from .errors import FactorizationFailure
from .linalg import psd_sqrt

DEFAULT_SEED = 20160607
CHUNK = 250


@dataclass(frozen=True)
class MCConfig:
    realizations: int = 10_000
    seed: int = DEFAULT_SEED
    antithetic: bool = False
    stream: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.realizations < 2:
            raise ValueError("need at least 2 realizations")
        if self.antithetic and self.realizations % 2:
            raise ValueError("antithetic sampling needs an even number of realizations")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    R: int
    seed: int


def stream_rng(seed, stream, index):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


class _Sampler:
    def __init__(self, model: ChannelModel, q):
        self.model = model
        d = self.dims = model.dims
        q = _covariances(model, q)
        self.pre = [np.sqrt(model.scale(k)) * psd_sqrt(qk) for k, qk in enumerate(q.q)]
        self.sqrt_g = [[np.sqrt(model.links[l][k].g) for k in range(d.K)] for l in range(d.L)]
        self.n_draw = d.N * d.M
        self.mean = model.hbar_full()
        self.random = any(np.any(g) for row in self.sqrt_g for g in row)

    def gaussians(self, rng, count=1):
        z = rng.standard_normal((count, 2, self.n_draw))
        return (z[:, 0] + 1j * z[:, 1]) / np.sqrt(2.0)

    def assemble(self, w):
        """Channels for a batch of flattened CN(0,1) draws, shape (B, N, M)."""
        d = self.dims
        b = w.shape[0]
        h = np.broadcast_to(self.mean, (b, d.N, d.M)).copy()
        if self.random:
            pos = 0
            for l in range(d.L):
                for k in range(d.K):
                    n, m = d.n_l[l], d.m_k[k]
                    blk = w[:, pos:pos + n * m].reshape(b, n, m)
                    pos += n * m
                    link = self.model.links[l][k]
                    h[:, d.rows(l), d.cols(k)] += link.u @ (self.sqrt_g[l][k] * blk) @ link.v.conj().T
        for k in range(d.K):
            h[:, :, d.cols(k)] = h[:, :, d.cols(k)] @ self.pre[k]
        return h

    def draw(self, seed, stream, start, count, antithetic=False):
        if not antithetic:
            w = np.concatenate(
                [self.gaussians(stream_rng(seed, stream, r)) for r in range(start, start + count)]
            )
        else:
            rows = []
            for r in range(start, start + count):
                base = self.gaussians(stream_rng(seed, stream, r // 2))
                rows.append(base if r % 2 == 0 else -base)
            w = np.concatenate(rows)
        return self.assemble(w)


def sample_channel(model: ChannelModel, q=None, rng=None) -> np.ndarray:
    """One N x M draw H = [sqrt(P_k/M_k) (Hbar_k + H~_k) Q_k^{1/2}]_k."""
    if rng is None:
        rng = stream_rng(DEFAULT_SEED, 0, 0)
    s = _Sampler(model, q)
    return s.assemble(s.gaussians(rng))[0]


def _gram(h):
    """Smaller Gram matrix H^H H or H H^H (batched) and whether it is M-sided."""
    n, m = h.shape[-2:]
    if m <= n:
        return np.conj(np.swapaxes(h, -1, -2)) @ h
    return h @ np.conj(np.swapaxes(h, -1, -2))


def log_det_mi(h, x):
    """log det(I + H H^H / x) per batch element, via Cholesky."""
    g = _gram(h) / x
    a = g + np.eye(g.shape[-1])
    try:
        c = np.linalg.cholesky(a)
        return 2.0 * np.sum(np.log(np.real(np.diagonal(c, axis1=-2, axis2=-1))), axis=-1)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(0.5 * (a + np.conj(np.swapaxes(a, -1, -2))))
        if np.any(w <= 0):
            raise FactorizationFailure("I + HH^H/x is not positive definite")
        return np.sum(np.log(w), axis=-1)


def resolvent_trace(h, x):
    """(1/N) tr((-x I - H H^H)^{-1}) per batch element."""
    n, m = h.shape[-2:]
    g = _gram(h)
    a = g + x * np.eye(g.shape[-1])
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure("x I + H^H H is not positive definite") from exc
    cinv = np.linalg.inv(c)
    tr_small = np.sum(np.abs(cinv) ** 2, axis=(-2, -1))
    extra = (n - g.shape[-1]) / x
    return -(tr_small + extra) / n


def _chunk_stats(vals):
    n = vals.size
    mean = float(np.mean(vals))
    m2 = float(np.sum((vals - mean) ** 2))
    return n, mean, m2


def _merge(a, b):
    """Chan et al. pairwise combination of (count, mean, M2)."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, sa + sb + delta * delta * na * nb / n


def _estimate(model, q, x, cfg, fn):
    if not x > 0:
        raise ValueError("x must be positive")
    sampler = _Sampler(model, q)
    R = cfg.realizations
    if not sampler.random:
        v = float(fn(sampler.assemble(np.zeros((1, sampler.n_draw))), x)[0])
        return MCEstimate(v, 0.0, R, cfg.seed)

    def run(start):
        count = min(CHUNK, R - start)
        vals = fn(sampler.draw(cfg.seed, cfg.stream, start, count, cfg.antithetic), x)
        if cfg.antithetic:
            vals = 0.5 * (vals[0::2] + vals[1::2])
        return _chunk_stats(np.asarray(vals, dtype=float))

    starts = range(0, R, CHUNK)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    acc = parts[0]
    for p in parts[1:]:
        acc = _merge(acc, p)
    n, mean, m2 = acc
    std = np.sqrt(m2 / (n - 1)) if n > 1 else 0.0
    return MCEstimate(float(mean), float(std / np.sqrt(n)), R, cfg.seed)


def ergodic_mi(model: ChannelModel, q=None, x: float = 1.0, cfg: MCConfig = MCConfig()) -> MCEstimate:
    """Sample mean of log det(I_N + H H^H / x), in nats.

    With antithetic pairing the standard error is computed from the pair
    averages.
    """
    return _estimate(model, q, x, cfg, log_det_mi)


def ergodic_resolvent_trace(model: ChannelModel, q=None, x: float = 1.0, cfg: MCConfig = MCConfig()) -> MCEstimate:
    """Sample mean of (1/N) tr((-x I - H H^H)^{-1})."""
    return _estimate(model, q, x, cfg, resolvent_trace)


def sample_moment(model, c, k, cfg: MCConfig, side="receive", q=None):
    """Sample averages of X C X^H (receive) or X^H C X (transmit) with
    X = sqrt(P_k/M_k) H~_k Q_k^{1/2}, and their entrywise standard errors.

    The expectations are eta_q_tilde_k(C) and eta_q_k(C); used to check the
    correlation maps.
    """
    d = model.dims
    zero_mean = ChannelModel(
        d,
        [[LinkStatistics(np.zeros_like(lk.hbar), lk.u, lk.v, lk.g) for lk in row] for row in model.links],
        model.powers,
    )
    sampler = _Sampler(zero_mean, q)
    acc = []
    for start in range(0, cfg.realizations, CHUNK):
        count = min(CHUNK, cfg.realizations - start)
        h = sampler.draw(cfg.seed, cfg.stream, start, count)[:, :, d.cols(k)]
        hh = np.conj(np.swapaxes(h, -1, -2))
        acc.append(h @ c @ hh if side == "receive" else hh @ c @ h)
    vals = np.concatenate(acc)
    return vals.mean(axis=0), vals.std(axis=0, ddof=1) / np.sqrt(vals.shape[0])


__all__ = [
    "DEFAULT_SEED",
    "MCConfig",
    "MCEstimate",
    "ergodic_mi",
    "ergodic_resolvent_trace",
    "log_det_mi",
    "resolvent_trace",
    "sample_channel",
    "sample_moment",
    "stream_rng",
]
