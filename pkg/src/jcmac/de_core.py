"""Fixed-point solvers for the deterministic-equivalent resolvents at z = -x.

All solvers work on the negative real axis.  The unknowns are the N x N
resolvent ``g_b`` (negative definite), the per-user M_k x M_k resolvent
blocks ``g_k`` and the auxiliary matrices

    phi_tilde = I_N - sum_k eta_q_tilde_k(g_k)
    phi_k     = I   - eta_q_k(g_b)

with
    g_b = (-x phi_tilde - A phi^{-1} A^H)^{-1}
    g_k = k-th block of (-x phi - A^H phi_tilde^{-1} A)^{-1},   A = Sbar Q^{1/2}.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .channel_model import ChannelModel, InputCovarianceSet
from .errors import NoConvergence, PreconditionViolated
from .linalg import block_diag, diag_in_basis, herm, hpd_inverse, psd_sqrt

# cap on stored basis entries (complex), about 64 MB
BASIS_MAX_ENTRIES = 1 << 22


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iters: int = 10_000
    damping: float = 0.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


@dataclass(frozen=True)
class DEState:
    x: float
    phi_tilde: np.ndarray
    phi: List[np.ndarray]
    g_b: np.ndarray
    g_k: List[np.ndarray]
    iters: int
    residual: float
    q: InputCovarianceSet = field(repr=False, default=None)
    form: str = "general"

    @property
    def cauchy(self):
        """(1/N) tr g_b, the Cauchy transform at -x."""
        return complex(np.trace(self.g_b) / self.g_b.shape[0])


@dataclass(frozen=True)
class ReducedState:
    x: float
    lambda_tilde: List[np.ndarray]
    g_k: List[np.ndarray]
    phi: List[np.ndarray]
    iters: int
    residual: float
    form: str = "reduced_common_u"
    lambda_k: Optional[List[np.ndarray]] = None

    @property
    def cauchy(self):
        lam = np.concatenate(self.lambda_tilde)
        return complex(-np.sum(lam) / (self.x * lam.size))


@dataclass(frozen=True)
class DiagState:
    """Diagonals of the two resolvent blocks of the variance-profile system."""

    x: float
    psi_b: np.ndarray
    psi_m: np.ndarray
    iters: int
    residual: float

    @property
    def cauchy(self):
        return complex(np.mean(self.psi_b))


def cauchy_transform(state) -> complex:
    return state.cauchy


def _check_x(x):
    if not (np.isfinite(x) and x > 0):
        raise ValueError(f"x must be positive and finite, got {x}")


def _covariances(model, q):
    if q is None:
        return InputCovarianceSet.identity(model.dims)
    if not isinstance(q, InputCovarianceSet):
        q = InputCovarianceSet(q)
    bad = q.check(model.dims)
    if bad:
        raise ValueError("invalid input covariances: " + "; ".join(bad))
    return q


class _Kernel:
    """Precomputed per-link quantities for the Q-parameterized eta maps."""

    def __init__(self, model: ChannelModel, q: InputCovarianceSet, use_basis: bool = False):
        self.model = model
        d = self.dims = model.dims
        self.q = q
        self.q_sqrt = [
            np.eye(m, dtype=complex) if np.array_equal(qk, np.eye(m)) else psd_sqrt(qk)
            for qk, m in zip(q.q, d.m_k)
        ]
        self.u = [[model.links[l][k].u for k in range(d.K)] for l in range(d.L)]
        self.uh = [[u.conj().T for u in row] for row in self.u]
        # W_lk = Q_k^{1/2} V_lk carries the precoder into the transmit basis
        self.w = [
            [self.q_sqrt[k] @ model.links[l][k].v for k in range(d.K)] for l in range(d.L)
        ]
        self.wh = [[w.conj().T for w in row] for row in self.w]
        self.cg = [
            [model.scale(k) * model.links[l][k].g for k in range(d.K)] for l in range(d.L)
        ]
        self.a = model.sbar() @ block_diag(self.q_sqrt)
        self.rician = bool(np.any(self.a))
        self.splits = np.cumsum(d.m_k)[:-1]
        # Per antenna set, the rows B_lkj = U_lk diag(cg_lk[:, j]) U_lk^H
        # stacked over (k, j).  eta_tilde is a linear combination of them and
        # eta's inner diagonal is tr(B_lkj <g_b>_l), so a sweep costs two
        # matrix-vector products per set instead of N_l x N_l products.
        self.basis = None
        if use_basis and sum(n * n * d.M for n in d.n_l) <= BASIS_MAX_ENTRIES:
            self.basis = [
                np.concatenate(
                    [
                        ((self.u[l][k] * self.cg[l][k].T[:, None, :]).reshape(-1, d.n_l[l])
                         @ self.uh[l][k]).reshape(d.m_k[k], -1)
                        for k in range(d.K)
                    ]
                )
                for l in range(d.L)
            ]

    def eta_tilde_blocks(self, g_k):
        """Diagonal blocks of sum_k eta_q_tilde_k(g_k)."""
        d = self.dims
        out = []
        for l in range(d.L):
            n = d.n_l[l]
            t = [diag_in_basis(self.w[l][k], g_k[k]).real for k in range(d.K)]
            if self.basis is not None:
                out.append((np.concatenate(t) @ self.basis[l]).reshape(n, n))
                continue
            acc = np.zeros((n, n), dtype=complex)
            for k in range(d.K):
                acc += (self.u[l][k] * (self.cg[l][k] @ t[k])) @ self.uh[l][k]
            out.append(acc)
        return out

    def eta_all(self, g_blocks):
        """[eta_q_k(g_b) for each k] from the diagonal blocks of g_b."""
        d = self.dims
        acc = [np.zeros((m, m), dtype=complex) for m in d.m_k]
        for l in range(d.L):
            blk = g_blocks[l]
            if self.basis is not None:
                pis = np.split((self.basis[l] @ blk.T.ravel()).real, self.splits)
            else:
                pis = [self.cg[l][k].T @ diag_in_basis(self.u[l][k], blk).real for k in range(d.K)]
            for k in range(d.K):
                acc[k] += (self.w[l][k] * pis[k]) @ self.wh[l][k]
        return acc

    def blocks(self, g_b):
        d = self.dims
        return [g_b[d.rows(l), d.rows(l)] for l in range(d.L)]

    def eta_k(self, k, g_b):
        """eta_q_k(g_b), M_k x M_k."""
        return self.eta_all(self.blocks(g_b))[k]


def _initial(model, x, init):
    d = model.dims
    if init is None:
        return (
            -np.eye(d.N, dtype=complex) / x,
            [-np.eye(m, dtype=complex) / x for m in d.m_k],
        )
    if isinstance(init, DEState):
        return init.g_b.copy(), [g.copy() for g in init.g_k]
    g_b, g_k = init
    return np.array(g_b, dtype=complex), [np.array(g, dtype=complex) for g in g_k]


def solve_fixed_point(
    model: ChannelModel,
    q=None,
    x: float = 1.0,
    cfg: SolverConfig = SolverConfig(),
    init=None,
) -> DEState:
    """Iterate the fixed-point system until the entrywise change of
    g_b, g_k, phi_tilde and phi drops below ``cfg.tol``.

    Each sweep updates phi_tilde, g_b, phi and g_k in that order, each from
    the latest values of the others.  ``init`` may be a previous DEState (warm
    start) or a ``(g_b, [g_k])`` pair; the default is -I/x for both.
    """
    _check_x(x)
    q = _covariances(model, q)
    ker = _Kernel(model, q, use_basis=True)
    d = model.dims
    g_b, g_k = _initial(model, x, init)
    # without a mean term every iterate of g_b is block diagonal, so only
    # the blocks are carried through the loop
    g_b = ker.blocks(g_b) if not ker.rician else [g_b]
    phi_t = phi = None
    residual = np.inf

    def delta(new, old):
        return max(np.max(np.abs(n - o)) for n, o in zip(new, old))

    def phi_from(g_b):
        blocks = ker.blocks(g_b[0]) if ker.rician else g_b
        return [herm(np.eye(m) - e) for m, e in zip(d.m_k, ker.eta_all(blocks))]

    phi_prev = phi_from(g_b) if ker.rician else None
    a = cfg.damping
    for it in range(1, cfg.max_iters + 1):
        # Gauss-Seidel: phi_tilde from g_k, g_b from phi_tilde, phi from the
        # new g_b, g_k from phi
        new_phi_t = [np.eye(n) - b for n, b in zip(d.n_l, ker.eta_tilde_blocks(g_k))]
        if ker.rician:
            phi_t_full = block_diag(new_phi_t)
            phi_inv = block_diag([hpd_inverse(p, "phi") for p in phi_prev])
            new_g_b = [-hpd_inverse(x * phi_t_full + ker.a @ phi_inv @ ker.a.conj().T, "-g_b^-1")]
        else:
            new_g_b = [-hpd_inverse(x * p, "phi_tilde") for p in new_phi_t]
        if a:
            new_g_b = [(1 - a) * n + a * o for n, o in zip(new_g_b, g_b)]
        new_phi = phi_from(new_g_b)
        if ker.rician:
            phi_t_inv = hpd_inverse(phi_t_full, "phi_tilde")
            full = -hpd_inverse(
                x * block_diag(new_phi) + ker.a.conj().T @ phi_t_inv @ ker.a, "-g^-1"
            )
            new_g_k = [full[d.cols(k), d.cols(k)] for k in range(d.K)]
        else:
            new_g_k = [-hpd_inverse(x * p, "phi") for p in new_phi]
        if a:
            new_g_k = [(1 - a) * n + a * o for n, o in zip(new_g_k, g_k)]
        residual = max(delta(new_g_b, g_b), delta(new_g_k, g_k))
        if phi_t is not None:
            residual = max(residual, delta(new_phi_t, phi_t), delta(new_phi, phi))
        g_b, g_k, phi_t, phi = new_g_b, new_g_k, new_phi_t, new_phi
        phi_prev = phi
        if residual <= cfg.tol:
            break
    full_g_b = g_b[0] if ker.rician else block_diag(g_b)
    state = DEState(x, block_diag(phi_t), phi, full_g_b, g_k, it, float(residual), q, "general")
    if residual > cfg.tol:
        raise NoConvergence(cfg.max_iters, float(residual), state)
    return state


def _require_rayleigh(model):
    if not model.is_rayleigh:
        raise PreconditionViolated("reduced forms require Hbar = 0")


def _require_common_u(model, tol=1e-10):
    if not model.common_receive_basis(tol):
        raise PreconditionViolated("receive eigenbases differ across users")


def solve_reduced_common_u(
    model: ChannelModel, q=None, x: float = 1.0, cfg: SolverConfig = SolverConfig()
) -> ReducedState:
    """Diagonal iteration valid when each antenna set has one receive
    eigenbasis shared by all users and the channel mean is zero.

    Only the diagonals lambda_tilde_l of U_l^H (-x g_b) U_l and the M_k x M_k
    blocks g_k are iterated; the N x N inversion disappears.
    """
    _check_x(x)
    _require_rayleigh(model)
    _require_common_u(model)
    q = _covariances(model, q)
    ker = _Kernel(model, q)
    d = model.dims
    g_k = [-np.eye(m, dtype=complex) / x for m in d.m_k]
    lam = [np.ones(n) for n in d.n_l]
    phi = [np.eye(m, dtype=complex) for m in d.m_k]
    residual = np.inf
    for it in range(1, cfg.max_iters + 1):
        new_lam = []
        for l in range(d.L):
            s = np.zeros(d.n_l[l])
            for k in range(d.K):
                w = ker.w[l][k]
                s += ker.cg[l][k] @ diag_in_basis(w, g_k[k]).real
            new_lam.append(1.0 / (1.0 - s))
        new_phi = []
        for k in range(d.K):
            acc = np.eye(d.m_k[k], dtype=complex)
            for l in range(d.L):
                pi = ker.cg[l][k].T @ new_lam[l] / x
                acc += (ker.w[l][k] * pi) @ ker.wh[l][k]
            new_phi.append(herm(acc))
        new_g_k = [-hpd_inverse(x * p, "phi") for p in new_phi]
        if cfg.damping:
            a = cfg.damping
            new_lam = [(1 - a) * n + a * o for n, o in zip(new_lam, lam)]
            new_g_k = [(1 - a) * n + a * o for n, o in zip(new_g_k, g_k)]
        residual = max(
            max(np.max(np.abs(n - o)) for n, o in zip(new_lam, lam)),
            max(np.max(np.abs(n - o)) for n, o in zip(new_g_k, g_k)),
            max(np.max(np.abs(n - o)) for n, o in zip(new_phi, phi)),
        )
        lam, g_k, phi = new_lam, new_g_k, new_phi
        if residual <= cfg.tol:
            return ReducedState(x, lam, g_k, phi, it, float(residual))
    raise NoConvergence(cfg.max_iters, float(residual), ReducedState(
        x, lam, g_k, phi, cfg.max_iters, float(residual)))


def solve_l1_inversion_free(
    model: ChannelModel, x: float = 1.0, cfg: SolverConfig = SolverConfig()
) -> ReducedState:
    """Scalar iteration for one antenna set, shared receive basis, zero mean
    and Q = I.

    lambda_tilde_i = 1 / (1 - sum_k c_k [G_k lambda_k]_i)
    lambda_k,j     = 1 / (-x - c_k [G_k^T lambda_tilde]_j)
    with c_k = P_k / M_k.  Depends on the coupling matrices only.
    """
    _check_x(x)
    d = model.dims
    if d.L != 1:
        raise PreconditionViolated("inversion-free iteration needs L = 1")
    _require_rayleigh(model)
    _require_common_u(model)
    cg = [model.scale(k) * model.links[0][k].g for k in range(d.K)]
    lam_t = np.ones(d.N)
    lam_k = [-np.ones(m) / x for m in d.m_k]
    residual = np.inf
    for it in range(1, cfg.max_iters + 1):
        new_t = 1.0 / (1.0 - sum(cg[k] @ lam_k[k] for k in range(d.K)))
        new_k = [1.0 / (-x - cg[k].T @ new_t) for k in range(d.K)]
        if cfg.damping:
            a = cfg.damping
            new_t = (1 - a) * new_t + a * lam_t
            new_k = [(1 - a) * n + a * o for n, o in zip(new_k, lam_k)]
        residual = max(
            np.max(np.abs(new_t - lam_t)),
            max(np.max(np.abs(n - o)) for n, o in zip(new_k, lam_k)),
        )
        lam_t, lam_k = new_t, new_k
        if residual <= cfg.tol:
            break
    else:
        raise NoConvergence(cfg.max_iters, float(residual))
    v = [model.links[0][k].v for k in range(d.K)]
    g_k = [(vk * lk) @ vk.conj().T for vk, lk in zip(v, lam_k)]
    phi = [
        (vk * (1.0 + cg[k].T @ lam_t / x)) @ vk.conj().T for k, vk in enumerate(v)
    ]
    return ReducedState(x, [lam_t], g_k, phi, it, float(residual), "reduced_l1", lam_k)


def expand_reduced(model: ChannelModel, q, rs: ReducedState) -> DEState:
    """Rebuild the full matrices of a DEState from a reduced solution."""
    d = model.dims
    q = _covariances(model, q)
    us = [model.links[l][0].u for l in range(d.L)]
    g_b = block_diag([-(u * lam) @ u.conj().T / rs.x for u, lam in zip(us, rs.lambda_tilde)])
    phi_t = block_diag([(u / lam) @ u.conj().T for u, lam in zip(us, rs.lambda_tilde)])
    return DEState(rs.x, phi_t, list(rs.phi), g_b, list(rs.g_k), rs.iters, rs.residual, q, rs.form)


def _structured_sigma(model, tol=1e-10):
    """Project each mean onto the shared bases; check the one-nonzero structure."""
    d = model.dims
    u = model.links[0][0].u
    sig = []
    for k in range(d.K):
        link = model.links[0][k]
        s = u.conj().T @ link.hbar @ link.v
        scale = max(1.0, float(np.max(np.abs(s))) if s.size else 0.0)
        s = np.where(np.abs(s) > tol * scale, s, 0.0)
        nz = s != 0
        if np.any(nz.sum(axis=0) > 1) or np.any(nz.sum(axis=1) > 1):
            raise PreconditionViolated(
                f"user {k}: projected mean has more than one nonzero per row/column"
            )
        sig.append(s)
    return u, sig


def solve_structured_rician_l1(
    model: ChannelModel, x: float = 1.0, cfg: SolverConfig = SolverConfig()
) -> DEState:
    """One antenna set, Q = I and Hbar_k = U Sigma_k V_k^H with at most one
    nonzero per row and column of Sigma_k.

    In the rotated bases g_b is diagonal, so its update needs no matrix
    inversion; the user-side resolvent still needs one M x M inversion.
    """
    _check_x(x)
    d = model.dims
    if d.L != 1:
        raise PreconditionViolated("structured Rician iteration needs L = 1")
    _require_common_u(model)
    u, sig = _structured_sigma(model)
    c = [model.scale(k) for k in range(d.K)]
    g = [model.links[0][k].g for k in range(d.K)]
    s = np.hstack([np.sqrt(c[k]) * sig[k] for k in range(d.K)])
    s_abs2 = np.abs(s) ** 2
    gamma = -np.ones(d.N) / x
    psi = [-np.ones(m) / x for m in d.m_k]
    rot = None
    dt = dk = None
    residual = np.inf
    for it in range(1, cfg.max_iters + 1):
        new_dt = 1.0 - sum(c[k] * g[k] @ psi[k] for k in range(d.K))
        new_dk = [1.0 - c[k] * g[k].T @ gamma for k in range(d.K)]
        dall = np.concatenate(new_dk)
        new_gamma = 1.0 / (-x * new_dt - s_abs2 @ (1.0 / dall))
        new_rot = -hpd_inverse(
            np.diag(x * dall) + (s.conj().T / new_dt) @ s, "-g^-1 (rotated)"
        )
        new_psi = [new_rot[d.cols(k), d.cols(k)].diagonal().real for k in range(d.K)]
        if cfg.damping:
            a = cfg.damping
            new_gamma = (1 - a) * new_gamma + a * gamma
            new_psi = [(1 - a) * n + a * o for n, o in zip(new_psi, psi)]
        residual = max(
            np.max(np.abs(new_gamma - gamma)),
            max(np.max(np.abs(n - o)) for n, o in zip(new_psi, psi)),
        )
        if dt is not None:
            residual = max(
                residual,
                np.max(np.abs(new_dt - dt)),
                max(np.max(np.abs(n - o)) for n, o in zip(new_dk, dk)),
            )
        gamma, psi, rot, dt, dk = new_gamma, new_psi, new_rot, new_dt, new_dk
        if residual <= cfg.tol:
            break
    else:
        raise NoConvergence(cfg.max_iters, float(residual))
    v = [model.links[0][k].v for k in range(d.K)]
    uh = u.conj().T
    g_b = herm((u * gamma) @ uh)
    phi_t = herm((u * dt) @ uh)
    phi = [herm((vk * dkk) @ vk.conj().T) for vk, dkk in zip(v, dk)]
    g_k = [herm(v[k] @ rot[d.cols(k), d.cols(k)] @ v[k].conj().T) for k in range(d.K)]
    q = InputCovarianceSet.identity(d)
    return DEState(x, phi_t, phi, g_b, g_k, it, float(residual), q, "structured_rician_l1")


def solve_variance_profile_diag(
    sigma2, hbar=None, x: float = 1.0, cfg: SolverConfig = SolverConfig()
) -> DiagState:
    """Diagonal-valued system for independent entries with E|H~_ij|^2 = sigma2_ij / N.

    psi_b = diag[(-x(1 - G psi_m) - Hbar diag(1/(1 - G^T psi_b)) Hbar^H)^{-1}]
    psi_m = diag[(-x(1 - G^T psi_b) - Hbar^H diag(1/(1 - G psi_m)) Hbar)^{-1}]
    with G = sigma2 / N.
    """
    _check_x(x)
    sigma2 = np.asarray(sigma2, dtype=float)
    n, m = sigma2.shape
    g = sigma2 / n
    hb = np.zeros((n, m), dtype=complex) if hbar is None else np.asarray(hbar, dtype=complex)
    rician = bool(np.any(hb))
    psi_b = -np.ones(n) / x
    psi_m = -np.ones(m) / x
    residual = np.inf
    for it in range(1, cfg.max_iters + 1):
        phi_t = 1.0 - g @ psi_m
        phi = 1.0 - g.T @ psi_b
        if rician:
            new_b = -hpd_inverse(np.diag(x * phi_t) + (hb / phi) @ hb.conj().T).diagonal().real
            new_m = -hpd_inverse(np.diag(x * phi) + (hb.conj().T / phi_t) @ hb).diagonal().real
        else:
            new_b = -1.0 / (x * phi_t)
            new_m = -1.0 / (x * phi)
        if cfg.damping:
            a = cfg.damping
            new_b = (1 - a) * new_b + a * psi_b
            new_m = (1 - a) * new_m + a * psi_m
        residual = max(np.max(np.abs(new_b - psi_b)), np.max(np.abs(new_m - psi_m)))
        psi_b, psi_m = new_b, new_m
        if residual <= cfg.tol:
            return DiagState(x, psi_b, psi_m, it, float(residual))
    raise NoConvergence(cfg.max_iters, float(residual))


def random_init(model: ChannelModel, x: float, rng, spread: float = 1.0):
    """Negative definite starting point -(I + P)/x with a random PSD P."""
    d = model.dims

    def neg(n):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        p = spread * (a @ a.conj().T) / n
        return -(np.eye(n) + p) / x

    return neg(d.N), [neg(m) for m in d.m_k]


__all__ = [
    "DEState",
    "DiagState",
    "ReducedState",
    "SolverConfig",
    "cauchy_transform",
    "expand_reduced",
    "random_init",
    "solve_fixed_point",
    "solve_l1_inversion_free",
    "solve_reduced_common_u",
    "solve_structured_rician_l1",
    "solve_variance_profile_diag",
]
