"""Sum-rate input covariance optimization by iterative waterfilling."""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .channel_model import ChannelModel, InputCovarianceSet
from .de_core import DEState, SolverConfig, _covariances, _Kernel, solve_fixed_point
from .linalg import block_diag, eigh_desc, herm, hpd_inverse
from .shannon import evaluate_state


@dataclass(frozen=True)
class OptConfig:
    inner: SolverConfig = SolverConfig()
    outer_tol: float = 1e-8
    max_outer: int = 100
    wf_tol: float = 1e-8

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.max_outer >= 1 and self.wf_tol > 0):
            raise ValueError("OptConfig fields must be positive")


@dataclass(frozen=True)
class Waterfill:
    """Eigenmode powers ``p`` for gains ``lam`` at water level ``mu``."""

    lam: np.ndarray
    p: np.ndarray
    mu: float
    basis: np.ndarray
    zero_gain: bool = False

    def kkt_residual(self):
        """Largest violation of the waterfilling optimality conditions."""
        if self.zero_gain:
            return 0.0
        res = 0.0
        for lam, p in zip(self.lam, self.p):
            if p > 0:
                res = max(res, abs(lam / (1.0 + lam * p) - 1.0 / self.mu))
            else:
                res = max(res, lam - 1.0 / self.mu, 0.0)
        return res


@dataclass(frozen=True)
class OptResult:
    q_star: InputCovarianceSet
    v_star: float
    trajectory: List[Tuple[int, float]]
    converged: bool
    v_uniform: float
    outer_iters: int
    kkt_residual: float
    zero_rate_users: Tuple[int, ...] = field(default=())
    state: DEState = field(default=None, repr=False)


def gamma_matrix(model: ChannelModel, q, state: DEState, x: float) -> np.ndarray:
    """Gamma = blkdiag(-(P_k/M_k) eta_k(g_b)) + x^{-1} Sbar^H phi_tilde^{-1} Sbar.

    With this Gamma, det(phi + x^{-1} A^H phi_tilde^{-1} A) = det(I + Gamma Q).
    """
    d = model.dims
    # with Q = I the kernel's coupling already carries P_k/M_k
    ker = _Kernel(model, InputCovarianceSet.identity(d))
    blocks = [-e for e in ker.eta_all(ker.blocks(state.g_b))]
    gam = block_diag(blocks)
    sbar = model.sbar()
    if np.any(sbar):
        gam = gam + sbar.conj().T @ hpd_inverse(state.phi_tilde, "phi_tilde") @ sbar / x
    return herm(gam)


def waterfill_powers(lam, budget):
    """Powers max(0, mu - 1/lam_i) summing to ``budget`` for gains sorted
    descending.  Exact: scan the number of active modes."""
    lam = np.asarray(lam, dtype=float)
    pos = lam > 0
    p = np.zeros_like(lam)
    if not np.any(pos):
        return p, np.inf
    inv = 1.0 / lam[pos]
    mu = np.inf
    n_active = 1
    for m in range(inv.size, 0, -1):
        mu_m = (budget + np.sum(inv[:m])) / m
        if mu_m - inv[m - 1] > 0:
            mu, n_active = mu_m, m
            break
    idx = np.flatnonzero(pos)[:n_active]
    p[idx] = mu - 1.0 / lam[idx]
    return p, mu


def waterfill_solution(gamma_k, budget: float, rel_floor: float = 1e-14) -> Waterfill:
    if not budget > 0:
        raise ValueError("budget must be positive")
    lam, w = eigh_desc(gamma_k)
    top = lam[0] if lam.size else 0.0
    if not top > 0:
        return Waterfill(lam, np.full(lam.size, budget / lam.size), np.inf, w, zero_gain=True)
    lam = np.where(lam > rel_floor * top, lam, 0.0)
    p, mu = waterfill_powers(lam, budget)
    return Waterfill(lam, p, mu, w)


def waterfill(gamma_k, budget: float) -> np.ndarray:
    """Maximize log det(I + Gamma_k Q) subject to tr Q <= budget, Q >= 0."""
    sol = waterfill_solution(gamma_k, budget)
    m = sol.lam.size
    if sol.zero_gain or np.ptp(sol.lam) <= 1e-12 * sol.lam[0]:
        return np.eye(m, dtype=complex) * (budget / m)
    return herm((sol.basis * sol.p) @ sol.basis.conj().T)


def user_gamma(gamma, q_list, dims, k):
    """k-th block of (I + Gamma Q_{\\k})^{-1} Gamma."""
    q_wo = [np.zeros_like(qk) if j == k else qk for j, qk in enumerate(q_list)]
    mat = np.eye(dims.M) + gamma @ block_diag(q_wo)
    sol = np.linalg.solve(mat, gamma)
    return herm(sol[dims.cols(k), dims.cols(k)])


def optimize(model: ChannelModel, x: float, cfg: OptConfig = OptConfig(), q0=None) -> OptResult:
    """Alternate the fixed point and per-user waterfilling.

    Each outer sweep solves the fixed point at the current Q, forms Gamma,
    then updates the users one after another (Gauss-Seidel) before the next
    evaluation.  Stops when |dV| <= outer_tol; returns the best Q seen.
    """
    d = model.dims
    q_list = list(_covariances(model, q0).q)
    traj = []
    best = None
    state = None
    last_wf = None
    converged = False
    zero_users = ()
    v_prev = None
    it = 0
    for it in range(cfg.max_outer + 1):
        q_set = InputCovarianceSet(tuple(q_list))
        state = solve_fixed_point(model, q_set, x, cfg.inner, init=state)
        v = evaluate_state(model, state).V
        traj.append((it, v))
        if best is None or v > best[1]:
            best = (q_set, v, state, last_wf)
        if v_prev is not None and abs(v - v_prev) <= cfg.outer_tol:
            converged = True
            break
        if it == cfg.max_outer:
            break
        v_prev = v
        gamma = gamma_matrix(model, q_set, state, x)
        wfs = []
        for k in range(d.K):
            gam_k = user_gamma(gamma, q_list, d, k)
            sol = waterfill_solution(gam_k, float(d.m_k[k]))
            q_list[k] = waterfill(gam_k, float(d.m_k[k]))
            wfs.append(sol)
        last_wf = wfs
        zero_users = tuple(k for k, s in enumerate(wfs) if s.zero_gain)
    q_best, v_best, s_best, wf_best = best
    kkt = max((s.kkt_residual() for s in wf_best), default=0.0) if wf_best else 0.0
    return OptResult(
        q_star=q_best,
        v_star=v_best,
        trajectory=traj,
        converged=converged,
        v_uniform=traj[0][1],
        outer_iters=it,
        kkt_residual=kkt,
        zero_rate_users=zero_users,
        state=s_best,
    )


__all__ = [
    "OptConfig",
    "OptResult",
    "Waterfill",
    "gamma_matrix",
    "optimize",
    "user_gamma",
    "waterfill",
    "waterfill_powers",
    "waterfill_solution",
]
