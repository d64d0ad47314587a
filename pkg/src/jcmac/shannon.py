"""Deterministic-equivalent Shannon transform and mutual information.

The log-det expressions evaluated here give the total mutual information
in nats; the per-antenna Shannon transform is that value divided by N.
"""

from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelModel
from .de_core import (
    DEState,
    ReducedState,
    SolverConfig,
    _covariances,
    _Kernel,
    expand_reduced,
    solve_fixed_point,
    solve_l1_inversion_free,
    solve_reduced_common_u,
)
from .errors import PreconditionViolated
from .linalg import block_diag, hpd_inverse, logdet_hpd

FORMS = ("general", "general_Q", "reduced_common_u", "reduced_l1")


@dataclass(frozen=True)
class DEReport:
    x: float
    V: float
    I: float
    G: complex
    iters: int
    residual: float
    form_used: str
    discrepancy: float = 0.0

    @property
    def I_bits(self):
        return self.I / np.log(2.0)


def _terms(model, ker, state):
    x = state.x
    a = ker.a
    phi_full = block_diag(state.phi)
    # trace correction evaluated on the M_k side
    etas = ker.eta_all(ker.blocks(state.g_b))
    trace_m = sum(np.trace(e @ g) for e, g in zip(etas, state.g_k)).real
    if ker.rician:
        phi_inv = block_diag([hpd_inverse(p, "phi") for p in state.phi])
        arg_n = state.phi_tilde + a @ phi_inv @ a.conj().T / x
    else:
        arg_n = state.phi_tilde
    v85 = logdet_hpd(arg_n) + sum(logdet_hpd(p) for p in state.phi) - x * trace_m

    eta_t = block_diag(ker.eta_tilde_blocks(state.g_k))
    trace_n = np.trace(eta_t @ state.g_b).real
    if ker.rician:
        arg_m = phi_full + a.conj().T @ hpd_inverse(state.phi_tilde, "phi_tilde") @ a / x
    else:
        arg_m = phi_full
    v86 = logdet_hpd(arg_m) + logdet_hpd(state.phi_tilde) - x * trace_n
    return v85, v86


def evaluate_state(model: ChannelModel, state: DEState) -> DEReport:
    """Shannon transform of a converged state (both log-det forms)."""
    ker = _Kernel(model, _covariances(model, state.q))
    v85, v86 = _terms(model, ker, state)
    form = state.form
    if form == "general" and not ker.q.is_identity():
        form = "general_Q"
    n = model.dims.N
    return DEReport(
        x=state.x,
        V=v85 / n,
        I=v85,
        G=state.cauchy,
        iters=state.iters,
        residual=state.residual,
        form_used=form,
        discrepancy=abs(v85 - v86),
    )


def shannon_transform(model, q=None, x=1.0, cfg=SolverConfig(), init=None) -> DEReport:
    """Solve the fixed point at x and evaluate the mutual information."""
    state = solve_fixed_point(model, q, x, cfg, init=init)
    return evaluate_state(model, state)


def reduced_value(model: ChannelModel, q, rs: ReducedState) -> float:
    """Total mutual information from a reduced (lambda-tilde) solution.

    sum_k log det phi_k + sum log(1/lambda_tilde) + sum (lambda_tilde - 1)
    """
    lam = np.concatenate(rs.lambda_tilde)
    return (
        sum(logdet_hpd(p) for p in rs.phi)
        - float(np.sum(np.log(lam)))
        + float(np.sum(lam - 1.0))
    )


def shannon_transform_reduced(model, q=None, x=1.0, cfg=SolverConfig(), form="auto") -> DEReport:
    """Reduced evaluation for a shared receive eigenbasis and zero mean.

    ``form`` picks the common-eigenbasis iteration (``reduced_common_u``) or
    the L = 1 scalar iteration (``reduced_l1``, requires Q = I); ``auto``
    uses the latter when it applies.
    """
    q = _covariances(model, q)
    if form == "auto":
        form = "reduced_l1" if model.dims.L == 1 and q.is_identity() else "reduced_common_u"
    if form == "reduced_l1":
        if not q.is_identity():
            raise PreconditionViolated("the L = 1 scalar iteration needs Q = I")
        rs = solve_l1_inversion_free(model, x, cfg)
    elif form == "reduced_common_u":
        rs = solve_reduced_common_u(model, q, x, cfg)
    else:
        raise ValueError(f"unknown reduced form {form!r}")
    total = reduced_value(model, q, rs)
    return DEReport(
        x=x,
        V=total / model.dims.N,
        I=total,
        G=rs.cauchy,
        iters=rs.iters,
        residual=rs.residual,
        form_used=rs.form,
    )


def select_form(model: ChannelModel, q=None) -> str:
    """Cheapest form whose preconditions hold."""
    q = _covariances(model, q)
    if model.is_rayleigh and model.common_receive_basis():
        if model.dims.L == 1 and q.is_identity():
            return "reduced_l1"
        return "reduced_common_u"
    return "general"


def evaluate(model, q=None, x=1.0, cfg=SolverConfig(), form="auto") -> DEReport:
    """Dispatch on ``form``: auto, general, reduced (common U) or l1."""
    if form == "auto":
        form = select_form(model, q)
    aliases = {"reduced": "reduced_common_u", "l1": "reduced_l1", "general_Q": "general"}
    form = aliases.get(form, form)
    if form == "general":
        return shannon_transform(model, q, x, cfg)
    return shannon_transform_reduced(model, q, x, cfg, form=form)


def solve_state(model, q=None, x=1.0, cfg=SolverConfig(), form="auto", init=None) -> DEState:
    """Full DEState through whichever solver ``form`` selects."""
    if form == "auto":
        form = select_form(model, q)
    if form in ("reduced", "reduced_common_u"):
        return expand_reduced(model, q, solve_reduced_common_u(model, q, x, cfg))
    if form in ("l1", "reduced_l1"):
        return expand_reduced(model, q, solve_l1_inversion_free(model, x, cfg))
    return solve_fixed_point(model, q, x, cfg, init=init)


@dataclass(frozen=True)
class DerivativeCheck:
    lhs: float
    rhs: float
    rel_err: float


def derivative_check(model, q=None, x=1.0, h=None, cfg=SolverConfig()) -> DerivativeCheck:
    """Compare a central difference of V with -1/x - G(-x).

    The solves at x +/- h start from the converged state at x.
    """
    if h is None:
        h = 1e-4 * x
    if not x > h > 0:
        raise ValueError("need x > h > 0")
    state = solve_fixed_point(model, q, x, cfg)
    up = shannon_transform(model, state.q, x + h, cfg, init=state)
    down = shannon_transform(model, state.q, x - h, cfg, init=state)
    lhs = (up.V - down.V) / (2 * h)
    rhs = float(np.real(-1.0 / x - state.cauchy))
    err = abs(lhs - rhs)
    rel = err / abs(rhs) if rhs != 0 else err
    return DerivativeCheck(lhs, rhs, rel)


__all__ = [
    "DEReport",
    "DerivativeCheck",
    "FORMS",
    "derivative_check",
    "evaluate",
    "evaluate_state",
    "reduced_value",
    "select_form",
    "shannon_transform",
    "shannon_transform_reduced",
    "solve_state",
]
