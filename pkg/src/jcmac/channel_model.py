"""Jointly correlated Rician MIMO-MAC channel statistics.

A link between antenna set ``l`` and user ``k`` is described by its mean
``hbar`` (N_l x M_k), receive/transmit eigenbases ``u`` and ``v`` and the
coupling matrix ``g = m * m`` (entrywise variances in the eigenbases).  The
random part of the link is ``u @ (sqrt(g) * W) @ v^H`` with ``W`` i.i.d.
CN(0, 1).
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, NotPSD, ZeroEnergyUser
from .linalg import PSD_TOL, diag_in_basis, eigh_desc, herm, is_unitary, psd_sqrt, random_unitary


@dataclass(frozen=True)
class Dimensions:
    n_l: Tuple[int, ...]
    m_k: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "n_l", tuple(int(n) for n in self.n_l))
        object.__setattr__(self, "m_k", tuple(int(m) for m in self.m_k))
        if not self.n_l or not self.m_k:
            raise DimensionMismatch("need at least one antenna set and one user")
        if min(self.n_l) < 1 or min(self.m_k) < 1:
            raise DimensionMismatch("antenna counts must be >= 1")

    @property
    def L(self):
        return len(self.n_l)

    @property
    def K(self):
        return len(self.m_k)

    @property
    def N(self):
        return sum(self.n_l)

    @property
    def M(self):
        return sum(self.m_k)

    def rows(self, l):
        start = sum(self.n_l[:l])
        return slice(start, start + self.n_l[l])

    def cols(self, k):
        start = sum(self.m_k[:k])
        return slice(start, start + self.m_k[k])


@dataclass(frozen=True)
class LinkStatistics:
    hbar: np.ndarray
    u: np.ndarray
    v: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        hbar = np.array(self.hbar, dtype=complex)
        u = np.array(self.u, dtype=complex)
        v = np.array(self.v, dtype=complex)
        g = np.array(self.g, dtype=float)
        n, m = g.shape
        if hbar.shape != (n, m) or u.shape != (n, n) or v.shape != (m, m):
            raise DimensionMismatch(
                f"inconsistent link shapes hbar{hbar.shape} u{u.shape} v{v.shape} g{g.shape}"
            )
        for name, arr in (("hbar", hbar), ("u", u), ("v", v), ("g", g)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def energy(self):
        """tr(hbar hbar^H) + sum(g): expected link energy E tr(H H^H)."""
        return float(np.sum(np.abs(self.hbar) ** 2) + np.sum(self.g))


@dataclass(frozen=True)
class ChannelModel:
    dims: Dimensions
    links: Tuple[Tuple[LinkStatistics, ...], ...]
    powers: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        links = tuple(tuple(row) for row in self.links)
        object.__setattr__(self, "links", links)
        d = self.dims
        if len(links) != d.L or any(len(row) != d.K for row in links):
            raise DimensionMismatch("links must be an L x K grid")
        for l in range(d.L):
            for k in range(d.K):
                if links[l][k].g.shape != (d.n_l[l], d.m_k[k]):
                    raise DimensionMismatch(
                        f"link ({l},{k}) has shape {links[l][k].g.shape}, "
                        f"expected {(d.n_l[l], d.m_k[k])}"
                    )
        powers = tuple(float(p) for p in self.powers) if self.powers else tuple(
            float(m) for m in d.m_k
        )
        if len(powers) != d.K:
            raise DimensionMismatch("need one power per user")
        object.__setattr__(self, "powers", powers)

    def link(self, l, k) -> LinkStatistics:
        return self.links[l][k]

    def scale(self, k):
        """Per-user power factor P_k / M_k."""
        return self.powers[k] / self.dims.m_k[k]

    def hbar_user(self, k):
        """Stacked mean of user k, N x M_k."""
        return np.vstack([self.links[l][k].hbar for l in range(self.dims.L)])

    def hbar_full(self):
        """Unscaled stacked mean [Hbar_1 ... Hbar_K], N x M."""
        return np.hstack([self.hbar_user(k) for k in range(self.dims.K)])

    def sbar(self):
        """Power-scaled mean [sqrt(P_k/M_k) Hbar_k]_k, N x M."""
        return np.hstack(
            [np.sqrt(self.scale(k)) * self.hbar_user(k) for k in range(self.dims.K)]
        )

    @property
    def is_rayleigh(self):
        return all(
            not np.any(self.links[l][k].hbar)
            for l in range(self.dims.L)
            for k in range(self.dims.K)
        )

    def user_energy(self, k):
        return sum(self.links[l][k].energy for l in range(self.dims.L))

    def common_receive_basis(self, tol=1e-10):
        """True when U_l1 = ... = U_lK for every antenna set."""
        return all(
            np.max(np.abs(self.links[l][k].u - self.links[l][0].u)) <= tol
            for l in range(self.dims.L)
            for k in range(self.dims.K)
        )


@dataclass(frozen=True)
class InputCovarianceSet:
    q: Tuple[np.ndarray, ...]

    def __post_init__(self):
        q = tuple(np.array(qk, dtype=complex) for qk in self.q)
        for qk in q:
            if qk.ndim != 2 or qk.shape[0] != qk.shape[1]:
                raise DimensionMismatch("covariances must be square")
            qk.flags.writeable = False
        object.__setattr__(self, "q", q)

    @classmethod
    def identity(cls, dims):
        return cls(tuple(np.eye(m, dtype=complex) for m in dims.m_k))

    def __len__(self):
        return len(self.q)

    def __getitem__(self, k):
        return self.q[k]

    def is_identity(self):
        return all(np.array_equal(qk, np.eye(qk.shape[0])) for qk in self.q)

    def sqrt(self):
        return [psd_sqrt(qk) for qk in self.q]

    def check(self, dims=None):
        """List of invariant violations (empty if valid)."""
        out = []
        if dims is not None and tuple(qk.shape[0] for qk in self.q) != dims.m_k:
            out.append(f"covariance sizes {[qk.shape[0] for qk in self.q]} != M_k {list(dims.m_k)}")
            return out
        for k, qk in enumerate(self.q):
            r = np.max(np.abs(qk - qk.conj().T)) if qk.size else 0.0
            if r > 1e-10:
                out.append(f"Q_{k}: not Hermitian (residual {r:.3e})")
            w = np.linalg.eigvalsh(herm(qk))
            if w.size and w.min() < -1e-10:
                out.append(f"Q_{k}: eigenvalue {w.min():.3e} < 0")
            t = float(np.real(np.trace(qk)))
            if t > qk.shape[0] + 1e-9:
                out.append(f"Q_{k}: trace {t:.12g} exceeds budget {qk.shape[0]}")
        return out


def validate(model: ChannelModel, normalization: bool = True) -> List[str]:
    """Check unitarity, coupling nonnegativity and per-user normalization.

    Returns one message per violation, naming the link and the measured
    residual.  Validation is advisory: the solvers accept unnormalized models.
    Users with zero energy cannot be normalized and are not reported.
    """
    d = model.dims
    out = []
    for l in range(d.L):
        for k in range(d.K):
            link = model.links[l][k]
            for name, mat in (("U", link.u), ("V", link.v)):
                r = np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])))
                if not r <= 1e-10:
                    out.append(f"link ({l},{k}): {name} not unitary (residual {r:.3e})")
            if np.any(link.g < 0) or not np.all(np.isfinite(link.g)):
                out.append(
                    f"link ({l},{k}): G nonnegativity violated (min entry {np.min(link.g):.3e})"
                )
            if not np.all(np.isfinite(link.hbar)):
                out.append(f"link ({l},{k}): Hbar has non-finite entries")
    for k in range(d.K if normalization else 0):
        target = d.N * d.m_k[k] / d.M
        e = model.user_energy(k)
        if e == 0.0:
            continue
        rel = abs(e - target) / target
        if not rel <= 1e-6:
            out.append(
                f"user {k}: normalization violated (energy {e:.12g}, target {target:.12g}, "
                f"relative residual {rel:.3e})"
            )
    for k, p in enumerate(model.powers):
        if not p > 0:
            out.append(f"user {k}: power {p} not positive")
    return out


def normalize(model: ChannelModel) -> ChannelModel:
    """Scale each user's links so that sum_l E tr(H_lk H_lk^H) = N M_k / M.

    One scalar c_k per user multiplies Hbar (and c_k^2 multiplies G), which
    leaves the Rician factor unchanged.
    """
    d = model.dims
    factors = []
    for k in range(d.K):
        e = model.user_energy(k)
        if not e > 0:
            raise ZeroEnergyUser(f"user {k} has zero channel energy")
        factors.append(np.sqrt(d.N * d.m_k[k] / d.M / e))
    links = tuple(
        tuple(
            replace(
                model.links[l][k],
                hbar=model.links[l][k].hbar * factors[k],
                g=model.links[l][k].g * factors[k] ** 2,
            )
            for k in range(d.K)
        )
        for l in range(d.L)
    )
    return replace(model, links=links)


def _check_square(c, n, what):
    c = np.asarray(c, dtype=complex)
    if c.shape != (n, n):
        raise DimensionMismatch(f"{what} must be {n}x{n}, got {c.shape}")
    return c


def eta_tilde(model: ChannelModel, k: int, c) -> np.ndarray:
    """E{H~_k C H~_k^H}: block diagonal N x N, blocks U_lk diag(G_lk d) U_lk^H
    with d = diag(V_lk^H C V_lk)."""
    d = model.dims
    c = _check_square(c, d.m_k[k], "C_k")
    out = np.zeros((d.N, d.N), dtype=complex)
    for l in range(d.L):
        link = model.links[l][k]
        pi = link.g @ diag_in_basis(link.v, c)
        out[d.rows(l), d.rows(l)] = (link.u * pi) @ link.u.conj().T
    return out


def eta(model: ChannelModel, k: int, ct) -> np.ndarray:
    """E{H~_k^H C~ H~_k}: sum_l V_lk diag(G_lk^T d_l) V_lk^H with
    d_l = diag(U_lk^H <C~>_l U_lk)."""
    d = model.dims
    ct = _check_square(ct, d.N, "C~")
    out = np.zeros((d.m_k[k], d.m_k[k]), dtype=complex)
    for l in range(d.L):
        link = model.links[l][k]
        blk = ct[d.rows(l), d.rows(l)]
        pi = link.g.T @ diag_in_basis(link.u, blk)
        out += (link.v * pi) @ link.v.conj().T
    return out


def eta_q_tilde(model: ChannelModel, k: int, q_k, c, q_sqrt=None) -> np.ndarray:
    """(P_k/M_k) eta_tilde(Q_k^{1/2} C Q_k^{1/2})."""
    s = psd_sqrt(q_k) if q_sqrt is None else q_sqrt
    c = _check_square(c, model.dims.m_k[k], "C_k")
    return model.scale(k) * eta_tilde(model, k, s @ c @ s)


def eta_q(model: ChannelModel, k: int, q_k, ct, q_sqrt=None) -> np.ndarray:
    """(P_k/M_k) Q_k^{1/2} eta(C~) Q_k^{1/2}."""
    s = psd_sqrt(q_k) if q_sqrt is None else q_sqrt
    return model.scale(k) * (s @ eta(model, k, ct) @ s)


def from_kronecker(r, t, hbar=None, powers=None) -> ChannelModel:
    """Kronecker links R_lk^{1/2} W T_lk^{1/2} as a jointly correlated model.

    ``r[l][k]`` and ``t[l][k]`` are the receive and transmit correlation
    matrices; the eigenbases become U, V and G_lk = outer(eig(R), eig(T)).
    """
    L, K = len(r), len(r[0])
    n_l = [np.asarray(r[l][0]).shape[0] for l in range(L)]
    m_k = [np.asarray(t[0][k]).shape[0] for k in range(K)]
    dims = Dimensions(n_l, m_k)
    links = []
    for l in range(L):
        row = []
        for k in range(K):
            rl = _check_square(r[l][k], n_l[l], f"R[{l}][{k}]")
            tk = _check_square(t[l][k], m_k[k], f"T[{l}][{k}]")
            wr, u = eigh_desc(rl)
            wt, v = eigh_desc(tk)
            if wr.min() < -PSD_TOL or wt.min() < -PSD_TOL:
                raise NotPSD(f"correlation matrices of link ({l},{k}) are not PSD")
            g = np.outer(np.clip(wr, 0.0, None), np.clip(wt, 0.0, None))
            hb = np.zeros((n_l[l], m_k[k])) if hbar is None else hbar[l][k]
            row.append(LinkStatistics(hb, u, v, g))
        links.append(row)
    return ChannelModel(dims, links, powers or ())


def from_variance_profile(sigma2, hbar=None, power=None) -> ChannelModel:
    """Single-user, single-set model with independent entries,
    E|H~_ij|^2 = sigma2_ij / N."""
    sigma2 = np.asarray(sigma2, dtype=float)
    if sigma2.ndim != 2:
        raise DimensionMismatch("variance profile must be a matrix")
    n, m = sigma2.shape
    if np.any(sigma2 < 0):
        raise ValueError("variance profile must be nonnegative")
    hb = np.zeros((n, m), dtype=complex) if hbar is None else np.asarray(hbar, dtype=complex)
    if hb.shape != (n, m):
        raise DimensionMismatch(f"Hbar shape {hb.shape} != {(n, m)}")
    link = LinkStatistics(hb, np.eye(n), np.eye(m), sigma2 / n)
    return ChannelModel(Dimensions([n], [m]), [[link]], [power] if power else ())


def random_jointly_correlated(
    dims: Dimensions,
    seed: int,
    rician_hbar: bool = False,
    rician_factor: float = 1.0,
    common_u: bool = False,
    powers: Optional[Sequence[float]] = None,
) -> ChannelModel:
    """Randomly generated jointly correlated model.

    U, V are orthonormalized complex Gaussian matrices; the entries of
    M_lk are uniform on [0, 1] and G = M * M; each user is then normalized.
    With ``rician_hbar`` a Gaussian mean is added and scaled so that the
    ratio of mean energy to scattered energy per user equals
    ``rician_factor``.  ``common_u`` shares one U per antenna set.
    """
    rng = np.random.default_rng(seed)
    shared = [random_unitary(n, rng) for n in dims.n_l] if common_u else None
    links = []
    for l in range(dims.L):
        row = []
        for k in range(dims.K):
            n, m = dims.n_l[l], dims.m_k[k]
            u = shared[l] if common_u else random_unitary(n, rng)
            v = random_unitary(m, rng)
            g = rng.uniform(0.0, 1.0, size=(n, m)) ** 2
            hb = np.zeros((n, m), dtype=complex)
            if rician_hbar:
                hb = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
            row.append([hb, u, v, g])
        links.append(row)
    if rician_hbar:
        for k in range(dims.K):
            scattered = sum(np.sum(links[l][k][3]) for l in range(dims.L))
            los = sum(np.sum(np.abs(links[l][k][0]) ** 2) for l in range(dims.L))
            c = np.sqrt(rician_factor * scattered / los)
            for l in range(dims.L):
                links[l][k][0] = links[l][k][0] * c
    model = ChannelModel(
        dims,
        [[LinkStatistics(*links[l][k]) for k in range(dims.K)] for l in range(dims.L)],
        tuple(powers) if powers is not None else (),
    )
    return normalize(model)


def with_bases(model: ChannelModel, u=None, v=None) -> ChannelModel:
    """Copy of ``model`` with U_lk := u[l][k] and/or V_lk := v[l][k]."""
    d = model.dims
    links = tuple(
        tuple(
            replace(
                model.links[l][k],
                u=model.links[l][k].u if u is None else u[l][k],
                v=model.links[l][k].v if v is None else v[l][k],
            )
            for k in range(d.K)
        )
        for l in range(d.L)
    )
    return replace(model, links=links)


def zero_model(dims: Dimensions, powers=None) -> ChannelModel:
    """All-zero channel (G = 0, Hbar = 0, identity bases)."""
    links = [
        [
            LinkStatistics(
                np.zeros((n, m)), np.eye(n), np.eye(m), np.zeros((n, m))
            )
            for m in dims.m_k
        ]
        for n in dims.n_l
    ]
    return ChannelModel(dims, links, powers or ())


def deterministic_model(dims: Dimensions, hbar_full, powers=None) -> ChannelModel:
    """G = 0 model whose stacked mean equals ``hbar_full`` (N x M)."""
    hbar_full = np.asarray(hbar_full, dtype=complex)
    if hbar_full.shape != (dims.N, dims.M):
        raise DimensionMismatch("hbar_full must be N x M")
    links = [
        [
            LinkStatistics(
                hbar_full[dims.rows(l), dims.cols(k)],
                np.eye(dims.n_l[l]),
                np.eye(dims.m_k[k]),
                np.zeros((dims.n_l[l], dims.m_k[k])),
            )
            for k in range(dims.K)
        ]
        for l in range(dims.L)
    ]
    return ChannelModel(dims, links, powers or ())


__all__ = [
    "ChannelModel",
    "Dimensions",
    "InputCovarianceSet",
    "LinkStatistics",
    "deterministic_model",
    "eta",
    "eta_q",
    "eta_q_tilde",
    "eta_tilde",
    "from_kronecker",
    "from_variance_profile",
    "is_unitary",
    "normalize",
    "random_jointly_correlated",
    "validate",
    "with_bases",
    "zero_model",
]
