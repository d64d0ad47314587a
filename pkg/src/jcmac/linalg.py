"""Small Hermitian linear-algebra helpers used across the package."""

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import NonHermitianLogDet, NotPSD, SingularIteration

RCOND_MIN = 1e-14
PSD_TOL = 1e-10
SQRT_CLAMP = 1e-12


def herm(a):
    """Hermitian part (A + A^H) / 2."""
    return 0.5 * (a + a.conj().T)


def fix_phase(vecs):
    """Rotate each column so its first non-negligible entry is real positive.

    Makes eigenvector and QR outputs reproducible across LAPACK builds.
    """
    vecs = np.array(vecs, dtype=complex, copy=True)
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        scale = np.max(np.abs(col))
        if scale == 0.0:
            continue
        idx = np.flatnonzero(np.abs(col) > 1e-8 * scale)[0]
        vecs[:, j] = col * (abs(col[idx]) / col[idx])
    return vecs


def eigh_desc(a):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending,
    eigenvector phases fixed by :func:`fix_phase`."""
    w, v = np.linalg.eigh(herm(a))
    order = np.argsort(w)[::-1]
    return w[order], fix_phase(v[:, order])


def random_unitary(n, rng):
    """Orthonormalize a complex Gaussian matrix (QR), then fix column phases."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, _ = np.linalg.qr(z)
    return fix_phase(q)


def psd_sqrt(q, tol=PSD_TOL):
    """Hermitian PSD square root; eigenvalues below SQRT_CLAMP are set to 0."""
    w, v = np.linalg.eigh(herm(np.asarray(q, dtype=complex)))
    if w.size and w.min() < -tol:
        raise NotPSD(f"matrix has eigenvalue {w.min():.3e} < -{tol:g}")
    w = np.where(w < SQRT_CLAMP, 0.0, w)
    return herm((v * np.sqrt(w)) @ v.conj().T)


def hpd_inverse(a, what="matrix"):
    """Inverse of a Hermitian positive definite matrix via Cholesky.

    Raises SingularIteration if the factorization fails or the reciprocal
    condition estimate drops below RCOND_MIN.
    """
    a = herm(np.asarray(a, dtype=complex))
    n = a.shape[0]
    if n == 0:
        return a.copy()
    anorm = np.max(np.sum(np.abs(a), axis=0))
    c, info = lapack.zpotrf(a, lower=True)
    if info != 0:
        raise SingularIteration(f"{what} is not positive definite (potrf info={info})")
    rcond, info = lapack.zpocon(c, anorm, uplo="L")
    if info != 0 or rcond < RCOND_MIN:
        raise SingularIteration(f"{what} is ill-conditioned (rcond={rcond:.3e})")
    inv, info = lapack.zpotri(c, lower=True)
    if info != 0:
        raise SingularIteration(f"{what}: potri failed (info={info})")
    # potri fills the lower triangle; the upper one is zero from potrf
    full = inv + inv.conj().T
    np.fill_diagonal(full, np.real(np.diagonal(inv)))
    return full


def logdet_hpd(a, min_eig=1e-14, skew_tol=1e-8):
    """log det of a matrix that should be Hermitian positive definite.

    Uses eigenvalues of the Hermitian part; the skew part bounds the
    imaginary parts of the eigenvalues, so it is checked against skew_tol.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape[0] == 0:
        return 0.0
    skew = 0.5 * (a - a.conj().T)
    # Frobenius norms bound the spectral ones and avoid an SVD
    if skew.size and np.linalg.norm(skew) > skew_tol * max(1.0, np.linalg.norm(a)):
        raise NonHermitianLogDet("log-det argument is not Hermitian")
    w = np.linalg.eigvalsh(herm(a))
    if w.min() <= min_eig:
        raise NonHermitianLogDet(f"log-det argument not positive definite (min eig {w.min():.3e})")
    return float(np.sum(np.log(w)))


def diag_in_basis(b, c):
    """diag(b^H c b) without forming the full product."""
    return np.sum(b.conj() * (c @ b), axis=0)


def block_diag(blocks):
    return sla.block_diag(*blocks) if blocks else np.zeros((0, 0))


def is_unitary(u, tol=1e-10):
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.max(
        np.abs(u.conj().T @ u - np.eye(u.shape[0]))
    ) <= tol
