"""Pointwise 2x2 matrix algebra for sl(2,C), su(2) and i*su(2).

All matrices are numpy arrays of shape (..., 2, 2); every function is
vectorized over leading axes.  The fixed ordered basis of i*su(2) used for
3x3 real matrix representations is

    E1 = diag(1, -1),   E2 = [[0, 1], [1, 0]],   E3 = [[0, -i], [i, 0]].
"""

from __future__ import annotations

import numpy as np

TRACE_TOL = 1e-12
HERM_TOL = 1e-12

# Relative singular-value threshold for kernel detection.
SV_THRESHOLD = 1e-8

BASIS_ISU2 = np.array(
    [
        [[1.0, 0.0], [0.0, -1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
    ],
    dtype=complex,
)

IDENTITY2 = np.eye(2, dtype=complex)


def as_sl2(m) -> np.ndarray:
    """Validate and return a trace-free complex matrix array."""
    m = np.asarray(m, dtype=complex)
    if m.shape[-2:] != (2, 2):
        raise ValueError(f"expected trailing shape (2, 2), got {m.shape}")
    tr = np.abs(m[..., 0, 0] + m[..., 1, 1])
    scale = 1.0 + np.abs(m).max(axis=(-2, -1))
    if np.any(tr > TRACE_TOL * scale):
        raise ValueError("matrix is not trace-free within 1e-12")
    return m


def as_isu2(m) -> np.ndarray:
    """Validate and return a hermitian trace-free matrix array."""
    m = as_sl2(m)
    herm_defect = np.abs(m - np.conj(np.swapaxes(m, -1, -2))).max(axis=(-2, -1))
    scale = 1.0 + np.abs(m).max(axis=(-2, -1))
    if np.any(herm_defect > HERM_TOL * scale):
        raise ValueError("matrix is not hermitian within 1e-12")
    return m


def adjoint(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the trailing two axes."""
    return np.conj(np.swapaxes(np.asarray(m), -1, -2))


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def frobenius_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Real inner product <x, y> = Re tr(x y^*)."""
    return np.real(np.einsum("...ij,...ij->...", x, np.conj(y)))


def frobenius_norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("...ij,...ij->...", x, np.conj(x)).real)


def m_phi_apply(phi: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """The algebraic operator M_phi gamma = [phi*,[phi,g]] + [phi,[phi*,g]]."""
    phi_star = adjoint(phi)
    return commutator(phi_star, commutator(phi, gamma)) + commutator(
        phi, commutator(phi_star, gamma)
    )


def isu2_components(gamma: np.ndarray) -> np.ndarray:
    """Real coordinates of a hermitian trace-free matrix in BASIS_ISU2.

    The basis is orthogonal with <E_k, E_k> = 2, so the coordinates are
    Re tr(gamma E_k)/2; output shape is (..., 3).
    """
    comps = np.einsum("...ij,kji->...k", np.asarray(gamma, dtype=complex), BASIS_ISU2)
    return np.real(comps) / 2.0


def isu2_from_components(c: np.ndarray) -> np.ndarray:
    """Inverse of isu2_components."""
    return np.einsum("...k,kij->...ij", np.asarray(c, dtype=float), BASIS_ISU2)


def m_phi_matrix(phi: np.ndarray) -> np.ndarray:
    """3x3 real matrix of M_phi in the fixed i*su(2) basis."""
    images = m_phi_apply(phi, BASIS_ISU2)
    # Column k holds the coordinates of M_phi E_k.
    return np.stack([isu2_components(images[k]) for k in range(3)], axis=-1)


def m_phi_kernel_dim(phi: np.ndarray) -> int:
    """Kernel dimension of M_phi on i*su(2): 0, 1 or 3."""
    mat = m_phi_matrix(as_sl2(phi))
    svals = np.linalg.svd(mat, compute_uv=False)
    top = svals.max()
    if top == 0.0:
        return 3
    return int(np.sum(svals < SV_THRESHOLD * top))


def mat_exp(gamma: np.ndarray) -> np.ndarray:
    """Exponential of a trace-free 2x2 matrix, vectorized.

    Uses exp(M) = cosh(s) I + (sinh(s)/s) M with s^2 = -det M, which is
    exact for trace-free matrices.
    """
    gamma = np.asarray(gamma, dtype=complex)
    det = gamma[..., 0, 0] * gamma[..., 1, 1] - gamma[..., 0, 1] * gamma[..., 1, 0]
    s = np.sqrt(-det + 0j)
    cosh_s = np.cosh(s)
    # sinh(s)/s with a series fallback near s = 0.
    small = np.abs(s) < 1e-6
    s_safe = np.where(small, 1.0, s)
    sinhc = np.where(small, 1.0 + s * s / 6.0, np.sinh(s_safe) / s_safe)
    return (
        cosh_s[..., None, None] * IDENTITY2
        + sinhc[..., None, None] * gamma
    )
