"""Discretized Hitchin operator, its linearization, and the Dirac factor.

Sections of i su(2) are expanded in the orthonormal basis
E_1 = sigma_3/sqrt(2), E_2 = sigma_x/sqrt(2), E_3 = sigma_y/sqrt(2) with
one complex coefficient triple per (theta mode, tau node).  On
theta-independent backgrounds the operator is block diagonal per mode:

    H_j = D^T D + j^2 - 2 i j K(tau) - K(tau)^2 + (1/2) M(tau)

with K the (real antisymmetric) matrix of ad(a_theta), M the (real
symmetric PSD) matrix of the Higgs quadratic term, and D^T D the 1-d
Dirichlet Laplacian on the capped neck.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .algebra import BASIS_ISU2, adjoint, commutator, frobenius_inner, m_phi_matrix
from .errors import InsufficientSweep, NonConvergence
from .geometry import Field2D, PlumbingConfig, d_tau, fourier_analysis, fourier_synthesis
from .models import ModelParams, model_pair, pair_residuals

BASIS_ORTHO = [b / np.sqrt(2.0) for b in BASIS_ISU2]

OPERATOR_KINDS = ("L_full", "Delta_A", "Dirac_L1L2", "ModeBlock")


@dataclass
class LinearOperatorHandle:
    """Assembled sparse operator in the fixed pointwise basis."""

    kind: str
    matrix: sp.spmatrix
    dtau: float
    modes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")

    @property
    def shape(self):
        return self.matrix.shape

    def symmetry_defect(self) -> float:
        d = self.matrix - self.matrix.getH()
        scale = max(1.0, abs(self.matrix).max())
        return float(abs(d).max() / scale)


def ad_matrix(a: np.ndarray) -> np.ndarray:
    """3x3 matrix of ad(a) on i su(2) in the orthonormal basis (real)."""
    out = np.empty((3, 3))
    for k, ek in enumerate(BASIS_ORTHO):
        img = commutator(a, ek)
        for m, em in enumerate(BASIS_ORTHO):
            out[m, k] = frobenius_inner(em, img)
    return out


def dirichlet_laplacian_1d(length: float, n: int) -> sp.spmatrix:
    """Second-difference Dirichlet Laplacian on n interior nodes."""
    dx = length / (n + 1)
    main = np.full(n, 2.0 / dx**2)
    off = np.full(n - 1, -1.0 / dx**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _background_profiles(a_theta, p, n_tau):
    """Broadcast constant or per-node (2,2) background fields to (n,2,2)."""
    a_theta = np.asarray(a_theta, dtype=complex)
    p = np.asarray(p, dtype=complex)
    if a_theta.ndim == 2:
        a_theta = np.broadcast_to(a_theta, (n_tau, 2, 2))
    if p.ndim == 2:
        p = np.broadcast_to(p, (n_tau, 2, 2))
    return a_theta, p


def mode_block(j: int, a_theta, p, cfg: PlumbingConfig,
               include_higgs: bool = True) -> sp.spmatrix:
    """Complex hermitian block of the linearized operator at theta mode j."""
    n_int = cfg.n_tau - 2
    lap = dirichlet_laplacian_1d(2.0 * cfg.half_length, n_int)
    a_theta, p = _background_profiles(a_theta, p, n_int)
    blocks = []
    for k in range(n_int):
        K = ad_matrix(a_theta[k])
        pot = (j * j) * np.eye(3) - 2j * j * K - K @ K
        if include_higgs:
            pot = pot + 0.5 * m_phi_matrix(p[k])
        blocks.append(pot)
    potential = sp.block_diag(blocks, format="csr").astype(complex)
    # Reorder: laplacian couples nodes within each basis channel.
    lap3 = sp.kron(lap, sp.identity(3), format="csr").astype(complex)
    return lap3 + potential


def assemble_L(a_theta, p, cfg: PlumbingConfig,
               include_higgs: bool = True) -> LinearOperatorHandle:
    """Block-diagonal linearized operator over all theta modes."""
    modes = np.arange(-cfg.n_theta_modes, cfg.n_theta_modes + 1)
    blocks = [mode_block(int(j), a_theta, p, cfg, include_higgs)
              for j in modes]
    mat = sp.block_diag(blocks, format="csc")
    kind = "L_full" if include_higgs else "Delta_A"
    dtau = 2.0 * cfg.half_length / (cfg.n_tau - 1)
    return LinearOperatorHandle(kind=kind, matrix=mat, dtau=dtau, modes=modes,
                                meta={"cfg": cfg})


def section_energy(gamma_modes: np.ndarray, a_theta, p, cfg: PlumbingConfig,
                   include_higgs: bool = True) -> float:
    """Independent quadrature of ||d_A gamma||^2 + ||[p, gamma]||^2.

    gamma_modes has shape (n_modes, n_int, 3) of complex basis coefficients
    on the interior nodes (Dirichlet: zero at the caps).  The derivative
    term uses explicit forward differences of the zero-padded profile, the
    commutator terms act pointwise; nothing is routed through the
    assembled matrices.
    """
    n_modes, n_int, _ = gamma_modes.shape
    dx = 2.0 * cfg.half_length / (n_int + 1)
    modes = np.arange(-(n_modes // 2), n_modes // 2 + 1)
    a_theta, p = _background_profiles(a_theta, p, n_int)
    total = 0.0
    for i, j in enumerate(modes):
        comp = gamma_modes[i]
        g = np.einsum("nk,kab->nab", comp, np.asarray(BASIS_ORTHO))
        padded = np.concatenate([np.zeros((1, 2, 2)), g, np.zeros((1, 2, 2))])
        dgam = (padded[1:] - padded[:-1]) / dx
        total += float(np.sum(np.abs(dgam) ** 2).real) * dx
        ang = 1j * j * g + commutator(a_theta, g)
        total += float(np.sum(np.abs(ang) ** 2).real) * dx
        if include_higgs:
            brk = commutator(p, g)
            total += float(np.sum(np.abs(brk) ** 2).real) * dx
    return total


def quadratic_form(handle: LinearOperatorHandle, gamma_modes: np.ndarray) -> float:
    """<L gamma, gamma> with the discrete L2(dtau) pairing."""
    v = gamma_modes.reshape(-1)
    return float((np.vdot(v, handle.matrix @ v)).real * handle.dtau)


def smallest_eigenvalue(handle: LinearOperatorHandle, tol: float = 1e-8,
                        k: int = 1):
    """Smallest eigenvalue(s) by shift-invert at zero; deterministic."""
    mat = handle.matrix
    n = mat.shape[0]
    if n <= 2500:
        vals = np.linalg.eigvalsh(mat.toarray())
        out = np.sort(vals.real)[:k]
    else:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        try:
            vals = eigsh(mat.tocsc(), k=k, sigma=0.0, which="LM", tol=tol,
                         v0=v0, maxiter=5000, return_eigenvectors=False)
        except Exception as exc:
            raise NonConvergence(f"shift-invert failed: {exc}") from exc
        out = np.sort(vals.real)
    return float(out[0]) if k == 1 else out


@dataclass
class SpectrumReport:
    """Eigenvalue sweep results over a family of neck parameters."""

    R_values: np.ndarray
    T_values: np.ndarray
    lambda1: np.ndarray
    products: np.ndarray
    inverse_norms: np.ndarray
    flat_pass: bool
    no_small_eigenvalues: bool

    @property
    def flatness(self) -> float:
        return float(self.products.max() / self.products.min())


def scaling_study(R_values, params: ModelParams, cap_length: float = 2.0,
                  n_tau: int = 256, n_theta_modes: int = 4,
                  include_higgs: bool = True) -> SpectrumReport:
    """lambda_1(R) * T^2 across a sweep of neck parameters."""
    R_values = np.sort(np.asarray(R_values, dtype=float))[::-1]
    if R_values.size < 4:
        raise InsufficientSweep("need at least 4 values of R")
    if np.log10(R_values.max() / R_values.min()) < 2.0 - 1e-9:
        raise InsufficientSweep("sweep must span at least two decades in R")
    a_val, phi_val = model_pair(params)
    lam = np.empty(R_values.size)
    T = -np.log(R_values)
    for i, R in enumerate(R_values):
        cfg = PlumbingConfig.from_R(float(R), cap_length=cap_length,
                                    n_tau=n_tau, n_theta_modes=n_theta_modes)
        handle = assemble_L(a_val, phi_val, cfg, include_higgs)
        lam[i] = smallest_eigenvalue(handle)
    products = lam * T**2
    flat = bool(products.max() / products.min() <= 1.5)
    no_small = bool(products.min() >= products.max() / 10.0)
    return SpectrumReport(R_values=R_values, T_values=T, lambda1=lam,
                          products=products, inverse_norms=1.0 / lam,
                          flat_pass=flat, no_small_eigenvalues=no_small)


# ---------------------------------------------------------------------------
# Dirac-type factor and its per-mode kernel.
# ---------------------------------------------------------------------------

SV_THRESHOLD = 1e-8


def dirac_sector_matrices(j: int, params: ModelParams):
    """Constant per-mode matrices of the boundary operator's sectors.

    Returns (diagonal sector, off-diagonal sector) as 2x2 complex arrays.
    """
    alpha, C = params.alpha, params.C
    diag_sec = np.array([[-j / 2.0, 0.0], [0.0, j / 2.0]], dtype=complex)
    off_sec = np.array([[-j / 2.0 + 2.0 * alpha, -2.0 * np.conj(C)],
                        [-2.0 * C, j / 2.0 - 2.0 * alpha]], dtype=complex)
    return diag_sec, off_sec


def dirac_mode_kernel(j: int, params: ModelParams) -> int:
    """Complex kernel dimension of the mode-j boundary operator (via SVD)."""
    total = 0
    for mat in dirac_sector_matrices(j, params):
        s = np.linalg.svd(mat, compute_uv=False)
        scale = max(s.max(), 1.0)
        total += int(np.sum(s < SV_THRESHOLD * scale))
    return total


def assemble_dirac(params: ModelParams, cfg: PlumbingConfig) -> LinearOperatorHandle:
    """First-order operator d/dtau - D_j per mode, Dirichlet caps.

    Assembled as a tall block (forward differences on the zero-padded
    profile) stacked over modes; singular values follow from the normal
    operator.
    """
    modes = np.arange(-cfg.n_theta_modes, cfg.n_theta_modes + 1)
    n_int = cfg.n_tau - 2
    dx = 2.0 * cfg.half_length / (n_int + 1)
    rows = []
    for j in modes:
        diag_sec, off_sec = dirac_sector_matrices(int(j), params)
        D = sp.block_diag([diag_sec, off_sec]).tocsr()
        grad = sp.diags([np.full(n_int, 1.0 / dx)], [0],
                        shape=(n_int + 1, n_int), format="csr") \
            + sp.diags([np.full(n_int, -1.0 / dx)], [-1],
                       shape=(n_int + 1, n_int), format="csr")
        block = sp.kron(grad, sp.identity(4), format="csr").astype(complex) \
            - sp.kron(sp.vstack([sp.identity(n_int, format="csr"),
                                 sp.csr_matrix((1, n_int))]),
                      D, format="csr")
        rows.append(block)
    mat = sp.block_diag(rows, format="csc")
    return LinearOperatorHandle(kind="Dirac_L1L2", matrix=mat, dtau=dx,
                                modes=modes, meta={"cfg": cfg})


def dirac_smallest_singular_value(handle: LinearOperatorHandle) -> float:
    """sigma_min via the smallest eigenvalue of the normal operator."""
    normal = (handle.matrix.getH() @ handle.matrix).tocsc()
    nh = LinearOperatorHandle(kind="Dirac_L1L2", matrix=normal,
                              dtau=handle.dtau, modes=handle.modes)
    lam = smallest_eigenvalue(nh)
    return float(np.sqrt(max(lam, 0.0)))


# ---------------------------------------------------------------------------
# Full nonlinear residual on 2-d fields.
# ---------------------------------------------------------------------------

def hitchin_residual(a: Field2D, phi: Field2D):
    """Residual fields of both equations for a (radial-gauge) pair.

    The connection is given by its d theta coefficient (a_tau = 0 in
    radial gauge); derivatives are 4th-order in tau and spectral in theta.
    Returns (first_eq, second_eq) as Field2D plus a norms dict.
    """
    modes = a.grid.theta_modes
    dtau = a.grid.dtau
    a_vals = fourier_synthesis(a.coefficients, modes)
    p_vals = fourier_synthesis(phi.coefficients, modes)
    da_coeff = d_tau(a.coefficients, dtau, axis=1, order=4)
    dp_coeff = d_tau(phi.coefficients, dtau, axis=1, order=4)
    da_vals = fourier_synthesis(da_coeff, modes)
    dp_vals = fourier_synthesis(dp_coeff, modes)
    jfac = (1j * modes)[:, None, None, None]
    dp_theta = fourier_synthesis(jfac * phi.coefficients, modes)
    zero = np.zeros_like(a_vals)
    e1, e2 = pair_residuals(zero, a_vals, p_vals, da_vals, dp_vals,
                            da_tau_dtheta=zero, dp_dtheta=dp_theta)
    w = a.grid.quadrature_weights
    norms = {
        "first_sup": float(np.max(np.abs(e1[:, 2:-2]))),
        "second_sup": float(np.max(np.abs(e2[:, 2:-2]))),
        "first_l2": float(np.sqrt(np.sum(np.abs(e1) ** 2 * w[None, :, None, None])
                                  * 2 * np.pi / e1.shape[0])),
        "second_l2": float(np.sqrt(np.sum(np.abs(e2) ** 2 * w[None, :, None, None])
                                   * 2 * np.pi / e2.shape[0])),
    }
    first = Field2D(fourier_analysis(e1, modes), "scalar_section", a.grid)
    second = Field2D(fourier_analysis(e2, modes), "scalar_section", a.grid)
    return first, second, norms
