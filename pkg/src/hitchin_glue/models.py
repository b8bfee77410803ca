"""Singular model solutions, their gluing, and the explicit exact family.

Global frame conventions on the neck (see geometry module): the Higgs field
is stored by its coefficient p on d zeta = d tau + i d theta (equal to dz/z
on the plus side), the connection by its coefficient on d theta.  With these
conventions the first equation of the self-duality system reads

    d a_theta / d tau - d a_tau / d theta + [a_tau, a_theta]
        - (i/2) [p, p^*] = 0

and the second

    (d/d tau + i d/d theta) p / 2 + [(a_tau + i a_theta)/2, p] = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import adjoint, commutator, frobenius_norm
from .errors import MatchingViolation
from .geometry import Field2D, PlumbingConfig, SpectralGrid, fourier_analysis, fourier_synthesis, make_grid

SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# Fixed unitary frame change making the exact family asymptotically diagonal.
U_FRAME = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)

MATCH_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Parameters (alpha, C) of a diagonal model solution."""

    alpha: float
    C: complex
    side: str = "plus"
    node: int = 0

    def __post_init__(self):
        if self.C == 0:
            raise ValueError("model parameter C must be nonzero")
        if self.side not in ("plus", "minus"):
            raise ValueError("side must be 'plus' or 'minus'")
        if self.side == "plus" and not self.alpha > 0:
            raise ValueError("alpha must be positive on the plus side")


def model_pair(params: ModelParams, point=(0.0, 0.0)):
    """Values (A per d theta, Phi per dz/z) of the model solution.

    Both are constant on the neck; the point argument is accepted for
    interface symmetry with the exact-family evaluator.
    """
    del point
    a_val = 2j * params.alpha * SIGMA3
    phi_val = params.C * SIGMA3
    return a_val, phi_val


def glue_models(plus: ModelParams, minus: ModelParams,
                cfg: PlumbingConfig) -> tuple[Field2D, Field2D]:
    """Glue two model solutions across the neck.

    Requires the matching conditions alpha_- = -alpha_+ and C_- = -C_+;
    in the global frame (dw/w = -d zeta on the minus side) the glued fields
    are then constant, so the seam jump vanishes identically.
    """
    scale = max(1.0, abs(plus.alpha), abs(plus.C))
    if abs(minus.alpha + plus.alpha) > MATCH_TOL * scale or \
            abs(minus.C + plus.C) > MATCH_TOL * scale:
        raise MatchingViolation(
            f"matching conditions violated: plus=({plus.alpha}, {plus.C}), "
            f"minus=({minus.alpha}, {minus.C})")
    grid = make_grid(cfg)
    a_val, phi_val = model_pair(plus)
    a = np.zeros((grid.n_modes, grid.n_tau, 2, 2), dtype=complex)
    p = np.zeros_like(a)
    mode0 = grid.n_modes // 2
    a[mode0] = a_val
    p[mode0] = phi_val
    return (Field2D(a, "connection_dtheta", grid),
            Field2D(p, "higgs_dz_over_z", grid))


@dataclass(frozen=True)
class WolfFamilyParams:
    """Parameter of the explicit exact family on the punctured disk."""

    ell: float

    def __post_init__(self):
        if not 0.0 < self.ell < 1.0:
            raise ValueError("need 0 < ell < 1")

    @property
    def B0(self) -> float:
        return (1.0 - self.ell) / (1.0 + self.ell) * np.exp(2.0 * self.ell)

    @property
    def model(self) -> ModelParams:
        return ModelParams(alpha=0.0, C=self.ell / 2j, side="minus")


def wolf_scalars(params: WolfFamilyParams, x: np.ndarray) -> dict:
    """Closed-form ingredients at log-radius x = log|zeta|, with derivatives.

    Returns B, s = sqrt(B), h, m = (ell^2/4) h, the connection coefficient
    c (on d zeta/zeta - conj), and the x-derivatives h_x, m_x, c_x.
    """
    ell = params.ell
    x = np.asarray(x, dtype=float)
    B = params.B0 * np.exp(2.0 * ell * x)
    if np.any(B >= 1.0):
        raise ValueError("outside the domain of validity (B >= 1)")
    s = np.sqrt(B)
    h = (2.0 / ell) * (1.0 - s) / (1.0 + s)
    m = (ell * ell / 4.0) * h
    c = -(ell / 2.0) * s / (1.0 - B)
    h_x = -4.0 * s / (1.0 + s) ** 2
    m_x = (ell * ell / 4.0) * h_x
    c_x = -(ell * ell / 2.0) * s * (1.0 + B) / (1.0 - B) ** 2
    return {"B": B, "s": s, "h": h, "m": m, "c": c,
            "h_x": h_x, "m_x": m_x, "c_x": c_x}


def wolf_pair(params: WolfFamilyParams, zeta: complex):
    """Values (A per d theta, Phi per d zeta/zeta) of the exact family."""
    r = abs(zeta)
    if not 0.0 < r < 1.0:
        raise ValueError("need 0 < |zeta| < 1")
    sc = wolf_scalars(params, np.log(r))
    a_val = 2j * sc["c"] * SIGMA3
    M = np.array([[0.0, sc["m"]], [1.0 / sc["h"], 0.0]], dtype=complex)
    phi_val = -1j * M
    return a_val, phi_val


def wolf_cylinder_fields(params: WolfFamilyParams, x: np.ndarray) -> dict:
    """Fields and analytic x-derivatives of the exact family on a log grid.

    Arrays have shape (n, 2, 2): a_theta, p and their derivatives; a_tau = 0.
    """
    sc = wolf_scalars(params, x)
    n = np.asarray(x).size
    zero = np.zeros((n, 2, 2), dtype=complex)
    a_theta = 2j * sc["c"][:, None, None] * SIGMA3
    da_theta = 2j * sc["c_x"][:, None, None] * SIGMA3
    p = np.zeros((n, 2, 2), dtype=complex)
    p[:, 0, 1] = -1j * sc["m"]
    p[:, 1, 0] = -1j / sc["h"]
    dp = np.zeros_like(p)
    dp[:, 0, 1] = -1j * sc["m_x"]
    dp[:, 1, 0] = 1j * sc["h_x"] / sc["h"] ** 2
    return {"a_tau": zero, "a_theta": a_theta, "p": p,
            "da_theta": da_theta, "dp": dp}


def pair_residuals(a_tau, a_theta, p, da_theta_dx, dp_dx,
                   da_tau_dtheta=None, dp_dtheta=None, da_theta_mixed=None):
    """Pointwise residuals of both equations for theta-independent input.

    da_theta_dx and dp_dx are the longitudinal derivatives (analytic or
    finite-difference); the optional theta-derivative arrays default to 0.
    """
    if da_tau_dtheta is None:
        da_tau_dtheta = np.zeros_like(a_theta)
    if dp_dtheta is None:
        dp_dtheta = np.zeros_like(p)
    del da_theta_mixed
    e1 = (da_theta_dx - da_tau_dtheta + commutator(a_tau, a_theta)
          - 0.5j * commutator(p, adjoint(p)))
    e2 = (0.5 * (dp_dx + 1j * dp_dtheta)
          + commutator(0.5 * (a_tau + 1j * a_theta), p))
    return e1, e2


def wolf_residual(params: WolfFamilyParams, x: np.ndarray):
    """Residuals of the exact family using analytic radial derivatives."""
    f = wolf_cylinder_fields(params, x)
    return pair_residuals(f["a_tau"], f["a_theta"], f["p"],
                          f["da_theta"], f["dp"])


def wolf_higgs_model_distance(params: WolfFamilyParams, r: np.ndarray) -> np.ndarray:
    """Frobenius distance of the U-frame Higgs value to the model value."""
    r = np.asarray(r, dtype=float)
    f = wolf_cylinder_fields(params, np.log(r))
    p_u = U_FRAME @ f["p"] @ adjoint(U_FRAME)
    p_mod = -1j * (params.ell / 2.0) * SIGMA3
    return frobenius_norm(p_u - p_mod)


def det_higgs(phi: Field2D) -> Field2D:
    """Pointwise determinant of a Higgs field as a scalar Field2D."""
    if phi.component_tag != "higgs_dz_over_z":
        raise ValueError("det_higgs expects a higgs_dz_over_z field")
    modes = np.arange(-(phi.coefficients.shape[0] // 2),
                      phi.coefficients.shape[0] // 2 + 1)
    values = fourier_synthesis(phi.coefficients, modes)
    det = (values[..., 0, 0] * values[..., 1, 1]
           - values[..., 0, 1] * values[..., 1, 0])
    coeffs = fourier_analysis(det, modes)
    return Field2D(coeffs, "scalar_section", phi.grid)
