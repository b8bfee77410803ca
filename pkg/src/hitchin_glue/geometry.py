"""Coordinates, grids and discretized fields on the plumbed cylinder.

The neck is parametrized by a single longitudinal coordinate
tau in [-(T+L), T+L] with T = -log R and cap length L.  The plus side of
the node carries the disk coordinate z with |z| = exp(tau - (T+L)), the
minus side carries w = t/z with |w| = exp(-tau - (T+L)); the seam
|z| = |w| sits at tau = 0.  The flat metric is d tau^2 + d theta^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

COMPONENT_TAGS = ("connection_dtheta", "higgs_dz_over_z", "scalar_section", "two_form_dr_dtheta")


@dataclass(frozen=True)
class PlumbingConfig:
    """Geometry of one plumbed neck."""

    t: complex
    R: float
    cap_length: float = 2.0
    n_tau: int = 256
    n_theta_modes: int = 4

    def __post_init__(self):
        rho = abs(self.t)
        if not 0.0 < rho < 1.0:
            raise ConfigError(f"need 0 < |t| < 1, got |t| = {rho}")
        if not self.R > 2.0 * rho:
            raise ConfigError(f"need R > 2|t|, got R = {self.R}, |t| = {rho}")
        if not 0.0 < self.R < 1.0:
            raise ConfigError(f"need 0 < R < 1, got R = {self.R}")
        if self.cap_length < 0.0:
            raise ConfigError("cap_length must be nonnegative")
        if self.n_tau < 16:
            raise ConfigError("n_tau must be at least 16")
        if self.n_theta_modes < 4:
            raise ConfigError("n_theta_modes must be at least 4")

    @property
    def rho(self) -> float:
        return abs(self.t)

    @property
    def T(self) -> float:
        return -np.log(self.R)

    @property
    def half_length(self) -> float:
        return self.T + self.cap_length

    @classmethod
    def from_R(cls, R: float, cap_length: float = 2.0, n_tau: int = 256,
               n_theta_modes: int = 4) -> "PlumbingConfig":
        """Configuration whose seam radius matches the cap length, t real."""
        t = R * R * np.exp(-2.0 * cap_length)
        return cls(t=t, R=R, cap_length=cap_length, n_tau=n_tau,
                   n_theta_modes=n_theta_modes)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform longitudinal grid with Fourier modes in theta."""

    tau_nodes: np.ndarray
    theta_modes: np.ndarray
    quadrature_weights: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.tau_nodes) <= 0):
            raise ConfigError("tau_nodes must be strictly increasing")
        if np.any(self.quadrature_weights <= 0):
            raise ConfigError("quadrature weights must be positive")

    @property
    def n_tau(self) -> int:
        return self.tau_nodes.size

    @property
    def dtau(self) -> float:
        return float(self.tau_nodes[1] - self.tau_nodes[0])

    @property
    def n_modes(self) -> int:
        return self.theta_modes.size


def make_grid(cfg: PlumbingConfig) -> SpectralGrid:
    """Uniform grid over [-(T+L), T+L] including both endpoints."""
    half = cfg.half_length
    tau = np.linspace(-half, half, cfg.n_tau)
    modes = np.arange(-cfg.n_theta_modes, cfg.n_theta_modes + 1)
    w = np.full(cfg.n_tau, tau[1] - tau[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return SpectralGrid(tau_nodes=tau, theta_modes=modes, quadrature_weights=w)


def local_radius(cfg: PlumbingConfig, tau: np.ndarray) -> np.ndarray:
    """Local disk radius |z| (plus side) or |w| (minus side) at tau."""
    return np.exp(np.abs(tau) - cfg.half_length)


@dataclass
class Field2D:
    """Per-(theta mode, tau node) coefficients of a field on the neck.

    coefficients has shape (n_modes, n_tau, 2, 2) for matrix-valued fields
    or (n_modes, n_tau) for scalar ones.
    """

    coefficients: np.ndarray
    component_tag: str
    grid: SpectralGrid = field(repr=False, default=None)

    def __post_init__(self):
        if self.component_tag not in COMPONENT_TAGS:
            raise ConfigError(f"unknown component tag {self.component_tag!r}")
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.grid is not None:
            expect = (self.grid.n_modes, self.grid.n_tau)
            if self.coefficients.shape[:2] != expect:
                raise ConfigError(
                    f"coefficient array {self.coefficients.shape} does not match "
                    f"grid {expect}")

    @property
    def is_scalar(self) -> bool:
        return self.coefficients.ndim == 2


def coord_z_to_cyl(z: complex) -> tuple[float, float]:
    """Cylinder coordinates (tau, theta) = (-log|z|, -arg z) of a disk point."""
    if z == 0:
        raise ValueError("z = 0 is the node point")
    r = abs(z)
    if not r <= 1.0 + 1e-15:
        raise ValueError("need 0 < |z| <= 1")
    return (-np.log(r), -np.angle(z))


def coord_cyl_to_z(tau: float, theta: float) -> complex:
    return np.exp(-tau) * np.exp(-1j * theta)


def glue_map(z: complex, t: complex) -> complex:
    """The plumbing identification w = t/z."""
    if z == 0:
        raise ValueError("z = 0 is the node point")
    if not abs(t) <= abs(z) * (1 + 1e-12):
        raise ValueError("need |t| <= |z| <= 1")
    return t / z


def theta_collocation(n_modes: int) -> np.ndarray:
    """Collocation angles for modes -N..N (2N+1 points)."""
    npts = 2 * n_modes + 1
    return 2.0 * np.pi * np.arange(npts) / npts


def fourier_synthesis(coeffs: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """Evaluate sum_j c_j exp(i j theta_k) on the collocation grid.

    coeffs has shape (n_modes, ...); returns shape (n_points, ...).
    """
    n = (len(modes) - 1) // 2
    theta = theta_collocation(n)
    phase = np.exp(1j * np.outer(theta, modes))
    return np.tensordot(phase, coeffs, axes=(1, 0))


def fourier_analysis(values: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """Inverse of fourier_synthesis on the matching collocation grid."""
    n = (len(modes) - 1) // 2
    theta = theta_collocation(n)
    phase = np.exp(-1j * np.outer(modes, theta)) / (2 * n + 1)
    return np.tensordot(phase, values, axes=(1, 0))


def d_tau(values: np.ndarray, dtau: float, axis: int = 0, order: int = 2) -> np.ndarray:
    """Longitudinal derivative by centered finite differences.

    Interior nodes use the centered stencil of the requested order (2 or 4);
    nodes near the ends fall back to one-sided second-order stencils.
    """
    v = np.moveaxis(np.asarray(values), axis, 0)
    out = np.empty_like(v, dtype=complex)
    n = v.shape[0]
    if n < 5:
        raise ValueError("need at least 5 nodes")
    if order == 2:
        out[1:-1] = (v[2:] - v[:-2]) / (2 * dtau)
    elif order == 4:
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dtau)
        out[1] = (v[2] - v[0]) / (2 * dtau)
        out[-2] = (v[-1] - v[-3]) / (2 * dtau)
    else:
        raise ValueError("order must be 2 or 4")
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dtau)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dtau)
    return np.moveaxis(out, 0, axis)


def hodge_star_2form(f: Field2D, cfg: PlumbingConfig) -> Field2D:
    """Hodge star of a 2-form coefficient given on dr wedge dtheta.

    With the neck metric, *(dr ^ dtheta) = r; the input coefficient is
    multiplied pointwise by the side-consistent local radius.
    """
    if f.component_tag != "two_form_dr_dtheta":
        raise ConfigError("hodge_star_2form expects a two_form_dr_dtheta field")
    r = local_radius(cfg, f.grid.tau_nodes)
    shape = (1, -1) + (1,) * (f.coefficients.ndim - 2)
    out = f.coefficients * r.reshape(shape)
    return Field2D(out, "scalar_section", f.grid)


def field_to_json(f: Field2D) -> str:
    """Serialize a Field2D to JSON (header plus row-major complex pairs)."""
    flat = f.coefficients.reshape(f.coefficients.shape[0] * f.coefficients.shape[1], -1)
    data = {
        "n_tau": int(f.coefficients.shape[1]),
        "n_theta_modes": int((f.coefficients.shape[0] - 1) // 2),
        "component_tag": f.component_tag,
        "shape": list(f.coefficients.shape),
        "values": [[float(c.real), float(c.imag)] for row in flat for c in row],
    }
    return json.dumps(data)


def field_from_json(text: str, grid: SpectralGrid | None = None) -> Field2D:
    data = json.loads(text)
    pairs = np.asarray(data["values"], dtype=float)
    values = pairs[:, 0] + 1j * pairs[:, 1]
    coeffs = values.reshape(data["shape"])
    return Field2D(coeffs, data["component_tag"], grid)
