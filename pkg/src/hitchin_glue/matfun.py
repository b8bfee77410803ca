"""Analytic functions of hermitian 2x2 matrices and their derivatives.

Derivatives use the Daleckii-Krein formula: if X = V diag(lam) V^* and
f[a, b] denotes the divided difference of f, then the derivative of f(X)
along dX is V (f[lam_i, lam_j] o (V^* dX V)) V^*.  Everything is
vectorized over leading axes.
"""

from __future__ import annotations

import numpy as np


def _divided_difference(f, fprime, lam_i, lam_j):
    diff = lam_i - lam_j
    near = np.abs(diff) < 1e-9 * (1.0 + np.abs(lam_i) + np.abs(lam_j))
    mid = 0.5 * (lam_i + lam_j)
    safe = np.where(near, 1.0, diff)
    return np.where(near, fprime(mid), (f(lam_i) - f(lam_j)) / safe)


def herm_fun(X: np.ndarray, f) -> np.ndarray:
    """f applied to a hermitian matrix via eigendecomposition."""
    lam, V = np.linalg.eigh(X)
    inner = np.einsum("...k,...ik,...jk->...ij", f(lam), V, np.conj(V))
    return inner


def herm_fun_with_derivative(X: np.ndarray, dX: np.ndarray, f, fprime):
    """Return (f(X), d f(X)[dX]) for hermitian X and hermitian dX."""
    lam, V = np.linalg.eigh(X)
    FX = np.einsum("...k,...ik,...jk->...ij", f(lam), V, np.conj(V))
    dX_eig = np.einsum("...ki,...kl,...lj->...ij", np.conj(V), dX, V)
    dd = _divided_difference(f, fprime, lam[..., :, None], lam[..., None, :])
    dF_eig = dd * dX_eig
    dF = np.einsum("...ik,...kl,...jl->...ij", V, dF_eig, np.conj(V))
    return FX, dF


def herm_exp(X, dX=None):
    if dX is None:
        return herm_fun(X, np.exp)
    return herm_fun_with_derivative(X, dX, np.exp, np.exp)


def spd_log(X, dX=None):
    if dX is None:
        return herm_fun(X, np.log)
    return herm_fun_with_derivative(X, dX, np.log, lambda x: 1.0 / x)
