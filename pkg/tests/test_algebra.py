"""Pointwise Lie-algebra identities and the quadratic Higgs form."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hitchin_glue.algebra import (BASIS_ISU2, adjoint, as_isu2, as_sl2,
                                  commutator, frobenius_inner, frobenius_norm,
                                  isu2_components, isu2_from_components,
                                  m_phi_apply, m_phi_kernel_dim, m_phi_matrix,
                                  mat_exp)


def random_isu2(rng, n=()):
    c = rng.standard_normal(n + (3,))
    return np.einsum("...k,kab->...ab", c, np.asarray(BASIS_ISU2))


def random_sl2(rng, n=()):
    m = rng.standard_normal(n + (2, 2)) + 1j * rng.standard_normal(n + (2, 2))
    tr = np.trace(m, axis1=-2, axis2=-1)
    m[..., 0, 0] -= tr / 2
    m[..., 1, 1] -= tr / 2
    return m


def test_basis_is_hermitian_traceless():
    for b in BASIS_ISU2:
        assert np.allclose(b, np.conj(b).T)
        assert abs(np.trace(b)) < 1e-15


def test_component_round_trip():
    rng = np.random.default_rng(0)
    gamma = random_isu2(rng, (20,))
    back = isu2_from_components(isu2_components(gamma))
    assert np.max(np.abs(back - gamma)) < 1e-14


def test_quadratic_form_identity():
    rng = np.random.default_rng(1)
    for _ in range(200):
        phi = random_sl2(rng)
        gamma = random_isu2(rng)
        lhs = frobenius_inner(m_phi_apply(phi, gamma), gamma).real
        rhs = 2.0 * frobenius_norm(commutator(phi, gamma)) ** 2
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))


def test_m_phi_matrix_matches_apply():
    rng = np.random.default_rng(2)
    for _ in range(50):
        phi = random_sl2(rng)
        M = m_phi_matrix(phi)
        gamma = random_isu2(rng)
        via_matrix = isu2_from_components(M @ isu2_components(gamma))
        direct = m_phi_apply(phi, gamma)
        assert np.max(np.abs(via_matrix - direct)) < 1e-10
        assert np.max(np.abs(M - np.conj(M).T)) < 1e-12


def test_kernel_dimension_law():
    rng = np.random.default_rng(3)
    # The kernel is the set of hermitian gamma commuting with phi and its
    # adjoint: 3 for phi = 0, 1 for nonzero normal phi, 0 generically.
    for _ in range(50):
        phi = random_sl2(rng)
        if abs(np.linalg.det(phi)) < 1e-6:
            continue
        assert m_phi_kernel_dim(phi) == 0
    diagonal = np.diag([0.3 - 0.2j, -0.3 + 0.2j])
    assert m_phi_kernel_dim(diagonal) == 1
    nilpotent = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    assert m_phi_kernel_dim(nilpotent) == 0
    assert m_phi_kernel_dim(np.zeros((2, 2), dtype=complex)) == 3


def test_mat_exp_unitary_determinant():
    rng = np.random.default_rng(4)
    gamma = random_isu2(rng, (10,))
    g = mat_exp(gamma)
    # Hermitian traceless generator: positive determinant-one factor.
    dets = np.linalg.det(g)
    assert np.max(np.abs(dets - 1.0)) < 1e-12
    herm = np.max(np.abs(g - np.conj(np.swapaxes(g, -1, -2))))
    assert herm < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_commutator_antisymmetry_and_jacobi(seed):
    rng = np.random.default_rng(seed)
    x, y, z = (random_sl2(rng) for _ in range(3))
    assert np.allclose(commutator(x, y), -commutator(y, x))
    jac = (commutator(x, commutator(y, z))
           + commutator(y, commutator(z, x))
           + commutator(z, commutator(x, y)))
    assert np.max(np.abs(jac)) < 1e-10


def test_as_sl2_rejects_trace():
    with pytest.raises(ValueError):
        as_sl2(np.eye(2))


def test_as_isu2_rejects_skew():
    with pytest.raises(ValueError):
        as_isu2(1j * np.asarray(BASIS_ISU2[0]))
