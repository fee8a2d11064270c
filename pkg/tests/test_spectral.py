"""Per-block Perron data, projection coefficients, and path weights."""

import math

import numpy as np
import pytest

import qergodic as qg
from qergodic.errors import AmbiguousRhoClasses
from qergodic.spectral import (
    SpectrumSet,
    path_alpha,
    perron_block,
    projection_coefficient,
    spectrum_set,
    _power_iteration,
)
from qergodic.structure import condense

from conftest import model_of, random_model

S2 = math.sqrt(2.0)


def test_perron_two_by_two_exact_values():
    s = perron_block(np.array([[0.2, 0.1], [0.1, 0.0]]))
    assert abs(s.rho - 0.1 * (1 + S2)) <= 1e-12
    assert np.max(np.abs(s.v - np.array([1 + S2, 1.0]) / (2 + S2))) <= 1e-10
    assert np.max(np.abs(s.u - np.array([(1 + S2) / 2, 0.5]))) <= 1e-10
    assert s.primitive and s.period == 1 and not s.scalar


def test_perron_scalar_block():
    s = perron_block(np.array([[0.75]]))
    assert s.rho == 0.75 and s.scalar
    assert s.v[0] == 1.0 and s.u[0] == 1.0
    assert s.sub_modulus == 0.0


def test_perron_periodic_block():
    s = perron_block(np.array([[0.0, 0.9], [0.9, 0.0]]))
    assert abs(s.rho - 0.9) <= 1e-10
    assert s.period == 2 and not s.primitive
    assert np.allclose(s.v, [0.5, 0.5], atol=1e-10)


def test_eigen_residuals_and_normalization():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = random_model(rng)
        form = condense(m)
        for B in form.diag_blocks:
            s = perron_block(B)
            assert np.max(np.abs(B @ s.v - s.rho * s.v)) <= 1e-10
            assert np.max(np.abs(s.u @ B - s.rho * s.u)) <= 1e-10
            assert abs(s.v.sum() - 1.0) <= 1e-12
            assert abs(float(s.u @ s.v) - 1.0) <= 1e-12
            assert np.all(s.v > 0) and np.all(s.u > 0)
            if s.primitive and not s.scalar:
                assert s.sub_modulus < s.rho


def test_projection_coefficient():
    s = perron_block(np.array([[0.2, 0.1], [0.1, 0.0]]))
    assert abs(projection_coefficient(s, s.v) - 1.0) <= 1e-12
    got = projection_coefficient(s, np.ones(2))
    assert abs(got - (2 + S2) / 2) <= 1e-10
    # the residual x - alpha v is annihilated by u
    x = np.array([0.3, 1.7])
    alpha = projection_coefficient(s, x)
    assert abs(float(s.u @ (x - alpha * s.v))) <= 1e-10
    scalar = perron_block(np.array([[0.5]]))
    assert projection_coefficient(scalar, np.ones(1)) == 1.0


def test_path_alpha_scalar_products():
    m = model_of("triangle_full")
    form = condense(m)
    spectra = spectrum_set(form)
    assert abs(path_alpha(form, spectra, (3, 2, 1)) - 0.1 * 0.1) <= 1e-14
    assert abs(path_alpha(form, spectra, (3, 1)) - 0.2) <= 1e-14
    assert path_alpha(form, spectra, (2,)) == 1.0


def test_path_alpha_nonnegative_and_singleton():
    # with nonnegative connectors and strictly positive eigenvectors, alpha
    # is a product of nonnegative inner products: zero only if a connector
    # vanishes, which would make the path inadmissible in the first place
    B2 = np.array([[0.4, 0.1], [0.1, 0.4]])
    Q = np.zeros((3, 3))
    Q[0, 0] = 0.2
    Q[1:, 1:] = B2
    Q[1, 0] = 0.05
    m = qg.validate(Q, [0.2, 0.4, 0.4])
    form = condense(m)
    spectra = spectrum_set(form)
    sizes = dict(zip(range(1, form.k + 1), form.block_sizes))
    big = [b for b, size in sizes.items() if size == 2][0]
    small = [b for b, size in sizes.items() if size == 1][0]
    assert abs(path_alpha(form, spectra, (big,)) - 2.0) <= 1e-10  # u=(1,1) against ones
    a = path_alpha(form, spectra, (big, small))
    assert a > 0
    # u2 = (1,1), v1 = (1), connector carries 0.05 into the first block row
    assert abs(a - 0.05) <= 1e-10


def test_full_matrix_rho_equals_block_max():
    rng = np.random.default_rng(29)
    for _ in range(10):
        m = random_model(rng)
        form = condense(m)
        spectra = spectrum_set(form)
        lam, _ = _power_iteration(m.Q + np.eye(m.d), tol=1e-13, max_iter=10**6)
        assert abs((lam - 1.0) - spectra.rho_max) <= 1e-8


def test_rho_equality_policy():
    m = model_of("triangle_full")
    spectra = spectrum_set(condense(m))
    assert spectra.rho_equal(1, 2) and spectra.rho_equal(2, 3)
    m2 = model_of("two_state")
    spectra2 = spectrum_set(condense(m2))
    assert not spectra2.rho_equal(1, 2)


def test_scalar_blocks_compare_exactly():
    # literal-entry comparison for scalar blocks: an offset below the relative
    # tolerance still separates them
    eps = 1e-13
    Q = np.diag([0.5, 0.5 + eps])
    m = qg.validate(Q, [0.5, 0.5])
    spectra = spectrum_set(condense(m), rho_eq_tol=1e-9)
    assert not spectra.rho_equal(1, 2)


def test_ambiguous_rho_classes_detected():
    # three 2x2 blocks with roots r, r(1+e), r(1+2e), e just inside the
    # tolerance: adjacent pairs tie but the outer pair does not, so the
    # equality classes are not transitive
    def blk(r):
        return np.array([[r / 2, r / 2], [r / 2, r / 2]])

    e = 6e-10
    Q = np.zeros((6, 6))
    Q[0:2, 0:2] = blk(0.5)
    Q[2:4, 2:4] = blk(0.5 * (1 + e))
    Q[4:6, 4:6] = blk(0.5 * (1 + 2 * e))
    m = qg.validate(Q, np.full(6, 1 / 6))
    with pytest.raises(AmbiguousRhoClasses):
        spectrum_set(condense(m), rho_eq_tol=1e-9)
