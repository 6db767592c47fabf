import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscbus.errors import InvalidArgumentError, InvalidDimensionError, NotPositiveDefiniteError
from oscbus.networks import build_chain_hessian, build_momentum_coupled_hessian, build_triangle_hessian
from oscbus.symplectic import (
    QuadraticForm,
    align_to_diagonal_gram,
    check_normal_form_conditions,
    group_degenerate_modes,
    is_symplectic,
    symplectic_form,
    symplectic_spectrum,
    williamson,
)

from conftest import random_pd


def test_symplectic_form_n1():
    assert np.array_equal(symplectic_form(1), [[0, 1], [-1, 0]])


@pytest.mark.parametrize("n", [1, 3, 5])
def test_symplectic_form_identities(n):
    J = symplectic_form(n)
    assert np.array_equal(J @ J, -np.eye(2 * n))
    assert np.array_equal(J.T @ J, np.eye(2 * n))


def test_symplectic_form_rejects_zero():
    with pytest.raises(InvalidDimensionError):
        symplectic_form(0)


@pytest.mark.parametrize(
    "S, expected",
    [(np.eye(4), True), (symplectic_form(1), True), (2 * np.eye(2), False)],
)
def test_is_symplectic_examples(S, expected):
    assert is_symplectic(S, tol=1e-12) is expected


def test_is_symplectic_odd_dimension():
    with pytest.raises(InvalidDimensionError):
        is_symplectic(np.eye(3))


def test_williamson_scalar():
    W = williamson(3 * np.eye(2))
    assert np.allclose(W.spectrum, [3])
    assert np.allclose(W.S, np.eye(2), atol=1e-14)


def test_williamson_diag_oracle():
    a, b = 4.0, 1.0
    W = williamson(np.diag([a, b]))
    assert np.allclose(W.spectrum, [2.0])
    expected = np.diag([(b / a) ** 0.25, (a / b) ** 0.25])
    assert np.allclose(np.abs(W.S), expected, atol=1e-14)
    assert np.allclose(W.S @ np.diag([a, b]) @ W.S.T, 2 * np.eye(2), atol=1e-13)


@pytest.mark.parametrize("M, expected", [(np.diag([4.0, 1.0]), [2.0]), (np.eye(4), [1.0, 1.0])])
def test_symplectic_spectrum_examples(M, expected):
    assert np.allclose(symplectic_spectrum(M), expected, atol=1e-13)


def test_identity_gives_identity():
    assert np.allclose(williamson(np.eye(4)).S, np.eye(4), atol=1e-14)


def test_williamson_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteError) as info:
        williamson(np.diag([1.0, -2.0]))
    assert info.value.eigenvalue == pytest.approx(-2.0)


def test_williamson_rejects_asymmetric():
    with pytest.raises(InvalidArgumentError):
        williamson(np.array([[1.0, 0.5], [0.0, 1.0]]))


def _normal_form_residual(W, M):
    s = W.spectrum
    return np.abs(W.S @ M @ W.S.T - np.diag(np.concatenate([s, s]))).max()


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_williamson_properties(n, seed):
    M = random_pd(np.random.default_rng(seed), n)
    W = williamson(M)
    J = symplectic_form(n)
    assert np.abs(W.S @ J @ W.S.T - J).max() <= 1e-10
    assert _normal_form_residual(W, M) <= 1e-8 * max(1.0, np.abs(M).max())
    oracle = np.sort(np.abs(np.linalg.eigvals(J @ M).imag))[::2]
    assert np.allclose(W.spectrum, oracle, atol=1e-8)
    assert np.all(np.diff(W.spectrum) >= 0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_williamson_invariant_under_symplectic_congruence(n, seed):
    rng = np.random.default_rng(seed)
    M = random_pd(rng, n)
    # a random symplectic: exp of J times a symmetric generator
    from scipy.linalg import expm

    G = rng.standard_normal((2 * n, 2 * n)) * 0.3
    T = expm(symplectic_form(n) @ (G + G.T))
    assert is_symplectic(T, tol=1e-9)
    assert np.allclose(symplectic_spectrum(T @ M @ T.T), symplectic_spectrum(M), rtol=1e-8)


def chain_closed_form(N, omega, kappa):
    k = np.arange(1, N + 1)
    return np.sqrt(omega * (omega + kappa - kappa * np.cos((k - 1) * np.pi / N)))


def test_chain_spectrum_oracle():
    M = build_chain_hessian(10, 1.0, 20.0)
    spec = symplectic_spectrum(M)
    assert np.allclose(spec, chain_closed_form(10, 1.0, 20.0), atol=1e-10, rtol=0)
    assert spec[0] == pytest.approx(1.0, abs=1e-12)


def test_triangle_spectrum():
    spec = symplectic_spectrum(build_triangle_hessian(1.0, 1 / 3, 1 / 3))
    assert np.allclose(spec, [1, np.sqrt(1.5), np.sqrt(1.5)], atol=1e-12)


@pytest.mark.parametrize(
    "M, expected",
    [
        (build_chain_hessian(6, 1.0, 2.0), True),
        (build_momentum_coupled_hessian(1.0, 0.5, 0.2), True),
        (QuadraticForm(np.block([[np.diag([1.0, 2.0]), np.zeros((2, 2))], [np.zeros((2, 2)), np.array([[2.0, 0.5], [0.5, 1.0]])]])), False),
    ],
)
def test_normal_form_conditions(M, expected):
    report = check_normal_form_conditions(M)
    assert report.conditions_hold is expected
    if expected:
        W = align_to_diagonal_gram(williamson(M))
        R, L = report.R, report.L
        LL = np.concatenate([L, 1 / L])
        # S = L^{-1} R with Diag(L,1/L) the squeeze
        assert np.allclose(np.diag(np.concatenate([L, 1 / L])) @ W.S, R, atol=1e-10)
        assert np.allclose(R @ M.matrix @ R.T, np.diag(LL * np.concatenate([W.spectrum] * 2) * LL), atol=1e-9)
    else:
        assert max(report.residuals) > 1e-6


def test_group_degenerate_modes_chain():
    spec = symplectic_spectrum(build_chain_hessian(10, 1.0, 20.0))
    assert group_degenerate_modes(spec).groups == tuple((k,) for k in range(1, 11))


def test_group_degenerate_modes_triangle():
    g = group_degenerate_modes(symplectic_spectrum(build_triangle_hessian(1.0, 1 / 3, 1 / 3)))
    assert g.groups == ((1,), (2, 3))
    assert g.group_of(3) == (2, 3)


def test_group_negative_tol():
    with pytest.raises(InvalidArgumentError):
        group_degenerate_modes([1.0, 2.0], tol=-1.0)


def test_degenerate_basis_is_deterministic():
    M = build_triangle_hessian(1.0, 1 / 3, 1 / 3).matrix
    assert np.array_equal(williamson(M).S, williamson(M.copy()).S)
