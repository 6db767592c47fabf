import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from oscbus.dynamics import (
    CovarianceState,
    NoiseModel,
    classify_mode_baths,
    drift_and_diffusion,
    propagate_cm,
    steady_state,
    thermal_bath_noise,
    thermal_noise,
    transform_noise_to_modes,
)
from oscbus.errors import (
    ConditioningWarning,
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidStateError,
    NoSteadyStateError,
)
from oscbus.networks import Attachment, NetworkSpec, SystemSpec, analytic_williamson, assemble_system_hessian
from oscbus.observables import InitialStateSpec, build_initial_cm, occupation_number, reduce_to_oscillator
from oscbus.symplectic import symplectic_form, symplectic_spectrum

from conftest import random_pd


@pytest.mark.parametrize("zeta, n_th", [(0.01, 1.0), (0.3, 0.0), (1.0, 2.5)])
def test_thermal_upsilon(zeta, n_th):
    noise = thermal_noise(3, zeta, n_th)
    assert np.allclose(noise.upsilon.real, zeta * (n_th + 0.5) * np.eye(6), atol=1e-15)
    assert np.allclose(noise.upsilon.imag, -zeta / 2 * symplectic_form(3), atol=1e-15)


def test_fig7_drift_and_diffusion():
    net = NetworkSpec("chain", N=10, omega=1.0, kappa=20.0)
    spec = SystemSpec(net, 1.0, (Attachment("a", 10, 0.03), Attachment("b", 1, 0.03)))
    H = assemble_system_hessian(spec)
    Gamma, D = drift_and_diffusion(H, thermal_bath_noise(spec, 0.01, 1.0))
    J = symplectic_form(12)
    assert np.allclose(Gamma, J @ H.matrix - 0.005 * np.eye(24), atol=1e-15)
    assert np.allclose(D, 0.015 * np.eye(24), atol=1e-15)


def test_closed_system_drift():
    H = random_pd(np.random.default_rng(1), 2)
    for noise in (None, thermal_noise(2, 0.0, 1.0)):
        Gamma, D = drift_and_diffusion(H, noise)
        assert np.allclose(Gamma, symplectic_form(2) @ H)
        assert not D.any()


def test_drift_dimension_mismatch():
    with pytest.raises(InvalidDimensionError):
        drift_and_diffusion(np.eye(4), thermal_noise(3, 0.1, 0.0))


@pytest.mark.parametrize("zeta, n_th", [(-0.1, 0.0), (0.1, -1.0), (float("nan"), 0.0)])
def test_thermal_noise_validation(zeta, n_th):
    with pytest.raises(InvalidArgumentError):
        thermal_noise(2, zeta, n_th)


def test_zero_time_returns_initial():
    V0 = CovarianceState(np.diag([1.0, 2.0]))
    res = propagate_cm(np.eye(2), np.eye(2), V0, [0.0])
    assert np.array_equal(res.states[0].V, V0.V)


def test_scalar_relaxation_oracle():
    zeta, c, v = 0.2, 1.7, 0.5
    n = 2
    V0 = CovarianceState(v * np.eye(2 * n))
    times = np.linspace(0, 30, 31)
    res = propagate_cm(-zeta / 2 * np.eye(2 * n), zeta * c * np.eye(2 * n), V0, times)
    for t, s in zip(times, res.states):
        expected = np.exp(-zeta * t) * v + (1 - np.exp(-zeta * t)) * c
        assert np.allclose(s.V, expected * np.eye(2 * n), atol=1e-13)


def test_closed_propagation_is_symplectic_congruence():
    rng = np.random.default_rng(7)
    H = random_pd(rng, 3)
    Gamma, D = drift_and_diffusion(H)
    V0 = CovarianceState(np.diag(rng.uniform(0.5, 2.0, 6)))
    res = propagate_cm(Gamma, D, V0, [0.7, 3.1])
    for t, s in zip(res.times, res.states):
        E = expm(Gamma * t)
        assert np.allclose(s.V, E @ V0.V @ E.T, atol=1e-11)
        assert np.allclose(symplectic_spectrum(s.V), symplectic_spectrum(V0.V), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), zeta=st.floats(0.01, 1.0), n_th=st.floats(0.0, 3.0))
def test_van_loan_matches_ode(seed, zeta, n_th):
    rng = np.random.default_rng(seed)
    H = random_pd(rng, 2, spread=2.0)
    Gamma, D = drift_and_diffusion(H, thermal_noise(2, zeta, n_th))
    V0 = CovarianceState(0.5 * np.eye(4))
    T = 2.5
    res = propagate_cm(Gamma, D, V0, [T])

    def rhs(_, y):
        V = y.reshape(4, 4)
        return (Gamma @ V + V @ Gamma.T + D).ravel()

    sol = solve_ivp(rhs, (0, T), V0.V.ravel(), rtol=1e-11, atol=1e-12)
    assert np.allclose(res.states[0].V, sol.y[:, -1].reshape(4, 4), atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0.1, 5.0), t2=st.floats(0.1, 5.0))
def test_propagation_composes(seed, t1, t2):
    rng = np.random.default_rng(seed)
    H = random_pd(rng, 2)
    Gamma, D = drift_and_diffusion(H, thermal_noise(2, 0.1, 0.5))
    V0 = CovarianceState(0.5 * np.eye(4))
    direct = propagate_cm(Gamma, D, V0, [t1 + t2]).states[0]
    mid = propagate_cm(Gamma, D, V0, [t1]).states[0]
    two_step = propagate_cm(Gamma, D, mid, [t1 + t2]).states[0]
    assert np.allclose(direct.V, two_step.V, atol=1e-10)
    assert direct.is_physical()


def test_propagation_time_validation():
    V0 = CovarianceState(np.eye(2), t=1.0)
    with pytest.raises(InvalidArgumentError):
        propagate_cm(np.zeros((2, 2)), np.zeros((2, 2)), V0, [0.5])
    with pytest.raises(InvalidArgumentError):
        propagate_cm(np.zeros((2, 2)), np.zeros((2, 2)), V0, [2.0, 1.5])
    with pytest.raises(InvalidDimensionError):
        propagate_cm(np.zeros((4, 4)), np.zeros((4, 4)), V0, [2.0])


def test_conditioning_warning():
    V0 = CovarianceState(np.eye(2))
    Gamma = symplectic_form(1) * 100.0
    with pytest.warns(ConditioningWarning):
        propagate_cm(Gamma, np.zeros((2, 2)), V0, [200.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        propagate_cm(Gamma, np.zeros((2, 2)), V0, np.linspace(0, 200.0, 2001))


def test_steady_state_diagonal_balance():
    c = 2.3
    V = steady_state(-0.05 * np.eye(4), 0.1 * c * np.eye(4))
    assert np.allclose(V.V, c * np.eye(4), atol=1e-12)


def test_steady_state_requires_hurwitz():
    with pytest.raises(NoSteadyStateError) as info:
        steady_state(symplectic_form(1), np.eye(2))
    assert len(info.value.eigenvalues) == 2


def test_fig7_full_steady_state():
    net = NetworkSpec("chain", N=10, omega=1.0, kappa=20.0)
    spec = SystemSpec(net, 1.0, (Attachment("a", 10, 0.03), Attachment("b", 1, 0.03)))
    Gamma, D = drift_and_diffusion(assemble_system_hessian(spec), thermal_bath_noise(spec, 0.01, 1.0))
    Vinf = steady_state(Gamma, D)
    labelled = CovarianceState(Vinf.V, labels=("a", "b") + tuple(str(k) for k in range(1, 11)))
    assert occupation_number(reduce_to_oscillator(labelled, "a")) == pytest.approx(1.0, abs=0.02)
    V0 = build_initial_cm(InitialStateSpec(n_b=1.0), 10)
    late = propagate_cm(Gamma, D, V0, np.linspace(50.0, 5000.0, 100)).states[-1]
    assert np.allclose(late.V, Vinf.V, atol=1e-8)


def test_transform_identity():
    noise = thermal_noise(2, 0.1, 1.0)
    out = transform_noise_to_modes(noise, np.eye(4))
    assert np.allclose(out.upsilon, noise.upsilon)


def test_transform_rejects_non_symplectic():
    with pytest.raises(InvalidArgumentError):
        transform_noise_to_modes(thermal_noise(1, 0.1, 1.0), 2 * np.eye(2))


def chain_mode_transform():
    net = NetworkSpec("chain", N=6, omega=1.0, kappa=3.0)
    return net, analytic_williamson(net)


def test_chain_noise_weights():
    net, W = chain_mode_transform()
    zeta, n_th = 0.02, 1.5
    out = transform_noise_to_modes(thermal_noise(6, zeta, n_th), W.S)
    s = W.spectrum
    weights = np.concatenate([s / net.omega, net.omega / s])
    assert np.allclose(out.upsilon.real, zeta * (n_th + 0.5) * np.diag(weights), atol=1e-13)
    assert np.allclose(out.upsilon.imag, -zeta / 2 * symplectic_form(6), atol=1e-13)


def test_classify_identity_all_thermal():
    kinds = {b.kind for b in classify_mode_baths(thermal_noise(4, 0.1, 1.0), np.eye(8))}
    assert kinds == {"thermal_local"}


def test_classify_special_form_thermal():
    _, W = chain_mode_transform()
    mu = thermal_noise(6, 0.05, 0.7)
    special = NoiseModel(lambdas=mu.lambdas @ W.S, zeta=0.05, n_th=0.7)
    assert {b.kind for b in classify_mode_baths(special, W.S)} == {"thermal_local"}


def test_classify_chain():
    net, W = chain_mode_transform()
    baths = classify_mode_baths(thermal_noise(6, 0.05, 1.0), W.S)
    # mode 1 has the bare frequency, so its bath is not squeezed
    assert baths[0].kind == "thermal_local"
    assert [b.kind for b in baths[1:]] == ["squeezed_local"] * 5


def test_classify_nonlocal():
    # a beam-splitter-like mixing that also squeezes one mode
    r = 0.4
    sq = np.diag([np.exp(r), 1.0, np.exp(-r), 1.0])
    c, s = np.cos(0.3), np.sin(0.3)
    R = np.array([[c, s], [-s, c]])
    rot = np.block([[R, np.zeros((2, 2))], [np.zeros((2, 2)), R]])
    S0 = rot @ sq
    kinds = [b.kind for b in classify_mode_baths(thermal_noise(2, 0.1, 0.0), S0)]
    assert kinds == ["nonlocal", "nonlocal"]


@pytest.mark.parametrize(
    "V, exc",
    [
        (np.eye(3), InvalidDimensionError),
        (np.array([[1.0, 0.5], [0.0, 1.0]]), InvalidStateError),
    ],
)
def test_covariance_state_validation(V, exc):
    with pytest.raises(exc):
        CovarianceState(V)


def test_uncertainty_check():
    assert not CovarianceState(0.1 * np.eye(2)).is_physical()
    with pytest.raises(InvalidStateError):
        CovarianceState(0.1 * np.eye(2)).check_physical()
    assert CovarianceState(0.5 * np.eye(2)).is_physical()
