"""First-order perturbative justification of the rotating wave approximation.

Two oscillators with ``H0 = hbar (w1 n1 + w2 n2)`` and
``HI = hbar [eta a1^+ a2 + conj(eta) a2^+ a1 + sum_jk (xi_jk a_j a_k + conj(xi_jk) a_j^+ a_k^+)]``.
Transitions are between Fock states ``(n1, n2)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import InvalidArgumentError, PerturbationBreakdownWarning

__all__ = [
    "TwoOscillatorModel",
    "TransitionReport",
    "analyze_transition",
    "transition_probability",
    "perturbation_ratios",
    "rwa_hamiltonian",
    "fock_hamiltonian",
    "number_operator",
]

RESONANT_SERIES_LIMIT = 1e-8
CLASSIFICATIONS = ("energy_conserving", "non_energy_conserving", "forbidden")


@dataclass(frozen=True, eq=False)
class TwoOscillatorModel:
    """Frequencies, exchange coupling ``eta`` (= eta_12) and pair-creation table ``xi``."""

    omega1: float
    omega2: float
    eta: complex = 0j
    xi: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=complex))
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise InvalidArgumentError("oscillator frequencies must be positive")
        xi = np.array(self.xi, dtype=complex)
        if xi.shape != (2, 2):
            raise InvalidArgumentError(f"xi must be a 2x2 table, got shape {xi.shape}")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", complex(self.eta))

    @property
    def omegas(self) -> Tuple[float, float]:
        return (self.omega1, self.omega2)


def _fock(state) -> Tuple[int, int]:
    s = tuple(state)
    if len(s) != 2 or any(int(x) != x or x < 0 for x in s):
        raise InvalidArgumentError(f"Fock state must be a pair of nonnegative integers, got {state}")
    return int(s[0]), int(s[1])


def _apply(ops, state):
    """Apply a product of ladder operators (rightmost first) to a Fock state."""
    amp = 1.0
    n = list(state)
    for mode, create in reversed(ops):
        if create:
            n[mode] += 1
            amp *= np.sqrt(n[mode])
        else:
            if n[mode] == 0:
                return 0.0, None
            amp *= np.sqrt(n[mode])
            n[mode] -= 1
    return amp, tuple(n)


def _interaction_terms(model: TwoOscillatorModel):
    # (coefficient, operator product, kind)
    terms = [
        (model.eta, ((0, True), (1, False)), "eta"),
        (np.conj(model.eta), ((1, True), (0, False)), "eta"),
    ]
    for j in range(2):
        for k in range(2):
            terms.append((model.xi[j, k], ((j, False), (k, False)), "xi"))
            terms.append((np.conj(model.xi[j, k]), ((j, True), (k, True)), "xi"))
    return terms


@dataclass(frozen=True)
class TransitionReport:
    """First-order data of a transition ``initial -> final``.

    ``matrix_element`` is ``<final| HI |initial> / hbar`` (a rate),
    ``delta_E = E_initial - E_final`` and ``amplitude = |matrix_element| / |delta_E / hbar|``
    (``inf`` at exact resonance).
    """

    initial: Tuple[int, int]
    final: Tuple[int, int]
    matrix_element: complex
    delta_E: float
    amplitude: float
    classification: str
    hbar: float = 1.0

    def probability(self, tau):
        """``2 amplitude^2 (1 - cos(delta_E tau / hbar))`` with the resonant ``|c|^2 tau^2`` limit."""
        tau = np.asarray(tau, dtype=float)
        c2 = abs(self.matrix_element) ** 2
        if c2 == 0.0:
            return np.zeros_like(tau)
        w = self.delta_E / self.hbar
        x = w * tau
        with np.errstate(divide="ignore", invalid="ignore"):
            general = 2 * c2 * (1 - np.cos(x)) / (w * w) if w != 0 else np.zeros_like(x)
        # 2(1 - cos x)/w^2 = tau^2 (1 - x^2/12 + ...)
        series = c2 * tau * tau * (1 - x * x / 12)
        return np.where(np.abs(x) < RESONANT_SERIES_LIMIT, series, general)


def analyze_transition(model: TwoOscillatorModel, initial, final) -> TransitionReport:
    """Matrix element, energy gap and perturbation amplitude of one transition."""
    initial, final = _fock(initial), _fock(final)
    element = 0j
    kinds = set()
    for coeff, ops, kind in _interaction_terms(model):
        if coeff == 0:
            continue
        amp, out = _apply(ops, initial)
        if out == final and amp != 0:
            element += coeff * amp
            kinds.add(kind)
    w1, w2 = model.omegas
    gap = model.hbar * (w1 * (initial[0] - final[0]) + w2 * (initial[1] - final[1]))
    if element == 0:
        classification = "forbidden"
        amplitude = 0.0
    else:
        classification = "energy_conserving" if kinds == {"eta"} else "non_energy_conserving"
        amplitude = abs(element) / abs(gap / model.hbar) if gap != 0 else float("inf")
    return TransitionReport(
        initial=initial,
        final=final,
        matrix_element=complex(element),
        delta_E=float(gap),
        amplitude=float(amplitude),
        classification=classification,
        hbar=model.hbar,
    )


def transition_probability(model: TwoOscillatorModel, initial, final, tau):
    """First-order transition probability after interaction time ``tau``.

    Values above 1 signal that perturbation theory has broken down; they are
    returned unchanged with a ``PerturbationBreakdownWarning``.
    """
    report = analyze_transition(model, initial, final)
    P = report.probability(tau)
    if np.any(P > 1):
        warnings.warn(
            f"first-order probability {np.max(P):.3g} > 1 for {report.initial} -> {report.final}",
            PerturbationBreakdownWarning,
            stacklevel=2,
        )
    return P if np.ndim(P) else float(P)


def perturbation_ratios(model: TwoOscillatorModel, initial, final) -> float:
    """Perturbation parameter ``|<final|HI|initial>| / |delta|`` (``inf`` at exact resonance)."""
    return analyze_transition(model, initial, final).amplitude


def rwa_hamiltonian(model: TwoOscillatorModel) -> TwoOscillatorModel:
    """Drop the pair creation/annihilation terms and keep the exchange coupling."""
    return TwoOscillatorModel(model.omega1, model.omega2, eta=model.eta, xi=np.zeros((2, 2)), hbar=model.hbar)


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1)


def fock_hamiltonian(model: TwoOscillatorModel, cutoff: int) -> np.ndarray:
    """``H / hbar`` on the product Fock space with ``0 <= n_j <= cutoff``; basis index ``n1 (cutoff+1) + n2``."""
    if int(cutoff) != cutoff or cutoff < 1:
        raise InvalidArgumentError("cutoff must be a positive integer")
    a = _ladder(int(cutoff))
    eye = np.eye(int(cutoff) + 1)
    ops = [np.kron(a, eye), np.kron(eye, a)]
    H = model.omega1 * ops[0].T @ ops[0] + model.omega2 * ops[1].T @ ops[1]
    H = H.astype(complex)
    H += model.eta * ops[0].T @ ops[1] + np.conj(model.eta) * ops[1].T @ ops[0]
    for j in range(2):
        for k in range(2):
            H += model.xi[j, k] * ops[j] @ ops[k] + np.conj(model.xi[j, k]) * ops[j].T @ ops[k].T
    return H


def number_operator(cutoff: int) -> np.ndarray:
    n = np.arange(int(cutoff) + 1, dtype=float)
    return np.diag(np.add.outer(n, n).ravel())
