"""Initial states, single-oscillator reductions, occupations and Gaussian fidelity."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dynamics import CovarianceState
from .errors import (
    FidelityClampWarning,
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidStateError,
)
from .symplectic import symplectic_form

__all__ = [
    "InitialStateSpec",
    "ReducedState",
    "build_initial_cm",
    "reduce_to_oscillator",
    "occupation_number",
    "gaussian_fidelity",
    "free_rotation",
    "rotate_reduced",
]

logger = logging.getLogger(__name__)

SQRT_FLOOR = -1e-12


@dataclass(frozen=True)
class InitialStateSpec:
    """Thermal occupations of oscillator ``b`` and of every network site; ``a`` starts in vacuum."""

    n_b: float = 0.0
    n_network: float = 0.0

    def __post_init__(self):
        for name in ("n_b", "n_network"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"{name} must be a nonnegative number, got {v}")


@dataclass(frozen=True, eq=False)
class ReducedState:
    """2x2 covariance matrix of one oscillator, ordered ``(q, p)``."""

    V2: np.ndarray
    label: str = ""
    hbar: float = 1.0

    def __post_init__(self):
        V = np.array(self.V2, dtype=float)
        if V.shape != (2, 2):
            raise InvalidDimensionError(f"reduced state must be 2x2, got {V.shape}")
        if abs(V[0, 1] - V[1, 0]) > 1e-12 * max(1.0, np.abs(V).max()):
            raise InvalidStateError("reduced covariance matrix is not symmetric")
        V = (V + V.T) / 2
        ev = np.linalg.eigvalsh(V + 0.5j * self.hbar * symplectic_form(1))
        if ev.min() < -1e-10 * max(1.0, np.abs(V).max()):
            raise InvalidStateError(
                f"reduced state {self.label!r} violates the uncertainty relation (eigenvalue {ev.min():.3g})"
            )
        V.setflags(write=False)
        object.__setattr__(self, "V2", V)


def build_initial_cm(
    spec: InitialStateSpec,
    n_network_modes: int,
    which: str = "full",
    modes: Optional[Sequence[int]] = None,
    S: Optional[np.ndarray] = None,
    hbar: float = 1.0,
) -> CovarianceState:
    """Initial covariance matrix: ``a`` in vacuum, ``b`` and the network thermal.

    Args:
        spec (InitialStateSpec): occupations
        n_network_modes (int): number of network sites ``N``
        which (str): ``"full"`` for ``(q_a, q_b, q_1.., p_a, p_b, p_1..)`` or
            ``"effective"`` for ``(q_a, q_b, modes.., p_a, p_b, modes..)``
        modes (list): resonant 1-based modes (effective only)
        S (array): Williamson matrix of the network. When given, each mode
            block is the exact marginal of the local thermal network state,
            ``(hbar/2)(2n+1) (S S^T)^{-1}`` restricted to the modes; when
            omitted every mode is thermal with occupation ``n_network``.
        hbar (float): Planck constant

    Returns:
        CovarianceState
    """
    half = hbar / 2
    vb = half * (2 * spec.n_b + 1)
    vn = half * (2 * spec.n_network + 1)
    if which == "full":
        N = int(n_network_modes)
        if N < 1:
            raise InvalidDimensionError("network must have at least one site")
        diag = np.concatenate([[half, vb], np.full(N, vn)])
        return CovarianceState(V=np.diag(np.concatenate([diag, diag])), hbar=hbar, labels=("a", "b") + tuple(str(k) for k in range(1, N + 1)))
    if which != "effective":
        raise InvalidArgumentError(f"which must be 'full' or 'effective', got {which!r}")
    if not modes:
        raise InvalidArgumentError("effective initial state needs the resonant modes")
    modes = tuple(int(m) for m in modes)
    d = len(modes)
    r = 2 + d
    V = np.zeros((2 * r, 2 * r))
    for x, v in ((0, half), (1, vb)):
        V[x, x] = V[r + x, r + x] = v
    sel = [2 + j for j in range(d)] + [r + 2 + j for j in range(d)]
    if S is None:
        V[np.ix_(sel, sel)] = vn * np.eye(2 * d)
    else:
        S = np.asarray(S, dtype=float)
        N = S.shape[0] // 2
        if N != n_network_modes:
            raise InvalidDimensionError(f"Williamson matrix has {N} modes, expected {n_network_modes}")
        J = symplectic_form(N)
        S_inv_T = -J @ S @ J
        G = S_inv_T @ S_inv_T.T
        idx = [m - 1 for m in modes] + [m - 1 + N for m in modes]
        V[np.ix_(sel, sel)] = vn * G[np.ix_(idx, idx)]
    labels = ("a", "b") + tuple(f"mode{m}" for m in modes)
    return CovarianceState(V=V, hbar=hbar, labels=labels)


def reduce_to_oscillator(state: CovarianceState, which: Union[str, int]) -> ReducedState:
    """2x2 block of one oscillator.

    ``which`` is a label of ``state.labels`` (e.g. ``"a"``, ``"b"``,
    ``"mode3"``) or a 0-based mode position.
    """
    n = state.n_modes
    if isinstance(which, str):
        labels = state.labels if state.labels is not None else ("a", "b") + tuple(str(k) for k in range(1, n - 1))
        if which not in labels:
            raise InvalidArgumentError(f"unknown oscillator {which!r}; available: {', '.join(labels)}")
        k = labels.index(which)
        label = which
    else:
        if int(which) != which or not 0 <= which < n:
            raise InvalidArgumentError(f"oscillator position {which} outside 0..{n - 1}")
        k = int(which)
        label = state.labels[k] if state.labels is not None else str(k)
    idx = [k, k + n]
    return ReducedState(V2=state.V[np.ix_(idx, idx)], label=label, hbar=state.hbar)


def occupation_number(r: ReducedState) -> float:
    """Mean phonon number ``(V_qq + V_pp)/(2 hbar) - 1/2``."""
    n = (r.V2[0, 0] + r.V2[1, 1]) / (2 * r.hbar) - 0.5
    if n < -1e-9:
        raise InvalidStateError(f"negative occupation {n:.3g} for {r.label!r}")
    return float(n)


def _safe_sqrt(x: float, what: str) -> float:
    if x < 0:
        if x < SQRT_FLOOR:
            raise InvalidStateError(f"negative {what} ({x:.3g}) in fidelity")
        return 0.0
    return float(np.sqrt(x))


def gaussian_fidelity(A: ReducedState, B: ReducedState, mean_a=None, mean_b=None) -> float:
    r"""Fidelity of two zero-mean single-mode Gaussian states.

    With ``A' = 2A/hbar`` and ``B' = 2B/hbar`` (vacuum = identity),
    ``F = 2 / (sqrt(Delta + delta) - sqrt(delta))`` where
    ``Delta = det(A' + B')`` and ``delta = (det A' - 1)(det B' - 1)``.
    Round-off excursions outside ``[0, 1]`` are clamped and logged.
    """
    for m in (mean_a, mean_b):
        if m is not None and np.abs(np.asarray(m, dtype=float)).max() > 1e-10:
            raise InvalidArgumentError("fidelity formula requires zero-mean states")
    if A.hbar != B.hbar:
        raise InvalidArgumentError("states refer to different values of hbar")
    a = 2 * A.V2 / A.hbar
    b = 2 * B.V2 / B.hbar
    Delta = np.linalg.det(a + b)
    delta = (np.linalg.det(a) - 1) * (np.linalg.det(b) - 1)
    denom = _safe_sqrt(Delta + delta, "Delta + delta") - _safe_sqrt(delta, "delta")
    if denom <= 0:
        raise InvalidStateError("degenerate fidelity denominator")
    F = 2 / denom
    if F > 1 or F < 0:
        clamped = min(max(F, 0.0), 1.0)
        msg = f"fidelity {F!r} clamped to {clamped} (magnitude {abs(F - clamped):.3g})"
        logger.debug(msg)
        if abs(F - clamped) > 1e-9:
            warnings.warn(msg, FidelityClampWarning, stacklevel=2)
        F = clamped
    return float(F)


def free_rotation(Omega: float, t: float) -> np.ndarray:
    """Single-mode free evolution ``exp(J Omega t)`` in ``(q, p)`` order."""
    c, s = np.cos(Omega * t), np.sin(Omega * t)
    return np.array([[c, s], [-s, c]])


def rotate_reduced(r: ReducedState, Omega: float, t: float) -> ReducedState:
    """Map a rotating-frame reduced state back to the laboratory frame."""
    R = free_rotation(Omega, t)
    return ReducedState(V2=R @ r.V2 @ R.T, label=r.label, hbar=r.hbar)
