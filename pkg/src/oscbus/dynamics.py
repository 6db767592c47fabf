"""Covariance-matrix dynamics for quadratic Hamiltonians with linear Lindblad noise.

The equation of motion is ``dV/dt = Gamma V + V Gamma^T + D`` with
``Gamma = J H - Im(Upsilon) J`` and ``D = hbar Re(Upsilon)``, where
``Upsilon = sum_k lambda_k lambda_k^dagger`` collects Lindblad operators
``L_k = lambda_k^T J X``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov

from .errors import (
    ConditioningWarning,
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidStateError,
    NoSteadyStateError,
)
from .symplectic import QuadraticForm, is_symplectic, symplectic_form

__all__ = [
    "CovarianceState",
    "NoiseModel",
    "PropagationResult",
    "ModeBath",
    "thermal_bath_noise",
    "thermal_noise",
    "drift_and_diffusion",
    "propagate_cm",
    "steady_state",
    "transform_noise_to_modes",
    "classify_mode_baths",
]

logger = logging.getLogger(__name__)

CONDITIONING_LIMIT = 1e4
BATH_KINDS = ("thermal_local", "squeezed_local", "nonlocal")


@dataclass(frozen=True, eq=False)
class CovarianceState:
    """Covariance matrix ``V`` and mean vector at time ``t``.

    Args:
        V (array): real symmetric ``2n x 2n`` covariance matrix
        mean (array): first moments, zeros when omitted
        t (float): time stamp
        hbar (float): value of hbar the state refers to
        labels (tuple): optional mode labels, one per mode
    """

    V: np.ndarray
    mean: Optional[np.ndarray] = None
    t: float = 0.0
    hbar: float = 1.0
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2 or V.shape[0] == 0:
            raise InvalidDimensionError(f"covariance matrix must be even and square, got {V.shape}")
        if np.abs(V - V.T).max() > 1e-12 * max(1.0, np.abs(V).max()):
            raise InvalidStateError("covariance matrix is not symmetric")
        V = (V + V.T) / 2
        mean = np.zeros(V.shape[0]) if self.mean is None else np.array(self.mean, dtype=float)
        if mean.shape != (V.shape[0],):
            raise InvalidDimensionError(f"mean has shape {mean.shape}, expected ({V.shape[0]},)")
        if self.labels is not None and len(self.labels) != V.shape[0] // 2:
            raise InvalidDimensionError("one label per mode is required")
        V.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n_modes(self) -> int:
        return self.V.shape[0] // 2

    def uncertainty_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the Hermitian matrix ``V + (i hbar / 2) J``."""
        J = symplectic_form(self.n_modes)
        return np.linalg.eigvalsh(self.V + 0.5j * self.hbar * J)

    def is_physical(self, rel_tol: float = 1e-10) -> bool:
        return bool(self.uncertainty_eigenvalues().min() >= -rel_tol * max(np.linalg.norm(self.V, 2), self.hbar))

    def check_physical(self, rel_tol: float = 1e-10) -> "CovarianceState":
        """Raise ``InvalidStateError`` unless the uncertainty relation holds."""
        if not self.is_physical(rel_tol):
            raise InvalidStateError(
                f"covariance matrix violates the uncertainty relation "
                f"(smallest eigenvalue {self.uncertainty_eigenvalues().min():.3g})"
            )
        return self

    def with_time(self, V, mean, t) -> "CovarianceState":
        return CovarianceState(V=V, mean=mean, t=t, hbar=self.hbar, labels=self.labels)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Linear Lindblad noise ``L_k = lambda_k^T J X``.

    ``lambdas`` has one row per Lindblad operator. ``zeta`` and ``n_th`` are
    set for thermal baths and ``None`` otherwise.
    """

    lambdas: np.ndarray
    hbar: float = 1.0
    zeta: Optional[float] = None
    n_th: Optional[float] = None
    upsilon: np.ndarray = field(init=False)

    def __post_init__(self):
        lam = np.atleast_2d(np.array(self.lambdas, dtype=complex))
        if lam.shape[1] % 2:
            raise InvalidDimensionError(f"Lindblad vectors must have even length, got {lam.shape[1]}")
        lam.setflags(write=False)
        ups = lam.T @ lam.conj()
        ups = (ups + ups.conj().T) / 2
        ups.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "upsilon", ups)

    @property
    def dim(self) -> int:
        return self.lambdas.shape[1]

    @property
    def is_thermal(self) -> bool:
        return self.zeta is not None


def thermal_noise(n_modes: int, zeta: float, n_th: float, hbar: float = 1.0) -> NoiseModel:
    """Independent thermal baths of equal rate and occupation on every mode.

    Each mode ``j`` receives an annihilation operator with weight
    ``sqrt(hbar zeta (n_th + 1))`` and a creation operator with weight
    ``sqrt(hbar zeta n_th)``.
    """
    if not (zeta >= 0 and np.isfinite(zeta)):
        raise InvalidArgumentError(f"relaxation rate must be nonnegative, got {zeta}")
    if not (n_th >= 0 and np.isfinite(n_th)):
        raise InvalidArgumentError(f"thermal occupation must be nonnegative, got {n_th}")
    n = n_modes
    rows = []
    down = np.sqrt(zeta * (n_th + 1) / 2)
    up = np.sqrt(zeta * n_th / 2)
    for j in range(n):
        # hat a_j = (q_j + i p_j)/sqrt(2 hbar) and lambda^T J X = lambda_q p - lambda_p q
        lam = np.zeros(2 * n, dtype=complex)
        lam[j], lam[n + j] = 1j * down, -down
        rows.append(lam)
        lam = np.zeros(2 * n, dtype=complex)
        lam[j], lam[n + j] = -1j * up, -up
        rows.append(lam)
    return NoiseModel(lambdas=np.array(rows), hbar=hbar, zeta=float(zeta), n_th=float(n_th))


def thermal_bath_noise(spec, zeta: float, n_th: float) -> NoiseModel:
    """Local thermal baths on both external oscillators and every network site.

    Args:
        spec (SystemSpec): the system the baths act on
        zeta (float): relaxation rate
        n_th (float): thermal occupation of every bath
    """
    return thermal_noise(spec.n_modes, zeta, n_th, hbar=spec.hbar)


def drift_and_diffusion(H, noise: Optional[NoiseModel] = None):
    """Return ``(Gamma, D)`` for Hessian ``H`` and noise model ``noise``.

    Without noise, ``Gamma = J H`` and ``D = 0``.
    """
    Hm = H.matrix if isinstance(H, QuadraticForm) else QuadraticForm(H).matrix
    n = Hm.shape[0] // 2
    J = symplectic_form(n)
    if noise is None:
        return J @ Hm, np.zeros_like(Hm)
    if noise.dim != Hm.shape[0]:
        raise InvalidDimensionError(
            f"noise acts on {noise.dim} phase-space coordinates but the Hessian has {Hm.shape[0]}"
        )
    ups = noise.upsilon
    Gamma = J @ Hm - ups.imag @ J
    D = noise.hbar * ups.real
    return Gamma, (D + D.T) / 2


@dataclass(frozen=True, eq=False)
class PropagationResult:
    times: np.ndarray
    states: List[CovarianceState]

    def covariances(self) -> np.ndarray:
        return np.array([s.V for s in self.states])


def _van_loan(Gamma, D, dt):
    n = Gamma.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = Gamma
    aug[:n, n:] = D
    aug[n:, n:] = -Gamma.T
    E = expm(aug * dt)
    Phi = E[:n, :n]
    Q = E[:n, n:] @ Phi.T
    return Phi, (Q + Q.T) / 2


def propagate_cm(Gamma, D, V0: CovarianceState, times: Sequence[float]) -> PropagationResult:
    r"""Evolve a covariance state to each requested time.

    ``times`` are absolute and must start at or after ``V0.t``. Each step of
    length ``dt`` uses ``V -> Phi V Phi^T + Q`` with ``Phi = e^{Gamma dt}`` and
    ``Q = \int_0^{dt} e^{Gamma s} D e^{Gamma^T s} ds``, both read off one
    exponential of the block matrix ``[[Gamma, D], [0, -Gamma^T]] dt``. Steps
    of equal length reuse the same pair.

    Args:
        Gamma (array): drift matrix
        D (array): diffusion matrix
        V0 (CovarianceState): initial state
        times (list): sorted output times

    Returns:
        PropagationResult
    """
    Gamma = np.asarray(Gamma, dtype=float)
    D = np.asarray(D, dtype=float)
    dim = V0.V.shape[0]
    if Gamma.shape != (dim, dim) or D.shape != (dim, dim):
        raise InvalidDimensionError(
            f"drift {Gamma.shape} and diffusion {D.shape} must match the state dimension {dim}"
        )
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidArgumentError("at least one output time is required")
    if not np.all(np.isfinite(times)):
        raise InvalidArgumentError("times must be finite")
    if times[0] < 0 or times[0] < V0.t:
        raise InvalidArgumentError("times must start at or after the initial time and be nonnegative")
    steps = np.diff(np.concatenate([[V0.t], times]))
    if np.any(steps < 0):
        raise InvalidArgumentError("times must be sorted")
    norm = np.linalg.norm(Gamma, 2)
    if norm * steps.max() > CONDITIONING_LIMIT:
        warnings.warn(
            f"propagation step of {steps.max():g} with |Gamma| = {norm:g} may be ill-conditioned",
            ConditioningWarning,
            stacklevel=2,
        )
    cache: Dict[float, tuple] = {}
    V, mean = V0.V, V0.mean
    states = []
    for t, dt in zip(times, steps):
        if dt == 0:
            states.append(V0 if not states and t == V0.t else V0.with_time(V, mean, t))
            continue
        key = float(np.format_float_scientific(dt, precision=12))
        if key not in cache:
            cache[key] = _van_loan(Gamma, D, dt)
        Phi, Q = cache[key]
        V = Phi @ V @ Phi.T + Q
        V = (V + V.T) / 2
        mean = Phi @ mean
        states.append(V0.with_time(V, mean, t))
    return PropagationResult(times=times, states=states)


def steady_state(Gamma, D, hbar: float = 1.0) -> CovarianceState:
    """Unique stationary covariance solving ``Gamma V + V Gamma^T + D = 0``.

    Raises:
        NoSteadyStateError: if some eigenvalue of ``Gamma`` has real part
            ``>= -1e-12 |Gamma|``
    """
    Gamma = np.asarray(Gamma, dtype=float)
    D = np.asarray(D, dtype=float)
    ev = np.linalg.eigvals(Gamma)
    bound = -1e-12 * np.linalg.norm(Gamma, 2)
    bad = ev[ev.real >= bound]
    if bad.size:
        raise NoSteadyStateError(
            f"drift matrix is not Hurwitz; {bad.size} eigenvalue(s) with real part >= {bound:.3g}",
            eigenvalues=tuple(complex(x) for x in bad),
        )
    V = solve_continuous_lyapunov(Gamma, -D)
    V = (V + V.T) / 2
    resid = np.linalg.norm(Gamma @ V + V @ Gamma.T + D)
    if resid > 1e-10 * max(np.linalg.norm(D), 1e-300):
        logger.warning("Lyapunov residual %.3g exceeds 1e-10 |D|", resid)
    return CovarianceState(V=V, t=np.inf, hbar=hbar)


def transform_noise_to_modes(noise: NoiseModel, S0) -> NoiseModel:
    """Express the noise in normal-mode coordinates ``Y`` with ``X = S0^T Y``.

    Lindblad vectors map to ``S0^{-T} lambda`` so ``Upsilon -> S0^{-T} Upsilon S0^{-1}``.
    """
    S0 = np.asarray(S0, dtype=float)
    if S0.shape != (noise.dim, noise.dim):
        raise InvalidDimensionError(f"transformation has shape {S0.shape}, expected {noise.dim}x{noise.dim}")
    if not is_symplectic(S0, 1e-10 * max(1.0, np.abs(S0).max() ** 2)):
        raise InvalidArgumentError("mode transformation is not symplectic")
    J = symplectic_form(noise.dim // 2)
    S_inv_T = -J @ S0 @ J
    lam = noise.lambdas @ S_inv_T.T
    return NoiseModel(lambdas=lam, hbar=noise.hbar, zeta=noise.zeta, n_th=noise.n_th)


@dataclass(frozen=True, eq=False)
class ModeBath:
    """Bath seen by one normal mode: its kind and the real 2x2 ``Upsilon`` block."""

    mode: int
    kind: str
    block: np.ndarray

    def to_dict(self) -> dict:
        return {"mode": self.mode, "kind": self.kind, "block": self.block.tolist()}


def classify_mode_baths(noise: NoiseModel, S0=None, tol: float = 1e-10) -> List[ModeBath]:
    """Classify the bath acting on each normal mode.

    A mode is ``thermal_local`` when its real ``Upsilon`` block is a multiple of
    the identity and it has no noise correlations with other modes,
    ``squeezed_local`` when it is uncorrelated with other modes but its block is
    not scalar, and ``nonlocal`` otherwise. Modes are reported 1-based.

    Args:
        noise (NoiseModel): noise in the original coordinates
        S0 (array): symplectic mode transformation, identity when omitted
        tol (float): threshold on block entries, relative to the largest entry
    """
    mode_noise = noise if S0 is None else transform_noise_to_modes(noise, S0)
    ups = mode_noise.upsilon
    n = mode_noise.dim // 2
    scale = max(np.abs(ups).max(), 1e-300)
    out = []
    for k in range(n):
        idx = [k, k + n]
        other = [j for j in range(2 * n) if j not in idx]
        cross = np.abs(ups[np.ix_(idx, other)]).max(initial=0.0)
        block = ups.real[np.ix_(idx, idx)]
        if cross > tol * scale:
            kind = "nonlocal"
        elif abs(block[0, 0] - block[1, 1]) <= tol * scale and abs(block[0, 1]) <= tol * scale:
            kind = "thermal_local"
        else:
            kind = "squeezed_local"
        out.append(ModeBath(mode=k + 1, kind=kind, block=block.copy()))
    return out
