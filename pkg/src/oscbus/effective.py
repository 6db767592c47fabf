"""Rotating-wave effective models for two oscillators coupled through a few normal modes.

The network is brought to normal-mode coordinates ``Y = S^{-T} X`` (so that
``X = S^T Y``) by a Williamson matrix ``S`` of the network Hessian. With the
external oscillators tuned to a group of degenerate modes, only those modes
survive the rotating wave approximation. The reduced phase-space vector is
``(q_a, q_b, y_m.., p_a, p_b, p_m..)`` and all matrices below refer to it.
Modes are identified by their 1-based position in the ascending spectrum.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .dynamics import CovarianceState, PropagationResult, propagate_cm
from .errors import (
    InvalidArgumentError,
    NumericError,
    RWAWarning,
    StructuralViolationError,
)
from .networks import Attachment, SystemSpec
from .symplectic import (
    QuadraticForm,
    WilliamsonDecomposition,
    group_degenerate_modes,
    symplectic_form,
)

__all__ = [
    "EffectiveCoefficients",
    "RWAReport",
    "EffectiveModel",
    "effective_coefficients",
    "build_effective_hessian",
    "build_effective_noise",
    "build_effective_model",
    "propagate_effective",
    "closed_form_open_solution",
    "analytic_propagator_6x6",
    "transfer_function_F",
    "occupation_closed_form",
    "rwa_validity_report",
    "match_resonant_modes",
    "mode_labels",
]

logger = logging.getLogger(__name__)

RWA_EPS_RATIO_LIMIT = 0.1
RWA_DETUNING_FACTOR = 10.0
CLOSED_FORM_TOL = 1e-9


@dataclass(frozen=True)
class EffectiveCoefficients:
    """First-order coupling coefficients of one normal mode.

    ``D_mu`` and ``D_bar_mu`` follow the order of the attachments; ``E_extra``
    lists the self-energy weight of every attachment beyond the first one of
    each external oscillator. ``alpha``/``beta`` are the primary sites of ``a``
    and ``b`` (``None`` when unattached). The dimensionless time is
    ``tau = eps t / 4``.
    """

    mode: int
    alpha: Optional[int]
    beta: Optional[int]
    C_ab: float
    D_mu: Tuple[complex, ...]
    D_bar_mu: Tuple[complex, ...]
    E_extra: Tuple[float, ...]
    chi: float
    s_alpha: float = 0.0
    s_beta: float = 0.0

    @staticmethod
    def tau(epsilon: float, t):
        return epsilon * np.asarray(t, dtype=float) / 4


@dataclass(frozen=True)
class RWAReport:
    eps_over_Omega: float
    min_offresonant_detuning: float
    degenerate_group: Tuple[int, ...]
    warnings: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "eps_over_Omega": self.eps_over_Omega,
            "min_offresonant_detuning": self.min_offresonant_detuning,
            "degenerate_group": list(self.degenerate_group),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True, eq=False)
class EffectiveModel:
    """Reduced model over ``(q_a, q_b, modes.., p_a, p_b, modes..)``.

    ``Gamma_check`` and ``D_check`` are ``None`` until noise is bound via
    :func:`build_effective_noise`.
    """

    mode_set: Tuple[int, ...]
    labels: Tuple[str, ...]
    H_eff: QuadraticForm
    coefficients: Tuple[EffectiveCoefficients, ...]
    validity: Optional[RWAReport] = None
    Gamma_check: Optional[np.ndarray] = None
    D_check: Optional[np.ndarray] = None
    zeta: float = 0.0
    n_th: float = 0.0
    hbar: float = 1.0

    @property
    def dim(self) -> int:
        return self.H_eff.matrix.shape[0]

    @property
    def H_q(self) -> np.ndarray:
        return self.H_eff.blocks[0]

    @property
    def C_qp(self) -> np.ndarray:
        return self.H_eff.blocks[1]

    def with_noise(self, Gamma, D, zeta, n_th) -> "EffectiveModel":
        return EffectiveModel(
            mode_set=self.mode_set,
            labels=self.labels,
            H_eff=self.H_eff,
            coefficients=self.coefficients,
            validity=self.validity,
            Gamma_check=Gamma,
            D_check=D,
            zeta=zeta,
            n_th=n_th,
            hbar=self.hbar,
        )


def mode_labels(mode_set: Sequence[int]) -> Tuple[str, ...]:
    return ("a", "b") + tuple(f"mode{k}" for k in mode_set)


def _check_mode(W: WilliamsonDecomposition, m) -> int:
    if int(m) != m or not 1 <= m <= W.n_modes:
        raise InvalidArgumentError(f"mode index {m} outside 1..{W.n_modes}")
    return int(m)


def _check_site(W: WilliamsonDecomposition, att: Attachment) -> None:
    if not 1 <= att.site <= W.n_modes:
        raise InvalidArgumentError(f"attachment site {att.site} outside 1..{W.n_modes}")


def _D(W: WilliamsonDecomposition, m: int, site: int) -> complex:
    N = W.n_modes
    return complex(W.S[m - 1, site - 1], -W.S[m - 1 + N, site - 1])


def _primary_sites(attachments: Sequence[Attachment]):
    alpha = next((a.site for a in attachments if a.external_id == "a"), None)
    beta = next((a.site for a in attachments if a.external_id == "b"), None)
    return alpha, beta


def effective_coefficients(W: WilliamsonDecomposition, m: int, attachments: Sequence[Attachment]) -> EffectiveCoefficients:
    """Coupling coefficients of mode ``m`` (1-based) to the attached sites.

    ``D = S[m, mu] - i S[m+N, mu]``; ``C_ab`` sums ``|D|^2`` over the primary
    sites; ``chi = 1 + C_ab`` (which is ``1 + S_ma^2 + S_mb^2`` whenever the
    momentum rows vanish).
    """
    m = _check_mode(W, m)
    attachments = tuple(attachments)
    for att in attachments:
        _check_site(W, att)
    alpha, beta = _primary_sites(attachments)
    d_alpha = _D(W, m, alpha) if alpha is not None else 0j
    d_beta = _D(W, m, beta) if beta is not None else 0j
    C_ab = abs(d_alpha) ** 2 + abs(d_beta) ** 2
    D_mu = tuple(_D(W, m, att.site) for att in attachments)
    seen = set()
    extra = []
    for att, d in zip(attachments, D_mu):
        if att.external_id in seen:
            extra.append(abs(d) ** 2)
        seen.add(att.external_id)
    return EffectiveCoefficients(
        mode=m,
        alpha=alpha,
        beta=beta,
        C_ab=float(C_ab),
        D_mu=D_mu,
        D_bar_mu=tuple(np.conj(d) for d in D_mu),
        E_extra=tuple(float(e) for e in extra),
        chi=float(1 + C_ab),
        s_alpha=float(d_alpha.real),
        s_beta=float(d_beta.real),
    )


def build_effective_hessian(
    W: WilliamsonDecomposition,
    modes: Sequence[int],
    attachments: Sequence[Attachment],
    tol: Optional[float] = None,
) -> EffectiveModel:
    r"""Effective Hessian for external oscillators resonant with ``modes``.

    Each attachment ``(x, mu, eps)`` contributes ``(eps/4) Re(conj(w) w^T)``
    where ``w`` has ``-1`` at ``q_x``, ``-i`` at ``p_x`` and ``D_k``, ``i D_k``
    at the position and momentum slots of every resonant mode ``k``. This is
    the quadrature form of ``(hbar eps / 4) b^dagger b`` with
    ``b = a_x - sum_k conj(D_k) a_k``, which reproduces the single-mode,
    degenerate and multi-attachment effective Hamiltonians at once.

    Args:
        W (WilliamsonDecomposition): decomposition of the network Hessian
        modes (list): 1-based resonant modes, all inside one degeneracy group
        attachments (list): the couplings between external oscillators and sites
        tol (float): degeneracy tolerance, default ``1e-9 * max(spectrum)``

    Returns:
        EffectiveModel: model without noise
    """
    attachments = tuple(attachments)
    if not attachments:
        raise InvalidArgumentError("at least one attachment is required for an effective model")
    modes = tuple(_check_mode(W, m) for m in modes)
    if not modes:
        raise InvalidArgumentError("at least one resonant mode is required")
    if len(set(modes)) != len(modes):
        raise InvalidArgumentError(f"repeated modes in {modes}")
    grouping = group_degenerate_modes(W.spectrum, tol)
    groups = {grouping.group_of(m) for m in modes}
    if len(groups) > 1:
        raise InvalidArgumentError(
            f"resonant modes {modes} span several degeneracy groups {sorted(groups)}"
        )
    for att in attachments:
        _check_site(W, att)
    d = len(modes)
    r = 2 + d
    H = np.zeros((2 * r, 2 * r))
    for att in attachments:
        w = np.zeros(2 * r, dtype=complex)
        x = 0 if att.external_id == "a" else 1
        w[x] = -1
        w[r + x] = -1j
        for j, m in enumerate(modes):
            Dk = _D(W, m, att.site)
            w[2 + j] = Dk
            w[r + 2 + j] = 1j * Dk
        H += att.epsilon / 4 * np.real(np.outer(np.conj(w), w))
    coeffs = tuple(effective_coefficients(W, m, attachments) for m in modes)
    return EffectiveModel(
        mode_set=modes,
        labels=mode_labels(modes),
        H_eff=QuadraticForm(H),
        coefficients=coeffs,
    )


def _mode_gram_inverse(S: np.ndarray) -> np.ndarray:
    J = symplectic_form(S.shape[0] // 2)
    S_inv_T = -J @ S @ J
    return S_inv_T @ S_inv_T.T


def build_effective_noise(
    model: EffectiveModel,
    W: WilliamsonDecomposition,
    zeta: float,
    n_th: float,
    hbar: Optional[float] = None,
    tol: float = 1e-10,
) -> EffectiveModel:
    r"""Bind local thermal baths to an effective model.

    ``Gamma = J H_eff - (zeta/2) I`` and ``D = hbar zeta (n_th + 1/2) G`` where
    ``G`` is the identity on the external oscillators and the restriction of
    ``(S S^T)^{-1}`` to the resonant modes. For ``S = L^{-1} R`` this is
    ``Diag(1, 1, sigma_m/omega.., 1, 1, omega/sigma_m..)``.

    Raises:
        StructuralViolationError: when the baths correlate a resonant mode with
            a mode outside the model
    """
    if zeta < 0 or n_th < 0:
        raise InvalidArgumentError("relaxation rate and thermal occupation must be nonnegative")
    hbar = model.hbar if hbar is None else hbar
    N = W.n_modes
    G = _mode_gram_inverse(W.S)
    idx = [m - 1 for m in model.mode_set] + [m - 1 + N for m in model.mode_set]
    others = [j for j in range(2 * N) if j not in idx]
    if others:
        cross = np.abs(G[np.ix_(idx, others)])
        if cross.max() > tol * np.abs(G).max():
            i, j = np.unravel_index(np.argmax(cross), cross.shape)
            mi = idx[i] % N + 1
            mj = others[j] % N + 1
            raise StructuralViolationError(
                f"baths correlate resonant mode {mi} with mode {mj}; the reduced noise is "
                f"not closed (use a network with diagonal S S^T or the exact model)",
                modes=(mi, mj),
            )
    r = model.dim // 2
    d = len(model.mode_set)
    weights = np.eye(2 * r)
    sel = [2 + j for j in range(d)] + [r + 2 + j for j in range(d)]
    weights[np.ix_(sel, sel)] = G[np.ix_(idx, idx)]
    J = symplectic_form(r)
    Gamma = J @ model.H_eff.matrix - zeta / 2 * np.eye(2 * r)
    D = hbar * zeta * (n_th + 0.5) * weights
    D = (D + D.T) / 2
    return EffectiveModel(
        mode_set=model.mode_set,
        labels=model.labels,
        H_eff=model.H_eff,
        coefficients=model.coefficients,
        validity=model.validity,
        Gamma_check=Gamma,
        D_check=D,
        zeta=float(zeta),
        n_th=float(n_th),
        hbar=hbar,
    )


def build_effective_model(
    spec: SystemSpec,
    W: WilliamsonDecomposition,
    modes: Sequence[int],
    zeta: float = 0.0,
    n_th: float = 0.0,
) -> EffectiveModel:
    """Hessian, noise and RWA report of the effective model in one call."""
    model = build_effective_hessian(W, modes, spec.attachments)
    model = EffectiveModel(
        mode_set=model.mode_set,
        labels=model.labels,
        H_eff=model.H_eff,
        coefficients=model.coefficients,
        validity=rwa_validity_report(spec, W, model.mode_set),
        hbar=spec.hbar,
    )
    return build_effective_noise(model, W, zeta, n_th)


def _require_noise(model: EffectiveModel):
    if model.Gamma_check is None:
        r = model.dim // 2
        return symplectic_form(r) @ model.H_eff.matrix, np.zeros((2 * r, 2 * r))
    return model.Gamma_check, model.D_check


def closed_form_open_solution(model: EffectiveModel, V0: CovarianceState, t: float) -> np.ndarray:
    """``e^{-zeta t} E V0 E^T + (1 - e^{-zeta t}) D / zeta`` with ``E = exp(J H_eff t)``.

    Exact when ``E D E^T = D``, e.g. when ``D`` is a multiple of the identity.
    """
    _, D = _require_noise(model)
    r = model.dim // 2
    dt = t - V0.t
    E = expm(symplectic_form(r) @ model.H_eff.matrix * dt)
    z = model.zeta
    decay = np.exp(-z * dt)
    V = decay * E @ V0.V @ E.T
    if z > 0:
        V = V + (-np.expm1(-z * dt)) / z * D
    return (V + V.T) / 2


@dataclass(frozen=True, eq=False)
class EffectivePropagation(PropagationResult):
    """Propagation result with the discrepancy to the closed-form open solution."""

    closed_form_discrepancy: Optional[float] = None
    closed_form_exact: bool = False


def propagate_effective(
    model: EffectiveModel,
    V0: CovarianceState,
    times: Sequence[float],
    check_points: int = 64,
) -> EffectivePropagation:
    """Propagate a reduced state with the generic drift/diffusion solver.

    On up to ``check_points`` evenly spread output times the closed-form open
    solution is evaluated as well. When the diffusion is a multiple of the
    identity the two must agree to ``1e-9`` (``NumericError`` otherwise);
    otherwise the largest discrepancy is only recorded.
    """
    Gamma, D = _require_noise(model)
    result = propagate_cm(Gamma, D, V0, times)
    n = len(result.times)
    picks = np.unique(np.linspace(0, n - 1, min(check_points, n)).round().astype(int))
    scale = max(1.0, max(np.abs(result.states[i].V).max() for i in picks))
    discrepancy = 0.0
    for i in picks:
        V_cf = closed_form_open_solution(model, V0, result.times[i])
        discrepancy = max(discrepancy, float(np.abs(V_cf - result.states[i].V).max()))
    diag = np.diag(D)
    scalar_D = bool(np.abs(D - diag[0] * np.eye(len(D))).max() <= 1e-14 * max(1.0, np.abs(D).max()))
    if scalar_D and discrepancy > CLOSED_FORM_TOL * scale:
        raise NumericError(
            f"closed-form and propagated effective solutions differ by {discrepancy:.3g}"
        )
    if not scalar_D:
        logger.info("closed-form open solution deviates by %.3g (diffusion not scalar)", discrepancy)
    return EffectivePropagation(
        times=result.times,
        states=result.states,
        closed_form_discrepancy=discrepancy,
        closed_form_exact=scalar_D,
    )


def _bounded_ratios(s_alpha: float, s_beta: float):
    # r_a = s_a^2/(chi-1), r_b = s_b^2/(chi-1), r_ab = s_a s_b/(chi-1); chi - 1 formed directly
    denom = s_alpha**2 + s_beta**2
    if denom == 0.0:
        return 0.5, 0.5, 0.0
    return s_alpha**2 / denom, s_beta**2 / denom, s_alpha * s_beta / denom


def analytic_propagator_6x6(s_alpha: float, s_beta: float, epsilon: float, t: float) -> np.ndarray:
    r"""Closed-form ``E(t) = exp(J H_eff t)`` for a single mode with real couplings.

    Ordering is ``(q_a, q_b, y, p_a, p_b, p_y)``. ``E = [[C, S], [-S, C]]``
    with ``C = cos(H_q tau)``, ``S = sin(H_q tau)``, ``tau = eps t / 4`` and
    ``H_q`` the 3x3 position block (eigenvalues ``0, 1, chi``). Entries that
    carry ``1/(chi-1)`` are written with the bounded ratios above, so the
    decoupled limit ``chi = 1`` needs no special series.
    """
    sa, sb = float(s_alpha), float(s_beta)
    chi = 1.0 + sa * sa + sb * sb
    tau = epsilon * t / 4
    ra, rb, rab = _bounded_ratios(sa, sb)
    cx, sx = np.cos(chi * tau), np.sin(chi * tau)
    c1, s1 = np.cos(tau), np.sin(tau)
    half = 2 * np.sin(chi * tau / 2) ** 2 / chi
    C = np.empty((3, 3))
    S = np.empty((3, 3))
    C[0, 0] = rb * c1 + ra / chi * ((chi - 1) + cx)
    C[1, 1] = ra * c1 + rb / chi * ((chi - 1) + cx)
    C[0, 1] = C[1, 0] = rab / chi * ((chi - 1) - chi * c1 + cx)
    C[0, 2] = C[2, 0] = sa * half
    C[1, 2] = C[2, 1] = sb * half
    C[2, 2] = (1 + (chi - 1) * cx) / chi
    S[0, 0] = ra / chi * sx + rb * s1
    S[1, 1] = rb / chi * sx + ra * s1
    S[0, 1] = S[1, 0] = rab / chi * (sx - chi * s1)
    S[0, 2] = S[2, 0] = -sa / chi * sx
    S[1, 2] = S[2, 1] = -sb / chi * sx
    S[2, 2] = (chi - 1) / chi * sx
    return np.block([[C, S], [-S, C]])


def transfer_function_F(chi, tau, s_alpha_sq: Optional[float] = None, s_beta_sq: Optional[float] = None):
    r"""Fraction of ``2 n_b`` found in oscillator ``a`` at time ``tau = eps t / 4``.

    .. math::
        F = \frac{s_a^2 s_b^2}{\chi(\chi-1)}\left[\frac{\chi^{-1} - \cos((\chi-1)\tau)}{\chi-1}
            + \frac{\cos\chi\tau}{\chi} + 1 - \cos\tau\right]

    The prefactor needs the split of ``chi - 1`` between the two attachment
    sites; by default it is symmetric, ``s_a^2 = s_b^2 = (chi - 1)/2``.

    Raises:
        InvalidArgumentError: if ``chi <= 1`` (oscillators decoupled)
    """
    chi = float(chi)
    if not chi > 1:
        raise InvalidArgumentError(f"transfer function needs chi > 1, got {chi}")
    if s_alpha_sq is None and s_beta_sq is None:
        s_alpha_sq = s_beta_sq = (chi - 1) / 2
    elif s_alpha_sq is None:
        s_alpha_sq = chi - 1 - s_beta_sq
    elif s_beta_sq is None:
        s_beta_sq = chi - 1 - s_alpha_sq
    if abs(s_alpha_sq + s_beta_sq - (chi - 1)) > 1e-12 * chi:
        raise InvalidArgumentError("s_alpha^2 + s_beta^2 must equal chi - 1")
    tau = np.asarray(tau, dtype=float)
    bracket = (1 / chi - np.cos((chi - 1) * tau)) / (chi - 1) + np.cos(chi * tau) / chi + (1 - np.cos(tau))
    return s_alpha_sq * s_beta_sq / (chi * (chi - 1)) * bracket


def occupation_closed_form(n_b, n_network, coefficients: EffectiveCoefficients, epsilon, t, mode_weight: float = 1.0):
    r"""Effective occupation of ``a`` for a single mode with real couplings.

    ``n_a = 2 n_b F(chi, tau) + 4 chi^{-2} S_ma^2 sin^2(chi tau / 2) n``
    with ``tau = eps t / 4``. The second term is the share of the resonant
    mode's thermal phonons. ``mode_weight`` is ``sigma_m/omega`` for a mode
    whose initial state is the squeezed projection of local thermal states;
    the default 1 covers modes with ``sigma_m = omega``.
    """
    if n_b < 0 or n_network < 0:
        raise InvalidArgumentError("occupations must be nonnegative")
    c = coefficients
    tau = c.tau(epsilon, t)
    chi = c.chi
    if chi == 1.0:
        first = np.zeros_like(tau)
    else:
        first = transfer_function_F(chi, tau, c.s_alpha**2, c.s_beta**2)
    share = 4 / chi**2 * c.s_alpha**2 * np.sin(chi * tau / 2) ** 2
    excess = (2 * n_network + 1) * (mode_weight + 1 / mode_weight) / 4 - 0.5
    return 2 * n_b * first + share * excess


def rwa_validity_report(spec: SystemSpec, W: WilliamsonDecomposition, mode_set: Sequence[int]) -> RWAReport:
    """Check the weak-coupling and isolated-resonance conditions of the reduction."""
    mode_set = tuple(int(m) for m in mode_set)
    eps = max((a.epsilon for a in spec.attachments), default=0.0)
    ratio = eps / spec.Omega
    others = [k for k in range(1, W.n_modes + 1) if k not in mode_set]
    detuning = float(min((abs(W.spectrum[k - 1] - spec.Omega) for k in others), default=np.inf))
    grouping = group_degenerate_modes(W.spectrum)
    group = grouping.group_of(mode_set[0]) if mode_set else ()
    msgs = []
    if ratio > RWA_EPS_RATIO_LIMIT:
        msgs.append(f"coupling eps/Omega = {ratio:.3g} exceeds {RWA_EPS_RATIO_LIMIT}")
    if detuning < RWA_DETUNING_FACTOR * eps:
        msgs.append(
            f"off-resonant mode within {detuning:.3g} of Omega, less than {RWA_DETUNING_FACTOR:g} eps"
        )
    missing = [k for k in group if k not in mode_set]
    if missing:
        msgs.append(f"modes {missing} are degenerate with the resonant set but excluded")
    resonance = max((abs(W.spectrum[k - 1] - spec.Omega) for k in mode_set), default=0.0)
    if resonance > grouping.tolerance and resonance > 1e-9 * spec.Omega:
        msgs.append(f"Omega is detuned from the resonant modes by {resonance:.3g}")
    for msg in msgs:
        warnings.warn(msg, RWAWarning, stacklevel=2)
    return RWAReport(
        eps_over_Omega=float(ratio),
        min_offresonant_detuning=detuning,
        degenerate_group=tuple(group),
        warnings=tuple(msgs),
    )


def match_resonant_modes(W: WilliamsonDecomposition, frequency: float, tol: Optional[float] = None) -> Tuple[int, ...]:
    """Degeneracy group whose frequency lies within ``tol`` of ``frequency``.

    Raises:
        InvalidArgumentError: when no group or more than one group matches
    """
    if tol is None:
        tol = 1e-9 * abs(frequency)
    grouping = group_degenerate_modes(W.spectrum)
    hits = [g for g in grouping.groups if min(abs(W.spectrum[k - 1] - frequency) for k in g) <= tol]
    if not hits:
        nearest = int(np.argmin(np.abs(W.spectrum - frequency))) + 1
        raise InvalidArgumentError(
            f"no normal mode within {tol:g} of {frequency:g} (nearest: mode {nearest} at {W.spectrum[nearest - 1]:.12g})"
        )
    if len(hits) > 1:
        raise InvalidArgumentError(f"frequency {frequency:g} matches several groups {hits}; tighten the tolerance")
    return hits[0]
