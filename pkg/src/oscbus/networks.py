"""Hessians for oscillator networks and for the full bus system.

Full-system phase-space ordering is ``(q_a, q_b, q_1..q_N, p_a, p_b, p_1..p_N)``.
Network sites are labelled 1..N by callers; arrays use 0-based indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidDimensionError,
    NotPositiveDefiniteError,
    UnsupportedTopologyError,
)
from .symplectic import QuadraticForm, WilliamsonDecomposition, williamson

__all__ = [
    "NETWORK_KINDS",
    "NetworkSpec",
    "Attachment",
    "SystemSpec",
    "build_chain_hessian",
    "build_triangle_hessian",
    "build_momentum_coupled_hessian",
    "build_network_hessian",
    "assemble_system_hessian",
    "analytic_williamson",
    "network_williamson",
    "external_index",
    "site_index",
]

NETWORK_KINDS = ("chain", "triangle", "momentum_coupled", "custom")
EXTERNAL_IDS = ("a", "b")


def _finite(name, value):
    if not np.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Description of the oscillator network.

    Args:
        kind (str): one of ``chain``, ``triangle``, ``momentum_coupled``, ``custom``
        N (int): number of sites
        omega (float): bare site frequency
        kappa (float): spring coupling
        kappa_prime (float): second spring coupling (triangle only)
        gamma (float): position-momentum cross coupling (momentum_coupled only)
        custom_hessian (QuadraticForm): network Hessian for ``custom`` networks
    """

    kind: str
    N: int = 0
    omega: float = 1.0
    kappa: float = 0.0
    kappa_prime: float = 0.0
    gamma: float = 0.0
    custom_hessian: Optional[QuadraticForm] = None

    def __post_init__(self):
        if self.kind not in NETWORK_KINDS:
            raise InvalidArgumentError(f"unknown network kind {self.kind!r}; expected one of {NETWORK_KINDS}")
        if self.kind == "custom":
            if self.custom_hessian is None:
                raise InvalidArgumentError("custom network requires custom_hessian")
            h = self.custom_hessian
            if not isinstance(h, QuadraticForm):
                h = QuadraticForm(h)
                object.__setattr__(self, "custom_hessian", h)
            if self.N not in (0, h.n_modes):
                raise InvalidDimensionError(f"N={self.N} does not match custom Hessian with {h.n_modes} modes")
            object.__setattr__(self, "N", h.n_modes)
            return
        for name in ("omega", "kappa", "kappa_prime", "gamma"):
            _finite(name, getattr(self, name))
        if self.omega <= 0:
            raise InvalidArgumentError(f"omega must be positive, got {self.omega}")
        if self.kappa < 0 or self.kappa_prime < 0:
            raise InvalidArgumentError("spring couplings must be nonnegative")
        if self.kind == "chain":
            if int(self.N) != self.N or self.N < 2:
                raise InvalidArgumentError(f"chain needs N >= 2 sites, got {self.N}")
            object.__setattr__(self, "N", int(self.N))
        else:
            if self.N not in (0, 3):
                raise InvalidArgumentError(f"{self.kind} network has exactly 3 sites, got N={self.N}")
            object.__setattr__(self, "N", 3)
        if self.kind == "momentum_coupled":
            if self.gamma < 0:
                raise InvalidArgumentError("gamma must be nonnegative")
            if self.omega <= self.kappa + self.gamma:
                raise NotPositiveDefiniteError(
                    f"momentum-coupled network needs omega > kappa + gamma "
                    f"(omega={self.omega}, kappa + gamma={self.kappa + self.gamma})",
                    eigenvalue=self.omega - self.kappa - self.gamma,
                )


@dataclass(frozen=True)
class Attachment:
    """Coupling ``eps/4 (q_site - q_x)^2`` between external oscillator ``x`` and a site.

    ``site`` is 1-based.
    """

    external_id: str
    site: int
    epsilon: float

    def __post_init__(self):
        if self.external_id not in EXTERNAL_IDS:
            raise InvalidArgumentError(f"external oscillator must be 'a' or 'b', got {self.external_id!r}")
        if int(self.site) != self.site:
            raise InvalidArgumentError(f"site must be an integer, got {self.site}")
        object.__setattr__(self, "site", int(self.site))
        _finite("epsilon", self.epsilon)
        if self.epsilon < 0:
            raise InvalidArgumentError(f"epsilon must be nonnegative, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    network: NetworkSpec
    Omega: float
    attachments: Tuple[Attachment, ...] = field(default_factory=tuple)
    hbar: float = 1.0

    def __post_init__(self):
        _finite("Omega", self.Omega)
        if self.Omega <= 0:
            raise InvalidArgumentError(f"Omega must be positive, got {self.Omega}")
        if not (self.hbar > 0 and np.isfinite(self.hbar)):
            raise InvalidArgumentError(f"hbar must be positive, got {self.hbar}")
        atts = tuple(self.attachments)
        for att in atts:
            if not 1 <= att.site <= self.network.N:
                raise InvalidArgumentError(
                    f"attachment site {att.site} outside the network sites 1..{self.network.N}"
                )
        object.__setattr__(self, "attachments", atts)

    @property
    def n_modes(self) -> int:
        return self.network.N + 2


def external_index(external_id: str) -> int:
    """0-based position of an external oscillator in the full system."""
    return EXTERNAL_IDS.index(external_id)


def site_index(site: int) -> int:
    """0-based position of a 1-based network site in the full system."""
    return site + 1


def _network_form(Q: np.ndarray, P: np.ndarray, C: Optional[np.ndarray] = None) -> QuadraticForm:
    n = Q.shape[0]
    if C is None:
        C = np.zeros((n, n))
    return QuadraticForm(np.block([[Q, C], [C.T, P]]))


def build_chain_hessian(N: int, omega: float, kappa: float) -> QuadraticForm:
    """Nearest-neighbour chain with free ends: ``H_N = Q (+) omega I``.

    Args:
        N (int): number of sites (>= 2)
        omega (float): site frequency
        kappa (float): spring constant

    Returns:
        QuadraticForm: ``2N x 2N`` network Hessian
    """
    spec = NetworkSpec("chain", N=N, omega=omega, kappa=kappa)
    N = spec.N
    Q = (omega + kappa) * np.eye(N) - kappa / 2 * (np.eye(N, k=1) + np.eye(N, k=-1))
    Q[0, 0] = Q[-1, -1] = omega + kappa / 2
    return _network_form(Q, omega * np.eye(N))


def build_triangle_hessian(omega: float, kappa: float, kappa_prime: float) -> QuadraticForm:
    """Three sites, site 1 coupled to 2 and 3 by ``kappa``, sites 2-3 by ``kappa_prime``."""
    NetworkSpec("triangle", N=3, omega=omega, kappa=kappa, kappa_prime=kappa_prime)
    k, kp = kappa, kappa_prime
    d = (k + kp) / 2 + omega
    Q = np.array(
        [
            [k + omega, -k / 2, -k / 2],
            [-k / 2, d, -kp / 2],
            [-k / 2, -kp / 2, d],
        ]
    )
    return _network_form(Q, omega * np.eye(3))


_PATH3 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


def build_momentum_coupled_hessian(omega: float, kappa: float, gamma: float) -> QuadraticForm:
    """Three sites with position-momentum cross terms.

    The off-diagonal block is ``gamma I - kappa/sqrt(2) A`` where ``A`` is the
    adjacency matrix of the path 1-2-3; it is positive definite iff
    ``omega > kappa + gamma``.
    """
    NetworkSpec("momentum_coupled", N=3, omega=omega, kappa=kappa, gamma=gamma)
    C = gamma * np.eye(3) - kappa / np.sqrt(2) * _PATH3
    return _network_form(omega * np.eye(3), omega * np.eye(3), C)


def build_network_hessian(network: NetworkSpec) -> QuadraticForm:
    if network.kind == "chain":
        return build_chain_hessian(network.N, network.omega, network.kappa)
    if network.kind == "triangle":
        return build_triangle_hessian(network.omega, network.kappa, network.kappa_prime)
    if network.kind == "momentum_coupled":
        return build_momentum_coupled_hessian(network.omega, network.kappa, network.gamma)
    return network.custom_hessian


def assemble_system_hessian(spec: SystemSpec) -> QuadraticForm:
    """Full Hessian of the two external oscillators plus the network.

    Each attachment ``(x, s, eps)`` contributes ``eps/4 (q_s - q_x)^2`` to the
    Hamiltonian, i.e. ``+eps/2`` on the two diagonal entries and ``-eps/2`` on
    the symmetric pair of cross entries.

    Raises:
        NotPositiveDefiniteError: if the assembled Hessian is not positive definite
    """
    HN = build_network_hessian(spec.network).matrix
    N = spec.network.N
    n = N + 2
    H = np.zeros((2 * n, 2 * n))
    for i in (0, 1):
        H[i, i] = spec.Omega
        H[n + i, n + i] = spec.Omega
    H[2:n, 2:n] = HN[:N, :N]
    H[2:n, n + 2 :] = HN[:N, N:]
    H[n + 2 :, 2:n] = HN[N:, :N]
    H[n + 2 :, n + 2 :] = HN[N:, N:]
    for att in spec.attachments:
        x = external_index(att.external_id)
        s = site_index(att.site)
        half = att.epsilon / 2
        H[x, x] += half
        H[s, s] += half
        H[x, s] -= half
        H[s, x] -= half
    evals = np.linalg.eigvalsh(H)
    if evals.min() <= 1e-12 * evals.max():
        raise NotPositiveDefiniteError(
            f"assembled system Hessian is not positive definite (smallest eigenvalue {evals.min():.6g})",
            eigenvalue=float(evals.min()),
        )
    return QuadraticForm(H)


def _chain_williamson(N: int, omega: float, kappa: float) -> WilliamsonDecomposition:
    j = np.arange(1, N + 1)[:, None]
    k = np.arange(1, N + 1)[None, :]
    O = np.sqrt((2 - (j == 1)) / N) * np.cos((j - 1) * (2 * k - 1) * np.pi / (2 * N))
    h = omega + kappa - kappa * np.cos((np.arange(N)) * np.pi / N)
    spectrum = np.sqrt(omega * h)
    return _diagonal_squeeze_williamson(O, (omega / h) ** 0.25, spectrum)


def _diagonal_squeeze_williamson(O, squeeze, spectrum) -> WilliamsonDecomposition:
    N = len(spectrum)
    Z = np.zeros((N, N))
    SO = squeeze[:, None] * O
    SiO = O / squeeze[:, None]
    S = np.block([[SO, Z], [Z, SiO]])
    return _sorted(S, spectrum)


def _sorted(S, spectrum) -> WilliamsonDecomposition:
    N = len(spectrum)
    order = np.argsort(spectrum, kind="stable")
    perm = np.concatenate([order, order + N])
    return WilliamsonDecomposition(S=S[perm], spectrum=np.asarray(spectrum)[order])


def _triangle_williamson(omega, kappa, kappa_prime) -> WilliamsonDecomposition:
    r3, r2, r6 = np.sqrt(3.0), np.sqrt(2.0), np.sqrt(6.0)
    O = np.array(
        [
            [1 / r3, 1 / r3, 1 / r3],
            [0.0, -1 / r2, 1 / r2],
            [-r2 / r3, 1 / r6, 1 / r6],
        ]
    )
    h = np.array([omega, omega + kappa / 2 + kappa_prime, omega + 3 * kappa / 2])
    return _diagonal_squeeze_williamson(O, (omega / h) ** 0.25, np.sqrt(omega * h))


def _momentum_williamson(omega, kappa, gamma) -> WilliamsonDecomposition:
    r2 = np.sqrt(2.0)
    O = np.array(
        [
            [0.5, -1 / r2, 0.5],
            [0.5, 1 / r2, 0.5],
            [-1 / r2, 0.0, 1 / r2],
        ]
    )
    c = np.array([kappa + gamma, gamma - kappa, gamma])
    squeeze = ((omega - c) / (omega + c)) ** 0.25
    spectrum = np.sqrt(omega**2 - c**2)
    I3 = np.eye(3)
    Z = np.zeros((3, 3))
    R = np.block([[I3, I3], [-I3, I3]]) / r2
    Sq = np.diag(np.concatenate([squeeze, 1 / squeeze]))
    OO = np.block([[O, Z], [Z, O]])
    return _sorted(Sq @ R @ OO, spectrum)


def analytic_williamson(network: NetworkSpec) -> WilliamsonDecomposition:
    """Closed-form Williamson decomposition of a built-in network Hessian.

    Raises:
        UnsupportedTopologyError: for ``custom`` networks
    """
    if network.kind == "chain":
        W = _chain_williamson(network.N, network.omega, network.kappa)
    elif network.kind == "triangle":
        W = _triangle_williamson(network.omega, network.kappa, network.kappa_prime)
    elif network.kind == "momentum_coupled":
        W = _momentum_williamson(network.omega, network.kappa, network.gamma)
    else:
        raise UnsupportedTopologyError(
            "no closed-form decomposition for custom networks; use the generic williamson"
        )
    # orthogonal factor of S = Lambda^{1/2} O M^{-1/2}
    M = build_network_hessian(network).matrix
    evals, evecs = np.linalg.eigh(M)
    root = (evecs * np.sqrt(evals)) @ evecs.T
    lam = np.concatenate([W.spectrum, W.spectrum])
    O = (W.S @ root) / np.sqrt(lam)[:, None]
    return WilliamsonDecomposition(S=W.S, spectrum=W.spectrum, O=O)


def network_williamson(network: NetworkSpec) -> WilliamsonDecomposition:
    """Closed form for built-in topologies, generic decomposition with diagonal ``S S^T`` otherwise."""
    if network.kind != "custom":
        return analytic_williamson(network)
    from .symplectic import align_to_diagonal_gram

    return align_to_diagonal_gram(williamson(network.custom_hessian))
