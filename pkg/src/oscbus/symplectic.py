"""Symplectic linear algebra in the (q_1..q_n, p_1..p_n) phase-space ordering.

Everything here is a pure function of its inputs. Mode labels exposed to
callers (``ModeGrouping.groups``) are 1-based; array indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError, InvalidDimensionError, NotPositiveDefiniteError

__all__ = [
    "QuadraticForm",
    "WilliamsonDecomposition",
    "NormalFormReport",
    "ModeGrouping",
    "symplectic_form",
    "is_symplectic",
    "williamson",
    "symplectic_spectrum",
    "check_normal_form_conditions",
    "group_degenerate_modes",
    "align_to_diagonal_gram",
]

SYMMETRY_TOL = 1e-12
PD_TOL = 1e-12
SQRT_CLAMP = 1e-14


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    r"""Symmetric Hessian of a quadratic Hamiltonian :math:`H = \tfrac12 X^T M X`.

    Args:
        matrix (array): real symmetric :math:`2n\times 2n` matrix
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 or m.shape[0] == 0:
            raise InvalidDimensionError(f"quadratic form must be square of even size, got {m.shape}")
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.T).max() > SYMMETRY_TOL * scale:
            raise InvalidArgumentError("quadratic form is not symmetric")
        m = (m + m.T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def blocks(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The ``(M_Q, M_C, M_P)`` blocks of ``[[M_Q, M_C], [M_C^T, M_P]]``."""
        n = self.n_modes
        m = self.matrix
        return m[:n, :n], m[:n, n:], m[n:, n:]


@dataclass(frozen=True, eq=False)
class WilliamsonDecomposition:
    """Symplectic ``S`` with ``S M S^T = Diag(s, s)``.

    ``spectrum`` is ascending, ``O`` is the orthogonal factor in
    ``S = Lambda^{1/2} O M^{-1/2}``. For closed-form decompositions ``O`` may be
    ``None``.
    """

    S: np.ndarray
    spectrum: np.ndarray
    O: Optional[np.ndarray] = None

    @property
    def n_modes(self) -> int:
        return len(self.spectrum)

    def normal_form(self) -> np.ndarray:
        return np.diag(np.concatenate([self.spectrum, self.spectrum]))


@dataclass(frozen=True, eq=False)
class NormalFormReport:
    conditions_hold: bool
    residuals: Tuple[float, float]
    L: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ModeGrouping:
    """Partition of 1-based mode labels into degeneracy groups."""

    groups: Tuple[Tuple[int, ...], ...]
    tolerance: float

    def group_of(self, mode: int) -> Tuple[int, ...]:
        for g in self.groups:
            if mode in g:
                return g
        raise InvalidArgumentError(f"mode {mode} is not part of the grouping")


def symplectic_form(n: int) -> np.ndarray:
    """Return the ``2n x 2n`` block matrix ``[[0, I], [-I, 0]]`` (integer dtype)."""
    if int(n) != n or n < 1:
        raise InvalidDimensionError(f"number of modes must be a positive integer, got {n}")
    n = int(n)
    eye = np.eye(n, dtype=int)
    zero = np.zeros((n, n), dtype=int)
    return np.block([[zero, eye], [-eye, zero]])


def _as_matrix(M) -> np.ndarray:
    if isinstance(M, QuadraticForm):
        return M.matrix
    return QuadraticForm(M).matrix


def is_symplectic(S, tol: float = 1e-10) -> bool:
    """True iff ``max|S^T J S - J| <= tol``."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
        raise InvalidDimensionError(f"expected an even square matrix, got shape {S.shape}")
    J = symplectic_form(S.shape[0] // 2)
    return bool(np.abs(S.T @ J @ S - J).max() <= tol)


def _check_positive_definite(evals: np.ndarray) -> None:
    top = evals.max()
    if top <= 0 or evals.min() <= PD_TOL * top:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (smallest eigenvalue {evals.min():.6g})",
            eigenvalue=float(evals.min()),
        )


def _sqrt_and_inverse_sqrt(m: np.ndarray):
    evals, evecs = np.linalg.eigh(m)
    _check_positive_definite(evals)
    evals = np.maximum(evals, SQRT_CLAMP * evals.max())
    root = (evecs * np.sqrt(evals)) @ evecs.T
    inv_root = (evecs / np.sqrt(evals)) @ evecs.T
    return (root + root.T) / 2, (inv_root + inv_root.T) / 2


def _canonical_basis(P: np.ndarray, dim: int) -> list:
    # Gram-Schmidt over projected unit vectors e_0, e_1, ... in index order.
    # A residual threshold of 1/(2*size) always collects `dim` vectors in one pass.
    size = P.shape[0]
    threshold = 1.0 / (2 * size)
    basis = []
    for j in range(size):
        r = P[:, j].copy()
        for b in basis:
            r = r - b * np.vdot(b, r)
        nrm = np.linalg.norm(r)
        if nrm**2 >= threshold:
            basis.append(r / nrm)
            if len(basis) == dim:
                break
    if len(basis) != dim:  # pragma: no cover - guarded by the threshold argument above
        raise RuntimeError("failed to build a canonical basis")
    return basis


def _fix_phase(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    idx = int(np.argmax(mags > 1e-8 * mags.max()))
    return v * (np.conj(v[idx]) / mags[idx])


def _lex_key(v: np.ndarray):
    return tuple(np.round(np.abs(v), 10))


def williamson(M, tol: Optional[float] = None) -> WilliamsonDecomposition:
    r"""Williamson normal form of a positive definite quadratic form.

    Builds ``K = M^{1/2} J M^{1/2}``, takes the eigenvectors ``w = (u + iv)/sqrt(2)``
    of the Hermitian ``-iK`` with positive eigenvalues ``s_k`` and stacks the
    rows ``u_k`` then ``v_k`` into an orthogonal ``O`` with
    ``O K O^T = Diag(s, s) J``. Finally ``S = Diag(s, s)^{1/2} O M^{-1/2}``.

    Inside a degenerate eigenspace the basis is fixed by Gram-Schmidt over the
    projected standard basis, every vector is rephased so that its first
    nonzero component is real positive, and vectors are sorted in descending
    lexicographic order of their absolute components.

    Args:
        M (QuadraticForm or array): positive definite symmetric matrix
        tol (float): degeneracy tolerance, defaults to ``1e-9 * max(s)``

    Returns:
        WilliamsonDecomposition
    """
    m = _as_matrix(M)
    n = m.shape[0] // 2
    root, inv_root = _sqrt_and_inverse_sqrt(m)
    J = symplectic_form(n)
    K = root @ J @ root
    K = (K - K.T) / 2
    evals, evecs = np.linalg.eigh(-1j * K)
    s = evals[n:]
    W = evecs[:, n:]

    grouping = group_degenerate_modes(s, tol)
    us, vs = [], []
    for group in grouping.groups:
        cols = W[:, [k - 1 for k in group]]
        if len(group) == 1:
            basis = [cols[:, 0]]
        else:
            basis = _canonical_basis(cols @ cols.conj().T, len(group))
        basis = sorted((_fix_phase(b) for b in basis), key=_lex_key, reverse=True)
        for b in basis:
            us.append(np.sqrt(2) * b.real)
            vs.append(np.sqrt(2) * b.imag)
    O = np.vstack(us + vs)
    lam = np.concatenate([s, s])
    S = np.sqrt(lam)[:, None] * (O @ inv_root)
    return WilliamsonDecomposition(S=S, spectrum=s.copy(), O=O)


def symplectic_spectrum(M) -> np.ndarray:
    """Ascending moduli of the imaginary eigenvalues of ``J M``."""
    m = _as_matrix(M)
    n = m.shape[0] // 2
    _check_positive_definite(np.linalg.eigvalsh(m))
    ev = np.linalg.eigvals(symplectic_form(n) @ m)
    mags = np.sort(np.abs(ev.imag))
    return mags.reshape(n, 2).mean(axis=1)


def group_degenerate_modes(spectrum: Sequence[float], tol: Optional[float] = None) -> ModeGrouping:
    """Split an ascending spectrum into groups of (numerically) equal values.

    A new group starts whenever the gap to the previous value exceeds ``tol``;
    a group whose total span exceeds ``tol`` is ambiguous and rejected.
    """
    s = np.asarray(spectrum, dtype=float)
    if tol is None:
        tol = 1e-9 * float(np.abs(s).max()) if s.size else 0.0
    if tol < 0:
        raise InvalidArgumentError(f"tolerance must be nonnegative, got {tol}")
    if np.any(np.diff(s) < -tol):
        raise InvalidArgumentError("spectrum must be ascending")
    groups = []
    current = [1]
    for k in range(1, len(s)):
        if s[k] - s[k - 1] > tol:
            groups.append(tuple(current))
            current = []
        current.append(k + 1)
    if len(s):
        groups.append(tuple(current))
    for g in groups:
        if s[g[-1] - 1] - s[g[0] - 1] > tol:
            raise InvalidArgumentError(
                f"modes {g} chain together but span more than the tolerance {tol:g}"
            )
    return ModeGrouping(groups=tuple(groups), tolerance=float(tol))


def _eigen_clusters(evals: np.ndarray, tol: float):
    clusters = [[0]]
    for k in range(1, len(evals)):
        if evals[k] - evals[clusters[-1][-1]] > tol:
            clusters.append([])
        clusters[-1].append(k)
    return clusters


def align_to_diagonal_gram(W: WilliamsonDecomposition, tol: float = 1e-9) -> WilliamsonDecomposition:
    r"""Re-choose ``S`` inside each degeneracy group so that ``S S^T`` is diagonal.

    Williamson matrices are unique only up to symplectic rotations acting within
    groups of equal symplectic eigenvalues. When ``S S^T`` is block diagonal
    over those groups, each block is symplectic and positive, so its
    eigenvectors pair up as ``(x, J^T x)`` with eigenvalues ``(l, 1/l)``. Rows
    with ``l <= 1`` are used as position rows. The result is returned whether
    or not full diagonality is reachable; callers check ``S S^T`` themselves.
    """
    S = np.array(W.S, dtype=float)
    n = W.n_modes
    grouping = group_degenerate_modes(W.spectrum)
    for group in grouping.groups:
        d = len(group)
        idx = [k - 1 for k in group] + [k - 1 + n for k in group]
        rows = S[idx, :]
        G = rows @ rows.T
        G = (G + G.T) / 2
        Jd = symplectic_form(d).astype(float)
        evals, evecs = np.linalg.eigh(G)
        q_rows = []
        for cluster in _eigen_clusters(evals, tol * max(1.0, evals.max())):
            lam = evals[cluster].mean()
            vecs = evecs[:, cluster]
            if lam > 1 + tol:
                continue
            P = vecs @ vecs.T
            if abs(lam - 1) <= tol:
                # eigenspace is J-invariant: pick a complex-orthonormal basis (x, J^T x)
                chosen = []
                threshold = 1.0 / (2 * 2 * d)
                for j in range(2 * d):
                    r = P[:, j].copy()
                    for c in chosen:
                        r -= c * (c @ r)
                        jc = Jd.T @ c
                        r -= jc * (jc @ r)
                    nrm = np.linalg.norm(r)
                    if nrm**2 >= threshold:
                        chosen.append(r / nrm)
                        if 2 * len(chosen) == len(cluster):
                            break
                q_rows.extend(chosen)
            else:
                q_rows.extend(np.real(b) for b in _canonical_basis(P, len(cluster)))
        if len(q_rows) != d:
            # Gram matrix is not symplectic within the group; leave the group untouched.
            continue
        X = np.vstack(q_rows)
        fixed = []
        for x in X:
            k = int(np.argmax(np.abs(x) > 1e-8 * np.abs(x).max()))
            fixed.append(x if x[k] > 0 else -x)
        X = np.vstack(fixed)
        Kmat = np.vstack([X, X @ Jd])
        S[idx, :] = Kmat @ rows
    return WilliamsonDecomposition(S=S, spectrum=W.spectrum.copy(), O=None)


def check_normal_form_conditions(M) -> NormalFormReport:
    """Test whether a symplectic rotation brings ``M`` to ``L Lambda L^T``.

    Evaluates both block conditions on ``M_Q, M_P, M_C`` and, when they hold
    for a positive definite ``M``, constructs ``L`` and the symplectic
    orthogonal ``R`` from a Williamson matrix with diagonal ``S S^T``.
    """
    form = M if isinstance(M, QuadraticForm) else QuadraticForm(M)
    MQ, MC, MP = form.blocks
    r1 = np.linalg.norm(MQ @ MP - MP @ MQ - (MC @ MC - MC.T @ MC.T))
    r2 = np.linalg.norm(MP @ MC - MC.T @ MP - (MC @ MQ - MQ @ MC.T))
    bound = 1e-10 * np.linalg.norm(form.matrix)
    holds = bool(r1 <= bound and r2 <= bound)
    L = R = None
    if holds:
        try:
            W = align_to_diagonal_gram(williamson(form))
        except NotPositiveDefiniteError:
            W = None
        if W is not None:
            n = form.n_modes
            gram = W.S @ W.S.T
            if np.abs(gram - np.diag(np.diag(gram))).max() <= 1e-8 * np.abs(gram).max():
                L = np.sqrt(np.diag(gram)[n:])
                R = np.concatenate([L, 1 / L])[:, None] * W.S
    return NormalFormReport(conditions_hold=holds, residuals=(float(r1), float(r2)), L=L, R=R)
