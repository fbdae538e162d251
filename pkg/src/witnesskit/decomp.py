"""Decompositions of witnesses into product projectors (pseudo-mixtures) and
into correlated local measurement settings."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .opalg import (
    SZ,
    BipartiteDims,
    as_dims,
    basis_ket,
    gellmann_basis,
    generalized_expand,
    herm_eig,
    hs_norm,
    numerical_rank,
    partial_transpose,
    product_proj,
    proj,
    schmidt,
)
from .states import upb_states

log = logging.getLogger(__name__)

RAY_TOL = 1e-10
COEFF_TOL = 1e-14


@dataclass
class PseudoMixture:
    """``sum_i c_i |a_i><a_i| (x) |b_i><b_i|`` with real ``c_i``."""

    terms: list[tuple[float, np.ndarray, np.ndarray]]
    dims: BipartiteDims = BipartiteDims(2, 2)

    def __post_init__(self):
        self.dims = as_dims(self.dims)
        self.terms = [(float(c), np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
                      for c, a, b in self.terms]

    def __len__(self):
        return len(self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _, _ in self.terms])

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.dims.total, self.dims.total), dtype=complex)
        for c, a, b in self.terms:
            out += c * product_proj(a, b)
        return out


@dataclass
class Setting:
    """A pair of local orthonormal bases (kets as columns) measured jointly;
    ``weights[k, l]`` multiplies the outcome projector ``|a_k b_l><a_k b_l|``."""

    basis_a: np.ndarray
    basis_b: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.basis_a = np.asarray(self.basis_a, dtype=complex)
        self.basis_b = np.asarray(self.basis_b, dtype=complex)
        self.weights = np.asarray(self.weights, dtype=float)
        for name, basis in (("basis_a", self.basis_a), ("basis_b", self.basis_b)):
            n = basis.shape[0]
            if basis.shape != (n, n) or np.max(np.abs(basis.conj().T @ basis - np.eye(n))) > RAY_TOL:
                raise ValueError(f"{name} is not an orthonormal basis")
        if self.weights.shape != (self.basis_a.shape[0], self.basis_b.shape[0]):
            raise ValueError("weights shape does not match the bases")

    def contribution(self) -> np.ndarray:
        pa = np.einsum("ik,jk->kij", self.basis_a, self.basis_a.conj())
        pb = np.einsum("ik,jk->kij", self.basis_b, self.basis_b.conj())
        na, nb = len(pa), len(pb)
        t = np.einsum("kl,kpq,lrs->prqs", self.weights, pa, pb)
        return t.reshape(na * nb, na * nb)

    def outcome_probabilities(self, rho: np.ndarray) -> np.ndarray:
        """Born probabilities of the joint outcomes ``(k, l)`` for ``rho``."""
        joint = np.kron(self.basis_a, self.basis_b)  # column k*nb + l = |a_k b_l>
        p = np.einsum("ik,ij,jk->k", joint.conj(), rho, joint).real
        return p.reshape(self.weights.shape)


@dataclass
class SettingDecomposition:
    settings: list[Setting]
    dims: BipartiteDims = BipartiteDims(2, 2)

    def __post_init__(self):
        self.dims = as_dims(self.dims)

    def __len__(self):
        return len(self.settings)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.dims.total, self.dims.total), dtype=complex)
        for s in self.settings:
            out += s.contribution()
        return out

    @property
    def n_terms(self) -> int:
        return int(sum(np.count_nonzero(np.abs(s.weights) > COEFF_TOL) for s in self.settings))


# --- setting merging -----------------------------------------------------


def _ray_permutation(u: np.ndarray, v: np.ndarray) -> np.ndarray | None:
    """Permutation ``perm`` with column ``perm[k]`` of ``v`` parallel to column
    ``k`` of ``u``, or None when the bases span different rays."""
    ov = np.abs(u.conj().T @ v)
    perm = np.argmax(ov, axis=1)
    if len(set(perm.tolist())) != len(perm) or np.any(np.abs(ov[np.arange(len(perm)), perm] - 1) > RAY_TOL):
        return None
    return perm


def merge_settings(settings: list[Setting]) -> list[Setting]:
    """Merge settings whose basis pairs agree up to phases and outcome order."""
    merged: list[Setting] = []
    for s in settings:
        for m in merged:
            pa = _ray_permutation(m.basis_a, s.basis_a)
            pb = _ray_permutation(m.basis_b, s.basis_b)
            if pa is not None and pb is not None:
                m.weights = m.weights + s.weights[np.ix_(pa, pb)]
                break
        else:
            merged.append(Setting(s.basis_a.copy(), s.basis_b.copy(), s.weights.copy()))
    return [m for m in merged if np.any(np.abs(m.weights) > COEFF_TOL)]


def merged(sd: SettingDecomposition) -> SettingDecomposition:
    return SettingDecomposition(merge_settings(sd.settings), sd.dims)


# --- grouping product projectors into settings -----------------------------


def _compatible(u: np.ndarray, v: np.ndarray) -> bool:
    x = abs(np.vdot(u, v))
    return x < RAY_TOL or abs(x - 1) < RAY_TOL


def _complete_basis(rays: list[np.ndarray], n: int) -> np.ndarray:
    cols: list[np.ndarray] = []
    for r in rays:
        if not any(abs(abs(np.vdot(c, r)) - 1) < RAY_TOL for c in cols):
            cols.append(r / np.linalg.norm(r))
    basis = np.column_stack(cols) if cols else np.zeros((n, 0), dtype=complex)
    if basis.shape[1] < n:
        rest = scipy.linalg.null_space(basis.conj().T) if cols else np.eye(n, dtype=complex)
        basis = np.column_stack([basis, rest])
    return basis


def _ray_index(basis: np.ndarray, v: np.ndarray) -> int | None:
    ov = np.abs(basis.conj().T @ v)
    k = int(np.argmax(ov))
    return k if abs(ov[k] - 1) < RAY_TOL else None


def _setting_from_terms(terms, basis_a, basis_b) -> Setting:
    w = np.zeros((basis_a.shape[1], basis_b.shape[1]))
    for c, a, b in terms:
        k, l = _ray_index(basis_a, a), _ray_index(basis_b, b)
        if k is None or l is None:
            raise ValueError("term is not an outcome of the given basis pair")
        w[k, l] += c
    return Setting(basis_a, basis_b, w)


def group_into_settings(pm: PseudoMixture) -> SettingDecomposition:
    """Greedy grouping of product projectors into jointly measurable settings.

    A term joins a group when its local vectors are parallel or orthogonal to
    every local vector already there. The count is an upper bound on the
    optimal number of settings for this particular pseudo-mixture.
    """
    groups: list[list] = []
    for term in pm.terms:
        if abs(term[0]) <= COEFF_TOL:
            continue
        _, a, b = term
        for g in groups:
            if all(_compatible(a, ga) and _compatible(b, gb) for _, ga, gb in g):
                g.append(term)
                break
        else:
            groups.append([term])
    settings = []
    for g in groups:
        ba = _complete_basis([a for _, a, _ in g], pm.dims.n_a)
        bb = _complete_basis([b for _, _, b in g], pm.dims.n_b)
        settings.append(_setting_from_terms(g, ba, bb))
    return SettingDecomposition(merge_settings(settings), pm.dims)


# --- two-qubit decompositions ----------------------------------------------


def _check_alpha_beta(alpha: float, beta: float) -> None:
    if abs(alpha * alpha + beta * beta - 1) > 1e-12:
        raise ValueError(f"alpha^2 + beta^2 must equal 1, got {alpha * alpha + beta * beta:.15g}")


def phi_pt(alpha: float, beta: float) -> np.ndarray:
    """``(|phi><phi|)^{T_A}`` for ``phi = alpha|00> + beta|11>``."""
    phi = np.zeros(4, dtype=complex)
    phi[0], phi[3] = alpha, beta
    return partial_transpose(proj(phi), (2, 2))


def onp_two_qubit(alpha: float, beta: float) -> PseudoMixture:
    """Five-term pseudo-mixture of ``(|phi><phi|)^{T_A}``,
    ``phi = alpha|00> + beta|11>``.

    Three equally weighted terms on ``|f_k f_k>`` (cube roots of unity in the
    relative phase) and two negative terms on ``|01>`` and ``|10>``. If
    ``alpha * beta < 0`` the decomposition is built for ``(|alpha|, |beta|)``
    and every B-side vector is rotated by ``sigma_z``.
    """
    _check_alpha_beta(alpha, beta)
    if alpha * beta == 0:
        raise ValueError("alpha and beta must both be nonzero")
    flip = alpha * beta < 0
    al, be = abs(alpha), abs(beta)
    c, s = math.sqrt(al / (al + be)), math.sqrt(be / (al + be))
    w = np.exp(1j * math.pi / 3)
    f1 = np.array([c / w, w * s])
    fs = [f1, f1.conj(), np.array([c, s], dtype=complex)]
    e0, e1 = basis_ket(2, 0), basis_ket(2, 1)
    weight = (al + be) ** 2 / 3
    terms = [(weight, f, f) for f in fs] + [(-al * be, e0, e1), (-al * be, e1, e0)]
    if flip:
        terms = [(c_, a, SZ @ b) for c_, a, b in terms]
    return PseudoMixture(terms, (2, 2))


_S = 1 / math.sqrt(2)
Z_BASIS = np.eye(2, dtype=complex)
X_BASIS = np.array([[_S, _S], [_S, -_S]], dtype=complex)  # columns x+, x-
Y_BASIS = np.array([[_S, _S], [1j * _S, -1j * _S]], dtype=complex)  # columns y+, y-


def ons_two_qubit(alpha: float, beta: float) -> SettingDecomposition:
    """Three-setting (zz, xx, yy) decomposition of ``(|phi><phi|)^{T_A}``.

    Settings whose weights all vanish (``alpha * beta == 0``) are dropped.
    """
    _check_alpha_beta(alpha, beta)
    ab = alpha * beta
    settings = [
        Setting(Z_BASIS, Z_BASIS, [[alpha**2, 0], [0, beta**2]]),
        Setting(X_BASIS, X_BASIS, [[ab, 0], [0, ab]]),
        Setting(Y_BASIS, Y_BASIS, [[0, -ab], [-ab, 0]]),
    ]
    return SettingDecomposition([s for s in settings if np.any(s.weights != 0)], (2, 2))


def two_qubit_pt_form(op: np.ndarray, tol: float = 1e-10):
    """Write a two-qubit operator as ``scale * ((U (x) V)|phi><phi|(U (x) V)^dag)^{T_A}``
    with ``phi = alpha|00> + beta|11>``.

    Returns ``(scale, alpha, beta, U, V)``; raises if ``op^{T_A}`` is not rank one.
    """
    op = np.asarray(op, dtype=complex)
    if op.shape != (4, 4):
        raise ValueError("expected a two-qubit operator")
    w, v = herm_eig(partial_transpose(op, (2, 2)))
    big = np.abs(w) > tol * max(1.0, np.max(np.abs(w)))
    if np.count_nonzero(big) != 1:
        raise ValueError("operator is not the partial transpose of a rank-one operator")
    k = int(np.flatnonzero(big)[0])
    sf = schmidt(v[:, k], (2, 2))
    return float(w[k]), float(sf.coefficients[0]), float(sf.coefficients[1]), sf.basis_a, sf.basis_b


def decompose_two_qubit_witness(op: np.ndarray, mode: str):
    """Optimal decomposition of a two-qubit witness ``(|e><e|)^{T_A}`` (up to scale).

    ``mode`` is ``"onp"`` (5-term pseudo-mixture) or ``"ons"`` (3 settings).
    Local unitaries map the canonical decompositions onto the operator.
    """
    scale, alpha, beta, U, V = two_qubit_pt_form(op)
    Ua = U.conj()
    if mode == "onp":
        pm = onp_two_qubit(alpha, beta)
        return PseudoMixture([(scale * c, Ua @ a, V @ b) for c, a, b in pm.terms], (2, 2))
    if mode == "ons":
        sd = ons_two_qubit(alpha, beta)
        return SettingDecomposition(
            [Setting(Ua @ s.basis_a, V @ s.basis_b, scale * s.weights) for s in sd.settings], (2, 2))
    raise ValueError(f"mode must be 'onp' or 'ons', got {mode!r}")


# --- generic decomposition and bounds -----------------------------------------


def _local_basis(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbasis (columns) and eigenvalues of a local Hermitian factor."""
    if np.max(np.abs(g - np.diag(np.diag(g)))) == 0:
        return np.eye(len(g), dtype=complex), np.diag(g).real
    w, v = np.linalg.eigh(g)
    return v, w


def _diag_in(basis: np.ndarray, g: np.ndarray) -> np.ndarray | None:
    d = basis.conj().T @ g @ basis
    if np.max(np.abs(d - np.diag(np.diag(d)))) > RAY_TOL:
        return None
    return np.diag(d).real


def generic_setting_decomposition(op: np.ndarray, dims) -> SettingDecomposition:
    """A valid, generally non-optimal, setting decomposition of any Hermitian
    operator built from its Gell-Mann product expansion.

    Each correlation term ``G_i (x) H_j`` is measured in the joint eigenbasis
    of its factors; terms with an identity factor ride along with any setting
    whose other basis already diagonalizes them.
    """
    dims = as_dims(dims)
    c = generalized_expand(op, dims)
    ga, gb = gellmann_basis(dims.n_a), gellmann_basis(dims.n_b)
    scale = max(1.0, float(np.max(np.abs(c))))
    nz = [(i, j) for i in range(c.shape[0]) for j in range(c.shape[1]) if abs(c[i, j]) > 1e-13 * scale]
    settings: list[Setting] = []
    for i, j in nz:
        if i and j:
            ba, wa = _local_basis(ga[i])
            bb, wb = _local_basis(gb[j])
            settings.append(Setting(ba, bb, c[i, j] * np.outer(wa, wb)))
    settings = merge_settings(settings)
    for i, j in nz:
        if i and j:
            continue
        placed = False
        for s in settings:
            wa, wb = _diag_in(s.basis_a, ga[i]), _diag_in(s.basis_b, gb[j])
            if wa is not None and wb is not None:
                s.weights = s.weights + c[i, j] * np.outer(wa, wb)
                placed = True
                break
        if not placed:
            ba, wa = _local_basis(ga[i])
            bb, wb = _local_basis(gb[j])
            settings.append(Setting(ba, bb, c[i, j] * np.outer(wa, wb)))
    return SettingDecomposition(merge_settings(settings), dims)


def correlation_rank(op: np.ndarray, dims) -> int:
    """Rank of the traceless-traceless block of the Gell-Mann product expansion."""
    c = generalized_expand(op, dims)
    return numerical_rank(c[1:, 1:], 1e-10)


def settings_lower_bound(op: np.ndarray, dims, full_schmidt_projector: bool = False) -> int:
    """Lower bound on the number of settings needed to measure ``op``.

    A single setting contributes a correlation block of rank at most
    ``min(n_a, n_b) - 1``, so at least ``ceil(rank / (min(n_a, n_b) - 1))``
    settings are required (for two qubits: the rank itself). If the caller
    flags ``op`` as the partial transpose of a full-Schmidt-rank projector,
    the ``N + 1`` bound is also applied and the larger value returned.
    """
    dims = as_dims(dims)
    op = np.asarray(op, dtype=complex)
    if hs_norm(op) == 0:
        return 0
    n = min(dims)
    r = correlation_rank(op, dims)
    bound = max(1, math.ceil(r / (n - 1))) if n > 1 else 1
    if full_schmidt_projector:
        log.info("settings lower bound: correlation-rank bound %d, N+1 bound %d", bound, n + 1)
        bound = max(bound, n + 1)
    return bound


@dataclass(frozen=True)
class GeneralizationCounts:
    n: int
    m: int
    onp_lower: int
    onp_upper: int
    ons_lower: int
    ons_upper: int

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "onp_lower": self.onp_lower, "onp_upper": self.onp_upper,
                "ons_upper": self.ons_upper, "ons_lower": self.ons_lower}


def generalization_counts(n: int, m: int) -> GeneralizationCounts:
    """Projector and setting counts for witnesses ``(|phi><phi|)^{T_A}`` of
    full Schmidt rank in an ``n x m`` system (``n <= m``)."""
    if n < 2 or n > m:
        raise ValueError(f"need 2 <= n <= m, got n={n}, m={m}")
    if n == 2:
        return GeneralizationCounts(n, m, 5, 5, 3, 3)
    return GeneralizationCounts(n, m, n * n, 2 * n * n - n, n + 1, 2 * n - 1 if n % 2 == 0 else 2 * n)


# --- UPB witness decompositions ---------------------------------------------


def _b(*cols) -> np.ndarray:
    return np.column_stack([np.asarray(c, dtype=complex) / np.linalg.norm(c) for c in cols])


UPB_BASES = {
    "B1": _b([1, 0, 0], [0, 1, 0], [0, 0, 1]),
    "B2": _b([1, -1, 0], [0, 0, 1], [1, 1, 0]),
    "B3": _b([0, 1, -1], [1, 0, 0], [0, 1, 1]),
    "B4": _b([1, -1, 0], [1, 1, 1], [1, 1, -2]),
}

WITNESS_SETTING_PAIRS = [("B1", "B2"), ("B2", "B1"), ("B1", "B3"), ("B3", "B1"), ("B4", "B4"), ("B1", "B1")]


def upb_complement_states() -> list[tuple[np.ndarray, np.ndarray]]:
    """Product vectors completing the first four UPB members to an orthonormal
    basis, as ``(a, b)`` pairs."""
    s = 1 / math.sqrt(2)
    e0, e1, e2 = (basis_ket(3, i) for i in range(3))
    return [(e0, s * (e0 + e1)), (e2, s * (e1 + e2)), (s * (e0 + e1), e2), (s * (e1 + e2), e0), (e1, e1)]


def upb_product_factors() -> list[tuple[np.ndarray, np.ndarray]]:
    s = 1 / math.sqrt(2)
    e0, e1, e2 = (basis_ket(3, i) for i in range(3))
    u = (e0 + e1 + e2) / math.sqrt(3)
    return [(e0, s * (e0 - e1)), (s * (e0 - e1), e2), (e2, s * (e1 - e2)), (s * (e1 - e2), e0), (u, u)]


def _settings_from_pairs(pm: PseudoMixture, pairs) -> SettingDecomposition:
    remaining = [t for t in pm.terms if abs(t[0]) > COEFF_TOL]
    settings = []
    for pa, pb in pairs:
        ba, bb = UPB_BASES[pa], UPB_BASES[pb]
        mine = [t for t in remaining if _ray_index(ba, t[1]) is not None and _ray_index(bb, t[2]) is not None]
        if not mine:
            continue
        settings.append(_setting_from_terms(mine, ba, bb))
        remaining = [t for t in remaining if not any(t is m for m in mine)]
    if remaining:
        raise ValueError("some terms fit none of the listed basis pairs")
    return SettingDecomposition(settings, (3, 3))


def upb_witness_pseudomixture(epsilon: float) -> PseudoMixture:
    """``sum_i |psi_i><psi_i| - epsilon * 1`` as a pseudo-mixture: the identity
    is split over the first four UPB members and five completing vectors."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    upb = upb_product_factors()
    terms = [(1 - epsilon, a, b) for a, b in upb[:4]] + [(1.0, *upb[4])]
    if epsilon > 0:
        terms += [(-epsilon, a, b) for a, b in upb_complement_states()]
    return PseudoMixture(terms, (3, 3))


def upb_witness_settings(epsilon: float) -> SettingDecomposition:
    return _settings_from_pairs(upb_witness_pseudomixture(epsilon), WITNESS_SETTING_PAIRS)


def upb_identity_replacement() -> np.ndarray:
    """Full-rank positive operator: unit-weight sum of projectors onto the five
    UPB members and the first four completing vectors."""
    vecs = upb_states() + [np.kron(a, b) for a, b in upb_complement_states()[:4]]
    return sum(proj(v) for v in vecs)


def upb_onp_decomposition(epsilon_prime: float) -> PseudoMixture:
    """Nine-projector pseudo-mixture of ``sum_i |psi_i><psi_i| - epsilon' * I``
    with ``I`` from :func:`upb_identity_replacement`."""
    if epsilon_prime < 0:
        raise ValueError("epsilon_prime must be non-negative")
    terms = [(1 - epsilon_prime, a, b) for a, b in upb_product_factors()]
    if epsilon_prime > 0:
        terms += [(-epsilon_prime, a, b) for a, b in upb_complement_states()[:4]]
    return PseudoMixture(terms, (3, 3))


def upb_onp_settings(epsilon_prime: float) -> SettingDecomposition:
    return _settings_from_pairs(upb_onp_decomposition(epsilon_prime), WITNESS_SETTING_PAIRS[:5])


# --- verification --------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    max_error: float
    coeff_sum: float
    n_terms: int
    n_settings: int
    ok: bool
    negative_weight: float = field(default=0.0)

    def to_dict(self) -> dict:
        return {"max_error": self.max_error, "coeff_sum": self.coeff_sum, "n_terms": self.n_terms,
                "n_settings": self.n_settings, "ok": self.ok, "negative_weight": self.negative_weight}


def verify_decomposition(target: np.ndarray, decomp, tol: float = 1e-10) -> VerificationReport:
    """Compare a decomposition with its target operator.

    ``max_error`` is the Hilbert-Schmidt distance between the two. Settings
    are counted after merging equivalent basis pairs; for a pseudo-mixture
    they are counted after greedy grouping.
    """
    target = np.asarray(target, dtype=complex)
    if isinstance(decomp, PseudoMixture):
        coeffs = decomp.coefficients
        n_terms = int(np.count_nonzero(np.abs(coeffs) > COEFF_TOL))
        n_settings = len(group_into_settings(decomp))
    else:
        coeffs = np.concatenate([s.weights.ravel() for s in decomp.settings]) if decomp.settings else np.zeros(0)
        n_terms = decomp.n_terms
        n_settings = len(merge_settings(decomp.settings))
    if target.shape != (decomp.dims.total, decomp.dims.total):
        raise ValueError("target and decomposition have different dimensions")
    err = hs_norm(target - decomp.reconstruct())
    return VerificationReport(err, float(coeffs.sum()), n_terms, n_settings, err <= tol,
                              float(coeffs[coeffs < 0].sum()))
