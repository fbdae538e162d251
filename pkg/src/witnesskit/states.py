"""State families: noisy targets, the correlated depolarizing channel family,
the UPB bound entangled state, random noise sampling and the PPT test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .opalg import (
    HERM_TOL,
    I2,
    SX,
    SY,
    SZ,
    BipartiteDims,
    as_dims,
    basis_ket,
    gellmann_basis,
    hs_norm,
    is_hermitian,
    kron,
    partial_transpose,
    proj,
    random_ket,
)

PSD_TOL = 1e-10
PPT_TOL = 1e-12
SEPARABLE_BALL_RADIUS = 1 / math.sqrt(12)


class SamplingError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


@dataclass(frozen=True, eq=False)
class BipartiteState:
    rho: np.ndarray
    dims: BipartiteDims = BipartiteDims(2, 2)

    def __post_init__(self):
        dims = as_dims(self.dims)
        rho = np.asarray(self.rho, dtype=complex)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "rho", rho)
        if rho.shape != (dims.total, dims.total):
            raise ValueError(f"density matrix of shape {rho.shape} does not match dims {tuple(dims)}")
        if not is_hermitian(rho, HERM_TOL):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise ValueError(f"density matrix has trace {np.trace(rho).real:.15g}, expected 1")
        lmin = np.linalg.eigvalsh(rho)[0]
        if lmin < -PSD_TOL:
            raise ValueError(f"density matrix is not positive semidefinite (min eigenvalue {lmin:.3g})")

    def partial_transpose(self) -> np.ndarray:
        return partial_transpose(self.rho, self.dims)

    def pt_min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.partial_transpose())[0])


def maximally_mixed(dims=(2, 2)) -> BipartiteState:
    dims = as_dims(dims)
    return BipartiteState(np.eye(dims.total, dtype=complex) / dims.total, dims)


def pure_state(psi: np.ndarray, dims=(2, 2)) -> BipartiteState:
    psi = np.asarray(psi, dtype=complex)
    return BipartiteState(proj(psi / np.linalg.norm(psi)), dims)


def target_ket(a: float, b: float | None = None) -> np.ndarray:
    """``a|01> + b|10>`` with ``b = sqrt(1 - a^2)`` unless given."""
    if b is None:
        b = math.sqrt(1 - a * a)
    v = np.zeros(4, dtype=complex)
    v[1], v[2] = a, b
    return v


def noisy_target(psi: np.ndarray, p: float, sigma: BipartiteState) -> BipartiteState:
    """``p |psi><psi| + (1 - p) sigma``."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise ValueError("psi must be normalized")
    if psi.shape != (sigma.dims.total,):
        raise ValueError("psi and sigma have mismatched dimensions")
    if p == 1:
        return BipartiteState(proj(psi), sigma.dims)
    return BipartiteState(p * proj(psi) + (1 - p) * sigma.rho, sigma.dims)


@dataclass(frozen=True)
class MemoryChannelParams:
    """Target Schmidt coefficient ``a``, depolarization survival ``eta`` and
    memory strength ``mu`` of a correlated depolarizing channel."""

    a: float
    eta: float
    mu: float

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        for name in ("eta", "mu"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def b(self) -> float:
        return math.sqrt(1 - self.a * self.a)


def memory_channel_state(params: MemoryChannelParams) -> BipartiteState:
    a, b, eta, mu = params.a, params.b, params.eta, params.mu
    corr = mu + (1 - mu) * eta**2
    rho = (
        kron(I2, I2)
        + eta * (a * a - b * b) * (kron(SZ, I2) - kron(I2, SZ))
        + corr * (-kron(SZ, SZ) + 2 * a * b * (kron(SX, SX) + kron(SY, SY)))
    ) / 4
    return BipartiteState(rho, (2, 2))


def upb_states() -> list[np.ndarray]:
    """The five orthogonal product vectors of the 3x3 'Tiles' UPB."""
    e0, e1, e2 = (basis_ket(3, i) for i in range(3))
    s = 1 / math.sqrt(2)
    u = (e0 + e1 + e2) / math.sqrt(3)
    return [
        np.kron(e0, s * (e0 - e1)),
        np.kron(s * (e0 - e1), e2),
        np.kron(e2, s * (e1 - e2)),
        np.kron(s * (e1 - e2), e0),
        np.kron(u, u),
    ]


def upb_projector() -> np.ndarray:
    return sum(proj(v) for v in upb_states())


def upb_rho_be() -> BipartiteState:
    return BipartiteState((np.eye(9, dtype=complex) - upb_projector()) / 4, (3, 3))


def upb_noisy(p: float) -> BipartiteState:
    """``p rho_BE + (1 - p) 1/9``."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return BipartiteState(p * upb_rho_be().rho + (1 - p) * np.eye(9) / 9, (3, 3))


@dataclass(frozen=True)
class NoiseBall:
    d: float
    dims: BipartiteDims = BipartiteDims(2, 2)
    center: BipartiteState | None = field(default=None)

    def __post_init__(self):
        if self.d < 0:
            raise ValueError(f"noise radius must be non-negative, got {self.d}")
        object.__setattr__(self, "dims", as_dims(self.dims))
        if self.center is None:
            object.__setattr__(self, "center", maximally_mixed(self.dims))


_TRACELESS_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _traceless_basis(dims: BipartiteDims) -> np.ndarray:
    """HS-orthonormal traceless Hermitian basis of the composite space."""
    if dims not in _TRACELESS_CACHE:
        n = dims.total
        _TRACELESS_CACHE[dims] = gellmann_basis(n)[1:]
    return _TRACELESS_CACHE[dims]


def sample_noise_batch(d: float, n: int, rng: np.random.Generator, dims=(2, 2),
                       max_attempts: int = 100) -> np.ndarray:
    """``n`` noise matrices drawn uniformly (HS measure) from the ball of
    radius ``d`` around the maximally mixed state, PSD by rejection.

    Returns an array of shape ``(n, D, D)``.
    """
    dims = as_dims(dims)
    D = dims.total
    center = np.eye(D, dtype=complex) / D
    if d == 0:
        return np.broadcast_to(center, (n, D, D)).copy()
    basis = _traceless_basis(dims)
    k = len(basis)
    out = np.empty((n, D, D), dtype=complex)
    filled = 0
    for _ in range(max_attempts):
        m = n - filled
        g = rng.normal(size=(m, k))
        g /= np.linalg.norm(g, axis=1)[:, None]
        r = d * rng.random(m) ** (1 / k)
        sig = center + np.einsum("nk,kij->nij", g * r[:, None], basis)
        ok = np.linalg.eigvalsh(sig)[:, 0] >= -PPT_TOL
        good = sig[ok]
        out[filled:filled + len(good)] = good
        filled += len(good)
        if filled == n:
            return out
    raise SamplingError(f"could not draw {n} PSD states at d={d} within {max_attempts} rounds")


def sample_noise(ball: NoiseBall, rng: np.random.Generator, max_attempts: int = 1000) -> BipartiteState:
    """One noise state from ``ball``; see :func:`sample_noise_batch`."""
    sig = sample_noise_batch(ball.d, 1, rng, ball.dims, max_attempts=max_attempts)[0]
    # Shift from the maximally mixed state to the ball's own center.
    sig = sig - np.eye(ball.dims.total) / ball.dims.total + ball.center.rho
    if np.linalg.eigvalsh(sig)[0] < -PPT_TOL:
        raise SamplingError("sampled noise left the state space for a non-default center")
    return BipartiteState(_hermitize(sig), ball.dims)


def _hermitize(m: np.ndarray) -> np.ndarray:
    m = (m + m.conj().T) / 2
    return m / np.trace(m).real


PSI_PLUS = target_ket(1 / math.sqrt(2), 1 / math.sqrt(2))


def sample_form1_batch(d: float, n: int, rng: np.random.Generator,
                       psi: np.ndarray = PSI_PLUS) -> tuple[np.ndarray, np.ndarray]:
    """``n`` noisy-target states with ``p ~ U[0, 1]``; returns ``(rhos, ps)``."""
    sig = sample_noise_batch(d, n, rng)
    p = rng.random(n)
    rhos = p[:, None, None] * proj(psi) + (1 - p)[:, None, None] * sig
    return rhos, p


def sample_form1(d: float, rng: np.random.Generator, psi: np.ndarray = PSI_PLUS) -> tuple[BipartiteState, float]:
    rhos, p = sample_form1_batch(d, 1, rng, psi)
    return BipartiteState(_hermitize(rhos[0]), (2, 2)), float(p[0])


def is_ppt(state: BipartiteState, tol: float = PPT_TOL) -> bool:
    return state.pt_min_eigenvalue() >= -tol


def is_entangled_ppt_decisive(state: BipartiteState, tol: float = PPT_TOL) -> bool:
    """Entanglement verdict from the partial transpose, only where it is exact
    (2x2 and 2x3 systems)."""
    if sorted(state.dims) not in ([2, 2], [2, 3]):
        raise ValueError(
            f"the PPT criterion decides separability only for 2x2 and 2x3 systems, not {tuple(state.dims)}; "
            "PPT entangled states exist in higher dimensions"
        )
    return not is_ppt(state, tol)


def random_separable(dims, rng: np.random.Generator, max_terms: int = 16) -> BipartiteState:
    """Random convex mixture of at most ``max_terms`` Haar-random product projectors."""
    dims = as_dims(dims)
    k = int(rng.integers(1, max_terms + 1))
    w = rng.dirichlet(np.ones(k))
    rho = sum(wi * kron(proj(random_ket(dims.n_a, rng)), proj(random_ket(dims.n_b, rng))) for wi in w)
    return BipartiteState(_hermitize(rho), dims)


def hs_distance(a: np.ndarray, b: np.ndarray) -> float:
    return hs_norm(np.asarray(a) - np.asarray(b))
