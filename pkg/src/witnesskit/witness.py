"""Witness construction, product-state infimum search and the separability
threshold for noisy targets."""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .opalg import (
    HERM_TOL,
    BipartiteDims,
    as_dims,
    is_hermitian,
    min_eigvec,
    partial_transpose,
    proj,
    random_ket,
)
from .states import PPT_TOL, SEPARABLE_BALL_RADIUS, BipartiteState

KINDS = ("npt_eigvec", "edge", "shifted", "prewitness")

SEESAW_TOL = 1e-12
SEESAW_MAX_ITER = 500
DEFAULT_RESTARTS = 200


class NoWitnessError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Witness:
    op: np.ndarray
    dims: BipartiteDims
    kind: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        op = np.asarray(self.op, dtype=complex)
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "dims", as_dims(self.dims))
        if self.kind not in KINDS:
            raise ValueError(f"unknown witness kind {self.kind!r}")
        if op.shape != (self.dims.total, self.dims.total):
            raise ValueError("witness operator does not match its dims")
        if not is_hermitian(op, HERM_TOL):
            raise ValueError("witness operator must be Hermitian")


def state_hash(rho: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(rho, dtype=complex).tobytes()).hexdigest()[:16]


def witness_from_npt(state: BipartiteState) -> Witness:
    """``(|e><e|)^{T_A}`` for the minimal eigenvector ``e`` of the state's
    partial transpose."""
    lmin, e = min_eigvec(state.partial_transpose())
    if lmin >= -PPT_TOL:
        raise NoWitnessError(f"state has positive partial transpose (min eigenvalue {lmin:.3g}); no NPT witness available")
    w = partial_transpose(proj(e), state.dims)
    w = (w + w.conj().T) / 2
    return Witness(w, state.dims, "npt_eigvec",
                   {"source_state": state_hash(state.rho), "pt_min_eigenvalue": lmin})


def _check_projector(m: np.ndarray, name: str) -> None:
    if not is_hermitian(m, 1e-10) or np.max(np.abs(m @ m - m)) > 1e-10:
        raise ValueError(f"{name} is not an orthogonal projector")


def edge_witness(P: np.ndarray, Q: np.ndarray, epsilon: float, dims=None) -> Witness:
    """``(P + Q^{T_A})/2 - epsilon * 1``.

    ``P`` and ``Q`` project onto the kernels of an edge state and of its
    partial transpose. ``epsilon = 0`` gives the prewitness. ``dims`` defaults
    to a square split of the space.
    """
    P, Q = np.asarray(P, dtype=complex), np.asarray(Q, dtype=complex)
    if dims is None:
        n = math.isqrt(P.shape[0])
        dims = (n, n)
    dims = as_dims(dims)
    _check_projector(P, "P")
    _check_projector(Q, "Q")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    op = (P + partial_transpose(Q, dims)) / 2 - epsilon * np.eye(dims.total)
    kind = "prewitness" if epsilon == 0 else "edge"
    return Witness((op + op.conj().T) / 2, dims, kind, {"epsilon": float(epsilon)})


def shifted_witness(w: Witness, epsilon: float) -> Witness:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    prov = dict(w.provenance, epsilon=float(epsilon), base_kind=w.kind)
    if epsilon > 0:
        prov["note"] = "shifted operator: negative expectation on some separable states"
    return Witness(w.op - epsilon * np.eye(w.dims.total), w.dims, "shifted", prov)


def tau_bound(d: float) -> float:
    """Smallest expectation of the canonical witness above which a noisy
    maximally entangled target with noise radius ``d`` is certainly separable."""
    if not 0 <= d <= SEPARABLE_BALL_RADIUS:
        raise ValueError(f"d must lie in [0, 1/sqrt(12)], got {d}")
    d2 = d * d
    # clamp: at d = 1/sqrt(12) the first factor may round slightly negative
    return 0.25 - d2 - math.sqrt(max(1 / 12 - d2, 0.0) * (0.75 - d2))


# --- product-state infimum by see-saw -------------------------------------


@dataclass(frozen=True)
class ProductPair:
    e: np.ndarray
    f: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.kron(self.e, self.f)


@dataclass(frozen=True)
class EpsilonResult:
    value: float
    argmin: ProductPair
    restarts_used: int
    converged: bool
    trajectories: list = field(default_factory=list, repr=False)


def product_expectation(op: np.ndarray, pair: ProductPair) -> float:
    v = pair.vector
    return float(np.vdot(v, op @ v).real)


def _contract_b(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    # (1 (x) <f|) op (1 (x) |f>)
    return np.einsum("iajb,a,b->ij", t, f.conj(), f)


def _contract_a(t: np.ndarray, e: np.ndarray) -> np.ndarray:
    return np.einsum("aibj,a,b->ij", t, e.conj(), e)


def _lowest(num: np.ndarray, den: np.ndarray | None) -> tuple[float, np.ndarray]:
    num = (num + num.conj().T) / 2
    if den is None:
        w, v = np.linalg.eigh(num)
    else:
        w, v = scipy.linalg.eigh(num, (den + den.conj().T) / 2)
    x = v[:, 0]
    return float(w[0]), x / np.linalg.norm(x)


def _seesaw(t_num, t_den, dims: BipartiteDims, f0: np.ndarray, tol: float, max_iter: int):
    """One see-saw trajectory from ``f0``. Returns (value, e, f, converged, history)."""
    f = f0
    history = []
    prev = math.inf
    converged = False
    for _ in range(max_iter):
        _, e = _lowest(_contract_b(t_num, f), None if t_den is None else _contract_b(t_den, f))
        val, f = _lowest(_contract_a(t_num, e), None if t_den is None else _contract_a(t_den, e))
        history.append(val)
        if prev - val < tol:
            converged = True
            break
        prev = val
    return val, e, f, converged, history


def _thread_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    return max(1, int(os.environ.get("WITNESSKIT_THREADS", "1")))


def _restart_streams(rng, restarts: int) -> list[np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        master = int(rng.integers(2**63))
    else:
        master = int(rng)
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master).spawn(restarts)]


def _optimize(num, den, dims, restarts, tol, rng, max_iter, workers, keep_trajectories):
    dims = as_dims(dims)
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    num = np.asarray(num, dtype=complex)
    if not is_hermitian(num, HERM_TOL):
        raise ValueError("operator must be Hermitian")
    t_num = num.reshape(dims.n_a, dims.n_b, dims.n_a, dims.n_b)
    t_den = None
    if den is not None:
        den = np.asarray(den, dtype=complex)
        if not is_hermitian(den, HERM_TOL):
            raise ValueError("denominator must be Hermitian")
        if np.linalg.eigvalsh(den)[0] <= 1e-10:
            raise ValueError("denominator must be positive definite (full rank)")
        t_den = den.reshape(t_num.shape)
    streams = _restart_streams(rng, restarts)

    def run(g):
        return _seesaw(t_num, t_den, dims, random_ket(dims.n_b, g), tol, max_iter)

    n = _thread_count(workers)
    if n == 1:
        results = [run(g) for g in streams]
    else:
        with ThreadPoolExecutor(n) as pool:
            results = list(pool.map(run, streams))
    # lowest value, earliest restart on ties: independent of worker count
    best = min(range(restarts), key=lambda i: (results[i][0], i))
    val, e, f, conv, _ = results[best]
    pair = ProductPair(e, f)
    v = pair.vector
    value = float((np.vdot(v, num @ v) / (1.0 if den is None else np.vdot(v, den @ v))).real)
    return EpsilonResult(value, pair, restarts, bool(conv),
                         [r[4] for r in results] if keep_trajectories else [])


def optimize_epsilon(op: np.ndarray, dims, restarts: int = DEFAULT_RESTARTS, tol: float = SEESAW_TOL,
                     rng=0, *, max_iter: int = SEESAW_MAX_ITER, workers: int | None = None,
                     keep_trajectories: bool = False) -> EpsilonResult:
    """Minimize ``<e,f|op|e,f>`` over product vectors by see-saw.

    Each restart starts from a Haar-random ``f`` and alternates exact
    minimization over ``e`` and ``f`` (lowest eigenvector of the contracted
    operator) until the objective drops by less than ``tol``. The returned
    value is an upper bound on the true infimum.

    ``rng`` is a seed or a ``Generator``; restart ``i`` always uses the
    ``i``-th spawned stream, so results do not depend on ``workers``.
    """
    return _optimize(op, None, dims, restarts, tol, rng, max_iter, workers, keep_trajectories)


def optimize_epsilon_ratio(num: np.ndarray, denom: np.ndarray, dims, restarts: int = DEFAULT_RESTARTS,
                           tol: float = SEESAW_TOL, rng=0, *, max_iter: int = SEESAW_MAX_ITER,
                           workers: int | None = None, keep_trajectories: bool = False) -> EpsilonResult:
    """Minimize ``<e,f|num|e,f> / <e,f|denom|e,f>`` over product vectors.

    Same see-saw as :func:`optimize_epsilon`, each half-step solving the
    generalized eigenproblem of the contracted pair.
    """
    return _optimize(num, denom, dims, restarts, tol, rng, max_iter, workers, keep_trajectories)
