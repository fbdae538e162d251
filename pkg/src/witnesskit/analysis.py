"""Detection verdicts, finite-shot estimation and Monte Carlo robustness studies."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .decomp import SettingDecomposition
from .states import PPT_TOL, SEPARABLE_BALL_RADIUS, BipartiteState, sample_form1_batch
from .witness import Witness, _thread_count, tau_bound

CANONICAL_W = 0.5 * np.array([[1, 0, 0, 0], [0, 0, -1, 0], [0, -1, 0, 0], [0, 0, 0, 1]], dtype=complex)

ENTANGLED = "entangled"
SEPARABLE_CERTIFIED = "separable_certified"
INCONCLUSIVE = "inconclusive"

VERDICT_TOL = 1e-12
MC_CHUNK = 10_000


class ModelViolationWarning(UserWarning):
    """An estimate falls outside the range its model allows."""


def canonical_witness() -> Witness:
    return Witness(CANONICAL_W, (2, 2), "npt_eigvec", {"source": "canonical two-qubit witness"})


def _op(w) -> np.ndarray:
    return w.op if isinstance(w, Witness) else np.asarray(w, dtype=complex)


def expectation(w, state: BipartiteState) -> float:
    op = _op(w)
    if op.shape != state.rho.shape:
        raise ValueError(f"witness of dim {op.shape[0]} cannot act on a state of dim {state.rho.shape[0]}")
    return float(np.einsum("ij,ji->", op, state.rho).real)


def estimate_p(tr_w_rho: float, a: float, b: float) -> float:
    """Mixing weight of the target state recovered from the canonical witness
    expectation. Only meaningful without extra noise (``d = 0``)."""
    if a <= 0 or b <= 0 or abs(a * a + b * b - 1) > 1e-9:
        raise ValueError("need a, b > 0 with a^2 + b^2 = 1")
    p = (1 - 4 * tr_w_rho) / (1 + 4 * a * b)
    if not -1e-12 <= p <= 1 + 1e-12:
        warnings.warn(f"estimated p = {p:.6g} lies outside [0, 1]; the noise model does not hold",
                      ModelViolationWarning, stacklevel=2)
    return p


@dataclass(frozen=True)
class WitnessReport:
    expectation: float
    verdict: str
    tau: float | None = None
    epsilon_used: float = 0.0
    p_estimate: float | None = None
    heuristic: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def classify(w: Witness, state_expectation: float, d: float = 0.0) -> WitnessReport:
    """Verdict for a measured witness expectation.

    For true witnesses a negative value certifies entanglement, and a value of
    at least ``tau(d)`` certifies separability of a noisy maximally entangled
    target. Shifted operators use the plain sign rule and are flagged
    heuristic; they never certify anything.
    """
    if d < 0:
        raise ValueError("d must be non-negative")
    tau = tau_bound(d) if d <= SEPARABLE_BALL_RADIUS else None
    eps = float(w.provenance.get("epsilon", 0.0)) if w.kind in ("shifted", "edge") else 0.0
    if w.kind == "shifted":
        verdict = ENTANGLED if state_expectation < 0 else INCONCLUSIVE
        return WitnessReport(state_expectation, verdict, tau, eps, heuristic=True)
    if state_expectation < -VERDICT_TOL:
        verdict = ENTANGLED
    elif tau is not None and state_expectation >= tau:
        verdict = SEPARABLE_CERTIFIED
    else:
        verdict = INCONCLUSIVE
    return WitnessReport(state_expectation, verdict, tau, eps)


def upb_noise_threshold(epsilon: float) -> float:
    """Mixing weight above which ``p rho_BE + (1 - p) 1/9`` is detected by the
    edge witness with shift ``epsilon``."""
    if not 0 < epsilon <= 5 / 9:
        raise ValueError(f"epsilon must lie in (0, 5/9], got {epsilon}")
    return 1 - 9 * epsilon / 5


# --- finite statistics ----------------------------------------------------------


@dataclass(frozen=True)
class ShotEstimate:
    mean: float
    std_error: float
    shots_per_setting: int
    n_settings: int

    def to_dict(self) -> dict:
        return asdict(self)


def simulate_measurement(sd: SettingDecomposition, state: BipartiteState, shots_per_setting: int,
                         rng: np.random.Generator) -> ShotEstimate:
    """Estimate ``Tr(W rho)`` by sampling joint outcomes of every setting.

    The standard error propagates the multinomial variance of each setting's
    weighted outcome frequencies, using the empirical frequencies.
    """
    if int(shots_per_setting) != shots_per_setting or shots_per_setting < 1:
        raise ValueError("shots_per_setting must be a positive integer")
    n = int(shots_per_setting)
    mean, var = 0.0, 0.0
    for s in sd.settings:
        probs = np.clip(s.outcome_probabilities(state.rho).ravel(), 0, None)
        counts = rng.multinomial(n, probs / probs.sum())
        w = s.weights.ravel()
        mean += float(w @ counts) / n
        freq = counts / n
        var += max(float(w**2 @ freq - (w @ freq) ** 2), 0.0) / n
    return ShotEstimate(mean, math.sqrt(var), n, len(sd.settings))


# --- Monte Carlo error study ------------------------------------------------------


@dataclass(frozen=True)
class ErrorStudyRow:
    d: float
    epsilon: float
    p_bin: float
    error_rate: float
    n_samples: int
    max_over_p: float


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + confidence / 2)
    ph = k / n
    denom = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class ErrorStudy:
    d_values: list[float]
    epsilon_grid: list[float]
    p_bins: int
    n_samples: int
    rows: list[ErrorStudyRow] = field(default_factory=list)
    # max_error[j, e]: max-over-p error for d_values[j], epsilon_grid[e]
    max_error: np.ndarray | None = None
    max_error_interval: np.ndarray | None = None
    overall_error: np.ndarray | None = None

    def optimal_epsilon(self) -> dict[float, float]:
        """Grid value minimizing the max-over-p error for each d (smallest on ties)."""
        return {d: float(self.epsilon_grid[int(np.argmin(self.max_error[j]))])
                for j, d in enumerate(self.d_values)}

    def quadratic_fit(self) -> tuple[float, float]:
        """Least-squares fit ``eps* = c d^2``; returns ``(c, r_squared)``."""
        opt = self.optimal_epsilon()
        d = np.array(self.d_values, dtype=float)
        y = np.array([opt[x] for x in self.d_values])
        x = d**2
        c = float(x @ y / (x @ x)) if x @ x > 0 else 0.0
        ss_res = float(np.sum((y - c * x) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        return c, (1 - ss_res / ss_tot) if ss_tot > 0 else float("nan")


def _study_chunk(d: float, n: int, seed: np.random.SeedSequence, w: np.ndarray):
    rng = np.random.default_rng(seed)
    rhos, p = sample_form1_batch(d, n, rng)
    pt = rhos.reshape(n, 2, 2, 2, 2).transpose(0, 3, 2, 1, 4).reshape(n, 4, 4)
    lmin = np.linalg.eigvalsh(pt)[:, 0]
    tr = np.einsum("ij,nji->n", w, rhos).real
    return p, tr, lmin < -PPT_TOL


def mc_error_study(d_values, epsilon_grid, n_samples: int, p_bins: int = 50, rng=0, *,
                   witness: np.ndarray | None = None, workers: int | None = None) -> ErrorStudy:
    """Error of the sign rule ``Tr((W - eps) rho) < 0  =>  entangled`` on random
    noisy targets, with the partial transpose as ground truth.

    For each ``d`` the same ``n_samples`` states (``p`` uniform, noise uniform
    in the HS ball of radius ``d``) are scored against every ``eps``; errors
    are binned by ``p`` and the worst bin is reported. Samples come in fixed
    chunks with index-derived seeds, so the result does not depend on
    ``workers``.
    """
    d_values = [float(x) for x in d_values]
    epsilon_grid = [float(x) for x in epsilon_grid]
    if not d_values or not epsilon_grid:
        raise ValueError("d_values and epsilon_grid must be non-empty")
    if n_samples < 1 or p_bins < 1:
        raise ValueError("n_samples and p_bins must be positive")
    w = CANONICAL_W if witness is None else np.asarray(witness, dtype=complex)
    master = int(rng.integers(2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    sizes = [min(MC_CHUNK, n_samples - s) for s in range(0, n_samples, MC_CHUNK)]
    eps = np.asarray(epsilon_grid)
    study = ErrorStudy(d_values, epsilon_grid, p_bins, n_samples)
    study.max_error = np.zeros((len(d_values), len(eps)))
    study.max_error_interval = np.zeros((len(d_values), len(eps), 2))
    study.overall_error = np.zeros((len(d_values), len(eps)))
    nthreads = _thread_count(workers)
    for j, d in enumerate(d_values):
        jobs = [(d, n, np.random.SeedSequence(master, spawn_key=(j, i))) for i, n in enumerate(sizes)]
        if nthreads == 1:
            parts = [_study_chunk(*job, w) for job in jobs]
        else:
            with ThreadPoolExecutor(nthreads) as pool:
                parts = list(pool.map(lambda job: _study_chunk(*job, w), jobs))
        p = np.concatenate([x[0] for x in parts])
        tr = np.concatenate([x[1] for x in parts])
        ent = np.concatenate([x[2] for x in parts])
        bins = np.minimum((p * p_bins).astype(int), p_bins - 1)
        in_bin = np.bincount(bins, minlength=p_bins)
        for e, eps_val in enumerate(eps):
            wrong = (tr - eps_val < 0) != ent
            errs = np.bincount(bins, weights=wrong, minlength=p_bins).astype(int)
            rates = np.divide(errs, in_bin, out=np.zeros(p_bins), where=in_bin > 0)
            worst = int(np.argmax(rates))
            study.max_error[j, e] = rates[worst]
            study.max_error_interval[j, e] = wilson_interval(int(errs[worst]), int(in_bin[worst]))
            study.overall_error[j, e] = wrong.mean()
            for b in range(p_bins):
                study.rows.append(ErrorStudyRow(d, float(eps_val), (b + 0.5) / p_bins, float(rates[b]),
                                                int(in_bin[b]), float(rates[worst])))
    return study
