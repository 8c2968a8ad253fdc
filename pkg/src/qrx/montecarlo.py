"""Symbol-level Monte Carlo simulation of every receiver.

Random numbers
--------------
Every trial owns an independent stream of uniforms derived only from
``(seed, trial index)`` with SplitMix64::

    mix(z)     = SplitMix64 finaliser (Steele, Lea & Flood 2014)
    base       = mix(seed + GAMMA)
    s_i        = mix(base + (i + 1) * GAMMA)            per-trial key
    u_{i, j}   = (mix(s_i + (j + 1) * GAMMA) >> 11) * 2**-53 + 2**-54

all arithmetic modulo 2**64, ``GAMMA = 0x9E3779B97F4A7C15``.  Draw 0 of a
trial picks the transmitted symbol; the receiver consumes draws 1..n.  Since
no draw depends on how trials are batched or distributed over workers, the
result of :func:`run_mc` is identical for any worker count.  Changing this
generator changes every recorded Monte Carlo value.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .adaptive import (
    ON_OFF,
    AdaptivePolicy,
    bayes_update,
    column_policy,
    map_index,
    outcome_likelihood,
    sample_outcome,
    slice_mean,
)
from .constellation import Constellation, levels
from .physics import DetectorModel, Splitter
from .staged import StagedReceiverConfig, validate_order

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

BATCH = 1 << 15
THREADS_ENV = "QRX_THREADS"


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def trial_keys(seed: int, trials: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        base = _mix(np.array([seed % (1 << 64)], dtype=np.uint64) + GAMMA)
        idx = np.asarray(trials, dtype=np.uint64) + np.uint64(1)
        return _mix(base + idx * GAMMA)


def trial_uniforms(seed: int, trials: np.ndarray, n_draws: int) -> np.ndarray:
    """Uniforms in (0, 1), shape ``(len(trials), n_draws)``."""
    keys = trial_keys(seed, trials)
    with np.errstate(over="ignore"):
        j = np.arange(1, n_draws + 1, dtype=np.uint64)
        bits = _mix(keys[:, None] + j[None, :] * GAMMA)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 + 2.0 ** -54


class TrialStream:
    """Uniforms of a single trial, for scalar simulation."""

    def __init__(self, seed: int, trial: int):
        self.seed = seed
        self.trial = trial

    def uniforms(self, n: int) -> np.ndarray:
        return trial_uniforms(self.seed, np.array([self.trial]), n + 1)[0, 1:]


# -- receivers -----------------------------------------------------------------
#
# A receiver maps true constellation indices and a block of per-trial uniforms
# (shape (n, receiver.n_draws)) to decided indices.


class BlindGuess:
    def __init__(self, M: int):
        self.M = M
        self.n_draws = 1

    def decide(self, true_idx, u):
        return np.minimum((u[:, 0] * self.M).astype(np.int64), self.M - 1)


class HeterodyneReceiver:
    """Both quadratures at once, Gaussian noise of variance 1/2 each."""

    def __init__(self, c: Constellation):
        self.c = c
        self.n_draws = 2

    def decide(self, true_idx, u):
        L, a = self.c.L, self.c.alpha
        om = levels(L)
        row, col = np.divmod(true_idx, L)
        sd = np.sqrt(0.5)
        x = a * om[col] + sd * ndtri(u[:, 0])
        y = a * om[row] + sd * ndtri(u[:, 1])
        return _nearest_label(y, a, L) * L + _nearest_label(x, a, L)


def _nearest_label(x: np.ndarray, A: float, L: int) -> np.ndarray:
    """Label of the level interval containing ``x``; thresholds at even multiples of A."""
    lower_edges = A * (levels(L)[:-1] - 1.0)
    return (x[:, None] < lower_edges[None, :]).sum(axis=1)


def _homodyne_rows(true_row, A, L, u):
    x = A * levels(L)[true_row] + 0.5 * ndtri(u)
    return _nearest_label(x, A, L)


class StagedReceiver:
    """HD-D hybrid: homodyne row decision, then the feedback column stage."""

    def __init__(self, cfg: StagedReceiverConfig, c: Constellation):
        self.cfg = cfg
        self.c = c
        self.order = np.asarray(validate_order(cfg.order, c.L))
        self.n_draws = 1 + cfg.N + 1

    def decide(self, true_idx, u):
        cfg, L = self.cfg, self.c.L
        om = levels(L)
        A_hd = cfg.splitter.r * self.c.alpha
        A_d = cfg.splitter.t * self.c.alpha
        true_row, true_col = np.divmod(true_idx, L)
        row = _homodyne_rows(true_row, A_hd, L, u[:, 0])
        true_amp = A_d * (om[true_col] + 1j * om[true_row])
        pos = np.zeros(len(true_idx), dtype=np.int64)
        click = np.zeros(len(true_idx), dtype=bool)
        for s in range(cfg.N):
            d = A_d * (om[self.order[pos]] + 1j * om[row]) + cfg.delta
            silent = np.exp(-cfg.det.nu - cfg.det.eta * np.abs(true_amp - d) ** 2 / cfg.N)
            click = u[:, 1 + s] >= silent
            pos = np.where(click & (pos < L - 1), pos + 1, pos)
        remaining = L - pos
        pick = np.minimum((u[:, 1 + cfg.N] * remaining).astype(np.int64), remaining - 1)
        guess = click & (pos < L - 1)
        col = self.order[np.where(guess, pos + pick, pos)]
        return row * L + col


def _run_policy(policy: AdaptivePolicy, amps_true, candidates, u, priors=None):
    """Run MAP nulling per row; ``candidates`` is shared or per-row (n, K)."""
    n = len(amps_true)
    cand = np.broadcast_to(candidates, (n, policy.M))
    start = np.full(policy.M, 1.0 / policy.M) if priors is None else np.asarray(priors, dtype=float)
    post = np.tile(start, (n, 1))
    rows = np.arange(n)
    for s in range(policy.N):
        d = cand[rows, map_index(post)]
        mu_true = policy.det.nu + policy.det.eta * np.abs(amps_true - d) ** 2 / policy.N
        outcome = sample_outcome(policy, mu_true, u[:, s])
        mu = slice_mean(policy, cand, d)
        post = bayes_update(post, outcome_likelihood(policy, mu, outcome))
    return map_index(post)


class AdaptiveReceiver:
    """Types IV / V: MAP nulling over the policy's candidate set.

    The transmitted symbol index refers to the policy's candidates.
    """

    def __init__(self, policy: AdaptivePolicy, priors=None):
        self.policy = policy
        self.priors = priors
        self.n_draws = policy.N

    def decide(self, true_idx, u):
        amps = self.policy.candidates[true_idx]
        return _run_policy(self.policy, amps, self.policy.candidates, u, self.priors)


class HybridAdaptiveReceiver:
    """Type III: homodyne row decision, then MAP nulling over that row's columns."""

    def __init__(self, splitter: Splitter, N: int, det: DetectorModel, kind: str, c: Constellation,
                 k_max: int = 10):
        self.c = c
        self.splitter = splitter
        self.policy = column_policy(splitter.t * c.alpha, c.L, N, det, kind, k_max)
        self.n_draws = 1 + N

    def decide(self, true_idx, u):
        L = self.c.L
        om = levels(L)
        A_d = self.splitter.t * self.c.alpha
        true_row, true_col = np.divmod(true_idx, L)
        row = _homodyne_rows(true_row, self.splitter.r * self.c.alpha, L, u[:, 0])
        amps = A_d * (om[true_col] + 1j * om[true_row])
        cands = A_d * (om[None, :] + 1j * om[row][:, None])
        col = _run_policy(self.policy, amps, cands, u[:, 1:])
        return row * L + col


# -- driver ----------------------------------------------------------------------


@dataclass(frozen=True)
class RunStats:
    trials: int
    errors: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.p_hat * (1.0 - self.p_hat) / self.trials))


def wilson_interval(errors: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(errors, trials, alpha=alpha, method="wilson")
    # round-off can push an endpoint past the estimate at k = 0 or k = n
    p = errors / trials
    return float(min(max(lo, 0.0), p)), float(max(min(hi, 1.0), p))


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _draw_symbols(priors: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(priors)
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(priors) - 1)


def _batch_errors(receiver, priors, seed, start, stop) -> int:
    trials = np.arange(start, stop, dtype=np.uint64)
    u = trial_uniforms(seed, trials, 1 + receiver.n_draws)
    true_idx = _draw_symbols(priors, u[:, 0])
    decided = receiver.decide(true_idx, u[:, 1:])
    return int(np.count_nonzero(decided != true_idx))


def run_trials(receiver, priors, trials: int, seed: int, threads: int | None = None) -> RunStats:
    """Simulate ``trials`` symbols drawn from ``priors`` and count errors."""
    trials = int(trials)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials!r}")
    priors = np.asarray(priors, dtype=float)
    spans = [(s, min(s + BATCH, trials)) for s in range(0, trials, BATCH)]
    n_workers = min(worker_count(threads), len(spans))
    if n_workers == 1:
        counts = [_batch_errors(receiver, priors, seed, a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            counts = list(pool.map(lambda ab: _batch_errors(receiver, priors, seed, *ab), spans))
    errors = sum(counts)
    lo, hi = wilson_interval(errors, trials)
    return RunStats(trials, errors, errors / trials, lo, hi, int(seed))


def run_mc(receiver, c: Constellation, trials: int, seed: int, threads: int | None = None) -> RunStats:
    return run_trials(receiver, c.priors, trials, seed, threads=threads)


def simulate_symbol(receiver, true_index: int, stream: TrialStream) -> int:
    """Decision of ``receiver`` for one transmitted symbol using ``stream``."""
    u = stream.uniforms(receiver.n_draws)[None, :]
    return int(receiver.decide(np.array([true_index]), u)[0])


def decision_matrix_mc(receiver, M: int, trials_per_symbol: int, seed: int) -> np.ndarray:
    """Empirical ``P(decide j | sent i)`` with a fixed number of trials per symbol."""
    counts = np.zeros((M, M))
    for i in range(M):
        for start in range(0, trials_per_symbol, BATCH):
            stop = min(start + BATCH, trials_per_symbol)
            t = np.arange(i * trials_per_symbol + start, i * trials_per_symbol + stop, dtype=np.uint64)
            u = trial_uniforms(seed, t, 1 + receiver.n_draws)
            decided = receiver.decide(np.full(len(t), i), u[:, 1:])
            counts[i] += np.bincount(decided, minlength=M)
    return counts / trials_per_symbol
