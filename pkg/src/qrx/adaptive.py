"""Bayesian adaptive displacement receivers.

Policy: before every slice, displace so that the maximum-a-posteriori
candidate is nulled (ties go to the lowest index), record the detector
outcome, Bayes-update, and finally decide the MAP candidate.  Priors are
reset for every symbol.

Receiver families built on it:

* Type III: homodyne row decision followed by a 4-candidate adaptive column stage;
* Type IV: the adaptive policy over all M candidates with an on-off detector;
* Type V: the same with a photon-number-resolving detector (Monte Carlo only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, levels
from .physics import IDEAL, DetectorModel, Splitter, folded_poisson_pmf
from .staged import homodyne_row_correct_probs

ON_OFF = "on-off"
PNRD = "pnrd"
DETECTOR_KINDS = (ON_OFF, PNRD)

MAX_EXACT_SLICES = 20
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class AdaptivePolicy:
    candidates: np.ndarray
    N: int = 10
    det: DetectorModel = IDEAL
    detector_kind: str = ON_OFF
    k_max: int = 10

    def __post_init__(self):
        object.__setattr__(self, "candidates", np.asarray(self.candidates, dtype=complex).ravel())
        if self.candidates.size < 1:
            raise ValueError("adaptive policy needs at least one candidate")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"partition count N must be an integer >= 1, got {self.N!r}")
        if self.detector_kind not in DETECTOR_KINDS:
            raise ValueError(f"detector kind must be one of {DETECTOR_KINDS}, got {self.detector_kind!r}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max!r}")

    @property
    def M(self) -> int:
        return self.candidates.size


def map_index(weights: np.ndarray) -> np.ndarray:
    """Row-wise MAP index; entries within ``TIE_RTOL`` of the row maximum tie,
    and ties go to the lowest index."""
    w = np.atleast_2d(weights)
    top = w.max(axis=1, keepdims=True)
    return np.argmax(w >= top * (1.0 - TIE_RTOL), axis=1)


def bayes_update(post: np.ndarray, likelihood: np.ndarray) -> np.ndarray:
    """Row-wise posterior update, renormalised to sum to one."""
    out = post * likelihood
    return out / out.sum(axis=-1, keepdims=True)


def slice_mean(policy: AdaptivePolicy, amps: np.ndarray, displacement: np.ndarray) -> np.ndarray:
    """Poisson mean for every (row, amplitude) pair given per-row displacements."""
    d = np.asarray(displacement)[..., None]
    return policy.det.nu + policy.det.eta * np.abs(amps - d) ** 2 / policy.N


def _check_priors(policy: AdaptivePolicy, priors) -> np.ndarray:
    if priors is None:
        return np.full(policy.M, 1.0 / policy.M)
    priors = np.asarray(priors, dtype=float)
    if priors.shape != (policy.M,) or np.any(priors < 0) or not np.isclose(priors.sum(), 1.0):
        raise ValueError("priors must be a probability vector matching the candidates")
    return priors


def adaptive_leaf_weights(policy: AdaptivePolicy, priors=None) -> np.ndarray:
    """Joint weights ``prior[m] * P(record | m)`` of every on-off outcome record.

    Rows are the surviving leaves of the 2**N outcome tree (records with zero
    probability under every candidate are pruned); columns are candidates.
    """
    if policy.detector_kind != ON_OFF:
        raise ValueError("exact enumeration supports on-off detectors only; use Monte Carlo for PNRD")
    if policy.N > MAX_EXACT_SLICES:
        raise ValueError(f"exact enumeration limited to N <= {MAX_EXACT_SLICES}, got {policy.N}")
    w = _check_priors(policy, priors)[None, :].copy()
    amps = policy.candidates
    for _ in range(policy.N):
        d = amps[map_index(w)]
        silent = np.exp(-slice_mean(policy, amps, d))
        w = np.concatenate([w * silent, w * (1.0 - silent)])
        w = w[w.sum(axis=1) > 0.0]
    return w


def adaptive_success_by_candidate(policy: AdaptivePolicy, priors=None) -> np.ndarray:
    """``P(correct | true m)`` for each candidate, exactly."""
    priors = _check_priors(policy, priors)
    w = adaptive_leaf_weights(policy, priors)
    decided = map_index(w)
    hit = np.zeros(policy.M)
    np.add.at(hit, decided, w[np.arange(len(w)), decided])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(priors > 0, hit / priors, 0.0)


def adaptive_error_exact(policy: AdaptivePolicy, priors=None) -> float:
    """Exact error of the MAP-nulling policy with an on-off detector."""
    w = adaptive_leaf_weights(policy, priors)
    decided = map_index(w)
    return float(1.0 - w[np.arange(len(w)), decided].sum())


def adaptive_error_mc(policy: AdaptivePolicy, priors=None, trials: int = 100_000, seed: int = 0,
                      threads: int | None = None):
    """Monte Carlo estimate of the policy's error, returned as ``RunStats``."""
    from .montecarlo import AdaptiveReceiver, run_trials

    priors = _check_priors(policy, priors)
    return run_trials(AdaptiveReceiver(policy, priors), priors, trials, seed, threads=threads)


def sample_outcome(policy: AdaptivePolicy, mu_true: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Detector outcome per row from one uniform each: click flag (on-off) or count."""
    if policy.detector_kind == ON_OFF:
        return (u >= np.exp(-mu_true)).astype(np.int64)
    k = np.arange(policy.k_max)
    cdf = np.cumsum(folded_poisson_pmf(k[None, :], mu_true[:, None], policy.k_max), axis=1)
    return (u[:, None] >= cdf).sum(axis=1)


def outcome_likelihood(policy: AdaptivePolicy, mu: np.ndarray, outcome: np.ndarray) -> np.ndarray:
    """Likelihood of each row's observed outcome under every candidate."""
    if policy.detector_kind == ON_OFF:
        silent = np.exp(-mu)
        return np.where(outcome[:, None] == 1, 1.0 - silent, silent)
    return folded_poisson_pmf(outcome[:, None], mu, policy.k_max)


def column_policy(A: float, L: int, N: int, det: DetectorModel, kind: str = ON_OFF,
                  k_max: int = 10) -> AdaptivePolicy:
    """Adaptive policy over the ``L`` real levels of one row at scale ``A``."""
    return AdaptivePolicy(A * levels(L) + 0j, N=N, det=det, detector_kind=kind, k_max=k_max)


def hybrid_adaptive_error(splitter: Splitter, N: int, det: DetectorModel, kind: str,
                          c: Constellation) -> float:
    """Type III: homodyne row stage at ``r * alpha`` times an adaptive column
    stage at ``t * alpha`` (stages independent)."""
    if c.L != 4:
        raise ValueError(f"Type III receiver is defined for L = 4, got {c.L}")
    if kind != ON_OFF:
        raise ValueError("exact Type III evaluation needs an on-off detector; use Monte Carlo for PNRD")
    rows = homodyne_row_correct_probs(splitter.r * c.alpha, c.L)
    cols = adaptive_success_by_candidate(column_policy(splitter.t * c.alpha, c.L, N, det))
    return float(1.0 - rows.sum() * cols.sum() / c.M)


def full_policy(c: Constellation, N: int, det: DetectorModel, kind: str = ON_OFF,
                k_max: int = 10) -> AdaptivePolicy:
    """Types IV / V: adaptive nulling over the whole constellation."""
    return AdaptivePolicy(c.points, N=N, det=det, detector_kind=kind, k_max=k_max)
