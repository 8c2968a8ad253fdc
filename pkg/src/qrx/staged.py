"""Homodyne-displacement (HD-D) hybrid receiver.

A beam splitter sends amplitude ``r * alpha`` to a homodyne detector that
picks the row (imaginary level) and ``t * alpha`` to a feedback displacement
receiver that picks the column (real level) inside the chosen row.

Column stage, as a state machine over ``N`` equal time slices:

* a pointer walks through ``order``; each slice displaces so the pointed-to
  hypothesis is nulled (shifted by ``delta`` along the real axis) and an on-off
  detector reports click / no click;
* a click eliminates the pointed-to hypothesis and advances the pointer;
* once only one hypothesis survives it is the decision, whatever follows;
* otherwise, a silent final slice decides the pointed-to hypothesis, and a
  click in the final slice triggers a uniform guess among the hypotheses not
  yet probed.

For ``L = 4`` and exact nulling the column-stage success probabilities have
the nested-sum closed form implemented in
:func:`displacement_stage_correct_probs_closed_form`; the enumeration over all
``2**N`` click records is the general engine and the oracle for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .constellation import Constellation, levels
from .physics import IDEAL, DetectorModel, Splitter, homodyne_interval_probability

TYPE_I = (0, 3, 1, 2)
TYPE_II = (0, 1, 2, 3)

MAX_ENUM_SLICES = 24
_CHUNK = 1 << 16


def validate_order(order: Sequence[int], L: int) -> tuple[int, ...]:
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(L)):
        raise ValueError(f"probing order {order} is not a permutation of 0..{L - 1}")
    return order


def parse_order(text: str) -> tuple[int, ...]:
    """Parse ``"type1"``, ``"type2"`` or a digit list such as ``"0,3,1,2"``."""
    key = text.strip().lower().replace("-", "").replace("_", "")
    named = {"typei": TYPE_I, "type1": TYPE_I, "i": TYPE_I,
             "typeii": TYPE_II, "type2": TYPE_II, "ii": TYPE_II}
    if key in named:
        return named[key]
    parts = [s for s in text.replace(" ", ",").replace("-", ",").split(",") if s]
    if len(parts) == 1 and parts[0].isdigit() and len(parts[0]) > 1:
        parts = list(parts[0])
    try:
        return tuple(int(s) for s in parts)
    except ValueError:
        raise ValueError(f"cannot parse probing order {text!r}") from None


@dataclass(frozen=True)
class StagedReceiverConfig:
    splitter: Splitter = field(default_factory=lambda: Splitter(0.5))
    N: int = 10
    order: tuple[int, ...] = TYPE_I
    delta: float = 0.0
    det: DetectorModel = IDEAL

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"partition count N must be an integer >= 1, got {self.N!r}")
        if not math.isfinite(self.delta):
            raise ValueError(f"displacement offset must be finite, got {self.delta!r}")


def homodyne_row_correct_probs(A: float, L: int) -> np.ndarray:
    """Per-row probability that the homodyne stage picks the right row.

    Row ``k`` has mean ``A * q_k``; decision thresholds sit at the midpoints
    ``A * (q_k +- 1)``, with the outer rows open to +-infinity.
    """
    if A < 0:
        raise ValueError(f"amplitude scale must be >= 0, got {A!r}")
    q = levels(L)
    out = np.empty(L)
    for k, qk in enumerate(q):
        lo = -math.inf if k == L - 1 else A * (qk - 1)
        hi = math.inf if k == 0 else A * (qk + 1)
        out[k] = homodyne_interval_probability(A * qk, lo, hi)
    return out


def _no_click_table(cfg: StagedReceiverConfig, A: float, L: int, row_miss: float = 0.0) -> np.ndarray:
    """``table[true, probed]``: silence probability of one slice.

    ``row_miss`` is ``q_true - q_row``; for a correct row decision the
    imaginary parts of signal and displacement cancel.
    """
    p = levels(L)
    diff = A * (p[:, None] - p[None, :]) - cfg.delta + 1j * A * row_miss
    return np.exp(-cfg.det.nu - cfg.det.eta * np.abs(diff) ** 2 / cfg.N)


def displacement_stage_decision_matrix(cfg: StagedReceiverConfig, A: float, q_row: float = 0.0,
                                       L: int = 4, q_true: float | None = None) -> np.ndarray:
    """Exact ``P(decide column j | true column i)`` by summing over all ``2**N``
    click records.

    The displacement is aligned to row level ``q_row`` while the signal sits
    at ``q_true`` (default: the same row, where the result does not depend on
    ``q_row``).
    """
    N = cfg.N
    if N > MAX_ENUM_SLICES:
        raise ValueError(f"enumeration limited to N <= {MAX_ENUM_SLICES}, got {N}")
    order = np.asarray(validate_order(cfg.order, L))
    row_miss = 0.0 if q_true is None else q_true - q_row
    table = _no_click_table(cfg, A, L, row_miss)
    D = np.zeros((L, L))
    total = 1 << N
    for true in range(L):
        no_click = table[true, order]  # by pointer position
        for start in range(0, total, _CHUNK):
            seq = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
            pos = np.zeros(seq.size, dtype=np.int64)
            prob = np.ones(seq.size)
            for s in range(N):
                click = ((seq >> (N - 1 - s)) & 1).astype(bool)
                q = no_click[pos]
                prob *= np.where(click, 1.0 - q, q)
                pos = np.where(click & (pos < L - 1), pos + 1, pos)
            last_click = (seq & 1).astype(bool)
            for k in range(L):
                here = pos == k
                if k == L - 1:
                    D[true, order[k]] += prob[here].sum()
                    continue
                D[true, order[k]] += prob[here & ~last_click].sum()
                guess = prob[here & last_click].sum()
                for j in order[k:]:
                    D[true, j] += guess / (L - k)
    return D


def displacement_stage_correct_probs_enumerated(cfg: StagedReceiverConfig, A: float,
                                                q_row: float = 0.0, L: int = 4) -> np.ndarray:
    """Per-true-column success probability of the column stage (enumeration)."""
    return np.diag(displacement_stage_decision_matrix(cfg, A, q_row, L)).copy()


def displacement_stage_correct_probs_closed_form(cfg: StagedReceiverConfig, A: float,
                                                 q_row: float = 0.0) -> np.ndarray:
    """Nested-sum closed form for ``L = 4`` with exact nulling.

    With ``s_k = exp(-nu - (2k)**2 A**2 eta / N)`` the silence probability when
    the probed and true columns are ``k`` labels apart, and ``w_m`` the value
    of ``s`` for the ``m``-th probed (wrong) hypothesis, a hypothesis probed in
    position 0..3 succeeds with::

        pos 0: s_0^N
        pos 1: w0^(N-1)(1-w0)/3 + sum_t w0^t(1-w0) s_0^(N-1-t)
        pos 2: w0^(N-1)(1-w0)/3 + sum_t w0^t(1-w0) w1^(N-2-t)(1-w1)/2
               + sum_{t,s} w0^t(1-w0) w1^s(1-w1) s_0^(N-2-t-s)
        pos 3: w0^(N-1)(1-w0)/3 + sum_t w0^t(1-w0) w1^(N-2-t)(1-w1)/2
               + sum_{t,s,u} w0^t(1-w0) w1^s(1-w1) w2^u(1-w2)
    """
    L = 4
    if cfg.delta != 0.0:
        raise ValueError("closed form covers exact nulling only (delta == 0)")
    order = validate_order(cfg.order, L)
    N, eta, nu = cfg.N, cfg.det.eta, cfg.det.nu
    s = [math.exp(-nu - (2 * k) ** 2 * A * A * eta / N) for k in range(L)]
    s0 = s[0]
    out = np.empty(L)
    for pos, true in enumerate(order):
        w = [s[abs(order[m] - true)] for m in range(pos)]
        if pos == 0:
            out[true] = s0 ** N
            continue
        val = w[0] ** (N - 1) * (1 - w[0]) / 3
        if pos == 1:
            val += sum(w[0] ** t * (1 - w[0]) * s0 ** (N - 1 - t) for t in range(N - 1))
        else:
            val += sum(w[0] ** t * (1 - w[0]) * w[1] ** (N - 2 - t) * (1 - w[1]) / 2
                       for t in range(N - 1))
            for t in range(N - 2):
                for u in range(N - 2 - t):
                    head = w[0] ** t * (1 - w[0]) * w[1] ** u * (1 - w[1])
                    if pos == 2:
                        val += head * s0 ** (N - 2 - t - u)
                    else:
                        # third click at any later slice leaves hypothesis order[3] alone
                        val += head * sum(w[2] ** v * (1 - w[2]) for v in range(N - 2 - t - u))
        out[true] = val
    return out


def column_correct_probs(cfg: StagedReceiverConfig, A: float, L: int) -> np.ndarray:
    if L == 4 and cfg.delta == 0.0:
        return displacement_stage_correct_probs_closed_form(cfg, A)
    return displacement_stage_correct_probs_enumerated(cfg, A, L=L)


def _port_amplitudes(cfg: StagedReceiverConfig, c: Constellation) -> tuple[float, float]:
    """(homodyne, displacement) port scales: ``r * alpha`` and ``t * alpha``."""
    return cfg.splitter.r * c.alpha, cfg.splitter.t * c.alpha


def hybrid_error(cfg: StagedReceiverConfig, c: Constellation) -> float:
    """Average symbol error of the HD-D receiver.

    The stages succeed independently, so the success probability is the mean
    row success times the mean column success.
    """
    if c.L > 6:
        raise ValueError(f"hybrid receiver supports L <= 6, got {c.L}")
    A_hd, A_d = _port_amplitudes(cfg, c)
    rows = homodyne_row_correct_probs(A_hd, c.L)
    cols = column_correct_probs(cfg, A_d, c.L)
    return float(1.0 - rows.sum() * cols.sum() / c.M)


def hybrid_decision_matrix(cfg: StagedReceiverConfig, c: Constellation) -> np.ndarray:
    """Full ``P(decide index j | sent index i)`` of the two-stage receiver,
    including column decisions made after a wrong row decision."""
    L = c.L
    A_hd, A_d = _port_amplitudes(cfg, c)
    q = levels(L)
    edges = [math.inf] + [A_hd * (qk - 1) for qk in q[:-1]] + [-math.inf]
    out = np.zeros((c.M, c.M))
    for true_row in range(L):
        for row in range(L):
            p_row = homodyne_interval_probability(A_hd * q[true_row], edges[row + 1], edges[row])
            if p_row == 0.0:
                continue
            D = displacement_stage_decision_matrix(cfg, A_d, q[row], L, q_true=q[true_row])
            out[true_row * L:(true_row + 1) * L, row * L:(row + 1) * L] = p_row * D
    return out


def first_probe_beta_sq(cfg: StagedReceiverConfig, c: Constellation) -> float:
    """|beta|^2 of the first displacement applied in the top row."""
    _, A_d = _port_amplitudes(cfg, c)
    top = levels(c.L)
    p_first = top[cfg.order[0]]
    return float(abs(A_d * p_first + 1j * A_d * top[0] + cfg.delta) ** 2)


class ODResult(NamedTuple):
    p_error: float
    beta_sq: float


def hybrid_error_od(cfg: StagedReceiverConfig, c: Constellation) -> ODResult:
    """Hybrid error with an offset displacement, evaluated by enumeration."""
    A_hd, A_d = _port_amplitudes(cfg, c)
    rows = homodyne_row_correct_probs(A_hd, c.L)
    cols = displacement_stage_correct_probs_enumerated(cfg, A_d, L=c.L)
    err = float(1.0 - rows.sum() * cols.sum() / c.M)
    return ODResult(err, first_probe_beta_sq(cfg, c))
