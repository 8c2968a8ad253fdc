"""Deterministic one-dimensional searches over receiver parameters."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

from .constellation import constellation_for_mean_photon
from .physics import IDEAL, DetectorModel, Splitter
from .staged import TYPE_I, StagedReceiverConfig, hybrid_error, hybrid_error_od, first_probe_beta_sq

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
T_RANGE = (0.01, 0.99)


@dataclass
class OptResult:
    x: float
    fun: float
    trace: list[tuple[float, float]] = field(default_factory=list)
    bracket: tuple[float, float] | None = None
    beta_sq: float | None = None


def _best(trace):
    # smallest objective, ties toward smaller x
    return min(trace, key=lambda xf: (xf[1], xf[0]))


def grid_minimize(objective: Callable[[float], float], lo: float, hi: float,
                  coarse_steps: int = 21, refinements: int = 100) -> OptResult:
    """Coarse uniform grid, then golden-section search in the best grid bracket.

    The search stops once the bracket is narrower than ``(hi - lo) * 1e-4`` or
    after ``refinements`` golden steps.  The returned point is the best point
    evaluated anywhere, so it never loses to a traced grid point; ties resolve
    to the smaller argument.
    """
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid search range [{lo!r}, {hi!r}]")
    if coarse_steps < 3:
        raise ValueError(f"coarse_steps must be >= 3, got {coarse_steps!r}")
    step = (hi - lo) / (coarse_steps - 1)
    grid = [lo + i * step for i in range(coarse_steps - 1)] + [hi]
    trace = [(x, float(objective(x))) for x in grid]
    i = trace.index(_best(trace))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, coarse_steps - 1)]
    tol = (hi - lo) * 1e-4

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = float(objective(c)), float(objective(d))
    trace += [(c, fc), (d, fd)]
    for _ in range(refinements):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = float(objective(c))
            trace.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = float(objective(d))
            trace.append((d, fd))
    x, f = _best(trace)
    return OptResult(x=x, fun=f, trace=trace, bracket=(a, b))


def optimize_transmittance(Ns: float, N: int = 10, order=TYPE_I, det: DetectorModel = IDEAL,
                           delta: float = 0.0, L: int = 4) -> OptResult:
    """Splitter transmittance minimising the hybrid error, over [0.01, 0.99]."""
    c = constellation_for_mean_photon(L, Ns)

    def objective(T):
        return hybrid_error(StagedReceiverConfig(Splitter(T), N, order, delta, det), c)

    return grid_minimize(objective, *T_RANGE)


def optimize_displacement(Ns: float, N: int = 10, T: float = 0.5, order=TYPE_I,
                          det: DetectorModel = IDEAL, L: int = 4) -> OptResult:
    """Real displacement offset minimising the hybrid error over
    ``[-2 t alpha, 2 t alpha]``; also reports the first-probe |beta|^2."""
    c = constellation_for_mean_photon(L, Ns)
    split = Splitter(T)
    span = 2.0 * split.t * c.alpha

    def cfg(delta):
        return StagedReceiverConfig(split, N, order, delta, det)

    if span == 0.0:
        err = hybrid_error(cfg(0.0), c)
        res = OptResult(x=0.0, fun=err, trace=[(0.0, err)])
    else:
        res = grid_minimize(lambda d: hybrid_error_od(cfg(d), c).p_error, -span, span)
    res.beta_sq = first_probe_beta_sq(cfg(res.x), c)
    return res


@dataclass
class OrderRanking:
    best: tuple[int, ...]
    ranking: list[tuple[tuple[int, ...], float]]


def optimize_probing_order(Ns: float, N: int = 10, T: float = 0.5, det: DetectorModel = IDEAL,
                           L: int = 4) -> OrderRanking:
    """Exhaustive search over all probing orders; ties broken lexicographically."""
    if L != 4:
        raise ValueError(f"probing-order search is defined for L = 4, got {L}")
    c = constellation_for_mean_photon(L, Ns)
    split = Splitter(T)
    scored = []
    for order in itertools.permutations(range(L)):
        cfg = StagedReceiverConfig(split, N, order, 0.0, det)
        scored.append((order, hybrid_error_od(cfg, c).p_error))
    scored.sort(key=lambda of: (of[1], of[0]))
    return OrderRanking(best=scored[0][0], ranking=scored)
