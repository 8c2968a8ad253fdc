"""Square QAM constellations of coherent states.

Points are ordered row-major: rows by descending imaginary level ``q`` and,
within a row, columns by descending real level ``p``.  Row/column label ``k``
therefore maps to level ``(L - 1) - 2k``, so label 0 is the outermost positive
level and label ``L - 1`` the outermost negative one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def levels(L: int) -> np.ndarray:
    """Return the per-axis levels {-(L-1), ..., L-1} in descending order."""
    return np.arange(L - 1, -L, -2, dtype=float)


def label_to_level(k: int, L: int) -> int:
    return (L - 1) - 2 * k


@dataclass(frozen=True)
class Constellation:
    L: int
    alpha: float
    points: np.ndarray = field(repr=False)
    priors: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.L * self.L

    def row_col(self, index: int) -> tuple[int, int]:
        return divmod(index, self.L)

    def index(self, row: int, col: int) -> int:
        return row * self.L + col


def build_constellation(L: int, alpha: float) -> Constellation:
    """Build the ``L x L`` QAM constellation with amplitudes ``alpha * (p + jq)``.

    Raises:
        ValueError: if ``L < 2`` or ``alpha < 0``.
    """
    if int(L) != L or L < 2:
        raise ValueError(f"side length L must be an integer >= 2, got {L!r}")
    if not np.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be finite and non-negative, got {alpha!r}")
    L = int(L)
    om = levels(L)
    q, p = np.meshgrid(om, om, indexing="ij")
    points = alpha * (p + 1j * q).ravel()
    priors = np.full(L * L, 1.0 / (L * L))
    points.setflags(write=False)
    priors.setflags(write=False)
    return Constellation(L=L, alpha=float(alpha), points=points, priors=priors)


def _mean_level_energy(L: int) -> float:
    # (1/M) * sum(p^2 + q^2) over the grid = 2 (L^2 - 1) / 3
    return 2.0 * (L * L - 1) / 3.0


def mean_photon_number(c: Constellation) -> float:
    return float(np.sum(c.priors * np.abs(c.points) ** 2))


def alpha_for_mean_photon(L: int, Ns: float) -> float:
    """Invert :func:`mean_photon_number` for a uniform-prior constellation."""
    if Ns < 0 or not np.isfinite(Ns):
        raise ValueError(f"mean photon number must be finite and non-negative, got {Ns!r}")
    if int(L) != L or L < 2:
        raise ValueError(f"side length L must be an integer >= 2, got {L!r}")
    return float(np.sqrt(Ns / _mean_level_energy(int(L))))


def constellation_for_mean_photon(L: int, Ns: float) -> Constellation:
    return build_constellation(L, alpha_for_mean_photon(L, Ns))
