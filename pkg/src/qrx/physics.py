"""Physical primitives: beam splitting, coherent-state overlaps, homodyne
interval statistics and per-slice photon-counting models.

Homodyne outcomes are Gaussian with standard deviation 1/2 around the
quadrature component of the amplitude.  Photon counting in one of ``N``
equal time slices sees a Poisson mean ``nu + eta * |true - displacement|**2 / N``;
``nu`` is the dark-count expectation per slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf
from scipy.stats import poisson

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class DetectorModel:
    eta: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"quantum efficiency must lie in [0, 1], got {self.eta!r}")
        if not (self.nu >= 0.0 and math.isfinite(self.nu)):
            raise ValueError(f"dark count per slice must be >= 0, got {self.nu!r}")


IDEAL = DetectorModel()


@dataclass(frozen=True)
class Splitter:
    T: float

    def __post_init__(self):
        if not 0.0 <= self.T <= 1.0:
            raise ValueError(f"transmittance must lie in [0, 1], got {self.T!r}")

    @property
    def R(self) -> float:
        return 1.0 - self.T

    @property
    def t(self) -> float:
        return math.sqrt(self.T)

    @property
    def r(self) -> float:
        return math.sqrt(1.0 - self.T)


def split(a: complex, s: Splitter) -> tuple[complex, complex]:
    """Return the (transmitted, reflected) amplitudes of ``a``."""
    return s.t * a, s.r * a


def _check_slices(N: int) -> None:
    if N < 1:
        raise ValueError(f"partition count N must be >= 1, got {N!r}")


def slice_mean_counts(true_amp, displacement, N: int, det: DetectorModel):
    _check_slices(N)
    return det.nu + det.eta * np.abs(np.subtract(true_amp, displacement)) ** 2 / N


def slice_no_click_probability(true_amp, displacement, N: int, det: DetectorModel):
    """Probability that an on-off detector stays silent during one slice.

    Broadcasts over array arguments.
    """
    p = np.exp(-slice_mean_counts(true_amp, displacement, N, det))
    return float(p) if np.ndim(p) == 0 else p


def folded_poisson_pmf(k, mu, k_max: int):
    """Poisson pmf with all mass above ``k_max`` folded into ``k_max``."""
    k = np.asarray(k)
    mu = np.asarray(mu, dtype=float)
    return np.where(k >= k_max, poisson.sf(k_max - 1, mu), poisson.pmf(k, mu))


def pnrd_count_distribution(true_amp: complex, displacement: complex, N: int,
                            det: DetectorModel, k_max: int = 10) -> np.ndarray:
    """Count distribution of a photon-number-resolving detector over 0..k_max."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max!r}")
    mu = slice_mean_counts(true_amp, displacement, N, det)
    return folded_poisson_pmf(np.arange(k_max + 1), mu, k_max)


def coherent_overlap(a, b):
    """Inner product <a|b> of two coherent states (broadcasts)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    out = np.exp(-0.5 * np.abs(a) ** 2 - 0.5 * np.abs(b) ** 2 + np.conj(a) * b)
    return complex(out) if out.ndim == 0 else out


def homodyne_interval_probability(mean: float, lo: float, hi: float) -> float:
    """Probability that a homodyne outcome centred on ``mean`` lands in [lo, hi]."""
    if lo > hi:
        raise ValueError(f"interval bounds out of order: lo={lo!r} > hi={hi!r}")
    return float(0.5 * (erf(SQRT2 * (hi - mean)) - erf(SQRT2 * (lo - mean))))
