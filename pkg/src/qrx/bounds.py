"""Reference error curves: the standard quantum limit (ideal heterodyne) and the
square-root-measurement approximation to the Helstrom limit."""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .constellation import Constellation
from .physics import coherent_overlap

FAIL_TOL = 1e-8
SRM_MAX_STATES = 1024


class NumericalError(ArithmeticError):
    """Raised when a linear-algebra step breaks down."""


def gram_matrix(c: Constellation) -> np.ndarray:
    return states_gram_matrix(c.points)


def states_gram_matrix(points) -> np.ndarray:
    points = np.asarray(points, dtype=complex)
    return coherent_overlap(points[:, None], points[None, :])


def hermitian_sqrt(G: np.ndarray) -> np.ndarray:
    """Positive square root of a Hermitian PSD matrix via eigendecomposition.

    Eigenvalues in [-1e-8, 0) are treated as round-off and clamped to zero;
    anything more negative raises :class:`NumericalError`.  Positive
    eigenvalues below the solver's resolution ``n * eps * max(eigenvalue)`` are
    zeroed as well, otherwise their square roots (~1e-8) leak into the result.
    """
    w, V = np.linalg.eigh(G)
    if w.min() < -FAIL_TOL:
        raise NumericalError(f"Gram matrix not PSD: smallest eigenvalue {w.min():.3e}")
    floor = len(w) * np.finfo(float).eps * max(w.max(), 0.0)
    w = np.where(w <= floor, 0.0, w)
    return (V * np.sqrt(w)) @ V.conj().T


def sql_error(c: Constellation) -> float:
    """Symbol error of ideal heterodyne detection with midpoint thresholds.

    Each quadrature outcome has variance 1/2, so the per-axis probability of
    landing on the right level is ``(1 + (L - 1) erf(alpha)) / L``.
    """
    per_axis = (1.0 + (c.L - 1) * erf(c.alpha)) / c.L
    return float(1.0 - per_axis ** 2)


def helstrom_srm_error(c: Constellation) -> float:
    """Error probability of the square-root measurement (equal priors).

    Equals ``1 - sum_i S_ii**2 / M`` with ``S = sqrt(G)``.  Because rows of
    ``S`` have unit norm, ``1 - S_ii**2`` is evaluated as the off-diagonal row
    mass, which keeps full relative precision when the error is tiny.
    """
    return srm_error_of_states(c.points)


def srm_error_of_states(points) -> float:
    """SRM error for any equiprobable set of coherent states."""
    points = np.asarray(points, dtype=complex).ravel()
    M = points.size
    if M > SRM_MAX_STATES:
        raise ValueError(f"SRM limited to {SRM_MAX_STATES} states, got {M}")
    S = hermitian_sqrt(states_gram_matrix(points))
    off = np.abs(S) ** 2
    np.fill_diagonal(off, 0.0)
    return float(off.sum() / M)
