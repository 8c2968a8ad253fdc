"""Quantum receivers for QAM coherent states."""

from .constellation import (
    Constellation,
    alpha_for_mean_photon,
    build_constellation,
    constellation_for_mean_photon,
    mean_photon_number,
)
from .physics import IDEAL, DetectorModel, Splitter
from .bounds import NumericalError, helstrom_srm_error, sql_error
from .staged import TYPE_I, TYPE_II, StagedReceiverConfig, hybrid_error, hybrid_error_od

__version__ = "0.1.0"
