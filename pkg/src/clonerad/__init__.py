"""Absolute radiometry from the fidelity of optimal quantum cloning."""

from .core import (
    AmplifierParams,
    FidelityMeasurement,
    PolarizedFlux,
    RadiometricContext,
    amplified_flux,
    dop_from_fidelity,
    fidelity_error_to_flux_error,
    fidelity_from_counts,
    fidelity_from_dop,
    fidelity_from_flux,
    flux_to_power,
    invert_fidelity,
    polarization_split,
    power_to_flux,
)
from .kernels import BACKEND

__version__ = "0.1.0"
