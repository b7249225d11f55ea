"""Closed-form cloning radiometry.

Fidelity of an optimal universal cloner, the phase-insensitive amplifier
input/output relation, inversion from fidelity back to input spectral
radiance (photons per temporal mode), conversion between photons per mode
and watts, and first-order error propagation.

Every function is pure and accepts scalars or numpy arrays; scalar inputs
give numpy float64 results.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

from .errors import ValidationError

#: Operating wavelength [m]. Back-derived from the 6.461 nW per photon/mode
#: anchor at a 19.71 ps coherence time; configurable everywhere.
DEFAULT_WAVELENGTH = 1559.8e-9
#: Coherence time of the filtered source [s].
DEFAULT_COHERENCE_TIME = 19.71e-12

#: Below this distance from F = 1 the inversion is refused.
FIDELITY_CEILING_GAP = 1e-12


@dataclass(frozen=True)
class PolarizedFlux:
    """Mean photons per mode in the polarizations parallel and
    perpendicular to the input."""

    mu_parallel: float
    mu_perp: float

    def __post_init__(self):
        if not (self.mu_parallel >= 0 and self.mu_perp >= 0):
            raise ValidationError(
                f"photon numbers must be >= 0, got ({self.mu_parallel}, {self.mu_perp})"
            )

    @property
    def total(self):
        return self.mu_parallel + self.mu_perp

    def fidelity(self):
        total = self.total
        if total == 0:
            raise ValidationError("fidelity undefined for an empty output (both fluxes are 0)")
        return self.mu_parallel / total

    def dop(self):
        return 2.0 * self.fidelity() - 1.0


@dataclass(frozen=True)
class AmplifierParams:
    gain: float

    def __post_init__(self):
        if not self.gain >= 1:
            raise ValidationError(f"amplifier gain must be >= 1, got {self.gain}")


@dataclass(frozen=True)
class RadiometricContext:
    """Ties photons per temporal mode to optical power.

    Parameters
    ----------
    wavelength : float
        Vacuum wavelength in meters.
    coherence_time : float
        Coherence time in seconds; one temporal mode per ``coherence_time``.
    """

    wavelength: float = DEFAULT_WAVELENGTH
    coherence_time: float = DEFAULT_COHERENCE_TIME

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValidationError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.coherence_time > 0:
            raise ValidationError(f"coherence time must be > 0, got {self.coherence_time}")

    def photon_energy(self):
        return PLANCK * SPEED_OF_LIGHT / self.wavelength

    def modes_per_second(self):
        return 1.0 / self.coherence_time


@dataclass(frozen=True)
class FidelityMeasurement:
    fidelity: float
    sigma_fidelity: float = 0.0

    def __post_init__(self):
        if not 0 <= self.fidelity <= 1:
            raise ValidationError(f"fidelity must lie in [0, 1], got {self.fidelity}")
        if not self.sigma_fidelity >= 0:
            raise ValidationError(f"fidelity uncertainty must be >= 0, got {self.sigma_fidelity}")


def _gain_value(params):
    if isinstance(params, AmplifierParams):
        return params.gain
    g = float(params)
    if not g >= 1:
        raise ValidationError(f"amplifier gain must be >= 1, got {g}")
    return g


def fidelity_from_counts(n_in, m_out):
    """Optimal N -> M qubit cloning fidelity, as an exact fraction.

    >>> fidelity_from_counts(1, 2)
    Fraction(5, 6)
    """
    if int(n_in) != n_in or int(m_out) != m_out:
        raise ValidationError("N and M must be integers")
    n, m = int(n_in), int(m_out)
    if n < 1:
        raise ValidationError(f"need N >= 1, got {n}")
    if m < n:
        raise ValidationError(f"need M >= N, got N={n}, M={m}")
    return Fraction(n * m + n + m, n * m + 2 * m)


def amplified_flux(mu_in, params):
    """Output photons per mode (both polarizations) of an optimal amplifier:
    stimulated emission ``G mu`` plus spontaneous emission ``2(G - 1)``."""
    g = _gain_value(params)
    mu = np.asarray(mu_in, dtype=float)
    if np.any(~(mu >= 0)):
        raise ValidationError("input photon number must be >= 0")
    return g * mu + 2.0 * (g - 1.0)


def polarization_split(mu_in, params):
    """Split the amplifier output into parallel and perpendicular fluxes.

    The parallel mode carries the amplified signal plus one unit of
    spontaneous emission ``G - 1``; the perpendicular mode only the latter.
    """
    g = _gain_value(params)
    mu = float(mu_in)
    if not mu >= 0:
        raise ValidationError(f"input photon number must be >= 0, got {mu}")
    return PolarizedFlux(g * mu + (g - 1.0), g - 1.0)


def fidelity_from_flux(mu_in, mu_out):
    """Cloning fidelity in terms of input and output photons per mode."""
    mi = np.asarray(mu_in, dtype=float)
    mo = np.asarray(mu_out, dtype=float)
    if np.any(~(mo > 0)):
        raise ValidationError("fidelity undefined for mu_out <= 0")
    if np.any(~(mi >= 0)):
        raise ValidationError("input photon number must be >= 0")
    if np.any(mo < mi):
        raise ValidationError("an amplifier cannot output fewer photons than it receives")
    # 1 - (mo - mi) / (mo (mi + 2)) equals (mi mo + mi + mo) / (mi mo + 2 mo) but
    # keeps the small gap to 1 at full relative precision when G is close to 1
    return 1.0 - (mo - mi) / (mo * (mi + 2.0))


def invert_fidelity(fidelity, params=None):
    """Recover input photons per mode from the measured cloning fidelity.

    Parameters
    ----------
    fidelity : float or array_like
        Measured fidelity, ``1/2 <= F < 1``.
    params : AmplifierParams or float, optional
        Amplifier gain ``G > 1``. When omitted the large-gain asymptote
        ``(2F - 1)/(1 - F)`` is returned.

    Raises
    ------
    ValidationError
        If ``F < 1/2`` (not reachable by an optimal cloner) or ``F`` is
        within ``1e-12`` of 1 (radiance not resolvable).
    """
    f = np.asarray(fidelity, dtype=float)
    if np.any(~(f >= 0.5)):
        raise ValidationError(f"fidelity below 1/2 is unphysical for an optimal cloner: {fidelity}")
    gap = 1.0 - f
    if np.any(gap < FIDELITY_CEILING_GAP):
        raise ValidationError(
            f"fidelity {fidelity} too close to 1: input radiance is not resolvable"
        )
    if params is None:
        return (2.0 * f - 1.0) / gap
    g = _gain_value(params)
    if g == 1:
        raise ValidationError("exact inversion needs G > 1; at G = 1 every input gives F = 1")
    # factored form of (2FG - G - 2F + 1) / (G - FG); avoids cancellation
    return (2.0 * f - 1.0) * (g - 1.0) / (g * gap)


def fidelity_from_dop(dop):
    d = np.asarray(dop, dtype=float)
    if np.any(~((d >= 0) & (d <= 1))):
        raise ValidationError(f"degree of polarization must lie in [0, 1], got {dop}")
    return 0.5 * (1.0 + d)


def dop_from_fidelity(fidelity):
    f = np.asarray(fidelity, dtype=float)
    if np.any(~((f >= 0.5) & (f <= 1))):
        raise ValidationError(f"fidelity must lie in [1/2, 1], got {fidelity}")
    return 2.0 * f - 1.0


def flux_to_power(mu, ctx):
    """Photons per temporal mode -> watts."""
    m = np.asarray(mu, dtype=float)
    if np.any(~(m >= 0)):
        raise ValidationError("photon number must be >= 0")
    return m * ctx.photon_energy() / ctx.coherence_time


def power_to_flux(power, ctx):
    """Watts -> photons per temporal mode."""
    p = np.asarray(power, dtype=float)
    if np.any(~(p >= 0)):
        raise ValidationError("power must be >= 0")
    return p * ctx.coherence_time / ctx.photon_energy()


def fidelity_error_to_flux_error(mu_in, sigma_f):
    """First-order propagation of a fidelity uncertainty to ``mu_in``
    (large-gain limit): ``(2 + mu)^2 * dF``."""
    mu = np.asarray(mu_in, dtype=float)
    s = np.asarray(sigma_f, dtype=float)
    if np.any(~(mu >= 0)) or np.any(~(s >= 0)):
        raise ValidationError("mu_in and sigma_f must be >= 0")
    return (2.0 + mu) ** 2 * s


def relative_flux_error(mu_in, sigma_f):
    """``dmu / mu``; minimal (``8 dF``) at ``mu = 2``, where stimulated and
    spontaneous emission are equal."""
    mu = np.asarray(mu_in, dtype=float)
    if np.any(~(mu > 0)):
        raise ValidationError("relative error needs mu_in > 0")
    return fidelity_error_to_flux_error(mu, sigma_f) / mu
