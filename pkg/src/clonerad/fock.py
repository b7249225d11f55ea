"""Brute-force Fock-space oracle for the loss and amplification elements.

States are dense amplitude tensors over a truncated number basis, one axis
per bosonic mode. A beam-splitter loss couples the signal to a vacuum
ancilla ``c`` through ``H = i lam (a c^dag - a^dag c)``; an amplifying
element couples it to a vacuum idler ``b`` through the two-mode squeezer
``H = i chi (a b - a^dag b^dag)``. Both propagators are real, so the
Schrodinger equation is integrated over unit time with fixed RK4 substeps,
with ``lam = arccos(sqrt(eta))`` and ``chi = arccosh(sqrt(G))``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import PolarizedFlux
from .errors import NumericalError, TruncationError, ValidationError

NORM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TruncationConfig:
    dim_per_mode: int = 48
    evolution_substeps: int = 400
    guard_threshold: float = 1e-8

    def __post_init__(self):
        if self.dim_per_mode < 4:
            raise ValidationError(f"dim_per_mode must be >= 4, got {self.dim_per_mode}")
        if self.evolution_substeps < 1:
            raise ValidationError("evolution_substeps must be >= 1")
        if not 0 < self.guard_threshold <= 1e-4:
            raise ValidationError(f"guard_threshold must lie in (0, 1e-4], got {self.guard_threshold}")


class FockState:
    """Pure state of 2 or 3 truncated bosonic modes."""

    def __init__(self, amplitudes):
        amp = np.array(amplitudes, dtype=complex)
        if amp.ndim not in (2, 3):
            raise ValidationError(f"FockState supports 2 or 3 modes, got {amp.ndim}")
        if min(amp.shape) < 2:
            raise ValidationError("every mode needs at least two levels")
        norm = np.linalg.norm(amp)
        if not abs(norm - 1.0) < NORM_TOLERANCE:
            raise ValidationError(f"state is not normalized (norm = {norm})")
        self.amplitudes = amp

    @classmethod
    def basis(cls, levels, dims):
        """Product number state ``|n_0, n_1, ...>``."""
        levels, dims = tuple(levels), tuple(dims)
        if len(levels) != len(dims):
            raise ValidationError("levels and dims must have the same length")
        if any(not 0 <= n < d for n, d in zip(levels, dims)):
            raise ValidationError(f"levels {levels} do not fit into dims {dims}")
        amp = np.zeros(dims, dtype=complex)
        amp[levels] = 1.0
        return cls(amp)

    @classmethod
    def product(cls, *mode_amplitudes):
        """Tensor product of single-mode amplitude vectors."""
        amp = mode_amplitudes[0]
        for v in mode_amplitudes[1:]:
            amp = np.multiply.outer(amp, v)
        return cls(np.asarray(amp) / np.linalg.norm(amp))

    @property
    def dims(self):
        return self.amplitudes.shape

    @property
    def n_modes(self):
        return self.amplitudes.ndim

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def populations(self, mode):
        """Number distribution of one mode."""
        other = tuple(ax for ax in range(self.n_modes) if ax != mode)
        return np.sum(np.abs(self.amplitudes) ** 2, axis=other)

    def edge_population(self, mode):
        return float(np.sum(self.populations(mode)[-2:]))

    def check_truncation(self, threshold):
        for mode in range(self.n_modes):
            leak = self.edge_population(mode)
            if leak >= threshold:
                raise TruncationError(
                    f"mode {mode}: population {leak:.3g} in the top two of {self.dims[mode]} levels "
                    f"exceeds {threshold:g}; raise dim_per_mode"
                )

    def __repr__(self):
        return f"FockState(dims={self.dims})"


def _lower(psi, axis):
    """``a`` acting on ``axis``: ``(a psi)[n] = sqrt(n+1) psi[n+1]``."""
    d = psi.shape[axis]
    out = np.zeros_like(psi)
    src = [slice(None)] * psi.ndim
    dst = [slice(None)] * psi.ndim
    src[axis] = slice(1, d)
    dst[axis] = slice(0, d - 1)
    shape = [1] * psi.ndim
    shape[axis] = d - 1
    out[tuple(dst)] = np.sqrt(np.arange(1, d, dtype=float)).reshape(shape) * psi[tuple(src)]
    return out


def _raise(psi, axis):
    """``a^dag`` acting on ``axis``, truncated at the top level."""
    d = psi.shape[axis]
    out = np.zeros_like(psi)
    src = [slice(None)] * psi.ndim
    dst = [slice(None)] * psi.ndim
    src[axis] = slice(0, d - 1)
    dst[axis] = slice(1, d)
    shape = [1] * psi.ndim
    shape[axis] = d - 1
    out[tuple(dst)] = np.sqrt(np.arange(1, d, dtype=float)).reshape(shape) * psi[tuple(src)]
    return out


def _squeeze_generator(psi, a, b):
    # -i H for H = i (a b - a^dag b^dag)
    return _lower(_lower(psi, b), a) - _raise(_raise(psi, b), a)


def _beamsplitter_generator(psi, a, c):
    # -i H for H = i (a c^dag - a^dag c)
    return _lower(_raise(psi, c), a) - _raise(_lower(psi, c), a)


def _rk4(psi, generator, rate, substeps):
    h = 1.0 / substeps
    for _ in range(substeps):
        k1 = rate * generator(psi)
        k2 = rate * generator(psi + 0.5 * h * k1)
        k3 = rate * generator(psi + 0.5 * h * k2)
        k4 = rate * generator(psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


def _check_modes(state, m1, m2):
    n = state.n_modes
    if not (0 <= m1 < n and 0 <= m2 < n) or m1 == m2:
        raise ValidationError(f"need two distinct modes among 0..{n - 1}, got {m1}, {m2}")


def _require_vacuum(state, mode, role):
    p0 = state.populations(mode)[0]
    if not p0 > 1.0 - 1e-12:
        raise ValidationError(f"{role} mode {mode} must start in vacuum (P(0) = {p0})")


def _finish(state, psi, cfg):
    out = FockState.__new__(FockState)
    out.amplitudes = psi
    drift = abs(out.norm() - state.norm())
    if drift >= NORM_TOLERANCE:
        raise NumericalError(f"norm drifted by {drift:.3g}; increase evolution_substeps")
    out.check_truncation(cfg.guard_threshold)
    return out


def evolve_loss(state, eta, signal_mode=0, ancilla_mode=1, cfg=TruncationConfig()):
    """Beam splitter of transmission ``eta`` between signal and a vacuum ancilla."""
    if not 0 <= eta <= 1:
        raise ValidationError(f"need eta in [0, 1], got {eta}")
    _check_modes(state, signal_mode, ancilla_mode)
    _require_vacuum(state, ancilla_mode, "ancilla")
    rate = math.acos(math.sqrt(eta))
    if rate == 0:
        return state
    psi = _rk4(state.amplitudes, lambda p: _beamsplitter_generator(p, signal_mode, ancilla_mode), rate, cfg.evolution_substeps)
    return _finish(state, psi, cfg)


def evolve_gain(state, g, signal_mode=0, idler_mode=1, cfg=TruncationConfig()):
    """Two-mode squeezer of gain ``G`` between signal and a vacuum idler."""
    if not g >= 1:
        raise ValidationError(f"need G >= 1, got {g}")
    _check_modes(state, signal_mode, idler_mode)
    _require_vacuum(state, idler_mode, "idler")
    rate = math.acosh(math.sqrt(g))
    if rate == 0:
        return state
    psi = _rk4(state.amplitudes, lambda p: _squeeze_generator(p, signal_mode, idler_mode), rate, cfg.evolution_substeps)
    return _finish(state, psi, cfg)


def mean_photon(state, mode):
    pops = state.populations(mode)
    return float(np.dot(np.arange(pops.size), pops))


def moments(state, mode):
    """``<a>``, ``<a^2>`` and ``<a^dag a>`` of one mode."""
    psi = state.amplitudes
    a_psi = _lower(psi, mode)
    aa_psi = _lower(a_psi, mode)
    return {
        "a": complex(np.vdot(psi, a_psi)),
        "a2": complex(np.vdot(psi, aa_psi)),
        "n": float(np.vdot(a_psi, a_psi).real),
    }


def reduced_density_matrix(state, mode):
    psi = np.moveaxis(state.amplitudes, mode, 0).reshape(state.dims[mode], -1)
    return psi @ psi.conj().T


def _cloned_mean(rho, g, cfg):
    """Output ``<n>`` of one polarization mode with reduced input state ``rho``."""
    weights, vectors = np.linalg.eigh(rho)
    total = 0.0
    for w, v in zip(weights, vectors.T):
        if w < 1e-15:
            continue
        idler = np.zeros(cfg.dim_per_mode, dtype=complex)
        idler[0] = 1.0
        signal = np.zeros(cfg.dim_per_mode, dtype=complex)
        signal[: v.size] = v
        pair = FockState.product(signal, idler)
        total += w * mean_photon(evolve_gain(pair, g, 0, 1, cfg), 0)
    return total


def simulate_cloner(mu_in, g, cfg=TruncationConfig()):
    """Amplify a polarized input with one idler per polarization mode.

    Parameters
    ----------
    mu_in : int or FockState
        Either a number of photons placed in the parallel mode, or a
        two-mode state over (parallel, perpendicular).
    g : float
        Amplifier gain, ``1 <= G``.

    Returns
    -------
    PolarizedFlux
        Mean output photons in the parallel and perpendicular modes.
    """
    d = cfg.dim_per_mode
    if isinstance(mu_in, FockState):
        if mu_in.n_modes != 2:
            raise ValidationError("a polarization input must be a two-mode state")
        if max(mu_in.dims) > d:
            raise ValidationError(f"input dims {mu_in.dims} exceed dim_per_mode = {d}")
        rho_par = reduced_density_matrix(mu_in, 0)
        rho_perp = reduced_density_matrix(mu_in, 1)
    else:
        n = int(mu_in)
        if n != mu_in or not 0 <= n < d - 2:
            raise ValidationError(f"Fock input must be an integer in [0, {d - 3}], got {mu_in}")
        rho_par = np.zeros((d, d))
        rho_par[n, n] = 1.0
        rho_perp = np.zeros((d, d))
        rho_perp[0, 0] = 1.0
    return PolarizedFlux(_cloned_mean(rho_par, g, cfg), _cloned_mean(rho_perp, g, cfg))
