"""Non-ideal (lossy) amplifiers reduced to a loss followed by an optimal cloner.

A partially inverted medium is modelled as a chain of gain elements ``G_n``
interleaved with beam-splitter losses ``eta_n``. A loss can always be moved
in front of a gain element provided both parameters are adjusted, so any
chain collapses to an input transmission ``Q`` followed by an ideal gain
``G_eq``. In the continuum limit the pair obeys

    dG/dz   = (chi - lam) G + lam
    deta/dz = -eta lam / G

with ``G(0) = eta(0) = 1``, which also has a quadrature solution.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from . import kernels
from .errors import CalibrationError, IntegrationError, NonRearrangeableError, ValidationError

FAMILIES = ("chi1", "chi2", "chi3")


# ---------------------------------------------------------------------------
# discrete chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GainLossElement:
    kind: str
    value: float

    def __post_init__(self):
        if self.kind == "gain":
            if not self.value >= 1:
                raise ValidationError(f"gain element needs G >= 1, got {self.value}")
        elif self.kind == "loss":
            if not 0 <= self.value <= 1:
                raise ValidationError(f"loss element needs eta in [0, 1], got {self.value}")
        else:
            raise ValidationError(f"element kind must be 'gain' or 'loss', got {self.kind!r}")

    @classmethod
    def gain(cls, g):
        return cls("gain", float(g))

    @classmethod
    def loss(cls, eta):
        return cls("loss", float(eta))


@dataclass(frozen=True)
class ElementChain:
    """Ordered gain/loss elements, input side first."""

    elements: tuple

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise ValidationError("element chain must not be empty")
        for el in self.elements:
            if not isinstance(el, GainLossElement):
                raise ValidationError(f"not a GainLossElement: {el!r}")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def total_gain(self):
        return math.prod(el.value for el in self.elements if el.kind == "gain")

    @property
    def total_transmission(self):
        return math.prod(el.value for el in self.elements if el.kind == "loss")


@dataclass(frozen=True)
class EquivalentModel:
    """Input transmission ``q`` followed by an optimal amplifier of gain ``gain``.

    ``trace`` holds one ``(G_0^n, Q_n)`` pair per loss element: the
    accumulated effective gain sitting in front of that loss when it was
    pulled to the input, and the equivalent transmission it became.
    """

    q: float
    gain: float
    trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValidationError(f"equivalent transmission must lie in [0, 1], got {self.q}")
        if not self.gain >= 1:
            raise ValidationError(f"equivalent gain must be >= 1, got {self.gain}")

    def mean_output(self, mu_in):
        """Mean photons out of one mode for ``mu_in`` photons in."""
        return self.gain * self.q * mu_in + (self.gain - 1.0)

    @property
    def added_noise(self):
        return self.gain - 1.0


def commute_loss_left(g, eta):
    """Rewrite ``gain G -> loss eta`` as ``loss eta' -> gain G'``.

    Returns ``(G', eta')`` with ``G' = eta (G - 1) + 1`` and
    ``eta' = G eta / (G eta + 1 - eta)``; always physical.
    """
    if not g >= 1:
        raise ValidationError(f"need G >= 1, got {g}")
    if not 0 <= eta <= 1:
        raise ValidationError(f"need eta in [0, 1], got {eta}")
    g_prime = eta * (g - 1.0) + 1.0
    eta_prime = g * eta / (g * eta + (1.0 - eta))
    return g_prime, eta_prime


def commute_gain_left(g_prime, eta_prime):
    """Inverse of :func:`commute_loss_left`: ``loss eta' -> gain G'`` becomes
    ``gain G -> loss eta``.

    Raises
    ------
    NonRearrangeableError
        If ``G' (1 - eta') >= 1``, which would need a negative transmission.
    """
    if not g_prime >= 1:
        raise ValidationError(f"need G' >= 1, got {g_prime}")
    if not 0 <= eta_prime <= 1:
        raise ValidationError(f"need eta' in [0, 1], got {eta_prime}")
    leak = g_prime * (1.0 - eta_prime)
    if leak >= 1:
        raise NonRearrangeableError(
            f"cannot move gain {g_prime} ahead of loss {eta_prime}: "
            f"G'(1 - eta') = {leak} >= 1 would imply a negative transmission"
        )
    eta = 1.0 - leak
    g = g_prime * eta_prime / eta
    return g, eta


def canonicalize_chain(chain):
    """Pull every loss to the input, returning the equivalent ``(Q, G_eq)``."""
    if not isinstance(chain, ElementChain):
        chain = ElementChain(chain)
    q = 1.0
    g_acc = 1.0
    trace = []
    for el in chain:
        if el.kind == "gain":
            g_acc *= el.value
        else:
            g_new, q_n = commute_loss_left(g_acc, el.value)
            trace.append((g_acc, q_n))
            q *= q_n
            g_acc = g_new
    return EquivalentModel(q=q, gain=g_acc, trace=tuple(trace))


# ---------------------------------------------------------------------------
# continuous profiles
# ---------------------------------------------------------------------------


class Field:
    """A real density along the fiber, ``f(z)`` in 1/m.

    ``antiderivative(z)`` must return the integral from 0 to ``z``; when it
    is not supplied, adaptive quadrature is used.
    """

    tabulated = False

    def __init__(self, func: Callable, antiderivative: Optional[Callable] = None, name="field"):
        self._func = func
        self._anti = antiderivative
        self.name = name

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.broadcast_to(np.asarray(self._func(z), dtype=float), z.shape).copy()

    def integral(self, z):
        if self._anti is not None:
            return float(self._anti(float(z)))
        val, _ = integrate.quad(lambda t: float(self._func(t)), 0.0, float(z), epsabs=0.0, epsrel=1e-12, limit=200)
        return val

    def scaled(self, factor):
        anti = self._anti
        return Field(
            lambda z: factor * self._func(z),
            None if anti is None else (lambda z: factor * anti(z)),
            name=self.name,
        )

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class ConstantField(Field):
    def __init__(self, value):
        self.value = float(value)
        super().__init__(lambda z: np.full(np.shape(z), self.value), lambda z: self.value * z, name=f"{value:g}")

    def scaled(self, factor):
        return ConstantField(factor * self.value)


class TabulatedField(Field):
    """Piecewise-linear interpolation of samples covering ``[0, L]``."""

    tabulated = True

    def __init__(self, z, values, name="table"):
        z = np.asarray(z, dtype=float)
        v = np.asarray(values, dtype=float)
        if z.ndim != 1 or z.shape != v.shape or z.size < 2:
            raise ValidationError("tabulated field needs matching 1-D arrays with >= 2 samples")
        if np.any(np.diff(z) <= 0):
            raise ValidationError("tabulated field positions must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValidationError("tabulated field contains non-finite values")
        self.z = z
        self.values = v
        seg = 0.5 * (v[1:] + v[:-1]) * np.diff(z)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        super().__init__(lambda t: np.interp(t, self.z, self.values), self._integral, name=name)

    def _integral(self, t):
        i = int(np.clip(np.searchsorted(self.z, t, side="right") - 1, 0, self.z.size - 2))
        z0 = self.z[i]
        v0 = self.values[i]
        slope = (self.values[i + 1] - v0) / (self.z[i + 1] - z0)
        dz = t - z0
        return self._cum[i] + v0 * dz + 0.5 * slope * dz * dz

    def scaled(self, factor):
        return TabulatedField(self.z, factor * self.values, name=self.name)


class FamilyField(Field):
    """Inversion profiles ``chi1 = 2 - exp(alpha z)``, ``chi2 = 1`` and
    ``chi3 = 2 - exp(alpha (L - z))``, times an amplitude ``scale``.

    All three coincide at ``alpha = 0``; the constant member is pinned to
    that common value.
    """

    def __init__(self, family, alpha, length, scale=1.0):
        if family not in FAMILIES:
            raise ValidationError(f"unknown profile family {family!r}; expected one of {FAMILIES}")
        if not math.isfinite(alpha):
            raise ValidationError(f"alpha must be finite, got {alpha}")
        self.family = family
        self.alpha = float(alpha)
        self.length = float(length)
        self.scale = float(scale)
        super().__init__(self._eval, self._anti_eval, name=f"{family}(alpha={alpha:g})")

    def _eval(self, z):
        a, s = self.alpha, self.scale
        if self.family == "chi1":
            return s * (2.0 - np.exp(a * z))
        if self.family == "chi2":
            return s * np.ones_like(np.asarray(z, dtype=float))
        return s * (2.0 - np.exp(a * (self.length - z)))

    def _anti_eval(self, z):
        a, s = self.alpha, self.scale
        if self.family == "chi2":
            return s * z
        if a == 0:
            return s * z
        if self.family == "chi1":
            return s * (2.0 * z - math.expm1(a * z) / a)
        return s * (2.0 * z + math.exp(a * self.length) * math.expm1(-a * z) / a)

    def scaled(self, factor):
        return FamilyField(self.family, self.alpha, self.length, self.scale * factor)


@dataclass(frozen=True)
class InversionProfile:
    """Gain density ``chi(z)`` and loss density ``lam(z)`` on ``[0, length]``."""

    chi: Field
    lam: Field
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValidationError(f"medium length must be > 0, got {self.length}")
        for f in (self.chi, self.lam):
            if f.tabulated and (f.z[0] > 0 or f.z[-1] < self.length):
                raise ValidationError("tabulated field must cover [0, L]")
        probe = self.lam(np.linspace(0.0, self.length, 257))
        if isinstance(self.lam, TabulatedField):
            probe = np.concatenate([probe, self.lam.values])
        if np.any(probe < 0):
            raise ValidationError("loss density lam(z) must be >= 0 everywhere")

    @classmethod
    def family(cls, name, alpha, length=2.0, lambda0=0.0, scale=1.0):
        return cls(FamilyField(name, alpha, length, scale), ConstantField(lambda0), float(length))

    @classmethod
    def constant(cls, chi, lam, length):
        return cls(ConstantField(chi), ConstantField(lam), float(length))

    @classmethod
    def from_table(cls, z, chi, lam):
        z = np.asarray(z, dtype=float)
        if z.size == 0 or z[0] != 0:
            raise ValidationError("tabulated profile must start at z = 0")
        return cls(TabulatedField(z, chi, "chi"), TabulatedField(z, lam, "lam"), float(z[-1]))

    @classmethod
    def from_csv(cls, path):
        """Read ``z_m, chi_per_m, lambda_per_m`` columns."""
        z, chi, lam = [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.lstrip().startswith("#"))
            cols = {"z_m", "chi_per_m", "lambda_per_m"}
            missing = cols - set(reader.fieldnames or [])
            if missing:
                raise ValidationError(f"profile CSV {path} lacks column(s): {', '.join(sorted(missing))}")
            for lineno, row in enumerate(reader, 2):
                try:
                    z.append(float(row["z_m"]))
                    chi.append(float(row["chi_per_m"]))
                    lam.append(float(row["lambda_per_m"]))
                except (TypeError, ValueError):
                    raise ValidationError(f"profile CSV {path}, row {lineno}: non-numeric value") from None
        return cls.from_table(z, chi, lam)

    @property
    def is_tabulated(self):
        return self.chi.tabulated or self.lam.tabulated

    def with_chi_scale(self, factor):
        return InversionProfile(self.chi.scaled(factor), self.lam, self.length)


@dataclass(frozen=True)
class ProfileTrajectory:
    z: np.ndarray
    gain: np.ndarray
    eta: np.ndarray

    @property
    def final(self):
        return float(self.gain[-1]), float(self.eta[-1])

    def equivalent(self):
        g, eta = self.final
        return EquivalentModel(q=eta, gain=g)


def _sample_nodes(profile, steps):
    if int(steps) != steps or steps < 2:
        raise ValidationError(f"need an integer number of steps >= 2, got {steps}")
    steps = int(steps)
    h = profile.length / steps
    z = np.linspace(0.0, profile.length, 2 * steps + 1)
    chi = np.ascontiguousarray(profile.chi(z), dtype=float)
    lam = np.ascontiguousarray(profile.lam(z), dtype=float)
    bad = ~(np.isfinite(chi) & np.isfinite(lam))
    if np.any(bad):
        raise IntegrationError(f"non-finite field value at z = {z[np.argmax(bad)]:g} m", z=float(z[np.argmax(bad)]))
    return z, chi, lam, h


def integrate_profile(profile, steps=10_000):
    """Fixed-step RK4 integration of the equivalent ``(G, eta)`` along the medium."""
    z_nodes, chi, lam, h = _sample_nodes(profile, steps)
    g, eta, fail = kernels.rk4_gain_loss(chi, lam, h)
    z = z_nodes[::2]
    if fail >= 0:
        raise IntegrationError(f"equivalent gain reached <= 0 near z = {z[fail]:g} m", z=float(z[fail]))
    return ProfileTrajectory(z=z, gain=g, eta=eta)


def integrate_profile_final(profile, steps=10_000):
    """Like :func:`integrate_profile` but only returns ``(G(L), eta(L))``."""
    z_nodes, chi, lam, h = _sample_nodes(profile, steps)
    g, eta, fail = kernels.rk4_gain_loss_final(chi, lam, h)
    if fail >= 0:
        zf = z_nodes[2 * fail]
        raise IntegrationError(f"equivalent gain reached <= 0 near z = {zf:g} m", z=float(zf))
    return g, eta


def closed_form_solution(profile, z=None):
    """Quadrature solution of the ``(G, eta)`` system at position ``z``.

    ``G(z) = e^{A(z)} (1 + I(z))`` and ``eta(z) = 1 / (1 + I(z))`` where
    ``A`` is the integral of ``chi - lam`` and ``I`` the integral of
    ``lam e^{-A}``. Analytic fields use adaptive quadrature (relative
    tolerance 1e-10); tabulated ones a refined trapezoid rule.
    """
    if z is None:
        z = profile.length
    z = float(z)
    if not 0 <= z <= profile.length:
        raise ValidationError(f"z = {z} outside the medium [0, {profile.length}]")
    if z == 0:
        return 1.0, 1.0

    if profile.is_tabulated:
        knots = [0.0, z]
        for f in (profile.chi, profile.lam):
            if f.tabulated:
                knots.extend(f.z[(f.z > 0) & (f.z < z)])
        knots = np.unique(knots)
        grid = np.unique(np.concatenate([np.linspace(a, b, 65) for a, b in zip(knots[:-1], knots[1:])]))
        net = profile.chi(grid) - profile.lam(grid)
        a_cum = integrate.cumulative_trapezoid(net, grid, initial=0.0)
        i_val = integrate.trapezoid(profile.lam(grid) * np.exp(-a_cum), grid)
        a_z = a_cum[-1]
    else:
        def exponent(t):
            return profile.chi.integral(t) - profile.lam.integral(t)

        def integrand(t):
            return float(profile.lam(t)) * math.exp(-exponent(t))

        i_val, _ = integrate.quad(integrand, 0.0, z, epsabs=0.0, epsrel=1e-10, limit=200)
        a_z = exponent(z)
    return math.exp(a_z) * (1.0 + i_val), 1.0 / (1.0 + i_val)


# ---------------------------------------------------------------------------
# inversion-profile sweeps
# ---------------------------------------------------------------------------


def default_loss_density(length=2.0, target_gain=50.0, eta_flat=0.9):
    """Constant loss density giving ``eta(L) = eta_flat`` for a flat profile
    calibrated to ``G(L) = target_gain``."""
    e = target_gain * eta_flat
    if not (1 < e < target_gain):
        raise ValidationError("need 1 < target_gain * eta_flat < target_gain")
    return (target_gain - e) / (e - 1.0) * math.log(e) / length


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    family: str
    eta_total: float
    g_total: float
    calibration_scale: float
    error: Optional[str] = None

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "family": self.family,
            "eta_total": self.eta_total,
            "g_total": self.g_total,
            "calibration_scale": self.calibration_scale,
        }


def calibrate_chi_scale(profile, target_gain, steps=2000, tol=1e-6, max_doublings=60):
    """Find the amplitude factor on ``chi`` for which ``G(L) = target_gain``.

    Brackets from zero amplitude (where ``G(L) = 1``) by doubling, then
    bisects. Returns ``(scale, G(L), eta(L))``.
    """
    if not target_gain > 1:
        raise ValidationError(f"target gain must be > 1, got {target_gain}")

    def gain_at(s):
        _, chi, lam, h = _sample_nodes(profile.with_chi_scale(s), steps)
        g, _, fail = kernels.rk4_gain_loss_final(chi, lam, h)
        if fail < 0:
            return g
        # overflow counts as "above target", collapse to G <= 0 as "below"
        return math.inf if not g <= 0 else -math.inf

    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if gain_at(hi) > target_gain:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise CalibrationError(f"no chi amplitude up to {hi:g} reaches G(L) = {target_gain}")

    scale = optimize.bisect(lambda s: gain_at(s) - target_gain, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)
    try:
        g, eta = integrate_profile_final(profile.with_chi_scale(scale), steps)
    except IntegrationError as exc:
        raise CalibrationError(f"calibration landed on a collapsing profile: {exc}") from exc
    if abs(g - target_gain) > tol * target_gain:
        raise CalibrationError(f"calibrated G(L) = {g} misses target {target_gain}")
    return scale, g, eta


def profile_loss_sweep(
    family: "str | Sequence[str]",
    alpha_values,
    target_total_gain=50.0,
    length=2.0,
    lambda0=None,
    steps=2000,
):
    """Total equivalent loss ``eta(L)`` versus ``alpha`` for inversion families.

    For each ``(alpha, family)`` the amplitude of ``chi`` is calibrated so
    the medium's equivalent gain equals ``target_total_gain``. A point that
    cannot be calibrated is returned with ``error`` set and NaN values.
    """
    families = (family,) if isinstance(family, str) else tuple(family)
    if lambda0 is None:
        lambda0 = default_loss_density(length, target_total_gain)
    rows = []
    for alpha in alpha_values:
        for fam in families:
            profile = InversionProfile.family(fam, float(alpha), length=length, lambda0=lambda0)
            try:
                scale, g, eta = calibrate_chi_scale(profile, target_total_gain, steps=steps)
            except CalibrationError as exc:
                rows.append(SweepRow(float(alpha), fam, math.nan, math.nan, math.nan, str(exc)))
                continue
            rows.append(SweepRow(float(alpha), fam, eta, g, scale))
    return rows
