"""Recovery of radiometric quantities from measured or simulated data.

Coherence time from a fringe-visibility trace, amplifier gain and
spontaneous-emission intercept from input/output photon numbers, the
discrepancy factor ``k = mu_in / mu_in*`` from fidelity data, and the final
per-point absolute power with its uncertainty budget.
"""

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate
from scipy.constants import c as SPEED_OF_LIGHT

from . import core
from .core import DEFAULT_WAVELENGTH
from .errors import ConvergenceError, ValidationError

#: Gaussian spectrum: FWHM bandwidth times coherence time.
GAUSSIAN_BANDWIDTH_FACTOR = math.sqrt(2.0 * math.log(2.0) / math.pi)


# ---------------------------------------------------------------------------
# coherence time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AutocorrelationTrace:
    """Normalized fringe visibility ``gamma(tau)`` versus delay in seconds.

    A trace with no negative delays is taken as one-sided and mirrored,
    since ``|gamma(-tau)| = |gamma(tau)|``.
    """

    delay: np.ndarray
    visibility: np.ndarray
    normalization_tolerance: float = 0.05

    def __post_init__(self):
        d = np.asarray(self.delay, dtype=float)
        v = np.asarray(self.visibility, dtype=float)
        object.__setattr__(self, "delay", d)
        object.__setattr__(self, "visibility", v)
        if d.ndim != 1 or d.shape != v.shape or d.size < 3:
            raise ValidationError("trace needs matching 1-D delay/visibility arrays with >= 3 samples")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(v))):
            raise ValidationError("trace contains non-finite samples")
        if np.any(np.diff(d) <= 0):
            raise ValidationError("trace delays must be strictly increasing")
        tol = self.normalization_tolerance
        if np.any(np.abs(v) > 1 + tol):
            raise ValidationError("|visibility| exceeds 1")
        if d[0] <= 0 <= d[-1]:
            g0 = abs(np.interp(0.0, d, v))
            if abs(g0 - 1.0) > tol:
                raise ValidationError(f"trace is not normalized: |gamma(0)| = {g0:.4f}")

    @property
    def one_sided(self):
        return self.delay[0] >= 0

    @classmethod
    def from_csv(cls, path):
        """Read ``delay_ps, visibility`` columns."""
        delay, vis = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.lstrip().startswith("#"))
            missing = {"delay_ps", "visibility"} - set(reader.fieldnames or [])
            if missing:
                raise ValidationError(f"trace CSV {path} lacks column(s): {', '.join(sorted(missing))}")
            for lineno, row in enumerate(reader, 2):
                try:
                    delay.append(float(row["delay_ps"]) * 1e-12)
                    vis.append(float(row["visibility"]))
                except (TypeError, ValueError):
                    raise ValidationError(f"trace CSV {path}, row {lineno}: non-numeric value") from None
        return cls(np.array(delay), np.array(vis))


@dataclass(frozen=True)
class CoherenceResult:
    tau_c: float
    delta_nu_fwhm: float
    delta_lambda_fwhm: float
    wavelength: float
    gaussian_assumed: bool = True


def coherence_time(trace, wavelength=DEFAULT_WAVELENGTH, span_threshold=1e-4):
    """Integrate ``|gamma|^2`` over the delay axis.

    The bandwidth is converted assuming a Gaussian spectrum:
    ``dnu = sqrt(2 ln 2 / pi) / tau_c`` and ``dlambda = lambda^2 dnu / c``.
    """
    g2 = np.abs(trace.visibility) ** 2
    if g2[-1] >= span_threshold or (not trace.one_sided and g2[0] >= span_threshold):
        raise ValidationError(
            f"trace span too short: |gamma|^2 at the ends is {g2[0]:.2g}, {g2[-1]:.2g} (need < {span_threshold:g})"
        )
    tau_c = float(integrate.trapezoid(g2, trace.delay))
    if trace.one_sided:
        tau_c *= 2.0
    if not tau_c > 0:
        raise ValidationError("coherence time integrates to a non-positive value")
    dnu = GAUSSIAN_BANDWIDTH_FACTOR / tau_c
    dlam = wavelength**2 * dnu / SPEED_OF_LIGHT
    return CoherenceResult(tau_c, dnu, dlam, wavelength)


def gaussian_trace(tau_c, n_samples=4001, half_span=None):
    """Sampled ``gamma(tau) = exp(-tau^2 / (2 sigma^2))`` with coherence time ``tau_c``."""
    sigma = tau_c / math.sqrt(math.pi)
    if half_span is None:
        half_span = 8.0 * sigma
    delay = np.linspace(-half_span, half_span, n_samples)
    return AutocorrelationTrace(delay, np.exp(-(delay**2) / (2.0 * sigma**2)))


# ---------------------------------------------------------------------------
# gain and total-power estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GainFit:
    gain: float
    intercept_mu0: float
    fit_range_max: float
    residual_rms: float
    n_points: int

    @property
    def spontaneous_consistency(self):
        """Intercept over the ideal spontaneous emission ``2(G - 1)``."""
        return self.intercept_mu0 / (2.0 * (self.gain - 1.0)) if self.gain > 1 else math.nan


def fit_gain(mu_in_star, mu_out_star, threshold=1.0):
    """Straight-line fit of output versus input photons below ``threshold``.

    The slope is the gain and the intercept the spontaneous emission; a
    common scale error on both columns leaves the slope unchanged.
    """
    x = np.asarray(mu_in_star, dtype=float)
    y = np.asarray(mu_out_star, dtype=float)
    if x.shape != y.shape:
        raise ValidationError("mu_in_star and mu_out_star must have the same length")
    sel = x < threshold
    xs, ys = x[sel], y[sel]
    if xs.size < 3:
        raise ValidationError(f"need >= 3 points below mu* = {threshold}, got {xs.size}")
    if np.ptp(xs) == 0:
        raise ValidationError("degenerate abscissas: all sub-threshold inputs are equal")
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    if not slope >= 1:
        raise ValidationError(f"fitted gain {slope:.4g} is below 1")
    return GainFit(float(slope), float(intercept), float(threshold), float(np.sqrt(np.mean(resid**2))), int(xs.size))


def estimate_mu_in_total(mu_out_star, mu_in_star, mu0_star):
    """Polarization-free radiance estimate ``2 (mu_out* - mu_in*) / mu0* - 2``."""
    mu0 = np.asarray(mu0_star, dtype=float)
    if np.any(~(mu0 > 0)):
        raise ValidationError("spontaneous-emission intercept mu0* must be > 0")
    return 2.0 * (np.asarray(mu_out_star, dtype=float) - np.asarray(mu_in_star, dtype=float)) / mu0 - 2.0


# ---------------------------------------------------------------------------
# k fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KFit:
    k: float
    sigma_k: float
    iterations: int
    residual_rms: float
    n_points: int
    jtj: float
    method: str = "gauss-newton"


def model_fidelity(mu_star, k, gain):
    """Predicted fidelity when the true input radiance is ``k mu*``."""
    x = k * np.asarray(mu_star, dtype=float)
    return (gain * x + gain - 1.0) / (gain * x + 2.0 * gain - 2.0)


def _model_jacobian(mu_star, k, gain):
    x = k * mu_star
    return mu_star * gain * (gain - 1.0) / (gain * x + 2.0 * gain - 2.0) ** 2


def _fit_arrays(dataset_or_arrays):
    if isinstance(dataset_or_arrays, tuple):
        mu_star, fid = (np.asarray(a, dtype=float) for a in dataset_or_arrays)
        groups = np.unique(mu_star).size
    else:
        mu_star = dataset_or_arrays.column("mu_in_star")
        fid = dataset_or_arrays.fidelities()
        groups = np.unique(dataset_or_arrays.column("point_index")).size
    return mu_star, fid, groups


def fit_k(data, gain, k0=1.0, max_iter=50, tol=1e-12):
    """Least-squares fit of ``k`` in ``F(mu*) = F_model(k mu*, G)``.

    ``data`` is a dataset or a ``(mu_star, fidelity)`` pair of arrays.
    Uniform weights; Gauss-Newton steps are halved when they fail to reduce
    the residual, and a bisection on the normal equation takes over if they
    stall. ``sigma_k`` comes from the residual variance and the Jacobian.
    """
    g = float(gain.gain if isinstance(gain, GainFit) else gain)
    if not g > 1:
        raise ValidationError(f"k fit needs an amplifier gain > 1, got {g}")
    mu_star, fid, groups = _fit_arrays(data)
    if groups < 5:
        raise ValidationError(f"k fit needs >= 5 distinct grid points, got {groups}")
    if np.any(~((fid >= 0.5) & (fid <= 1))):
        raise ValidationError("fidelities must lie in [1/2, 1]")
    if np.any(~(mu_star >= 0)):
        raise ValidationError("mu_in_star must be >= 0")

    def sse(k):
        r = fid - model_fidelity(mu_star, k, g)
        return float(r @ r)

    def normal_eq(k):
        return float(_model_jacobian(mu_star, k, g) @ (fid - model_fidelity(mu_star, k, g)))

    k = float(k0)
    cost = sse(k)
    method = "gauss-newton"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jac = _model_jacobian(mu_star, k, g)
        jtj = float(jac @ jac)
        step = float(jac @ (fid - model_fidelity(mu_star, k, g))) / jtj
        for _ in range(40):
            trial = k + step
            if trial > 0 and sse(trial) <= cost:
                break
            step *= 0.5
        else:
            break
        k, cost = trial, sse(trial)
        if abs(step) <= tol * max(1.0, abs(k)):
            converged = True
            break

    if not converged:
        lo, hi = k / 4.0, k * 4.0
        if normal_eq(lo) * normal_eq(hi) > 0:
            raise ConvergenceError(f"k fit did not converge after {it} iterations", best=k)
        for it2 in range(200):
            mid = 0.5 * (lo + hi)
            if normal_eq(lo) * normal_eq(mid) <= 0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= tol * max(1.0, mid):
                break
        k = 0.5 * (lo + hi)
        cost = sse(k)
        method = "bisection"
        it += it2 + 1

    jac = _model_jacobian(mu_star, k, g)
    jtj = float(jac @ jac)
    n = mu_star.size
    variance = cost / (n - 1)
    return KFit(
        k=k,
        sigma_k=math.sqrt(variance / jtj),
        iterations=it,
        residual_rms=math.sqrt(cost / n),
        n_points=int(n),
        jtj=jtj,
        method=method,
    )


# ---------------------------------------------------------------------------
# power report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointResult:
    point_index: int
    n_records: int
    mu_in_star: float
    fidelity_mean: float
    sigma_f: float
    mu_in: float
    sigma_mu_in: float
    power_w: float
    sigma_power_w: float
    mu_in_total_estimate: float
    flag: str = ""


POINT_COLUMNS = tuple(f for f in PointResult.__dataclass_fields__)


def point_averages(dataset):
    """Per grid point (sorted by index): count, mean mu*, mean mu_out*, mean F, sample std of F."""
    idx = dataset.column("point_index")
    mu_star = dataset.column("mu_in_star")
    mu_out = dataset.column("mu_out_star")
    fid = dataset.fidelities()
    out = []
    for p in np.unique(idx):
        sel = idx == p
        f = fid[sel]
        spread = float(np.std(f, ddof=1)) if f.size > 1 else math.nan
        out.append((int(p), int(sel.sum()), float(mu_star[sel].mean()), float(mu_out[sel].mean()), float(f.mean()), spread))
    return out


def absolute_power_report(dataset, ctx, gain, k_fit=None, sigma_f=None, sigma_tau_c=0.0, coherence=None):
    """Per-point absolute input power from the cloning fidelity.

    ``mu_in`` is the exact inversion at the given (usually fitted) gain;
    its uncertainty is ``(2 + mu)^2 dF`` with ``dF`` either the supplied
    nominal instrument value or the spread of the repeated readings, and
    the coherence-time uncertainty is added in quadrature.
    """
    g = float(gain.gain if isinstance(gain, GainFit) else gain)
    mu0 = gain.intercept_mu0 if isinstance(gain, GainFit) else 2.0 * (g - 1.0)
    rel_tau = sigma_tau_c / ctx.coherence_time
    watts_per_photon = float(core.flux_to_power(1.0, ctx))
    points = []
    for p, n, mu_star, mu_out, f_mean, spread in point_averages(dataset):
        d_f = float(sigma_f) if sigma_f is not None else (spread if math.isfinite(spread) else 0.0)
        flag = ""
        if f_mean <= 0.5:
            mu, flag = 0.0, "fidelity_at_or_below_half"
        elif 1.0 - f_mean < core.FIDELITY_CEILING_GAP:
            mu, flag = math.inf, "fidelity_unresolvable"
        else:
            mu = float(core.invert_fidelity(f_mean, g))
        d_mu = float(core.fidelity_error_to_flux_error(mu, d_f)) if math.isfinite(mu) else math.inf
        power = mu * watts_per_photon
        d_power = math.hypot(d_mu * watts_per_photon, power * rel_tau) if math.isfinite(mu) else math.inf
        estimate = float(estimate_mu_in_total(mu_out, mu_star, mu0)) if mu0 > 0 else math.nan
        points.append(PointResult(p, n, mu_star, f_mean, d_f, mu, d_mu, power, d_power, estimate, flag))

    report = {
        "context": {"wavelength_m": ctx.wavelength, "coherence_time_s": ctx.coherence_time, "sigma_coherence_time_s": sigma_tau_c},
        "gain": asdict(gain) if isinstance(gain, GainFit) else {"gain": g},
        "k_fit": asdict(k_fit) if k_fit is not None else None,
        "points": [asdict(pt) for pt in points],
    }
    if coherence is not None:
        report["coherence"] = asdict(coherence)
    return report
