"""Monte Carlo model of the cloning-radiometer bench.

Light at a set spectral radiance is split between a monitor powermeter and
the amplifier; the amplified light passes a polarization scrambler setting,
a filter and a polarimeter. The simulation reproduces the instrument
systematics that matter for the radiometric result:

* polarimeter: fidelity bias interpolated linearly in the true DOP between
  its unpolarized and polarized values, plus Gaussian noise ``sigma_f``;
* powermeter: one multiplicative calibration bias per dataset and a
  per-reading reconnection scatter ``repeat_sigma``;
* amplifier: optional gain saturation and an equivalent input loss ``Q``.

Every record draws from its own substream, seeded by
``(seed, point_index, polarization_index)``, so datasets do not depend on
generation order.
"""

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import core
from .core import RadiometricContext
from .errors import ConfigError, ValidationError

DEFAULT_SEED = 0
DEFAULT_GRID = (0.2, 0.4, 0.6, 0.8, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)

DATASET_COLUMNS = (
    "point_index",
    "polarization_index",
    "mu_in_star",
    "monitor_power_w",
    "dop_measured",
    "mu_out_star",
)


@dataclass(frozen=True)
class PolarimeterModel:
    sigma_f: float = 0.005
    bias_unpolarized: float = 0.01
    bias_polarized: float = -0.002

    def __post_init__(self):
        if not self.sigma_f >= 0:
            raise ValidationError(f"polarimeter sigma_f must be >= 0, got {self.sigma_f}")
        for name in ("bias_unpolarized", "bias_polarized"):
            if not abs(getattr(self, name)) <= 0.5:
                raise ValidationError(f"polarimeter {name} must lie in [-0.5, 0.5]")

    def bias(self, true_dop):
        """Fidelity-domain bias at a given true DOP."""
        return self.bias_unpolarized + (self.bias_polarized - self.bias_unpolarized) * true_dop


@dataclass(frozen=True)
class PowermeterModel:
    absolute_bias: float = 0.0
    repeat_sigma: float = 0.005

    def __post_init__(self):
        if not -1 < self.absolute_bias < 1:
            raise ValidationError(f"powermeter absolute_bias must lie in (-1, 1), got {self.absolute_bias}")
        if not 0 <= self.repeat_sigma <= 1:
            raise ValidationError(f"powermeter repeat_sigma must lie in [0, 1], got {self.repeat_sigma}")


@dataclass(frozen=True)
class ExperimentConfig:
    ctx: RadiometricContext = field(default_factory=RadiometricContext)
    gain_g0: float = 35.0
    q_factor: float = 1.0
    saturation_mu: "float | None" = None
    monitor_split: float = 0.5
    calibration_ratio: float = 1.0
    polarimeter: PolarimeterModel = field(default_factory=PolarimeterModel)
    powermeter: PowermeterModel = field(default_factory=PowermeterModel)
    polarizations_per_point: int = 20
    mu_star_grid: tuple = DEFAULT_GRID

    def __post_init__(self):
        object.__setattr__(self, "mu_star_grid", tuple(float(m) for m in self.mu_star_grid))
        if not self.gain_g0 >= 1:
            raise ValidationError(f"gain_g0 must be >= 1, got {self.gain_g0}")
        if not 0 <= self.q_factor <= 1:
            raise ValidationError(f"q_factor must lie in [0, 1], got {self.q_factor}")
        if self.saturation_mu is not None and not self.saturation_mu > 0:
            raise ValidationError(f"saturation_mu must be > 0 when set, got {self.saturation_mu}")
        if not 0 < self.monitor_split < 1:
            raise ValidationError(f"monitor_split must lie in (0, 1), got {self.monitor_split}")
        if not self.calibration_ratio > 0:
            raise ValidationError(f"calibration_ratio must be > 0, got {self.calibration_ratio}")
        if int(self.polarizations_per_point) != self.polarizations_per_point or self.polarizations_per_point < 1:
            raise ValidationError("polarizations_per_point must be a positive integer")
        if not self.mu_star_grid:
            raise ValidationError("mu_star_grid must not be empty")
        if any(not (m >= 0 and math.isfinite(m)) for m in self.mu_star_grid):
            raise ValidationError("mu_star_grid entries must be finite and >= 0")

    def for_injected_k(self, k):
        """Copy whose reference powermeter reads low by ``q_factor / k``, so the
        cloning measurement should find ``mu_in / mu_in* = k``."""
        if not k > 0:
            raise ValidationError(f"k must be > 0, got {k}")
        return replace(self, powermeter=replace(self.powermeter, absolute_bias=self.q_factor / k - 1.0))

    @property
    def injected_k(self):
        return self.q_factor / (1.0 + self.powermeter.absolute_bias)

    # -- flat key/value representation ------------------------------------

    def to_mapping(self):
        return {
            "wavelength_nm": float(f"{self.ctx.wavelength * 1e9:.12g}"),
            "tau_c_ps": float(f"{self.ctx.coherence_time * 1e12:.12g}"),
            "gain_g0": self.gain_g0,
            "q_factor": self.q_factor,
            "saturation_mu": self.saturation_mu,
            "monitor_split": self.monitor_split,
            "calibration_ratio": self.calibration_ratio,
            "polarimeter.sigma_f": self.polarimeter.sigma_f,
            "polarimeter.bias_unpolarized": self.polarimeter.bias_unpolarized,
            "polarimeter.bias_polarized": self.polarimeter.bias_polarized,
            "powermeter.absolute_bias": self.powermeter.absolute_bias,
            "powermeter.repeat_sigma": self.powermeter.repeat_sigma,
            "polarizations_per_point": self.polarizations_per_point,
            "mu_star_grid": list(self.mu_star_grid),
        }

    @classmethod
    def from_mapping(cls, mapping):
        known = set(cls().to_mapping())
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown config key: {unknown[0]}")
        base = cls().to_mapping()
        base.update(mapping)
        try:
            return cls(
                ctx=RadiometricContext(float(base["wavelength_nm"]) * 1e-9, float(base["tau_c_ps"]) * 1e-12),
                gain_g0=float(base["gain_g0"]),
                q_factor=float(base["q_factor"]),
                saturation_mu=None if base["saturation_mu"] is None else float(base["saturation_mu"]),
                monitor_split=float(base["monitor_split"]),
                calibration_ratio=float(base["calibration_ratio"]),
                polarimeter=PolarimeterModel(
                    float(base["polarimeter.sigma_f"]),
                    float(base["polarimeter.bias_unpolarized"]),
                    float(base["polarimeter.bias_polarized"]),
                ),
                powermeter=PowermeterModel(
                    float(base["powermeter.absolute_bias"]),
                    float(base["powermeter.repeat_sigma"]),
                ),
                polarizations_per_point=int(base["polarizations_per_point"]),
                mu_star_grid=tuple(float(m) for m in base["mu_star_grid"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise ConfigError(str(exc)) from exc
            raise ConfigError(f"bad config value: {exc}") from exc


def _parse_value(key, text):
    text = text.strip()
    if key == "mu_star_grid":
        try:
            return [float(t) for t in text.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{key}: expected a list of numbers, got {text!r}") from None
    if key == "saturation_mu" and text.lower() in ("", "none", "off", "inf"):
        return None
    if key == "polarizations_per_point":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def parse_config_text(text):
    """Parse ``key = value`` lines (``#`` comments allowed) into a config."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        mapping[key] = _parse_value(key, value) if key in ExperimentConfig().to_mapping() else value
    return ExperimentConfig.from_mapping(mapping)


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def format_config(cfg):
    lines = []
    for key, value in cfg.to_mapping().items():
        if value is None:
            text = "none"
        elif isinstance(value, list):
            text = ", ".join(repr(float(v)) for v in value)
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# instrument models
# ---------------------------------------------------------------------------


def effective_gain(mu_in, cfg):
    """Small-signal gain reduced by ``1 + mu / saturation_mu`` when saturation is on."""
    mu = np.asarray(mu_in, dtype=float)
    if np.any(~(mu >= 0)):
        raise ValidationError("mu_in must be >= 0")
    if cfg.saturation_mu is None:
        return np.full_like(mu, cfg.gain_g0)[()]
    return 1.0 + (cfg.gain_g0 - 1.0) / (1.0 + mu / cfg.saturation_mu)


def polarimeter_reading(true_dop, cfg, noise=0.0):
    """Measured DOP for a true DOP.

    ``noise`` is a standard-normal draw scaled by ``sigma_f``. Returns
    ``(dop, clamped)``.
    """
    pol = cfg.polarimeter if isinstance(cfg, ExperimentConfig) else cfg
    d = np.asarray(true_dop, dtype=float)
    if np.any(~((d >= 0) & (d <= 1))):
        raise ValidationError(f"true DOP must lie in [0, 1], got {true_dop}")
    f = 0.5 * (1.0 + d) + pol.bias(d) + pol.sigma_f * np.asarray(noise, dtype=float)
    raw = 2.0 * f - 1.0
    dop = np.clip(raw, 0.0, 1.0)
    return dop[()], (raw != dop)[()]


def _random_stokes_direction(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementRecord:
    point_index: int
    polarization_index: int
    mu_in_star: float
    monitor_power: float
    dop_measured: float
    mu_out_star: float
    clamped: bool = False

    def row(self):
        return (
            self.point_index,
            self.polarization_index,
            self.mu_in_star,
            self.monitor_power,
            self.dop_measured,
            self.mu_out_star,
        )


@dataclass(frozen=True)
class MeasurementDataset:
    records: tuple
    config: "ExperimentConfig | None" = None
    seed: "int | None" = None

    def __len__(self):
        return len(self.records)

    @property
    def clamp_count(self):
        return sum(r.clamped for r in self.records)

    def column(self, name):
        attr = {"monitor_power_w": "monitor_power"}.get(name, name)
        return np.array([getattr(r, attr) for r in self.records])

    def fidelities(self):
        return 0.5 * (1.0 + self.column("dop_measured"))

    def summary(self):
        points = {r.point_index for r in self.records}
        return {"grid_points": len(points), "records": len(self.records), "clamped": self.clamp_count}

    def to_csv(self):
        buf = io.StringIO()
        if self.seed is not None:
            buf.write(f"# seed = {self.seed}\n")
        if self.config is not None:
            for line in format_config(self.config).splitlines():
                buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)
        for r in self.records:
            writer.writerow([r.point_index, r.polarization_index] + [repr(float(v)) for v in r.row()[2:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Parse dataset CSV; ``# key = value`` header lines restore config and seed."""
        meta, body = [], []
        for line in text.splitlines():
            (meta if line.startswith("#") else body).append(line)
        seed = None
        cfg_lines = []
        for line in meta:
            content = line[1:].strip()
            if content.startswith("seed ="):
                seed = int(content.split("=", 1)[1])
            elif "=" in content:
                cfg_lines.append(content)
        config = parse_config_text("\n".join(cfg_lines)) if cfg_lines else None
        reader = csv.DictReader(body)
        missing = [c for c in DATASET_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"dataset is missing column(s): {', '.join(missing)}")
        records = []
        for lineno, row in enumerate(reader, 2):
            try:
                records.append(
                    MeasurementRecord(
                        int(row["point_index"]),
                        int(row["polarization_index"]),
                        float(row["mu_in_star"]),
                        float(row["monitor_power_w"]),
                        float(row["dop_measured"]),
                        float(row["mu_out_star"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"dataset row {lineno}: {exc}") from None
        if not records:
            raise ValidationError("dataset has no records")
        return cls(tuple(records), config, seed)


def record_rng(seed, point_index, polarization_index):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(point_index), int(polarization_index)))
    return np.random.default_rng(ss)


def simulate_record(cfg, seed, point_index, polarization_index):
    """One bench reading at grid point ``point_index``."""
    rng = record_rng(seed, point_index, polarization_index)
    stokes_dir = _random_stokes_direction(rng)
    f_noise, monitor_noise, output_noise = rng.standard_normal(3)

    setpoint = cfg.mu_star_grid[point_index]
    mu_in = cfg.q_factor * setpoint
    g = float(effective_gain(mu_in, cfg))
    flux = core.polarization_split(mu_in, g)

    s0 = flux.total
    s_vec = (flux.mu_parallel - flux.mu_perp) * stokes_dir
    true_dop = min(float(np.linalg.norm(s_vec)) / s0, 1.0)
    dop, clamped = polarimeter_reading(true_dop, cfg.polarimeter, f_noise)

    pm = cfg.powermeter
    scale = 1.0 + pm.absolute_bias
    monitor_true = cfg.calibration_ratio * float(core.flux_to_power(setpoint, cfg.ctx))
    monitor_power = max(monitor_true * scale * (1.0 + pm.repeat_sigma * monitor_noise), 0.0)
    mu_star = float(core.power_to_flux(monitor_power / cfg.calibration_ratio, cfg.ctx))
    mu_out_star = max(s0 * scale * (1.0 + pm.repeat_sigma * output_noise), 0.0)
    return MeasurementRecord(
        point_index, polarization_index, mu_star, monitor_power, float(dop), mu_out_star, bool(clamped)
    )


def run_sweep(cfg, seed=DEFAULT_SEED):
    """Simulate every grid point under ``polarizations_per_point`` scrambler settings."""
    if not isinstance(cfg, ExperimentConfig):
        raise ValidationError("run_sweep needs an ExperimentConfig")
    records = tuple(
        simulate_record(cfg, seed, i, j)
        for i in range(len(cfg.mu_star_grid))
        for j in range(cfg.polarizations_per_point)
    )
    return MeasurementDataset(records, cfg, int(seed))
