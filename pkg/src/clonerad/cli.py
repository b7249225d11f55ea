"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import analysis, core, fock, lossy, measurement
from .errors import CloneradError, NumericalError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        _atomic_write(out, text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _to_json(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=False, default=_json_default) + "\n"


def _rows_to_csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(row[c])) if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def _rows_out(columns, rows, fmt, out):
    if fmt == "json":
        _emit(_to_json([{c: r[c] for c in columns} for r in rows]), out)
    else:
        _emit(_rows_to_csv(columns, rows), out)


def _float_list(text):
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b,c' or 'start:stop:count', got {text!r}") from None


def _ctx_from_args(args, fallback=None):
    base = fallback or core.RadiometricContext()
    wavelength = args.wavelength if args.wavelength is not None else base.wavelength
    tau_c = args.tau_c if args.tau_c is not None else base.coherence_time
    return core.RadiometricContext(wavelength, tau_c)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    cfg = measurement.load_config(args.config) if args.config else measurement.ExperimentConfig()
    ds = measurement.run_sweep(cfg, args.seed)
    if args.format == "json":
        rows = [dict(zip(measurement.DATASET_COLUMNS, r.row())) for r in ds.records]
        _emit(_to_json(rows), args.out)
    else:
        _emit(ds.to_csv(), args.out)
    s = ds.summary()
    print(f"grid points: {s['grid_points']}  records: {s['records']}  clamped: {s['clamped']}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args):
    with open(args.dataset) as fh:
        ds = measurement.MeasurementDataset.from_csv(fh.read())
    ctx = _ctx_from_args(args, ds.config.ctx if ds.config is not None else None)
    gain = analysis.fit_gain(ds.column("mu_in_star"), ds.column("mu_out_star"), threshold=args.threshold)
    kfit = analysis.fit_k(ds, gain)
    report = analysis.absolute_power_report(ds, ctx, gain, kfit, sigma_f=args.sigma_f, sigma_tau_c=args.sigma_tau_c)
    if args.format == "csv":
        _rows_out(analysis.POINT_COLUMNS, report["points"], "csv", args.out)
    else:
        _emit(_to_json(report), args.out)
    if args.points_out:
        _rows_out(analysis.POINT_COLUMNS, report["points"], "csv", args.points_out)
    print(f"G = {gain.gain:.6g}  mu0 = {gain.intercept_mu0:.6g}  k = {kfit.k:.6g} +/- {kfit.sigma_k:.2g}", file=sys.stderr)
    return EXIT_OK


def cmd_invert(args):
    ctx = _ctx_from_args(args)
    if not 0 <= args.fidelity <= 1:
        raise ValidationError(f"fidelity must lie in [0, 1], got {args.fidelity}")
    mu = float(core.invert_fidelity(args.fidelity, args.gain))
    power = float(core.flux_to_power(mu, ctx))
    row = {
        "fidelity": args.fidelity,
        "gain": args.gain if args.gain is not None else math.inf,
        "mu_in": mu,
        "power_w": power,
        "power_nw": power * 1e9,
    }
    _rows_out(tuple(row), [row], args.format, args.out)
    return EXIT_OK


def cmd_coherence(args):
    trace = analysis.AutocorrelationTrace.from_csv(args.trace)
    wavelength = args.wavelength if args.wavelength is not None else core.DEFAULT_WAVELENGTH
    res = analysis.coherence_time(trace, wavelength)
    row = {
        "tau_c_s": res.tau_c,
        "tau_c_ps": res.tau_c * 1e12,
        "delta_nu_hz": res.delta_nu_fwhm,
        "delta_lambda_m": res.delta_lambda_fwhm,
        "delta_lambda_pm": res.delta_lambda_fwhm * 1e12,
        "wavelength_m": res.wavelength,
        "gaussian_assumed": res.gaussian_assumed,
    }
    _rows_out(tuple(row), [row], args.format, args.out)
    return EXIT_OK


SWEEP_COLUMNS = ("alpha", "family", "eta_total", "g_total", "calibration_scale")


def cmd_lossy_profile(args):
    if args.profile_csv:
        profile = lossy.InversionProfile.from_csv(args.profile_csv)
        if args.target_gain is not None:
            scale, g, eta = lossy.calibrate_chi_scale(profile, args.target_gain, steps=args.steps)
        else:
            scale = 1.0
            g, eta = lossy.integrate_profile_final(profile, args.steps)
        rows = [{"alpha": math.nan, "family": "table", "eta_total": eta, "g_total": g, "calibration_scale": scale}]
        _rows_out(SWEEP_COLUMNS, rows, args.format, args.out)
        return EXIT_OK

    target = args.target_gain if args.target_gain is not None else 50.0
    families = args.family or list(lossy.FAMILIES)
    sweep = lossy.profile_loss_sweep(
        families, args.alpha_grid, target, length=args.length, lambda0=args.lambda0, steps=args.steps
    )
    _rows_out(SWEEP_COLUMNS, [r.as_dict() for r in sweep], args.format, args.out)
    failures = [r for r in sweep if r.error]
    for r in failures:
        print(f"calibration failed at alpha={r.alpha:g} ({r.family}): {r.error}", file=sys.stderr)
    return EXIT_NUMERICAL if failures else EXIT_OK


ORACLE_COLUMNS = ("mu_in", "gain", "mu_parallel", "mu_perp", "f_oracle", "f_analytic")


def cmd_oracle_check(args):
    cfg = fock.TruncationConfig(args.dim, args.substeps)
    rows, worst = [], 0.0
    for mu in args.mu:
        if mu != int(mu):
            raise ValidationError(f"oracle inputs are Fock levels, got {mu}")
        for g in args.gain:
            flux = fock.simulate_cloner(int(mu), g, cfg)
            analytic = core.polarization_split(int(mu), g)
            f_analytic = float(core.fidelity_from_flux(mu, core.amplified_flux(mu, g)))
            rows.append(
                {
                    "mu_in": int(mu),
                    "gain": g,
                    "mu_parallel": flux.mu_parallel,
                    "mu_perp": flux.mu_perp,
                    "f_oracle": flux.fidelity(),
                    "f_analytic": f_analytic,
                }
            )
            worst = max(
                worst,
                abs(flux.mu_parallel - analytic.mu_parallel),
                abs(flux.mu_perp - analytic.mu_perp),
                abs(flux.fidelity() - f_analytic),
            )
    _rows_out(ORACLE_COLUMNS, rows, args.format, args.out)
    print(f"max deviation oracle vs analytic: {worst:.3g}", file=sys.stderr)
    if worst > args.tolerance:
        print(f"deviation exceeds tolerance {args.tolerance:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="clonerad", description="Quantum-cloning absolute radiometry toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format="csv"):
        p.add_argument("--out", "-o", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)

    def context(p):
        p.add_argument("--tau-c", type=float, help="coherence time in seconds (default 19.71e-12)")
        p.add_argument("--wavelength", type=float, help="wavelength in meters (default 1559.8e-9)")

    p = sub.add_parser("simulate", help="simulate a measurement sweep")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, default=measurement.DEFAULT_SEED)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit gain and k, report absolute power")
    p.add_argument("dataset")
    p.add_argument("--threshold", type=float, default=1.0, help="gain fit uses mu* below this")
    p.add_argument("--sigma-f", type=float, help="nominal fidelity uncertainty (default: spread of repeats)")
    p.add_argument("--sigma-tau-c", type=float, default=0.0, help="coherence-time uncertainty in seconds")
    p.add_argument("--points-out", help="also write the per-point CSV here")
    context(p)
    common(p, "json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("invert", help="single-shot power from a fidelity")
    p.add_argument("--fidelity", type=float, required=True)
    p.add_argument("--gain", type=float, help="amplifier gain (default: large-gain limit)")
    context(p)
    common(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("coherence", help="coherence time from a delay_ps,visibility trace")
    p.add_argument("trace")
    p.add_argument("--wavelength", type=float, help="wavelength in meters (default 1559.8e-9)")
    common(p)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("lossy-profile", help="equivalent loss for inversion profiles")
    p.add_argument("--family", action="append", choices=lossy.FAMILIES, help="repeatable; default all")
    p.add_argument("--alpha-grid", type=_float_list, default=_float_list("0:0.5:50"), help="'a,b,c' or 'start:stop:count'")
    p.add_argument("--target-gain", type=float)
    p.add_argument("--length", type=float, default=2.0, help="medium length in meters")
    p.add_argument("--lambda0", type=float, help="loss density in 1/m (default: eta = 0.9 for a flat profile)")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--profile-csv", help="tabulated z_m,chi_per_m,lambda_per_m profile instead of a family")
    common(p)
    p.set_defaults(func=cmd_lossy_profile)

    p = sub.add_parser("oracle-check", help="Fock-space oracle versus closed-form cloner")
    p.add_argument("--mu", type=_float_list, default=[0, 1, 2])
    p.add_argument("--gain", type=_float_list, default=[1.2, 1.5, 2.0])
    p.add_argument("--dim", type=int, default=fock.TruncationConfig.dim_per_mode)
    p.add_argument("--substeps", type=int, default=fock.TruncationConfig.evolution_substeps)
    p.add_argument("--tolerance", type=float, default=1e-6)
    common(p)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CloneradError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
