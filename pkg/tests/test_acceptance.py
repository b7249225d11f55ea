"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import dataclasses
import math
import time
from fractions import Fraction

import numpy as np

from clonerad import analysis, core, fock, lossy, measurement
from clonerad.lossy import ElementChain, Field, GainLossElement, InversionProfile

BENCH_CTX = core.RadiometricContext(1559.8e-9, 19.71e-12)


def test_criterion_01_coherence_bandwidth(verdict):
    t0 = time.perf_counter()
    res = analysis.coherence_time(analysis.gaussian_trace(19.71e-12), 1559.8e-9)
    dt = time.perf_counter() - t0
    rel = res.delta_lambda_fwhm / 273.3e-12 - 1
    verdict(1, "coherence bandwidth", abs(rel) < 3e-3 and dt < 1.0,
            f"dlambda = {res.delta_lambda_fwhm * 1e12:.2f} pm (rel {rel:+.2e}, tol 3e-3), {dt:.3f} s")


def test_criterion_02_radiance_anchor(verdict):
    t0 = time.perf_counter()
    p = float(core.flux_to_power(1.0, BENCH_CTX))
    dt = time.perf_counter() - t0
    rel = p / 6.461e-9 - 1
    verdict(2, "radiance anchor", abs(rel) < 2e-3 and dt < 1.0,
            f"P(mu=1) = {p * 1e9:.4f} nW (rel {rel:+.2e}, tol 2e-3), {dt:.4f} s")


def test_criterion_03_error_budget(verdict):
    # one polarimeter reading per seed at mu_in = 2, nominal dF, no systematics
    t0 = time.perf_counter()
    cfg = measurement.ExperimentConfig(
        polarimeter=measurement.PolarimeterModel(0.005, 0.0, 0.0),
        mu_star_grid=(2.0,),
        polarizations_per_point=1,
    )
    n_seeds = 2000
    f = np.array([0.5 * (1 + measurement.simulate_record(cfg, s, 0, 0).dop_measured) for s in range(n_seeds)])
    power = core.flux_to_power(core.invert_fidelity(f, core.AmplifierParams(cfg.gain_g0)), cfg.ctx)
    rel_std = float(np.std(power, ddof=1) / np.mean(power))
    dt = time.perf_counter() - t0
    verdict(3, "error budget", abs(rel_std - 0.04) <= 0.005 and dt < 30.0,
            f"relative power std = {100 * rel_std:.2f} % over {n_seeds} seeds (target 4 +/- 0.5), {dt:.2f} s")


def test_criterion_04_k_recovery(verdict):
    t0 = time.perf_counter()
    k_true = 1.013
    base = measurement.ExperimentConfig(polarimeter=measurement.PolarimeterModel(0.005, 0.0, 0.0))
    cfg = base.for_injected_k(k_true)
    hits, sigmas, ks = 0, [], []
    n_seeds = 500
    for seed in range(n_seeds):
        ds = measurement.run_sweep(cfg, seed)
        gain = analysis.fit_gain(ds.column("mu_in_star"), ds.column("mu_out_star"))
        fit = analysis.fit_k(ds, gain)
        hits += abs(fit.k - k_true) <= 3 * fit.sigma_k
        sigmas.append(fit.sigma_k)
        ks.append(fit.k)
    dt = time.perf_counter() - t0
    coverage = hits / n_seeds
    med = float(np.median(sigmas))
    verdict(4, "k recovery", coverage >= 0.99 and med <= 0.01 and dt < 60.0,
            f"within 3 sigma in {100 * coverage:.1f} % of {n_seeds} seeds, median sigma_k = {med:.4f}, "
            f"mean k = {np.mean(ks):.4f}, {dt:.1f} s")


def test_criterion_05_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    cfg = fock.TruncationConfig(dim_per_mode=48, evolution_substeps=400)
    worst = 0.0
    for mu in (0, 1, 2):
        for g in (1.2, 1.5, 2.0):
            flux = fock.simulate_cloner(mu, g, cfg)
            ref = core.polarization_split(mu, g)
            f_ref = float(core.fidelity_from_flux(mu, core.amplified_flux(mu, g)))
            worst = max(worst, abs(flux.mu_parallel - ref.mu_parallel), abs(flux.mu_perp - ref.mu_perp),
                        abs(flux.fidelity() - f_ref))
    dt = time.perf_counter() - t0
    verdict(5, "oracle equivalence", worst <= 1e-6 and dt < 60.0,
            f"max |oracle - analytic| = {worst:.2e} over 9 cases at dim 48 (tol 1e-6), {dt:.1f} s")


def _sequential_output(chain, mu):
    for el in chain:
        mu = el.value * mu + 2.0 * (el.value - 1.0) if el.kind == "gain" else el.value * mu
    return mu


def test_criterion_06_commutation(verdict):
    worst_cond = 0.0
    for g in np.geomspace(1.0, 1e4, 100):
        for eta in np.linspace(0.0, 1.0, 100):
            gp, ep = lossy.commute_loss_left(g, eta)
            # residual relative to the largest term of each condition (G' for the last one)
            for lhs, rhs, scale in (
                (g * eta, gp * ep, max(1.0, g * eta)),
                (eta * (g - 1), gp - 1, max(1.0, gp)),
                (1 - eta, gp * (1 - ep), max(1.0, gp)),
            ):
                worst_cond = max(worst_cond, abs(lhs - rhs) / scale)

    rng = np.random.default_rng(2024)
    worst_chain = 0.0
    for _ in range(1000):
        chain = ElementChain(
            GainLossElement.gain(rng.uniform(1, 3)) if rng.random() < 0.5 else GainLossElement.loss(rng.uniform(0.2, 1))
            for _ in range(rng.integers(1, 25))
        )
        model = lossy.canonicalize_chain(chain)
        for mu in (0.0, 1.0, 7.5):
            seq = _sequential_output(chain, mu)
            eq = model.gain * model.q * mu + 2.0 * (model.gain - 1.0)
            worst_chain = max(worst_chain, abs(seq - eq) / max(1.0, abs(seq)))
    verdict(6, "commutation", worst_cond <= 1e-12 and worst_chain <= 1e-9,
            f"three-condition residual {worst_cond:.1e} on 100x100 grid (tol 1e-12), "
            f"chain vs sequential {worst_chain:.1e} on 1000 chains (tol 1e-9)")


def _random_smooth_profile(rng):
    length = rng.uniform(0.5, 3.0)
    a, b, w, phi = rng.uniform(0.3, 2.0), rng.uniform(-0.5, 0.5), rng.uniform(0.5, 4.0), rng.uniform(0, 2 * math.pi)
    c, d, v, psi = rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.9), rng.uniform(0.5, 4.0), rng.uniform(0, 2 * math.pi)
    chi = Field(
        lambda z: a + b * np.sin(w * z + phi),
        lambda z: a * z - b / w * (math.cos(w * z + phi) - math.cos(phi)),
        "chi",
    )
    lam = Field(
        lambda z: c * (1 + d * np.cos(v * z + psi)),
        lambda z: c * (z + d / v * (math.sin(v * z + psi) - math.sin(psi))),
        "lam",
    )
    return InversionProfile(chi, lam, length)


def test_criterion_07_ode_vs_closed_form(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(20):
        prof = _random_smooth_profile(rng)
        g, eta = lossy.integrate_profile_final(prof, steps=10_000)
        g_ref, eta_ref = lossy.closed_form_solution(prof)
        worst = max(worst, abs(g / g_ref - 1), abs(eta / eta_ref - 1))
    dt = time.perf_counter() - t0
    verdict(7, "ODE vs closed form", worst <= 1e-6 and dt < 10.0,
            f"max relative deviation {worst:.1e} over 20 profiles at 1e4 steps (tol 1e-6), {dt:.2f} s")


def test_criterion_08_profile_ordering(verdict):
    alphas = np.linspace(0.0, 0.5, 50)
    rows = lossy.profile_loss_sweep(lossy.FAMILIES, alphas, target_total_gain=50.0)
    failed = [r for r in rows if r.error]
    by_alpha = {}
    for r in rows:
        by_alpha.setdefault(r.alpha, {})[r.family] = r
    ordered = all(
        v["chi1"].eta_total >= v["chi2"].eta_total >= v["chi3"].eta_total for v in by_alpha.values()
    )
    gain_err = max(abs(r.g_total / 50.0 - 1) for r in rows) if not failed else math.inf
    verdict(8, "profile ordering", not failed and ordered and gain_err <= 1e-6,
            f"chi1 >= chi2 >= chi3 at all {len(by_alpha)} alphas: {ordered}, "
            f"calibration failures {len(failed)}, max |G/50 - 1| = {gain_err:.1e}")


def test_criterion_09_fidelity_table(verdict):
    cases = [((1, 2), Fraction(5, 6)), ((1, 67), Fraction(135, 201))] + [((n, n), Fraction(1)) for n in (1, 2, 5, 100)]
    bad = [(nm, core.fidelity_from_counts(*nm)) for nm, expected in cases if core.fidelity_from_counts(*nm) != expected]
    verdict(9, "fidelity table", not bad,
            "F(1->2) = 5/6, F(N->N) = 1, F(1->67) = 135/201 exact" if not bad else f"mismatches: {bad}")


def test_criterion_10_round_trip(verdict):
    # the stated domain is G in (1, 1e4]; gains approach 1 from above down to G - 1 = 1e-9
    mu = np.linspace(0.0, 100.0, 201)
    gains = np.concatenate([1.0 + np.geomspace(1e-9, 1.0, 37), np.geomspace(2.0, 1e4, 40)])
    errs = []
    for g in gains:
        params = core.AmplifierParams(float(g))
        back = core.invert_fidelity(core.fidelity_from_flux(mu, core.amplified_flux(mu, params)), params)
        errs.append(float(np.max(np.abs(back - mu) / np.maximum(np.abs(mu), 1.0))))
    errs = np.array(errs)
    worst = float(errs.max())
    bad = gains[errs > 1e-10]
    detail = f"max relative error {worst:.1e} over mu in [0, 100], G - 1 in [1e-9, 1e4) (tol 1e-10)"
    if bad.size:
        # binary64 intermediates carry mu only through mu_out - mu_in and 1 - F, both of order G - 1
        detail += f"; fails for G - 1 <= {bad.max() - 1:.1e}, passes for G - 1 >= {gains[errs <= 1e-10].min() - 1:.1e}"
    verdict(10, "round trip", worst <= 1e-10, detail)
