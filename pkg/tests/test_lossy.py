import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clonerad import lossy
from clonerad.errors import NonRearrangeableError, ValidationError
from clonerad.lossy import ElementChain, GainLossElement, InversionProfile

# -- oracle: per-element moment maps applied in order ------------------------


def sequential_output(chain, mu):
    """Mean photons (both polarizations) after the chain, element by element."""
    for el in chain:
        mu = el.value * mu + 2.0 * (el.value - 1.0) if el.kind == "gain" else el.value * mu
    return mu


def equivalent_output(model, mu):
    return model.gain * model.q * mu + 2.0 * (model.gain - 1.0)


def random_chain(rng, max_len=20):
    n = rng.integers(1, max_len + 1)
    return ElementChain(
        GainLossElement.gain(rng.uniform(1, 2)) if rng.random() < 0.5 else GainLossElement.loss(rng.uniform(0.5, 1))
        for _ in range(n)
    )


def conditions_residual(g, eta):
    gp, ep = lossy.commute_loss_left(g, eta)
    return max(abs(g * eta - gp * ep), abs(eta * (g - 1) - (gp - 1)), abs((1 - eta) - gp * (1 - ep)))


# -- commutation ---------------------------------------------------------------


@pytest.mark.parametrize("g", [1.0, 1.7, 40.0])
def test_commute_without_loss(g):
    assert lossy.commute_loss_left(g, 1.0) == (g, 1.0)


@pytest.mark.parametrize("eta", [0.0, 0.3, 1.0])
def test_commute_without_gain(eta):
    assert lossy.commute_loss_left(1.0, eta) == (1.0, eta)


def test_commute_example():
    gp, ep = lossy.commute_loss_left(2.0, 0.5)
    assert gp == pytest.approx(1.5, rel=1e-15)
    assert ep == pytest.approx(2 / 3, rel=1e-15)
    assert 2 * 0.5 == pytest.approx(gp * ep, rel=1e-15)
    assert conditions_residual(2.0, 0.5) < 1e-15


def test_commute_full_block():
    assert lossy.commute_loss_left(5.0, 0.0) == (1.0, 0.0)


@settings(max_examples=500)
@given(st.floats(1, 1e3), st.floats(0, 1))
def test_commute_conditions_and_physicality(g, eta):
    gp, ep = lossy.commute_loss_left(g, eta)
    assert gp >= 1
    assert 0 <= ep <= 1
    assert conditions_residual(g, eta) <= 1e-12 * max(1.0, g)


@settings(max_examples=300)
@given(st.floats(1, 100), st.floats(0.001, 1))
def test_commute_round_trip(g, eta):
    gp, ep = lossy.commute_loss_left(g, eta)
    g2, eta2 = lossy.commute_gain_left(gp, ep)
    assert g2 == pytest.approx(g, rel=1e-9)
    assert eta2 == pytest.approx(eta, rel=1e-9, abs=1e-12)


def test_commute_gain_left_examples():
    g, eta = lossy.commute_gain_left(1.5, 2 / 3)
    assert g == pytest.approx(2.0, rel=1e-14)
    assert eta == pytest.approx(0.5, rel=1e-14)
    assert lossy.commute_gain_left(1.0, 0.4) == (1.0, pytest.approx(0.4))
    with pytest.raises(NonRearrangeableError, match="negative transmission"):
        lossy.commute_gain_left(3.0, 0.5)


@pytest.mark.parametrize("args", [(0.5, 0.5), (2.0, 1.5), (2.0, -0.1)])
def test_commute_rejects_unphysical(args):
    with pytest.raises(ValidationError):
        lossy.commute_loss_left(*args)


# -- chains --------------------------------------------------------------------


def test_chain_validation():
    with pytest.raises(ValidationError):
        ElementChain([])
    with pytest.raises(ValidationError):
        GainLossElement("gain", 0.5)
    with pytest.raises(ValidationError):
        GainLossElement("loss", 1.5)
    with pytest.raises(ValidationError):
        GainLossElement("mirror", 1.0)
    chain = ElementChain([GainLossElement.gain(2), GainLossElement.loss(0.5), GainLossElement.gain(3)])
    assert chain.total_gain == 6
    assert chain.total_transmission == 0.5


def test_canonical_pure_gain():
    model = lossy.canonicalize_chain([GainLossElement.gain(7.0)])
    assert (model.q, model.gain) == (1.0, 7.0)


def test_canonical_loss_first():
    model = lossy.canonicalize_chain([GainLossElement.loss(0.8), GainLossElement.gain(5.0)])
    assert model.q == 0.8
    assert model.gain == 5.0
    assert model.trace == ((1.0, 0.8),)


def test_canonical_late_small_loss():
    eps = 1e-3
    model = lossy.canonicalize_chain([GainLossElement.gain(10.0), GainLossElement.loss(1 - eps)])
    assert model.q == pytest.approx(1 - eps / 10, rel=1e-6)
    assert model.trace[0][0] == 10.0


def test_canonical_matches_sequential_moments():
    rng = np.random.default_rng(7)
    for _ in range(200):
        chain = random_chain(rng)
        model = lossy.canonicalize_chain(chain)
        for mu in rng.uniform(0, 10, 4):
            assert equivalent_output(model, mu) == pytest.approx(sequential_output(chain, mu), rel=1e-9)
        # added noise is the response to vacuum
        assert 2 * model.added_noise == pytest.approx(sequential_output(chain, 0.0), rel=1e-9, abs=1e-12)


def test_trace_records_accumulated_gain():
    chain = [GainLossElement.gain(2.0), GainLossElement.gain(3.0), GainLossElement.loss(0.9), GainLossElement.gain(1.5), GainLossElement.loss(0.8)]
    model = lossy.canonicalize_chain(chain)
    g_after_first = 0.9 * (6.0 - 1) + 1
    assert model.trace[0][0] == 6.0
    assert model.trace[1][0] == pytest.approx(g_after_first * 1.5)
    q_expected = math.prod(g0 * eta / (g0 * eta + 1 - eta) for (g0, _), eta in zip(model.trace, (0.9, 0.8)))
    assert model.q == pytest.approx(q_expected, rel=1e-14)


@settings(max_examples=200)
@given(st.lists(st.floats(1.01, 2.0), min_size=2, max_size=12), st.floats(0.5, 0.999), st.data())
def test_early_loss_dominance(gains, eta, data):
    i = data.draw(st.integers(0, len(gains) - 1))
    j = data.draw(st.integers(i + 1, len(gains)))

    def q_with_loss_at(pos):
        els = [GainLossElement.gain(g) for g in gains]
        els.insert(pos, GainLossElement.loss(eta))
        return lossy.canonicalize_chain(els).q

    assert q_with_loss_at(j) > q_with_loss_at(i)


# -- continuous profiles ---------------------------------------------------------


def test_lossless_profile():
    c, L = 1.3, 2.0
    traj = lossy.integrate_profile(InversionProfile.constant(c, 0.0, L), steps=2000)
    np.testing.assert_allclose(traj.gain, np.exp(c * traj.z), rtol=1e-10)
    np.testing.assert_array_equal(traj.eta, 1.0)
    assert lossy.closed_form_solution(InversionProfile.constant(c, 0.0, L)) == pytest.approx((math.exp(c * L), 1.0), rel=1e-12)


def test_pure_loss_profile():
    c, L = 0.4, 3.0
    traj = lossy.integrate_profile(InversionProfile.constant(0.0, c, L), steps=2000)
    np.testing.assert_allclose(traj.gain, 1.0, atol=1e-13)
    np.testing.assert_allclose(traj.eta, np.exp(-c * traj.z), rtol=1e-10)
    g, eta = lossy.closed_form_solution(InversionProfile.constant(0.0, c, L), 1.5)
    assert g == pytest.approx(1.0, rel=1e-12)
    assert eta == pytest.approx(math.exp(-c * 1.5), rel=1e-12)


def test_constant_profile_analytic():
    # chi, lam constant: G = E + lam/(chi-lam) (E - 1), eta = E / G with E = exp((chi-lam) L)
    chi, lam, L = 2.1, 0.3, 2.0
    e = math.exp((chi - lam) * L)
    g_exact = e + lam / (chi - lam) * (e - 1)
    prof = InversionProfile.constant(chi, lam, L)
    assert lossy.closed_form_solution(prof) == pytest.approx((g_exact, e / g_exact), rel=1e-12)
    assert lossy.integrate_profile_final(prof, 10_000) == pytest.approx((g_exact, e / g_exact), rel=1e-10)


def test_trajectory_invariants():
    prof = InversionProfile.family("chi1", 0.3, 2.0, lambda0=0.2, scale=2.5)
    traj = lossy.integrate_profile(prof, 1000)
    assert traj.gain[0] == 1.0 and traj.eta[0] == 1.0
    assert np.all(np.diff(traj.eta) <= 0)
    assert np.all(traj.gain >= 1)
    model = traj.equivalent()
    assert (model.gain, model.q) == traj.final


def test_gain_eta_product_is_one_pass_transmission():
    prof = InversionProfile.family("chi3", 0.2, 2.0, lambda0=0.25, scale=2.0)
    g, eta = lossy.closed_form_solution(prof)
    net = prof.chi.integral(2.0) - prof.lam.integral(2.0)
    assert g * eta == pytest.approx(math.exp(net), rel=1e-12)


def test_family_antiderivatives_match_quadrature():
    from scipy import integrate

    for fam in lossy.FAMILIES:
        f = lossy.FamilyField(fam, 0.37, 2.0, scale=1.7)
        for z in (0.3, 1.1, 2.0):
            ref, _ = integrate.quad(lambda t: float(f(t)), 0, z, epsabs=0, epsrel=1e-13)
            assert f.integral(z) == pytest.approx(ref, rel=1e-12)


def test_families_coincide_at_zero_alpha():
    z = np.linspace(0, 2, 11)
    vals = [lossy.FamilyField(f, 0.0, 2.0)(z) for f in lossy.FAMILIES]
    for v in vals:
        np.testing.assert_array_equal(v, 1.0)


def test_integrate_rejects_bad_input():
    prof = InversionProfile.constant(1.0, 0.1, 1.0)
    with pytest.raises(ValidationError):
        lossy.integrate_profile(prof, steps=1)
    bad = InversionProfile(lossy.Field(lambda z: np.where(z > 0.5, np.nan, 1.0)), lossy.ConstantField(0.0), 1.0)
    with pytest.raises(lossy.IntegrationError) as info:
        lossy.integrate_profile(bad, 100)
    assert info.value.z == pytest.approx(0.5, abs=0.01)


def test_collapse_reported_with_location():
    prof = InversionProfile.constant(-400.0, 0.0, 1.0)
    with pytest.raises(lossy.IntegrationError) as info:
        lossy.integrate_profile(prof, 20)
    assert info.value.z is not None


def test_profile_validation():
    with pytest.raises(ValidationError):
        InversionProfile.constant(1.0, -0.1, 1.0)
    with pytest.raises(ValidationError):
        InversionProfile.constant(1.0, 0.1, 0.0)
    with pytest.raises(ValidationError):
        lossy.closed_form_solution(InversionProfile.constant(1.0, 0.1, 1.0), 1.5)
    with pytest.raises(ValidationError):
        InversionProfile.family("chi4", 0.1)


def test_generic_callable_field_uses_quadrature():
    chi = lossy.Field(lambda z: 1.5 + 0.3 * np.sin(z))
    lam = lossy.Field(lambda z: 0.2 + 0.1 * np.cos(z) ** 2)
    prof = InversionProfile(chi, lam, 2.0)
    ode = lossy.integrate_profile_final(prof, 10_000)
    cf = lossy.closed_form_solution(prof)
    assert ode == pytest.approx(cf, rel=1e-9)


def test_tabulated_profile(tmp_path):
    z = np.linspace(0, 2, 41)
    chi = 2.0 - 0.5 * z
    lam = 0.1 + 0.05 * z
    path = tmp_path / "profile.csv"
    path.write_text("z_m,chi_per_m,lambda_per_m\n" + "".join(f"{a},{b},{c}\n" for a, b, c in zip(z.tolist(), chi.tolist(), lam.tolist())))
    prof = InversionProfile.from_csv(path)
    assert prof.is_tabulated and prof.length == 2.0
    # linear data: the interpolant equals an analytic linear profile
    analytic = InversionProfile(
        lossy.Field(lambda t: 2.0 - 0.5 * t, lambda t: 2.0 * t - 0.25 * t * t),
        lossy.Field(lambda t: 0.1 + 0.05 * t, lambda t: 0.1 * t + 0.025 * t * t),
        2.0,
    )
    ref = lossy.closed_form_solution(analytic)
    assert lossy.closed_form_solution(prof) == pytest.approx(ref, rel=1e-6)
    assert lossy.integrate_profile_final(prof, 10_000) == pytest.approx(ref, rel=1e-9)
    assert prof.chi.integral(1.3) == pytest.approx(2.0 * 1.3 - 0.25 * 1.3**2, rel=1e-13)


def test_tabulated_csv_missing_column(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("z_m,chi_per_m\n0,1\n1,1\n")
    with pytest.raises(ValidationError, match="lambda_per_m"):
        InversionProfile.from_csv(path)


# -- sweeps ----------------------------------------------------------------------


def test_default_loss_density_gives_target_eta():
    lam0 = lossy.default_loss_density(2.0, 50.0, 0.9)
    scale, g, eta = lossy.calibrate_chi_scale(InversionProfile.family("chi2", 0.0, 2.0, lam0), 50.0)
    assert g == pytest.approx(50.0, rel=1e-6)
    assert eta == pytest.approx(0.9, rel=1e-6)


def test_sweep_zero_alpha_converges():
    rows = lossy.profile_loss_sweep(lossy.FAMILIES, [0.0], 50.0)
    etas = [r.eta_total for r in rows]
    assert etas[0] == etas[1] == etas[2]


def test_sweep_lossless_gives_unit_eta():
    rows = lossy.profile_loss_sweep(lossy.FAMILIES, [0.0, 0.2, 0.45], 50.0, lambda0=0.0)
    for r in rows:
        assert r.eta_total == 1.0
        assert r.g_total == pytest.approx(50.0, rel=1e-6)


def test_sweep_ordering_small_grid():
    alphas = [0.05, 0.2, 0.35, 0.5]
    rows = lossy.profile_loss_sweep(lossy.FAMILIES, alphas, 50.0)
    by = {(r.alpha, r.family): r for r in rows}
    for a in alphas:
        assert by[a, "chi1"].eta_total > by[a, "chi2"].eta_total > by[a, "chi3"].eta_total


def test_sweep_reports_calibration_failure():
    rows = lossy.profile_loss_sweep("chi1", [1.5], 50.0)
    assert rows[0].error is not None
    assert math.isnan(rows[0].eta_total)


def test_calibrate_rejects_target():
    with pytest.raises(ValidationError):
        lossy.calibrate_chi_scale(InversionProfile.family("chi2", 0.0), 0.5)
