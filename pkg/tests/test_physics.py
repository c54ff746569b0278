import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from conftest import make_plan
from qotml import physics
from qotml.linkmodel import Link, Payload, Span

Q100, Q200 = Payload.QPSK_100G, Payload.QPSK_200G

# Frozen oracle values. The closed forms were evaluated in mpmath at 25 digits;
# the integrals with scipy.integrate.dblquad (epsrel 1e-9..1e-10) over the band
# triples, independently of the Gauss-Legendre tiling used by eta_numerical.
SCI_CLOSED_35 = 220.857204433763498926574
SCI_CLOSED_69 = 99.93799452719949078280125
GN_INTEGRAL_35 = 214.23265053717597
GN_INTEGRAL_69 = 102.02386447814429
GN_INTEGRAL_PAIR_50GHZ = 300.8604024880346  # 35 GBd CUT + one 35 GBd neighbour at +50 GHz


def db(x):
    return 10 * math.log10(x)


def test_span_derived_values():
    d = physics.span_derived(Span(80.0, 0.2))
    assert d.a == pytest.approx(0.0460517018598809, rel=1e-13)
    assert d.L_eff == pytest.approx(21.16927488697646, rel=1e-12)
    assert d.L_eff_a == pytest.approx(21.71472409516259, rel=1e-12)
    assert d.beta2_abs == pytest.approx(21.29998493156640, rel=1e-12)
    assert 0 < d.L_eff <= 80.0 and d.L_eff <= d.L_eff_a


def test_lossless_limit():
    d = physics.span_derived(Span(80.0, 1e-9))
    assert d.L_eff == pytest.approx(80.0, rel=1e-7)
    assert physics.span_derived(Span(80.0, 0.0)).L_eff == 80.0


@given(st.floats(10, 120), st.floats(0.19, 0.275))
def test_span_derived_invariants(length, alpha):
    d = physics.span_derived(Span(length, alpha))
    assert 0 < d.L_eff <= length
    assert d.L_eff <= d.L_eff_a
    assert d.beta2_abs > 0


def test_linear_noise_value(span80_link):
    cut = make_plan([(Q100, 193.5, 0.0)]).cut
    sigma2 = physics.linear_noise(span80_link, cut, 5.0)
    assert sigma2 == pytest.approx(5.50752795039519e-7, rel=1e-12)
    assert physics.w_to_dbm(sigma2) == pytest.approx(-32.5904329015148, abs=1e-10)


def test_linear_noise_additive_and_vanishing():
    cut = make_plan([(Q100, 193.5, 0.0)]).cut
    one = physics.linear_noise(Link.homogeneous(1, 80.0, 0.2), cut)
    assert physics.linear_noise(Link.homogeneous(10, 80.0, 0.2), cut) == pytest.approx(10 * one, rel=1e-15)
    tiny = physics.linear_noise(Link.homogeneous(1, 1e-9, 0.2), cut)
    # G - 1 ~ alpha L ln10/10 for L -> 0
    assert tiny / one == pytest.approx(0.2e-9 * math.log(10) / 10 / (10 ** 1.6 - 1), rel=1e-6)


def test_sci_closed_form_matches_oracle(span80_link, single35_plan):
    assert physics.eta_closed_form(span80_link, single35_plan) == pytest.approx(SCI_CLOSED_35, rel=1e-12)
    plan69 = make_plan([(Q200, 193.5, 0.0)])
    assert physics.eta_closed_form(span80_link, plan69) == pytest.approx(SCI_CLOSED_69, rel=1e-12)


def test_numerical_matches_independent_integral(span80_link, single35_plan):
    assert physics.eta_numerical(span80_link, single35_plan) == pytest.approx(GN_INTEGRAL_35, rel=1e-9)
    plan69 = make_plan([(Q200, 193.5, 0.0)])
    assert physics.eta_numerical(span80_link, plan69) == pytest.approx(GN_INTEGRAL_69, rel=1e-9)
    pair = make_plan([(Q100, 193.5, 0.0), (Q100, 193.55, 0.0)])
    assert physics.eta_numerical(span80_link, pair, 256) == pytest.approx(GN_INTEGRAL_PAIR_50GHZ, rel=1e-6)


def test_numerical_convergence(span80_link, single35_plan):
    lo = physics.eta_numerical(span80_link, single35_plan, 64)
    hi = physics.eta_numerical(span80_link, single35_plan, 128)
    assert abs(db(lo) - db(hi)) < 0.05


def test_numerical_rejects_coarse_grid(span80_link, single35_plan):
    with pytest.raises(ValueError):
        physics.eta_numerical(span80_link, single35_plan, 63)


def test_numerical_dark_neighbours_equal_sci(span80_link, single35_plan):
    # a neighbour at -inf dBm carries zero PSD
    dark = make_plan([(Q100, 193.5, 0.0), (Q100, 193.55, -math.inf), (Q100, 193.45, -math.inf)])
    assert physics.eta_numerical(span80_link, dark) == physics.eta_numerical(span80_link, single35_plan)


@pytest.mark.parametrize("fn", [physics.eta_closed_form, physics.eta_numerical])
def test_span_additivity_exact(fn, comb5_plan):
    one = fn(Link.homogeneous(1, 80.0, 0.2), comb5_plan)
    assert fn(Link.homogeneous(3, 80.0, 0.2), comb5_plan) == 3 * one
    assert fn(Link.homogeneous(10, 80.0, 0.2), comb5_plan) == pytest.approx(10 * one, rel=1e-15)


def test_single_channel_is_sci_only(span80_link, single35_plan):
    assert physics.xci_weight(single35_plan) == 0.0


def test_overlapping_xci_uses_edge_separation(span80_link):
    # 69 GBd neighbour 37.5 GHz away overlaps the CUT spectrum; must stay finite
    plan = make_plan([(Q200, 193.5, 0.0), (Q200, 193.575, 0.0)])
    eta = physics.eta_closed_form(span80_link, plan)
    assert math.isfinite(eta) and eta > SCI_CLOSED_69


def _random_comb(draw_powers, n_left, n_right, gap):
    specs = [(Q100, 193.5, draw_powers[0])]
    for k in range(1, n_left + 1):
        specs.append((Q100, 193.5 - k * gap, draw_powers[k]))
    for k in range(1, n_right + 1):
        specs.append((Q100, 193.5 + k * gap, draw_powers[n_left + k]))
    return make_plan(specs)


powers = st.lists(st.floats(-6, 2.5), min_size=7, max_size=7)


@given(powers, st.integers(0, 3), st.integers(0, 3), st.floats(-20, 20))
def test_power_scaling_invariance(p, nl, nr, shift_db):
    link = Link.homogeneous(2, 80.0, 0.2)
    a = physics.eta_closed_form(link, _random_comb(p, nl, nr, 0.05))
    b = physics.eta_closed_form(link, _random_comb([x + shift_db for x in p], nl, nr, 0.05))
    assert b == pytest.approx(a, rel=1e-9)


@given(powers, st.integers(1, 3), st.floats(0.1, 3.0))
def test_monotone_in_neighbour_power(p, nr, bump_db):
    link = Link.homogeneous(1, 80.0, 0.2)
    base = physics.eta_closed_form(link, _random_comb(p, 0, nr, 0.05))
    q = list(p)
    q[1] += bump_db
    assert physics.eta_closed_form(link, _random_comb(q, 0, nr, 0.05)) >= base


@given(st.floats(0.05, 1.0), st.floats(0.0, 1.0))
def test_monotone_in_separation(gap_thz, extra_thz):
    link = Link.homogeneous(1, 80.0, 0.2)
    near = make_plan([(Q100, 193.5, 0.0), (Q100, 193.5 + gap_thz, 0.0)])
    far = make_plan([(Q100, 193.5, 0.0), (Q100, 193.5 + gap_thz + extra_thz, 0.0)])
    assert physics.eta_closed_form(link, far) <= physics.eta_closed_form(link, near)


def test_combine_snr_examples():
    assert physics.combine_snr(0.0, 1e-5, 0.0) == pytest.approx(20.0, abs=1e-12)
    assert physics.combine_snr(0.0, 5e-5, 5e4) == pytest.approx(10.0, abs=1e-12)
    base = physics.combine_snr(1.3, 2e-5, 3e4)
    assert physics.combine_snr(1.3, 2e-5, 3e4, 2.2) == pytest.approx(base - 2.2, abs=1e-12)
    with pytest.raises(ValueError):
        physics.combine_snr(0.0, 0.0, 0.0)


@given(st.floats(-10, 5), st.floats(1e-7, 1e-3), st.floats(1e1, 1e5), st.floats(1.0001, 2.0))
def test_combine_snr_decreasing_in_noise(p, sigma2, eta, k):
    s = physics.combine_snr(p, sigma2, eta)
    assert physics.combine_snr(p, sigma2 * k, eta) < s
    assert physics.combine_snr(p, sigma2, eta * k) < s


def test_penalties(span80_link):
    assert physics.penalties_for(make_plan([(Q100, 193.5, 0.0), (Q200, 193.6, 0.0)])) == 0.0
    assert physics.penalties_for(make_plan([(Q200, 193.5, 0.0)])) == 2.0
    assert physics.penalties_for(make_plan([(Q200, 193.5, 0.0), (Q200, 193.575, 0.0)])) == pytest.approx(2.2)
    assert physics.penalties_for(make_plan([(Q200, 193.5, 0.0), (Q200, 193.6, 0.0)])) == 2.0


def test_optimal_power_examples():
    assert physics.optimal_power(5e-5, 2.5e4) == pytest.approx(0.0, abs=1e-12)
    assert physics.optimal_power(8 * 5e-5, 2.5e4) == pytest.approx(10 * math.log10(2), abs=1e-12)
    with pytest.raises(ValueError):
        physics.optimal_power(0.0, 1.0)


@given(st.floats(1e-7, 1e-3), st.floats(1e1, 1e5))
def test_optimal_power_grid_scan(sigma2, eta):
    p_opt = physics.optimal_power(sigma2, eta)
    best = physics.combine_snr(p_opt, sigma2, eta)
    grid = p_opt + np.arange(-300, 301) * 0.01
    assert np.all(physics.combine_snr(grid, sigma2, eta) <= best + 1e-9 * abs(best))


def test_noise_budget(span80_link, comb5_plan):
    nb = physics.noise_budget(span80_link, comb5_plan)
    assert nb.sigma2 > 0 and nb.eta > 0 and nb.penalties_db == 0.0
