import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from duopoly import buyer
from duopoly.competition import aux_distribution, rev_fixed_price, revenues
from duopoly.distributions import exponential, gamma, gamma_inverse, monopoly_revenue, myerson_price, uniform
from duopoly.menus import SingleLottery, demand, fixed_price, lower_convex_envelope, properize

unit = st.floats(0.0, 1.0, allow_nan=False)
price = st.floats(0.0, 2.0, allow_nan=False)
points = st.lists(st.tuples(st.floats(1e-3, 1.0), price), min_size=1, max_size=6)
lotteries = st.builds(SingleLottery, st.floats(0.05, 0.95), st.floats(0.0, 1.0))
priors = st.sampled_from([uniform(), exponential()])


@st.composite
def bob_menus(draw):
    raw = draw(points)
    return properize([(x, c * x) for x, c in raw])


@given(points, price, price)
def test_demand_is_monotone(raw, w1, w2):
    m = properize(raw)
    lo, hi = sorted((w1, w2))
    assert demand(m, lo) <= demand(m, hi)


@given(points)
def test_envelope_is_below_and_tight_on_proper_menus(raw):
    m = properize(raw)
    env = lower_convex_envelope(m)
    xs = np.linspace(0.0, m.x_bar, 101)
    assert np.all(env.price_array(xs) <= m.price_array(xs) + 1e-12)
    assert env == m


@given(points, price)
def test_demand_beats_every_grid_allocation(raw, w):
    m = properize(raw)
    x = demand(m, w)
    xs = np.linspace(0.0, m.x_bar, 501)
    assert np.all(xs * w - m.price_array(xs) <= x * w - m.price(x) + 1e-12)


@given(points)
def test_properize_is_idempotent(raw):
    m = properize(raw)
    assert properize(m.breakpoints) == m


@given(priors, st.floats(0.0, 1.0))
def test_gamma_inverse_is_left_inverse(d, frac):
    y = frac * monopoly_revenue(d)
    v = gamma_inverse(d, y)
    assert abs(gamma(d, v) - y) <= 1e-8
    assert v <= myerson_price(d) + 1e-12


@given(priors, st.floats(0.0, 1.0))
def test_myerson_price_is_maximal(d, frac):
    v = frac * d.support_max
    assert gamma(d, myerson_price(d)) >= gamma(d, v) - 1e-9


@settings(max_examples=200)
@given(lotteries, bob_menus(), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_buyer_structure(alice, bob, v1, v2):
    lo, hi = sorted((v1, v2))
    c_lo, c_hi = buyer.best_response(alice, bob, lo), buyer.best_response(alice, bob, hi)
    assert c_lo.x_bob <= c_hi.x_bob + 1e-9
    if c_lo.order is buyer.Order.ALICE_FIRST:
        assert c_hi.order is buyer.Order.ALICE_FIRST
    if c_lo.x_bob > 0:
        assert bob.price(c_lo.x_bob) / c_lo.x_bob <= bob.price(c_hi.x_bob) / c_hi.x_bob + 1e-9


@settings(max_examples=200)
@given(lotteries, bob_menus(), st.floats(0.0, 2.0), st.lists(st.tuples(st.booleans(), unit, unit), max_size=20))
def test_no_alternative_plan_beats_best_response(alice, bob, v, plans):
    c = buyer.best_response(alice, bob, v)
    for bob_first, x1, x2 in plans:
        first, second = (bob, alice.menu) if bob_first else (alice.menu, bob)
        x1, x2 = x1 * first.x_bar, x2 * second.x_bar
        u = x1 * v - first.price(x1) + (1 - x1) * (x2 * v - second.price(x2))
        assert u <= c.utility + 1e-9


@settings(max_examples=100)
@given(lotteries, bob_menus())
def test_threshold_type_prefers_bob_first(alice, bob):
    s = buyer.ab_start(alice, bob, 2.0)
    assume(math.isfinite(s))
    assert buyer.classify(alice, bob, s) is buyer.Region.V_BA


@settings(max_examples=60)
@given(priors, lotteries, st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_aux_curve_ignores_threshold_above_it(d, alice, a, b, t):
    top = d.support_max
    s_lo, s_hi = sorted((alice.p + a * (top - alice.p), alice.p + b * (top - alice.p)))
    v = s_hi + t * (top - s_hi)
    g_hi = aux_distribution(d, alice, s_hi).gamma(v)
    g_lo = aux_distribution(d, alice, s_lo).gamma(v)
    assert abs(g_hi - g_lo) <= 1e-12


@settings(max_examples=60)
@given(priors, lotteries, st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_aux_curve_grows_with_threshold_below_price(d, alice, a, b, t):
    top = d.support_max
    s_lo, s_hi = sorted((alice.p + a * (top - alice.p), alice.p + b * (top - alice.p)))
    v = t * alice.p
    assert aux_distribution(d, alice, s_lo).gamma(v) <= aux_distribution(d, alice, s_hi).gamma(v) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([uniform(grid_size=20_001), exponential(grid_size=20_001)]), lotteries, st.floats(0.0, 1.0))
def test_posted_price_closed_form_matches_integration(d, alice, frac):
    q = frac * min(d.support_max, 4.0)
    assert abs(rev_fixed_price(alice, q, d) - revenues(alice, fixed_price(q), d).rev_bob) <= 1e-5
