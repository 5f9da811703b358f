import math

import numpy as np
import pytest
from scipy import integrate

from duopoly import buyer
from duopoly.competition import (
    aux_distribution,
    bob_revenue_against_lottery,
    check_oneseller,
    monopolist_revenue,
    rev_fixed_price,
    revenues,
)
from duopoly.distributions import discrete, exponential, point_mass, uniform
from duopoly.errors import InvalidParameterError, InvalidThresholdError
from duopoly.menus import PricingMenu, SingleLottery, fixed_price, give_away, properize

A = SingleLottery(0.5, 0.5)


def riemann_revenues(alice, bob, dist, n=400_001):
    """Midpoint rule over a fine grid of buyer values."""
    edges = np.linspace(0.0, dist.support_max, n)
    mids = 0.5 * (edges[1:] + edges[:-1])
    mass = np.diff(dist.cdf(edges))
    pl = buyer.respond(alice, bob, mids)
    return float(pl.pay_alice @ mass), float(pl.pay_bob @ mass)


def random_menu(rng, k=4, scale=2.0):
    xs = rng.uniform(0, 1, k)
    return properize(zip(xs, rng.uniform(0, scale, k) * xs))


def test_revenues_point_mass_example():
    out = revenues(A, fixed_price(1.0), point_mass(1.0))
    assert out.rev_alice == 0.25
    assert out.rev_bob == 0.5


def test_revenues_uniform_example():
    # closed forms: Alice collects Gamma(p) / 2 = 1/16 and Bob (1 - z) Gamma(1/2) = 1/8
    p = (1 - math.sqrt(0.5)) / 2
    assert p * (1 - p) == pytest.approx(0.125, abs=1e-15)
    out = revenues(SingleLottery(0.5, p), fixed_price(0.5), uniform())
    assert out.rev_alice == pytest.approx(0.0625, abs=1e-6)
    assert out.rev_bob == pytest.approx(0.125, abs=1e-6)
    out = revenues(SingleLottery(0.5, 0.146447), fixed_price(0.5), uniform())
    assert out.rev_alice == pytest.approx(0.0625, abs=1e-6)
    assert out.rev_bob == pytest.approx(0.125, abs=1e-6)


def test_revenues_give_away():
    for d in (uniform(), point_mass(1.0)):
        for bob in (fixed_price(0.3), give_away(), SingleLottery(0.4, 0.1)):
            out = revenues(give_away(), bob, d)
            assert out.rev_alice == 0.0 and out.rev_bob == 0.0


def test_revenues_against_midpoint_rule():
    rng = np.random.default_rng(21)
    for d in (uniform(), exponential()):
        for _ in range(3):
            alice, bob = random_menu(rng), random_menu(rng)
            out = revenues(alice, bob, d)
            ra, rb = riemann_revenues(alice, bob, d)
            assert out.rev_alice == pytest.approx(ra, abs=2e-5)
            assert out.rev_bob == pytest.approx(rb, abs=2e-5)


def test_revenues_discrete_sum():
    d = discrete([(0.4, 0.25), (0.9, 0.75)])
    out = revenues(A, fixed_price(0.8), d)
    lo = buyer.best_response(A, fixed_price(0.8), 0.4)
    hi = buyer.best_response(A, fixed_price(0.8), 0.9)
    assert out.rev_alice == pytest.approx(0.25 * lo.pay_alice + 0.75 * hi.pay_alice, abs=1e-15)
    assert out.rev_bob == pytest.approx(0.25 * lo.pay_bob + 0.75 * hi.pay_bob, abs=1e-15)


def test_revenue_trace():
    out = revenues(A, fixed_price(0.8), uniform().with_grid(11), trace=True)
    assert len(out.trace) == 11
    v, choice = out.trace[-1]
    assert v == 1.0 and choice.order is buyer.Order.ALICE_FIRST


def test_rev_fixed_price_examples():
    u = uniform()
    assert rev_fixed_price(A, 0.3, u) == pytest.approx(0.21)
    assert rev_fixed_price(A, 0.7, u) == pytest.approx(0.105)
    assert rev_fixed_price(A, 0.5, u) == pytest.approx(0.25)
    for q, expected in ((0.3, 0.21), (0.7, 0.105), (0.5, 0.25)):
        assert revenues(A, fixed_price(q), u).rev_bob == pytest.approx(expected, abs=1e-6)


def test_monopolist_revenue_fixed_price():
    assert monopolist_revenue(fixed_price(0.5), uniform()) == pytest.approx(0.25, abs=1e-12)
    assert monopolist_revenue(fixed_price(1.0), exponential()) == pytest.approx(math.exp(-1), abs=1e-10)


def test_aux_cdf_examples():
    aux = aux_distribution(uniform(), A, 0.8)
    assert aux.cdf(0.5) == pytest.approx(0.6)
    assert aux.cdf(0.6) == pytest.approx(0.8)
    assert aux.gamma(0.9) == pytest.approx(0.045)
    assert aux.atom_at_zero == pytest.approx(0.1)


def test_aux_total_mass_and_dead_zone():
    for d in (uniform(), exponential()):
        aux = aux_distribution(d, SingleLottery(0.4, 0.3), 0.9)
        lo, hi = aux.dead_zone
        assert lo == pytest.approx(0.12 + 0.6 * 0.9)
        assert hi == 0.9
        zs = np.linspace(lo, hi, 50)[1:-1]
        assert np.all(aux.pdf(zs) == 0.0)
        kinks = [0.3, lo, hi]
        mass, _ = integrate.quad(lambda v: float(aux.pdf(v)), 0.0, d.support_max, points=kinks, limit=400)
        assert aux.atom_at_zero + mass == pytest.approx(1.0, abs=1e-8)


def test_aux_gamma_above_threshold():
    d = exponential()
    aux = aux_distribution(d, SingleLottery(0.4, 0.3), 0.9)
    v = np.linspace(0.9, 5, 30)
    np.testing.assert_allclose(aux.gamma(v), 0.6 * v * (1 - d.cdf(v)), atol=1e-12)


def test_aux_errors():
    with pytest.raises(InvalidThresholdError):
        aux_distribution(uniform(), A, 0.3)
    with pytest.raises(InvalidParameterError):
        aux_distribution(uniform(), SingleLottery(1.0, 0.5), 0.8)


def test_aux_infinite_threshold():
    aux = aux_distribution(uniform(), A, math.inf)
    assert aux.s > 1.0
    assert aux.atom_at_zero == 0.0


def test_check_oneseller_examples():
    chk = check_oneseller(A, fixed_price(0.8), uniform())
    assert chk.lhs == pytest.approx(0.08, abs=1e-6)
    assert abs(chk.gap) <= 1e-6
    assert chk.allocation_mismatches == 0
    chk = check_oneseller(A, fixed_price(0.3), uniform())
    assert math.isinf(chk.threshold)
    assert chk.lhs == pytest.approx(0.21, abs=1e-6)
    assert chk.rhs == pytest.approx(0.21, abs=1e-6)


def test_check_oneseller_random_menu_exponential():
    rng = np.random.default_rng(4)
    bob = random_menu(rng, k=4)
    lhs, rhs, gap = check_oneseller(A, bob, exponential())
    assert abs(gap) <= 1e-5


def test_fast_bob_revenue_matches_direct():
    rng = np.random.default_rng(8)
    for d in (uniform(), exponential()):
        for _ in range(5):
            alice = SingleLottery(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0, 1)))
            bob = random_menu(rng)
            assert bob_revenue_against_lottery(alice, bob, d) == pytest.approx(
                revenues(alice, bob, d).rev_bob, abs=1e-8)
