import itertools
import math

import numpy as np
import pytest

from duopoly import buyer
from duopoly.buyer import Order, Region, ab_start, best_response, classify, respond
from duopoly.errors import UnavailableAllocationError
from duopoly.menus import SingleLottery, fixed_price, give_away, properize

A = SingleLottery(0.5, 0.5)


def brute_choice(alice, bob, v):
    """Enumerate every plan on the breakpoints of both menus."""
    am, bm = alice.menu if isinstance(alice, SingleLottery) else alice, bob
    best = None
    for order in ("bob", "alice"):
        first, second = (bm, am) if order == "bob" else (am, bm)
        for (x1, c1), (x2, c2) in itertools.product(first.breakpoints, second.breakpoints):
            u = x1 * v - c1 + (1 - x1) * (x2 * v - c2)
            if order == "bob":
                ab, aa, pb, pa = x1, (1 - x1) * x2, c1, (1 - x1) * c2
            else:
                aa, ab, pa, pb = x1, (1 - x1) * x2, c1, (1 - x1) * c2
            key = (u, ab, aa, order == "bob")
            if best is None or _better(key, best[0]):
                best = (key, pa, pb)
    (u, ab, aa, _), pa, pb = best
    return u, ab, aa, pa, pb


def _better(key, other):
    tol = 1e-12
    if abs(key[0] - other[0]) > tol * max(1.0, abs(key[0])):
        return key[0] > other[0]
    for k, o in zip(key[1:], other[1:]):
        if abs(k - o) > tol:
            return k > o
    return False


def random_menu(rng, k=4, scale=2.0):
    xs = rng.uniform(0, 1, k)
    cs = rng.uniform(0, scale, k) * xs
    return properize(zip(xs, cs))


def test_utility_bob_first_examples():
    assert buyer.utility_bob_first(A, fixed_price(0.8), 0.0, 0.6) == pytest.approx(0.05)
    assert buyer.utility_bob_first(A, fixed_price(0.8), 1.0, 1.0) == pytest.approx(0.2)
    assert buyer.utility_bob_first(A, fixed_price(0.3), 1.0, 0.4) == pytest.approx(0.1)


def test_utility_alice_first_examples():
    assert buyer.utility_alice_first(A, fixed_price(0.8), 1.0, 1.0) == pytest.approx(0.35)
    assert buyer.utility_alice_first(A, fixed_price(0.8), 0.0, 1.0) == pytest.approx(0.25)
    assert buyer.utility_alice_first(SingleLottery(1.0, 0.4), fixed_price(0.9), 0.0, 0.4) == pytest.approx(0.0)


def test_utilities_reject_unoffered_allocation():
    short = SingleLottery(0.5, 0.5)
    with pytest.raises(UnavailableAllocationError):
        buyer.utility_bob_first(A, short, 0.7, 1.0)
    with pytest.raises(UnavailableAllocationError):
        buyer.utility_alice_first(A, short, 0.7, 1.0)


def test_best_response_alice_first_example():
    c = best_response(A, fixed_price(0.8), 1.0)
    assert c.order is Order.ALICE_FIRST
    assert (c.x_first, c.x_second) == (0.5, 1.0)
    assert c.utility == pytest.approx(0.35)
    assert c.pay_alice == pytest.approx(0.25)
    assert c.pay_bob == pytest.approx(0.4)
    assert brute_choice(A, fixed_price(0.8), 1.0)[0] == pytest.approx(0.35)


def test_best_response_tie_goes_bob_first():
    c = best_response(A, fixed_price(0.8), 0.6)
    assert c.order is Order.BOB_FIRST
    assert (c.x_first, c.x_second) == (0.0, 0.5)
    assert c.utility == pytest.approx(0.05)


def test_best_response_give_away_alice():
    # both orders give utility 1 with no allocation from Bob, so the order tie-break picks Bob first
    c = best_response(give_away(), fixed_price(0.5), 1.0)
    assert c.order is Order.BOB_FIRST
    assert (c.x_first, c.x_second) == (0.0, 1.0)
    assert c.utility == pytest.approx(1.0)
    assert c.pay_alice == 0.0 and c.pay_bob == 0.0
    assert c.alloc_alice == 1.0


def test_best_response_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(300):
        alice = SingleLottery(float(rng.uniform(0.05, 1.0)), float(rng.uniform(0, 1)))
        bob = random_menu(rng)
        v = float(rng.uniform(0, 2))
        c = best_response(alice, bob, v)
        u, ab, aa, pa, pb = brute_choice(alice, bob, v)
        assert c.utility == pytest.approx(u, abs=1e-12)
        assert c.alloc_bob == pytest.approx(ab, abs=1e-12)
        assert c.alloc_alice == pytest.approx(aa, abs=1e-12)
        assert c.pay_alice == pytest.approx(pa, abs=1e-12)
        assert c.pay_bob == pytest.approx(pb, abs=1e-12)


def test_best_response_general_menus_match_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(200):
        alice, bob = random_menu(rng), random_menu(rng)
        v = float(rng.uniform(0, 2))
        c = best_response(alice, bob, v)
        u, ab, aa, _, _ = brute_choice(alice, bob, v)
        assert c.utility == pytest.approx(u, abs=1e-12)
        assert c.alloc_bob == pytest.approx(ab, abs=1e-12)


def test_choice_accounting():
    rng = np.random.default_rng(13)
    for _ in range(100):
        alice, bob = random_menu(rng), random_menu(rng)
        v = float(rng.uniform(0, 2))
        c = best_response(alice, bob, v)
        value = (c.alloc_alice + c.alloc_bob) * v
        assert c.utility == pytest.approx(value - c.pay_alice - c.pay_bob, abs=1e-12)
        if c.order is Order.ALICE_FIRST:
            assert c.alloc_bob == pytest.approx((1 - c.x_first) * c.x_second, abs=1e-15)
        else:
            assert c.alloc_alice == pytest.approx((1 - c.x_first) * c.x_second, abs=1e-15)


def test_respond_is_vectorized():
    vs = np.linspace(0, 1.5, 7)
    pl = respond(A, fixed_price(0.8), vs)
    for i, v in enumerate(vs):
        assert pl.choice(i) == best_response(A, fixed_price(0.8), v)


def test_classify_examples():
    assert classify(A, fixed_price(0.8), 1.0) is Region.V_AB
    assert classify(A, fixed_price(0.8), 0.6) is Region.V_BA
    assert classify(A, fixed_price(0.3), 0.2) is Region.V_BA


def test_ab_start_examples():
    assert ab_start(A, fixed_price(0.8), 1.0) == pytest.approx(0.8, abs=1e-9)
    assert ab_start(A, fixed_price(0.4), 1.0) == math.inf
    assert ab_start(A, give_away(), 1.0) == math.inf


def test_ab_start_is_bob_first_and_not_below_price():
    rng = np.random.default_rng(17)
    for _ in range(100):
        alice = SingleLottery(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0, 1)))
        bob = random_menu(rng)
        s = ab_start(alice, bob, 2.0)
        if math.isfinite(s):
            assert s >= alice.p
            assert classify(alice, bob, s) is Region.V_BA
            assert classify(alice, bob, s + 1e-8) is Region.V_AB
