"""The buyer's problem against two sequential sellers.

The buyer visits one seller first, buys an allocation x there, and visits
the other seller only if the first lottery fails. For a fixed first-stage
choice the continuation is worth U2 = max(0, best utility at the second
seller), so the first-stage problem is an ordinary demand query at the
effective value v - U2. Both orders are evaluated in closed form and the
better one is kept.

Ties are broken by, in order: larger expected allocation from Bob, larger
expected allocation from Alice, then visiting Bob first. Within an order
the largest demand maximizer is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import ConsistencyError, UnavailableAllocationError
from .menus import ENVELOPE_TOL, Menu, PricingMenu, SingleLottery, as_menu

TIE_TOL = 1e-12
CONSISTENCY_SLACK = 1e-9

Stage = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


class Order(str, Enum):
    BOB_FIRST = "bob-first"
    ALICE_FIRST = "alice-first"


class Region(str, Enum):
    V_BA = "V_BA"
    V_AB = "V_AB"


@dataclass(frozen=True)
class BuyerChoice:
    order: Order
    x_first: float
    x_second: float
    utility: float
    pay_alice: float
    pay_bob: float
    alloc_alice: float
    alloc_bob: float

    @property
    def x_bob(self) -> float:
        """Allocation picked from Bob's menu (whether or not Bob is reached)."""
        return self.x_first if self.order is Order.BOB_FIRST else self.x_second

    @property
    def x_alice(self) -> float:
        return self.x_first if self.order is Order.ALICE_FIRST else self.x_second

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["order"] = self.order.value
        return out


@dataclass(frozen=True)
class Plans:
    """Vectorized buyer choices, one lane per value."""

    alice_first: np.ndarray
    x_first: np.ndarray
    x_second: np.ndarray
    utility: np.ndarray
    pay_alice: np.ndarray
    pay_bob: np.ndarray
    alloc_alice: np.ndarray
    alloc_bob: np.ndarray

    @property
    def x_bob(self) -> np.ndarray:
        return np.where(self.alice_first, self.x_second, self.x_first)

    @property
    def x_alice(self) -> np.ndarray:
        return np.where(self.alice_first, self.x_first, self.x_second)

    def choice(self, i: int = 0) -> BuyerChoice:
        return BuyerChoice(
            order=Order.ALICE_FIRST if bool(self.alice_first.flat[i]) else Order.BOB_FIRST,
            x_first=float(self.x_first.flat[i]),
            x_second=float(self.x_second.flat[i]),
            utility=float(self.utility.flat[i]),
            pay_alice=float(self.pay_alice.flat[i]),
            pay_bob=float(self.pay_bob.flat[i]),
            alloc_alice=float(self.alloc_alice.flat[i]),
            alloc_bob=float(self.alloc_bob.flat[i]),
        )


def menu_stage(menu: PricingMenu) -> Stage:
    """Demand query returning (allocation, price) arrays."""

    def stage(w):
        idx = menu.demand_index(w)
        return menu.xs[idx], menu.prices[idx]

    return stage


def lottery_stage(z, p) -> Stage:
    """Demand query for single lotteries; z and p may be arrays (one lottery per lane)."""
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)

    def stage(w):
        buy = w + 1e-12 >= p
        return np.where(buy, z, 0.0), np.where(buy, z * p, 0.0)

    return stage


def plan(v, alice: Stage, bob: Stage) -> Plans:
    """Best plans for every lane of v given demand queries for both sellers."""
    v = np.asarray(v, dtype=float)

    # Alice first, Bob as fallback
    xb2, cb2 = bob(v)
    ub = np.maximum(xb2 * v - cb2, 0.0)
    xa1, ca1 = alice(v - ub)
    util_ab = xa1 * v - ca1 + (1.0 - xa1) * (xb2 * v - cb2)

    # Bob first, Alice as fallback
    xa2, ca2 = alice(v)
    ua = np.maximum(xa2 * v - ca2, 0.0)
    xb1, cb1 = bob(v - ua)
    util_ba = xb1 * v - cb1 + (1.0 - xb1) * (xa2 * v - ca2)

    bob_ab, bob_ba = (1.0 - xa1) * xb2, xb1
    alice_ab, alice_ba = xa1, (1.0 - xb1) * xa2

    tol = TIE_TOL * np.maximum(1.0, np.abs(v))
    gap = util_ab - util_ba
    tie = np.abs(gap) <= tol
    bob_gap = bob_ab - bob_ba
    alice_gap = alice_ab - alice_ba
    alice_first = (gap > tol) | (
        tie & ((bob_gap > TIE_TOL) | ((np.abs(bob_gap) <= TIE_TOL) & (alice_gap > TIE_TOL)))
    )

    af = alice_first
    return Plans(
        alice_first=af,
        x_first=np.where(af, xa1, xb1),
        x_second=np.where(af, xb2, xa2),
        utility=np.where(af, util_ab, util_ba),
        pay_alice=np.where(af, ca1, (1.0 - xb1) * ca2),
        pay_bob=np.where(af, (1.0 - xa1) * cb2, cb1),
        alloc_alice=np.where(af, alice_ab, alice_ba),
        alloc_bob=np.where(af, bob_ab, bob_ba),
    )


def respond(alice: Menu, bob: Menu, v) -> Plans:
    """Vectorized best response over an array of values."""
    return plan(v, menu_stage(as_menu(alice)), menu_stage(as_menu(bob)))


def best_response(alice: Menu, bob: Menu, v: float) -> BuyerChoice:
    return respond(alice, bob, np.array([float(v)])).choice(0)


def _bob_price(bob: PricingMenu, x: float) -> float:
    if x < -ENVELOPE_TOL or x > bob.x_bar + ENVELOPE_TOL:
        raise UnavailableAllocationError(f"allocation {x} is not offered by Bob (x_bar = {bob.x_bar})")
    return bob.price(x)


def utility_bob_first(alice: SingleLottery, bob: Menu, x: float, v: float) -> float:
    """Utility of buying x from Bob first, then Alice's lottery if worthwhile."""
    bob = as_menu(bob)
    return x * v - _bob_price(bob, x) + (1.0 - x) * max(0.0, alice.z * v - alice.a)


def utility_alice_first(alice: SingleLottery, bob: Menu, x: float, v: float) -> float:
    """Utility of buying Alice's lottery first, then x from Bob on failure."""
    bob = as_menu(bob)
    return alice.z * v - alice.a + (1.0 - alice.z) * (x * v - _bob_price(bob, x))


def region_of(choice: BuyerChoice) -> Region:
    return Region.V_AB if choice.order is Order.ALICE_FIRST else Region.V_BA


def classify(alice: SingleLottery, bob: Menu, v: float, check: bool = True) -> Region:
    """Which seller a buyer of value v visits first.

    With ``check`` set, the bang-per-buck price paid to Bob is cross-checked:
    at most min(p, v) for Bob-first types that buy, and strictly between p
    and v for Alice-first types.
    """
    bob = as_menu(bob)
    choice = best_response(alice, bob, v)
    region = region_of(choice)
    if not check:
        return region
    xb = choice.x_bob
    if xb > 0:
        bpb = bob.price(xb) / xb
        if region is Region.V_BA and bpb > min(alice.p, v) + CONSISTENCY_SLACK:
            raise ConsistencyError(f"Bob-first type {v} pays bang-per-buck {bpb} > min(p, v)")
        if region is Region.V_AB and not (alice.p - CONSISTENCY_SLACK < bpb < v + CONSISTENCY_SLACK):
            raise ConsistencyError(f"Alice-first type {v} pays bang-per-buck {bpb} outside (p, v)")
    elif region is Region.V_AB:
        raise ConsistencyError(f"Alice-first type {v} buys nothing from Bob")
    return region


def ab_start(alice: SingleLottery, bob: Menu, v_max: float) -> float:
    """Smallest type that visits Alice first (inf if none up to v_max).

    Bisection relies on the Alice-first set being upward closed; the
    returned point is the last Bob-first probe, so it is itself Bob-first.
    """
    bob = as_menu(bob)
    if classify(alice, bob, v_max, check=False) is Region.V_BA:
        return math.inf
    lo, hi = alice.p, float(v_max)
    tol = 1e-9 * max(1.0, float(v_max))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(alice, bob, mid, check=False) is Region.V_AB:
            hi = mid
        else:
            lo = mid
    return lo
