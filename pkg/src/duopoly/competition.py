"""Expected revenues of a menu pair, and the auxiliary-distribution reduction.

Payments as a function of the buyer's value are step functions: they only
change where the buyer switches order or demand index. Continuous priors
are therefore integrated exactly on the value grid, after locating every
switch inside a grid cell by bisection and charging each side of the
switch its own probability mass through the CDF. Discrete priors use
exact sums over atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import buyer
from .buyer import BuyerChoice, Plans
from .distributions import ValueDistribution, gamma
from .errors import InvalidParameterError, InvalidThresholdError, UnsupportedDistributionError
from .menus import Menu, PricingMenu, SingleLottery, as_menu

_SWITCH_BISECTION_STEPS = 48

StateFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def integrate_steps(dist: ValueDistribution, state_fn: StateFn) -> np.ndarray:
    """Expectation of step-function quantities under a prior.

    ``state_fn(v)`` returns ``(keys, values)``: keys is a (k, n) array that
    identifies the discrete state of each lane and values a (m, n) array of
    the quantities to average. Quantities must be constant while keys are.
    """
    if dist.is_discrete:
        _, vals = state_fn(dist.atom_values)
        return vals @ dist.atom_probs
    g = dist.grid()
    keys, vals = state_fn(g)
    cdf = dist.cdf(g)
    mass = np.diff(cdf)
    total = vals[:, :-1] @ mass
    cells = np.nonzero(np.any(keys[:, 1:] != keys[:, :-1], axis=0))[0]
    if cells.size:
        lo, hi = g[cells].copy(), g[cells + 1].copy()
        left_keys = keys[:, cells]
        for _ in range(_SWITCH_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            mid_keys, _ = state_fn(mid)
            same = np.all(mid_keys == left_keys, axis=0)
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        cut = dist.cdf(0.5 * (lo + hi))
        right_mass = cdf[cells + 1] - cut
        total += (vals[:, cells + 1] - vals[:, cells]) @ right_mass
    return total


@dataclass(frozen=True)
class CompetitionOutcome:
    rev_alice: float
    rev_bob: float
    alloc_alice: float
    alloc_bob: float
    trace: Optional[tuple[tuple[float, BuyerChoice], ...]] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("rev_alice", "rev_bob", "alloc_alice", "alloc_bob")}


def _plan_state(alice: PricingMenu, bob: PricingMenu) -> StateFn:
    a_stage, b_stage = buyer.menu_stage(alice), buyer.menu_stage(bob)

    def state(v):
        pl = buyer.plan(v, a_stage, b_stage)
        keys = np.vstack([pl.alice_first.astype(float), pl.x_first, pl.x_second])
        vals = np.vstack([pl.pay_alice, pl.pay_bob, pl.alloc_alice, pl.alloc_bob])
        return keys, vals

    return state


def revenues(alice: Menu, bob: Menu, dist: ValueDistribution, trace: bool = False) -> CompetitionOutcome:
    """Expected payments and allocations of both sellers."""
    alice, bob = as_menu(alice), as_menu(bob)
    pay_a, pay_b, alloc_a, alloc_b = integrate_steps(dist, _plan_state(alice, bob))
    records = None
    if trace:
        pts = dist.atom_values if dist.is_discrete else dist.grid()
        pl = buyer.respond(alice, bob, pts)
        records = tuple((float(v), pl.choice(i)) for i, v in enumerate(pts))
    return CompetitionOutcome(
        rev_alice=max(float(pay_a), 0.0),
        rev_bob=max(float(pay_b), 0.0),
        alloc_alice=max(float(alloc_a), 0.0),
        alloc_bob=max(float(alloc_b), 0.0),
        trace=records,
    )


def monopolist_revenue(menu: Menu, dist: ValueDistribution) -> float:
    """Revenue of a lone seller: E[M(z_M(v))]."""
    menu = as_menu(menu)

    def state(v):
        idx = menu.demand_index(v)
        return idx[None, :].astype(float), menu.prices[idx][None, :]

    return float(integrate_steps(dist, state)[0])


def rev_fixed_price(alice: SingleLottery, q: float, dist: ValueDistribution) -> float:
    """Bob's revenue from posting q against Alice's lottery, in closed form."""
    g = float(gamma(dist, q))
    return g if q <= alice.p else (1.0 - alice.z) * g


# -- auxiliary distribution -------------------------------------------------


@dataclass(frozen=True)
class AuxiliaryDistribution:
    """Prior under which Bob's duopoly revenue equals a lone seller's revenue.

    Types below p keep their value, types in [p, s] are squeezed to
    a + (1 - z) v, and types above s keep their value with probability
    1 - z and drop to 0 otherwise.
    """

    base: ValueDistribution
    z: float
    p: float
    s: float

    @property
    def a(self) -> float:
        return self.p * self.z

    @property
    def atom_at_zero(self) -> float:
        return self.z * (1.0 - float(self.base.cdf(self.s)))

    @property
    def dead_zone(self) -> tuple[float, float]:
        return self.a + (1.0 - self.z) * self.s, self.s

    def _squeezed_origin(self, v):
        return (v - self.a) / (1.0 - self.z)

    def pdf(self, v):
        if self.base.is_discrete:
            raise UnsupportedDistributionError("discrete priors have no density")
        v = np.asarray(v, dtype=float)
        z, p = self.z, self.p
        top = self.dead_zone[0]
        f = self.base.pdf
        out = np.select(
            [v <= p, v < top, v <= self.s],
            [f(v), f(self._squeezed_origin(v)) / (1.0 - z), 0.0],
            (1.0 - z) * f(v),
        )
        return np.asarray(out)[()]

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.base.is_discrete:
            vals, probs = self._pushforward()
            out = (vals[None, :] <= v.reshape(-1, 1)) @ probs
            return np.minimum(out, 1.0).reshape(v.shape)[()]
        z, p, atom = self.z, self.p, self.atom_at_zero
        top = self.dead_zone[0]
        F = self.base.cdf
        out = np.select(
            [v < 0, v <= p, v < top, v < self.s],
            [0.0, atom + F(v), atom + F(self._squeezed_origin(v)), atom + F(self.s)],
            z + (1.0 - z) * F(v),
        )
        return np.minimum(np.asarray(out), 1.0)[()]

    def gamma(self, v):
        v = np.asarray(v, dtype=float)
        return np.asarray(v * (1.0 - self.cdf(v)))[()]

    def _pushforward(self) -> tuple[np.ndarray, np.ndarray]:
        vals, probs = self.base.atom_values, self.base.atom_probs
        mid = (vals >= self.p) & (vals <= self.s)
        high = vals > self.s
        moved = np.where(mid, self.a + (1.0 - self.z) * vals, vals)
        kept = np.where(high, (1.0 - self.z) * probs, probs)
        out_v = np.concatenate([[0.0], moved])
        out_p = np.concatenate([[float(self.z * probs[high].sum())], kept])
        return out_v, out_p

    def monopolist_revenue(self, menu: Menu) -> float:
        """E[M(z_M(w))] for w drawn from this prior.

        The squeezed piece is integrated on the base prior's grid through
        the substitution w = a + (1 - z) v. The atom at 0 pays M(z_M(0)).
        """
        menu = as_menu(menu)
        z, p, a, s = self.z, self.p, self.a, self.s

        def state(v):
            region = np.where(v < p, 0, np.where(v <= s, 1, 2))
            w = np.where(region == 1, a + (1.0 - z) * v, v)
            idx = menu.demand_index(w)
            weight = np.where(region == 2, 1.0 - z, 1.0)
            keys = np.vstack([region.astype(float), idx.astype(float)])
            return keys, (weight * menu.prices[idx])[None, :]

        at_zero = self.atom_at_zero * float(menu.prices[int(menu.demand_index(0.0))])
        return float(integrate_steps(self.base, state)[0]) + at_zero


def aux_distribution(dist: ValueDistribution, alice: SingleLottery, s: float) -> AuxiliaryDistribution:
    if not alice.z < 1.0:
        raise InvalidParameterError("the auxiliary prior needs z < 1")
    if s < alice.p:
        raise InvalidThresholdError(f"threshold {s} lies below the lottery price {alice.p}")
    if math.isinf(s):
        s = dist.support_max + 1.0
    return AuxiliaryDistribution(dist, alice.z, alice.p, float(s))


@dataclass(frozen=True)
class OneSellerCheck:
    lhs: float
    rhs: float
    gap: float
    threshold: float
    allocation_mismatches: int
    points_checked: int

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.gap))


def check_oneseller(alice: SingleLottery, bob: Menu, dist: ValueDistribution) -> OneSellerCheck:
    """Compare a lone seller's revenue under the auxiliary prior with Bob's duopoly revenue.

    Also counts grid points where Bob's chosen allocation differs from the
    lone-seller demand at the squeezed value.
    """
    bob = as_menu(bob)
    s = buyer.ab_start(alice, bob, dist.support_max)
    aux = aux_distribution(dist, alice, s)
    lhs = aux.monopolist_revenue(bob)
    rhs = revenues(alice, bob, dist).rev_bob
    pts = dist.atom_values if dist.is_discrete else dist.grid()
    x_b = buyer.respond(alice, bob, pts).x_bob
    squeeze = (pts >= alice.p) & (pts <= aux.s)
    w = np.where(squeeze, alice.a + (1.0 - alice.z) * pts, pts)
    expected = bob.xs[bob.demand_index(w)]
    mismatches = int(np.count_nonzero(x_b != expected))
    return OneSellerCheck(lhs, rhs, lhs - rhs, s, mismatches, int(pts.size))


# -- fast evaluation for Bob's search ---------------------------------------


def _best_surplus(menu: PricingMenu, w: np.ndarray) -> np.ndarray:
    return np.maximum((np.outer(w, menu.xs) - menu.prices).max(axis=1), 0.0)


def threshold_from_kinks(alice: SingleLottery, bob: PricingMenu, v_max: float) -> float:
    """First type above which Alice-first is strictly better, located on the kinks.

    The gain of going to Alice first is (1 - z) U_B(v) - U_B(a + (1 - z) v),
    piecewise linear with kinks at Bob's marginal prices and their squeezed
    preimages, so its first positive crossing is found exactly.
    """
    z, p, a = alice.z, alice.p, alice.a
    slopes = np.diff(bob.prices) / np.diff(bob.xs)
    kinks = np.concatenate([[p, v_max], slopes, (slopes - a) / (1.0 - z)])
    kinks = np.unique(kinks[(kinks >= p) & (kinks <= v_max)])
    gain = (1.0 - z) * _best_surplus(bob, kinks) - _best_surplus(bob, a + (1.0 - z) * kinks)
    pos = np.nonzero(gain > 1e-15)[0]
    if pos.size == 0:
        return math.inf
    j = int(pos[0])
    if j == 0:
        return float(kinks[0])
    k0, k1, g0, g1 = kinks[j - 1], kinks[j], gain[j - 1], gain[j]
    return float(k0 + (k1 - k0) * (-g0) / (g1 - g0)) if g0 < 0 else float(k0)


def bob_revenue_against_lottery(alice: SingleLottery, bob: Menu, dist: ValueDistribution) -> float:
    """Bob's duopoly revenue against a single lottery via the auxiliary prior, in closed form.

    Meant for inner loops of searches over Bob's menus on continuous
    priors; discrete priors fall back to exact sums.
    """
    bob = as_menu(bob)
    if dist.is_discrete or alice.z >= 1.0:
        return revenues(alice, bob, dist).rev_bob
    z, p, a = alice.z, alice.p, alice.a
    s = threshold_from_kinks(alice, bob, dist.support_max)
    slopes = np.diff(bob.prices) / np.diff(bob.xs)
    steps = np.diff(bob.prices)
    F = dist.cdf
    total = 0.0
    for lo, hi, scale, shift, weight in ((0.0, p, 1.0, 0.0, 1.0),
                                         (p, s, 1.0 - z, a, 1.0),
                                         (s, math.inf, 1.0, 0.0, 1.0 - z)):
        if hi <= lo:
            continue
        cut = np.clip((slopes - shift) / scale, lo, hi)
        total += weight * float(steps @ (F(hi) - F(cut)))
    return total
