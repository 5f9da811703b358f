"""Seller-side constructions and searches.

Covers Alice's half-probability lottery and the 1/e menu, Bob's best
posted price and a local search over his menus, the bottom and floor
transforms, and deviation searches at a point-mass prior.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate, optimize

from . import buyer
from .competition import bob_revenue_against_lottery, revenues, rev_fixed_price
from .distributions import (
    Kind,
    Regularity,
    ValueDistribution,
    classify_regularity,
    gamma,
    gamma_inverse,
    monopoly_revenue,
    myerson_price,
    virtual_density,
)
from .errors import (
    DegenerateDistributionError,
    IrregularDistributionError,
    UnsupportedDistributionError,
    ZeroDemandError,
)
from .menus import (
    MAX_SEARCH_BREAKPOINTS,
    Menu,
    PricingMenu,
    SingleLottery,
    as_menu,
    demand,
    fixed_price,
    lower_convex_envelope,
    properize,
)

TIE_TOL = 1e-12
LEFT_LIMIT = 1e-11
SEARCH_RESTARTS = 32
SEARCH_BUDGET = 2000
ONE_OVER_E_GRID = 4096
INV_E = math.exp(-1.0)


# -- Alice's half-probability lottery ----------------------------------------


def construct_theorem31(dist: ValueDistribution, nudge: Optional[float] = None,
                        check_regularity: bool = True) -> SingleLottery:
    """Lottery with z = 1/2 at the smallest price whose posted revenue is half the monopoly revenue.

    ``nudge`` lowers the price slightly so that Bob strictly prefers to
    post the Myerson price. It defaults to 1e-6 times the Myerson price on
    continuous priors and to 0 on discrete ones, where ties already resolve
    toward the larger posted price.
    """
    top = monopoly_revenue(dist)
    if top <= 0:
        raise DegenerateDistributionError("monopoly revenue is zero")
    if not dist.is_discrete and check_regularity:
        if classify_regularity(dist) is Regularity.NEITHER:
            raise IrregularDistributionError(f"{dist} is neither regular nor DMR")
    root = float(gamma_inverse(dist, 0.5 * top))
    if nudge is None:
        nudge = 0.0 if dist.is_discrete else 1e-6 * myerson_price(dist)
    return SingleLottery(0.5, max(root - nudge, 0.0))


# -- Bob's posted prices -----------------------------------------------------


class PostedPrice(NamedTuple):
    price: float
    revenue: float


def _pick(qs: np.ndarray, revs: np.ndarray) -> PostedPrice:
    best = revs.max()
    idx = np.nonzero(revs >= best - TIE_TOL)[0]
    j = idx[np.argmax(qs[idx])]
    return PostedPrice(float(qs[j]), float(revs[j]))


def _argmax_gamma(dist: ValueDistribution, lo: float, hi: float) -> PostedPrice:
    """Largest maximizer of the revenue curve on [lo, hi] (continuous priors)."""
    g = dist.grid()
    pts = np.union1d(g[(g > lo) & (g < hi)], [lo, hi])
    revs = gamma(dist, pts)
    i = len(pts) - 1 - int(np.argmax(revs[::-1]))
    a, b = pts[max(i - 1, 0)], pts[min(i + 1, len(pts) - 1)]
    best = PostedPrice(float(pts[i]), float(revs[i]))
    if b > a:
        res = optimize.minimize_scalar(lambda x: -float(gamma(dist, x)), bounds=(a, b),
                                       method="bounded", options={"xatol": 1e-13})
        cand = float(res.x)
        if float(gamma(dist, cand)) > best.revenue:
            best = PostedPrice(cand, float(gamma(dist, cand)))
    return best


def posted_price_plans(alice: Menu, values: np.ndarray, qs: np.ndarray) -> buyer.Plans:
    """Buyer plans for every (value, posted price) pair; lanes have shape (len(values), len(qs))."""
    v = np.broadcast_to(np.asarray(values, dtype=float)[:, None], (len(values), len(qs)))
    return buyer.plan(v, buyer.menu_stage(as_menu(alice)), buyer.lottery_stage(1.0, qs[None, :]))


def posted_price_curve(alice: Menu, dist: ValueDistribution, qs) -> tuple[np.ndarray, np.ndarray]:
    """Revenues of Bob and Alice when Bob posts each price in ``qs``."""
    qs = np.asarray(qs, dtype=float)
    if dist.is_discrete:
        pl = posted_price_plans(alice, dist.atom_values, qs)
        return dist.atom_probs @ pl.pay_bob, dist.atom_probs @ pl.pay_alice
    rb, ra = np.empty(len(qs)), np.empty(len(qs))
    for i, q in enumerate(qs):
        out = revenues(alice, fixed_price(float(q)), dist)
        rb[i], ra[i] = out.rev_bob, out.rev_alice
    return rb, ra


def _discrete_candidates(alice: PricingMenu, dist: ValueDistribution, step: float) -> np.ndarray:
    top = dist.support_max
    slopes = np.diff(alice.prices) / np.diff(alice.xs)
    base = np.concatenate([
        np.arange(0.0, top + step / 2, step),
        dist.atom_values,
        slopes,
        slopes - LEFT_LIMIT * np.maximum(1.0, slopes),
        dist.atom_values - LEFT_LIMIT * np.maximum(1.0, dist.atom_values),
    ])
    return np.unique(base[(base >= 0) & (base <= top)])


def bob_best_posted_price(alice: Menu, dist: ValueDistribution, qs=None, step: float = 1e-3) -> PostedPrice:
    """Bob's revenue-maximizing posted price against Alice's menu; ties go to the larger price.

    Against a single lottery the closed-form revenue is maximized on both
    branches (undercutting at or below p, or sharing above p). Against a
    general menu the price is chosen from ``qs``; on discrete priors the
    default candidates include every marginal price of Alice's menu and a
    point just below it, since Bob's revenue jumps down at those prices.
    """
    if isinstance(alice, SingleLottery) and qs is None:
        z, p = alice.z, alice.p
        if dist.is_discrete:
            vals = dist.atom_values
            cand = np.unique(np.concatenate([vals, [p]]))
            revs = np.array([rev_fixed_price(alice, q, dist) for q in cand])
            return _pick(cand, revs)
        low = _argmax_gamma(dist, 0.0, min(p, dist.support_max))
        options = [low]
        if p < dist.support_max:
            high = _argmax_gamma(dist, p, dist.support_max)
            if high.price > p:
                options.append(PostedPrice(high.price, (1.0 - z) * high.revenue))
        qs_ = np.array([o.price for o in options])
        revs = np.array([o.revenue for o in options])
        return _pick(qs_, revs)
    menu = as_menu(alice)
    if qs is None:
        if dist.is_discrete:
            qs = _discrete_candidates(menu, dist, step * dist.support_max)
        else:
            qs = np.linspace(0.0, dist.support_max, 401)
    qs = np.asarray(qs, dtype=float)
    rb, _ = posted_price_curve(menu, dist, qs)
    return _pick(qs, rb)


# -- local search over Bob's menus -------------------------------------------


@dataclass(frozen=True)
class BestResponseReport:
    posted_price: float
    posted_revenue: float
    challenger: PricingMenu
    challenger_revenue: float
    margin: float
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "posted_price": self.posted_price,
            "posted_revenue": self.posted_revenue,
            "challenger": self.challenger.to_spec(),
            "challenger_revenue": self.challenger_revenue,
            "margin": self.margin,
            "evaluations": self.evaluations,
        }


def random_menu(rng: np.random.Generator, price_scale: float,
                max_breakpoints: int = MAX_SEARCH_BREAKPOINTS) -> PricingMenu:
    """Random proper menu with at most ``max_breakpoints`` offered allocations."""
    k = int(rng.integers(1, max_breakpoints + 1))
    xs = np.sort(rng.uniform(0.0, 1.0, k))
    if rng.random() < 0.5:
        xs[-1] = 1.0
    slopes = np.sort(rng.uniform(0.0, price_scale, k))
    prices = np.cumsum(slopes * np.diff(np.concatenate([[0.0], xs])))
    return properize(zip(xs, prices))


def _perturb(menu: PricingMenu, rng: np.random.Generator, step: float, price_scale: float,
             max_breakpoints: int) -> PricingMenu:
    xs = list(menu.xs[1:])
    cs = list(menu.prices[1:])
    move = rng.random()
    if move < 0.15 and len(xs) < max_breakpoints:
        x = float(rng.uniform(0.0, 1.0))
        xs.append(x)
        cs.append(float(menu.price_array(min(x, menu.x_bar))) + abs(rng.normal(0.0, step * price_scale)))
    elif move < 0.25 and len(xs) > 1:
        j = int(rng.integers(len(xs)))
        del xs[j], cs[j]
    else:
        j = int(rng.integers(len(xs)))
        if rng.random() < 0.5:
            xs[j] = float(np.clip(xs[j] + rng.normal(0.0, step), 1e-6, 1.0))
        else:
            cs[j] = max(cs[j] + rng.normal(0.0, step * price_scale), 0.0)
    try:
        return properize(zip(xs, cs))
    except ValueError:
        return menu


def local_search(objective, start: PricingMenu, rng: np.random.Generator, iterations: int,
                 price_scale: float, max_breakpoints: int = MAX_SEARCH_BREAKPOINTS):
    """Greedy stochastic hill climbing over proper menus; returns (menu, value, evaluations)."""
    best, best_val = start, objective(start)
    step = 0.1
    for _ in range(iterations):
        cand = _perturb(best, rng, step, price_scale, max_breakpoints)
        val = objective(cand)
        if val > best_val:
            best, best_val = cand, val
            step = min(step * 1.5, 0.5)
        else:
            step = max(step * 0.9, 1e-4)
    return best, best_val, iterations + 1


def bob_menu_search(alice: SingleLottery, dist: ValueDistribution, budget: int = SEARCH_BUDGET,
                    seed: int = 0, restarts: int = SEARCH_RESTARTS,
                    max_breakpoints: int = MAX_SEARCH_BREAKPOINTS) -> BestResponseReport:
    """Try to beat Bob's best posted price with richer menus.

    The search scores candidates with the closed-form revenue through the
    auxiliary prior; the winner is re-scored with the direct quadrature of
    the buyer's choices before the margin is reported.
    """
    rng = np.random.default_rng(seed)
    posted = bob_best_posted_price(alice, dist)
    scale = 2.0 * max(myerson_price(dist), alice.p, 1e-9)
    per_restart = max(budget // restarts - 1, 1)

    def objective(m):
        return bob_revenue_against_lottery(alice, m, dist)

    best_menu, best_val, used = None, -math.inf, 0
    for r in range(restarts):
        start = fixed_price(posted.price) if r == 0 else random_menu(rng, scale, max_breakpoints)
        menu, val, n = local_search(objective, start, rng, per_restart, scale, max_breakpoints)
        used += n
        if val > best_val:
            best_menu, best_val = menu, val
    challenger_rev = revenues(alice, best_menu, dist).rev_bob
    return BestResponseReport(posted.price, posted.revenue, best_menu, challenger_rev,
                              posted.revenue - challenger_rev, used)


# -- bottom and floor transforms ----------------------------------------------


def bottom_properize(bob: Menu, p_hat: float) -> PricingMenu:
    """Pointwise maximum of Bob's menu and the line p_hat * x."""
    bob = as_menu(bob)
    pts = []
    for (x0, c0), (x1, c1) in zip(bob.breakpoints[:-1], bob.breakpoints[1:]):
        pts.append((x0, max(c0, p_hat * x0)))
        d0, d1 = c0 - p_hat * x0, c1 - p_hat * x1
        if d0 * d1 < 0:
            xc = x0 + (x1 - x0) * d0 / (d0 - d1)
            pts.append((xc, p_hat * xc))
    x_end, c_end = bob.breakpoints[-1]
    pts.append((x_end, max(c_end, p_hat * x_end)))
    return properize(pts[1:])


class BottomProperCheck(NamedTuple):
    p_hat: float
    threshold: float
    rev_before: float
    rev_after: float


def bottom_proper_check(alice: SingleLottery, bob: Menu, dist: ValueDistribution) -> BottomProperCheck:
    """Bob's revenue before and after lifting his menu to the threshold type's bang-per-buck price."""
    bob = as_menu(bob)
    s = buyer.ab_start(alice, bob, dist.support_max)
    probe = dist.support_max if math.isinf(s) else s
    xb = buyer.best_response(alice, bob, probe).x_bob
    p_hat = bob.price(xb) / xb if xb > 0 else 0.0
    lifted = bottom_properize(bob, p_hat)
    return BottomProperCheck(p_hat, s, revenues(alice, bob, dist).rev_bob, revenues(alice, lifted, dist).rev_bob)


def monopolist_floor_transform(menu: Menu, v_star_ref: float, dist: Optional[ValueDistribution] = None) -> PricingMenu:
    """max(M(x), q x) with q the bang-per-buck price chosen by type v_star_ref."""
    menu = as_menu(menu)
    x0 = demand(menu, v_star_ref)
    if x0 <= 0:
        raise ZeroDemandError(f"type {v_star_ref} buys nothing from the menu")
    return bottom_properize(menu, menu.price(x0) / x0)


class FloorCheck(NamedTuple):
    q: float
    conditions_hold: bool
    rev_before: float
    rev_after: float


def floor_transform_check(menu: Menu, v_star_ref: float, dist: ValueDistribution,
                          slack: float = 1e-9) -> FloorCheck:
    """Revenues of a lone seller before and after the floor transform, with the
    virtual-density conditions under which the transform cannot lose revenue."""
    from .competition import monopolist_revenue

    menu = as_menu(menu)
    x0 = demand(menu, v_star_ref)
    if x0 <= 0:
        raise ZeroDemandError(f"type {v_star_ref} buys nothing from the menu")
    q = menu.price(x0) / x0
    if dist.is_discrete:
        raise UnsupportedDistributionError("the virtual-density conditions need a density")
    g = dist.grid()
    h = virtual_density(dist, g)
    hq = float(virtual_density(dist, q))
    below = g <= q
    between = (g >= q) & (g < v_star_ref)
    ok = bool(np.all(h[below] <= hq + slack) and np.all(h[between] >= hq - slack))
    after = monopolist_floor_transform(menu, v_star_ref, dist)
    return FloorCheck(q, ok, monopolist_revenue(menu, dist), monopolist_revenue(after, dist))


# -- the 1/e menu ----------------------------------------------------------------


def alice_one_over_e_menu(dist: ValueDistribution, grid: int = ONE_OVER_E_GRID) -> PricingMenu:
    """Menu whose marginal price at x is the smallest value with posted revenue M / (e (1 - x)).

    Offered up to x_bar = 1 - 1/e; prices are the cumulative trapezoid
    integral of the marginal price on a uniform grid.
    """
    top = monopoly_revenue(dist)
    if top <= 0:
        raise DegenerateDistributionError("monopoly revenue is zero")
    x_bar = 1.0 - INV_E
    xs = np.linspace(0.0, x_bar, grid)
    level = np.minimum(top * INV_E / (1.0 - xs), top)
    marginal = np.asarray(gamma_inverse(dist, level), dtype=float)
    prices = integrate.cumulative_trapezoid(marginal, xs, initial=0.0)
    return PricingMenu(tuple(zip(xs, prices)))


def one_over_e_demand_formula(dist: ValueDistribution, v: float) -> float:
    """Closed-form demand of a buyer alone with the 1/e menu."""
    top = monopoly_revenue(dist)
    if v < float(gamma_inverse(dist, top * INV_E)):
        return 0.0
    if v <= myerson_price(dist):
        return 1.0 - top * INV_E / float(gamma(dist, v))
    return 1.0 - INV_E


def one_over_e_posted_revenue_formula(dist: ValueDistribution, q: float) -> float:
    """Closed-form revenue of a posted price q against the 1/e menu."""
    return float(gamma(dist, q)) * (1.0 - one_over_e_demand_formula(dist, q))


# -- Stackelberg outcome -------------------------------------------------------


@dataclass(frozen=True)
class StackelbergOutcome:
    alice_menu: SingleLottery
    bob_menu: PricingMenu
    bob_price: float
    rev_alice: float
    rev_bob: float
    monopoly_benchmark: float
    ratio_alice: float
    ratio_bob: float

    def to_dict(self) -> dict:
        return {
            "alice_menu": self.alice_menu.to_spec(),
            "bob_menu": self.bob_menu.to_spec(),
            "bob_price": self.bob_price,
            "rev_alice": self.rev_alice,
            "rev_bob": self.rev_bob,
            "monopoly_benchmark": self.monopoly_benchmark,
            "ratio_alice": self.ratio_alice,
            "ratio_bob": self.ratio_bob,
        }


def stackelberg_outcome(dist: ValueDistribution, nudge: Optional[float] = None) -> StackelbergOutcome:
    alice = construct_theorem31(dist, nudge=nudge)
    q, _ = bob_best_posted_price(alice, dist)
    bob = fixed_price(q)
    out = revenues(alice, bob, dist)
    top = monopoly_revenue(dist)
    return StackelbergOutcome(alice, bob, q, out.rev_alice, out.rev_bob, top,
                              out.rev_alice / top, out.rev_bob / top)


# -- searches at a point mass ------------------------------------------------------


def _require_point_mass(dist: ValueDistribution) -> float:
    if dist.kind is not Kind.POINT_MASS:
        raise UnsupportedDistributionError("this search needs a point-mass prior")
    return float(dist.atom_values[0])


@dataclass(frozen=True)
class DeviationReport:
    status: str
    rev_alice: float
    rev_bob: float
    deviator: Optional[str] = None
    deviation: Optional[tuple[float, float]] = None
    deviation_revenue: Optional[float] = None

    @property
    def improvement(self) -> Optional[float]:
        if self.deviation_revenue is None:
            return None
        base = self.rev_bob if self.deviator == "bob" else self.rev_alice
        return self.deviation_revenue - base

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["deviation"] = None if self.deviation is None else {"z": self.deviation[0], "p": self.deviation[1]}
        out["improvement"] = self.improvement
        return out


def nash_deviation_search(alice: Menu, bob: Menu, dist: ValueDistribution, step: float = 1e-3,
                          tol: float = 1e-9) -> DeviationReport:
    """Look for a single-lottery deviation that strictly raises one seller's revenue.

    Bob's deviations are searched first, then Alice's; the best deviation
    on the (z, p) grid of the first seller that has one is reported.
    """
    v0 = _require_point_mass(dist)
    alice_m, bob_m = as_menu(alice), as_menu(bob)
    now = buyer.best_response(alice_m, bob_m, v0)
    rev_a, rev_b = now.pay_alice, now.pay_bob
    if rev_a <= tol and rev_b <= tol:
        return DeviationReport("equilibrium-consistent", rev_a, rev_b)
    zs = np.arange(1, int(round(1.0 / step)) + 1) * step
    ps = np.arange(0, int(round(1.0 / step)) + 1) * step * v0
    Z, P = np.meshgrid(zs, ps, indexing="ij")
    Z, P = Z.ravel(), P.ravel()
    v = np.full(Z.shape, v0)
    for who, current in (("bob", rev_b), ("alice", rev_a)):
        if who == "bob":
            pl = buyer.plan(v, buyer.menu_stage(alice_m), buyer.lottery_stage(Z, P))
            gain = pl.pay_bob
        else:
            pl = buyer.plan(v, buyer.lottery_stage(Z, P), buyer.menu_stage(bob_m))
            gain = pl.pay_alice
        j = int(np.argmax(gain))
        if gain[j] > current + tol:
            return DeviationReport("deviation-found", rev_a, rev_b, who,
                                   (float(Z[j]), float(P[j])), float(gain[j]))
    return DeviationReport("inconclusive-at-resolution", rev_a, rev_b)


@dataclass(frozen=True)
class SubgradientReport:
    bob_revenue_bound: float
    checks: tuple[tuple[float, float, float, bool], ...]

    @property
    def passed(self) -> bool:
        return all(ok for *_, ok in self.checks)

    @property
    def worst_violation(self) -> float:
        return max((slope - bound for _, slope, bound, _ in self.checks), default=-math.inf)

    def to_dict(self) -> dict:
        return {
            "bob_revenue_bound": self.bob_revenue_bound,
            "checked_breakpoints": len(self.checks),
            "passed": self.passed,
            "worst_violation": self.worst_violation,
        }


def subgradient_bound_check(alice: Menu, dist: ValueDistribution, step: float = 1e-3,
                            slack: float = 1e-9) -> SubgradientReport:
    """Compare the envelope's outgoing slopes with R / (1 - z), R being Bob's best posted-price revenue."""
    v0 = _require_point_mass(dist)
    env = lower_convex_envelope(alice)
    _, bound = bob_best_posted_price(as_menu(alice), dist, step=step)
    slopes = np.diff(env.prices) / np.diff(env.xs)
    checks = []
    for z, slope in zip(env.xs[:-1], slopes):
        if z < 1.0 - bound / v0 - 1e-12:
            limit = bound / (1.0 - z)
            checks.append((float(z), float(slope), float(limit), bool(slope <= limit + slack)))
    return SubgradientReport(float(bound), tuple(checks))


def indifference_menu(v0: float = 1.0, breakpoints: int = MAX_SEARCH_BREAKPOINTS) -> PricingMenu:
    """Few-breakpoint menu at a point mass that leaves Bob indifferent across its marginal prices.

    Allocations are evenly spaced in log(1 - x) up to 1 - 1/e and each
    segment's marginal price is v0 / (e (1 - x)) at its left end, so every
    posted price just below a marginal price earns Bob v0 / e, as does v0.
    """
    k = breakpoints
    xs = 1.0 - np.exp(-np.arange(k + 1) / k)
    slopes = v0 * INV_E / (1.0 - xs[:-1])
    prices = np.concatenate([[0.0], np.cumsum(slopes * np.diff(xs))])
    return PricingMenu(tuple(zip(xs, prices)))


@dataclass(frozen=True)
class AliceSearchReport:
    best_menu: PricingMenu
    rev_alice: float
    bob_price: float
    rev_bob: float
    restarts: int
    evaluations: int


def alice_revenue_under_posted_response(alice: Menu, dist: ValueDistribution, step: float = 1e-3):
    """Alice's revenue when Bob answers with his best posted price (ties to the larger price)."""
    q, rb = bob_best_posted_price(as_menu(alice), dist, step=step)
    _, ra = posted_price_curve(alice, dist, np.array([q]))
    return float(ra[0]), q, rb


def alice_menu_search(dist: ValueDistribution, restarts: int = 64, iterations: int = 300, seed: int = 0,
                      max_breakpoints: int = MAX_SEARCH_BREAKPOINTS) -> AliceSearchReport:
    """Local search over Alice's menus at a point mass, scored against Bob's best posted price.

    The first two restarts begin at the half-probability lottery and at
    ``indifference_menu``; the rest begin at random menus.
    """
    v0 = _require_point_mass(dist)
    rng = np.random.default_rng(seed)

    def objective(m):
        return alice_revenue_under_posted_response(m, dist)[0]

    seeds = [SingleLottery(0.5, 0.5 * v0).menu, indifference_menu(v0, max_breakpoints)]
    best_menu, best_val, used = None, -math.inf, 0
    for r in range(restarts):
        start = seeds[r] if r < len(seeds) else random_menu(rng, v0, max_breakpoints)
        menu, val, n = local_search(objective, start, rng, iterations, v0, max_breakpoints)
        used += n
        if val > best_val:
            best_menu, best_val = menu, val
    ra, q, rb = alice_revenue_under_posted_response(best_menu, dist)
    return AliceSearchReport(best_menu, ra, q, rb, restarts, used)


def warn_if_irregular(dist: ValueDistribution) -> Regularity:
    reg = classify_regularity(dist)
    if reg is Regularity.NEITHER:
        warnings.warn(f"{dist} is neither regular nor DMR; posted-price optimality is not guaranteed")
    return reg
