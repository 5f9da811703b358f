"""Proper pricing menus.

A menu maps an allocation probability x in [0, x_bar] to a price. Proper
menus start at (0, 0), are nondecreasing and convex, and are stored as a
finite list of breakpoints with linear interpolation in between.
Allocations above x_bar are unavailable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Union

import numpy as np

from .errors import (
    DomainError,
    InvalidMenuError,
    InvalidParameterError,
    InvalidPointError,
    SpecError,
    UnavailableAllocationError,
)

ENVELOPE_TOL = 1e-12
DEMAND_TOL = 1e-12
MAX_SEARCH_BREAKPOINTS = 8


class _Unavailable:
    """Price of an allocation that is not offered."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNAVAILABLE"

    def __bool__(self) -> bool:
        return False


UNAVAILABLE = _Unavailable()


@dataclass(frozen=True)
class PricingMenu:
    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(c)) for x, c in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        if len(pts) < 2:
            raise InvalidMenuError("a menu needs at least one offered allocation besides 0")
        if pts[0] != (0.0, 0.0):
            raise InvalidMenuError(f"first breakpoint must be (0, 0), got {pts[0]}")
        xs = np.array([x for x, _ in pts])
        cs = np.array([c for _, c in pts])
        if np.any(np.diff(xs) <= 0) or xs[-1] > 1.0 + ENVELOPE_TOL:
            raise InvalidMenuError("allocations must be strictly increasing within [0, 1]")
        if np.any(~np.isfinite(cs)) or np.any(np.diff(cs) < -ENVELOPE_TOL):
            raise InvalidMenuError("prices must be finite and nondecreasing")
        slopes = np.diff(cs) / np.diff(xs)
        if np.any(np.diff(slopes) < -ENVELOPE_TOL * np.maximum(1.0, np.abs(slopes[1:]))):
            raise InvalidMenuError("marginal prices must be nondecreasing (menu is not convex)")

    @cached_property
    def xs(self) -> np.ndarray:
        return np.array([x for x, _ in self.breakpoints])

    @cached_property
    def prices(self) -> np.ndarray:
        return np.array([c for _, c in self.breakpoints])

    @cached_property
    def slopes(self) -> np.ndarray:
        # running max guards searchsorted against roundoff-level dips
        return np.maximum.accumulate(np.diff(self.prices) / np.diff(self.xs))

    @property
    def x_bar(self) -> float:
        return self.breakpoints[-1][0]

    def price(self, x: float):
        if x < 0 or x > self.x_bar + ENVELOPE_TOL:
            return UNAVAILABLE
        return float(np.interp(min(x, self.x_bar), self.xs, self.prices))

    __call__ = price

    def price_array(self, x) -> np.ndarray:
        """Vectorized price for allocations known to be offered."""
        return np.interp(x, self.xs, self.prices)

    def demand_index(self, w) -> np.ndarray:
        """Index of the largest utility-maximizing breakpoint for effective value w."""
        w = np.asarray(w, dtype=float)
        return np.searchsorted(self.slopes, w + DEMAND_TOL, side="right")

    def to_spec(self) -> dict:
        return {"breakpoints": [list(p) for p in self.breakpoints]}


@dataclass(frozen=True)
class SingleLottery:
    """Allocate with probability z at bang-per-buck price p (ex-ante payment a = p z)."""

    z: float
    p: float

    def __post_init__(self):
        if not (0.0 < self.z <= 1.0) or not (self.p >= 0.0 and math.isfinite(self.p)):
            raise InvalidParameterError(f"lottery needs 0 < z <= 1 and p >= 0, got z={self.z}, p={self.p}")

    @property
    def a(self) -> float:
        return self.p * self.z

    @cached_property
    def menu(self) -> PricingMenu:
        return PricingMenu(((0.0, 0.0), (self.z, self.a)))

    def to_spec(self) -> dict:
        return {"lottery": {"z": self.z, "p": self.p}}


Menu = Union[PricingMenu, SingleLottery]


def as_menu(m: Menu) -> PricingMenu:
    return m.menu if isinstance(m, SingleLottery) else m


def fixed_price(q: float) -> PricingMenu:
    if not (q >= 0 and math.isfinite(q)):
        raise InvalidParameterError(f"fixed price must be a nonnegative number, got {q}")
    return PricingMenu(((0.0, 0.0), (1.0, float(q))))


def give_away() -> PricingMenu:
    return fixed_price(0.0)


def _lower_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    hull: list[tuple[float, float]] = []
    for x, c in points:
        while len(hull) >= 2:
            (x0, c0), (x1, c1) = hull[-2], hull[-1]
            # drop the middle point unless it sits strictly below the chord
            if (c - c1) / (x - x1) <= (c1 - c0) / (x1 - x0) + ENVELOPE_TOL:
                hull.pop()
            else:
                break
        hull.append((x, c))
    return hull


def properize(raw: Iterable[tuple[float, float]]) -> PricingMenu:
    """Lower convex, monotone closure of raw (x, price) offers, with (0, 0) added."""
    cheapest: dict[float, float] = {0.0: 0.0}
    for x, c in raw:
        x, c = float(x), float(c)
        if not (0.0 <= x <= 1.0) or not (c >= 0.0) or not math.isfinite(c):
            raise InvalidPointError(f"menu point ({x}, {c}) is outside [0,1] x [0, inf)")
        cheapest[x] = min(c, cheapest.get(x, math.inf))
    pts = sorted(cheapest.items())
    if len(pts) < 2:
        raise InvalidMenuError("a menu needs at least one offered allocation besides 0")
    return PricingMenu(tuple(_lower_hull(pts)))


def lower_convex_envelope(m: Menu) -> PricingMenu:
    return properize(as_menu(m).breakpoints)


def demand(m: Menu, w: float) -> float:
    """Largest maximizer of x w - M(x); w = +inf returns x_bar."""
    m = as_menu(m)
    if w == math.inf:
        return m.x_bar
    return float(m.xs[int(m.demand_index(w))])


def subgradient_range(m: Menu, x: float) -> tuple[float, float]:
    """(incoming slope, outgoing slope) at x; -inf and +inf at the ends."""
    m = as_menu(m)
    if x < -ENVELOPE_TOL or x > m.x_bar + ENVELOPE_TOL:
        raise UnavailableAllocationError(f"allocation {x} is not offered (x_bar = {m.x_bar})")
    xs, slopes = m.xs, np.diff(m.prices) / np.diff(m.xs)
    j = int(np.argmin(np.abs(xs - x)))
    if abs(xs[j] - x) <= ENVELOPE_TOL:
        incoming = float(slopes[j - 1]) if j > 0 else -math.inf
        outgoing = float(slopes[j]) if j < len(slopes) else math.inf
        return incoming, outgoing
    seg = int(np.searchsorted(xs, x)) - 1
    return float(slopes[seg]), float(slopes[seg])


def parse_menu(spec) -> Menu:
    """Menu from JSON text or object; breakpoint lists are properized on load."""
    if isinstance(spec, str):
        text = spec.strip()
        if text == "giveaway":
            return give_away()
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"cannot parse menu spec {text!r}: {exc}") from None
    if not isinstance(spec, dict):
        raise SpecError(f"menu spec must be an object: {spec!r}")
    try:
        if "breakpoints" in spec:
            return properize((float(x), float(c)) for x, c in spec["breakpoints"])
        if "lottery" in spec:
            return SingleLottery(float(spec["lottery"]["z"]), float(spec["lottery"]["p"]))
        if "fixed_price" in spec:
            return fixed_price(float(spec["fixed_price"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise SpecError(f"malformed menu spec {spec!r}: {exc}") from None
    raise SpecError(f"menu spec needs 'breakpoints', 'lottery' or 'fixed_price': {spec!r}")
