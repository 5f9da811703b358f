"""Buyer value priors and the objects derived from them.

A ``ValueDistribution`` is an immutable description of a family and its
parameters. Continuous families carry closed-form CDF and density; point
masses and finite discrete priors carry atoms and are handled with exact
sums. The revenue curve uses the sell-at-price convention
``gamma(q) = q * P[V >= q]``, which coincides with ``q * (1 - F(q))`` for
atomless priors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateDistributionError,
    InvalidParameterError,
    OutOfRangeError,
    SpecError,
    UnsupportedDistributionError,
    ZeroDensityError,
)

DEFAULT_GRID_SIZE = 200_001
TRUNCATION_TAIL = 1e-10
REGULARITY_SLACK = 1e-9
GAMMA_INVERSE_SLACK = 1e-12
_BISECTION_STEPS = 80


class Kind(str, Enum):
    CONTINUOUS = "analytic-continuous"
    POINT_MASS = "point-mass"
    DISCRETE = "finite-discrete"


class Regularity(str, Enum):
    REGULAR = "regular"
    DMR = "DMR"
    BOTH = "both"
    NEITHER = "neither"

    @property
    def is_regular(self) -> bool:
        return self in (Regularity.REGULAR, Regularity.BOTH)

    @property
    def is_dmr(self) -> bool:
        return self in (Regularity.DMR, Regularity.BOTH)


@dataclass(frozen=True)
class _Family:
    cdf: Callable[[np.ndarray, tuple], np.ndarray]
    pdf: Callable[[np.ndarray, tuple], np.ndarray]
    support_max: Callable[[tuple], float]


def _uniform_cdf(v, prm):
    lo, hi = prm
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def _uniform_pdf(v, prm):
    lo, hi = prm
    return np.where((v >= lo) & (v <= hi), 1.0 / (hi - lo), 0.0)


def _exp_support_max(prm):
    return -math.log(TRUNCATION_TAIL) / prm[0]


def _exp_cdf(v, prm):
    # mass beyond the truncation point is folded into the top cell
    top = _exp_support_max(prm)
    raw = -np.expm1(-prm[0] * np.maximum(v, 0.0))
    return np.where(v >= top, 1.0, raw)


def _exp_pdf(v, prm):
    top = _exp_support_max(prm)
    return np.where((v >= 0) & (v <= top), prm[0] * np.exp(-prm[0] * np.maximum(v, 0.0)), 0.0)


def _pareto_cdf(v, prm):
    alpha, lo, hi = prm
    norm = 1.0 - (lo / hi) ** alpha
    w = np.clip(v, lo, hi)
    return (1.0 - (lo / w) ** alpha) / norm


def _pareto_pdf(v, prm):
    alpha, lo, hi = prm
    norm = 1.0 - (lo / hi) ** alpha
    w = np.clip(v, lo, hi)
    dens = alpha * lo**alpha * w ** (-alpha - 1.0) / norm
    return np.where((v >= lo) & (v <= hi), dens, 0.0)


def _mixture_cdf(v, prm):
    a1, b1, a2, b2, w = prm
    return w * _uniform_cdf(v, (a1, b1)) + (1.0 - w) * _uniform_cdf(v, (a2, b2))


def _mixture_pdf(v, prm):
    a1, b1, a2, b2, w = prm
    return w * _uniform_pdf(v, (a1, b1)) + (1.0 - w) * _uniform_pdf(v, (a2, b2))


_FAMILIES: dict[str, _Family] = {
    "uniform": _Family(_uniform_cdf, _uniform_pdf, lambda prm: float(prm[1])),
    "exp": _Family(_exp_cdf, _exp_pdf, _exp_support_max),
    "pareto": _Family(_pareto_cdf, _pareto_pdf, lambda prm: float(prm[2])),
    "mixture": _Family(_mixture_cdf, _mixture_pdf, lambda prm: float(max(prm[1], prm[3]))),
}


@dataclass(frozen=True)
class ValueDistribution:
    """Prior over the buyer's value.

    Use the constructors (``uniform``, ``exponential``, ``point_mass``, ...)
    rather than building instances directly.
    """

    family: str
    params: tuple[float, ...] = ()
    atoms: tuple[tuple[float, float], ...] = ()
    grid_size: int = DEFAULT_GRID_SIZE
    label: str = field(default="", compare=False)

    @property
    def kind(self) -> Kind:
        if self.family == "pointmass":
            return Kind.POINT_MASS
        if self.family == "discrete":
            return Kind.DISCRETE
        return Kind.CONTINUOUS

    @property
    def is_discrete(self) -> bool:
        return self.kind is not Kind.CONTINUOUS

    @cached_property
    def support_max(self) -> float:
        if self.is_discrete:
            return float(self.atoms[-1][0])
        return _FAMILIES[self.family].support_max(self.params)

    @cached_property
    def atom_values(self) -> np.ndarray:
        return np.array([v for v, _ in self.atoms], dtype=float)

    @cached_property
    def atom_probs(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_discrete:
            out = (self.atom_values[None, :] <= v.reshape(-1, 1)) @ self.atom_probs
            return np.minimum(out, 1.0).reshape(v.shape)[()]
        out = np.where(v < 0, 0.0, _FAMILIES[self.family].cdf(v, self.params))
        return out[()]

    def pdf(self, v):
        if self.is_discrete:
            raise UnsupportedDistributionError(f"{self.family} prior has no density")
        v = np.asarray(v, dtype=float)
        return np.asarray(_FAMILIES[self.family].pdf(v, self.params))[()]

    def survival(self, q):
        """P[V >= q], the left-limit tail used for posted prices."""
        q = np.asarray(q, dtype=float)
        if self.is_discrete:
            out = (self.atom_values[None, :] >= q.reshape(-1, 1)) @ self.atom_probs
            return np.minimum(out, 1.0).reshape(q.shape)[()]
        return np.asarray(1.0 - self.cdf(q))[()]

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.support_max, self.grid_size)

    def with_grid(self, grid_size: int) -> "ValueDistribution":
        return replace(self, grid_size=int(grid_size))

    def to_spec(self) -> dict:
        if self.is_discrete:
            if self.kind is Kind.POINT_MASS:
                return {"family": "pointmass", "params": [self.atoms[0][0]]}
            return {"family": "discrete", "atoms": [list(a) for a in self.atoms]}
        return {"family": self.family, "params": list(self.params)}

    def __str__(self) -> str:
        return self.label or json.dumps(self.to_spec())


# -- constructors ---------------------------------------------------------


def uniform(lo: float = 0.0, hi: float = 1.0, grid_size: int = DEFAULT_GRID_SIZE) -> ValueDistribution:
    if not (0.0 <= lo < hi and math.isfinite(hi)):
        raise InvalidParameterError(f"uniform needs 0 <= lo < hi, got [{lo}, {hi}]")
    return ValueDistribution("uniform", (float(lo), float(hi)), grid_size=grid_size,
                             label=f"Uniform[{lo:g},{hi:g}]")


def exponential(rate: float = 1.0, grid_size: int = DEFAULT_GRID_SIZE) -> ValueDistribution:
    if not rate > 0:
        raise InvalidParameterError(f"exponential rate must be positive, got {rate}")
    return ValueDistribution("exp", (float(rate),), grid_size=grid_size, label=f"Exp({rate:g})")


def truncated_pareto(alpha: float, lo: float, hi: float,
                     grid_size: int = DEFAULT_GRID_SIZE) -> ValueDistribution:
    if not (alpha > 0 and 0 < lo < hi and math.isfinite(hi)):
        raise InvalidParameterError(f"pareto needs alpha > 0 and 0 < lo < hi, got {alpha}, {lo}, {hi}")
    return ValueDistribution("pareto", (float(alpha), float(lo), float(hi)), grid_size=grid_size,
                             label=f"Pareto({alpha:g})[{lo:g},{hi:g}]")


def uniform_mixture(a1: float, b1: float, a2: float, b2: float, weight: float = 0.5,
                    grid_size: int = DEFAULT_GRID_SIZE) -> ValueDistribution:
    for lo, hi in ((a1, b1), (a2, b2)):
        if not (0.0 <= lo < hi and math.isfinite(hi)):
            raise InvalidParameterError(f"mixture component needs 0 <= lo < hi, got [{lo}, {hi}]")
    if not 0.0 < weight < 1.0:
        raise InvalidParameterError(f"mixture weight must lie in (0, 1), got {weight}")
    prm = (float(a1), float(b1), float(a2), float(b2), float(weight))
    return ValueDistribution("mixture", prm, grid_size=grid_size,
                             label=f"Mix(U[{a1:g},{b1:g}],U[{a2:g},{b2:g}];{weight:g})")


def point_mass(value: float = 1.0) -> ValueDistribution:
    if not (value > 0 and math.isfinite(value)):
        raise InvalidParameterError(f"point mass needs a positive value, got {value}")
    return ValueDistribution("pointmass", atoms=((float(value), 1.0),), label=f"PointMass({value:g})")


def discrete(atoms) -> ValueDistribution:
    merged: dict[float, float] = {}
    for v, m in atoms:
        v, m = float(v), float(m)
        if v < 0 or m < 0 or not math.isfinite(v):
            raise InvalidParameterError(f"bad atom ({v}, {m})")
        if m > 0:
            merged[v] = merged.get(v, 0.0) + m
    total = sum(merged.values())
    if not merged or abs(total - 1.0) > 1e-9:
        raise InvalidParameterError(f"atom masses must sum to 1, got {total}")
    items = tuple(sorted((v, m / total) for v, m in merged.items()))
    if len(items) == 1:
        return point_mass(items[0][0])
    return ValueDistribution("discrete", atoms=items, label=f"Discrete({len(items)} atoms)")


SHORTHANDS: dict[str, Callable[[], ValueDistribution]] = {
    "uniform01": uniform,
    "exp1": exponential,
    "pointmass1": point_mass,
}


def parse_distribution(spec) -> ValueDistribution:
    """Build a distribution from a JSON object, JSON text or shorthand name."""
    if isinstance(spec, str):
        text = spec.strip()
        if text in SHORTHANDS:
            return SHORTHANDS[text]()
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"cannot parse distribution spec {text!r}: {exc}") from None
    if not isinstance(spec, dict) or "family" not in spec:
        raise SpecError(f"distribution spec needs a 'family' key: {spec!r}")
    family = spec["family"]
    try:
        if family == "discrete":
            return discrete(spec["atoms"])
        params = [float(x) for x in spec.get("params", [])]
        builders = {
            "uniform": uniform,
            "exp": exponential,
            "pointmass": point_mass,
            "pareto": truncated_pareto,
            "mixture": uniform_mixture,
        }
        if family not in builders:
            raise SpecError(f"unknown family {family!r}")
        return builders[family](*params)
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed {family!r} spec: {exc}") from None


# -- revenue curve and friends --------------------------------------------


def gamma(dist: ValueDistribution, q):
    """Posted-price revenue q * P[V >= q]."""
    q = np.asarray(q, dtype=float)
    return np.asarray(q * dist.survival(q))[()]


@lru_cache(maxsize=64)
def myerson_price(dist: ValueDistribution) -> float:
    """Largest maximizer of the revenue curve."""
    if dist.is_discrete:
        vals = dist.atom_values
        revs = vals * np.cumsum(dist.atom_probs[::-1])[::-1]
        best = revs.max()
        if best <= 0:
            raise DegenerateDistributionError("revenue curve is identically zero")
        idx = np.nonzero(revs >= best - 1e-12)[0][-1]
        return float(vals[idx])
    g = dist.grid()
    rev = gamma(dist, g)
    # right-to-left scan so ties go to the larger price
    i = len(g) - 1 - int(np.argmax(rev[::-1]))
    if rev[i] <= 1e-15:
        raise DegenerateDistributionError("revenue curve is identically zero")
    lo, hi = g[max(i - 1, 0)], g[min(i + 1, len(g) - 1)]
    res = optimize.minimize_scalar(lambda x: -float(gamma(dist, x)), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-13})
    cand = float(res.x)
    if float(gamma(dist, cand)) > rev[i]:
        return cand
    return float(g[i])


def monopoly_revenue(dist: ValueDistribution) -> float:
    """Revenue of the optimal posted price."""
    return float(gamma(dist, myerson_price(dist)))


def virtual_value(dist: ValueDistribution, v: float) -> float:
    if dist.is_discrete:
        raise UnsupportedDistributionError("virtual values need a density")
    dens = float(dist.pdf(v))
    if dens <= 0:
        raise ZeroDensityError(f"density vanishes at v={v}")
    return float(v - (1.0 - dist.cdf(v)) / dens)


def virtual_density(dist: ValueDistribution, v):
    """v f(v) - (1 - F(v)); finite even where the density vanishes."""
    v = np.asarray(v, dtype=float)
    return v * dist.pdf(v) - (1.0 - dist.cdf(v))


def classify_regularity(dist: ValueDistribution, slack: float = REGULARITY_SLACK) -> Regularity:
    """Check monotonicity of the virtual value and of virtual value times density on the grid."""
    if dist.is_discrete:
        raise UnsupportedDistributionError("regularity is only defined for continuous priors")
    g = dist.grid()
    cdf = dist.cdf(g)
    dens = dist.pdf(g)
    tail = 1.0 - cdf
    live = tail > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(dens > 0, g - tail / dens, -np.inf)[live]
    phi_f = g * dens - tail
    regular = bool(np.all(phi[1:] >= phi[:-1] - slack))
    dmr = bool(np.all(phi_f[1:] >= phi_f[:-1] - slack))
    if regular and dmr:
        return Regularity.BOTH
    if regular:
        return Regularity.REGULAR
    if dmr:
        return Regularity.DMR
    return Regularity.NEITHER


@lru_cache(maxsize=16)
def _gamma_profile(dist: ValueDistribution):
    v_star = myerson_price(dist)
    g = np.union1d(dist.grid(), [v_star])
    rev = gamma(dist, g)
    return g, rev, np.maximum.accumulate(rev)


def _discrete_gamma_inverse(dist: ValueDistribution, y: float) -> float:
    tails = np.cumsum(dist.atom_probs[::-1])[::-1]
    prev = 0.0
    for v, tail in zip(dist.atom_values, tails):
        cand = y / tail
        if cand <= v:
            return float(max(cand, prev))
        prev = float(v)
    return prev


def gamma_inverse(dist: ValueDistribution, y):
    """Smallest v with gamma(v) >= y, for 0 <= y <= monopoly revenue."""
    y_arr = np.asarray(y, dtype=float)
    top = monopoly_revenue(dist)
    if np.any(y_arr > top + GAMMA_INVERSE_SLACK) or np.any(y_arr < 0):
        raise OutOfRangeError(f"revenue level outside [0, {top}]")
    y_arr = np.minimum(y_arr, top)
    if dist.is_discrete:
        out = np.array([_discrete_gamma_inverse(dist, t) for t in y_arr.ravel()])
        return out.reshape(y_arr.shape)[()]
    g, _, running = _gamma_profile(dist)
    flat = y_arr.ravel()
    idx = np.searchsorted(running, flat, side="left")
    idx = np.clip(idx, 0, len(g) - 1)
    hi = g[idx].copy()
    lo = g[np.maximum(idx - 1, 0)].copy()
    active = idx > 0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        ok = gamma(dist, mid) >= flat
        hi = np.where(active & ok, mid, hi)
        lo = np.where(active & ~ok, mid, lo)
    return hi.reshape(y_arr.shape)[()]
