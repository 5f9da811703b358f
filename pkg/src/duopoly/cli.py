"""Command-line interface: JSON reports for single runs, CSV for sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import buyer, competition, solvers, suites
from .distributions import (
    classify_regularity,
    gamma_inverse,
    monopoly_revenue,
    myerson_price,
    parse_distribution,
)
from .errors import DomainError, SpecError
from .menus import PricingMenu, SingleLottery, as_menu, parse_menu

SIG_DIGITS = 12


def _round(obj):
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_round(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True)


def _emit(obj) -> None:
    click.echo(dumps(obj))


def _fmt(x: float) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def _emit_csv(header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    click.echo(buf.getvalue(), nl=False)


def load_distribution(spec: str):
    dist = parse_distribution(spec)
    grid = os.environ.get("DUOPOLY_GRID")
    if grid and not dist.is_discrete:
        try:
            dist = dist.with_grid(int(grid))
        except ValueError:
            raise SpecError(f"DUOPOLY_GRID must be an integer, got {grid!r}") from None
    return dist


def _lottery(spec: str) -> SingleLottery:
    parts = spec.split(",")
    if len(parts) == 2 and not spec.lstrip().startswith("{"):
        try:
            return SingleLottery(float(parts[0]), float(parts[1]))
        except ValueError:
            raise SpecError(f"expected a lottery as 'z,p', got {spec!r}") from None
    menu = parse_menu(spec)
    if not isinstance(menu, SingleLottery):
        raise SpecError("this command needs Alice's menu as a single lottery")
    return menu


def _menu_dict(menu) -> dict:
    return menu.to_spec()


@click.group()
def app():
    """Two sellers, one buyer: lottery pricing under sequential search."""


@app.command()
@click.option("--dist", "dist_spec", required=True, help="Distribution spec (JSON or shorthand).")
def dist(dist_spec: str):
    """Summary of a value distribution."""
    d = load_distribution(dist_spec)
    top = monopoly_revenue(d)
    out = {
        "distribution": d.to_spec(),
        "kind": d.kind.value,
        "support_max": d.support_max,
        "grid_size": d.grid_size,
        "myerson_price": myerson_price(d),
        "monopoly_revenue": top,
        "half_revenue_price": float(gamma_inverse(d, 0.5 * top)),
    }
    if not d.is_discrete:
        out["regularity"] = classify_regularity(d).value
    _emit(out)


@app.command("buyer")
@click.option("--alice", required=True, help="Alice's menu spec.")
@click.option("--bob", required=True, help="Bob's menu spec.")
@click.option("--v", "value", required=True, type=float, help="Buyer value.")
def buyer_cmd(alice: str, bob: str, value: float):
    """Buyer's best response to a pair of menus."""
    a, b = parse_menu(alice), parse_menu(bob)
    choice = buyer.best_response(a, b, value)
    out = choice.to_dict()
    out["region"] = buyer.region_of(choice).value
    _emit(out)


@app.command()
@click.option("--dist", "dist_spec", required=True)
@click.option("--nudge", type=float, default=None, help="Amount subtracted from Alice's price.")
def stackelberg(dist_spec: str, nudge: Optional[float]):
    """Alice's half-probability lottery against Bob's best posted price."""
    _emit(solvers.stackelberg_outcome(load_distribution(dist_spec), nudge=nudge).to_dict())


@app.command("best-response")
@click.option("--alice", required=True, help="Alice's single lottery.")
@click.option("--dist", "dist_spec", required=True)
@click.option("--search-budget", type=int, default=solvers.SEARCH_BUDGET, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def best_response(alice: str, dist_spec: str, search_budget: int, seed: int):
    """Bob's best posted price and a searched menu challenger."""
    rep = solvers.bob_menu_search(_lottery(alice), load_distribution(dist_spec), budget=search_budget, seed=seed)
    _emit(rep.to_dict())


@app.command("one-over-e")
@click.option("--dist", "dist_spec", required=True)
@click.option("--grid", type=int, default=solvers.ONE_OVER_E_GRID, show_default=True)
def one_over_e(dist_spec: str, grid: int):
    """Alice's 1/e menu and the revenues when Bob posts the Myerson price."""
    d = load_distribution(dist_spec)
    menu = solvers.alice_one_over_e_menu(d, grid=grid)
    top, v_star = monopoly_revenue(d), myerson_price(d)
    rb, ra = solvers.posted_price_curve(menu, d, [v_star])
    _emit({
        "x_bar": menu.x_bar,
        "breakpoints": len(menu.breakpoints),
        "price_at_x_bar": menu.prices[-1],
        "monopoly_revenue": top,
        "plateau": top / math.e,
        "entry_value": float(gamma_inverse(d, top / math.e)),
        "myerson_price": v_star,
        "rev_alice_at_myerson_price": ra[0],
        "rev_bob_at_myerson_price": rb[0],
    })


@app.command("aux-dist")
@click.option("--dist", "dist_spec", required=True)
@click.option("--alice", "--lottery", "alice", required=True, help="Alice's single lottery (menu spec or 'z,p').")
@click.option("--s", "threshold", required=True, help="Threshold type (a number or 'inf').")
@click.option("--points", type=int, default=101, show_default=True)
@click.option("--csv", "--sweep", "as_csv", is_flag=True, help="Emit CSV rows instead of JSON.")
def aux_dist(dist_spec: str, alice: str, threshold: str, points: int, as_csv: bool):
    """Density, CDF and revenue curve of the auxiliary prior."""
    d = load_distribution(dist_spec)
    try:
        s = float(threshold)
    except ValueError:
        raise SpecError(f"threshold must be a number, got {threshold!r}") from None
    aux = competition.aux_distribution(d, _lottery(alice), s)
    vs = np.linspace(0.0, d.support_max, points)
    fs = aux.pdf(vs) if not d.is_discrete else np.full_like(vs, math.nan)
    rows = list(zip(vs, fs, aux.cdf(vs), aux.gamma(vs)))
    if as_csv:
        _emit_csv(["v", "f_s", "F_s", "Gamma_s"], rows)
        return
    _emit({
        "threshold": aux.s,
        "atom_at_zero": aux.atom_at_zero,
        "dead_zone": list(aux.dead_zone),
        "rows": [dict(zip(("v", "f_s", "F_s", "Gamma_s"), r)) for r in rows],
    })


@app.command("nash-check")
@click.option("--alice", required=True)
@click.option("--bob", required=True)
@click.option("--dist", "dist_spec", default="pointmass1", show_default=True)
@click.option("--step", type=float, default=1e-3, show_default=True)
def nash_check(alice: str, bob: str, dist_spec: str, step: float):
    """Search single-lottery deviations for both sellers at a point mass."""
    rep = solvers.nash_deviation_search(parse_menu(alice), parse_menu(bob), load_distribution(dist_spec), step=step)
    _emit(rep.to_dict())


@app.group()
def sweep():
    """Parameter sweeps (CSV with --csv)."""


@sweep.command("posted-price")
@click.option("--alice", required=True)
@click.option("--dist", "dist_spec", required=True)
@click.option("--q-max", type=float, default=None, help="Largest price (default: top of the support).")
@click.option("--points", type=int, default=101, show_default=True)
@click.option("--csv", "as_csv", is_flag=True)
def sweep_posted_price(alice: str, dist_spec: str, q_max: Optional[float], points: int, as_csv: bool):
    """Bob's revenue for each posted price q."""
    d = load_distribution(dist_spec)
    a = parse_menu(alice)
    qs = np.linspace(0.0, d.support_max if q_max is None else q_max, points)
    if isinstance(a, SingleLottery):
        rb = np.array([competition.rev_fixed_price(a, float(q), d) for q in qs])
    else:
        rb, _ = solvers.posted_price_curve(a, d, qs)
    if as_csv:
        _emit_csv(["q", "rev_bob"], zip(qs, rb))
    else:
        _emit({"q": qs, "rev_bob": rb})


@app.command()
@click.argument("suite_id")
@click.option("--dist", "dist_spec", default=None, help="Restrict distribution-specific suites to one prior.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cases", type=int, default=None, help="Override the number of sampled cases.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory for a JSON artifact per suite.")
def verify(suite_id: str, dist_spec: Optional[str], seed: int, cases: Optional[int], out_dir: Optional[str]):
    """Run a named verification suite, or 'all'."""
    if suite_id != "all" and suite_id not in suites.SUITES:
        raise click.UsageError(f"unknown suite {suite_id!r}; choose from: all, " + ", ".join(suites.SUITES))
    kwargs = {"seed": seed}
    if dist_spec is not None:
        kwargs["dist"] = load_distribution(dist_spec)
    if cases is not None:
        kwargs["cases"] = cases
    ids = list(suites.SUITES) if suite_id == "all" else [suite_id]
    results = []
    for sid in ids:
        res = suites.run_suite(sid, **kwargs)
        if out_dir is not None:
            path = Path(out_dir) / f"{sid}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            res = suites.VerificationSuiteResult(res.suite_id, res.cases_run, res.cases_passed,
                                                 res.worst_violation, (str(path),), res.details)
            path.write_text(dumps(res.to_dict()) + "\n")
        results.append(res)
    _emit(results[0].to_dict() if len(results) == 1 else {"suites": [r.to_dict() for r in results]})
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    try:
        rv = app.main(args=argv, prog_name="duopoly", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except SpecError as exc:
        click.echo(f"Error: {exc}", err=True)
        return 2
    except DomainError as exc:
        click.echo(f"Error: {type(exc).__name__}: {exc}", err=True)
        return 3
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
