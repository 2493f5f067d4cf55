"""Equilibrium bidding in the hybrid block-builder auction with private values.

Setting: ``n_integrated`` builders bid truthfully (for them the auction is
second-price), while ``n_neutral`` builders are in a pay-your-bid regime.
From a neutral builder's perspective the truthful integrated bids act as a
secret random reserve with CDF ``F_integrated(b) ** n_integrated``, so the
symmetric equilibrium bid schedule solves the shading identity

    bid(v) = v - (integral of G(t) dt from support bottom to v) / G(v),
    G(t)   = F_neutral(t)**(n_neutral-1) * F_integrated(bid(t))**n_integrated,

which equates pay-your-bid surplus ``(v - bid(v)) * G(v)`` with the surplus
pinned down by the win-probability envelope ``integral of G``.

Two independent solvers are provided and cross-checked by the test suite:

- :func:`solve_fixed_point`: damped iteration of the shading identity on a
  quantile-spaced value grid, with an isotonic projection each sweep.
- :func:`solve_ode`: adaptive Runge-Kutta integration of the differentiated
  identity (requires at least two neutral bidders).

The identity is 0/0 at the bottom of the support; both solvers anchor that
region with the local power-law asymptote ``bid ~ lo + c * (v - lo)`` where
``c = k / (k + 1)`` and ``k`` is the combined lower-tail exponent of G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .distributions import ValueDistribution, lower_tail_exponent

__all__ = [
    "HybridAuctionConfig",
    "BidFunction",
    "EquilibriumSolution",
    "SolverError",
    "OdeSingularityError",
    "EnvelopeReport",
    "BestResponseReport",
    "solve_fixed_point",
    "solve_ode",
    "closed_form_single_neutral",
    "surplus_single_neutral",
    "winning_probability",
    "verify_envelope",
    "verify_best_response",
]

# division guard for the vanishing win probability at the support bottom
_G_FLOOR = 1e-300

# quantile cap for laws with unbounded upper support
_TOP_Q = 1.0 - 1e-6


class SolverError(RuntimeError):
    """Solver failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class OdeSingularityError(SolverError):
    """The bid-schedule ODE left its admissible domain (denominator <= 0)."""

    def __init__(self, location: float):
        super().__init__(f"ODE singularity at v={location:.6g}")
        self.location = location


@dataclass(frozen=True)
class HybridAuctionConfig:
    """Hybrid auction primitives.

    ``n_integrated`` may be 0, which drops the reserve entirely and reduces
    the model to a standard symmetric first-price auction among the neutral
    builders.
    """

    n_integrated: int
    n_neutral: int
    integrated_values: ValueDistribution
    neutral_values: ValueDistribution

    def __post_init__(self):
        if self.n_integrated < 0 or self.n_neutral < 1:
            raise ValueError("need n_integrated >= 0 and n_neutral >= 1")
        if self.n_integrated == 0 and self.n_neutral == 1:
            raise ValueError("degenerate auction: a single neutral bidder with "
                             "no integrated competition has no interior bid")
        for d in (self.integrated_values, self.neutral_values):
            if d.support[0] < 0.0:
                raise ValueError("value supports must be nonnegative")

    def reserve_cdf(self, b):
        """CDF of the effective reserve: the highest truthful integrated bid."""
        if self.n_integrated == 0:
            return np.ones_like(np.asarray(b, dtype=float))
        return self.integrated_values.cdf(b) ** self.n_integrated

    def rival_cdf(self, v):
        """Probability that all other neutral builders have value below v."""
        if self.n_neutral == 1:
            return np.ones_like(np.asarray(v, dtype=float))
        return self.neutral_values.cdf(v) ** (self.n_neutral - 1)

    def describe(self) -> dict:
        return {
            "n_integrated": self.n_integrated,
            "n_neutral": self.n_neutral,
            "integrated_values": _describe_dist(self.integrated_values),
            "neutral_values": _describe_dist(self.neutral_values),
        }


def _describe_dist(d: ValueDistribution) -> dict:
    out = {"kind": d.kind}
    for name in ("lo", "hi", "alpha", "beta", "log_mean", "log_sd"):
        if hasattr(d, name):
            out[name] = getattr(d, name)
    if d.kind == "empirical-grid":
        out["n_points"] = int(d.points.size)
        out["lo"], out["hi"] = d.support
    return out


@dataclass(frozen=True, eq=False)
class BidFunction:
    """Monotone bid schedule on a value grid, piecewise-linear in between."""

    values: np.ndarray
    bids: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        b = np.asarray(self.bids, dtype=float)
        if v.shape != b.shape or v.ndim != 1 or v.size < 2:
            raise ValueError("values and bids must be matching 1-d arrays")
        if np.any(np.diff(v) <= 0.0):
            raise ValueError("value grid must be strictly increasing")
        if np.any(np.diff(b) <= 0.0):
            raise ValueError("bids must be strictly increasing")
        if np.any(b < -1e-12) or np.any(b > v + 1e-12):
            raise ValueError("bids must lie in [0, v]")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bids", b)

    def __call__(self, v):
        return np.interp(v, self.values, self.bids)

    def inverse(self, b):
        """Value whose bid is b; clamps to the grid ends outside the range."""
        return np.interp(b, self.bids, self.values)


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    config: HybridAuctionConfig
    bid_function: BidFunction
    win_prob: np.ndarray
    surplus: np.ndarray
    residual: float
    method: str
    iterations: int
    tol: float
    converged: bool = True
    anchor_points: int = field(default=0, repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.bid_function.values

    @property
    def bids(self) -> np.ndarray:
        return self.bid_function.bids

    def table(self) -> dict[str, np.ndarray]:
        """Column view used by the CSV writer (header ``v,sigma,x,S``)."""
        return {"v": self.values, "sigma": self.bids,
                "x": self.win_prob, "S": self.surplus}

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "grid_size": int(self.values.size),
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "tol": float(self.tol),
            "converged": bool(self.converged),
        }


# ------------------------------ grid machinery -------------------------------


def _value_grid(config: HybridAuctionConfig, grid_size: int) -> np.ndarray:
    """Equal-probability grid over the neutral value support."""
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    top_q = 1.0 if math.isfinite(config.neutral_values.support[1]) else _TOP_Q
    q = np.linspace(0.0, top_q, grid_size)
    grid = np.asarray(config.neutral_values.quantile(q), dtype=float)
    grid = np.unique(grid)
    if grid.size < 64:
        raise ValueError("value grid collapsed; distribution too concentrated")
    return grid


def _tail_exponent(config: HybridAuctionConfig, lo: float, first_step: float) -> float:
    """Combined lower-tail exponent k of G(v) near the support bottom."""
    k_rivals = 0.0
    if config.n_neutral > 1:
        k_rivals = (config.n_neutral - 1) * lower_tail_exponent(
            config.neutral_values, lo, first_step)
    k_reserve = 0.0
    if config.n_integrated > 0:
        k_reserve = config.n_integrated * lower_tail_exponent(
            config.integrated_values, lo, first_step)
    return k_rivals + k_reserve


def _power_cumint(values: np.ndarray, g: np.ndarray, lo: float,
                  tail_k: float) -> np.ndarray:
    """Cumulative integral of g over the grid, exact on power-law cells.

    Each cell is integrated with the one-parameter model g ~ A*(t-lo)**kappa
    fitted through its endpoints; plain trapezoid is the kappa->0 special
    case but has an O(1) relative error on the steep cells next to the
    boundary (kappa can reach n_integrated*alpha + (n_neutral-1)*alpha for
    Beta-type laws), which would poison the whole fixed point.
    """
    u = values - lo
    u0, u1 = u[:-1], u[1:]
    g0, g1 = g[:-1], g[1:]
    cells = 0.5 * (g0 + g1) * (u1 - u0)  # trapezoid fallback

    # boundary cells: g rises from 0 at the support bottom like u**tail_k
    from_zero = (u0 <= 0.0) | (g0 <= 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        boundary = g1 * u1 / (tail_k + 1.0)
        ok = from_zero & (u0 <= 0.0)
        cells = np.where(ok, boundary, cells)

        interior = ~from_zero & (g1 > 0.0) & (u1 > u0 * (1.0 + 1e-12))
        kappa = np.log(np.where(interior, g1 / np.where(g0 > 0, g0, 1.0), 1.0)) \
            / np.log(np.where(interior, u1 / np.where(u0 > 0, u0, 1.0), math.e))
        kappa = np.clip(kappa, -0.5, 1e4)
        power = (g1 * u1 - g0 * u0) / (kappa + 1.0)
        cells = np.where(interior, power, cells)

    out = np.empty_like(g)
    out[0] = 0.0
    np.cumsum(cells, out=out[1:])
    return out


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out


def _isotonic(y: np.ndarray) -> np.ndarray:
    """L2 projection onto nondecreasing sequences (pool adjacent violators)."""
    d = np.diff(y)
    if not np.any(d < 0.0):
        return y
    vals: list[float] = []
    counts: list[int] = []
    for x in y:
        vals.append(float(x))
        counts.append(1)
        while len(vals) > 1 and vals[-1] < vals[-2]:
            v2, c2 = vals.pop(), counts.pop()
            v1, c1 = vals.pop(), counts.pop()
            vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            counts.append(c1 + c2)
    return np.repeat(vals, counts)


def _strictly_increasing(b: np.ndarray) -> np.ndarray:
    """Break exact ties upward by the smallest representable step."""
    out = b.copy()
    for i in range(1, out.size):
        if out[i] <= out[i - 1]:
            out[i] = np.nextafter(out[i - 1], math.inf)
    return out


def _equation_defect(config: HybridAuctionConfig, values: np.ndarray,
                     bids: np.ndarray, lo: float, tail_k: float,
                     skip: np.ndarray) -> tuple[np.ndarray, float]:
    """Pointwise defect of the shading identity; ``skip`` marks anchor points."""
    g = config.rival_cdf(values) * config.reserve_cdf(bids)
    integral = _power_cumint(values, g, lo, tail_k)
    usable = (g > _G_FLOOR) & ~skip
    defect = np.zeros_like(values)
    np.divide(integral, g, out=defect, where=usable)
    defect = np.abs(np.where(usable, bids - (values - defect), 0.0))
    sup = float(defect.max()) if np.any(usable) else 0.0
    return defect, sup


def _prepare(config: HybridAuctionConfig, grid_size: int):
    grid = _value_grid(config, grid_size)
    lo = float(grid[0])
    width = float(grid[-1] - lo)
    if config.n_neutral == 1 and lo > 1e-12:
        raise ValueError("single neutral bidder requires a value support "
                         "starting at 0")
    eps_v = width / grid_size
    tail_k = _tail_exponent(config, lo, max(eps_v, float(grid[1] - lo)) / 2.0)
    if tail_k <= 0.0:
        raise SolverError("flat lower tail: no interior shading slope exists")
    slope = tail_k / (tail_k + 1.0)
    anchor = grid <= lo + eps_v
    anchor[0] = True
    line = lo + slope * (grid - lo)
    return grid, lo, eps_v, tail_k, slope, anchor, line


def _finish(config, grid, bids, residual, method, iterations, tol,
            anchor_count, lo, tail_k) -> EquilibriumSolution:
    bids = _strictly_increasing(np.clip(bids, 0.0, grid))
    bid_function = BidFunction(grid, bids)
    x = config.rival_cdf(grid) * config.reserve_cdf(bids)
    surplus = _power_cumint(grid, x, lo, tail_k)
    return EquilibriumSolution(
        config=config, bid_function=bid_function, win_prob=x, surplus=surplus,
        residual=residual, method=method, iterations=iterations, tol=tol,
        converged=True, anchor_points=anchor_count)


# --------------------------------- solvers -----------------------------------


def solve_fixed_point(config: HybridAuctionConfig, grid_size: int = 512,
                      tol: float = 1e-6, max_iter: int = 10_000,
                      damping: float = 0.5) -> EquilibriumSolution:
    """Solve the shading identity by damped fixed-point iteration.

    Each sweep maps the current schedule through the identity's right-hand
    side, blends with weight ``damping``, projects back onto monotone
    schedules and clamps into [0, v]. Success means the sup-norm defect of
    the identity is at most ``tol`` away from the anchored boundary region.
    """
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must be in (0, 1]")
    grid, lo, eps_v, tail_k, slope, anchor, line = _prepare(config, grid_size)

    bids = line.copy()
    for iteration in range(max_iter + 1):
        g = config.rival_cdf(grid) * config.reserve_cdf(bids)
        integral = _power_cumint(grid, g, lo, tail_k)
        usable = (g > _G_FLOOR) & ~anchor
        mapped = line.copy()
        ratio = np.zeros_like(grid)
        np.divide(integral, g, out=ratio, where=usable)
        mapped[usable] = grid[usable] - ratio[usable]

        residual = float(np.abs(bids - mapped)[usable].max()) if np.any(usable) else 0.0
        if residual <= tol:
            return _finish(config, grid, bids, residual, "fixed-point",
                           iteration, tol, int(anchor.sum()), lo, tail_k)

        bids = (1.0 - damping) * bids + damping * mapped
        bids = _isotonic(bids)
        np.clip(bids, 0.0, grid, out=bids)
        bids[anchor] = line[anchor]

    raise SolverError(
        f"fixed point did not reach tol={tol:g} after {max_iter} sweeps "
        f"(last residual {residual:.3g})", residual=residual)


def solve_ode(config: HybridAuctionConfig, grid_size: int = 512,
              tol: float = 1e-9) -> EquilibriumSolution:
    """Integrate the differentiated shading identity with adaptive RK45.

    Valid for two or more neutral bidders (with a single one the identity
    does not differentiate into an ODE; use :func:`solve_fixed_point` or the
    closed form). Leaving the admissible region, where the reserve CDF term
    minus its density correction turns nonpositive, raises
    :class:`OdeSingularityError`; callers fall back to the fixed point.
    """
    if config.n_neutral < 2:
        raise ValueError("ODE route needs at least two neutral bidders")
    grid, lo, eps_v, tail_k, slope, anchor, line = _prepare(config, grid_size)
    v_start = lo + eps_v
    top = float(grid[-1])
    n_int = config.n_integrated
    n_neu = config.n_neutral
    f_neu, big_f_neu = config.neutral_values.pdf, config.neutral_values.cdf
    f_int, big_f_int = config.integrated_values.pdf, config.integrated_values.cdf

    def _denominator(v, b):
        return float(big_f_int(b)) - n_int * (v - b) * float(f_int(b))

    def rhs(v, y):
        b = min(float(y[0]), v)  # the schedule never crosses the diagonal
        hazard = float(f_neu(v)) / max(float(big_f_neu(v)), _G_FLOOR)
        base = (n_neu - 1) * hazard * (v - b)
        if n_int == 0:
            return [base]
        reserve = float(big_f_int(b))
        den = reserve - n_int * (v - b) * float(f_int(b))
        if den <= 0.0 or reserve <= _G_FLOOR:
            # poisoned slope: trial stages that stray past the admissible edge
            # get rejected by the error controller instead of aborting
            return [1e8]
        return [base * reserve / den]

    def domain_edge(v, y):
        return _denominator(v, min(float(y[0]), v))

    domain_edge.terminal = True
    domain_edge.direction = -1.0

    sol = solve_ivp(rhs, (v_start, top), [lo + slope * eps_v],
                    method="RK45", rtol=tol, atol=tol * max(top - lo, 1.0),
                    t_eval=grid[grid >= v_start - 1e-15],
                    events=None if n_int == 0 else domain_edge,
                    first_step=eps_v / 2.0, max_step=(top - lo) / 16.0)
    if sol.status == 1 and sol.t_events and sol.t_events[0].size:
        raise OdeSingularityError(float(sol.t_events[0][0]))
    if not sol.success:
        raise SolverError(f"ODE integration failed: {sol.message}")

    bids = line.copy()
    bids[grid >= v_start - 1e-15] = sol.y[0]
    bids = np.minimum(bids, grid)
    _, residual = _equation_defect(config, grid, bids, lo, tail_k, anchor)
    return _finish(config, grid, bids, residual, "ode", int(sol.nfev), tol,
                   int(anchor.sum()), lo, tail_k)


# ------------------------------- closed forms ---------------------------------


def closed_form_single_neutral(n_integrated: int, v):
    """Equilibrium bid of the single neutral builder against ``n_integrated``
    truthful uniform-[0,1] rivals: a constant shading factor n/(n+1)."""
    if n_integrated < 1:
        raise ValueError("need at least one integrated builder")
    return n_integrated * np.asarray(v, dtype=float) / (n_integrated + 1)


def surplus_single_neutral(n_integrated: int, v) -> tuple:
    """Interim surplus of the single neutral builder, its counterfactual
    surplus were it integrated, and the ratio of the two."""
    if n_integrated < 1:
        raise ValueError("need at least one integrated builder")
    v = np.asarray(v, dtype=float)
    ratio = (n_integrated / (n_integrated + 1)) ** n_integrated
    integrated = v ** (n_integrated + 1) / (n_integrated + 1)
    return ratio * integrated, integrated, ratio


# ------------------------------ verification ----------------------------------


def winning_probability(solution: EquilibriumSolution, v):
    """Win probability of a neutral builder with value v under the solution."""
    bids = solution.bid_function(v)
    return solution.config.rival_cdf(v) * solution.config.reserve_cdf(bids)


@dataclass(frozen=True)
class EnvelopeReport:
    max_defect: float
    at_value: float
    defects: np.ndarray = field(repr=False, default=None)


def verify_envelope(solution: EquilibriumSolution) -> EnvelopeReport:
    """Check surplus consistency: (v - bid) * x(v) against the trapezoid
    integral of x up to v. Large defects flag a wrong schedule."""
    v = solution.values
    direct = (v - solution.bids) * solution.win_prob
    accumulated = _cumtrapz(solution.win_prob, v)
    defects = np.abs(direct - accumulated)
    i = int(np.argmax(defects))
    return EnvelopeReport(float(defects[i]), float(v[i]), defects)


@dataclass(frozen=True)
class BestResponseReport:
    max_gain: float
    at_value: float
    gains: np.ndarray = field(repr=False, default=None)


def verify_best_response(config: HybridAuctionConfig,
                         solution: EquilibriumSolution,
                         value_grid: np.ndarray | None = None,
                         bid_grid: np.ndarray | None = None) -> BestResponseReport:
    """Grid-search for profitable deviations from the solved schedule.

    For each candidate value the payoff of every candidate bid is evaluated
    against rivals playing the schedule (bids below the schedule range beat
    rivals with the bottom-grid probability, bids above it win the rival
    contest outright); at an equilibrium the best gain over the scheduled bid
    is nonpositive up to discretization.
    """
    v_grid = solution.values
    if value_grid is None:
        value_grid = np.linspace(v_grid[0], v_grid[-1], 21)
    if bid_grid is None:
        bid_grid = np.linspace(0.0, v_grid[-1], 200)
    value_grid = np.asarray(value_grid, dtype=float)
    bid_grid = np.asarray(bid_grid, dtype=float)

    inv = solution.bid_function.inverse(bid_grid)
    rival_at_bid = np.asarray(config.rival_cdf(inv), dtype=float)
    rival_at_bid = np.where(bid_grid > solution.bids[-1], 1.0, rival_at_bid)
    win_at_bid = rival_at_bid * config.reserve_cdf(bid_grid)

    payoff = (value_grid[:, None] - bid_grid[None, :]) * win_at_bid[None, :]
    sched_bids = solution.bid_function(value_grid)
    sched_payoff = (value_grid - sched_bids) * np.asarray(
        config.rival_cdf(value_grid), dtype=float) * config.reserve_cdf(sched_bids)
    gains = payoff.max(axis=1) - sched_payoff
    i = int(np.argmax(gains))
    return BestResponseReport(float(gains[i]), float(value_grid[i]), gains)
