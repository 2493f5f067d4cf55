"""Monte Carlo verification of the solved auction equilibria.

Plays both auctions with the analytic strategies and reports class-level
revenue, surplus and win rates with 95% confidence half-widths, so every
equilibrium claim (zero profit, win probabilities, surplus splits) can be
checked statistically against its closed-form counterpart.

Randomness is counter-based and replication-addressable: replication ``r``
draws a fixed-width row of uniforms from the Philox stream of block
``r // BLOCK_SIZE`` (one counter block per batch), so the outcome of any
replication is a pure function of ``(seed, r)`` - independent of the total
replication count, scheduling or worker count. All values are produced by
inverse-transform sampling of those uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .common_values import (CandlestickConfig, CandlestickSolution,
                            PriceProcess, law_of_v_delta, solve_candlestick)
from .private_equilibrium import (EquilibriumSolution, HybridAuctionConfig,
                                  solve_fixed_point)

__all__ = [
    "BLOCK_SIZE",
    "ReplicationRng",
    "HybridOutcome",
    "Stat",
    "SimReport",
    "pick_winners",
    "run_hybrid_auction_once",
    "hybrid_outcomes",
    "simulate_hybrid",
    "candlestick_outcomes",
    "simulate_candlestick",
    "sweep",
]

BLOCK_SIZE = 8192
_MIN_REPS = 10_000  # below this the normal-approximation intervals get shaky
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class ReplicationRng:
    """Counter-based stream factory: block b gets its own Philox counter range."""

    seed: int

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be a 64-bit nonnegative integer")

    def block_stream(self, block: int) -> np.random.Generator:
        # disjoint 2**128-draw counter ranges; a block never exhausts its range
        return np.random.Generator(np.random.Philox(key=self.seed, counter=block << 128))


def _block_sizes(reps: int):
    full, rem = divmod(reps, BLOCK_SIZE)
    for b in range(full):
        yield b, BLOCK_SIZE
    if rem:
        yield full, rem


class _RunningStat:
    """Mergeable count/mean/M2 accumulator (parallel Welford update)."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n, self.mean, self.m2 = 0, 0.0, 0.0

    def add_block(self, arr: np.ndarray):
        m = arr.size
        if m == 0:
            return
        b_mean = float(arr.mean())
        b_m2 = float(arr.var()) * m
        delta = b_mean - self.mean
        total = self.n + m
        self.mean += delta * m / total
        self.m2 += b_m2 + delta * delta * self.n * m / total
        self.n = total

    def stat(self) -> "Stat":
        sd = math.sqrt(self.m2 / (self.n - 1)) if self.n > 1 else 0.0
        return Stat(self.mean, _Z95 * sd / math.sqrt(self.n))


@dataclass(frozen=True)
class Stat:
    mean: float
    half_width: float


@dataclass(frozen=True)
class SimReport:
    """Aggregated Monte Carlo estimates; a pure function of (config, solution,
    reps, seed), bit-identical across reruns."""

    model: str
    reps: int
    seed: int
    config: dict
    stats: dict[str, Stat]
    analytic: dict[str, float]
    checks: list[dict] = field(default_factory=list)

    @property
    def agreement_ok(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "reps": self.reps,
            "seed": self.seed,
            "config": self.config,
            "stats": {k: {"mean": s.mean, "half_width": s.half_width}
                      for k, s in self.stats.items()},
            "analytic": self.analytic,
            "checks": self.checks,
            "agreement_ok": self.agreement_ok,
        }


def _check(name: str, stat: Stat, target: float) -> dict:
    return {
        "name": name,
        "estimate": stat.mean,
        "target": target,
        "half_width": stat.half_width,
        "ok": bool(abs(stat.mean - target) <= 3.0 * stat.half_width),
    }


# --------------------------------- hybrid -------------------------------------


def pick_winners(bids: np.ndarray, tie_u: np.ndarray) -> np.ndarray:
    """Row-wise argmax with uniform random tie-breaking among top bids."""
    winners = np.argmax(bids, axis=1)
    top = bids[np.arange(bids.shape[0]), winners]
    tie_rows = np.flatnonzero((bids == top[:, None]).sum(axis=1) > 1)
    for r in tie_rows:
        tied = np.flatnonzero(bids[r] == top[r])
        winners[r] = tied[min(int(tie_u[r] * tied.size), tied.size - 1)]
    return winners


def _hybrid_draw_width(config: HybridAuctionConfig) -> int:
    return config.n_integrated + config.n_neutral + 1  # values + tie-break


def _hybrid_block(config: HybridAuctionConfig, solution: EquilibriumSolution,
                  u: np.ndarray) -> dict[str, np.ndarray]:
    """Play one batch of auctions from a matrix of uniforms (one row per rep)."""
    n_int, n_neu = config.n_integrated, config.n_neutral
    m = u.shape[0]
    vals_int = np.asarray(config.integrated_values.quantile(u[:, :n_int]),
                          dtype=float).reshape(m, n_int)
    vals_neu = np.asarray(config.neutral_values.quantile(u[:, n_int:n_int + n_neu]),
                          dtype=float).reshape(m, n_neu)
    bids_neu = solution.bid_function(vals_neu)

    values = np.concatenate([vals_int, vals_neu], axis=1)
    bids = np.concatenate([vals_int, bids_neu], axis=1)  # integrated bid truthfully
    winner = pick_winners(bids, u[:, -1])
    rows = np.arange(m)
    winning_bid = bids[rows, winner]
    runner_up = np.partition(bids, -2, axis=1)[:, -2]
    integrated_won = winner < n_int

    # integrated winners pay the next-highest bid, neutral winners their own
    payment = np.where(integrated_won, runner_up, winning_bid)
    winner_value = values[rows, winner]
    return {
        "winner": winner,
        "integrated_won": integrated_won,
        "winning_bid": winning_bid,
        "payment": payment,
        "winner_value": winner_value,
        "surplus": winner_value - payment,
    }


@dataclass(frozen=True)
class HybridOutcome:
    """One auction play: who won, what they paid, who earned what."""

    winner_class: str
    winner_index: int
    payment: float
    revenue: float
    surplus: np.ndarray  # per bidder, integrated first; losers hold 0


def run_hybrid_auction_once(config: HybridAuctionConfig,
                            solution: EquilibriumSolution,
                            rng: np.random.Generator) -> HybridOutcome:
    """Draw one replication from ``rng`` and resolve the auction."""
    u = rng.random((1, _hybrid_draw_width(config)))
    out = _hybrid_block(config, solution, u)
    n = config.n_integrated + config.n_neutral
    surplus = np.zeros(n)
    w = int(out["winner"][0])
    surplus[w] = float(out["surplus"][0])
    return HybridOutcome(
        winner_class="integrated" if out["integrated_won"][0] else "neutral",
        winner_index=w,
        payment=float(out["payment"][0]),
        revenue=float(out["payment"][0]),
        surplus=surplus,
    )


def hybrid_outcomes(config: HybridAuctionConfig, solution: EquilibriumSolution,
                    reps: int, seed: int) -> dict[str, np.ndarray]:
    """Materialize per-replication outcome arrays (tests and diagnostics)."""
    rng = ReplicationRng(seed)
    width = _hybrid_draw_width(config)
    parts = []
    for block, m in _block_sizes(reps):
        u = rng.block_stream(block).random((m, width))
        parts.append(_hybrid_block(config, solution, u))
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def _hybrid_analytic(config: HybridAuctionConfig,
                     solution: EquilibriumSolution) -> dict[str, float]:
    # the solution grid is quantile-spaced, so expectations over the neutral
    # value law are plain integrals against the grid's CDF levels
    q = np.asarray(config.neutral_values.cdf(solution.values), dtype=float)
    per_bidder_surplus = float(np.trapezoid(solution.surplus, q))
    neutral_rate = config.n_neutral * float(np.trapezoid(solution.win_prob, q))
    return {
        "surplus_neutral_per_bidder": per_bidder_surplus,
        "win_rate_neutral": neutral_rate,
        "win_rate_integrated": 1.0 - neutral_rate,
    }


def simulate_hybrid(config: HybridAuctionConfig, solution: EquilibriumSolution,
                    reps: int, seed: int) -> SimReport:
    """Aggregate ``reps`` independent hybrid auctions into a SimReport and
    compare against the analytic surplus and win rates at 3 half-widths."""
    if reps < _MIN_REPS:
        raise ValueError(f"need at least {_MIN_REPS} replications")
    rng = ReplicationRng(seed)
    width = _hybrid_draw_width(config)
    acc = {name: _RunningStat() for name in
           ("revenue", "win_rate_integrated", "win_rate_neutral",
            "surplus_integrated_per_bidder", "surplus_neutral_per_bidder")}
    n_int = max(config.n_integrated, 1)
    for block, m in _block_sizes(reps):
        u = rng.block_stream(block).random((m, width))
        out = _hybrid_block(config, solution, u)
        won_int = out["integrated_won"]
        acc["revenue"].add_block(out["payment"])
        acc["win_rate_integrated"].add_block(won_int.astype(float))
        acc["win_rate_neutral"].add_block((~won_int).astype(float))
        acc["surplus_integrated_per_bidder"].add_block(
            np.where(won_int, out["surplus"], 0.0) / n_int)
        acc["surplus_neutral_per_bidder"].add_block(
            np.where(~won_int, out["surplus"], 0.0) / config.n_neutral)

    stats = {k: a.stat() for k, a in acc.items()}
    analytic = _hybrid_analytic(config, solution)
    checks = [_check(name, stats[name], analytic[name]) for name in analytic]
    return SimReport(model="hybrid", reps=reps, seed=seed,
                     config=config.describe(), stats=stats, analytic=analytic,
                     checks=checks)


# ------------------------------- candlestick ----------------------------------


def _candlestick_block(config: CandlestickConfig, solution: CandlestickSolution,
                       n_slow: int, u: np.ndarray) -> dict[str, np.ndarray]:
    """One batch of candlestick auctions from uniforms (tie, revision, value)."""
    process, p = config.process, config.p
    b0s = solution.b0s
    m = u.shape[0]
    slow_winner = np.minimum((u[:, 0] * n_slow).astype(int), n_slow - 1)
    revised = u[:, 1] < p
    if process.is_degenerate:
        v_delta = np.full(m, process.v0)
    else:
        v_delta = np.asarray(law_of_v_delta(process).quantile(u[:, 2]), dtype=float)

    fast_won = revised & (v_delta > b0s)  # strict: ties stay with the slow bid
    # without a revision the value stays at its time-0 level for the winner
    slow_value = np.where(revised, v_delta, process.v0)
    slow_profit = np.where(fast_won, 0.0, slow_value - b0s)
    fast_profit = np.where(fast_won, v_delta - b0s, 0.0)
    return {
        "slow_winner": slow_winner,
        "fast_won": fast_won,
        "revenue": np.full(m, b0s),
        "slow_profit": slow_profit,
        "fast_profit": fast_profit,
    }


def candlestick_outcomes(config: CandlestickConfig, solution: CandlestickSolution,
                         n_slow: int, reps: int, seed: int) -> dict[str, np.ndarray]:
    rng = ReplicationRng(seed)
    parts = []
    for block, m in _block_sizes(reps):
        u = rng.block_stream(block).random((m, 3))
        parts.append(_candlestick_block(config, solution, n_slow, u))
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def simulate_candlestick(config: CandlestickConfig, solution: CandlestickSolution,
                         n_slow: int, reps: int, seed: int) -> SimReport:
    """Play the candlestick auction with all slow bidders at the solved bid;
    the slow class must break even and the win rates must match the solution."""
    if reps < _MIN_REPS:
        raise ValueError(f"need at least {_MIN_REPS} replications")
    if n_slow < 2:
        raise ValueError("the zero-profit condition presumes at least two slow bidders")
    rng = ReplicationRng(seed)
    acc = {name: _RunningStat() for name in
           ("revenue", "win_rate_slow", "win_rate_fast",
            "slow_profit", "fast_profit")}
    for block, m in _block_sizes(reps):
        u = rng.block_stream(block).random((m, 3))
        out = _candlestick_block(config, solution, n_slow, u)
        fast_won = out["fast_won"]
        acc["revenue"].add_block(out["revenue"])
        acc["win_rate_fast"].add_block(fast_won.astype(float))
        acc["win_rate_slow"].add_block((~fast_won).astype(float))
        acc["slow_profit"].add_block(out["slow_profit"])
        acc["fast_profit"].add_block(out["fast_profit"])

    stats = {k: a.stat() for k, a in acc.items()}
    analytic = {
        "slow_profit": 0.0,
        "win_rate_slow": solution.slow_win_prob,
        "fast_profit": solution.fast_expected_profit,
    }
    checks = [_check(name, stats[name], analytic[name]) for name in analytic]
    cfg = config.describe()
    cfg["n_slow"] = n_slow
    return SimReport(model="candlestick", reps=reps, seed=seed, config=cfg,
                     stats=stats, analytic=analytic, checks=checks)


# ---------------------------------- sweeps ------------------------------------

CANDLESTICK_AXES = ("p", "vol", "delta")
PRIVATE_AXES = ("na", "nb")
_CANDLESTICK_HEADER = ["axis_value", "b0s", "slow_win_prob", "fast_profit", "status"]
_PRIVATE_HEADER = ["axis_value", "slope_fit", "residual", "status"]


def sweep_header(axis: str) -> list[str]:
    return _CANDLESTICK_HEADER if axis in CANDLESTICK_AXES else _PRIVATE_HEADER


def sweep(axis: str, grid, base: dict, verify_reps: int = 0,
          seed: int = 0) -> list[dict]:
    """Solve (and optionally verify) one model per grid point of ``axis``.

    Rows come back in grid order; a per-point failure is recorded in the
    row's ``status`` instead of aborting the sweep.
    """
    if axis in CANDLESTICK_AXES:
        return [_sweep_candlestick_point(axis, x, base, verify_reps, seed)
                for x in grid]
    if axis in PRIVATE_AXES:
        return [_sweep_private_point(axis, x, base, verify_reps, seed)
                for x in grid]
    raise ValueError(f"unknown sweep axis {axis!r}; "
                     f"choose from {CANDLESTICK_AXES + PRIVATE_AXES}")


def _sweep_candlestick_point(axis, x, base, verify_reps, seed) -> dict:
    row = dict.fromkeys(_CANDLESTICK_HEADER, "")
    row["axis_value"] = x
    try:
        params = {"v0": base.get("v0", 1.0), "vol": base.get("vol", 0.2),
                  "delta": base.get("delta", 1.0), "p": base.get("p", 0.5)}
        params[axis] = x
        config = CandlestickConfig(
            PriceProcess(params["v0"], params["vol"], params["delta"]), params["p"])
        solution = solve_candlestick(config, tol=base.get("tol", 1e-12))
        row.update(b0s=solution.b0s, slow_win_prob=solution.slow_win_prob,
                   fast_profit=solution.fast_expected_profit, status="ok")
        if verify_reps:
            report = simulate_candlestick(config, solution,
                                          base.get("n_slow", 2), verify_reps, seed)
            if not report.agreement_ok:
                row["status"] = "verify-failed"
    except Exception as exc:  # per-point failures stay in-row
        row["status"] = f"error: {exc}"
    return row


def _sweep_private_point(axis, x, base, verify_reps, seed) -> dict:
    row = dict.fromkeys(_PRIVATE_HEADER, "")
    row["axis_value"] = x
    try:
        n = int(x)
        if n != x:
            raise ValueError(f"{axis} grid values must be integers, got {x}")
        na = n if axis == "na" else base.get("na", 1)
        nb = n if axis == "nb" else base.get("nb", 1)
        config = HybridAuctionConfig(na, nb, base["fa"], base["fb"])
        solution = solve_fixed_point(config,
                                     grid_size=base.get("grid_size", 512),
                                     tol=base.get("tol", 1e-6))
        v, b = solution.values, solution.bids
        row.update(slope_fit=float(np.dot(b, v) / np.dot(v, v)),
                   residual=solution.residual, status="ok")
        if verify_reps:
            report = simulate_hybrid(config, solution, verify_reps, seed)
            if not report.agreement_ok:
                row["status"] = "verify-failed"
    except Exception as exc:
        row["status"] = f"error: {exc}"
    return row
