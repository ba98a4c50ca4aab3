"""Deterministic discrete-event market simulation.

One episode is a trading day of T one-minute steps. Each minute: the
exchange's fee action takes effect, the MM cancel-replaces its quote
ladder, pre-drawn background arrivals trade in timestamp order, and both
learners' rewards are computed at minute end. Everything is driven by
per-agent random streams spawned from the master seed, so an episode is a
pure function of (config, seed, actions).
"""

from dataclasses import dataclass, field
import csv
import hashlib
import json

import numpy as np

from . import agents as ag
from . import mechanism as mech
from .config import ExperimentConfig
from .lob import BUY, SELL, Order, OrderBook
from .metrics import GeiConfig, ge_weighted, weights_from_beta

# group indices into the GEI weight vector
GROUP_MM = 0
GROUP_CONSUMER = 1
GROUP_OTHER = 2

MM_AGENT_ID = 0
EXCHANGE_AGENT_ID = -1


class FundamentalError(Exception):
    pass


@dataclass
class FundamentalSeries:
    prices: np.ndarray           # tenth-cents, int
    source: str                  # "file" | "synthetic"


def load_fundamental(path: str, horizon: int) -> FundamentalSeries:
    """Read a `minute,price_tenth_cents` CSV into a validated series."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise FundamentalError(f"cannot open fundamental file: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "price_tenth_cents" not in reader.fieldnames:
            raise FundamentalError(
                f"{path}: expected header with 'minute,price_tenth_cents'")
        prices = []
        for i, row in enumerate(reader):
            try:
                p = int(row["price_tenth_cents"])
            except (ValueError, TypeError) as exc:
                raise FundamentalError(f"{path} row {i}: bad price") from exc
            if p <= 0:
                raise FundamentalError(f"{path} row {i}: non-positive price {p}")
            prices.append(p)
    if len(prices) < horizon:
        raise FundamentalError(
            f"{path}: series shorter than horizon ({len(prices)} < {horizon})")
    return FundamentalSeries(np.asarray(prices, dtype=np.int64), "file")


def synthesize_fundamental(seed: int, p0: int, reversion_rate: float,
                           volatility: float, horizon: int) -> FundamentalSeries:
    """Mean-reverting integer price walk, deterministic in the seed."""
    if p0 <= 0:
        raise FundamentalError("p0 must be positive")
    if volatility < 0:
        raise FundamentalError("volatility must be nonnegative")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF0)))
    prices = np.empty(horizon, dtype=np.int64)
    p = float(p0)
    for t in range(horizon):
        p += reversion_rate * (p0 - p) + volatility * rng.standard_normal()
        p = max(p, 1.0)
        prices[t] = round(p)
    return FundamentalSeries(prices, "synthetic")


def fundamental_from_config(cfg: ExperimentConfig, seed: int) -> FundamentalSeries:
    f = cfg.fundamental
    if f.kind == "file":
        return load_fundamental(f.path, cfg.T)
    return synthesize_fundamental(seed, f.p0, f.reversion_rate,
                                  f.volatility, cfg.T)


@dataclass
class StepRecord:
    t: int
    mm_state: dict
    ex_state: dict
    mm_action: int
    ex_action: int
    mm_reward: float
    ex_profit_reward: float
    ex_equity_reward: float
    ex_reward: float
    traded_qty: int
    n_trades: int
    mm_quote_skipped: bool


@dataclass
class EpisodeResult:
    steps: list[StepRecord]
    final_profits: dict[int, float]       # agent_id -> dollars
    groups: dict[int, int]                # agent_id -> group index
    exchange_cash: int                    # hundredth-cents
    final_neg_gew: float

    def group_profit_summary(self) -> dict[int, dict]:
        out = {}
        for g in sorted(set(self.groups.values())):
            vals = [p for a, p in self.final_profits.items() if self.groups[a] == g]
            out[g] = {"n": len(vals), "mean": float(np.mean(vals)),
                      "total": float(np.sum(vals))}
        return out

    def hash(self) -> str:
        payload = {
            "steps": [[r.t, r.mm_action, r.ex_action,
                       round(r.mm_reward, 12), round(r.ex_reward, 12),
                       r.traded_qty, r.n_trades] for r in self.steps],
            "final_profits": {str(k): round(v, 12)
                              for k, v in sorted(self.final_profits.items())},
            "exchange_cash": self.exchange_cash,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


class PolicyActionError(Exception):
    pass


class MarketSim:
    """Two-learner Markov game over the simulated exchange.

    reset() builds the day's agent population and pre-draws every
    background arrival; step() advances one minute given action indices
    for the exchange and the MM.
    """

    def __init__(self, config: ExperimentConfig):
        self.cfg = config
        self.gei = GeiConfig(weights=weights_from_beta(config.weights.beta))
        self.t = 0
        self.done = True

    # -- lifecycle -------------------------------------------------------

    def reset(self, seed: int):
        cfg = self.cfg
        self.seed = seed
        self.t = 0
        self.done = False
        self.book = OrderBook()
        self.fundamental = fundamental_from_config(cfg, seed)
        self._next_order_id = 1

        # population: MM, then fundamental, momentum, consumer investors
        self.groups: dict[int, int] = {MM_AGENT_ID: GROUP_MM}
        next_id = 1
        self._fund_ids = list(range(next_id, next_id + cfg.fundamental_investors.count))
        next_id += cfg.fundamental_investors.count
        self._mom_ids = list(range(next_id, next_id + cfg.momentum_investors.count))
        next_id += cfg.momentum_investors.count
        self._cons_ids = list(range(next_id, next_id + cfg.consumer_investors.count))
        next_id += cfg.consumer_investors.count
        for a in self._fund_ids + self._mom_ids:
            self.groups[a] = GROUP_OTHER
        for a in self._cons_ids:
            self.groups[a] = GROUP_CONSUMER

        self.accounts = {a: mech.AgentAccount(a) for a in self.groups}
        self.exchange_account = mech.AgentAccount(EXCHANGE_AGENT_ID)
        self._sorted_ids = sorted(self.accounts)
        self._groups_arr = np.array([self.groups[a] for a in self._sorted_ids])

        # independent stream per agent: adding agents never perturbs others
        root = np.random.SeedSequence(seed)
        streams = root.spawn(next_id + 1)
        self._agent_rng = {a: np.random.default_rng(streams[a]) for a in self.groups}

        self._schedule_background()

        self._mm_quote_ids: list[int] = []
        self._current_action = mech.EXCHANGE_ACTIONS[0]
        self._mid_history: list[float] = []
        self._last_mid = float(self.fundamental.prices[0])
        self._prev_profits = self._profit_vector()
        self._prev_gew = 0.0     # GE at t=0 defined as 0
        self._prev_mm_profit = 0.0
        self._prev_mm_incentives = 0
        return self._observe()

    def _schedule_background(self):
        """Pre-draw (offset, agent_id, kind) arrival lists per minute."""
        cfg = self.cfg
        T = cfg.T
        per_minute: list[list[tuple[float, int, str]]] = [[] for _ in range(T)]

        for a in self._fund_ids:
            rng = self._agent_rng[a]
            t = rng.exponential(1.0 / cfg.fundamental_investors.arrival_rate)
            while t < T:
                per_minute[int(t)].append((t - int(t), a, "fund"))
                t += rng.exponential(1.0 / cfg.fundamental_investors.arrival_rate)

        for i, a in enumerate(self._mom_ids):
            rng = self._agent_rng[a]
            offset = float(rng.uniform())
            start = i % cfg.momentum_investors.wake_interval
            for t in range(start, T, cfg.momentum_investors.wake_interval):
                per_minute[t].append((offset, a, "mom"))

        for a in self._cons_ids:
            rng = self._agent_rng[a]
            minute = int(rng.integers(0, T))
            per_minute[minute].append((float(rng.uniform()), a, "cons"))

        for events in per_minute:
            events.sort()
        self._events = per_minute

    # -- helpers ---------------------------------------------------------

    def _new_order_id(self) -> int:
        oid = self._next_order_id
        self._next_order_id += 1
        return oid

    def _profit_vector(self) -> np.ndarray:
        mid = self._last_mid
        return np.array([self.accounts[a].mark_to_market(mid)
                         for a in self._sorted_ids])

    def _group_vector(self) -> np.ndarray:
        return self._groups_arr

    def _observe(self):
        sig = self.book.signals()
        mm_state, ex_state = mech.build_states(
            sig, self.accounts[MM_AGENT_ID].inventory, self._current_action,
            default_midprice=self._last_mid, default_spread=0.0)
        return mm_state, ex_state

    def _settle(self, trades):
        for tr in trades:
            mech.settle_trade(tr, self.accounts)
        mech.apply_fees(trades, self._current_action, self.accounts,
                        self.exchange_account)
        self._step_trades.extend(trades)

    # -- stepping --------------------------------------------------------

    def step(self, ex_action: int, mm_action: int) -> StepRecord:
        if self.done:
            raise RuntimeError("episode is done; call reset()")
        if not 0 <= ex_action < len(mech.EXCHANGE_ACTIONS):
            raise PolicyActionError(
                f"step {self.t}: exchange action {ex_action} out of range")
        if not 0 <= mm_action < len(mech.MM_ACTIONS):
            raise PolicyActionError(
                f"step {self.t}: MM action {mm_action} out of range")
        cfg = self.cfg
        t = self.t
        self._step_trades = []
        self._current_action = mech.EXCHANGE_ACTIONS[ex_action]
        mm_acct = self.accounts[MM_AGENT_ID]

        # MM cancel-replace around the minute-start stock price
        for oid in self._mm_quote_ids:
            self.book.cancel(oid)
        self._mm_quote_ids.clear()
        sig = self.book.signals()
        p_t = sig.midprice if sig.midprice is not None else float(self.fundamental.prices[t])
        self._mid_history.append(p_t)
        h, d = mech.MM_ACTIONS[mm_action]
        params = ag.MMQuoteParams(h, d, cfg.mm.size)
        quotes = ag.mm_quotes(p_t, params)
        mm_quote_skipped = not quotes
        for side, price, qty in quotes:
            order = Order(self._new_order_id(), MM_AGENT_ID, side, price, qty,
                          submit_time=t)
            trades, remainder = self.book.submit_limit(order)
            self._settle(trades)
            if remainder is not None:
                self._mm_quote_ids.append(order.id)

        # background arrivals in pre-drawn timestamp order
        for _offset, a, kind in self._events[t]:
            if kind == "fund":
                mid = self.book.signals().midprice
                noise = self._agent_rng[a].normal(
                    0.0, cfg.fundamental_investors.obs_noise_sigma)
                intent = ag.fundamental_decide(
                    int(self.fundamental.prices[t]), noise, mid,
                    cfg.fundamental_investors)
                if intent is not None:
                    side, price, qty = intent
                    order = Order(self._new_order_id(), a, side, price, qty,
                                  submit_time=t)
                    trades, _ = self.book.submit_limit(order)
                    self._settle(trades)
            elif kind == "mom":
                intent = ag.momentum_decide(self._mid_history,
                                            cfg.momentum_investors)
                if intent is not None:
                    side, qty = intent
                    trades, _ = self.book.submit_market(a, side, qty, time=t)
                    self._settle(trades)
            else:  # consumer
                side, qty = ag.consumer_decide(self._agent_rng[a],
                                               cfg.consumer_investors)
                trades, _ = self.book.submit_market(a, side, qty, time=t)
                self._settle(trades)

        # minute-end marking and rewards
        end_sig = self.book.signals()
        if end_sig.midprice is not None:
            self._last_mid = end_sig.midprice
        profits = self._profit_vector()
        gew = ge_weighted(profits, self._group_vector(), self.gei.weights,
                          self.gei.kappa, self.gei.mu_eps)
        equity_reward = -gew + self._prev_gew

        traded_qty = sum(tr.qty for tr in self._step_trades)
        mm_provided = sum(tr.qty for tr in self._step_trades
                          if tr.maker_agent_id == MM_AGENT_ID)
        ex_profit = mech.exchange_profit_reward(traded_qty, self._current_action)

        mm_profit_now = mm_acct.mark_to_market(self._last_mid)
        incentive_delta = (mm_acct.incentives_received
                           - self._prev_mm_incentives) / mech.HCENTS_PER_DOLLAR
        mm_r = mech.mm_reward(mm_profit_now - self._prev_mm_profit,
                              incentive_delta, cfg.mm.lam)
        ex_r = mech.exchange_reward(ex_profit, equity_reward, cfg.weights.eta)

        mm_state, ex_state = self._observe()
        record = StepRecord(
            t=t, mm_state=mm_state, ex_state=ex_state,
            mm_action=mm_action, ex_action=ex_action,
            mm_reward=mm_r, ex_profit_reward=ex_profit,
            ex_equity_reward=equity_reward, ex_reward=ex_r,
            traded_qty=traded_qty, n_trades=len(self._step_trades),
            mm_quote_skipped=mm_quote_skipped)

        self._prev_profits = profits
        self._prev_gew = gew
        self._prev_mm_profit = mm_profit_now
        self._prev_mm_incentives = mm_acct.incentives_received
        self.t += 1
        if self.t >= cfg.T:
            self.done = True
        return record

    def finish(self, steps: list[StepRecord]) -> EpisodeResult:
        profits = self._profit_vector()
        ids = self._sorted_ids
        return EpisodeResult(
            steps=steps,
            final_profits={a: float(p) for a, p in zip(ids, profits)},
            groups=dict(self.groups),
            exchange_cash=self.exchange_account.cash,
            final_neg_gew=-self._prev_gew)


def run_episode(config: ExperimentConfig, seed: int,
                ex_policy, mm_policy) -> EpisodeResult:
    """Run one full episode with state-dependent policies.

    `ex_policy(ex_state, t)` and `mm_policy(mm_state, t)` return action
    indices into the exchange/MM grids.
    """
    sim = MarketSim(config)
    mm_state, ex_state = sim.reset(seed)
    steps = []
    for t in range(config.T):
        rec = sim.step(ex_policy(ex_state, t), mm_policy(mm_state, t))
        steps.append(rec)
        mm_state, ex_state = rec.mm_state, rec.ex_state
    return sim.finish(steps)
