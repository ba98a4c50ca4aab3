"""Fee application, per-agent accounting, shared-state construction and
reward computation for the two learners.

Sign convention: a positive fee charges liquidity consumers (takers), a
positive incentive pays liquidity providers (makers). Negative values flip
direction: the exchange rebates takers and charges makers, as on inverted
exchanges.

Monetary units: ledgers are integer hundredths of a cent so that fee
values like 0.30 cents/share applied to integer share counts stay exact.
Rewards and profits are reported in dollars.
"""

from dataclasses import dataclass, field

from .lob import BUY, Trade

HCENTS_PER_CENT = 100
HCENTS_PER_DOLLAR = 10_000
HCENTS_PER_PRICE_UNIT = 10   # price is tenth-cents


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class FeeAction:
    fee_cents: float          # per share, charged to takers
    incentive_cents: float    # per share, paid to makers

    @property
    def fee_hcents(self) -> int:
        return round(self.fee_cents * HCENTS_PER_CENT)

    @property
    def incentive_hcents(self) -> int:
        return round(self.incentive_cents * HCENTS_PER_CENT)


# Exchange action grid (fee, incentive) in cents/share.
EXCHANGE_ACTIONS: tuple[FeeAction, ...] = tuple(
    FeeAction(f, i) for f, i in [
        (0.30, 0.30), (0.30, 0.25), (0.25, 0.30),
        (-0.30, -0.30), (-0.30, -0.25), (-0.25, -0.30),
    ])

# MM action grid: (half_spread cents, depth levels).
MM_HALF_SPREADS_CENTS = (0.5, 1.0, 1.5, 2.0, 2.5)
MM_DEPTHS = (1, 2, 3)
MM_ACTIONS: tuple[tuple[float, int], ...] = tuple(
    (h, d) for h in MM_HALF_SPREADS_CENTS for d in MM_DEPTHS)


@dataclass
class AgentAccount:
    agent_id: int
    cash: int = 0                    # hundredth-cents
    inventory: int = 0               # shares, signed
    fees_paid: int = 0               # hundredth-cents, signed (rebates negative)
    incentives_received: int = 0     # hundredth-cents, signed
    initial_cash: int = 0
    initial_inventory: int = 0
    initial_inventory_value: int = 0  # hundredth-cents, fixed at episode start

    def mark_to_market(self, midprice: float) -> float:
        """Profit in dollars at the given midprice (tenth-cent units)."""
        wealth = self.cash + self.inventory * midprice * HCENTS_PER_PRICE_UNIT
        return (wealth - self.initial_cash - self.initial_inventory_value) / HCENTS_PER_DOLLAR


def settle_trade(trade: Trade, accounts: dict[int, AgentAccount]) -> None:
    """Move cash and shares between the two sides of a trade."""
    cash = trade.price * trade.qty * HCENTS_PER_PRICE_UNIT
    buyer = accounts[trade.buyer_agent_id]
    seller = accounts[trade.seller_agent_id]
    buyer.cash -= cash
    buyer.inventory += trade.qty
    seller.cash += cash
    seller.inventory -= trade.qty


def apply_fees(trades: list[Trade], action: FeeAction,
               accounts: dict[int, AgentAccount],
               exchange: AgentAccount) -> None:
    """Debit takers, credit makers, net the difference to the exchange."""
    fee = action.fee_hcents
    inc = action.incentive_hcents
    for t in trades:
        taker = accounts[t.taker_agent_id]
        maker = accounts[t.maker_agent_id]
        taker.cash -= fee * t.qty
        taker.fees_paid += fee * t.qty
        maker.cash += inc * t.qty
        maker.incentives_received += inc * t.qty
        exchange.cash += (fee - inc) * t.qty


def exchange_profit_reward(traded_qty: int, action: FeeAction) -> float:
    """Per-step exchange profit in dollars: fees minus incentives.

    Consumed and provided units are both the executed share count, equal
    per trade by construction.
    """
    hcents = (action.fee_hcents - action.incentive_hcents) * traded_qty
    return hcents / HCENTS_PER_DOLLAR


def mm_reward(wealth_change_dollars: float, incentive_credit_dollars: float,
              lam: float) -> float:
    """Trading profits plus lambda-weighted exchange incentives.

    `wealth_change_dollars` is the MM's full mark-to-market wealth change
    over the step (which already includes incentive credits);
    `incentive_credit_dollars` is the incentive portion alone. Trading
    profits are the difference, so at lambda=1 the reward equals the
    actual wealth change.
    """
    trading = wealth_change_dollars - incentive_credit_dollars
    return trading + lam * incentive_credit_dollars


def exchange_reward(profit_reward: float, equitability_reward: float,
                    eta: float) -> float:
    return profit_reward + eta * equitability_reward


# -- state construction -------------------------------------------------

MM_STATE_COMPONENTS = ("inventory", "fee", "incentive",
                       "imbalance", "spread", "midprice")
EX_STATE_COMPONENTS = MM_STATE_COMPONENTS[1:]   # inventory excluded


def build_states(signals, mm_inventory: int, action: FeeAction,
                 default_midprice: float, default_spread: float,
                 ) -> tuple[dict, dict]:
    """Raw (unnormalized) state vectors for the MM and the exchange.

    Missing book signals (empty side) fall back to the provided defaults;
    imbalance already degenerates to 0.5 inside the book.
    """
    mid = signals.midprice if signals.midprice is not None else default_midprice
    spread = signals.spread if signals.spread is not None else default_spread
    mm_state = {
        "inventory": float(mm_inventory),
        "fee": action.fee_cents,
        "incentive": action.incentive_cents,
        "imbalance": signals.imbalance,
        "spread": float(spread),
        "midprice": float(mid),
    }
    ex_state = {k: mm_state[k] for k in EX_STATE_COMPONENTS}
    return mm_state, ex_state


@dataclass
class Normalizer:
    """Affine clamp-to-range map onto [-1, 1] per named component."""
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if lo >= hi:
                raise ConfigError(f"bounds for '{name}': min {lo} >= max {hi}")

    def normalize(self, name: str, value: float) -> float:
        lo, hi = self.bounds[name]
        x = 2.0 * (value - lo) / (hi - lo) - 1.0
        return max(-1.0, min(1.0, x))

    def normalize_vector(self, state: dict, components: tuple[str, ...]) -> tuple[float, ...]:
        return tuple(self.normalize(c, state[c]) for c in components)
