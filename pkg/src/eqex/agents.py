"""Rule-based background investors and the market maker's quote ladder.

The MM quotes `depth` one-cent-spaced levels per side around the current
stock price at distance `half_spread`. Fundamental investors trade toward
a noisy view of an exogenous value series with limit orders; momentum
investors compare short/long moving averages and hit the market; consumer
investors trade once per day, random size and direction.
"""

from dataclasses import dataclass

from .lob import BUY, SELL, TENTH_CENTS_PER_CENT

CENT = TENTH_CENTS_PER_CENT   # price units per cent


@dataclass
class MMQuoteParams:
    half_spread_cents: float   # h
    depth: int                 # d, levels per side
    size: int                  # I, shares per level

    @property
    def half_spread_units(self) -> int:
        return round(self.half_spread_cents * CENT)


@dataclass
class FundamentalInvestorCfg:
    count: int = 20
    arrival_rate: float = 0.1      # mean arrivals per minute, per agent
    obs_noise_sigma: float = 10.0  # price units (tenth-cents)
    order_size: int = 10


@dataclass
class MomentumInvestorCfg:
    count: int = 10
    short_window: int = 5
    long_window: int = 20
    wake_interval: int = 10        # minutes between decisions
    order_size: int = 10

    def __post_init__(self):
        if not 0 < self.short_window < self.long_window:
            raise ValueError("need 0 < short_window < long_window")


@dataclass
class ConsumerInvestorCfg:
    count: int = 30
    size_min: int = 5
    size_max: int = 50

    def __post_init__(self):
        if not 1 <= self.size_min <= self.size_max:
            raise ValueError("need 1 <= size_min <= size_max")


def mm_quotes(p_t: float, params: MMQuoteParams) -> list[tuple[str, int, int]]:
    """Quote intents (side, price, qty) around stock price p_t.

    Buys at p_t - h - k cents and sells at p_t + h + k cents for
    k = 0..depth-1. Returns [] when the lowest buy price would be
    non-positive (caller flags the skipped minute).
    """
    h = params.half_spread_units
    lowest_buy = round(p_t - h - (params.depth - 1) * CENT)
    if lowest_buy <= 0:
        return []
    quotes = []
    for k in range(params.depth):
        quotes.append((BUY, round(p_t - h) - k * CENT, params.size))
        quotes.append((SELL, round(p_t + h) + k * CENT, params.size))
    return quotes


def fundamental_decide(fundamental_t: int, noise: float,
                       midprice: float | None,
                       cfg: FundamentalInvestorCfg
                       ) -> tuple[str, int, int] | None:
    """Limit-order intent (side, price, qty) from a noisy value view.

    Buys when the market trades below the observation (stock looks
    cheap), sells above it, passes on a tie or when no midprice exists.
    """
    if midprice is None:
        return None
    obs = round(fundamental_t + noise)
    if obs <= 0:
        return None
    if midprice < obs:
        return (BUY, obs, cfg.order_size)
    if midprice > obs:
        return (SELL, obs, cfg.order_size)
    return None


def momentum_decide(price_history: list[float],
                    cfg: MomentumInvestorCfg) -> tuple[str, int] | None:
    """Market-order intent (side, qty) from moving-average crossover."""
    if len(price_history) < cfg.long_window:
        return None
    short = sum(price_history[-cfg.short_window:]) / cfg.short_window
    long = sum(price_history[-cfg.long_window:]) / cfg.long_window
    if short > long:
        return (BUY, cfg.order_size)
    if short < long:
        return (SELL, cfg.order_size)
    return None


def consumer_decide(rng, cfg: ConsumerInvestorCfg) -> tuple[str, int]:
    """Market-order intent (side, qty): uniform direction and size."""
    side = BUY if rng.integers(0, 2) == 0 else SELL
    size = int(rng.integers(cfg.size_min, cfg.size_max + 1))
    return (side, size)
