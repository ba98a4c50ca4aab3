"""Price-time-priority limit order book with maker/taker attribution.

Prices are integers in tenths of a cent (1 unit = 0.1 cent), so quoted
values like 10000.5 cents are exact. Cash amounts derived from trades are
integers in hundredths of a cent (price * qty * 10).
"""

from dataclasses import dataclass, field
import heapq

BUY = "BUY"
SELL = "SELL"

TENTH_CENTS_PER_CENT = 10


class DuplicateOrderId(Exception):
    pass


@dataclass
class Order:
    id: int
    agent_id: int
    side: str
    price: int              # tenth-cents
    qty: int                # remaining shares
    submit_time: int = 0
    seq: int = field(default=-1, compare=False)  # book-assigned arrival rank


@dataclass
class Trade:
    maker_order_id: int
    taker_order_id: int
    maker_agent_id: int
    taker_agent_id: int
    price: int              # maker's resting price, tenth-cents
    qty: int
    aggressor_side: str     # taker side
    time: int = 0

    @property
    def buyer_agent_id(self) -> int:
        return self.taker_agent_id if self.aggressor_side == BUY else self.maker_agent_id

    @property
    def seller_agent_id(self) -> int:
        return self.maker_agent_id if self.aggressor_side == BUY else self.taker_agent_id


@dataclass
class BookSignals:
    best_bid: int | None
    best_ask: int | None
    midprice: float | None
    spread: int | None
    imbalance: float


class OrderBook:
    """Continuous double auction book.

    Incoming orders match against the opposite side while prices cross,
    executing at the resting (maker) price, earliest arrival first within
    a price level. Cancellation is lazy: cancelled entries are skipped when
    they surface at the top of a heap.
    """

    def __init__(self):
        self._bids: list[tuple[int, int, Order]] = []   # (-price, seq, order)
        self._asks: list[tuple[int, int, Order]] = []   # (price, seq, order)
        self._live: dict[int, Order] = {}
        self._seq = 0
        self._bid_vol = 0
        self._ask_vol = 0

    # -- queries ---------------------------------------------------------

    def _clean(self, heap):
        while heap and heap[0][2].id not in self._live:
            heapq.heappop(heap)

    def best_bid(self) -> int | None:
        self._clean(self._bids)
        return self._bids[0][2].price if self._bids else None

    def best_ask(self) -> int | None:
        self._clean(self._asks)
        return self._asks[0][2].price if self._asks else None

    def signals(self) -> BookSignals:
        bb, ba = self.best_bid(), self.best_ask()
        mid = (bb + ba) / 2 if bb is not None and ba is not None else None
        spread = ba - bb if bb is not None and ba is not None else None
        total = self._bid_vol + self._ask_vol
        imbalance = self._bid_vol / total if total > 0 else 0.5
        return BookSignals(bb, ba, mid, spread, imbalance)

    def resting_orders(self) -> list[Order]:
        return list(self._live.values())

    # -- mutations -------------------------------------------------------

    def submit_limit(self, order: Order) -> tuple[list[Trade], Order | None]:
        if order.id in self._live:
            raise DuplicateOrderId(f"order id {order.id} already resting")
        if order.qty <= 0:
            raise ValueError("order qty must be positive")
        if order.price <= 0:
            raise ValueError("order price must be positive")

        trades = self._match(order, limit_price=order.price)
        if order.qty > 0:
            order.seq = self._seq
            self._seq += 1
            self._live[order.id] = order
            if order.side == BUY:
                heapq.heappush(self._bids, (-order.price, order.seq, order))
                self._bid_vol += order.qty
            else:
                heapq.heappush(self._asks, (order.price, order.seq, order))
                self._ask_vol += order.qty
            return trades, order
        return trades, None

    def submit_market(self, agent_id: int, side: str, qty: int,
                      time: int = 0, order_id: int | None = None
                      ) -> tuple[list[Trade], int]:
        """Returns (trades, unfilled qty). Unfilled remainder is discarded."""
        if qty <= 0:
            raise ValueError("qty must be positive")
        order = Order(id=-1 if order_id is None else order_id,
                      agent_id=agent_id, side=side, price=0, qty=qty,
                      submit_time=time)
        trades = self._match(order, limit_price=None)
        return trades, order.qty

    def cancel(self, order_id: int) -> bool:
        order = self._live.pop(order_id, None)
        if order is None:
            return False
        if order.side == BUY:
            self._bid_vol -= order.qty
        else:
            self._ask_vol -= order.qty
        return True

    # -- matching --------------------------------------------------------

    def _match(self, taker: Order, limit_price: int | None) -> list[Trade]:
        trades: list[Trade] = []
        if taker.side == BUY:
            book, vol_attr = self._asks, "_ask_vol"
            crosses = (lambda p: True) if limit_price is None else (lambda p: p <= limit_price)
        else:
            book, vol_attr = self._bids, "_bid_vol"
            crosses = (lambda p: True) if limit_price is None else (lambda p: -p >= limit_price)

        while taker.qty > 0:
            self._clean(book)
            if not book:
                break
            key, _, maker = book[0]   # key = price for asks, -price for bids
            if not crosses(key):
                break
            fill = min(taker.qty, maker.qty)
            trades.append(Trade(
                maker_order_id=maker.id, taker_order_id=taker.id,
                maker_agent_id=maker.agent_id, taker_agent_id=taker.agent_id,
                price=maker.price, qty=fill,
                aggressor_side=taker.side, time=taker.submit_time))
            taker.qty -= fill
            maker.qty -= fill
            setattr(self, vol_attr, getattr(self, vol_attr) - fill)
            if maker.qty == 0:
                del self._live[maker.id]
                heapq.heappop(book)
        return trades
