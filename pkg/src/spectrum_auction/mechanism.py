"""Sealed-bid spectrum auction run by the coordinator each slot.

Actions are carried as an ``(N, K)`` float matrix of bids where ``NaN``
marks a stay-out. Each channel is auctioned independently: the highest
bidder wins unless the primary user occupies the channel.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class AuctionRule(str, enum.Enum):
    FIRST_PRICE = "first"
    SECOND_PRICE = "second"


@dataclass(frozen=True, slots=True)
class Action:
    """One SU's decision for a slot.

    ``channel`` is the channel the SU looked at (it may still stay out
    there); ``bid`` is ``None`` for a stay-out.
    """

    channel: int | None = None
    bid: float | None = None

    @property
    def is_bid(self) -> bool:
        return self.bid is not None

    @classmethod
    def stay_out(cls, channel: int | None = None) -> "Action":
        return cls(channel, None)

    @classmethod
    def bid_on(cls, channel: int, value: float) -> "Action":
        if not value >= 0:
            raise ValueError(f"bid must be >= 0, got {value!r}")
        return cls(int(channel), float(value))


STAY_OUT = Action()


def action_matrix(actions: Sequence[Action], num_channels: int) -> np.ndarray:
    bids = np.full((len(actions), num_channels), np.nan)
    for i, a in enumerate(actions):
        if a.is_bid:
            bids[i, a.channel] = a.bid
    return bids


def allocate(bids: np.ndarray, pu_active, rng: np.random.Generator) -> np.ndarray:
    """Winner-take-all allocation per channel; returns an ``(N, K)`` 0/1 matrix.

    Ties among maximal bidders are broken uniformly with ``rng``; the stream
    is only consumed when a tie actually occurs.
    """
    n, k = bids.shape
    chi = np.zeros((n, k), dtype=np.int8)
    for ch, w in enumerate(_winners(bids.T.tolist(), list(pu_active), rng)):
        if w is not None:
            chi[w, ch] = 1
    return chi


def settle(bids: np.ndarray, chi: np.ndarray, rule: AuctionRule = AuctionRule.SECOND_PRICE) -> np.ndarray:
    """Payments per (SU, channel). Only winners pay.

    Under second price a sole bidder pays 0: there is no reserve price.
    """
    payments = np.zeros(bids.shape)
    cols = bids.T.tolist()
    for w, ch in zip(*np.nonzero(chi)):
        payments[w, ch] = _price(cols[ch], int(w), rule)
    return payments


def _winners(cols: list, pu: list, rng: np.random.Generator) -> list:
    out = []
    for ch, col in enumerate(cols):
        if pu[ch]:
            out.append(None)
            continue
        top = -math.inf
        best = []
        for i, b in enumerate(col):
            if b != b:  # NaN: stayed out
                continue
            if b > top:
                top, best = b, [i]
            elif b == top:
                best.append(i)
        if not best:
            out.append(None)
        elif len(best) == 1:
            out.append(best[0])
        else:
            out.append(best[int(rng.integers(len(best)))])
    return out


def _price(col: list, winner: int, rule: AuctionRule) -> float:
    if rule is AuctionRule.FIRST_PRICE:
        return col[winner]
    others = [b for i, b in enumerate(col) if i != winner and b == b]
    return max(others) if others else 0.0


@dataclass(frozen=True)
class AuctionRound:
    slot: int
    bids: np.ndarray  # (N, K), NaN = stay out
    allocation: np.ndarray  # (N, K) 0/1
    payments: np.ndarray  # (N, K)
    pu_active: np.ndarray  # (K,)
    rule: AuctionRule = AuctionRule.SECOND_PRICE

    def winner(self, channel: int) -> int | None:
        idx = np.flatnonzero(self.allocation[:, channel])
        return int(idx[0]) if len(idx) else None


@dataclass(frozen=True)
class Broadcast:
    """Public outcome of a slot: per channel, the highest bid and what the winner paid.

    Both are ``NaN`` on channels without a winner (no bids, or PU present).
    """

    max_bid: np.ndarray
    payment: np.ndarray
    pu_flag: np.ndarray

    def has_payment(self, channel: int) -> bool:
        return not math.isnan(self.payment[channel])


def run_auction(slot: int, bids: np.ndarray, pu_active, rng: np.random.Generator,
                rule: AuctionRule = AuctionRule.SECOND_PRICE) -> AuctionRound:
    """Allocate and settle every channel of one slot."""
    return clear(slot, bids, pu_active, rng, rule)[0]


def clear(slot: int, bids: np.ndarray, pu_active, rng: np.random.Generator,
          rule: AuctionRule = AuctionRule.SECOND_PRICE) -> tuple[AuctionRound, Broadcast]:
    """One pass computing the round and its broadcast (same result as ``publish(run_auction(...))``)."""
    pu_active = np.asarray(pu_active, dtype=bool)
    n, k = bids.shape
    cols = bids.T.tolist()
    chi = np.zeros((n, k), dtype=np.int8)
    payments = np.zeros((n, k))
    max_bid = [math.nan] * k
    payment = [math.nan] * k
    for ch, w in enumerate(_winners(cols, pu_active.tolist(), rng)):
        if w is not None:
            chi[w, ch] = 1
            max_bid[ch] = cols[ch][w]
            payments[w, ch] = payment[ch] = _price(cols[ch], w, rule)
    rnd = AuctionRound(slot, bids, chi, payments, pu_active, rule)
    return rnd, Broadcast(np.array(max_bid), np.array(payment), pu_active.copy())


def publish(rnd: AuctionRound) -> Broadcast:
    k = rnd.bids.shape[1]
    max_bid = [math.nan] * k
    payment = [math.nan] * k
    for w, ch in zip(*np.nonzero(rnd.allocation)):
        max_bid[ch] = float(rnd.bids[w, ch])
        payment[ch] = float(rnd.payments[w, ch])
    return Broadcast(np.array(max_bid), np.array(payment), rnd.pu_active.copy())
