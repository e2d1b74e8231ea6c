"""Slow, obviously-correct reference implementations used by the tests."""
import math

import numpy as np

from spectrum_auction.mechanism import AuctionRule


def auction_oracle(bids, pu, rule, tie_pick):
    """Sort the bidders of each channel; ``tie_pick(k)`` picks among ``k`` tied maxima.

    Returns (allocation, payments) as nested lists.
    """
    n, k = bids.shape
    chi = [[0] * k for _ in range(n)]
    pay = [[0.0] * k for _ in range(n)]
    for ch in range(k):
        if pu[ch]:
            continue
        bidders = sorted(((bids[i, ch], i) for i in range(n) if not math.isnan(bids[i, ch])),
                         key=lambda t: (-t[0], t[1]))
        if not bidders:
            continue
        top = [i for b, i in bidders if b == bidders[0][0]]
        w = top[tie_pick(len(top))] if len(top) > 1 else top[0]
        chi[w][ch] = 1
        if rule is AuctionRule.FIRST_PRICE:
            pay[w][ch] = float(bids[w, ch])
        else:
            rest = [b for b, i in bidders if i != w]
            pay[w][ch] = float(rest[0]) if rest else 0.0
    return chi, pay


def random_instance(rng, max_n=6, max_k=4, grid=False):
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, max_k + 1))
    bids = rng.integers(0, 5, (n, k)).astype(float) if grid else rng.uniform(0, 10, (n, k))
    bids[rng.random((n, k)) < 0.3] = np.nan
    pu = rng.random(k) < 0.2
    return bids, pu
