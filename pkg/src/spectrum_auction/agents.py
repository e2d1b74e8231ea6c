"""Secondary-user decision policies.

Single channel: an SU keeps a private participation threshold, compares the
utility of staying out against an estimate of the utility of bidding, and
bids its true rate when it participates. The threshold is a moving average
of the winning payments it observes.

Multi-channel: channel choice follows regret matching over a sliding window
of the last ``nu`` slots; once a channel is chosen the single-channel rule
decides whether to bid there. Best-channel bidding and a genie-aided
assignment serve as baselines.
"""
from __future__ import annotations

import enum
import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NormalizationError
from .mechanism import Action, Broadcast

HISTORY_LEN = 32


class Strategy(str, enum.Enum):
    MYOPIC = "myopic"
    THRESHOLD = "threshold"
    NRL = "nrl"
    BCB = "bcb"
    GA = "ga"


@dataclass(slots=True)
class HistoryEntry:
    slot: int
    action: Action
    valuations: np.ndarray
    broadcast: Broadcast


@dataclass
class AgentLedger:
    reward: float = 1.0  # accumulated reward, starts at 1
    cost: float = 1.0  # accumulated cost, starts at 1
    threshold: float = 0.0
    alpha: float = 0.05
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LEN))

    @property
    def utility(self) -> float:
        return self.reward / self.cost


def myopic_act(valuations, channel: int = 0, pu_detected: bool = False) -> Action:
    if pu_detected:
        return Action.stay_out(channel)
    return Action.bid_on(channel, valuations[channel])


def threshold_act(ledger: AgentLedger, valuation: float, entry_fee: float, monitor_fee: float,
                  channel: int = 0, pu_detected: bool = False) -> Action:
    """Stay out when ``r/(c+e) > (r + theta - threshold)/(c + e + c_t)``, else bid truthfully."""
    if pu_detected:
        return Action.stay_out(channel)
    stay = ledger.reward / (ledger.cost + monitor_fee)
    bid = (ledger.reward + valuation - ledger.threshold) / (ledger.cost + monitor_fee + entry_fee)
    if stay > bid:
        return Action.stay_out(channel)
    return Action.bid_on(channel, valuation)


def max_payment(broadcast: Broadcast) -> float | None:
    pays = [p for p in broadcast.payment.tolist() if p == p]
    return max(pays) if pays else None


def threshold_update(ledger: AgentLedger, own_action: Action, won: bool, broadcast: Broadcast) -> AgentLedger:
    """Pull the threshold toward the slot's maximum winning payment.

    The maximum is taken over every channel in the broadcast (with one
    channel that is just the winner's payment). Fires when the SU stayed out
    and the payment undercut its threshold, or when it bid and either lost
    or the payment reached its threshold. Slots without any payment leave it
    alone, as does an SU that considered no channel. Mutates and returns
    ``ledger``.
    """
    if own_action.channel is None:
        return ledger
    p = max_payment(broadcast)
    if p is None:
        return ledger
    if own_action.is_bid:
        fire = (not won) or p >= ledger.threshold
    else:
        fire = p < ledger.threshold
    if fire:
        ledger.threshold = ledger.alpha * p + (1.0 - ledger.alpha) * ledger.threshold
    return ledger


# -- regret matching ---------------------------------------------------------

@dataclass(frozen=True, slots=True)
class WindowEntry:
    channel: int  # channel chosen this slot
    bid: float | None
    won: bool
    realized: float  # reward actually obtained
    valuations: list  # (K,)
    max_bid: np.ndarray  # (K,) broadcast, NaN where no winner
    payment: np.ndarray  # (K,)
    pu: np.ndarray  # (K,)


def slot_counterfactual(entry: WindowEntry, alt: int) -> float:
    """Reward the SU would have had by bidding its valuation on ``alt`` this slot,
    all other SUs' actions unchanged."""
    if entry.pu[alt]:
        return 0.0
    if entry.bid is not None and entry.channel == alt:
        return entry.realized
    others_max = entry.max_bid[alt]
    theta = float(entry.valuations[alt])
    if math.isnan(others_max) or theta > others_max:
        return theta
    return 0.0


def counterfactual_reward(window_buffer, alt_channel: int) -> float:
    return sum(slot_counterfactual(e, alt_channel) for e in window_buffer)


@dataclass
class RegretState:
    num_channels: int
    window: int = 10  # nu
    kappa: float = 0.0  # 0 means derive it from observed regrets
    buffer: deque = None
    regret: np.ndarray = None  # (K, K): played channel x alternative
    prob: np.ndarray = None
    current: int | None = None
    max_regret: float = 0.0
    # running sums for time-averaged regret diagnostics
    slots: int = 0
    avg_regret_sum: np.ndarray = None

    def __post_init__(self):
        k = self.num_channels
        if k < 1 or self.window < 1:
            raise ValueError("num_channels and window must be >= 1")
        if self.buffer is None:
            self.buffer = deque(maxlen=self.window)
        if self.regret is None:
            self.regret = np.zeros((k, k))
        if self.prob is None:
            self.prob = np.full(k, 1.0 / k)
        if self.avg_regret_sum is None:
            self.avg_regret_sum = np.zeros(k)

    def record(self, entry: WindowEntry) -> "RegretState":
        self.buffer.append(entry)
        self.current = entry.channel
        return self

    def time_averaged_regret(self) -> float:
        """``max over alternatives of (1/T) * sum_t D_t`` over all slots seen so far."""
        if self.slots == 0:
            return 0.0
        return float(self.avg_regret_sum.max() / self.slots)


def average_payoff_gap(state: RegretState) -> np.ndarray:
    """``D(m, alt)`` for every alternative, ``m`` being the channel just played.

    The sum over the window is divided by ``nu`` even while the window is
    still filling up.
    """
    realized = sum(e.realized for e in state.buffer)
    return np.array([(counterfactual_reward(state.buffer, alt) - realized) / state.window
                     for alt in range(state.num_channels)])


def regret_update(state: RegretState) -> RegretState:
    if not state.buffer:
        raise ValueError("regret window is empty")
    m = state.current
    d = average_payoff_gap(state)
    row = np.maximum(d, 0.0)
    row[m] = 0.0
    state.regret[m] = row
    state.max_regret = max(state.max_regret, float(row.max()))
    state.slots += 1
    state.avg_regret_sum += d
    return state


def regret_matching_probs(regret_row: np.ndarray, current: int, kappa: float) -> np.ndarray:
    """``P(alt) = R(m, alt)/kappa`` for ``alt != m``; the remainder stays on ``m``."""
    p = np.asarray(regret_row, dtype=float) / kappa
    p[current] = 0.0
    stay = 1.0 - p.sum()
    if stay < 0.0:
        raise NormalizationError(f"kappa={kappa} too small: {stay} left on current channel")
    p[current] = stay
    return p


def probability_update(state: RegretState) -> RegretState:
    m = state.current
    k = state.num_channels
    # never below 2K times the largest regret seen
    state.kappa = max(state.kappa, 2.0 * k * state.max_regret)
    row = state.regret[m]
    if state.kappa <= 0.0 or not row.any():
        p = np.zeros(k)
        p[m] = 1.0
        state.prob = p
        return state
    while True:
        try:
            state.prob = regret_matching_probs(row, m, state.kappa)
            return state
        except NormalizationError:
            state.kappa *= 2.0


def select_channel(state: RegretState, rng: np.random.Generator) -> int:
    cdf = np.cumsum(state.prob)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, state.num_channels - 1)


# -- baselines ---------------------------------------------------------------

def bcb_act(valuations) -> int:
    """Best channel bidding: the channel with the highest rate, lowest index on ties."""
    return int(np.argmax(valuations))


def ga_assign(all_valuations, pu_active) -> list[int | None]:
    """Genie-aided assignment: a max-total-valuation matching of SUs to idle channels.

    Returns the assigned channel per SU, ``None`` for SUs left out.
    """
    vals = np.asarray(all_valuations, dtype=float)
    n, k = vals.shape
    free = [ch for ch in range(k) if not pu_active[ch]]
    out: list[int | None] = [None] * n
    if not free or n == 0:
        return out
    rows, cols = linear_sum_assignment(vals[:, free], maximize=True)
    for r, c in zip(rows, cols):
        out[int(r)] = free[int(c)]
    return out


def brute_force_assignment_value(all_valuations, pu_active) -> float:
    """Best total valuation over all one-to-one SU/channel matchings (small sizes only)."""
    vals = np.asarray(all_valuations, dtype=float)
    n, k = vals.shape
    free = [ch for ch in range(k) if not pu_active[ch]]
    best = 0.0
    m = min(n, len(free))
    for sus in itertools.permutations(range(n), m):
        for chans in itertools.permutations(free, m):
            best = max(best, sum(vals[s, c] for s, c in zip(sus, chans)))
    return best


# -- per-SU agent --------------------------------------------------------------

class Agent:
    """Holds one SU's ledger, optional regret state and private random stream."""

    def __init__(self, strategy: Strategy, num_channels: int, threshold: float, alpha: float,
                 rng: np.random.Generator, window: int = 10, kappa: float = 0.0):
        self.strategy = Strategy(strategy)
        self.num_channels = num_channels
        self.ledger = AgentLedger(threshold=threshold, alpha=alpha)
        self.rng = rng
        self.regret = RegretState(num_channels, window, kappa) if self.strategy is Strategy.NRL else None

    def choose_channel(self, valuations, assigned: int | None = None) -> int | None:
        if self.strategy is Strategy.GA:
            return assigned
        if self.num_channels == 1:
            return 0
        if self.strategy is Strategy.NRL:
            return select_channel(self.regret, self.rng)
        return bcb_act(valuations)

    def decide(self, valuations, pu_active, entry_fee: float, monitor_fee: float,
               assigned: int | None = None) -> Action:
        ch = self.choose_channel(valuations, assigned)
        if ch is None:
            return Action.stay_out(None)
        pu = bool(pu_active[ch])
        if self.strategy in (Strategy.MYOPIC, Strategy.GA):
            return myopic_act(valuations, ch, pu)
        return threshold_act(self.ledger, float(valuations[ch]), entry_fee, monitor_fee, ch, pu)

    def observe(self, slot: int, action: Action, won: bool, reward: float, valuations,
                broadcast: Broadcast) -> None:
        self.ledger.history.append(HistoryEntry(slot, action, valuations, broadcast))
        if self.strategy is not Strategy.MYOPIC:
            threshold_update(self.ledger, action, won, broadcast)
        if self.regret is not None and action.channel is not None:
            self.regret.record(WindowEntry(action.channel, action.bid, won, reward, valuations,
                                           broadcast.max_bid, broadcast.payment, broadcast.pu_flag))
            regret_update(self.regret)
            probability_update(self.regret)
