"""Repeated-auction simulation loop and its metrics.

Slot order is fixed: channel evolution, agent decisions, auction, ledger and
learner updates. Agents only see broadcasts from earlier slots, so the order
in which they decide within a slot does not matter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from .agents import Agent, Strategy, ga_assign
from .config import PuWindow, ScenarioConfig
from .errors import ConfigError, UndefinedFairnessError
from .mechanism import AuctionRound, AuctionRule, Broadcast, action_matrix, clear
from .valuation import ValuationCdf, initial_threshold


def utility(ledger) -> float:
    return ledger.reward / ledger.cost


def jain_fairness(gammas) -> float:
    """``(sum g)^2 / (N sum g^2)``, clipped into ``[1/N, 1]`` against rounding."""
    g = [float(x) for x in gammas]
    n = len(g)
    top = max(g, default=0.0)
    if top <= 0.0:
        raise UndefinedFairnessError("Jain index undefined for an all-zero vector")
    g = [x / top for x in g]  # scale-free; avoids underflow in the squares
    f = sum(g) ** 2 / (n * sum(x * x for x in g))
    return min(max(f, 1.0 / n), 1.0)


@dataclass(frozen=True)
class FeeSchedule:
    entry_fee: float
    monitor_fee: float
    segments: tuple[tuple[int, float, float], ...] = ()

    def at(self, slot: int) -> tuple[float, float]:
        c, e = self.entry_fee, self.monitor_fee
        for start, sc, se in self.segments:
            if start > slot:
                break
            c, e = sc, se
        return c, e


@dataclass
class Streams:
    topology: np.random.Generator
    fading: np.random.Generator
    pu: np.random.Generator
    auction: np.random.Generator
    agents: list[np.random.Generator]

    @classmethod
    def from_seed(cls, seed_seq: np.random.SeedSequence, num_sus: int) -> "Streams":
        children = seed_seq.spawn(4 + num_sus)
        gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
        return cls(*gens[:4], gens[4:])


def replication_seed(seed: int, replication: int) -> np.random.SeedSequence:
    """Independent per-replication seed; adding replications leaves earlier ones intact."""
    return np.random.SeedSequence(seed, spawn_key=(replication,))


@dataclass
class SlotRecord:
    valuations: np.ndarray  # (N, K)
    actions: list
    rewards: list
    charges: list
    won: list
    payments: list  # what each SU paid the coordinator


@dataclass
class World:
    slot: int
    radio: chan.RadioParams
    topology: chan.Topology
    channel: chan.ChannelState
    agents: list[Agent]
    fees: FeeSchedule
    streams: Streams
    pu_windows: tuple[PuWindow, ...] = ()
    rule: AuctionRule = AuctionRule.SECOND_PRICE
    monitor_fee_per_channel: bool = False
    rho: float = field(default=None)
    last: SlotRecord | None = None
    block_size: int = 512
    _block: tuple | None = field(default=None, repr=False)
    _pos: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.rho is None:
            self.rho = self.radio.correlation
        if not self.agents or self.channel.shape[1] < 1:
            raise ConfigError("world needs at least one SU and one channel")

    def _advance_channel(self) -> list:
        """Move ``self.channel`` to the next slot and return that slot's rates as nested lists.

        Fading, PU activity and rates are generated ``block_size`` slots at a
        time; the random streams are consumed exactly as per-slot stepping would.
        """
        if self._block is None or self._pos == self.block_size:
            prev = self.channel.gain
            g = chan.fading_block(prev, self.rho, self.streams.fading, self.block_size)
            h = np.abs(g) ** 2
            pu = chan.pu_block(self.channel.pu_prob, self.streams.pu, self.block_size)
            rates = chan.rate(self.topology.pathloss_gains[None, :, None], h, self.radio)
            self._block = (g, h, pu, rates, rates.tolist())
            self._pos = 0
        g, h, pu, rates, rate_rows = self._block
        b = self._pos
        self._pos += 1
        self.channel = chan.ChannelState(h[b], pu[b], self.channel.pu_prob, g[b])
        return rates[b], rate_rows[b]

    @property
    def num_sus(self) -> int:
        return len(self.agents)

    @property
    def num_channels(self) -> int:
        return self.channel.shape[1]

    @property
    def strategies(self) -> tuple[Strategy, ...]:
        return tuple(a.strategy for a in self.agents)


def build_world(config: ScenarioConfig, strategies, seed_seq: np.random.SeedSequence) -> World:
    n, k = config.num_sus, config.num_channels
    streams = Streams.from_seed(seed_seq, n)
    radio = config.radio
    if config.positions is not None:
        topo = chan.Topology.from_positions(config.positions, (config.bs_distance, 0.0),
                                            radio.pathloss_exponent)
    else:
        topo_rng = (np.random.default_rng(config.topology_seed) if config.topology_seed is not None
                    else streams.topology)
        topo = chan.random_topology(n, config.area_side, config.bs_distance,
                                    radio.pathloss_exponent, topo_rng)
    fees = FeeSchedule(config.entry_fee, config.monitor_fee, config.fee_schedule)
    c1, e1 = fees.at(0)
    agents = []
    for i, strat in enumerate(strategies):
        theta0 = 0.0
        if n >= 2:
            theta0 = initial_threshold(c1, e1, n, ValuationCdf.rayleigh(topo.pathloss_gains[i], radio))
        agents.append(Agent(strat, k, theta0, config.alpha, streams.agents[i],
                            window=config.nu, kappa=config.kappa_init))
    state = chan.initial_state(n, config.pu_prob, streams.fading)
    return World(0, radio, topo, state, agents, fees, streams, config.pu_windows,
                 config.auction_rule, config.monitor_fee_per_channel)


def step(world: World) -> tuple[World, AuctionRound, Broadcast]:
    """Advance ``world`` by one slot in place; returns it with the slot's auction and broadcast."""
    t = world.slot
    n, k = world.num_sus, world.num_channels
    vals, rows = world._advance_channel()
    pu = world.channel.pu_active
    if world.pu_windows:
        pu = pu.copy()
        for w in world.pu_windows:
            if w.start <= t < w.end:
                if w.channel is None:
                    pu[:] = True
                else:
                    pu[w.channel] = True
        world.channel = chan.ChannelState(world.channel.fading_h, pu, world.channel.pu_prob,
                                          world.channel.gain)

    entry_fee, monitor_fee = world.fees.at(t)
    assigned = [None] * n
    ga = [i for i, a in enumerate(world.agents) if a.strategy is Strategy.GA]
    if ga:
        for i, ch in zip(ga, ga_assign(vals[ga], pu)):
            assigned[i] = ch
    pu_list = pu.tolist()
    actions = [a.decide(rows[i], pu_list, entry_fee, monitor_fee, assigned[i])
               for i, a in enumerate(world.agents)]

    rnd, broadcast = clear(t, action_matrix(actions, k), pu, world.streams.auction, world.rule)

    monitoring = monitor_fee * k if world.monitor_fee_per_channel else monitor_fee
    chi = rnd.allocation.tolist()
    paid = rnd.payments.tolist()
    rewards = [0.0] * n
    charges = [monitoring] * n
    wins = [False] * n
    payments = [0.0] * n
    for i, (agent, act) in enumerate(zip(world.agents, actions)):
        if act.is_bid:
            ch = act.channel
            wins[i] = chi[i][ch] == 1
            charge = monitoring + entry_fee
            if wins[i]:
                rewards[i] = rows[i][ch]
                payments[i] = paid[i][ch]
                charge += payments[i]
            charges[i] = charge
        agent.ledger.reward += rewards[i]
        agent.ledger.cost += charges[i]
        agent.observe(t, act, wins[i], rewards[i], rows[i], broadcast)
    world.last = SlotRecord(vals, actions, rewards, charges, wins, payments)
    world.slot = t + 1
    return world, rnd, broadcast


@dataclass
class MetricsSeries:
    """Per-slot trajectories of one simulation run (arrays are indexed ``[slot, su]``)."""

    strategies: tuple[Strategy, ...]
    gamma: np.ndarray
    jain: np.ndarray
    reward: np.ndarray  # accumulated, after the slot
    cost: np.ndarray
    charges: np.ndarray  # charged during the slot
    valuation: np.ndarray  # (T, N, K)
    bid: np.ndarray  # NaN for stay-outs
    channel: np.ndarray  # -1 when no channel was considered
    won: np.ndarray
    payment: np.ndarray
    pu: np.ndarray  # (T, K)

    @classmethod
    def empty(cls, strategies, horizon: int, num_channels: int) -> "MetricsSeries":
        n, t = len(strategies), horizon
        return cls(tuple(strategies), np.zeros((t, n)), np.zeros(t), np.zeros((t, n)),
                   np.zeros((t, n)), np.zeros((t, n)), np.zeros((t, n, num_channels)),
                   np.full((t, n), np.nan), np.full((t, n), -1, dtype=np.int64),
                   np.zeros((t, n), dtype=bool), np.zeros((t, n)), np.zeros((t, num_channels), dtype=bool))

    @property
    def horizon(self) -> int:
        return len(self.jain)

    @property
    def final_gamma(self) -> np.ndarray:
        if self.horizon == 0:
            return np.ones(len(self.strategies))
        return self.gamma[-1]

    @property
    def final_jain(self) -> float:
        return float(self.jain[-1]) if self.horizon else 1.0


def simulate(world: World, horizon: int) -> MetricsSeries:
    n, k = world.num_sus, world.num_channels
    if horizon == 0:
        return MetricsSeries.empty(world.strategies, 0, k)
    cols = {name: [] for name in ("gamma", "jain", "reward", "cost", "charges", "valuation",
                                  "bid", "channel", "won", "payment", "pu")}
    nan = math.nan
    for _ in range(horizon):
        _, rnd, _ = step(world)
        rec = world.last
        reward = [a.ledger.reward for a in world.agents]
        cost = [a.ledger.cost for a in world.agents]
        gamma = [r / c for r, c in zip(reward, cost)]
        bid, channel = [nan] * n, [-1] * n
        for i, act in enumerate(rec.actions):
            if act.channel is not None:
                channel[i] = act.channel
            if act.is_bid:
                bid[i] = act.bid
        for name, row in (("gamma", gamma), ("jain", jain_fairness(gamma)), ("reward", reward),
                          ("cost", cost), ("charges", rec.charges), ("valuation", rec.valuations),
                          ("bid", bid), ("channel", channel), ("won", rec.won), ("payment", rec.payments),
                          ("pu", rnd.pu_active)):
            cols[name].append(row)
    return MetricsSeries(
        world.strategies,
        gamma=np.array(cols["gamma"]), jain=np.array(cols["jain"]),
        reward=np.array(cols["reward"]), cost=np.array(cols["cost"]),
        charges=np.array(cols["charges"]), valuation=np.array(cols["valuation"]),
        bid=np.array(cols["bid"]), channel=np.array(cols["channel"], dtype=np.int64),
        won=np.array(cols["won"], dtype=bool), payment=np.array(cols["payment"]),
        pu=np.array(cols["pu"], dtype=bool))


def run(config: ScenarioConfig, arm: int = 0, replication: int = 0) -> MetricsSeries:
    """Simulate one arm of ``config`` for one replication."""
    config.validate()
    if config.sweep:
        raise ConfigError("run() takes a single sweep point; use config.points()")
    world = build_world(config, config.arm_strategies(arm), replication_seed(config.seed, replication))
    return simulate(world, config.horizon)
