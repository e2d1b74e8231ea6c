"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
The trend criteria simulate full 10^4-slot horizons over many replications
and take several minutes in total.
"""
import math
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent))
from oracles import auction_oracle, random_instance  # noqa: E402

from spectrum_auction.agents import Strategy  # noqa: E402
from spectrum_auction.channel import RadioParams, random_topology  # noqa: E402
from spectrum_auction.config import ScenarioConfig, preset  # noqa: E402
from spectrum_auction.engine import (build_world, jain_fairness, replication_seed, run, simulate,  # noqa: E402
                                     step)
from spectrum_auction.mechanism import AuctionRule, run_auction  # noqa: E402
from spectrum_auction.scenario import run_scenario  # noqa: E402
from spectrum_auction.valuation import ValuationCdf, initial_threshold  # noqa: E402

RESULTS: dict[int, tuple[bool, str]] = {}


def record(num: int, ok: bool, detail: str) -> bool:
    RESULTS[num] = (bool(ok), detail)
    return bool(ok)


def report_lines() -> list[str]:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


def _summaries(cfg):
    with tempfile.TemporaryDirectory() as d:
        return run_scenario(replace(cfg, trace=False), d)


# -- 1 -------------------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for i in range(10_000):
        rule = AuctionRule.FIRST_PRICE if i % 2 else AuctionRule.SECOND_PRICE
        bids, pu = random_instance(rng, grid=i % 4 < 2)  # half the instances on a coarse grid: many ties
        seed = int(rng.integers(2 ** 32))
        rnd = run_auction(0, bids, pu, np.random.default_rng(seed), rule)
        twin = np.random.default_rng(seed)
        chi, pay = auction_oracle(bids, pu, rule, lambda k: int(twin.integers(k)))
        if rnd.allocation.tolist() != chi or rnd.payments.tolist() != pay:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    return record(1, mismatches == 0 and elapsed < 5.0,
                  f"{mismatches} mismatches over 10^4 instances in {elapsed:.2f}s (limit 5s)")


# -- 2 -------------------------------------------------------------------------

def criterion_2():
    u = ValuationCdf.uniform()
    a = initial_threshold(3.0, 1.0, 2, u)  # e/(1+c) = 0.25
    b = initial_threshold(7.0, 1.0, 3, u)  # e/(1+c) = 0.125
    z = initial_threshold(10.0, 0.0, 2, ValuationCdf.rayleigh(1e-9, RadioParams()))
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        e, c, n = rng.uniform(0.01, 10), rng.uniform(0, 10), int(rng.integers(2, 17))
        g = random_topology(1, 100.0, 1000.0, 3.0, rng).pathloss_gains[0]
        F = ValuationCdf.rayleigh(g, RadioParams())
        th = initial_threshold(c, e, n, F)
        worst = max(worst, abs(th * F(th) ** (n - 1) - e / (1 + c)))
    ok = abs(a - 0.5) <= 1e-8 and abs(b - 0.5) <= 1e-8 and z == 0.0 and worst <= 1e-9
    return record(2, ok, f"fixtures {a:.10f}, {b:.10f}; e=0 -> {z}; worst residual {worst:.2e}")


# -- 3 -------------------------------------------------------------------------

def criterion_3():
    cfg = preset("fig2")
    t0 = time.perf_counter()
    final = {0: [], 1: []}
    traces = {0: [], 1: []}
    for arm in (0, 1):
        for rep in range(cfg.replications):
            m = run(cfg, arm, rep)
            final[arm].append(m.final_gamma)
            traces[arm].append(m.gamma)
    elapsed = time.perf_counter() - t0
    prop, myo = np.mean(final[0], axis=0), np.mean(final[1], axis=0)
    beats = bool((prop > myo).all())
    window = slice(4000, 6000)
    dips = []
    for arm in (0, 1):
        mean_trace = np.mean(traces[arm], axis=0)[window]
        dips.append(bool((np.diff(mean_trace, axis=0) < 0).all()))
    ok = beats and all(dips) and elapsed < 30.0
    return record(3, ok, f"proposed {np.round(prop, 4)} vs myopic {np.round(myo, 4)}; "
                         f"strictly decreasing in PU window: {dips}; {cfg.replications} reps in {elapsed:.1f}s")


# -- 4 -------------------------------------------------------------------------

def criterion_4():
    cfg = preset("fig3")
    rows = _summaries(cfg)
    gains: dict[float, list[tuple[float, float]]] = {}
    for r in rows:
        if r.gain_pct is None:
            continue
        parts = dict(kv.split("=") for kv in r.point.split(";"))
        gains.setdefault(float(parts["monitor_fee"]), []).append((float(parts["entry_fee"]), r.gain_pct))
    best = max(g for series in gains.values() for _, g in series)
    rhos = {e: stats.spearmanr(*zip(*sorted(series))).statistic for e, series in gains.items()}
    ok = 5.0 <= best <= 35.0 and all(rho > 0 for rho in rhos.values())
    per_e = "; ".join(f"e={e:g}: gain {min(g for _, g in s):.1f}..{max(g for _, g in s):.1f}%, "
                      f"spearman {rhos[e]:.2f}" for e, s in sorted(gains.items()))
    return record(4, ok, f"max gain {best:.1f}% (band 5..35%); {per_e}; {cfg.replications} reps")


# -- 5 -------------------------------------------------------------------------

def criterion_5():
    rows = _summaries(preset("fig56"))
    by_n: dict[int, dict[int, object]] = {}
    for r in rows:
        by_n.setdefault(int(r.point.split("=")[1]), {})[r.arm] = r
    ns = sorted(by_n)
    prop = [by_n[n][0].gamma_mean for n in ns]
    myo = [by_n[n][1].gamma_mean for n in ns]
    gain = [by_n[n][0].gain_pct for n in ns]
    jp = [by_n[n][0].jain_mean for n in ns]
    jm = [by_n[n][1].jain_mean for n in ns]
    a = all(np.diff(prop) < 0) and all(np.diff(myo) < 0)
    b = all(p >= m for p, m in zip(prop, myo))
    c = all(5.0 <= g <= 40.0 for g in gain)
    d = all(x >= y for x, y in zip(jp, jm))
    detail = (f"N={ns}: gamma proposed {np.round(prop, 4).tolist()}, myopic {np.round(myo, 4).tolist()}; "
              f"gain% {np.round(gain, 1).tolist()}; Jain proposed {np.round(jp, 4).tolist()} vs myopic "
              f"{np.round(jm, 4).tolist()}; (a) {a} (b) {b} (c) {c} (d) {d}")
    return record(5, a and b and c and d, detail)


# -- 6 -------------------------------------------------------------------------

def criterion_6():
    cfg = preset("fig7")
    rows = {r.strategies: np.array(r.su_gamma_mean) for r in _summaries(cfg)}
    bcb, ga, nrl = rows["bcb"], rows["ga"], rows["nrl"]
    order = bool(((ga >= nrl) & (nrl >= bcb)).all())
    close = bool((ga - nrl <= 0.5 * (ga - bcb)).all())
    return record(6, order and close,
                  f"per-SU mean final gamma GA {np.round(ga, 4)}, NRL {np.round(nrl, 4)}, BCB {np.round(bcb, 4)}; "
                  f"ordering {order}; GA-NRL {np.round(ga - nrl, 4)} <= half gap {np.round(0.5 * (ga - bcb), 4)}: "
                  f"{close}; {cfg.replications} reps")


# -- 7 -------------------------------------------------------------------------

def criterion_7(replications: int = 10, horizon: int = 5000):
    """One NRL agent against a stationary always-bid opponent in the 2-SU, 2-channel setup."""
    cfg = replace(preset("fig7"), horizon=horizon)
    worst = -math.inf
    for arm in ((Strategy.NRL, Strategy.MYOPIC), (Strategy.MYOPIC, Strategy.NRL)):
        i = arm.index(Strategy.NRL)
        for rep in range(replications):
            world = build_world(cfg, arm, replication_seed(cfg.seed, rep))
            m = simulate(world, horizon)
            ratio = world.agents[i].regret.time_averaged_regret() / m.valuation[:, i, :].mean()
            worst = max(worst, ratio)
    return record(7, worst < 0.05, f"worst time-averaged max regret / mean valuation = {worst:.4f} "
                                   f"(limit 0.05) over {2 * replications} agent runs of {horizon} slots")


# -- 8 -------------------------------------------------------------------------

def _random_config(rng) -> ScenarioConfig:
    n, k = int(rng.integers(2, 7)), int(rng.integers(1, 4))
    tags = list(Strategy)
    arm = tuple(tags[j] for j in rng.integers(len(tags), size=n))
    return ScenarioConfig(num_sus=n, num_channels=k, horizon=0, entry_fee=float(rng.uniform(0, 10)),
                          monitor_fee=float(rng.uniform(0, 10)), pu_prob=tuple(rng.uniform(0, 0.4, k).tolist()),
                          strategies=(arm,), kappa_init=float(rng.choice([0.0, 0.5, 5.0])),
                          auction_rule=AuctionRule.FIRST_PRICE if rng.random() < 0.3 else AuctionRule.SECOND_PRICE,
                          seed=int(rng.integers(2 ** 32)))


def criterion_8(total_steps: int = 100_000, steps_per_world: int = 2000):
    rng = np.random.default_rng(99)
    violations: dict[str, int] = {}

    def bad(name):
        violations[name] = violations.get(name, 0) + 1

    done = 0
    while done < total_steps:
        cfg = _random_config(rng)
        world = build_world(cfg, cfg.arm_strategies(0), replication_seed(cfg.seed, 0))
        n = cfg.num_sus
        reward = np.array([a.ledger.reward for a in world.agents])
        cost = np.array([a.ledger.cost for a in world.agents])
        for _ in range(min(steps_per_world, total_steps - done)):
            t = world.slot
            _, rnd, _ = step(world)
            rec = world.last
            c_t, e_t = world.fees.at(t)
            for a in world.agents:
                if a.regret is not None:
                    p = a.regret.prob
                    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
                        bad("probability vector")
                    if (a.regret.regret < 0).any():
                        bad("negative regret")
            if (rnd.allocation.sum(axis=0) > 1).any():
                bad("two winners on a channel")
            won = rnd.allocation == 1
            if cfg.auction_rule is AuctionRule.SECOND_PRICE and (rnd.payments[won] > rnd.bids[won]).any():
                bad("payment above winning bid")
            for i, act in enumerate(rec.actions):
                if act.is_bid and act.bid != rec.valuations[i][act.channel]:
                    bad("untruthful bid")
                charge = e_t + (c_t if act.is_bid else 0.0) + (rec.payments[i] if rec.won[i] else 0.0)
                reward[i] += rec.valuations[i][act.channel] if rec.won[i] else 0.0
                cost[i] += charge
            if (reward != [a.ledger.reward for a in world.agents]).any() or \
                    (cost != [a.ledger.cost for a in world.agents]).any():
                bad("ledger audit")
            f = jain_fairness([a.ledger.utility for a in world.agents])
            if not 1.0 / n <= f <= 1.0:
                bad("Jain out of range")
            done += 1
    detail = f"{done} randomized steps, violations: {violations or 'none'}"
    return record(8, not violations and done >= 100_000, detail)


# -- 9 -------------------------------------------------------------------------

def criterion_9():
    cfg = replace(preset("fig7"), horizon=2000, replications=3, seed=12345)
    files = ("trace.csv", "summary.csv", "su_summary.csv")
    with tempfile.TemporaryDirectory() as d:
        outs = []
        for tag, jobs in (("a", 1), ("b", 1), ("c", 2), ("d", 3)):
            run_scenario(cfg, Path(d) / tag, jobs=jobs)
            outs.append([(Path(d) / tag / f).read_bytes() for f in files])
    same = all(o == outs[0] for o in outs[1:])
    size = sum(len(b) for b in outs[0])
    return record(9, same, f"two serial runs and runs with 2 and 3 workers byte-identical: {same} ({size} bytes)")


# -- pytest entry points -----------------------------------------------------------

def test_criterion_1_mechanism_oracle():
    assert criterion_1(), RESULTS[1][1]


def test_criterion_2_initial_threshold():
    assert criterion_2(), RESULTS[2][1]


def test_criterion_3_two_su_trend():
    assert criterion_3(), RESULTS[3][1]


def test_criterion_4_fee_sweep_gain():
    assert criterion_4(), RESULTS[4][1]


def test_criterion_5_population_sweep():
    assert criterion_5(), RESULTS[5][1]


def test_criterion_6_multichannel_ordering():
    assert criterion_6(), RESULTS[6][1]


def test_criterion_7_no_regret():
    assert criterion_7(), RESULTS[7][1]


def test_criterion_8_invariants():
    assert criterion_8(), RESULTS[8][1]


def test_criterion_9_determinism():
    assert criterion_9(), RESULTS[9][1]


if __name__ == "__main__":
    for num, fn in enumerate((criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
                              criterion_7, criterion_8, criterion_9), start=1):
        fn()
        ok, detail = RESULTS[num]
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
