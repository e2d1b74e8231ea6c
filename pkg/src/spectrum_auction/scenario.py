"""Run a configured scenario and write its CSV outputs.

Three files land in the output directory:

``trace.csv``
    one row per (point, arm, replication, slot, SU); only when ``trace`` is on.
``summary.csv``
    per sweep point and arm: mean/std of the final utility and Jain index
    over replications, and the gain over the baseline arm.
``su_summary.csv``
    per sweep point, arm and SU: mean/std of the final utility.

Numbers are written with 9 significant digits. Summary values are rounded
to that precision before they are stored, so reading a row back gives the
in-memory values exactly.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, arm_label, serialize
from .engine import build_world, replication_seed, simulate
from .errors import OutputError

TRACE_COLUMNS = ("point", "arm", "replication", "slot", "su_id", "strategy", "gamma", "bid",
                 "action", "payment", "jain_F", "channel")
SUMMARY_COLUMNS = ("point", "arm", "strategies", "replications", "gamma_mean", "gamma_std",
                   "jain_mean", "jain_std", "gain_pct")
SU_SUMMARY_COLUMNS = ("point", "arm", "su_id", "strategy", "gamma_mean", "gamma_std")


def round9(x: float) -> float:
    """Round to 9 significant digits (what the CSV files hold)."""
    return float(fmt(x)) if math.isfinite(x) else x


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".9g")


@dataclass
class RunOutcome:
    """What one (point, arm, replication) run hands back to the writer."""

    final_gamma: np.ndarray
    final_jain: float
    trace: str = ""  # CSV body rows, already formatted


@dataclass
class SummaryRow:
    point: str
    arm: int
    strategies: str
    replications: int
    gamma_mean: float
    gamma_std: float
    jain_mean: float
    jain_std: float
    gain_pct: float | None = None
    su_gamma_mean: list = field(default_factory=list)
    su_gamma_std: list = field(default_factory=list)

    def as_csv(self) -> list[str]:
        return [self.point, str(self.arm), self.strategies, str(self.replications),
                fmt(self.gamma_mean), fmt(self.gamma_std), fmt(self.jain_mean), fmt(self.jain_std),
                fmt(self.gain_pct)]


def _trace_rows(point: str, arm: int, rep: int, m) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [s.value for s in m.strategies]
    gamma, bid, pay, chan = m.gamma.tolist(), m.bid.tolist(), m.payment.tolist(), m.channel.tolist()
    jain = m.jain.tolist()
    for t in range(m.horizon):
        jf = fmt(jain[t])
        for i, name in enumerate(names):
            b = bid[t][i]
            w.writerow((point, arm, rep, t, i, name, fmt(gamma[t][i]), fmt(b),
                        "stay" if b != b else "bid", fmt(pay[t][i]), jf, chan[t][i]))
    return buf.getvalue()


def run_one(task) -> RunOutcome:
    """Simulate one replication of one arm; module-level so worker processes can pickle it."""
    label, cfg, arm, rep = task
    world = build_world(cfg, cfg.arm_strategies(arm), replication_seed(cfg.seed, rep))
    m = simulate(world, cfg.horizon)
    trace = _trace_rows(label, arm, rep, m) if cfg.trace else ""
    return RunOutcome(m.final_gamma.copy(), m.final_jain, trace)


def _stats(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return round9(float(a.mean())), round9(std)


def _baseline_arm(cfg: ScenarioConfig) -> int | None:
    if cfg.baseline is None:
        return None
    for arm, tags in enumerate(cfg.strategies):
        if all(t is cfg.baseline for t in tags):
            return arm
    return None


def _open(path: Path):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from None


def run_scenario(config: ScenarioConfig, out_dir, jobs: int = 1) -> list[SummaryRow]:
    """Run every sweep point, arm and replication of ``config``; write CSVs into ``out_dir``.

    Output is identical for any ``jobs``: runs are seeded per replication and
    written in (point, arm, replication) order.
    """
    config.validate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(out, exc.strerror or str(exc)) from None

    points = config.points()
    tasks = [(label, cfg, arm, rep)
             for label, cfg in points
             for arm in range(len(cfg.strategies))
             for rep in range(cfg.replications)]

    outcomes: dict[tuple[str, int], list[RunOutcome]] = {}
    try:
        with _open(out / "trace.csv") as trace_fh:
            trace_fh.write(",".join(TRACE_COLUMNS) + "\n")
            if jobs > 1 and len(tasks) > 1:
                with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
                    results = pool.map(run_one, tasks)
                    _collect(tasks, results, trace_fh, outcomes)
            else:
                _collect(tasks, map(run_one, tasks), trace_fh, outcomes)
    except OSError as exc:
        if isinstance(exc, OutputError):
            raise
        raise OutputError(out / "trace.csv", exc.strerror or str(exc)) from None

    rows = []
    for label, cfg in points:
        base = _baseline_arm(cfg)
        point_rows = []
        for arm in range(len(cfg.strategies)):
            runs = outcomes.get((label, arm), [])
            per_rep = [float(r.final_gamma.mean()) for r in runs]
            g_mean, g_std = _stats(per_rep)
            j_mean, j_std = _stats([r.final_jain for r in runs])
            su = np.array([r.final_gamma for r in runs]).reshape(len(runs), cfg.num_sus)
            su_stats = [_stats(su[:, i]) for i in range(cfg.num_sus)]
            point_rows.append(SummaryRow(label, arm, arm_label(cfg.strategies[arm]), len(runs),
                                         g_mean, g_std, j_mean, j_std,
                                         su_gamma_mean=[s[0] for s in su_stats],
                                         su_gamma_std=[s[1] for s in su_stats]))
        if base is not None:
            ref = point_rows[base].gamma_mean
            for r in point_rows:
                if r.arm != base and ref > 0 and math.isfinite(r.gamma_mean):
                    r.gain_pct = round9(100.0 * (r.gamma_mean / ref - 1.0))
        rows.extend(point_rows)

    _write_summaries(out, config, rows)
    return rows


def _collect(tasks, results, trace_fh, outcomes) -> None:
    for (label, _, arm, _), res in zip(tasks, results):
        if res.trace:
            trace_fh.write(res.trace)
        res.trace = ""
        outcomes.setdefault((label, arm), []).append(res)


def _write_summaries(out: Path, config: ScenarioConfig, rows: list[SummaryRow]) -> None:
    strategies = {}
    for label, cfg in config.points():
        for arm in range(len(cfg.strategies)):
            strategies[(label, arm)] = cfg.arm_strategies(arm)
    for name, write in (("summary.csv", lambda w: _summary(w, rows)),
                        ("su_summary.csv", lambda w: _su_summary(w, rows, strategies)),
                        ("config.txt", None)):
        path = out / name
        try:
            with _open(path) as fh:
                if write is None:
                    fh.write(serialize(config))
                else:
                    write(csv.writer(fh, lineterminator="\n"))
        except OSError as exc:
            if isinstance(exc, OutputError):
                raise
            raise OutputError(path, exc.strerror or str(exc)) from None


def _summary(w, rows) -> None:
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        if r.replications:
            w.writerow(r.as_csv())


def _su_summary(w, rows, strategies) -> None:
    w.writerow(SU_SUMMARY_COLUMNS)
    for r in rows:
        if not r.replications:
            continue
        tags = strategies[(r.point, r.arm)]
        for i, (m, s) in enumerate(zip(r.su_gamma_mean, r.su_gamma_std)):
            w.writerow([r.point, r.arm, i, tags[i].value, fmt(m), fmt(s)])


def read_summary(path) -> list[dict]:
    """Parse a ``summary.csv`` back into typed values."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out.append({
                "point": rec["point"], "arm": int(rec["arm"]), "strategies": rec["strategies"],
                "replications": int(rec["replications"]),
                **{k: float(rec[k]) for k in ("gamma_mean", "gamma_std", "jain_mean", "jain_std")},
                "gain_pct": float(rec["gain_pct"]) if rec["gain_pct"] else None,
            })
    return out


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)
