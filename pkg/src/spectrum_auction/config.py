"""Scenario configuration: a flat ``key = value`` document plus named presets.

Example::

    preset = fig2            # start from a preset, then override
    replications = 5
    strategies = threshold; myopic
    pu_windows = 4000-6000

List syntax: ``;`` separates arms/segments, ``,`` separates items inside one.
``sweep.<field> = v1, v2, ...`` runs the scenario on the cartesian product
of the listed values.
"""
from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field, replace

from .agents import Strategy
from .channel import RadioParams, dbm_to_watts
from .errors import ConfigError
from .mechanism import AuctionRule

RADIO_KEYS = ("bandwidth", "tx_power", "noise_power", "pathloss_exponent", "frame_length",
              "doppler_freq", "include_tx_power")
SWEEPABLE = ("num_sus", "num_channels", "horizon", "entry_fee", "monitor_fee", "alpha", "nu",
             "kappa_init", "area_side", "bs_distance")


@dataclass(frozen=True)
class PuWindow:
    start: int
    end: int  # exclusive
    channel: int | None = None  # None: every channel

    def active(self, slot: int, channel: int) -> bool:
        return self.start <= slot < self.end and (self.channel is None or self.channel == channel)


@dataclass(frozen=True)
class ScenarioConfig:
    num_sus: int = 2
    num_channels: int = 1
    horizon: int = 10_000
    entry_fee: float = 10.0
    monitor_fee: float = 1.0
    # (start_slot, entry_fee, monitor_fee) segments overriding the constant fees
    fee_schedule: tuple[tuple[int, float, float], ...] = ()
    radio: RadioParams = RadioParams()
    area_side: float = 100.0
    bs_distance: float = 1000.0
    positions: tuple[tuple[float, float], ...] | None = None
    topology_seed: int | None = None  # None: redraw per replication
    pu_prob: tuple[float, ...] = (0.0,)
    pu_windows: tuple[PuWindow, ...] = ()
    # one arm per entry; an arm is one tag for every SU or one tag per SU
    strategies: tuple[tuple[Strategy, ...], ...] = ((Strategy.THRESHOLD,), (Strategy.MYOPIC,))
    alpha: float = 0.05
    nu: int = 10
    kappa_init: float = 0.0  # 0: derived from observed regrets
    auction_rule: AuctionRule = AuctionRule.SECOND_PRICE
    monitor_fee_per_channel: bool = False
    seed: int = 0
    replications: int = 1
    trace: bool = True
    baseline: Strategy | None = Strategy.MYOPIC
    sweep: tuple[tuple[str, tuple], ...] = ()

    def validate(self) -> "ScenarioConfig":
        for name in ("num_sus", "num_channels", "nu"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", field=name)
        for name in ("horizon", "replications"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", field=name)
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}", field="alpha")
        for name in ("entry_fee", "monitor_fee", "kappa_init"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {value}", field=name)
        starts = [seg[0] for seg in self.fee_schedule]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("fee segments need strictly increasing start slots", field="fee_schedule")
        for start, c, e in self.fee_schedule:
            if start < 0 or not (math.isfinite(c) and math.isfinite(e) and c >= 0 and e >= 0):
                raise ConfigError(f"bad fee segment {start}:{c}:{e}", field="fee_schedule")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer", field="seed")
        if len(self.pu_prob) != self.num_channels:
            raise ConfigError(f"pu_prob needs {self.num_channels} entries, got {len(self.pu_prob)}",
                              field="pu_prob")
        if any(not 0.0 <= p <= 1.0 for p in self.pu_prob):
            raise ConfigError("pu_prob entries must lie in [0, 1]", field="pu_prob")
        for w in self.pu_windows:
            if w.start < 0 or w.end < w.start or (w.channel is not None and not 0 <= w.channel < self.num_channels):
                raise ConfigError(f"bad PU window {w}", field="pu_windows")
        if self.positions is not None and len(self.positions) != self.num_sus:
            raise ConfigError(f"positions lists {len(self.positions)} SUs, num_sus is {self.num_sus}",
                              field="positions")
        if self.area_side <= 0 or self.bs_distance < 0:
            raise ConfigError("area_side must be > 0 and bs_distance >= 0", field="area_side")
        if not self.strategies:
            raise ConfigError("at least one strategy arm is required", field="strategies")
        for arm in self.strategies:
            if len(arm) not in (1, self.num_sus):
                raise ConfigError(f"arm {arm_label(arm)} must list 1 or {self.num_sus} strategies",
                                  field="strategies")
        for name, values in self.sweep:
            if name not in SWEEPABLE:
                raise ConfigError(f"cannot sweep {name!r}", field="sweep." + name)
            if not values:
                raise ConfigError(f"empty sweep for {name!r}", field="sweep." + name)
        return self

    def arm_strategies(self, arm: int) -> tuple[Strategy, ...]:
        tags = self.strategies[arm]
        return tags * self.num_sus if len(tags) == 1 else tags

    def points(self) -> list[tuple[str, "ScenarioConfig"]]:
        """Expand the sweep into ``(label, config)`` pairs, in listed order."""
        if not self.sweep:
            return [("", self)]
        names = [n for n, _ in self.sweep]
        out = []
        for combo in itertools.product(*(v for _, v in self.sweep)):
            changes = dict(zip(names, combo))
            if "num_channels" in changes and len(self.pu_prob) == 1:
                changes["pu_prob"] = self.pu_prob * changes["num_channels"]
            cfg = replace(self, sweep=(), **changes)
            if len(cfg.pu_prob) != cfg.num_channels:
                cfg = replace(cfg, pu_prob=(cfg.pu_prob[0],) * cfg.num_channels)
            label = ";".join(f"{n}={_fmt_scalar(v)}" for n, v in zip(names, combo))
            out.append((label, cfg.validate()))
        return out


def arm_label(arm) -> str:
    return ",".join(Strategy(s).value for s in arm)


# -- presets -----------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "fig2": dict(num_sus=2, num_channels=1, horizon=10_000, entry_fee=10.0, monitor_fee=1.0,
                 pu_prob=(0.0,), pu_windows=(PuWindow(4000, 6000),), replications=20),
    "fig3": dict(num_sus=2, num_channels=1, horizon=10_000, pu_prob=(0.0,), replications=20,
                 trace=False,
                 sweep=(("monitor_fee", (1.0, 5.0, 10.0)),
                        ("entry_fee", tuple(float(c) for c in range(1, 11))))),
    "fig4": dict(num_sus=16, num_channels=1, horizon=10_000, entry_fee=5.0, monitor_fee=5.0,
                 pu_prob=(0.0,), replications=1),
    "fig56": dict(num_channels=1, horizon=10_000, entry_fee=10.0, monitor_fee=1.0, pu_prob=(0.0,),
                  replications=20, trace=False, sweep=(("num_sus", (2, 4, 8, 16)),)),
    "fig7": dict(num_sus=2, num_channels=2, horizon=10_000, entry_fee=5.0, monitor_fee=5.0, nu=10,
                 pu_prob=(0.0, 0.0), replications=20, baseline=None,
                 strategies=((Strategy.BCB,), (Strategy.GA,), (Strategy.NRL,))),
}


def preset(name: str) -> ScenarioConfig:
    try:
        return ScenarioConfig(**PRESETS[name]).validate()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


# -- text format -------------------------------------------------------------

def _fmt_scalar(v) -> str:
    if isinstance(v, (Strategy, AuctionRule)):
        return v.value
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text: str) -> int:
    t = text.strip().replace("_", "")
    try:
        return int(t)
    except ValueError:
        f = float(t)
        if not f.is_integer():
            raise ValueError(f"expected an integer, got {text!r}") from None
        return int(f)


def _float(text: str) -> float:
    return float(text.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_float(x) for x in text.split(",") if x.strip())


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none") else _int(text)


def _strategies(text: str):
    arms = []
    for chunk in text.split(";"):
        tags = tuple(Strategy(t.strip().lower()) for t in chunk.split(",") if t.strip())
        if tags:
            arms.append(tags)
    return tuple(arms)


def _positions(text: str):
    if text.strip().lower() in ("", "none"):
        return None
    pts = []
    for chunk in text.split(";"):
        xy = _floats(chunk)
        if len(xy) != 2:
            raise ValueError(f"position {chunk.strip()!r} needs two coordinates")
        pts.append(xy)
    return tuple(pts)


def _pu_windows(text: str):
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        span, _, ch = chunk.partition("@")
        start, _, end = span.partition("-")
        out.append(PuWindow(_int(start), _int(end), _int(ch) if ch.strip() else None))
    return tuple(out)


def _fee_schedule(text: str):
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            parts = chunk.split(":")
            if len(parts) != 3:
                raise ValueError(f"fee segment {chunk.strip()!r} must be start:entry_fee:monitor_fee")
            out.append((_int(parts[0]), _float(parts[1]), _float(parts[2])))
    return tuple(out)


def _baseline(text: str):
    t = text.strip().lower()
    return None if t in ("", "none") else Strategy(t)


PARSERS = {
    "num_sus": _int, "num_channels": _int, "horizon": _int,
    "entry_fee": _float, "monitor_fee": _float, "fee_schedule": _fee_schedule,
    "bandwidth": _float, "tx_power": _float, "noise_power": _float,
    "pathloss_exponent": _float, "frame_length": _float, "doppler_freq": _float,
    "include_tx_power": _bool,
    "area_side": _float, "bs_distance": _float, "positions": _positions,
    "topology_seed": _optional_int, "pu_prob": _floats, "pu_windows": _pu_windows,
    "strategies": _strategies, "alpha": _float, "nu": _int, "kappa_init": _float,
    "auction_rule": lambda t: AuctionRule(t.strip().lower()),
    "monitor_fee_per_channel": _bool, "seed": _int, "replications": _int, "trace": _bool,
    "baseline": _baseline,
}
ALIASES = {
    "tx_power_dbm": ("tx_power", lambda t: dbm_to_watts(_float(t))),
    "tx_power_mw": ("tx_power", lambda t: _float(t) / 1000.0),
    "noise_dbm": ("noise_power", lambda t: dbm_to_watts(_float(t))),
}


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse a config document into a validated :class:`ScenarioConfig`.

    A ``preset`` line (anywhere in the document) selects the starting point;
    otherwise ``base`` or the defaults are used. Errors carry the 1-based line.
    """
    entries: list[tuple[int, str, str]] = []
    start = base
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
        seen[key] = lineno
        if key == "preset":
            start = preset(value.strip())
            continue
        entries.append((lineno, key, value))

    cfg = start if start is not None else ScenarioConfig()
    top: dict = {}
    radio: dict = {}
    sweep: list = []
    lines: dict[str, int] = {}
    for lineno, key, value in entries:
        try:
            if key.startswith("sweep."):
                name = key[len("sweep."):]
                if name not in SWEEPABLE:
                    raise ConfigError(f"cannot sweep {name!r}; sweepable: {', '.join(SWEEPABLE)}", lineno)
                conv = PARSERS[name]
                values = tuple(conv(v) for v in value.split(",") if v.strip())
                sweep.append((name, values))
                lines[key] = lineno
                continue
            if key in ALIASES:
                target, conv = ALIASES[key]
                parsed = conv(value)
            elif key in PARSERS:
                target, parsed = key, PARSERS[key](value)
            else:
                raise ConfigError(f"unknown key {key!r}", lineno)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        if target in lines and target != key:
            raise ConfigError(f"{target!r} set twice (lines {lines[target]} and {lineno})", lineno)
        lines[target] = lineno
        (radio if target in RADIO_KEYS else top)[target] = parsed

    if radio:
        try:
            top["radio"] = replace(cfg.radio, **radio)
        except ValueError as exc:
            line = min(lines[k] for k in radio)
            raise ConfigError(str(exc), line) from None
    if sweep:
        top["sweep"] = tuple(sweep)
    if "num_channels" in top and "pu_prob" not in top and len(cfg.pu_prob) == 1:
        top["pu_prob"] = cfg.pu_prob * top["num_channels"]
    if "pu_prob" in top and len(top["pu_prob"]) == 1:
        top["pu_prob"] = top["pu_prob"] * top.get("num_channels", cfg.num_channels)
    cfg = replace(cfg, **top)
    try:
        return cfg.validate()
    except ConfigError as exc:
        raise ConfigError(exc.message, lines.get(exc.field)) from None


def serialize(cfg: ScenarioConfig) -> str:
    """Inverse of :func:`parse_config` for every valid config."""
    out = []

    def put(key, value):
        out.append(f"{key} = {value}")

    for f in dataclasses.fields(ScenarioConfig):
        v = getattr(cfg, f.name)
        if f.name == "radio":
            for rk in RADIO_KEYS:
                put(rk, _fmt_scalar(getattr(v, rk)))
        elif f.name == "fee_schedule":
            put(f.name, "; ".join(f"{s}:{c!r}:{e!r}" for s, c, e in v))
        elif f.name == "positions":
            put(f.name, "none" if v is None else "; ".join(f"{x!r}, {y!r}" for x, y in v))
        elif f.name == "topology_seed":
            put(f.name, "none" if v is None else str(v))
        elif f.name == "pu_prob":
            put(f.name, ", ".join(repr(p) for p in v))
        elif f.name == "pu_windows":
            put(f.name, "; ".join(f"{w.start}-{w.end}" + ("" if w.channel is None else f"@{w.channel}")
                                  for w in v))
        elif f.name == "strategies":
            put(f.name, "; ".join(arm_label(arm) for arm in v))
        elif f.name == "baseline":
            put(f.name, "none" if v is None else v.value)
        elif f.name == "sweep":
            for name, values in v:
                put("sweep." + name, ", ".join(_fmt_scalar(x) for x in values))
        else:
            put(f.name, _fmt_scalar(v))
    return "\n".join(out) + "\n"
