"""Fiber links, WDM channel plans and the records that tie them to labels.

All types are frozen dataclasses. Units follow the conventions used throughout
the package: lengths in km, attenuation in dB/km, frequencies in THz, slot
widths in GHz, symbol rates in GBd and launch powers in dBm.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

C_BAND_LOW_THZ = 191.3
C_BAND_HIGH_THZ = 196.1
C_BAND_WIDTH_GHZ = 4800.0
GRID_GHZ = 6.25

# tolerance for slot-edge comparisons, GHz
_EDGE_TOL_GHZ = 1e-6

FIBER_GAMMA = 1.3  # 1/(W km)
FIBER_DISPERSION = 16.7  # ps/(nm km)


class Payload(str, Enum):
    QPSK_100G = "QPSK_100G"
    QPSK_200G = "QPSK_200G"
    QAM16_200G = "QAM16_200G"


PAYLOAD_SYMBOL_RATE = {
    Payload.QPSK_100G: 35.0,
    Payload.QPSK_200G: 69.0,
    Payload.QAM16_200G: 35.0,
}
SLOT_WIDTH_FOR_RATE = {35.0: 50.0, 69.0: 75.0}


def _frozen_array(values) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Span:
    length: float
    alpha: float
    gamma: float = FIBER_GAMMA
    dispersion: float = FIBER_DISPERSION

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"span length must be positive, got {self.length}")
        if not self.alpha >= 0:
            raise ValueError(f"span alpha must be non-negative, got {self.alpha}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.dispersion == 0:
            raise ValueError("dispersion must be non-zero")


@dataclass(frozen=True)
class Link:
    spans: tuple[Span, ...]

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        if not self.spans:
            raise ValueError("a link needs at least one span")
        # read-only column arrays used by batched feature extraction
        object.__setattr__(self, "lengths", _frozen_array([s.length for s in self.spans]))
        object.__setattr__(self, "alphas", _frozen_array([s.alpha for s in self.spans]))

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.spans)

    @classmethod
    def homogeneous(cls, n_spans: int, length: float, alpha: float) -> "Link":
        return cls(tuple(Span(length, alpha) for _ in range(n_spans)))


def validate_link(link: Link) -> list[str]:
    """Return (and emit as warnings) notes on spans outside the generated-data ranges.

    User links outside these ranges are still usable; the trained models simply
    extrapolate there.
    """
    notes = []
    if len(link.spans) > 60:
        notes.append(f"{len(link.spans)} spans exceeds the generated range 1..60")
    for i, s in enumerate(link.spans):
        if not 10 <= s.length <= 120:
            notes.append(f"span {i}: length {s.length} km outside [10, 120]")
        if not 0.19 <= s.alpha <= 0.275:
            notes.append(f"span {i}: alpha {s.alpha} dB/km outside [0.19, 0.275]")
    for n in notes:
        warnings.warn(n, stacklevel=2)
    return notes


@dataclass(frozen=True)
class Channel:
    center_frequency: float
    symbol_rate: float
    slot_width: float
    launch_power: float
    payload: Payload
    is_cut: bool = False

    def __post_init__(self):
        object.__setattr__(self, "payload", Payload(self.payload))

    @classmethod
    def from_payload(cls, payload, center_frequency: float, launch_power: float,
                     is_cut: bool = False) -> "Channel":
        payload = Payload(payload)
        rate = PAYLOAD_SYMBOL_RATE[payload]
        return cls(center_frequency, rate, SLOT_WIDTH_FOR_RATE[rate], launch_power,
                   payload, is_cut)

    @property
    def slot_low_ghz(self) -> float:
        return self.center_frequency * 1e3 - self.slot_width / 2

    @property
    def slot_high_ghz(self) -> float:
        return self.center_frequency * 1e3 + self.slot_width / 2


@dataclass(frozen=True)
class ChannelPlan:
    """Channels sorted by frequency; ``cut_index`` points at the flagged CUT.

    Construction sorts the channels and derives ``cut_index`` from the
    ``is_cut`` flags. With zero or several flags the index is -1 and
    :func:`validate_plan` reports it.
    """

    channels: tuple[Channel, ...]
    cut_index: int = field(default=-1)

    def __post_init__(self):
        chans = tuple(sorted(self.channels, key=lambda c: c.center_frequency))
        object.__setattr__(self, "channels", chans)
        flagged = [i for i, c in enumerate(chans) if c.is_cut]
        object.__setattr__(self, "cut_index", flagged[0] if len(flagged) == 1 else -1)
        object.__setattr__(self, "frequencies", _frozen_array([c.center_frequency for c in chans]))
        object.__setattr__(self, "launch_powers", _frozen_array([c.launch_power for c in chans]))
        object.__setattr__(self, "symbol_rates", _frozen_array([c.symbol_rate for c in chans]))
        object.__setattr__(self, "occupied_ghz", sum(c.slot_width for c in chans))

    @property
    def cut(self) -> Channel:
        if self.cut_index < 0:
            raise ValueError("plan has no unique CUT")
        return self.channels[self.cut_index]

    def __len__(self):
        return len(self.channels)


@dataclass(frozen=True)
class Violation:
    index: Optional[int]
    rule: str
    message: str

    def __str__(self):
        where = "plan" if self.index is None else f"channel {self.index}"
        return f"{where}: [{self.rule}] {self.message}"


def validate_plan(plan: ChannelPlan) -> list[Violation]:
    out = []
    n_cut = sum(c.is_cut for c in plan.channels)
    if n_cut != 1:
        out.append(Violation(None, "cut_count", f"expected exactly one CUT, found {n_cut}"))
    lo_edge = C_BAND_LOW_THZ * 1e3
    hi_edge = C_BAND_HIGH_THZ * 1e3
    for i, c in enumerate(plan.channels):
        expected_slot = SLOT_WIDTH_FOR_RATE.get(c.symbol_rate)
        if expected_slot is not None and c.slot_width != expected_slot:
            out.append(Violation(i, "slot_width",
                                 f"{c.symbol_rate} GBd requires a {expected_slot} GHz slot, got {c.slot_width}"))
        if PAYLOAD_SYMBOL_RATE[c.payload] != c.symbol_rate:
            out.append(Violation(i, "payload_rate",
                                 f"{c.payload.value} runs at {PAYLOAD_SYMBOL_RATE[c.payload]} GBd, got {c.symbol_rate}"))
        if not (C_BAND_LOW_THZ <= c.center_frequency <= C_BAND_HIGH_THZ):
            out.append(Violation(i, "band", f"center {c.center_frequency} THz outside the C-band"))
        elif c.slot_low_ghz < lo_edge - _EDGE_TOL_GHZ or c.slot_high_ghz > hi_edge + _EDGE_TOL_GHZ:
            out.append(Violation(i, "band", "slot extends beyond the C-band edge"))
    for i in range(1, len(plan.channels)):
        prev, cur = plan.channels[i - 1], plan.channels[i]
        if prev.slot_high_ghz > cur.slot_low_ghz + _EDGE_TOL_GHZ:
            out.append(Violation(i, "overlap", f"slot overlaps channel {i - 1}"))
    return out


def neighbor_channels(plan: ChannelPlan, k: int) -> tuple[list[Channel], list[Channel]]:
    """Up to ``k`` neighbours of the CUT on each side, nearest first.

    Returns ``(left, right)``. A neighbour at exactly the CUT frequency counts
    as left (ties go to the lower frequency).
    """
    cut = plan.cut
    f0 = cut.center_frequency
    others = [c for i, c in enumerate(plan.channels) if i != plan.cut_index]
    others.sort(key=lambda c: (abs(c.center_frequency - f0), c.center_frequency))
    left = [c for c in others if c.center_frequency <= f0][:k]
    right = [c for c in others if c.center_frequency > f0][:k]
    return left, right


def neighbor_layout(plan: ChannelPlan) -> list[Optional[Channel]]:
    """The four closest neighbours as (2nd-left, 1st-left, 1st-right, 2nd-right)."""
    left, right = neighbor_channels(plan, 2)
    left = left + [None] * (2 - len(left))
    right = right + [None] * (2 - len(right))
    return [left[1], left[0], right[0], right[1]]


@dataclass(frozen=True)
class Scenario:
    link: Link
    plan: ChannelPlan
    seed: int = 0


@dataclass(frozen=True)
class LabeledRecord:
    scenario: Scenario
    eta: float
    sigma2: float
    snr_db: float


# --- JSON (de)serialization -------------------------------------------------

def span_to_dict(s: Span) -> dict:
    return {"length": s.length, "alpha": s.alpha, "gamma": s.gamma, "dispersion": s.dispersion}


def link_to_dict(link: Link) -> dict:
    return {"spans": [span_to_dict(s) for s in link.spans]}


def link_from_dict(d: dict) -> Link:
    return Link(tuple(Span(**s) for s in d["spans"]))


def channel_to_dict(c: Channel) -> dict:
    return {
        "center_frequency": c.center_frequency,
        "symbol_rate": c.symbol_rate,
        "slot_width": c.slot_width,
        "launch_power": c.launch_power,
        "payload": c.payload.value,
        "is_cut": c.is_cut,
    }


def plan_to_dict(plan: ChannelPlan) -> dict:
    return {"channels": [channel_to_dict(c) for c in plan.channels], "cut_index": plan.cut_index}


def plan_from_dict(d: dict) -> ChannelPlan:
    return ChannelPlan(tuple(Channel(**c) for c in d["channels"]))


def scenario_to_dict(s: Scenario) -> dict:
    return {"link": link_to_dict(s.link), "plan": plan_to_dict(s.plan), "seed": s.seed}


def scenario_from_dict(d: dict) -> Scenario:
    return Scenario(link_from_dict(d["link"]), plan_from_dict(d["plan"]), int(d.get("seed", 0)))


def record_to_dict(r: LabeledRecord) -> dict:
    return {"scenario": scenario_to_dict(r.scenario), "eta": r.eta, "sigma2": r.sigma2,
            "snr_db": r.snr_db}


def record_from_dict(d: dict) -> LabeledRecord:
    return LabeledRecord(scenario_from_dict(d["scenario"]), float(d["eta"]),
                         float(d["sigma2"]), float(d["snr_db"]))


def dumps_line(obj: dict) -> str:
    # repr-based float output keeps round trips bit-exact
    return json.dumps(obj, separators=(",", ":"), sort_keys=False)


def iter_jsonl(path) -> Iterator[dict]:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def read_records(path) -> list[LabeledRecord]:
    return [record_from_dict(d) for d in iter_jsonl(path)]


def read_scenarios(path) -> list[Scenario]:
    """Read scenarios from JSONL; lines may hold bare scenarios or full records."""
    out = []
    for d in iter_jsonl(path):
        out.append(scenario_from_dict(d["scenario"] if "scenario" in d else d))
    return out


def write_jsonl(path, rows: Iterable[dict]) -> int:
    n = 0
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(dumps_line(row))
            fh.write("\n")
            n += 1
    return n
