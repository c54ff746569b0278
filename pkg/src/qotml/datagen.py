"""Seeded sampling of links and mixed-rate C-band channel plans, labelled by the GN oracle."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import physics
from .linkmodel import (
    C_BAND_LOW_THZ,
    C_BAND_WIDTH_GHZ,
    GRID_GHZ,
    Channel,
    ChannelPlan,
    PAYLOAD_SYMBOL_RATE,
    SLOT_WIDTH_FOR_RATE,
    LabeledRecord,
    Link,
    Payload,
    Scenario,
    Span,
    dumps_line,
    record_to_dict,
)

log = logging.getLogger(__name__)


def _default_powers():
    return tuple(-6.0 + 0.5 * i for i in range(18))


@dataclass(frozen=True)
class GenConfig:
    n_records: int = 1000
    base_seed: int = 0
    occupancy_range: tuple[float, float] = (0.75, 0.95)
    span_count_values: tuple[int, ...] = tuple(range(1, 60, 2))
    span_length_range: tuple[int, int] = (10, 120)
    alpha_range: tuple[float, float] = (0.19, 0.275)
    power_values: tuple[float, ...] = field(default_factory=_default_powers)
    payload_mix: tuple[Payload, ...] = tuple(Payload)
    nf_db: float = physics.DEFAULT_NF_DB

    def __post_init__(self):
        # tuples so the config is hashable and picklable as-is
        for f in ("occupancy_range", "span_count_values", "span_length_range", "alpha_range",
                  "power_values"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        object.__setattr__(self, "payload_mix", tuple(Payload(p) for p in self.payload_mix))
        if self.n_records < 1:
            raise ValueError("n_records must be >= 1")
        lo, hi = self.occupancy_range
        if not 0 < lo <= hi < 1:
            raise ValueError(f"occupancy_range must satisfy 0 < lo <= hi < 1, got {self.occupancy_range}")
        if not self.span_count_values or min(self.span_count_values) < 1:
            raise ValueError("span_count_values must be positive")
        if not self.payload_mix or not self.power_values:
            raise ValueError("payload_mix and power_values must be non-empty")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["payload_mix"] = [p.value for p in self.payload_mix]
        return d


def load_gen_config(path) -> GenConfig:
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in fields(GenConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown GenConfig keys: {sorted(unknown)}")
    return GenConfig(**raw)


def record_seed(base_seed: int, index: int) -> int:
    """64-bit seed of record ``index``; also serves as the record id."""
    state = np.random.SeedSequence([base_seed, index]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _fill_band(rng: np.random.Generator, config: GenConfig) -> list[tuple[Payload, float]]:
    """Channels (payload, centre THz) filling the band up to a drawn occupancy."""
    lo, hi = config.occupancy_range
    target = rng.uniform(lo, hi) * C_BAND_WIDTH_GHZ
    payloads, used = [], 0.0
    while used < target:
        p = config.payload_mix[rng.integers(len(config.payload_mix))]
        payloads.append(p)
        used += _slot_of(p)
    if used > hi * C_BAND_WIDTH_GHZ:
        used -= _slot_of(payloads.pop())
    # spread the unused spectrum as random gaps on the 6.25 GHz grid
    n = len(payloads)
    free_units = int(round((C_BAND_WIDTH_GHZ - used) / GRID_GHZ))
    bars = np.sort(rng.choice(free_units + n, size=n, replace=False))
    gaps = np.diff(np.concatenate(([-1], bars))) - 1
    out, cursor = [], 0.0
    for p, g in zip(payloads, gaps):
        w = _slot_of(p)
        cursor += g * GRID_GHZ
        out.append((p, (C_BAND_LOW_THZ * 1e3 + cursor + w / 2) / 1e3))
        cursor += w
    return out


def _slot_of(p: Payload) -> float:
    return SLOT_WIDTH_FOR_RATE[PAYLOAD_SYMBOL_RATE[p]]


def generate_scenario(config: GenConfig, index: int) -> Scenario:
    if not 0 <= index < config.n_records:
        raise IndexError(f"index {index} outside 0..{config.n_records - 1}")
    seed = record_seed(config.base_seed, index)
    rng = np.random.default_rng(seed)

    n_spans = int(config.span_count_values[rng.integers(len(config.span_count_values))])
    lmin, lmax = config.span_length_range
    lengths = rng.integers(lmin, lmax + 1, size=n_spans)
    alphas = rng.uniform(*config.alpha_range, size=n_spans)
    link = Link(tuple(Span(float(L), float(a)) for L, a in zip(lengths, alphas)))

    slots = _fill_band(rng, config)
    powers = rng.choice(np.asarray(config.power_values), size=len(slots))
    cut = int(rng.integers(len(slots)))
    chans = tuple(Channel.from_payload(p, f, float(pw), is_cut=(i == cut))
                  for i, ((p, f), pw) in enumerate(zip(slots, powers)))
    return Scenario(link, ChannelPlan(chans), seed)


def label_scenario(scenario: Scenario, nf_db: float = physics.DEFAULT_NF_DB) -> LabeledRecord:
    link, plan = scenario.link, scenario.plan
    eta = physics.eta_closed_form(link, plan)
    sigma2 = physics.linear_noise(link, plan.cut, nf_db)
    snr = physics.combine_snr(plan.cut.launch_power, sigma2, eta, physics.penalties_for(plan))
    return LabeledRecord(scenario, eta, sigma2, snr)


def _make_line(args) -> str:
    config, index = args
    return dumps_line(record_to_dict(label_scenario(generate_scenario(config, index), config.nf_db)))


def generate_records(config: GenConfig) -> list[LabeledRecord]:
    return [label_scenario(generate_scenario(config, i), config.nf_db)
            for i in range(config.n_records)]


def generate_dataset(config: GenConfig, out_path, threads: int = 1) -> int:
    """Write ``config.n_records`` labelled records as JSONL in index order."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    jobs = ((config, i) for i in range(config.n_records))
    with open(out_path, "w") as fh:
        if threads > 1:
            with Pool(threads) as pool:
                # imap preserves index order whatever the worker scheduling
                for line in pool.imap(_make_line, jobs, chunksize=64):
                    fh.write(line + "\n")
        else:
            for job in jobs:
                fh.write(_make_line(job) + "\n")
    log.debug("wrote %d records to %s", config.n_records, out_path)
    return config.n_records
