"""SNR-deviation reports against the GN oracle or against measured GSNR tables.

``sweep`` reproduces the on/off neighbour study of a live link: a CUT sits at a
fixed frequency, its four nearest neighbours are switched according to 4-bit
mode patterns, and the rest of the band carries background traffic.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import physics
from .linkmodel import (
    C_BAND_HIGH_THZ,
    C_BAND_LOW_THZ,
    GRID_GHZ,
    PAYLOAD_SYMBOL_RATE,
    SLOT_WIDTH_FOR_RATE,
    Channel,
    ChannelPlan,
    LabeledRecord,
    Link,
    Payload,
    Scenario,
    Span,
    link_from_dict,
)

REPORT_COLUMNS = ("case_id", "snr_model_db", "snr_ref_db", "delta_snr_db")


class MissingMeasurements(LookupError):
    def __init__(self, case_ids):
        self.case_ids = sorted(case_ids)
        super().__init__(f"no measurement for {len(self.case_ids)} case(s): {', '.join(self.case_ids)}")


class MeasurementFormatError(ValueError):
    pass


class SplitLeakError(ValueError):
    pass


@dataclass(frozen=True)
class EvalRow:
    case_id: str
    snr_model_db: float
    snr_ref_db: float

    @property
    def delta_snr_db(self) -> float:
        return abs(self.snr_model_db - self.snr_ref_db)


@dataclass
class EvalReport:
    rows: list[EvalRow]
    model_id: str
    reference: str  # "oracle" or "measurement"

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.case_id)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r.delta_snr_db for r in self.rows])

    @property
    def n_cases(self) -> int:
        return len(self.rows)

    @property
    def mean_delta_db(self) -> float:
        return float(np.mean(self.deltas)) if self.rows else float("nan")

    @property
    def max_delta_db(self) -> float:
        return float(np.max(self.deltas)) if self.rows else float("nan")

    def summary(self) -> dict:
        return {"mean_delta_db": self.mean_delta_db, "max_delta_db": self.max_delta_db,
                "n_cases": self.n_cases, "model_id": self.model_id, "reference": self.reference}


class OracleModel:
    """Stand-in model that answers with the closed-form GN eta."""

    model_id = "gn-closed-form"
    metadata: dict = {}

    def predict_eta(self, scenarios: Sequence[Scenario]) -> np.ndarray:
        return np.array([physics.eta_closed_form(s.link, s.plan) for s in scenarios])


def record_case_id(record: LabeledRecord) -> str:
    return f"seed-{record.scenario.seed:016x}"


def _model_snr(model, scenarios: Sequence[Scenario], sigma2) -> np.ndarray:
    eta = model.predict_eta(scenarios)
    p = [s.plan.cut.launch_power for s in scenarios]
    pen = [physics.penalties_for(s.plan) for s in scenarios]
    return np.atleast_1d(physics.combine_snr(p, sigma2, eta, pen))


def evaluate(model, records: Sequence[LabeledRecord], case_ids: Optional[Sequence[str]] = None
             ) -> EvalReport:
    """Compare model SNR with each record's stored oracle SNR.

    Records whose ids were used to fit ``model`` are refused.
    """
    if not records:
        raise ValueError("cannot evaluate an empty dataset")
    seen = set(getattr(model, "metadata", {}).get("fit_record_ids", ()))
    if seen:
        leaked = [r for r in records if r.scenario.seed in seen]
        if leaked:
            raise SplitLeakError(f"{len(leaked)} record(s) were part of the model's training/validation split")
    ids = list(case_ids) if case_ids is not None else [record_case_id(r) for r in records]
    snr = _model_snr(model, [r.scenario for r in records], [r.sigma2 for r in records])
    rows = [EvalRow(cid, float(s), r.snr_db) for cid, s, r in zip(ids, snr, records)]
    return EvalReport(rows, getattr(model, "model_id", "model"), "oracle")


def unseen_records(model, records: Sequence[LabeledRecord]) -> list[LabeledRecord]:
    seen = set(getattr(model, "metadata", {}).get("fit_record_ids", ()))
    return [r for r in records if r.scenario.seed not in seen]


# --- measurements ------------------------------------------------------------

@dataclass(frozen=True)
class Measurement:
    case_id: str
    measured_snr_db: float
    line: int
    extra: dict = field(default_factory=dict)


def ingest_measurements(path) -> dict[str, Measurement]:
    """Read a ``case_id,measured_snr_db[,...]`` CSV into a table keyed by case id."""
    table: dict[str, Measurement] = {}
    errors = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MeasurementFormatError(f"{path}: missing header")
        header = [h.strip() for h in header]
        if "case_id" not in header or "measured_snr_db" not in header:
            raise MeasurementFormatError(f"{path}: header must contain case_id and measured_snr_db")
        ic, iv = header.index("case_id"), header.index("measured_snr_db")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                errors.append(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
                continue
            cid = row[ic].strip()
            try:
                value = float(row[iv])
            except ValueError:
                errors.append(f"line {lineno}: measured_snr_db {row[iv]!r} is not a number")
                continue
            if not cid or not math.isfinite(value):
                errors.append(f"line {lineno}: empty case_id or non-finite value")
                continue
            if cid in table:
                errors.append(f"line {lineno}: duplicate case_id {cid!r} (first seen on line {table[cid].line})")
                continue
            extra = {h: row[i] for i, h in enumerate(header) if i not in (ic, iv)}
            table[cid] = Measurement(cid, value, lineno, extra)
    if errors:
        raise MeasurementFormatError(f"{path}: " + "; ".join(errors))
    return table


def write_measurements(table: dict[str, Measurement], path) -> None:
    extra_cols = sorted({k for m in table.values() for k in m.extra})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "measured_snr_db", *extra_cols])
        for cid in sorted(table):
            m = table[cid]
            w.writerow([cid, repr(m.measured_snr_db), *(m.extra.get(c, "") for c in extra_cols)])


# --- channel-plan sweeps -----------------------------------------------------

MODE_ALL_OFF = "0000"


@dataclass(frozen=True)
class CutDef:
    name: str
    payload: Payload
    launch_power: float
    link: str = "base"
    neighbor_payload: Optional[Payload] = None  # defaults to the CUT's payload
    neighbor_power: Optional[float] = None  # defaults to the CUT's power
    repeats: tuple[Payload, ...] = ()  # extra neighbour payloads to rerun the modes with
    modes: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "payload", Payload(self.payload))
        if self.neighbor_payload is not None:
            object.__setattr__(self, "neighbor_payload", Payload(self.neighbor_payload))
        object.__setattr__(self, "repeats", tuple(Payload(p) for p in self.repeats))
        if self.modes is not None:
            object.__setattr__(self, "modes", tuple(self.modes))


@dataclass(frozen=True)
class Background:
    payload: Payload = Payload.QPSK_100G
    launch_power: float = 0.0
    occupancy: float = 0.8  # of the spectrum outside the test window
    window_ghz: float = 400.0

    def __post_init__(self):
        object.__setattr__(self, "payload", Payload(self.payload))


@dataclass(frozen=True)
class SweepConfig:
    links: dict
    cuts: tuple[CutDef, ...]
    modes: tuple[str, ...]
    cut_frequency: float = 193.95
    background: Optional[Background] = None
    nf_db: float = physics.DEFAULT_NF_DB

    def __post_init__(self):
        object.__setattr__(self, "cuts", tuple(self.cuts))
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.cuts:
            raise ValueError("sweep needs at least one CUT definition")
        for c in self.cuts:
            modes = c.modes if c.modes is not None else self.modes
            if not modes:
                raise ValueError(f"CUT {c.name!r} has no modes")
            for m in modes:
                if len(m) != 4 or set(m) - {"0", "1"}:
                    raise ValueError(f"mode {m!r} is not a 4-bit pattern")
            if c.link not in self.links:
                raise ValueError(f"CUT {c.name!r} refers to unknown link {c.link!r}")


def _link_from_config(d: dict) -> Link:
    if "spans" in d:
        return link_from_dict(d)
    return Link.homogeneous(int(d["n_spans"]), float(d["span_length"]), float(d["alpha"]))


def sweep_config_from_dict(d: dict) -> SweepConfig:
    links = {name: _link_from_config(v) for name, v in d["links"].items()}
    cuts = tuple(CutDef(**c) for c in d["cuts"])
    bg = d.get("background")
    return SweepConfig(links, cuts, tuple(d["modes"]), float(d.get("cut_frequency", 193.95)),
                       None if bg is None else Background(**bg),
                       float(d.get("nf_db", physics.DEFAULT_NF_DB)))


def load_sweep_config(path) -> SweepConfig:
    with open(path) as fh:
        return sweep_config_from_dict(json.load(fh))


@dataclass(frozen=True)
class SweepCase:
    case_id: str
    cut: CutDef
    mode: str
    neighbor_payload: Payload
    scenario: Scenario


def _slot(payload: Payload) -> float:
    return SLOT_WIDTH_FOR_RATE[PAYLOAD_SYMBOL_RATE[payload]]


def _snap(f_ghz: float) -> float:
    return round(f_ghz / GRID_GHZ) * GRID_GHZ


def neighbor_offsets_ghz(cut_payload: Payload, neighbor_payload: Payload) -> list[float]:
    """Offsets of the (2nd-left, 1st-left, 1st-right, 2nd-right) slots, packed edge to edge."""
    first = (_slot(cut_payload) + _slot(neighbor_payload)) / 2
    second = first + _slot(neighbor_payload)
    return [-second, -first, first, second]


def _background_channels(bg: Background, f_cut_ghz: float) -> list[Channel]:
    w = _slot(bg.payload)
    lo_band, hi_band = C_BAND_LOW_THZ * 1e3, C_BAND_HIGH_THZ * 1e3
    win_lo, win_hi = f_cut_ghz - bg.window_ghz / 2, f_cut_ghz + bg.window_ghz / 2
    out = []
    for lo, hi in ((lo_band, win_lo), (win_hi, hi_band)):
        n_slots = int((hi - lo) // w)
        n = int(math.floor(bg.occupancy * n_slots))
        if n <= 0:
            continue
        pitch = (hi - lo) / n
        for k in range(n):
            start = _snap(lo + k * pitch)
            start = min(max(start, lo), hi - w)
            out.append(Channel.from_payload(bg.payload, (start + w / 2) / 1e3, bg.launch_power))
    return out


def _case_id(cut: CutDef, mode: str, neighbor_payload: Payload) -> str:
    key = json.dumps({"cut": cut.name, "payload": cut.payload.value, "power": cut.launch_power,
                      "link": cut.link, "mode": mode, "neighbors": neighbor_payload.value},
                     sort_keys=True)
    digest = hashlib.sha1(key.encode()).hexdigest()[:8]
    return f"{cut.name}-{neighbor_payload.value}-{mode}-{digest}"


def sweep_cases(config: SweepConfig) -> list[SweepCase]:
    """One case per (CUT definition, neighbour payload, mode).

    Repeats with other neighbour payloads skip the all-off mode, whose plan is
    identical to the one already produced.
    """
    f_cut = config.cut_frequency * 1e3
    background = _background_channels(config.background, f_cut) if config.background else []
    cases = []
    for cut in config.cuts:
        modes = cut.modes if cut.modes is not None else config.modes
        base_nb = cut.neighbor_payload or cut.payload
        nb_power = cut.launch_power if cut.neighbor_power is None else cut.neighbor_power
        for i, nb in enumerate((base_nb, *cut.repeats)):
            for mode in modes:
                if i > 0 and mode == MODE_ALL_OFF:
                    continue
                chans = [Channel.from_payload(cut.payload, f_cut / 1e3, cut.launch_power, is_cut=True)]
                for bit, off in zip(mode, neighbor_offsets_ghz(cut.payload, nb)):
                    if bit == "1":
                        chans.append(Channel.from_payload(nb, (f_cut + off) / 1e3, nb_power))
                chans += background
                cid = _case_id(cut, mode, nb)
                seed = int(hashlib.sha1(cid.encode()).hexdigest()[:15], 16)
                scen = Scenario(config.links[cut.link], ChannelPlan(tuple(chans)), seed)
                cases.append(SweepCase(cid, cut, mode, nb, scen))
    return cases


def sweep(config: SweepConfig, model, use_oracle_ref: bool = True,
          measurements: Optional[dict[str, Measurement]] = None) -> EvalReport:
    cases = sweep_cases(config)
    scenarios = [c.scenario for c in cases]
    sigma2 = [physics.linear_noise(s.link, s.plan.cut, config.nf_db) for s in scenarios]
    if use_oracle_ref:
        ref = [physics.combine_snr(s.plan.cut.launch_power, sig,
                                   physics.eta_closed_form(s.link, s.plan),
                                   physics.penalties_for(s.plan))
               for s, sig in zip(scenarios, sigma2)]
        reference = "oracle"
    else:
        if measurements is None:
            raise ValueError("a measurement table is required when use_oracle_ref is False")
        missing = [c.case_id for c in cases if c.case_id not in measurements]
        if missing:
            raise MissingMeasurements(missing)
        ref = [measurements[c.case_id].measured_snr_db for c in cases]
        reference = "measurement"
    snr = _model_snr(model, scenarios, sigma2)
    rows = [EvalRow(c.case_id, float(s), float(r)) for c, s, r in zip(cases, snr, ref)]
    return EvalReport(rows, getattr(model, "model_id", "model"), reference)


def emit_report(report: EvalReport, out_dir) -> tuple[Path, Path]:
    """Write ``report.csv`` (rows by case id) and ``summary.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out_dir / "report.csv", out_dir / "summary.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([r.case_id, repr(r.snr_model_db), repr(r.snr_ref_db), repr(r.delta_snr_db)])
    with open(json_path, "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def read_report_csv(path) -> list[EvalRow]:
    with open(path, newline="") as fh:
        return [EvalRow(r["case_id"], float(r["snr_model_db"]), float(r["snr_ref_db"]))
                for r in csv.DictReader(fh)]
