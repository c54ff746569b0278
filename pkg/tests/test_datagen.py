import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qotml import datagen, physics
from qotml.linkmodel import C_BAND_WIDTH_GHZ, Payload, read_records, validate_plan


@pytest.fixture(scope="module")
def scenarios():
    cfg = datagen.GenConfig(n_records=2000, base_seed=11)
    return [datagen.generate_scenario(cfg, i) for i in range(cfg.n_records)]


def test_deterministic_per_index():
    cfg = datagen.GenConfig(n_records=50, base_seed=3)
    assert datagen.generate_scenario(cfg, 17) == datagen.generate_scenario(cfg, 17)
    other = datagen.GenConfig(n_records=50, base_seed=4)
    assert datagen.generate_scenario(cfg, 17) != datagen.generate_scenario(other, 17)
    with pytest.raises(IndexError):
        datagen.generate_scenario(cfg, 50)


def test_table_ranges(scenarios):
    lattice = {-6.0 + 0.5 * k for k in range(18)}
    for s in scenarios:
        n = len(s.link.spans)
        assert n % 2 == 1 and 1 <= n <= 59
        assert all(10 <= sp.length <= 120 and sp.length == int(sp.length) for sp in s.link.spans)
        assert all(0.19 <= sp.alpha <= 0.275 for sp in s.link.spans)
        assert {c.launch_power for c in s.plan.channels} <= lattice
        assert 0.75 <= s.plan.occupied_ghz / C_BAND_WIDTH_GHZ <= 0.95
        assert validate_plan(s.plan) == []


def test_grid_alignment(scenarios):
    for s in scenarios[:200]:
        for c in s.plan.channels:
            lo = c.slot_low_ghz - 191300.0
            assert abs(lo / 6.25 - round(lo / 6.25)) < 1e-6


def test_payload_mix_uniform(scenarios):
    counts = Counter(c.payload for s in scenarios for c in s.plan.channels)
    n = sum(counts.values())
    for p in Payload:
        # 3 sigma binomial band around n/3
        assert abs(counts[p] - n / 3) <= 3 * math.sqrt(n * (1 / 3) * (2 / 3))


def test_cut_uniform_over_position(scenarios):
    rel = np.array([s.plan.cut_index / (len(s.plan) - 1) for s in scenarios])
    hist, _ = np.histogram(rel, bins=4, range=(0, 1))
    assert hist.min() > 0.2 * len(rel)


def test_span_count_marginal(scenarios):
    counts = Counter(len(s.link.spans) for s in scenarios)
    assert set(counts) <= set(range(1, 60, 2))
    # 30 values, 2000 draws: every value shows up
    assert len(counts) == 30


def test_label_consistency():
    cfg = datagen.GenConfig(n_records=30, base_seed=5)
    for r in datagen.generate_records(cfg):
        p = r.scenario.plan
        assert r.eta > 0 and r.sigma2 > 0
        again = physics.combine_snr(p.cut.launch_power, r.sigma2, r.eta, physics.penalties_for(p))
        assert abs(again - r.snr_db) <= 1e-9


def test_single_span_single_channel_is_sci():
    cfg = datagen.GenConfig(n_records=5, base_seed=0, span_count_values=(1,),
                            occupancy_range=(0.01, 0.0105))
    s = datagen.generate_scenario(cfg, 0)
    assert len(s.plan) == 1
    rec = datagen.label_scenario(s)
    assert physics.xci_weight(s.plan) == 0.0
    assert rec.eta == physics.eta_closed_form(s.link, s.plan)


def test_dataset_bytes_identical_and_thread_independent(tmp_path):
    cfg = datagen.GenConfig(n_records=100, base_seed=2)
    a, b, c = tmp_path / "a.jsonl", tmp_path / "b.jsonl", tmp_path / "c.jsonl"
    assert datagen.generate_dataset(cfg, a) == 100
    datagen.generate_dataset(cfg, b)
    datagen.generate_dataset(cfg, c, threads=3)
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    recs = read_records(a)
    assert [r.scenario.seed for r in recs] == [datagen.record_seed(2, i) for i in range(100)]


def test_load_gen_config(tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"n_records": 7, "base_seed": 9, "span_count_values": [1, 3]}))
    cfg = datagen.load_gen_config(p)
    assert cfg.n_records == 7 and cfg.span_count_values == (1, 3)
    assert datagen.GenConfig(**{k: v for k, v in cfg.to_dict().items()}) == cfg
    p.write_text(json.dumps({"n_records": 7, "bogus": 1}))
    with pytest.raises(ValueError):
        datagen.load_gen_config(p)
    with pytest.raises(ValueError):
        datagen.GenConfig(n_records=0)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 0.75), st.floats(75 / 4800, 0.2))
def test_occupancy_within_range(seed, lo, width):
    # ranges at least one wide slot across can always be hit exactly
    cfg = datagen.GenConfig(n_records=1, base_seed=seed, occupancy_range=(lo, lo + width))
    s = datagen.generate_scenario(cfg, 0)
    occ = s.plan.occupied_ghz / C_BAND_WIDTH_GHZ
    assert lo <= occ <= lo + width
    assert validate_plan(s.plan) == []
