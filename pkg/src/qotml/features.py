"""Fixed-length feature vectors for the CUT of a scenario, and their z-score statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import accumulate
from typing import Sequence

import numpy as np

from .linkmodel import C_BAND_HIGH_THZ, C_BAND_LOW_THZ, C_BAND_WIDTH_GHZ, Scenario

BAND_CENTER_THZ = (C_BAND_LOW_THZ + C_BAND_HIGH_THZ) / 2

ABSENT_RATE = 0.0
ABSENT_POWER_DBM = -60.0
ABSENT_DISTANCE_GHZ = 500.0

N_WINDOWS = 10
WINDOW_GHZ = 150.0
STD_FLOOR = 1e-12
NLI_WEIGHT_FLOOR = 1e-12  # km; only reached by lossless spans

NEIGHBOR_SLOTS = ("left2", "left1", "right1", "right2")

FEATURE_NAMES = (
    "n_spans", "span_len_mean", "span_len_min", "span_len_max", "span_len_var",
    "span_cumsum_mean", "alpha_mean", "cut_power_dbm", "cut_symbol_rate",
    "cut_center_offset_ghz", "total_channel_count", "occupancy_fraction",
    *(f"{slot}_{q}" for slot in NEIGHBOR_SLOTS for q in ("symbol_rate", "power_dbm", "distance_ghz")),
    *(f"n_ch_window{w}" for w in range(N_WINDOWS)),
    "grid_power_idw_dbm", "n_spans_log10", "span_nli_weight_db",
)
N_FEATURES = len(FEATURE_NAMES)
WINDOW_SLICE = slice(24, 24 + N_WINDOWS)

# channels exactly on a window edge belong to the upper window; the nudge (GHz)
# absorbs float noise in the THz -> GHz offsets of grid-aligned channels
_EDGE_NUDGE_GHZ = 1e-6


def cumsum_mean(lengths: Sequence[float]) -> float:
    """Mean of the running sums of ``lengths`` (distance to the end of each span)."""
    return sum(accumulate(lengths)) / len(lengths)


def grid_power_idw_dbm(freqs: Sequence[float], powers: Sequence[float], cut_index: int) -> float:
    """RMS launch power (dBm) of all non-CUT channels, weighted by 1/|f - f_cut|."""
    fc = freqs[cut_index]
    num = den = 0.0
    for i, (f, p) in enumerate(zip(freqs, powers)):
        if i == cut_index or f == fc:
            continue
        w = 1.0 / abs(f - fc)
        num += w * 10.0 ** (p * 0.2)
        den += w
    return 5.0 * math.log10(num / den) if den > 0 else ABSENT_POWER_DBM


def extract(scenario: Scenario) -> np.ndarray:
    """Raw (unnormalized) feature vector of ``scenario``; see ``FEATURE_NAMES``."""
    return extract_many([scenario])[0]


def _segments(arrays):
    counts = np.fromiter((len(a) for a in arrays), dtype=np.intp, count=len(arrays))
    starts = np.zeros(len(arrays), dtype=np.intp)
    np.cumsum(counts[:-1], out=starts[1:])
    return np.concatenate(arrays), counts, starts


def extract_many(scenarios: Sequence[Scenario]) -> np.ndarray:
    """Feature matrix, one row per scenario.

    Everything is computed on concatenated per-scenario columns with segment
    reductions, so the cost is a handful of numpy passes rather than a Python
    loop per channel.
    """
    n = len(scenarios)
    X = np.empty((n, N_FEATURES))
    if n == 0:
        return X
    if any(s.plan.cut_index < 0 for s in scenarios):
        raise ValueError("every scenario needs exactly one CUT")
    seg = np.arange(n)

    # link
    lengths, ns, sstart = _segments([s.link.lengths for s in scenarios])
    alphas = np.concatenate([s.link.alphas for s in scenarios])
    sid = np.repeat(seg, ns)
    mean = np.add.reduceat(lengths, sstart) / ns
    X[:, 0] = ns
    X[:, 1] = mean
    X[:, 2] = np.minimum.reduceat(lengths, sstart)
    X[:, 3] = np.maximum.reduceat(lengths, sstart)
    X[:, 4] = np.add.reduceat((lengths - mean[sid]) ** 2, sstart) / ns
    # mean of running sums: span i (0-based) appears in n - i of them
    weight = (ns[sid] - (np.arange(len(lengths)) - sstart[sid])).astype(float)
    X[:, 5] = np.add.reduceat(lengths * weight, sstart) / ns
    X[:, 6] = np.add.reduceat(alphas, sstart) / ns
    # per-span NLI scale a * L_eff^2 (km); sums correctly over mixed span lengths
    a = alphas * (math.log(10) / 10)
    with np.errstate(divide="ignore", invalid="ignore"):
        l_eff = np.where(a > 0, -np.expm1(-a * lengths) / a, lengths)
    nli = np.add.reduceat(a * l_eff ** 2, sstart)

    # CUT and plan scalars
    plans = [s.plan for s in scenarios]
    freqs, nc, cstart = _segments([p.frequencies for p in plans])
    powers = np.concatenate([p.launch_powers for p in plans])
    rates = np.concatenate([p.symbol_rates for p in plans])
    ci = np.fromiter((p.cut_index for p in plans), dtype=np.intp, count=n)
    cut = cstart + ci
    fc = freqs[cut]
    X[:, 7] = powers[cut]
    X[:, 8] = rates[cut]
    X[:, 9] = (fc - BAND_CENTER_THZ) * 1e3
    X[:, 10] = nc
    X[:, 11] = np.fromiter((p.occupied_ghz for p in plans), dtype=float, count=n) / C_BAND_WIDTH_GHZ

    # neighbours: the plan is sorted, so they sit at adjacent indices
    for j, k in enumerate((-2, -1, 1, 2)):
        idx = ci + k
        ok = (idx >= 0) & (idx < nc)
        flat = np.where(ok, cstart + idx, cut)
        col = 12 + 3 * j
        X[:, col] = np.where(ok, rates[flat], ABSENT_RATE)
        X[:, col + 1] = np.where(ok, powers[flat], ABSENT_POWER_DBM)
        X[:, col + 2] = np.where(ok, (freqs[flat] - fc) * 1e3, np.sign(k) * ABSENT_DISTANCE_GHZ)

    # channel counts in 150 GHz windows centred on the CUT
    cid = np.repeat(seg, nc)
    d_ghz = (freqs - fc[cid]) * 1e3
    w = np.floor((d_ghz + N_WINDOWS / 2 * WINDOW_GHZ + _EDGE_NUDGE_GHZ) / WINDOW_GHZ).astype(np.intp)
    inside = (w >= 0) & (w < N_WINDOWS)
    X[:, WINDOW_SLICE] = np.bincount(cid[inside] * N_WINDOWS + w[inside],
                                     minlength=n * N_WINDOWS).reshape(n, N_WINDOWS)

    # inverse-distance weighted grid power (the CUT itself has d = 0, weight 0)
    dist = np.abs(d_ghz)
    with np.errstate(divide="ignore"):
        inv = np.where(dist > 0, 1.0 / np.where(dist > 0, dist, 1.0), 0.0)
    num = np.add.reduceat(inv * np.power(10.0, 0.2 * powers), cstart)
    den = np.add.reduceat(inv, cstart)
    ok = den > 0
    X[:, 34] = ABSENT_POWER_DBM
    X[ok, 34] = 5.0 * np.log10(num[ok] / den[ok])
    X[:, 35] = np.log10(ns)
    X[:, 36] = 10 * np.log10(np.maximum(nli, NLI_WEIGHT_FLOOR))
    return X


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    target_mean: float
    target_std: float

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "target_transform": "log10_eta_zscore",
                "target_mean": self.target_mean, "target_std": self.target_std}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float),
                   float(d["target_mean"]), float(d["target_std"]))


def fit_normalizer(X: np.ndarray, eta: np.ndarray) -> NormStats:
    """z-score statistics of training features ``X`` and of ``log10(eta)``.

    Columns with (near) zero spread keep scale 1 and are only centred.
    """
    X = np.asarray(X, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("fit_normalizer needs at least two training rows")
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    y = np.log10(eta)
    ystd = float(y.std())
    return NormStats(mean, std, float(y.mean()), ystd if ystd >= STD_FLOOR else 1.0)


def normalize(X, stats: NormStats) -> np.ndarray:
    return (np.asarray(X, dtype=float) - stats.mean) / stats.std


def transform_target(eta, stats: NormStats) -> np.ndarray:
    return (np.log10(np.asarray(eta, dtype=float)) - stats.target_mean) / stats.target_std


def inverse_target(y, stats: NormStats) -> np.ndarray:
    return np.power(10.0, np.asarray(y, dtype=float) * stats.target_std + stats.target_mean)
