"""Gaussian-noise physics used as the labelling oracle.

Closed-form incoherent GN model for the nonlinear coefficient eta (SCI + XCI
per span, summed over spans), a tensor-product quadrature of the GN double
integral that serves as its reference, EDFA ASE noise, and the SNR
combination ``SNR = P / (sigma2 + eta * P**3)`` with fixed dB penalties.

Internally everything is SI (W, Hz, m, s). Public arguments use the package
units (dBm, km, dB/km, THz, GBd).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linkmodel import Channel, ChannelPlan, Link, Span

PLANCK = 6.62607015e-34  # J s
C_NM_PER_PS = 299792.458
LAMBDA_REF_NM = 1550.0
DEFAULT_NF_DB = 5.0

ROADM_FILTER_PENALTY_DB = 2.0
GRID_OVERLAP_PENALTY_DB = 0.2
WIDE_RATE_GBD = 69.0
OVERLAP_RANGE_GHZ = 75.0

MIN_QUADRATURE_POINTS = 64

# XCI closed form: ln(...) / (XCI_DENOM_FACTOR * pi * |b2| * L_eff_a * B_j**2).
# A factor of 2 is what the GN double integral gives for the two XCI islands
# (see tests/test_physics.py::test_closed_form_tracks_numerical_comb).
XCI_DENOM_FACTOR = 2.0


def dbm_to_w(p_dbm):
    return 1e-3 * np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)


def w_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


@dataclass(frozen=True)
class SpanDerived:
    a: float  # 1/km
    L_eff: float  # km
    L_eff_a: float  # km
    beta2_abs: float  # ps^2/km


@dataclass(frozen=True)
class NoiseBudget:
    sigma2: float
    eta: float
    penalties_db: float


def beta2_from_dispersion(dispersion: float, lambda_ref: float = LAMBDA_REF_NM) -> float:
    """|beta2| in ps^2/km from D in ps/(nm km) at wavelength ``lambda_ref`` (nm)."""
    return abs(dispersion) * lambda_ref ** 2 / (2 * math.pi * C_NM_PER_PS)


def span_derived(span: Span, lambda_ref: float = LAMBDA_REF_NM) -> SpanDerived:
    a = span.alpha * math.log(10) / 10
    if a > 0:
        L_eff = -math.expm1(-a * span.length) / a
        L_eff_a = 1.0 / a
    else:
        L_eff = span.length
        L_eff_a = math.inf
    return SpanDerived(a, L_eff, L_eff_a, beta2_from_dispersion(span.dispersion, lambda_ref))


def _span_si(span: Span):
    d = span_derived(span)
    gamma = span.gamma * 1e-3  # 1/(W m)
    return gamma, d.L_eff * 1e3, d.L_eff_a * 1e3, d.beta2_abs * 1e-27, d.a * 1e-3


def _xci_log_weight(delta_hz, b_cut_hz, b_j_hz):
    lo = delta_hz - b_j_hz / 2
    # overlapping spectra: fall back to the edge-to-edge separation
    delta_eff = np.where(lo > 0, delta_hz, (b_cut_hz + b_j_hz) / 2)
    return np.log((delta_eff + b_j_hz / 2) / (delta_eff - b_j_hz / 2))


def _plan_arrays(plan: ChannelPlan):
    cut = plan.cut
    f = np.array(plan.frequencies) * 1e12
    b = np.array([c.symbol_rate for c in plan.channels]) * 1e9
    p = dbm_to_w([c.launch_power for c in plan.channels])
    return cut, f, b, p


def xci_weight(plan: ChannelPlan) -> float:
    """Span-independent part of XCI: sum_j (P_j/P_cut)^2 ln(...) / B_j^2, in 1/Hz^2."""
    cut, f, b, p = _plan_arrays(plan)
    mask = np.ones(len(f), dtype=bool)
    mask[plan.cut_index] = False
    if not mask.any():
        return 0.0
    fc, bc, pc = f[plan.cut_index], b[plan.cut_index], p[plan.cut_index]
    delta = np.abs(f[mask] - fc)
    w = _xci_log_weight(delta, bc, b[mask]) * (p[mask] / pc) ** 2 / b[mask] ** 2
    return math.fsum(w.tolist())


def eta_span_terms(link: Link, plan: ChannelPlan) -> list[float]:
    """Per-span eta contributions (SCI + XCI), 1/W^2."""
    bc = plan.cut.symbol_rate * 1e9
    wx = xci_weight(plan)
    out = []
    for span in link.spans:
        gamma, L_eff, L_eff_a, b2, _ = _span_si(span)
        common = gamma ** 2 * L_eff ** 2 / (math.pi * b2 * L_eff_a)
        sci = (8 / 27) * common * math.asinh(0.5 * math.pi ** 2 * b2 * L_eff_a * bc ** 2) / bc ** 2
        xci = (16 / 27) * common * wx / XCI_DENOM_FACTOR
        out.append(sci + xci)
    return out


def eta_closed_form(link: Link, plan: ChannelPlan) -> float:
    """Closed-form incoherent GN nonlinear coefficient of the CUT, 1/W^2."""
    return math.fsum(eta_span_terms(link, plan))


# --- numerical GN integral ---------------------------------------------------

def _split_nodes(lo, hi, nodes, weights):
    """Gauss-Legendre nodes on [lo, 0] and [0, hi] (0 clipped into [lo, hi]).

    ``lo`` and ``hi`` may be arrays; returns arrays with a trailing node axis.
    """
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    mid = np.clip(0.0, lo, hi)
    xs, ws = [], []
    for a, b in ((lo, mid), (mid, hi)):
        half = (b - a) / 2
        xs.append((a + b) / 2 + half * nodes)
        ws.append(half * weights)
    return np.concatenate(xs, axis=-1), np.concatenate(ws, axis=-1)


def _mu_sq(x, y, a, L, b2):
    c = 4 * math.pi ** 2 * b2 * x * y
    e = math.exp(-a * L)
    return (1 - 2 * e * np.cos(c * L) + e * e) / (a * a + c * c)


def _gnli_span(gamma, a, L, b2, bands, psd, quadrature_points):
    """G_NLI at the CUT centre for one span. ``bands`` are (lo, hi) offsets from f_cut in Hz."""
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_points)
    total = 0.0
    n = len(bands)
    for i in range(n):
        if psd[i] == 0:
            continue
        xi, wxi = _split_nodes(bands[i][0], bands[i][1], nodes, weights)
        for k in range(n):
            if psd[k] == 0:
                continue
            for j in range(n):
                if psd[j] == 0:
                    continue
                ylo = np.maximum(bands[k][0], bands[j][0] - xi)
                yhi = np.minimum(bands[k][1], bands[j][1] - xi)
                ok = yhi > ylo
                if not ok.any():
                    continue
                x = xi[ok]
                yk, wyk = _split_nodes(ylo[ok], yhi[ok], nodes, weights)
                inner = (_mu_sq(x[:, None], yk, a, L, b2) * wyk).sum(axis=1)
                total += psd[i] * psd[k] * psd[j] * float((inner * wxi[ok]).sum())
    return (16 / 27) * gamma ** 2 * total


@lru_cache(maxsize=4096)
def _eta_numerical_span(span: Span, bands: tuple, psd: tuple, b_cut: float, p_cut: float,
                        quadrature_points: int) -> float:
    gamma, _, _, b2, a = _span_si(span)
    gnli = _gnli_span(gamma, a, span.length * 1e3, b2, bands, psd, quadrature_points)
    return gnli * b_cut / p_cut ** 3


def eta_numerical(link: Link, plan: ChannelPlan, quadrature_points: int = 128) -> float:
    """eta from Gauss-Legendre quadrature of the GN double integral, 1/W^2.

    Every channel is a rectangular PSD over its symbol-rate band. Integration
    tiles follow the band edges exactly and are split at the x=0 / y=0 ridges
    of the phased-array factor.
    """
    if quadrature_points < MIN_QUADRATURE_POINTS:
        raise ValueError(f"quadrature_points must be >= {MIN_QUADRATURE_POINTS}")
    cut, f, b, p = _plan_arrays(plan)
    fc = f[plan.cut_index]
    bands = tuple((float(fi - fc - bi / 2), float(fi - fc + bi / 2)) for fi, bi in zip(f, b))
    psd = tuple(float(x) for x in p / b)
    terms = [_eta_numerical_span(s, bands, psd, float(b[plan.cut_index]),
                                 float(p[plan.cut_index]), quadrature_points)
             for s in link.spans]
    return math.fsum(terms)


# --- linear noise, SNR -------------------------------------------------------

def linear_noise(link: Link, cut: Channel, nf_db: float = DEFAULT_NF_DB) -> float:
    """Total ASE power in the CUT bandwidth, W.

    Each span is followed by an EDFA whose gain equals the span loss.
    """
    hv = PLANCK * cut.center_frequency * 1e12
    nf = 10 ** (nf_db / 10)
    bw = cut.symbol_rate * 1e9
    # G - 1 via expm1 keeps short spans accurate
    terms = [hv * nf * math.expm1(s.alpha * s.length * math.log(10) / 10) * bw for s in link.spans]
    return math.fsum(terms)


def combine_snr(p_tx_dbm, sigma2, eta, penalties_db=0.0):
    """SNR in dB of a channel launched at ``p_tx_dbm``; works elementwise on arrays."""
    sigma2 = np.asarray(sigma2, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(sigma2 < 0) or np.any(eta < 0):
        raise ValueError("noise terms must be non-negative")
    if np.any((sigma2 == 0) & (eta == 0)):
        raise ValueError("sigma2 and eta both zero: SNR is unbounded")
    p = dbm_to_w(p_tx_dbm)
    snr = 10 * np.log10(p / (sigma2 + eta * p ** 3)) - np.asarray(penalties_db, dtype=float)
    return float(snr) if snr.ndim == 0 else snr


def penalties_for(plan: ChannelPlan) -> float:
    """Fixed dB penalties for the CUT: ROADM filtering and 75 GHz grid overlap of 69 GBd channels."""
    cut = plan.cut
    if cut.symbol_rate != WIDE_RATE_GBD:
        return 0.0
    pen = ROADM_FILTER_PENALTY_DB
    for i, c in enumerate(plan.channels):
        if i == plan.cut_index or c.symbol_rate != WIDE_RATE_GBD:
            continue
        if abs(c.center_frequency - cut.center_frequency) * 1e3 <= OVERLAP_RANGE_GHZ + 1e-6:
            pen += GRID_OVERLAP_PENALTY_DB
            break
    return pen


def optimal_power(sigma2: float, eta: float) -> float:
    """Launch power in dBm maximizing P / (sigma2 + eta P^3)."""
    if not (sigma2 > 0 and eta > 0):
        raise ValueError("optimal power needs sigma2 > 0 and eta > 0")
    return float(w_to_dbm((sigma2 / (2 * eta)) ** (1 / 3)))


def noise_budget(link: Link, plan: ChannelPlan, nf_db: float = DEFAULT_NF_DB) -> NoiseBudget:
    return NoiseBudget(linear_noise(link, plan.cut, nf_db), eta_closed_form(link, plan),
                       penalties_for(plan))
