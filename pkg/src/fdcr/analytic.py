"""Closed-form throughput and collision probability of adaptive TR/TS selection.

A transmission frame of M slots is split by how the PU state evolves over the
data period Tt = (M-1)Ts and by the decision taken:

    C1  OFF throughout, TR          C5  ON throughout, TR
    C2  OFF throughout, TS          C6  ON throughout, TS
    C3  OFF then PU returns, TR     C7  ON then PU leaves, TR
    C4  OFF then PU returns, TS     C8  ON then PU leaves, TS

At most one state change per frame is assumed (frame short against both
mean state lengths). TR-only and TS-only baselines are the same formulas with
degenerate prediction probabilities (0, 0) and (1, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .sensing import RadioParams, SensingProbs
from .traffic import TrafficModel

N_CASES = 8


@dataclass(frozen=True)
class Rates:
    d0_tr: float
    d1_tr: float
    d0_ts: float
    d1_ts: float


def rates(p: RadioParams) -> Rates:
    """Achievable rates (bit/s/Hz); 0/1 = PU OFF/ON, TR suffers residual SI."""
    return Rates(
        d0_tr=math.log2(1 + p.snr_ss / (1 + p.chi * p.snr_ss)),
        d1_tr=math.log2(1 + p.snr_ss / (1 + p.snr_sp + p.chi * p.snr_ss)),
        d0_ts=math.log2(1 + p.snr_ss),
        d1_ts=math.log2(1 + p.snr_ss / (1 + p.snr_sp)),
    )


@dataclass(frozen=True)
class FrameConfig:
    m: int
    t_s: float

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"M must be at least 2, got {self.m}")
        if not self.t_s > 0:
            raise ValueError("slot duration must be positive")

    @property
    def t_p(self) -> float:
        return self.m * self.t_s

    @property
    def t_t(self) -> float:
        return (self.m - 1) * self.t_s


@dataclass(frozen=True)
class Scenario:
    traffic: TrafficModel
    sensing: SensingProbs
    p_pf: float
    p_pd: float
    frame: FrameConfig
    rates: Rates
    # Evaluate TS collision terms as (1 - Pd_SI)^k instead of 1 - Pd_SI^k.
    literal_ts_collision: bool = False

    def __post_init__(self):
        if self.traffic.distribution != "exponential":
            raise ValueError("closed-form results need exponential ON/OFF durations")
        for name in ("p_pf", "p_pd"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")


def tr_only(sc: Scenario) -> Scenario:
    return replace(sc, p_pf=0.0, p_pd=0.0)


def ts_only(sc: Scenario) -> Scenario:
    return replace(sc, p_pf=1.0, p_pd=1.0)


def mean_residual(lam: float, t_t: float) -> float:
    """Mean of an exponential(mean ``lam``) residual time truncated to (0, t_t)."""
    x = t_t / lam
    return (lam - (t_t + lam) * math.exp(-x)) / (-math.expm1(-x))


def binomial_throughput(n_slots: int, p_tx: float, m: int, rate: float) -> float:
    """Expected rate earned when each of ``n_slots`` slots transmits independently w.p. ``p_tx``."""
    total = 0.0
    for j in range(1, n_slots + 1):
        total += math.comb(n_slots, j) * p_tx ** j * (1 - p_tx) ** (n_slots - j) * j / m
    return total * rate


def _slot_counts(sc: Scenario) -> tuple[int, int]:
    """Idle data slots before the PU returns (floor) and busy data slots before it leaves (ceil)."""
    f, lam0, lam1 = sc.frame, sc.traffic.lambda0, sc.traffic.lambda1
    n_off4 = int(math.floor(mean_residual(lam0, f.t_t) / f.t_s))
    n_on8 = int(math.ceil(mean_residual(lam1, f.t_t) / f.t_s))
    return min(n_off4, f.m - 1), min(n_on8, f.m - 1)


def case_probs(sc: Scenario) -> np.ndarray:
    """Occurrence probabilities Pr[C1..C8]."""
    mu0, mu1 = sc.traffic.mu0, sc.traffic.mu1
    tt = sc.frame.t_t
    e0 = math.exp(-tt / sc.traffic.lambda0)
    e1 = math.exp(-tt / sc.traffic.lambda1)
    s = sc.sensing
    tr_idle = (1 - sc.p_pf) * (1 - s.p_f)   # predicted idle, initial sense idle, PU OFF
    tr_busy = (1 - sc.p_pd) * (1 - s.p_f)   # ... window busy, PU OFF at start
    tr_on = (1 - sc.p_pd) * (1 - s.p_d)     # ... window busy, PU ON at start (missed)
    return np.array([
        mu0 * tr_idle * e0,
        mu0 * (1 - tr_idle) * e0,
        mu0 * tr_busy * (1 - e0),
        mu0 * (1 - tr_busy) * (1 - e0),
        mu1 * tr_on * e1,
        mu1 * (1 - tr_on) * e1,
        mu1 * tr_on * (1 - e1),
        mu1 * (1 - tr_on) * (1 - e1),
    ])


def case_throughputs(sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Per-case expected throughput, full and with collided frames credited zero."""
    f, d, s = sc.frame, sc.rates, sc.sensing
    m, tt, tp = f.m, f.t_t, f.t_p
    l0 = mean_residual(sc.traffic.lambda0, tt)
    l1 = mean_residual(sc.traffic.lambda1, tt)
    n_off4, n_on8 = _slot_counts(sc)
    n_on4 = m - 1 - n_off4
    n_off8 = m - 1 - n_on8
    q_f = 1 - s.p_f_si   # transmit prob. of an idle slot under TS
    q_d = 1 - s.p_d_si   # transmit prob. of a busy slot under TS

    r1 = 2 * tt / tp * d.d0_tr
    r2 = binomial_throughput(m - 1, q_f, m, d.d0_ts)
    r3 = 2 * (d.d0_tr - d.d1_tr) / tp * l0 + 2 * tt / tp * d.d1_tr
    r4_off = binomial_throughput(n_off4, q_f, m, d.d0_ts)
    r4 = r4_off + binomial_throughput(n_on4, q_d, m, d.d1_ts)
    r5 = 2 * tt / tp * d.d1_tr
    r6 = binomial_throughput(m - 1, q_d, m, d.d1_ts)
    r7 = 2 * (d.d1_tr - d.d0_tr) / tp * l1 + 2 * tt / tp * d.d0_tr
    r8_off = binomial_throughput(n_off8, q_f, m, d.d0_ts)
    r8 = binomial_throughput(n_on8, q_d, m, d.d1_ts) + r8_off
    full = np.array([r1, r2, r3, r4, r5, r6, r7, r8])

    # a TS frame is collision-free iff every busy data slot is detected
    nc = np.array([r1, r2, 0.0, r4_off * s.p_d_si ** n_on4, 0.0, 0.0, 0.0, r8_off * s.p_d_si ** n_on8])
    return full, nc


def collision_terms(sc: Scenario, pr: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-case collision probabilities (zero for C1, C2)."""
    pr = case_probs(sc) if pr is None else pr
    m = sc.frame.m
    n_off4, n_on8 = _slot_counts(sc)
    n_on4 = m - 1 - n_off4
    pd_si = sc.sensing.p_d_si
    if sc.literal_ts_collision:
        hit = lambda k: (1 - pd_si) ** k
    else:
        hit = lambda k: 1 - pd_si ** k
    out = np.zeros(N_CASES)
    out[2] = pr[2]
    out[3] = pr[3] * hit(n_on4)
    out[4] = pr[4]
    out[5] = pr[5] * hit(m - 1)
    out[6] = pr[6]
    out[7] = pr[7] * hit(n_on8)
    return out


@dataclass
class CaseBreakdown:
    scenario: Scenario
    pr: np.ndarray
    r: np.ndarray
    r_nc: np.ndarray
    pr_c: np.ndarray

    @property
    def throughput(self) -> float:
        return float(self.pr @ self.r)

    @property
    def throughput_nc(self) -> float:
        return float(self.pr @ self.r_nc)

    @property
    def collision(self) -> float:
        return float(self.pr_c.sum())


def breakdown(sc: Scenario) -> CaseBreakdown:
    pr = case_probs(sc)
    r, r_nc = case_throughputs(sc)
    return CaseBreakdown(scenario=sc, pr=pr, r=r, r_nc=r_nc, pr_c=collision_terms(sc, pr))


def avg_throughput(sc: Scenario) -> tuple[float, float]:
    """(average throughput, non-collision average throughput)."""
    b = breakdown(sc)
    return b.throughput, b.throughput_nc


def collision_prob(sc: Scenario) -> tuple[float, np.ndarray]:
    pr_c = collision_terms(sc)
    return float(pr_c.sum()), pr_c


def expected_r4_exact(sc: Scenario) -> float:
    """E(R4) averaged over the truncated residual-time density instead of
    plugging in its mean. The idle slot count floor(L/Ts) is piecewise
    constant, so the expectation is a finite sum."""
    f, d, s = sc.frame, sc.rates, sc.sensing
    lam, tt = sc.traffic.lambda0, f.t_t
    norm = -math.expm1(-tt / lam)
    total = 0.0
    for k in range(f.m - 1):
        a, b = k * f.t_s, min((k + 1) * f.t_s, tt)
        w = (math.exp(-a / lam) - math.exp(-b / lam)) / norm
        r = (binomial_throughput(k, 1 - s.p_f_si, f.m, d.d0_ts)
             + binomial_throughput(f.m - 1 - k, 1 - s.p_d_si, f.m, d.d1_ts))
        total += w * r
    return total


# ----------------------------------------------------------------- sweeps

SWEEP_COLUMNS = (
    ["m", "p_pf", "p_pd"]
    + [f"pr_c{i}" for i in range(1, 9)] + ["pr_sum"]
    + [f"r_c{i}" for i in range(1, 9)]
    + [f"rnc_c{i}" for i in range(1, 9)]
    + [f"col_c{i}" for i in range(1, 9)]
    + ["nn_thr", "nn_thr_nc", "nn_col", "tr_thr", "tr_thr_nc", "tr_col", "ts_thr", "ts_thr_nc", "ts_col"]
)

PredictionProbs = Union[tuple, Callable[[int], tuple]]


def sweep(traffic: TrafficModel, sensing: SensingProbs, rate: Rates, t_s: float, m_values,
          prediction: PredictionProbs, literal_ts_collision: bool = False) -> list[dict]:
    """One row per M; ``prediction`` is (p_pf, p_pd) or a function of M returning it."""
    rows = []
    for m in m_values:
        ppf, ppd = prediction(m) if callable(prediction) else prediction
        sc = Scenario(traffic=traffic, sensing=sensing, p_pf=ppf, p_pd=ppd,
                      frame=FrameConfig(m=int(m), t_s=t_s), rates=rate,
                      literal_ts_collision=literal_ts_collision)
        b = breakdown(sc)
        tr, ts = breakdown(tr_only(sc)), breakdown(ts_only(sc))
        row = {"m": int(m), "p_pf": ppf, "p_pd": ppd}
        row.update({f"pr_c{i + 1}": v for i, v in enumerate(b.pr)})
        row["pr_sum"] = float(b.pr.sum())
        row.update({f"r_c{i + 1}": v for i, v in enumerate(b.r)})
        row.update({f"rnc_c{i + 1}": v for i, v in enumerate(b.r_nc)})
        row.update({f"col_c{i + 1}": v for i, v in enumerate(b.pr_c)})
        row.update(nn_thr=b.throughput, nn_thr_nc=b.throughput_nc, nn_col=b.collision,
                   tr_thr=tr.throughput, tr_thr_nc=tr.throughput_nc, tr_col=tr.collision,
                   ts_thr=ts.throughput, ts_thr_nc=ts.throughput_nc, ts_col=ts.collision)
        rows.append({k: (float(v) if k != "m" else v) for k, v in row.items()})
    return rows
