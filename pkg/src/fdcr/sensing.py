"""Energy-detection false-alarm and detection probabilities with residual self-interference."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import erfc, ndtri


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def q_function(x):
    """Standard normal tail probability Q(x) = P(Z > x)."""
    out = 0.5 * erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def q_inverse(p: float) -> float:
    """x such that Q(x) = p, for 0 < p < 1."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return float(-ndtri(p))


@dataclass(frozen=True)
class RadioParams:
    """Sensing and link parameters, SNRs linear.

    ``eps_over_sigma2`` is the normalised energy threshold of the initial
    (interference-free) sensing slot. ``eps_over_sigma2_si`` is the threshold
    used while transmitting; it defaults to the same value.
    """

    chi: float
    snr_ss: float
    snr_sp: float
    omega_s: float
    t_s: float
    eps_over_sigma2: float
    eps_over_sigma2_si: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.chi <= 1.0:
            raise ValueError(f"chi must lie in [0, 1], got {self.chi}")
        for name in ("snr_ss", "snr_sp", "omega_s", "t_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.omega_s * self.t_s < 1:
            raise ValueError("omega_s * t_s must be at least one sample")

    @property
    def n_samples(self) -> float:
        return self.omega_s * self.t_s

    @property
    def threshold_si(self) -> float:
        return self.eps_over_sigma2 if self.eps_over_sigma2_si is None else self.eps_over_sigma2_si


@dataclass(frozen=True)
class SensingProbs:
    p_f: float
    p_d: float
    p_f_si: float
    p_d_si: float

    def __post_init__(self):
        for name in ("p_f", "p_d", "p_f_si", "p_d_si"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    @classmethod
    def perfect(cls) -> "SensingProbs":
        return cls(p_f=0.0, p_d=1.0, p_f_si=0.0, p_d_si=1.0)


def _pd(eps, chi, snr_ss, snr_sp, n):
    c2s = chi * chi * snr_ss
    var = 2 * c2s + 2 * c2s * snr_sp + 2 * snr_sp + 1
    return q_function((eps - c2s - snr_sp - 1.0) * math.sqrt(n / var))


def _pf(eps, chi, snr_ss, n):
    c2s = chi * chi * snr_ss
    return q_function((eps - c2s - 1.0) * math.sqrt(n / (2 * c2s + 1)))


def sensing_probs(p: RadioParams) -> SensingProbs:
    """Detection and false-alarm probabilities with and without self-interference.

    Without interference the residual coefficient is set to zero; the initial
    sensing slot uses ``eps_over_sigma2`` and in-transmission sensing uses
    ``threshold_si``.
    """
    n = p.n_samples
    return SensingProbs(
        p_f=_pf(p.eps_over_sigma2, 0.0, p.snr_ss, n),
        p_d=_pd(p.eps_over_sigma2, 0.0, p.snr_ss, p.snr_sp, n),
        p_f_si=_pf(p.threshold_si, p.chi, p.snr_ss, n),
        p_d_si=_pd(p.threshold_si, p.chi, p.snr_ss, p.snr_sp, n),
    )


def threshold_for_target_pf(p: RadioParams, target_pf: float, with_si: bool) -> float:
    """Normalised threshold whose false-alarm probability equals ``target_pf``."""
    if not 0.0 < target_pf < 1.0:
        raise ValueError(f"target_pf must lie in (0, 1), got {target_pf}")
    c2s = p.chi * p.chi * p.snr_ss if with_si else 0.0
    return (c2s + 1.0) + q_inverse(target_pf) * math.sqrt((2 * c2s + 1.0) / p.n_samples)


def calibrated(p: RadioParams, target_pf: float) -> RadioParams:
    """Copy of ``p`` with both thresholds set for the same false-alarm rate."""
    return replace(p,
                   eps_over_sigma2=threshold_for_target_pf(p, target_pf, with_si=False),
                   eps_over_sigma2_si=threshold_for_target_pf(p, target_pf, with_si=True))


def draw_sensing(true_state, probs: SensingProbs, with_si: bool, rng: np.random.Generator):
    """Sensed labels (-1 idle / +1 busy) for true slot labels.

    One uniform is drawn per slot; the slot reads busy iff it falls below the
    detection probability (busy slot) or false-alarm probability (idle slot).
    """
    state = np.asarray(true_state)
    pf, pd = (probs.p_f_si, probs.p_d_si) if with_si else (probs.p_f, probs.p_d)
    u = rng.random(state.shape)
    out = np.where(u < np.where(state == 1, pd, pf), 1, -1).astype(np.int8)
    return int(out) if out.ndim == 0 else out
