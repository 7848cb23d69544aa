"""Adaptive TR/TS mode selection and frame mechanics.

Each frame has M slots. Slot 0 is initial sensing without self-interference.
In TR mode the pair exchanges data in all M-1 remaining slots (twice the
half-duplex throughput, no further sensing). In TS mode each data slot is
sensed under self-interference and used only if it reads idle. A TR decision
whose initial sensing reads busy runs the frame with TS mechanics.

A frame collides if any transmitted slot overlaps PU activity. Its
non-collision throughput is its throughput if it did not collide, else 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from . import kernels
from .analytic import FrameConfig, Rates
from .predictor import Mlp
from .sensing import SensingProbs


class Mode(IntEnum):
    TR = kernels.MODE_TR
    TS = kernels.MODE_TS
    TR_FALLBACK_TS = kernels.MODE_TR_FALLBACK


MODE_NAMES = {Mode.TR: "TR", Mode.TS: "TS", Mode.TR_FALLBACK_TS: "TR_fallback_TS"}


def select_mode(prediction: int, initial_sense: int) -> Mode:
    """TR only when both the prediction and the initial sensing say idle."""
    return Mode.TR if prediction == -1 and initial_sense == -1 else Mode.TS


@dataclass
class FrameRecord:
    mode: Mode
    prediction: int
    initial_sense: int
    pu_state: np.ndarray     # true label per slot
    sensed: np.ndarray       # slot 0: initial sense; data slots: in-frame sense, 0 if not sensed
    transmitted: np.ndarray  # bool per slot, slot 0 always False
    collided: bool
    throughput: float        # bit/s/Hz averaged over the frame duration

    @property
    def n_tx(self) -> int:
        return int(self.transmitted.sum())

    @property
    def throughput_nc(self) -> float:
        return 0.0 if self.collided else self.throughput


def _ts_data(slots, u, probs: SensingProbs):
    busy = slots[1:] == 1
    sensed = np.where(u[1:] < np.where(busy, probs.p_d_si, probs.p_f_si), 1, -1)
    return sensed, sensed == -1


def _record(mode, prediction, s0, slots, sensed_data, tx_data, rates: Rates, m):
    transmitted = np.concatenate(([False], tx_data))
    busy = slots == 1
    n_busy = int((transmitted & busy).sum())
    n_idle = int((transmitted & ~busy).sum())
    if mode == Mode.TR:
        thr = 2.0 * (n_idle * rates.d0_tr + n_busy * rates.d1_tr) / m
    else:
        thr = (n_idle * rates.d0_ts + n_busy * rates.d1_ts) / m
    sensed = np.concatenate(([s0], sensed_data)).astype(np.int8)
    return FrameRecord(mode=mode, prediction=prediction, initial_sense=s0, pu_state=np.asarray(slots, np.int8),
                       sensed=sensed, transmitted=transmitted, collided=n_busy > 0, throughput=thr)


def _initial_sense(slots, u, probs: SensingProbs) -> int:
    return 1 if u[0] < (probs.p_d if slots[0] == 1 else probs.p_f) else -1


def run_ts_frame(cfg: FrameConfig, slots, probs: SensingProbs, rates: Rates, rng: np.random.Generator,
                 prediction: int = 1, u: Optional[np.ndarray] = None) -> FrameRecord:
    slots = np.asarray(slots)
    if len(slots) != cfg.m:
        raise ValueError(f"frame needs {cfg.m} slots, got {len(slots)}")
    u = rng.random(cfg.m) if u is None else u
    s0 = _initial_sense(slots, u, probs)
    sensed, tx = _ts_data(slots, u, probs)
    return _record(Mode.TS, prediction, s0, slots, sensed, tx, rates, cfg.m)


def run_tr_frame(cfg: FrameConfig, slots, probs: SensingProbs, rates: Rates, rng: np.random.Generator,
                 prediction: int = -1, u: Optional[np.ndarray] = None) -> FrameRecord:
    slots = np.asarray(slots)
    if len(slots) != cfg.m:
        raise ValueError(f"frame needs {cfg.m} slots, got {len(slots)}")
    u = rng.random(cfg.m) if u is None else u
    s0 = _initial_sense(slots, u, probs)
    if s0 == 1:
        sensed, tx = _ts_data(slots, u, probs)
        return _record(Mode.TR_FALLBACK_TS, prediction, s0, slots, sensed, tx, rates, cfg.m)
    return _record(Mode.TR, prediction, s0, slots, np.zeros(cfg.m - 1, np.int8),
                   np.ones(cfg.m - 1, dtype=bool), rates, cfg.m)


def run_frame(cfg: FrameConfig, slots, probs, rates, rng, prediction: int, u=None) -> FrameRecord:
    """One frame for a given prediction (-1 idle / +1 busy)."""
    if prediction == -1:
        return run_tr_frame(cfg, slots, probs, rates, rng, prediction=-1, u=u)
    return run_ts_frame(cfg, slots, probs, rates, rng, prediction=1, u=u)


# ------------------------------------------------------------- bulk frames

@dataclass
class FrameLog:
    """Per-frame outcomes of a run, as arrays."""

    m: int
    mode: np.ndarray
    prediction: np.ndarray
    initial_sense: np.ndarray
    n_idle_tx: np.ndarray
    n_busy_tx: np.ndarray
    throughput: np.ndarray
    truth: np.ndarray                 # window label: -1 all M slots idle, else +1
    raw: Optional[np.ndarray] = None  # network outputs, closed-loop runs only

    @classmethod
    def build(cls, m, mode, s0, n_idle, n_busy, preds, truth, rates: Rates, raw=None) -> "FrameLog":
        tr = mode == Mode.TR
        r0 = np.where(tr, 2.0 * rates.d0_tr, rates.d0_ts)
        r1 = np.where(tr, 2.0 * rates.d1_tr, rates.d1_ts)
        thr = (n_idle * r0 + n_busy * r1) / m
        return cls(m=m, mode=mode, prediction=np.asarray(preds, np.int8), initial_sense=s0, n_idle_tx=n_idle,
                   n_busy_tx=n_busy, throughput=thr, truth=truth, raw=raw)

    def __len__(self):
        return len(self.mode)

    @property
    def n_tx(self) -> np.ndarray:
        return self.n_idle_tx + self.n_busy_tx

    @property
    def collided(self) -> np.ndarray:
        return self.n_busy_tx > 0

    @property
    def throughput_nc(self) -> np.ndarray:
        return np.where(self.collided, 0.0, self.throughput)

    def summary(self) -> dict:
        n = len(self)
        return {
            "throughput": float(self.throughput.mean()),
            "throughput_nc": float(self.throughput_nc.mean()),
            "collision": float(self.collided.mean()),
            "frac_tr": float((self.mode == Mode.TR).sum() / n),
            "frac_ts": float((self.mode == Mode.TS).sum() / n),
            "frac_fallback": float((self.mode == Mode.TR_FALLBACK_TS).sum() / n),
            "tx_slots": int(self.n_tx.sum()),
            "n_frames": n,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame", "mode", "prediction", "initial_sense", "slots_tx", "collided", "throughput"])
            for i in range(len(self)):
                w.writerow([i, MODE_NAMES[Mode(int(self.mode[i]))], int(self.prediction[i]),
                            int(self.initial_sense[i]), int(self.n_tx[i]), int(self.collided[i]),
                            repr(float(self.throughput[i]))])


def window_truth(labels: np.ndarray, start: int, m: int, n_frames: int) -> np.ndarray:
    win = labels[start:start + n_frames * m].reshape(n_frames, m)
    return np.where((win == -1).all(axis=1), -1, 1).astype(np.int8)


def _check_cover(labels, start, m, n_frames):
    if start < 0 or start + n_frames * m > len(labels):
        raise ValueError(f"timeline of {len(labels)} slots cannot hold {n_frames} frames of {m} from slot {start}")


def run_frames(labels: np.ndarray, u: np.ndarray, predictions, start: int, m: int,
               probs: SensingProbs, rates: Rates) -> FrameLog:
    """Execute consecutive frames with given per-frame predictions (open loop)."""
    preds = np.asarray(predictions, dtype=np.int8)
    _check_cover(labels, start, m, len(preds))
    mode, s0, n_idle, n_busy = kernels.run_frames(labels, u, preds, start, m,
                                                  probs.p_f, probs.p_d, probs.p_f_si, probs.p_d_si)
    return FrameLog.build(m, mode, s0, n_idle, n_busy, preds, window_truth(labels, start, m, len(preds)), rates)


def warmup_sensing(labels: np.ndarray, u: np.ndarray, start: int, n: int, probs: SensingProbs) -> np.ndarray:
    """Input vector initialised by sensing the N slots before ``start`` (no self-interference)."""
    lab = labels[start - n:start]
    p = np.where(lab == 1, probs.p_d, probs.p_f)
    return np.where(u[start - n:start] < p, 1.0, -1.0)


def run_nn_ams_u(net: Mlp, labels: np.ndarray, u: np.ndarray, m: int, n_frames: int,
                 probs: SensingProbs, rates: Rates, start: Optional[int] = None) -> FrameLog:
    """Closed-loop predictor-driven run on pre-drawn per-slot uniforms.

    After a TR frame that started on an idle reading, the input vector is
    shifted by M idle markers; otherwise by the frame's M sensing results.
    """
    n = net.n_inputs
    start = n if start is None else start
    if start < n:
        raise ValueError("need N slots before the first frame to initialise the input vector")
    _check_cover(labels, start, m, n_frames)
    obs = np.empty(n + n_frames * m, dtype=np.float64)
    obs[:n] = warmup_sensing(labels, u, start, n, probs)
    mode, s0, n_idle, n_busy, preds, raw = kernels.run_nn_frames(
        labels, u, obs, net.w1, net.b1, net.w2, net.b2, net.w3, net.b3, start, m, n_frames,
        probs.p_f, probs.p_d, probs.p_f_si, probs.p_d_si)
    return FrameLog.build(m, mode, s0, n_idle, n_busy, preds, window_truth(labels, start, m, n_frames),
                          rates, raw=raw)


def run_nn_ams(net: Mlp, cfg: FrameConfig, labels: np.ndarray, probs: SensingProbs, rates: Rates,
               rng: np.random.Generator, n_frames: int) -> FrameLog:
    labels = np.asarray(labels, dtype=np.int8)
    u = rng.random(len(labels))
    return run_nn_ams_u(net, labels, u, cfg.m, n_frames, probs, rates)
