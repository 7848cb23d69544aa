"""Primary-user ON/OFF channel occupancy.

Slots are labelled -1 (idle) or +1 (busy). A slot that contains any ON time
is busy; a slot is idle only if the channel is OFF for its whole span.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import kernels
from .rng import stream

IDLE = -1
BUSY = 1

# (rng, mean, size) -> array of positive durations
DurationSampler = Callable[[np.random.Generator, float, int], np.ndarray]


class ModelConfigError(ValueError):
    """Invalid traffic model or sampler output."""


def exponential_sampler(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    # inverse transform, one uniform per interval
    u = rng.random(size)
    return -mean * np.log1p(-u)


def uniform_sampler(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    """Durations uniform on (0, 2 * mean]."""
    return 2.0 * mean * (1.0 - rng.random(size))


SAMPLERS = {"exponential": None, "uniform": uniform_sampler}


@dataclass(frozen=True)
class TrafficModel:
    """ON/OFF process with mean OFF length ``lambda0`` and mean ON length ``lambda1`` (seconds)."""

    lambda0: float
    lambda1: float
    sampler: Optional[DurationSampler] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.lambda1 > 0):
            raise ModelConfigError(f"mean state durations must be positive, got {self.lambda0}, {self.lambda1}")
        if not (math.isfinite(self.lambda0) and math.isfinite(self.lambda1)):
            raise ModelConfigError("mean state durations must be finite")

    @property
    def distribution(self) -> str:
        if self.sampler is None:
            return "exponential"
        for name, fn in SAMPLERS.items():
            if fn is self.sampler:
                return name
        return "custom"

    @property
    def mu0(self) -> float:
        return self.lambda0 / (self.lambda0 + self.lambda1)

    @property
    def mu1(self) -> float:
        return self.lambda1 / (self.lambda0 + self.lambda1)


def stationary_probs(model: TrafficModel) -> tuple[float, float]:
    """Long-run probabilities of the OFF and ON states."""
    total = model.lambda0 + model.lambda1
    return model.lambda0 / total, model.lambda1 / total


@dataclass
class ChannelTimeline:
    slot_duration: float
    slots: np.ndarray          # int8, -1 idle / +1 busy
    transitions: np.ndarray    # state-change instants (s), strictly increasing
    initial_state: int         # 0 = OFF, 1 = ON at t = 0
    total_time: float
    lambda0: float = float("nan")
    lambda1: float = float("nan")
    seed: Optional[int] = None
    stream_key: tuple = ()

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def state_at(self, t: float) -> int:
        """Continuous-time state (0 OFF / 1 ON) at instant ``t``."""
        n_before = int(np.searchsorted(self.transitions, t, side="right"))
        return (self.initial_state + n_before) % 2


def n_slots_for(total_time: float, slot: float) -> int:
    return int(math.floor(total_time / slot + 1e-9))


def _draw(sampler: DurationSampler, rng, mean: float, size: int) -> np.ndarray:
    d = np.asarray(sampler(rng, mean, size), dtype=np.float64)
    if d.shape != (size,):
        raise ModelConfigError(f"sampler returned shape {d.shape}, expected ({size},)")
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise ModelConfigError("sampler produced non-positive or non-finite durations")
    return d


def sample_timeline(model: TrafficModel, total_time: float, slot: float, seed: int,
                    stream_key: tuple = (0,)) -> ChannelTimeline:
    """Draw an ON/OFF realisation covering ``total_time`` and label its slots.

    The initial state is OFF with the stationary probability. All draws come
    from one PCG64 stream derived from ``(seed, *stream_key)``.
    """
    if not (slot > 0 and total_time >= slot):
        raise ValueError(f"need total_time >= slot > 0, got total_time={total_time}, slot={slot}")
    rng = stream(seed, *stream_key)
    sampler = model.sampler or exponential_sampler
    initial_state = 0 if rng.random() < model.mu0 else 1

    means = (model.lambda0, model.lambda1)
    chunks = []
    t_end = 0.0
    state = initial_state
    batch = max(16, int(2.2 * total_time / (model.lambda0 + model.lambda1)) + 16)
    while t_end <= total_time:
        # alternate OFF/ON lengths; draw each state's lengths from its own mean
        n_pairs = batch
        first = _draw(sampler, rng, means[state], n_pairs)
        second = _draw(sampler, rng, means[1 - state], n_pairs)
        block = np.empty(2 * n_pairs)
        block[0::2] = first
        block[1::2] = second
        edges = t_end + np.cumsum(block)
        chunks.append(edges)
        t_end = float(edges[-1])
        # state after an even number of intervals is unchanged
    transitions = np.concatenate(chunks)
    transitions = transitions[transitions < total_time]

    n = n_slots_for(total_time, slot)
    labels = kernels.label_slots(transitions, initial_state, n, slot)
    return ChannelTimeline(slot_duration=slot, slots=labels, transitions=transitions,
                           initial_state=initial_state, total_time=float(total_time),
                           lambda0=model.lambda0, lambda1=model.lambda1, seed=seed,
                           stream_key=tuple(stream_key))


def state_durations(tl: ChannelTimeline) -> tuple[np.ndarray, np.ndarray]:
    """Completed OFF and ON interval lengths (first and last partial intervals dropped)."""
    d = np.diff(tl.transitions)
    if len(d) == 0:
        return np.empty(0), np.empty(0)
    # interval i runs from transitions[i]; its state is initial_state + i + 1
    states = (tl.initial_state + 1 + np.arange(len(d))) % 2
    return d[states == 0], d[states == 1]


def labels_from_transitions(transitions: np.ndarray, initial_state: int, n_slots: int,
                            slot: float) -> np.ndarray:
    """Reference slot labelling by direct interval overlap (slow, for checking)."""
    edges = np.concatenate(([0.0], np.asarray(transitions, dtype=float), [np.inf]))
    labels = np.full(n_slots, IDLE, dtype=np.int8)
    for i in range(len(edges) - 1):
        if (initial_state + i) % 2 == 1:
            a, b = edges[i], edges[i + 1]
            for k in range(n_slots):
                lo, hi = k * slot, (k + 1) * slot
                if a < hi and b > lo:
                    labels[k] = BUSY
    return labels


_HEADER = "# fdcr-timeline v1"


def save_timeline(tl: ChannelTimeline, path) -> None:
    """Text export: header lines, then one transition instant per line."""
    lines = [
        _HEADER,
        f"# lambda0 = {tl.lambda0!r}",
        f"# lambda1 = {tl.lambda1!r}",
        f"# slot = {tl.slot_duration!r}",
        f"# seed = {tl.seed}",
        f"# stream = {','.join(str(k) for k in tl.stream_key)}",
        f"# total_time = {tl.total_time!r}",
        f"# initial_state = {tl.initial_state}",
    ]
    lines += [repr(float(t)) for t in tl.transitions]
    Path(path).write_text("\n".join(lines) + "\n")


def load_timeline(path) -> ChannelTimeline:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != _HEADER:
        raise ValueError(f"{path}: not a timeline file")
    meta = {}
    values = []
    for line in text[1:]:
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k.strip()] = v.strip()
        elif line.strip():
            values.append(float(line))
    slot = float(meta["slot"])
    total = float(meta["total_time"])
    init = int(meta["initial_state"])
    transitions = np.array(values, dtype=np.float64)
    labels = kernels.label_slots(transitions, init, n_slots_for(total, slot), slot)
    seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
    key = tuple(int(k) for k in meta.get("stream", "").split(",") if k)
    return ChannelTimeline(slot_duration=slot, slots=labels, transitions=transitions,
                           initial_state=init, total_time=total, lambda0=float(meta["lambda0"]),
                           lambda1=float(meta["lambda1"]), seed=seed, stream_key=key)
