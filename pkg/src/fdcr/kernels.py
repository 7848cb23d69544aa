"""Hot loops: slot labelling, frame execution, and the closed-loop predictor run.

Every kernel exists twice, a numba version (``*_nb``) and a numpy version
(``*_np``). The module-level names dispatch on ``FDCR_NUMBA`` (see ``_jit``).
Both versions consume random numbers identically, so they agree bit for bit
except for the floating-point order inside the network forward pass.

Frame layout: slot 0 is the initial sensing slot (no self-interference),
slots 1..M-1 carry data. Sensing of slot ``t`` reports busy iff
``u[t] < p``, where ``p`` is the detection or false-alarm probability that
applies to that slot's true state and sensing condition.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit

MODE_TR = 0
MODE_TS = 1
MODE_TR_FALLBACK = 2


# --------------------------------------------------------------- slot labels

@njit
def label_slots_nb(transitions, initial_state, n_slots, slot):
    labels = np.full(n_slots, -1, dtype=np.int8)
    state = initial_state
    t_prev = 0.0
    n_tr = transitions.shape[0]
    for i in range(n_tr + 1):
        if state == 1:
            k0 = int(math.floor(t_prev / slot))
            if i < n_tr:
                k1 = int(math.ceil(transitions[i] / slot))
            else:
                k1 = n_slots
            if k1 > n_slots:
                k1 = n_slots
            for k in range(max(k0, 0), k1):
                labels[k] = 1
        if i < n_tr:
            t_prev = transitions[i]
        state = 1 - state
    return labels


def label_slots_np(transitions, initial_state, n_slots, slot):
    transitions = np.asarray(transitions, dtype=np.float64)
    edges = np.concatenate(([0.0], transitions))
    # interval i starts at edges[i] and has state (initial_state + i) % 2
    on = (initial_state + np.arange(len(edges))) % 2 == 1
    starts = edges[on]
    ends = np.append(transitions, np.inf)[on]
    k0 = np.floor(starts / slot).astype(np.int64)
    k1 = np.where(np.isinf(ends), n_slots, np.ceil(ends / slot)).astype(np.int64)
    k0 = np.clip(k0, 0, n_slots)
    k1 = np.clip(k1, 0, n_slots)
    diff = np.zeros(n_slots + 1, dtype=np.int64)
    np.add.at(diff, k0, 1)
    np.add.at(diff, k1, -1)
    covered = np.cumsum(diff[:-1]) > 0
    return np.where(covered, 1, -1).astype(np.int8)


# ------------------------------------------------------------- frame kernels

@njit
def _frame_nb(labels, u, s, m, pred, pf, pd, pf_si, pd_si, obs, o):
    busy0 = labels[s] == 1
    p0 = pd if busy0 else pf
    s0 = 1 if u[s] < p0 else -1
    n_idle = 0
    n_busy = 0
    if pred == -1 and s0 == -1:
        mode = MODE_TR
        for k in range(1, m):
            if labels[s + k] == 1:
                n_busy += 1
            else:
                n_idle += 1
        for k in range(m):
            obs[o + k] = -1.0
    else:
        mode = MODE_TR_FALLBACK if pred == -1 else MODE_TS
        obs[o] = s0
        for k in range(1, m):
            b = labels[s + k] == 1
            p = pd_si if b else pf_si
            if u[s + k] < p:
                obs[o + k] = 1.0
            else:
                obs[o + k] = -1.0
                if b:
                    n_busy += 1
                else:
                    n_idle += 1
    return mode, s0, n_idle, n_busy


@njit
def run_frames_nb(labels, u, preds, start, m, pf, pd, pf_si, pd_si):
    n_frames = preds.shape[0]
    mode = np.empty(n_frames, dtype=np.int8)
    s0 = np.empty(n_frames, dtype=np.int8)
    n_idle = np.empty(n_frames, dtype=np.int32)
    n_busy = np.empty(n_frames, dtype=np.int32)
    obs = np.empty(m, dtype=np.float64)
    for f in range(n_frames):
        s = start + f * m
        a, b, c, d = _frame_nb(labels, u, s, m, preds[f], pf, pd, pf_si, pd_si, obs, 0)
        mode[f] = a
        s0[f] = b
        n_idle[f] = c
        n_busy[f] = d
    return mode, s0, n_idle, n_busy


def run_frames_np(labels, u, preds, start, m, pf, pd, pf_si, pd_si):
    preds = np.asarray(preds)
    n_frames = preds.shape[0]
    stop = start + n_frames * m
    lab = labels[start:stop].reshape(n_frames, m) == 1
    uu = u[start:stop].reshape(n_frames, m)
    s0_busy = uu[:, 0] < np.where(lab[:, 0], pd, pf)
    s0 = np.where(s0_busy, 1, -1).astype(np.int8)
    tr = (preds == -1) & ~s0_busy
    mode = np.where(tr, MODE_TR, np.where(preds == -1, MODE_TR_FALLBACK, MODE_TS)).astype(np.int8)
    data = lab[:, 1:]
    sensed_idle = ~(uu[:, 1:] < np.where(data, pd_si, pf_si))
    tx = np.where(tr[:, None], True, sensed_idle)
    n_busy = (tx & data).sum(axis=1).astype(np.int32)
    n_idle = (tx & ~data).sum(axis=1).astype(np.int32)
    return mode, s0, n_idle, n_busy


@njit
def run_nn_frames_nb(labels, u, obs, w1, b1, w2, b2, w3, b3, start, m, n_frames,
                     pf, pd, pf_si, pd_si):
    """Closed-loop run. ``obs[:n]`` holds the warm-up sensing results and is
    extended in place; frame f reads its input from ``obs[f*m : f*m+n]``."""
    n = w1.shape[1]
    h1n = w1.shape[0]
    h2n = w2.shape[0]
    mode = np.empty(n_frames, dtype=np.int8)
    s0 = np.empty(n_frames, dtype=np.int8)
    n_idle = np.empty(n_frames, dtype=np.int32)
    n_busy = np.empty(n_frames, dtype=np.int32)
    preds = np.empty(n_frames, dtype=np.int8)
    raw = np.empty(n_frames, dtype=np.float64)
    h1 = np.empty(h1n)
    h2 = np.empty(h2n)
    for f in range(n_frames):
        base = f * m
        for i in range(h1n):
            acc = b1[i]
            for k in range(n):
                acc += w1[i, k] * obs[base + k]
            h1[i] = math.tanh(acc)
        for j in range(h2n):
            acc = b2[j]
            for k in range(h1n):
                acc += w2[j, k] * h1[k]
            h2[j] = math.tanh(acc)
        acc = b3[0]
        for k in range(h2n):
            acc += w3[0, k] * h2[k]
        y = math.tanh(acc)
        raw[f] = y
        p = -1 if y < 0.0 else 1
        preds[f] = p
        s = start + f * m
        a, b, c, d = _frame_nb(labels, u, s, m, p, pf, pd, pf_si, pd_si, obs, base + n)
        mode[f] = a
        s0[f] = b
        n_idle[f] = c
        n_busy[f] = d
    return mode, s0, n_idle, n_busy, preds, raw


def run_nn_frames_np(labels, u, obs, w1, b1, w2, b2, w3, b3, start, m, n_frames,
                     pf, pd, pf_si, pd_si):
    n = w1.shape[1]
    mode = np.empty(n_frames, dtype=np.int8)
    s0 = np.empty(n_frames, dtype=np.int8)
    n_idle = np.empty(n_frames, dtype=np.int32)
    n_busy = np.empty(n_frames, dtype=np.int32)
    preds = np.empty(n_frames, dtype=np.int8)
    raw = np.empty(n_frames, dtype=np.float64)
    one = np.empty(1, dtype=np.int8)
    for f in range(n_frames):
        base = f * m
        x = obs[base:base + n]
        y = np.tanh(w3 @ np.tanh(w2 @ np.tanh(w1 @ x + b1) + b2) + b3)[0]
        raw[f] = y
        one[0] = -1 if y < 0.0 else 1
        preds[f] = one[0]
        s = start + f * m
        fm, fs0, fi, fb = run_frames_np(labels, u, one, s, m, pf, pd, pf_si, pd_si)
        mode[f], s0[f], n_idle[f], n_busy[f] = fm[0], fs0[0], fi[0], fb[0]
        o = base + n
        if fm[0] == MODE_TR:
            obs[o:o + m] = -1.0
        else:
            lab = labels[s:s + m] == 1
            obs[o] = fs0[0]
            obs[o + 1:o + m] = np.where(u[s + 1:s + m] < np.where(lab[1:], pd_si, pf_si), 1.0, -1.0)
    return mode, s0, n_idle, n_busy, preds, raw


if USE_NUMBA:
    label_slots = label_slots_nb
    run_frames = run_frames_nb
    run_nn_frames = run_nn_frames_nb
else:
    label_slots = label_slots_np
    run_frames = run_frames_np
    run_nn_frames = run_nn_frames_np

BACKEND = "numba" if USE_NUMBA else "numpy"
