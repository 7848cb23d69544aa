import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdcr import kernels
from fdcr.analytic import FrameConfig, rates
from fdcr.predictor import constant_mlp, init_mlp
from fdcr.selection import (MODE_NAMES, FrameLog, Mode, run_frame, run_frames, run_nn_ams, run_nn_ams_u,
                            run_tr_frame, run_ts_frame, select_mode, window_truth)
from fdcr.sensing import SensingProbs
from fdcr.traffic import TrafficModel, sample_timeline

from conftest import base_radio

RATES = rates(base_radio())
CFG = FrameConfig(10, 1e-3)
PERFECT = SensingProbs.perfect()


def test_select_mode_table():
    assert select_mode(-1, -1) == Mode.TR
    assert select_mode(-1, 1) == Mode.TS
    assert select_mode(1, -1) == Mode.TS
    assert select_mode(1, 1) == Mode.TS


def test_tr_all_idle(rng):
    rec = run_tr_frame(CFG, -np.ones(10), PERFECT, RATES, rng)
    assert rec.mode == Mode.TR and rec.n_tx == 9 and not rec.collided
    assert rec.throughput == pytest.approx(2 * 9 / 10 * RATES.d0_tr)
    assert not rec.transmitted[0]


def test_tr_initial_busy_falls_back(rng):
    slots = np.ones(10)
    rec = run_tr_frame(CFG, slots, PERFECT, RATES, rng)
    assert rec.mode == Mode.TR_FALLBACK_TS
    assert rec.n_tx == 0 and not rec.collided


@pytest.mark.parametrize("k", range(1, 10))
def test_tr_collides_when_pu_returns(rng, k):
    slots = -np.ones(10)
    slots[k:] = 1
    rec = run_tr_frame(CFG, slots, PERFECT, RATES, rng)
    assert rec.mode == Mode.TR and rec.collided


def test_ts_all_idle(rng):
    rec = run_ts_frame(CFG, -np.ones(10), PERFECT, RATES, rng)
    assert rec.n_tx == 9 and rec.throughput == pytest.approx(9 / 10 * RATES.d0_ts)


def test_ts_all_busy_perfect(rng):
    rec = run_ts_frame(CFG, np.ones(10), PERFECT, RATES, rng)
    assert rec.n_tx == 0 and not rec.collided and rec.throughput == 0


def test_ts_all_busy_collision_rate():
    n = 100_000
    labels = np.ones(n * 10, np.int8)
    u = np.random.default_rng(5).random(labels.size)
    probs = SensingProbs(0.0, 1.0, 0.0, 0.9)
    log = run_frames(labels, u, np.ones(n, np.int8), 0, 10, probs, RATES)
    assert abs(log.collided.mean() - (1 - 0.9 ** 9)) <= 0.01


def test_frame_length_checked(rng):
    with pytest.raises(ValueError):
        run_ts_frame(CFG, -np.ones(9), PERFECT, RATES, rng)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**31), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
       st.floats(0, 1))
def test_bulk_matches_single_frames(m, seed, pf, pd, pf_si, pd_si):
    rng = np.random.default_rng(seed)
    n_frames = 30
    labels = rng.choice(np.array([-1, 1], np.int8), size=n_frames * m)
    u = rng.random(labels.size)
    preds = rng.choice(np.array([-1, 1], np.int8), size=n_frames)
    probs = SensingProbs(pf, pd, pf_si, pd_si)
    log = run_frames(labels, u, preds, 0, m, probs, RATES)
    cfg = FrameConfig(m, 1e-3)
    for f in range(n_frames):
        sl = slice(f * m, (f + 1) * m)
        rec = run_frame(cfg, labels[sl], probs, RATES, None, int(preds[f]), u=u[sl])
        assert rec.mode == log.mode[f]
        assert rec.n_tx == log.n_tx[f] <= m - 1
        assert rec.collided == log.collided[f]
        assert rec.throughput == pytest.approx(log.throughput[f], rel=1e-12)
        if rec.mode == Mode.TR:
            assert rec.n_tx == m - 1
        else:
            # TS transmits exactly in the slots whose gating sense read idle
            assert rec.n_tx == int((rec.sensed[1:] == -1).sum())
        busy_tx = rec.transmitted & (rec.pu_state == 1)
        assert rec.collided == bool(busy_tx.any())
        assert rec.throughput_nc == (0.0 if rec.collided else rec.throughput)


def test_constant_idle_predictor_on_idle_channel(rng):
    labels = -np.ones(75 + 500 * 10, np.int8)
    net = constant_mlp(75, -1)
    log = run_nn_ams(net, CFG, labels, PERFECT, RATES, rng, 500)
    assert np.all(log.mode == Mode.TR) and not log.collided.any()
    tr = run_frames(labels, rng.random(labels.size), -np.ones(500, np.int8), 75, 10, PERFECT, RATES)
    assert np.array_equal(log.throughput, tr.throughput)


def test_constant_busy_predictor_is_ts_only():
    tl = sample_timeline(TrafficModel(0.1, 0.1), 60.0, 1e-3, 4)
    u = np.random.default_rng(2).random(tl.n_slots)
    probs = SensingProbs(0.05, 0.95, 0.1, 0.9)
    n_frames = (tl.n_slots - 75) // 10
    nn = run_nn_ams_u(constant_mlp(75, 1), tl.slots, u, 10, n_frames, probs, RATES)
    ts = run_frames(tl.slots, u, np.ones(n_frames, np.int8), 75, 10, probs, RATES)
    for k in ("mode", "initial_sense", "n_idle_tx", "n_busy_tx", "throughput"):
        assert np.array_equal(getattr(nn, k), getattr(ts, k))


def test_input_update_rule():
    """TR frames feed M idle markers back, other frames their sensing results."""
    tl = sample_timeline(TrafficModel(0.1, 0.1), 20.0, 1e-3, 8)
    labels = tl.slots
    n, m, n_frames = 40, 10, 1500
    rng = np.random.default_rng(0)
    net = init_mlp(n, rng, scale=1.0)
    u = rng.random(labels.size)
    obs = np.empty(n + n_frames * m)
    obs[:n] = labels[:n]
    mode, *_ = kernels.run_nn_frames_np(labels, u, obs, net.w1, net.b1, net.w2, net.b2, net.w3, net.b3, n, m,
                                        n_frames, 0.0, 1.0, 0.0, 1.0)
    assert len(obs[:n]) == n
    for f in range(n_frames):
        seg = obs[n + f * m:n + (f + 1) * m]
        if mode[f] == Mode.TR:
            assert np.all(seg == -1)
        else:
            # perfect sensing: the fed-back results are the true slot states
            assert np.array_equal(seg, labels[n + f * m:n + (f + 1) * m])


def test_frame_log_csv(tmp_path):
    labels = np.array([-1] * 20, np.int8)
    log = run_frames(labels, np.zeros(20), np.array([-1, 1], np.int8), 0, 10, SensingProbs(0.5, 1, 0, 1), RATES)
    log.write_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "frame,mode,prediction,initial_sense,slots_tx,collided,throughput"
    assert lines[1].split(",")[1] == MODE_NAMES[Mode(int(log.mode[0]))]
    assert len(log) == 2


def test_window_truth():
    labels = np.array([-1, -1, -1, 1, -1, -1], np.int8)
    assert list(window_truth(labels, 0, 3, 2)) == [-1, 1]


def test_cover_checked():
    with pytest.raises(ValueError):
        run_frames(np.ones(10, np.int8), np.zeros(10), np.ones(2, np.int8), 0, 10, PERFECT, RATES)
