import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdcr import kernels
from fdcr._jit import HAS_NUMBA
from fdcr.predictor import init_mlp
from fdcr.traffic import TrafficModel, sample_timeline


@pytest.fixture(scope="module")
def timeline():
    return sample_timeline(TrafficModel(0.1, 0.1), 30.0, 1e-3, 21)


def test_backend_reported():
    assert kernels.BACKEND in ("numba", "numpy")
    if not HAS_NUMBA:
        assert kernels.BACKEND == "numpy"


def test_label_slots_agree(timeline):
    tl = timeline
    a = kernels.label_slots_nb(tl.transitions, tl.initial_state, tl.n_slots, tl.slot_duration)
    b = kernels.label_slots_np(tl.transitions, tl.initial_state, tl.n_slots, tl.slot_duration)
    assert a.dtype == b.dtype == np.int8
    assert np.array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**31))
def test_run_frames_agree(m, pf, pd, pf_si, pd_si, seed):
    rng = np.random.default_rng(seed)
    n_frames = 50
    labels = rng.choice(np.array([-1, 1], np.int8), size=n_frames * m + 7)
    u = rng.random(labels.size)
    preds = rng.choice(np.array([-1, 1], np.int8), size=n_frames)
    a = kernels.run_frames_nb(labels, u, preds, 7, m, pf, pd, pf_si, pd_si)
    b = kernels.run_frames_np(labels, u, preds, 7, m, pf, pd, pf_si, pd_si)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_run_nn_frames_agree(timeline):
    labels = timeline.slots
    rng = np.random.default_rng(3)
    u = rng.random(labels.size)
    n, m, n_frames = 30, 10, 2000
    net = init_mlp(n, rng, scale=1.0)
    out = []
    for fn in (kernels.run_nn_frames_nb, kernels.run_nn_frames_np):
        obs = np.empty(n + n_frames * m)
        obs[:n] = np.where(labels[:n] == 1, 1.0, -1.0)
        out.append(fn(labels, u, obs, net.w1, net.b1, net.w2, net.b2, net.w3, net.b3, n, m, n_frames,
                      0.05, 0.95, 0.1, 0.9) + (obs,))
    a, b = out
    for k in range(5):
        assert np.array_equal(a[k], b[k])
    assert np.max(np.abs(a[5] - b[5])) <= 1e-12
    assert np.array_equal(a[6], b[6])
    assert set(np.unique(a[0])) == {0, 1, 2}


def test_env_flag_selects_numpy():
    import subprocess
    import sys
    code = "from fdcr import kernels; print(kernels.BACKEND, kernels.run_frames is kernels.run_frames_np)"
    out = subprocess.run([sys.executable, "-c", code], env={"FDCR_NUMBA": "0", "PATH": ""},
                         capture_output=True, text=True, check=True).stdout.split()
    assert out == ["numpy", "True"]
