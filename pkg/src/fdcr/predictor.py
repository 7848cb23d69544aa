"""N-15-20-1 tan-sigmoid perceptron predicting whether the next M slots are all idle.

Output -1 means "all M future slots idle", +1 means "PU active at least once".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

HIDDEN = (15, 20)
_MAGIC = "fdcr-mlp v1"
_LAYERS = ("w1", "b1", "w2", "b2", "w3", "b3")


def tansig(x):
    """2 / (1 + exp(-2x)) - 1, evaluated as tanh for stability."""
    return np.tanh(x)


@dataclass
class Mlp:
    w1: np.ndarray  # (15, N)
    b1: np.ndarray  # (15,)
    w2: np.ndarray  # (20, 15)
    b2: np.ndarray  # (20,)
    w3: np.ndarray  # (1, 20)
    b3: np.ndarray  # (1,)
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.w1.shape[1] if self.w1.ndim == 2 else -1
        h1, h2 = HIDDEN
        expected = {"w1": (h1, n), "b1": (h1,), "w2": (h2, h1), "b2": (h2,), "w3": (1, h2), "b3": (1,)}
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            setattr(self, name, arr)

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[1]

    @property
    def widths(self) -> tuple[int, int, int, int]:
        return (self.n_inputs, *HIDDEN, 1)

    @property
    def n_params(self) -> int:
        return sum(getattr(self, k).size for k in _LAYERS)

    def params(self) -> np.ndarray:
        """Flat parameter vector in the order w1, b1, w2, b2, w3, b3 (row-major)."""
        return np.concatenate([getattr(self, k).ravel() for k in _LAYERS])

    def with_params(self, theta: np.ndarray) -> "Mlp":
        theta = np.asarray(theta, dtype=np.float64)
        parts = {}
        i = 0
        for k in _LAYERS:
            shape = getattr(self, k).shape
            size = int(np.prod(shape))
            parts[k] = theta[i:i + size].reshape(shape).copy()
            i += size
        if i != theta.size:
            raise ValueError(f"parameter vector has {theta.size} entries, expected {i}")
        return Mlp(**parts, seed=self.seed, meta=dict(self.meta))

    def copy(self) -> "Mlp":
        return self.with_params(self.params())


def init_mlp(n_inputs: int, rng: np.random.Generator, seed: Optional[int] = None, scale: float = 0.5) -> Mlp:
    """Weights and biases uniform in [-scale, scale]."""
    h1, h2 = HIDDEN
    u = lambda *shape: rng.uniform(-scale, scale, size=shape)
    return Mlp(w1=u(h1, n_inputs), b1=u(h1), w2=u(h2, h1), b2=u(h2), w3=u(1, h2), b3=u(1), seed=seed)


def constant_mlp(n_inputs: int, label: int) -> Mlp:
    """Network that always outputs ``label`` (all weights zero, output bias saturated)."""
    h1, h2 = HIDDEN
    return Mlp(w1=np.zeros((h1, n_inputs)), b1=np.zeros(h1), w2=np.zeros((h2, h1)), b2=np.zeros(h2),
               w3=np.zeros((1, h2)), b3=np.array([5.0 * np.sign(label)]))


def forward_batch(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Raw outputs for a batch of inputs of shape (n_samples, N)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != net.n_inputs:
        raise ValueError(f"input length {x.shape[1]} does not match network input size {net.n_inputs}")
    h1 = tansig(x @ net.w1.T + net.b1)
    h2 = tansig(h1 @ net.w2.T + net.b2)
    return tansig(h2 @ net.w3.T + net.b3)[:, 0]


def to_label(raw):
    """Hard decision: negative -> -1, otherwise +1."""
    return np.where(np.asarray(raw) < 0.0, -1, 1).astype(np.int8)


def forward(net: Mlp, x) -> tuple[float, int]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.n_inputs:
        raise ValueError(f"expected a length-{net.n_inputs} input vector, got shape {x.shape}")
    raw = float(forward_batch(net, x[None, :])[0])
    return raw, (-1 if raw < 0.0 else 1)


def jacobian(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw outputs and d(raw)/d(theta), shape (n_samples, n_params), by backpropagation."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    h1 = tansig(x @ net.w1.T + net.b1)
    h2 = tansig(h1 @ net.w2.T + net.b2)
    y = tansig(h2 @ net.w3.T + net.b3)[:, 0]
    d3 = 1.0 - y * y                                  # (n,)
    d2 = d3[:, None] * net.w3[0] * (1.0 - h2 * h2)   # (n, 20)
    d1 = (d2 @ net.w2) * (1.0 - h1 * h1)             # (n, 15)
    n = x.shape[0]
    cols = [
        (d1[:, :, None] * x[:, None, :]).reshape(n, -1),
        d1,
        (d2[:, :, None] * h1[:, None, :]).reshape(n, -1),
        d2,
        d3[:, None] * h2,
        d3[:, None],
    ]
    return y, np.concatenate(cols, axis=1)


# ------------------------------------------------------------------ datasets

@dataclass
class TrainingSet:
    inputs: np.ndarray   # (n_tr, N) over {-1, +1}
    targets: np.ndarray  # (n_tr,) over {-1, +1}
    m: int

    @property
    def n_tr(self) -> int:
        return len(self.targets)

    @property
    def n(self) -> int:
        return self.inputs.shape[1]


def window_target(future: np.ndarray) -> np.ndarray:
    """-1 iff every slot of each row is idle (idle count m reaches M)."""
    future = np.atleast_2d(future)
    m_idle = (future == -1).sum(axis=1)
    return np.where(m_idle >= future.shape[1], -1, 1).astype(np.int8)


def window_starts(length: int, n: int, m: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if length < n + m:
        raise ValueError(f"sequence of {length} slots is shorter than one window of N+M={n + m}")
    if count < 1:
        raise ValueError("count must be at least 1")
    return rng.integers(0, length - (n + m) + 1, size=count)


def make_training_data(labels: np.ndarray, n: int, m_slots: int, count: int,
                       rng: np.random.Generator) -> TrainingSet:
    """Random contiguous windows of length N+M from a (sensed) slot sequence."""
    labels = np.asarray(labels, dtype=np.int8)
    starts = window_starts(len(labels), n, m_slots, count, rng)
    idx = starts[:, None] + np.arange(n + m_slots)
    win = labels[idx]
    return TrainingSet(inputs=win[:, :n].copy(), targets=window_target(win[:, n:]), m=m_slots)


def make_test_data(true_labels: np.ndarray, observed: np.ndarray, n: int, m_slots: int, count: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Inputs from the observed sequence, truth from the noiseless one."""
    true_labels = np.asarray(true_labels, dtype=np.int8)
    observed = np.asarray(observed, dtype=np.int8)
    starts = window_starts(len(true_labels), n, m_slots, count, rng)
    x = observed[starts[:, None] + np.arange(n)]
    truth = window_target(true_labels[starts[:, None] + n + np.arange(m_slots)])
    return x, truth


# ------------------------------------------------------------------ training

@dataclass
class LmOptions:
    mu_init: float = 1e-3
    mu_up: float = 10.0
    mu_down: float = 0.1
    mu_max: float = 1e10
    max_epochs: int = 200
    loss_goal: float = 1e-4
    val_fraction: float = 0.1
    patience: int = 10
    split_seed: int = 0


@dataclass
class TrainResult:
    net: Mlp
    status: str
    best_epoch: int
    trace: list = field(default_factory=list)  # (epoch, train_mse, val_mse, mu)

    @property
    def initial_mse(self) -> float:
        return self.trace[0][1]

    @property
    def final_mse(self) -> float:
        return self.trace[self.best_epoch][1]


def _mse(net: Mlp, x, t) -> float:
    if len(t) == 0:
        return float("nan")
    e = t - forward_batch(net, x)
    return float(e @ e / len(t))


def _lm_step(j: np.ndarray, e: np.ndarray, gram: np.ndarray, primal: bool, mu: float) -> np.ndarray:
    # (J'J + mu I)^-1 J'e, or the identical J'(JJ' + mu I)^-1 e when samples < params
    a = gram + mu * np.eye(gram.shape[0])
    c = cho_factor(a, lower=True, check_finite=True)
    if primal:
        return cho_solve(c, j.T @ e)
    return j.T @ cho_solve(c, e)


def train_lm(net: Mlp, data: TrainingSet, opts: LmOptions = LmOptions()) -> TrainResult:
    """Levenberg-Marquardt training on mean squared error.

    A step is accepted only if it lowers the training MSE; mu shrinks after
    an accepted step and grows after a rejected one. Training stops on the
    epoch budget, the loss goal, ``patience`` epochs without validation
    improvement, or mu exceeding ``mu_max``. The returned network is the one
    with the best validation loss (training loss if there is no validation
    split).
    """
    x_all = np.asarray(data.inputs, dtype=np.float64)
    t_all = np.asarray(data.targets, dtype=np.float64)
    if len(t_all) == 0:
        raise ValueError("empty training set")
    order = np.random.default_rng(opts.split_seed).permutation(len(t_all))
    n_val = int(round(opts.val_fraction * len(t_all))) if len(t_all) > 1 else 0
    tr_idx, va_idx = order[: len(t_all) - n_val], order[len(t_all) - n_val:]
    x, t = x_all[tr_idx], t_all[tr_idx]
    xv, tv = x_all[va_idx], t_all[va_idx]

    cur = net.copy()
    loss = _mse(cur, x, t)
    vloss = _mse(cur, xv, tv) if n_val else loss
    mu = opts.mu_init
    trace = [(0, loss, vloss, mu)]
    best, best_v, best_epoch, fails = cur, vloss, 0, 0
    if opts.max_epochs <= 0:
        return TrainResult(net=net.copy(), status="zero_epochs", best_epoch=0, trace=trace)

    status = "max_epochs"
    theta = cur.params()
    for epoch in range(1, opts.max_epochs + 1):
        if loss <= opts.loss_goal:
            status = "loss_goal"
            break
        y, j = jacobian(cur, x)
        e = t - y
        primal = j.shape[1] <= j.shape[0]
        gram = j.T @ j if primal else j @ j.T
        accepted = False
        while mu <= opts.mu_max:
            try:
                step = _lm_step(j, e, gram, primal, mu)
            except LinAlgError:
                mu *= opts.mu_up
                continue
            trial = cur.with_params(theta + step)
            new_loss = _mse(trial, x, t)
            if new_loss < loss:
                accepted = True
                cur, theta, loss = trial, theta + step, new_loss
                mu = max(mu * opts.mu_down, 1e-20)
                break
            mu *= opts.mu_up
        if not accepted:
            status = "mu_ceiling"
            break
        vloss = _mse(cur, xv, tv) if n_val else loss
        trace.append((epoch, loss, vloss, mu))
        if vloss < best_v or (not n_val and vloss <= best_v):
            best, best_v, best_epoch, fails = cur, vloss, epoch, 0
        else:
            fails += 1
            if n_val and fails >= opts.patience:
                status = "validation_stop"
                break
    else:
        if loss <= opts.loss_goal:
            status = "loss_goal"
    if not n_val:
        best, best_epoch = cur, trace[-1][0]
    out = best.copy()
    out.seed = net.seed
    return TrainResult(net=out, status=status, best_epoch=best_epoch, trace=trace)


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class PredictionStats:
    n_tt: int
    n_0: int
    n_01: int
    n_e: int

    def __post_init__(self):
        if not (0 <= self.n_01 <= self.n_0 <= self.n_tt and 0 <= self.n_e <= self.n_tt):
            raise ValueError(f"inconsistent counts {self}")
        if self.n_e - self.n_01 > self.n_tt - self.n_0:
            raise ValueError(f"more missed busy windows than busy windows: {self}")

    @property
    def p_pf(self) -> Optional[float]:
        """Pr[predict busy | window idle]; None when there is no idle window."""
        return self.n_01 / self.n_0 if self.n_0 else None

    @property
    def p_pd(self) -> Optional[float]:
        """Pr[predict busy | window busy]; None when there is no busy window."""
        busy = self.n_tt - self.n_0
        return 1.0 - (self.n_e - self.n_01) / busy if busy else None

    @property
    def p_miss(self) -> Optional[float]:
        return None if self.p_pd is None else 1.0 - self.p_pd

    @property
    def p_e(self) -> Optional[float]:
        return self.n_e / self.n_tt if self.n_tt else None

    def as_dict(self) -> dict:
        return {"n_tt": self.n_tt, "n_0": self.n_0, "n_01": self.n_01, "n_e": self.n_e,
                "p_pf": self.p_pf, "p_pd": self.p_pd, "p_e": self.p_e}


def prediction_stats(predicted, truth) -> PredictionStats:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    idle = truth == -1
    return PredictionStats(n_tt=int(truth.size), n_0=int(idle.sum()),
                           n_01=int((idle & (predicted == 1)).sum()),
                           n_e=int((predicted != truth).sum()))


def evaluate(net: Mlp, inputs: np.ndarray, truth: np.ndarray) -> PredictionStats:
    return prediction_stats(to_label(forward_batch(net, inputs)), truth)


# ------------------------------------------------------------- serialization

def save_mlp(net: Mlp, path) -> None:
    """Versioned text format; floats written with repr so loading is bit-exact."""
    lines = [_MAGIC, f"n_inputs {net.n_inputs}", "widths " + " ".join(map(str, net.widths)),
             f"seed {net.seed}"]
    for k in sorted(net.meta):
        lines.append(f"config {k}={net.meta[k]}")
    for k in _LAYERS:
        arr = getattr(net, k)
        rows = arr if arr.ndim == 2 else arr[None, :]
        lines.append(f"{k} " + " ".join(map(str, arr.shape)))
        lines += [" ".join(repr(float(v)) for v in row) for row in rows]
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def load_mlp(path) -> Mlp:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not an fdcr network file")
    it = iter(lines[1:])
    meta, arrays, seed = {}, {}, None
    for line in it:
        key, _, rest = line.partition(" ")
        if key == "seed":
            seed = None if rest == "None" else int(rest)
        elif key == "config":
            k, _, v = rest.partition("=")
            meta[k] = v
        elif key in _LAYERS:
            shape = tuple(int(s) for s in rest.split())
            n_rows = shape[0] if len(shape) == 2 else 1
            rows = [[float(v) for v in next(it).split()] for _ in range(n_rows)]
            arrays[key] = np.array(rows, dtype=np.float64).reshape(shape)
        elif key == "end":
            break
    return Mlp(**arrays, seed=seed, meta=meta)
