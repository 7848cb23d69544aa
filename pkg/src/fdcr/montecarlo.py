"""Slot-level Monte Carlo experiments.

Random streams are keyed ``(seed, purpose, M, replication)`` and never by
scheme, so TR-only, TS-only and the adaptive scheme see the same channel and
the same sensing draws at a given M.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .analytic import FrameConfig, Rates, rates as rates_of
from .predictor import (LmOptions, Mlp, PredictionStats, TrainResult, evaluate, init_mlp,
                        make_test_data, make_training_data, prediction_stats, train_lm)
from .rng import stream
from .selection import FrameLog, run_frames, run_nn_ams_u, window_truth
from .sensing import RadioParams, SensingProbs, draw_sensing, sensing_probs
from .traffic import TrafficModel, sample_timeline

SCHEMES = ("nn-ams", "tr", "ts")

# stream purposes
S_TIMELINE, S_SENSE, S_PRED = 1, 2, 3
S_TRAIN_TL, S_TRAIN_SENSE, S_TRAIN_WIN, S_INIT = 4, 5, 6, 7
S_TEST_TL, S_TEST_SENSE, S_TEST_WIN = 8, 9, 10

Z95 = 1.959963984540054


@dataclass
class ExperimentConfig:
    traffic: TrafficModel
    radio: RadioParams
    m: int = 10
    scheme: str = "nn-ams"
    n_frames: int = 200_000
    replications: int = 10
    seed: int = 1
    inject: Optional[tuple] = None          # (p_pf, p_pd) bypassing the network
    n: int = 75
    n_tr: int = 1000
    n_tt: int = 30_000
    train_time: float = 100.0               # seconds of channel observed for training
    perfect_sensing: bool = False           # noiseless labels for training/testing inputs
    lm: LmOptions = field(default_factory=LmOptions)
    sensing_override: dict = field(default_factory=dict)  # any of p_f, p_d, p_f_si, p_d_si
    workers: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.n_frames < 1 or self.replications < 1:
            raise ValueError("n_frames and replications must be at least 1")
        if self.inject is not None:
            ppf, ppd = self.inject
            if not (0 <= ppf <= 1 and 0 <= ppd <= 1):
                raise ValueError("injected prediction probabilities must lie in [0, 1]")
        FrameConfig(self.m, self.radio.t_s)

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.m, self.radio.t_s)

    def probs(self) -> SensingProbs:
        p = sensing_probs(self.radio)
        return replace(p, **self.sensing_override) if self.sensing_override else p

    def rates(self) -> Rates:
        return rates_of(self.radio)

    def echo(self) -> dict:
        """Flat, JSON-serialisable description of every effective setting."""
        d = {
            "traffic.lambda0": self.traffic.lambda0, "traffic.lambda1": self.traffic.lambda1,
            "traffic.distribution": self.traffic.distribution,
            "m": self.m, "scheme": self.scheme, "n_frames": self.n_frames,
            "replications": self.replications, "seed": self.seed,
            "inject": None if self.inject is None else [float(v) for v in self.inject],
            "n": self.n, "n_tr": self.n_tr, "n_tt": self.n_tt, "train_time": self.train_time,
            "perfect_sensing": self.perfect_sensing,
        }
        d.update({f"radio.{k}": v for k, v in asdict(self.radio).items()})
        d.update({f"lm.{k}": v for k, v in asdict(self.lm).items()})
        d.update({f"sensing.{k}": v for k, v in asdict(self.probs()).items()})
        return d


def config_hash(echo: dict) -> str:
    blob = json.dumps(echo, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(blob).hexdigest()


# ---------------------------------------------------------------- predictor

@dataclass
class PredictorFit:
    net: Mlp
    training: TrainResult
    test: PredictionStats


def _observed(labels, cfg: ExperimentConfig, key) -> np.ndarray:
    if cfg.perfect_sensing:
        return labels
    return draw_sensing(labels, cfg.probs(), with_si=False, rng=stream(cfg.seed, *key))


def train_predictor(cfg: ExperimentConfig, m: Optional[int] = None) -> PredictorFit:
    """Train on a dedicated channel realisation and test on a fresh one."""
    m = cfg.m if m is None else m
    ts = cfg.radio.t_s
    # long enough to hold many windows
    total = max(cfg.train_time, 20 * (cfg.n + m) * ts)
    tl = sample_timeline(cfg.traffic, total, ts, cfg.seed, (S_TRAIN_TL, m))
    data = make_training_data(_observed(tl.slots, cfg, (S_TRAIN_SENSE, m)), cfg.n, m, cfg.n_tr,
                              stream(cfg.seed, S_TRAIN_WIN, m))
    net0 = init_mlp(cfg.n, stream(cfg.seed, S_INIT, m), seed=cfg.seed)
    fit = train_lm(net0, data, cfg.lm)
    net = fit.net
    net.meta = {k: json.dumps(v) for k, v in sorted(replace(cfg, m=m).echo().items())}
    net.meta["training.status"] = fit.status

    test_tl = sample_timeline(cfg.traffic, total, ts, cfg.seed, (S_TEST_TL, m))
    x, truth = make_test_data(test_tl.slots, _observed(test_tl.slots, cfg, (S_TEST_SENSE, m)), cfg.n, m,
                              cfg.n_tt, stream(cfg.seed, S_TEST_WIN, m))
    return PredictorFit(net=net, training=fit, test=evaluate(net, x, truth))


# --------------------------------------------------------------- experiment

@dataclass
class ExperimentResult:
    config: dict
    per_rep: list
    pooled: dict
    ci95: dict
    predictor: Optional[dict] = None   # test-set stats of the trained network
    failed: Optional[str] = None

    def to_json(self) -> dict:
        return {"config": self.config, "config_hash": config_hash(self.config), "version": __version__,
                "seed": self.config["seed"], "pooled": self.pooled, "ci95": self.ci95,
                "per_replication": self.per_rep, "predictor": self.predictor, "failed": self.failed}


METRICS = ("throughput", "throughput_nc", "collision", "frac_tr", "frac_ts", "frac_fallback")


def _injected_predictions(truth, ppf, ppd, rng) -> np.ndarray:
    u = rng.random(len(truth))
    return np.where(u < np.where(truth == -1, ppf, ppd), 1, -1).astype(np.int8)


def run_replication(cfg: ExperimentConfig, rep: int, net: Optional[Mlp] = None) -> FrameLog:
    m, n = cfg.m, cfg.n
    ts = cfg.radio.t_s
    n_slots = n + cfg.n_frames * m
    tl = sample_timeline(cfg.traffic, n_slots * ts, ts, cfg.seed, (S_TIMELINE, m, rep))
    labels = tl.slots
    if len(labels) < n_slots:  # guard against rounding in the slot count
        labels = np.concatenate([labels, np.full(n_slots - len(labels), labels[-1], np.int8)])
    u = stream(cfg.seed, S_SENSE, m, rep).random(n_slots)
    probs, rt = cfg.probs(), cfg.rates()
    if cfg.scheme == "nn-ams" and cfg.inject is None:
        return run_nn_ams_u(net, labels, u, m, cfg.n_frames, probs, rt, start=n)
    if cfg.scheme == "tr":
        preds = np.full(cfg.n_frames, -1, np.int8)
    elif cfg.scheme == "ts":
        preds = np.full(cfg.n_frames, 1, np.int8)
    else:
        truth = window_truth(labels, n, m, cfg.n_frames)
        preds = _injected_predictions(truth, *cfg.inject, stream(cfg.seed, S_PRED, m, rep))
    return run_frames(labels, u, preds, n, m, probs, rt)


def _rep_metrics(log: FrameLog) -> dict:
    d = log.summary()
    st = prediction_stats(log.prediction, log.truth)
    d.update(p_pf=st.p_pf, p_pd=st.p_pd, p_e=st.p_e)
    return d


def run_experiment(cfg: ExperimentConfig, net: Optional[Mlp] = None,
                   fit: Optional[PredictorFit] = None) -> ExperimentResult:
    """Run ``cfg.replications`` independent replications and pool them."""
    echo = cfg.echo()
    predictor = None
    if cfg.scheme == "nn-ams" and cfg.inject is None and net is None:
        try:
            fit = fit or train_predictor(cfg)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            return ExperimentResult(config=echo, per_rep=[], pooled={}, ci95={}, failed=f"training: {exc}")
        net = fit.net
    if fit is not None:
        predictor = dict(fit.test.as_dict(), status=fit.training.status, epochs=len(fit.training.trace) - 1)

    reps = range(cfg.replications)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            logs = list(ex.map(lambda r: run_replication(cfg, r, net), reps))
    else:
        logs = [run_replication(cfg, r, net) for r in reps]
    per_rep = [dict(_rep_metrics(lg), replication=r) for r, lg in enumerate(logs)]
    pooled, ci = pool(per_rep)
    return ExperimentResult(config=echo, per_rep=per_rep, pooled=pooled, ci95=ci, predictor=predictor)


def pool(per_rep: list) -> tuple[dict, dict]:
    pooled, ci = {}, {}
    for k in METRICS + ("p_pf", "p_pd", "p_e"):
        vals = np.array([r[k] for r in per_rep if r.get(k) is not None], dtype=float)
        if len(vals) == 0:
            pooled[k], ci[k] = None, None
            continue
        pooled[k] = float(vals.mean())
        ci[k] = float(Z95 * vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else None
    pooled["tx_slots"] = int(sum(r["tx_slots"] for r in per_rep))
    pooled["n_frames"] = int(sum(r["n_frames"] for r in per_rep))
    return pooled, ci


def sweep_m(cfg: ExperimentConfig, m_values, schemes=SCHEMES) -> dict:
    """Experiments for every M and scheme; result[m][scheme]."""
    if len(list(m_values)) == 0:
        raise ValueError("m_values is empty")
    out = {}
    for m in m_values:
        out[m] = {}
        for scheme in schemes:
            out[m][scheme] = run_experiment(replace(cfg, m=int(m), scheme=scheme))
    return out


RESULT_COLUMNS = ("m", "scheme", "throughput", "throughput_ci", "throughput_nc", "throughput_nc_ci",
                  "collision", "collision_ci", "frac_tr", "frac_ts", "frac_fallback", "p_pf", "p_pd", "p_e",
                  "tx_slots", "n_frames", "replications")


def result_row(res: ExperimentResult) -> dict:
    p, c = res.pooled, res.ci95
    return {
        "m": res.config["m"], "scheme": res.config["scheme"],
        "throughput": p.get("throughput"), "throughput_ci": c.get("throughput"),
        "throughput_nc": p.get("throughput_nc"), "throughput_nc_ci": c.get("throughput_nc"),
        "collision": p.get("collision"), "collision_ci": c.get("collision"),
        "frac_tr": p.get("frac_tr"), "frac_ts": p.get("frac_ts"), "frac_fallback": p.get("frac_fallback"),
        "p_pf": p.get("p_pf"), "p_pd": p.get("p_pd"), "p_e": p.get("p_e"),
        "tx_slots": p.get("tx_slots"), "n_frames": p.get("n_frames"), "replications": len(res.per_rep),
    }
