"""Command-line front end: ``fdcr {train,eval,analytic,simulate,sweep,compare}``.

Every output file carries the effective configuration, the master seed and a
hash of the configuration; nothing time-dependent is written, so reruns with
the same inputs are byte-identical.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import SWEEP_COLUMNS, sweep as analytic_sweep
from .config import ConfigError, Settings, apply_override, load, parse_pair, parse_range
from .montecarlo import (RESULT_COLUMNS, S_TEST_SENSE, S_TEST_TL, S_TEST_WIN, SCHEMES, ExperimentConfig,
                         config_hash, result_row, run_experiment, run_replication, train_predictor)
from .predictor import evaluate, load_mlp, make_test_data, save_mlp
from .rng import stream
from .sensing import draw_sensing
from .traffic import sample_timeline

SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


# ------------------------------------------------------------------ output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _header(kind: str, st: Settings, cfg: ExperimentConfig) -> list[str]:
    echo = cfg.echo()
    lines = [f"fdcr {kind} schema={SCHEMA} version={__version__}",
             f"seed = {cfg.seed}", f"config_hash = {config_hash(echo)}"]
    lines += ["config " + line for line in st.echo().splitlines() if line]
    return lines


def write_csv(path: Path, kind: str, st: Settings, cfg: ExperimentConfig, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in _header(kind, st, cfg):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def write_json(path: Path, kind: str, st: Settings, cfg: ExperimentConfig, payload: dict) -> None:
    echo = cfg.echo()
    doc = {"kind": kind, "schema": SCHEMA, "version": __version__, "seed": cfg.seed,
           "config_hash": config_hash(echo), "config": echo, "config_text": st.echo()}
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


# ---------------------------------------------------------------- commands

def cmd_train(args, st: Settings, cfg: ExperimentConfig, out: Path) -> int:
    fit = train_predictor(cfg)
    save_mlp(fit.net, out / "net.txt")
    rows = [{"epoch": e, "train_mse": tr, "val_mse": va, "mu": mu} for e, tr, va, mu in fit.training.trace]
    write_csv(out / "loss.csv", "loss", st, cfg, ("epoch", "train_mse", "val_mse", "mu"), rows)
    report = {"m": cfg.m, "status": fit.training.status, "best_epoch": fit.training.best_epoch,
              "initial_mse": fit.training.initial_mse, "final_mse": fit.training.final_mse,
              "test": fit.test.as_dict()}
    write_json(out / "train_report.json", "train", st, cfg, report)
    t = fit.test
    print(f"M={cfg.m} status={fit.training.status} P_e={_fmt(t.p_e)} P_pf={_fmt(t.p_pf)} P_pd={_fmt(t.p_pd)}")
    return 0


def cmd_eval(args, st: Settings, cfg: ExperimentConfig, out: Path) -> int:
    if not args.net:
        raise ConfigError("eval needs --net FILE")
    try:
        net = load_mlp(args.net)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load network: {exc}") from None
    if net.n_inputs != cfg.n:
        raise ConfigError(f"network expects N={net.n_inputs} inputs but the config has n={cfg.n}")
    m, ts = cfg.m, cfg.radio.t_s
    total = max(cfg.train_time, 20 * (cfg.n + m) * ts)
    tl = sample_timeline(cfg.traffic, total, ts, cfg.seed, (S_TEST_TL, m))
    obs = tl.slots if cfg.perfect_sensing else draw_sensing(tl.slots, cfg.probs(), False,
                                                               stream(cfg.seed, S_TEST_SENSE, m))
    x, truth = make_test_data(tl.slots, obs, cfg.n, m, cfg.n_tt, stream(cfg.seed, S_TEST_WIN, m))
    stats = evaluate(net, x, truth)
    write_json(out / "eval.json", "eval", st, cfg, {"m": m, "net": str(args.net), "test": stats.as_dict()})
    print(f"M={m} P_e={_fmt(stats.p_e)} P_pf={_fmt(stats.p_pf)} P_pd={_fmt(stats.p_pd)}")
    return 0


def _argmax(rows, key):
    best = max(rows, key=lambda r: r[key])
    return best["m"]


def analytic_rows(st: Settings, cfg: ExperimentConfig, m_values, train: bool) -> list[dict]:
    if cfg.traffic.distribution != "exponential":
        raise ConfigError(f"closed-form analysis assumes exponential ON/OFF durations; "
                          f"got {cfg.traffic.distribution!r}. Use 'simulate' or 'sweep' instead.")
    if cfg.inject is not None and not train:
        prediction = cfg.inject
    else:
        def prediction(m):
            t = train_predictor(replace(cfg, m=m)).test
            # an undefined rate means the class never occurred; fall back to the degenerate value
            return (t.p_pf if t.p_pf is not None else 0.0, t.p_pd if t.p_pd is not None else 1.0)
    literal = st.flag("analytic", "literal_ts_collision")
    return analytic_sweep(cfg.traffic, cfg.probs(), cfg.rates(), cfg.radio.t_s, m_values, prediction,
                          literal_ts_collision=literal)


def cmd_analytic(args, st: Settings, cfg: ExperimentConfig, out: Path) -> int:
    m_values = st.m_range()
    rows = analytic_rows(st, cfg, m_values, args.train_predictors)
    write_csv(out / "analytic.csv", "analytic", st, cfg, SWEEP_COLUMNS, rows)
    summary = {f"argmax_{k}": _argmax(rows, k) for k in ("nn_thr", "nn_thr_nc", "tr_thr", "tr_thr_nc",
                                                           "ts_thr", "ts_thr_nc")}
    summary["m_values"] = m_values
    summary["prediction"] = "trained" if (args.train_predictors or cfg.inject is None) else "injected"
    write_json(out / "analytic.json", "analytic", st, cfg, {"summary": summary, "rows": rows})
    print(f"argmax M (non-collision): NN-AMS={summary['argmax_nn_thr_nc']} TR={summary['argmax_tr_thr_nc']}")
    return 0


def _net_for(args, cfg: ExperimentConfig):
    if not getattr(args, "net", None) or cfg.scheme != "nn-ams" or cfg.inject is not None:
        return None
    try:
        net = load_mlp(args.net)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load network: {exc}") from None
    if net.n_inputs != cfg.n:
        raise ConfigError(f"network expects N={net.n_inputs} inputs but the config has n={cfg.n}")
    return net


def _report(res) -> str:
    p = res.pooled
    return (f"M={res.config['m']} scheme={res.config['scheme']} throughput={_fmt(p.get('throughput'))} "
            f"throughput_nc={_fmt(p.get('throughput_nc'))} collision={_fmt(p.get('collision'))}")


def cmd_simulate(args, st: Settings, cfg: ExperimentConfig, out: Path) -> int:
    net = _net_for(args, cfg)
    res = run_experiment(cfg, net=net)
    write_csv(out / "results.csv", "results", st, cfg, RESULT_COLUMNS, [result_row(res)] if not res.failed else [])
    write_json(out / "summary.json", "simulate", st, cfg, {"result": res.to_json()})
    if res.failed:
        print(f"error: {res.failed}", file=sys.stderr)
        return 2
    if args.frames:
        run_replication(cfg, 0, net if net is not None else _trained_net(cfg)).write_csv(out / "frames.csv")
    print(_report(res))
    return 0


def _trained_net(cfg):
    if cfg.scheme == "nn-ams" and cfg.inject is None:
        return train_predictor(cfg).net
    return None


def _schemes(args) -> tuple:
    if not args.schemes:
        return SCHEMES
    names = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    bad = [s for s in names if s not in SCHEMES]
    if bad or not names:
        raise ConfigError(f"unknown scheme(s) {bad}; expected a subset of {SCHEMES}")
    return names


def cmd_sweep(args, st: Settings, cfg: ExperimentConfig, out: Path) -> int:
    rows, results, failed = [], [], []
    for m in st.m_range():
        for scheme in _schemes(args):
            res = run_experiment(replace(cfg, m=m, scheme=scheme))
            if res.failed:
                failed.append({"m": m, "scheme": scheme, "error": res.failed})
                continue
            rows.append(result_row(res))
            results.append(res.to_json())
            print(_report(res))
    write_csv(out / "sweep.csv", "sweep", st, cfg, RESULT_COLUMNS, rows)
    write_json(out / "sweep.json", "sweep", st, cfg, {"results": results, "failed": failed})
    return 2 if failed else 0


COMPARE_COLUMNS = ("quantity", "nn_ams", "tr", "ts", "nn_over_tr")


def cmd_compare(args, st: Settings, cfg: ExperimentConfig, out: Path) -> int:
    """All three schemes on paired seeds at one M, next to the closed forms."""
    fit = None
    if cfg.inject is None:
        fit = train_predictor(cfg)
    res = {s: run_experiment(replace(cfg, scheme=s), fit=fit if s == "nn-ams" else None,
                             net=fit.net if (fit and s == "nn-ams") else None) for s in SCHEMES}
    for r in res.values():
        if r.failed:
            print(f"error: {r.failed}", file=sys.stderr)
            return 2
    nn = res["nn-ams"].pooled
    ppf, ppd = cfg.inject if cfg.inject is not None else (nn["p_pf"] or 0.0, nn["p_pd"] if nn["p_pd"] is not None else 1.0)
    an = analytic_sweep(cfg.traffic, cfg.probs(), cfg.rates(), cfg.radio.t_s, [cfg.m], (ppf, ppd),
                        literal_ts_collision=st.flag("analytic", "literal_ts_collision"))[0] \
        if cfg.traffic.distribution == "exponential" else None

    def ratio(a, b):
        return None if a is None or not b else a / b

    rows = []
    for q in ("throughput", "throughput_nc", "collision"):
        v = {s: res[s].pooled[q] for s in SCHEMES}
        rows.append({"quantity": f"sim_{q}", "nn_ams": v["nn-ams"], "tr": v["tr"], "ts": v["ts"],
                     "nn_over_tr": ratio(v["nn-ams"], v["tr"])})
    if an is not None:
        for q, key in (("throughput", "thr"), ("throughput_nc", "thr_nc"), ("collision", "col")):
            v = {s: an[f"{p}_{key}"] for s, p in (("nn-ams", "nn"), ("tr", "tr"), ("ts", "ts"))}
            rows.append({"quantity": f"analytic_{q}", "nn_ams": v["nn-ams"], "tr": v["tr"], "ts": v["ts"],
                         "nn_over_tr": ratio(v["nn-ams"], v["tr"])})
    write_csv(out / "compare.csv", "compare", st, cfg, COMPARE_COLUMNS, rows)
    write_json(out / "compare.json", "compare", st, cfg,
               {"rows": rows, "p_pf": ppf, "p_pd": ppd, "results": {s: r.to_json() for s, r in res.items()}})
    for r in rows:
        print(f"{r['quantity']:<24} nn-ams={_fmt(r['nn_ams'])} tr={_fmt(r['tr'])} ts={_fmt(r['ts'])}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "analytic": cmd_analytic, "simulate": cmd_simulate,
            "sweep": cmd_sweep, "compare": cmd_compare}


# ----------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--m", type=int, help="slots per frame")
    common.add_argument("--m-range", help="M values: '2:30', '2:30:2' or '5,10,20'")
    common.add_argument("--inject-prediction", metavar="PPF,PPD",
                        help="bypass the network with Bernoulli predictions of these probabilities")
    common.add_argument("--replications", type=int)
    common.add_argument("--n-frames", type=int)
    common.add_argument("--pf", type=float, help="override P_f")
    common.add_argument("--pd", type=float, help="override P_d")
    common.add_argument("--pf-si", type=float, help="override P_f under self-interference")
    common.add_argument("--pd-si", type=float, help="override P_d under self-interference")
    common.add_argument("--perfect-sensing", action="store_true", help="train and test on true slot states")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any configuration key (repeatable)")

    p = _Parser(prog="fdcr", description="Full-duplex cognitive radio mode selection simulator.")
    p.add_argument("--version", action="version", version=f"fdcr {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("train", parents=[common], help="train a predictor and report its test statistics")
    e = sub.add_parser("eval", parents=[common], help="evaluate a saved predictor on a fresh test set")
    e.add_argument("--net", help="network file written by 'train'")
    a = sub.add_parser("analytic", parents=[common], help="closed-form curves over M")
    a.add_argument("--train-predictors", action="store_true",
                   help="use trained-network statistics per M even if an injected pair is configured")
    s = sub.add_parser("simulate", parents=[common], help="one Monte Carlo experiment")
    s.add_argument("--net", help="use this network instead of training one")
    s.add_argument("--frames", action="store_true", help="also write per-frame records of replication 0")
    w = sub.add_parser("sweep", parents=[common], help="Monte Carlo experiments over M and schemes")
    w.add_argument("--schemes", help="comma list, default all")
    sub.add_parser("compare", parents=[common], help="all schemes at one M against the closed forms")
    return p


def settings_for(args) -> Settings:
    st = load(args.config)
    flags = {"seed": "simulation.seed", "m": "frame.m", "scheme": "simulation.scheme",
             "m_range": "analytic.m_range", "inject_prediction": "simulation.inject_prediction",
             "replications": "simulation.replications", "n_frames": "simulation.n_frames",
             "pf": "radio.p_f", "pd": "radio.p_d", "pf_si": "radio.p_f_si", "pd_si": "radio.p_d_si"}
    for attr, key in flags.items():
        v = getattr(args, attr)
        if v is not None:
            apply_override(st, f"{key}={v}")
    if args.perfect_sensing:
        apply_override(st, "predictor.perfect_sensing=true")
    for item in args.set:
        apply_override(st, item)
    # validate eagerly so malformed values surface as configuration errors
    if st.get("simulation", "inject_prediction"):
        parse_pair(st.get("simulation", "inject_prediction"))
    parse_range(st.get("analytic", "m_range"))
    return st


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        st = settings_for(args)
        cfg = st.experiment()
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from None
        (out / "config.ini").write_text(st.echo())
        return COMMANDS[args.command](args, st, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
