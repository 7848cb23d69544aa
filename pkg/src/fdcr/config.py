"""INI-style run configuration: ``[section]`` headers and ``key = value`` lines.

SNRs are given in dB with a ``_db`` suffix (``snr_ss_db``) or linear without
it. Probabilities ``p_f``, ``p_d``, ``p_f_si``, ``p_d_si`` in ``[radio]``
override the values computed from the energy-detector model.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from typing import Optional

from .analytic import FrameConfig
from .montecarlo import SCHEMES, ExperimentConfig
from .predictor import LmOptions
from .sensing import RadioParams, calibrated, db_to_linear
from .traffic import SAMPLERS, TrafficModel


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "traffic": {"lambda0": "0.1", "lambda1": "0.1", "distribution": "exponential"},
    "radio": {"chi": "0.1", "snr_ss_db": "10", "snr_sp_db": "9", "omega_s": "6e6", "t_s": "0.001",
              "target_pf": "0.01"},
    "frame": {"m": "10"},
    "predictor": {"n": "75", "n_tr": "1000", "n_tt": "30000", "train_time": "100", "perfect_sensing": "false",
                  "mu_init": "0.001", "mu_up": "10", "mu_down": "0.1", "mu_max": "1e10", "max_epochs": "200",
                  "loss_goal": "1e-4", "val_fraction": "0.1", "patience": "10"},
    "simulation": {"scheme": "nn-ams", "n_frames": "200000", "replications": "10", "seed": "1",
                   "inject_prediction": "", "workers": "1"},
    "analytic": {"m_range": "2:30", "literal_ts_collision": "false"},
}

OPTIONAL = {
    "radio": {"snr_ss", "snr_sp", "eps_over_sigma2", "eps_over_sigma2_si", "p_f", "p_d", "p_f_si", "p_d_si"},
}

SECTIONS = tuple(DEFAULTS)


@dataclass
class Settings:
    values: dict = field(default_factory=lambda: {s: dict(v) for s, v in DEFAULTS.items()})

    def get(self, section: str, key: str) -> Optional[str]:
        return self.values.get(section, {}).get(key)

    def set(self, section: str, key: str, value) -> None:
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        if key not in DEFAULTS[section] and key not in OPTIONAL.get(section, ()):
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        self.values[section][key] = str(value).strip()

    def echo(self) -> str:
        """Canonical text form; parsing it gives back the same settings."""
        out = []
        for s in SECTIONS:
            out.append(f"[{s}]")
            for k in sorted(self.values[s]):
                out.append(f"{k} = {self.values[s][k]}")
            out.append("")
        return "\n".join(out)

    # typed accessors
    def _num(self, section, key, kind=float):
        raw = self.get(section, key)
        try:
            return kind(float(raw)) if kind is int else kind(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None

    def flag(self, section, key) -> bool:
        raw = (self.get(section, key) or "").lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off", ""):
            return False
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")

    def traffic(self) -> TrafficModel:
        dist = self.get("traffic", "distribution")
        if dist not in SAMPLERS:
            raise ConfigError(f"unknown distribution {dist!r}; expected one of {sorted(SAMPLERS)}")
        try:
            return TrafficModel(self._num("traffic", "lambda0"), self._num("traffic", "lambda1"), SAMPLERS[dist])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def _snr(self, name) -> float:
        if self.get("radio", name) is not None:
            return self._num("radio", name)
        return db_to_linear(self._num("radio", f"{name}_db"))

    def radio(self) -> RadioParams:
        try:
            base = RadioParams(chi=self._num("radio", "chi"), snr_ss=self._snr("snr_ss"), snr_sp=self._snr("snr_sp"),
                               omega_s=self._num("radio", "omega_s"), t_s=self._num("radio", "t_s"),
                               eps_over_sigma2=1.0)
            p = calibrated(base, self._num("radio", "target_pf"))
            if self.get("radio", "eps_over_sigma2") is not None:
                eps = self._num("radio", "eps_over_sigma2")
                eps_si = self._num("radio", "eps_over_sigma2_si") if self.get("radio", "eps_over_sigma2_si") else eps
                p = RadioParams(p.chi, p.snr_ss, p.snr_sp, p.omega_s, p.t_s, eps, eps_si)
            return p
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def sensing_override(self) -> dict:
        return {k: self._num("radio", k) for k in ("p_f", "p_d", "p_f_si", "p_d_si") if self.get("radio", k)}

    def inject(self) -> Optional[tuple]:
        raw = self.get("simulation", "inject_prediction")
        if not raw:
            return None
        return parse_pair(raw)

    def m_range(self) -> list:
        return parse_range(self.get("analytic", "m_range"))

    def lm(self) -> LmOptions:
        g = lambda k, kind=float: self._num("predictor", k, kind)
        return LmOptions(mu_init=g("mu_init"), mu_up=g("mu_up"), mu_down=g("mu_down"), mu_max=g("mu_max"),
                         max_epochs=g("max_epochs", int), loss_goal=g("loss_goal"),
                         val_fraction=g("val_fraction"), patience=g("patience", int))

    def experiment(self) -> ExperimentConfig:
        scheme = self.get("simulation", "scheme")
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        try:
            cfg = ExperimentConfig(
                traffic=self.traffic(), radio=self.radio(), m=self._num("frame", "m", int), scheme=scheme,
                n_frames=self._num("simulation", "n_frames", int),
                replications=self._num("simulation", "replications", int),
                seed=self._num("simulation", "seed", int), inject=self.inject(),
                n=self._num("predictor", "n", int), n_tr=self._num("predictor", "n_tr", int),
                n_tt=self._num("predictor", "n_tt", int), train_time=self._num("predictor", "train_time"),
                perfect_sensing=self.flag("predictor", "perfect_sensing"), lm=self.lm(),
                sensing_override=self.sensing_override(), workers=self._num("simulation", "workers", int))
            cfg.probs()
            FrameConfig(cfg.m, cfg.radio.t_s)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cfg


def parse_pair(raw: str) -> tuple:
    try:
        a, b = (float(v) for v in raw.split(","))
    except ValueError:
        raise ConfigError(f"expected 'p_pf,p_pd', got {raw!r}") from None
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise ConfigError(f"prediction probabilities must lie in [0, 1], got {raw!r}")
    return a, b


def parse_range(raw: str) -> list:
    """'2:30' (inclusive), '2:30:2', or a comma list '5,10,20'."""
    try:
        if ":" in raw:
            parts = [int(p) for p in raw.split(":")]
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            vals = list(range(lo, hi + 1, step))
        else:
            vals = [int(p) for p in raw.split(",") if p.strip()]
    except (ValueError, IndexError):
        raise ConfigError(f"bad M range {raw!r}") from None
    if not vals or min(vals) < 2:
        raise ConfigError(f"M range {raw!r} must be non-empty with M >= 2")
    return vals


def parse_text(text: str, base: Optional[Settings] = None) -> Settings:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    st = base or Settings()
    for section in cp.sections():
        for key, value in cp.items(section):
            st.set(section, key, value)
    return st


def load(path=None) -> Settings:
    if path is None:
        return Settings()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_text(text)


def apply_override(st: Settings, item: str) -> None:
    """``section.key=value``."""
    lhs, sep, value = item.partition("=")
    section, dot, key = lhs.strip().partition(".")
    if not sep or not dot:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    st.set(section, key, value)


def settings_from(text: str) -> Settings:
    return parse_text(text, Settings())


def echo_lines(st: Settings) -> list:
    return [line for line in io.StringIO(st.echo()).read().splitlines() if line]
