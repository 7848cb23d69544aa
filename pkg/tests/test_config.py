import pytest
from hypothesis import given, strategies as st

from fdcr.config import ConfigError, Settings, apply_override, load, parse_pair, parse_range, parse_text
from fdcr.sensing import db_to_linear


def test_defaults_build_experiment():
    cfg = Settings().experiment()
    assert cfg.m == 10 and cfg.n == 75 and cfg.n_tr == 1000 and cfg.n_tt == 30000
    assert cfg.radio.snr_ss == pytest.approx(10.0) and cfg.radio.snr_sp == pytest.approx(db_to_linear(9))
    assert cfg.probs().p_f == pytest.approx(0.01)
    assert cfg.inject is None and cfg.scheme == "nn-ams"


def test_echo_round_trip():
    st_ = Settings()
    apply_override(st_, "radio.p_d_si=1.0")
    apply_override(st_, "frame.m=7")
    text = st_.echo()
    again = parse_text(text)
    assert again.values == st_.values
    assert again.echo() == text


@given(st.sampled_from(["frame.m", "simulation.seed", "traffic.lambda0", "radio.chi", "predictor.n"]),
       st.integers(1, 10**6))
def test_echo_idempotent_with_overrides(key, value):
    st_ = Settings()
    apply_override(st_, f"{key}={value}")
    assert parse_text(st_.echo()).echo() == st_.echo()


def test_load_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[traffic]\nlambda0 = 0.3  # mean OFF\n\n[radio]\nsnr_ss = 10\n")
    st_ = load(p)
    cfg = st_.experiment()
    assert cfg.traffic.lambda0 == 0.3
    assert cfg.radio.snr_ss == 10.0


@pytest.mark.parametrize("text", ["[nope]\na = 1\n", "[traffic]\nbogus = 1\n", "not an ini", "[traffic]\nlambda0 = x\n"])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        parse_text(text).experiment()


@pytest.mark.parametrize("item", ["traffic.lambda0=-1", "simulation.scheme=foo", "frame.m=1",
                                  "traffic.distribution=pareto", "radio.chi=3", "predictor.perfect_sensing=maybe"])
def test_invalid_values(item):
    st_ = Settings()
    apply_override(st_, item)
    with pytest.raises(ConfigError):
        st_.experiment()
        st_.flag("predictor", "perfect_sensing")


def test_missing_file():
    with pytest.raises(ConfigError):
        load("/nonexistent/cfg.ini")


def test_parse_helpers():
    assert parse_pair("0.1,0.8") == (0.1, 0.8)
    assert parse_range("2:5") == [2, 3, 4, 5]
    assert parse_range("2:10:4") == [2, 6, 10]
    assert parse_range("5,10,20") == [5, 10, 20]
    for bad in ("1:3", "", "a:b"):
        with pytest.raises(ConfigError):
            parse_range(bad)
    for bad in ("0.1", "2,0", "a,b"):
        with pytest.raises(ConfigError):
            parse_pair(bad)
    with pytest.raises(ConfigError):
        apply_override(Settings(), "nodot=1")


def test_explicit_threshold_overrides_target():
    st_ = Settings()
    apply_override(st_, "radio.eps_over_sigma2=1.016545")
    apply_override(st_, "radio.chi=0")
    cfg = st_.experiment()
    assert cfg.radio.eps_over_sigma2 == 1.016545
    assert cfg.radio.threshold_si == 1.016545
