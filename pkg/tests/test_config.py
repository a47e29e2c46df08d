import math

import pytest

from friendly_wigner.config import ConfigParseError, load_config, loads_config, parse_amplitude
from friendly_wigner.experiment import ConfigError, ProtocolConfig, TimePoint


def test_sqrt_literal():
    assert parse_amplitude("sqrt:1/3") == pytest.approx(0.5773502692, abs=1e-9)
    assert parse_amplitude("-sqrt:1/2") == pytest.approx(-math.sqrt(0.5))
    assert parse_amplitude("3/5") == pytest.approx(0.6)
    assert parse_amplitude(0.25) == 0.25


@pytest.mark.parametrize("bad", ["sqrt:-1/3", "sqrt:x", True, [1]])
def test_bad_amplitudes(bad):
    with pytest.raises(ConfigError):
        parse_amplitude(bad, "initial.heads")


def test_missing_path_and_default_flag(tmp_path):
    assert load_config(None) == ProtocolConfig()
    cfg = load_config(tmp_path / "nope.toml", default_if_missing=True)
    assert cfg.a_heads == pytest.approx(math.sqrt(1 / 3))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_full_file_round_trip(tmp_path):
    text = """
[initial]
heads = "sqrt:1/3"
tails = "sqrt:2/3"

[spin_prep.tails]
up = "sqrt:1/2"
down = "sqrt:1/2"

[bases.wbar.okbar]
hbar = "sqrt:1/2"
tbar = "-sqrt:1/2"

[bases.wbar.failsbar]
hbar = "sqrt:1/2"
tbar = "sqrt:1/2"

[times]
f_measures_s = "n:10"
"""
    path = tmp_path / "proto.toml"
    path.write_text(text)
    cfg = load_config(path)
    default = ProtocolConfig()
    assert cfg.a_heads == pytest.approx(default.a_heads)
    assert cfg.wbar_basis["okbar"]["tbar"] == pytest.approx(-math.sqrt(0.5))
    assert cfg.time_labels["f_measures_s"] == TimePoint.T2


def test_partial_basis_rejected():
    # a basis table replaces the default wholesale, so both vectors are required
    with pytest.raises(ConfigError, match="wbar_basis"):
        loads_config('[bases.wbar.okbar]\nhbar = "sqrt:1/2"\ntbar = "-sqrt:1/2"\n')


def test_normalization_error_names_the_constraint():
    with pytest.raises(ConfigError, match="normalization") as err:
        loads_config('[initial]\nheads = "sqrt:1/2"\ntails = "sqrt:2/5"\n')
    assert "a_heads" in str(err.value)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        loads_config("[extra]\nx = 1\n")
    with pytest.raises(ConfigError, match="bases.q"):
        loads_config("[bases.q.a]\nx = 1\n")


def test_parse_error_has_line_and_column():
    with pytest.raises(ConfigParseError) as err:
        loads_config('[initial]\nheads = "sqrt:1/3\n', "bad.toml")
    assert err.value.line == 2
    assert err.value.column is not None
    assert str(err.value).startswith("bad.toml:2:")


def test_time_order_enforced():
    with pytest.raises(ConfigError, match="time_labels"):
        loads_config('[times]\nf_measures_s = "t0"\n')
