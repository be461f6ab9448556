import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcocdr.config import (
    BASE,
    SCENARIOS,
    build_config,
    default_config,
    load_config,
    parse_config,
    serialize_config,
)
from pcocdr.errors import ConfigError

MINIMAL_PSF = """
scenario = "psf"

[source]
kind = "gaussian"
center_nm = 930.0
fwhm_nm = 70.0

[detector]
kind = "IdealFlat"
"""


def test_minimal_psf_gets_all_defaults():
    cfg = parse_config(MINIMAL_PSF)
    assert cfg.scenario == "psf"
    assert cfg.rng_seed == 0
    assert set(cfg.sections) == set(BASE)
    for sec, values in BASE.items():
        assert set(cfg[sec]) == set(values), sec
    assert cfg["source"]["fwhm_nm"] == 70.0
    assert cfg == default_config("psf")


def test_parse_is_deterministic():
    assert parse_config(MINIMAL_PSF) == parse_config(MINIMAL_PSF)


@pytest.mark.parametrize("value", ["-1e-6", "0.0"])
def test_nonpositive_counting_time_names_field(value):
    text = f'scenario = "silica_scan"\n[scan]\ncounting_time_s = {value}\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "scan.counting_time_s"
    assert "counting_time_s" in str(info.value)


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_serialize_roundtrip(scenario):
    cfg = default_config(scenario).with_overrides(rng_seed=12345)
    assert parse_config(serialize_config(cfg)) == cfg


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**63 - 1),
    fwhm=st.floats(1.0, 200.0),
    margin=st.floats(1.0, 4.0),
    n_seeds=st.integers(1, 500),
)
def test_roundtrip_property(seed, fwhm, margin, n_seeds):
    cfg = build_config({
        "scenario": "snr_run",
        "rng_seed": seed,
        "source": {"fwhm_nm": fwhm},
        "filter": {"margin": margin},
        "monte_carlo": {"n_seeds": n_seeds},
    })
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize("text, field", [
    ('scenario = "psf"\n[sorce]\nkind = "gaussian"\n', "sorce"),
    ('scenario = "psf"\n[source]\ncentre_nm = 930.0\n', "source.centre_nm"),
    ('scenario = "psf"\nseed = 3\n', "seed"),
])
def test_unknown_keys_rejected(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_unknown_scenario():
    with pytest.raises(ConfigError) as info:
        parse_config('scenario = "oct_3d"\n')
    assert info.value.field == "scenario"


def test_missing_scenario():
    with pytest.raises(ConfigError):
        parse_config("[scan]\neta = 0.5\n")


def test_syntax_error_reports_line():
    text = 'scenario = "psf"\n\n[source]\ncenter_nm = = 930\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 4


@pytest.mark.parametrize("text, field", [
    ('scenario = "psf"\n[source]\ncenter_nm = "930"\n', "source.center_nm"),
    ('scenario = "psf"\n[output]\nwrite_scan = 1\n', "output.write_scan"),
    ('scenario = "psf"\n[scan]\neta = 1.5\n', "scan.eta"),
    ('scenario = "psf"\n[scan]\nz_start_um = 10.0\nz_end_um = -10.0\n', "scan.z_end_um"),
    ('scenario = "psf"\n[scan]\nmode = "burst"\n', "scan.mode"),
    ('scenario = "psf"\n[detector]\nkind = "SPAD"\nparams = {bogus = 1.0}\n',
     "detector.params.bogus"),
    ('scenario = "psf"\n[sample]\ndepths_um = [0.0, 1.0]\n', "sample.reflectances"),
])
def test_type_and_range_errors_name_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_integer_accepted_for_float():
    cfg = parse_config('scenario = "psf"\n[source]\ncenter_nm = 1000\n')
    assert cfg["source"]["center_nm"] == 1000.0
    assert isinstance(cfg["source"]["center_nm"], float)


def test_load_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(MINIMAL_PSF, encoding="utf-8")
    assert load_config(p) == parse_config(MINIMAL_PSF)
    p.write_bytes(b"scenario = \"psf\"\n\xff\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_overrides_are_validated():
    cfg = default_config("fano_run")
    assert cfg.with_overrides(monte_carlo={"n_samples": 25})["monte_carlo"]["n_samples"] == 25
    with pytest.raises(ConfigError):
        cfg.with_overrides(monte_carlo={"n_samples": 1})
