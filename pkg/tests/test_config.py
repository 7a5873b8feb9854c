import numpy as np
import pytest

from pslab.cohort import CoefficientSet
from pslab.config import default_config, format_config, load_config, parse_config
from pslab.errors import ConfigError


def test_default_file_is_complete():
    cfg = default_config()
    for i in range(8):
        assert f"beta{i}" in cfg and f"alpha{i}" in cfg
    assert cfg["gamma1"] == -0.4
    corr = cfg["corr"]
    assert corr.shape == (10, 10)
    np.testing.assert_array_equal(corr, corr.T)
    np.testing.assert_array_equal(np.diag(corr), 1.0)


def test_round_trip():
    c = CoefficientSet.default()
    corr = default_config()["corr"]
    back = parse_config(format_config(c, corr))
    assert CoefficientSet.from_mapping(back) == c
    np.testing.assert_array_equal(back["corr"], corr)


def test_partial_file_merges_with_defaults(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("gamma1 = 0\nalpha0 = -1.5\n")
    c = CoefficientSet.from_mapping(load_config(p), default_config())
    assert c.gamma1 == 0.0
    assert c.alpha[0] == -1.5
    assert c.beta == CoefficientSet.default().beta


@pytest.mark.parametrize(
    "text, line, field",
    [
        ("beta0 = 0\nbeta1 = abc\n", 2, "beta1"),
        ("beta0 = 0\ndelta = 1\n", 2, "delta"),
        ("beta0 = 0\nbeta0 = 1\n", 2, "beta0"),
        ("gamma1 -0.4\n", 1, "gamma1 -0.4"),
        ("corr =\n" + "1 0 0 0 0 0 0 0 0 0\n" * 3 + "1 0 0\n", 5, "corr"),
        ("beta0 = nan\n", 1, "beta0"),
    ],
)
def test_errors_name_file_line_field(tmp_path, text, line, field):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.line == line
    assert err.value.field == field
    assert str(p) in str(err.value)


def test_short_corr_block():
    with pytest.raises(ConfigError, match="rows"):
        parse_config("corr =\n" + "1 0 0 0 0 0 0 0 0 0\n" * 4)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/file.cfg")
