"""Plain-text key-value files for coefficients and the covariate correlation.

Format::

    # comment
    beta0 = 0.0
    ...
    alpha7 = 0.26
    gamma1 = -0.4
    corr =
    1.0 0.0 ... (10 numbers)
    ... (10 rows, row-major)

Any subset of keys may appear in a file; :func:`load_config` returns what it
found and :func:`resolve` fills the rest from the packaged defaults.
"""

from importlib import resources

import numpy as np

from .errors import ConfigError

COEF_KEYS = [f"beta{i}" for i in range(8)] + [f"alpha{i}" for i in range(8)] + ["gamma1"]
N_COV = 10


def _parse_float(text, path, lineno, key):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"expected a decimal number, got {text!r}", path, lineno, key) from None
    if not np.isfinite(value):
        raise ConfigError("value must be finite", path, lineno, key)
    return value


def parse_config(text, path="<string>"):
    values = {}
    corr_rows = None
    corr_line = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if corr_rows is not None and len(corr_rows) < N_COV and "=" not in line:
            parts = line.replace(",", " ").split()
            if len(parts) != N_COV:
                raise ConfigError(f"corr row needs {N_COV} entries, got {len(parts)}", path, lineno, "corr")
            corr_rows.append([_parse_float(p, path, lineno, "corr") for p in parts])
            continue
        if corr_rows is not None and len(corr_rows) < N_COV:
            raise ConfigError(f"corr block has {len(corr_rows)} rows, expected {N_COV}", path, lineno, "corr")
        key, sep, rest = line.partition("=")
        key = key.strip().lower()
        if not sep:
            raise ConfigError("expected 'key = value'", path, lineno, key or None)
        if key == "corr":
            if corr_rows is not None:
                raise ConfigError("corr given twice", path, lineno, "corr")
            if rest.strip():
                raise ConfigError("corr rows must start on the next line", path, lineno, "corr")
            corr_rows = []
            corr_line = lineno
            continue
        if key not in COEF_KEYS:
            raise ConfigError(f"unknown key; valid keys are {', '.join(COEF_KEYS)}, corr", path, lineno, key)
        if key in values:
            raise ConfigError("key given twice", path, lineno, key)
        values[key] = _parse_float(rest.strip(), path, lineno, key)
    if corr_rows is not None:
        if len(corr_rows) != N_COV:
            raise ConfigError(f"corr block has {len(corr_rows)} rows, expected {N_COV}", path, corr_line, "corr")
        values["corr"] = np.array(corr_rows)
    return values


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", path) from None
    return parse_config(text, path)


def default_config():
    text = resources.files("pslab").joinpath("data/default.cfg").read_text()
    return parse_config(text, "default.cfg")


def format_config(coefficients, corr=None):
    """Render values in the format read by :func:`parse_config`."""
    lines = [f"beta{i} = {v!r}" for i, v in enumerate(coefficients.beta)]
    lines += [f"alpha{i} = {v!r}" for i, v in enumerate(coefficients.alpha)]
    lines.append(f"gamma1 = {coefficients.gamma1!r}")
    if corr is not None:
        lines.append("corr =")
        lines += [" ".join(repr(float(x)) for x in row) for row in np.asarray(corr)]
    return "\n".join(lines) + "\n"
