"""Select the compiled matching kernel when available, else the Python one."""

import os

from . import _match_py

if os.environ.get("PSLAB_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _match as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
greedy_match = _compiled.greedy_match if _compiled is not None else _match_py.greedy_match
python_greedy_match = _match_py.greedy_match
compiled_greedy_match = _compiled.greedy_match if _compiled is not None else None
