"""Hot loops behind the gzip checkpoint builder and the docstore index.

Two backends share one call surface: numba-compiled kernels (default) and a
numpy / plain-Python fallback. Set ``IRDATAKIT_NO_NUMBA=1`` to force the
fallback; it is also used when numba is not importable.
"""

import os

from ._inflate import BAD_DATA, NEED_INPUT, NEED_OUTPUT, OK

__all__ = [
    "BACKEND", "OK", "NEED_INPUT", "NEED_OUTPUT", "BAD_DATA",
    "inflate_block", "search_fixed", "shift_bits",
]


def _want_numba():
    flag = os.environ.get("IRDATAKIT_NO_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


if _want_numba():
    try:
        from ._jit import inflate_block, search_fixed, shift_bits
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba missing
        from ._numpy import inflate_block, search_fixed, shift_bits
        BACKEND = "numpy"
else:
    from ._numpy import inflate_block, search_fixed, shift_bits
    BACKEND = "numpy"
