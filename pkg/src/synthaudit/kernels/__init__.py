"""Tree-growing kernel with a compiled fast path.

The compiled Cython extension and the numpy fallback implement the same
contract bit for bit: identical split positions, thresholds and node
numbering for identical inputs (see _split_np.build_tree for the contract).
Selection happens once at import; set SYNTHAUDIT_PURE_PY=1 to force the
fallback, e.g. to run the equivalence benchmark.
"""

import os

from synthaudit.kernels import _split_np

if os.environ.get("SYNTHAUDIT_PURE_PY") == "1":
    _impl = _split_np
    BACKEND = "numpy"
else:
    try:
        from synthaudit.kernels import _split_fast as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _split_np
        BACKEND = "numpy"

build_tree = _impl.build_tree


def backend() -> str:
    """Name of the active kernel implementation: 'compiled' or 'numpy'."""
    return BACKEND
