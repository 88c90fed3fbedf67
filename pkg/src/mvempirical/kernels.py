"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``MVEMPIRICAL_PURE_PYTHON`` is set to a non-empty value,
the pure-Python mirror is used. Both give bit-identical results.
"""

import os

from . import _pykernels
from ._pykernels import (  # noqa: F401
    MEASURE_ACCUMULATE,
    MEASURE_CURRENT,
    MEASURE_FIXED,
    MODEL_CUBIC,
    MODEL_LINEAR,
    MODEL_OU,
    STEP_EULER,
    STEP_OU_EXACT,
)

_compiled = None
if not os.environ.get("MVEMPIRICAL_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels

MomentSystem = _impl.MomentSystem
w2_sorted_cost = _impl.w2_sorted_cost


def backends():
    """Available kernel modules by name, compiled first."""
    out = {}
    if _compiled is not None:
        out["compiled"] = _compiled
    out["python"] = _pykernels
    return out
