"""Backend selection for the detection kernels.

The compiled extension is used when it imports; set ``UCARIS_PURE_PYTHON=1``
to force the NumPy fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

if os.environ.get("UCARIS_PURE_PYTHON") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = _BACKENDS[BACKEND]
nearest_symbol_indices = _impl.nearest_symbol_indices
update_best_candidates = _impl.update_best_candidates


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    """Kernel module for ``name`` (``"cython"`` or ``"python"``)."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; "
                         f"have {available_backends()}") from None
