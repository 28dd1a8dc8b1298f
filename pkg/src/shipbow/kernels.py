"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
pure-Python ``_pykernels`` module. Set ``SHIPBOW_PURE_PYTHON=1`` to force the
fallback.
"""
import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if os.environ.get("SHIPBOW_PURE_PYTHON", "") == "1" or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = BACKENDS[BACKEND]
logger.debug("shipbow kernels backend: %s", BACKEND)

window_sums = _impl.window_sums
greedy_select = _impl.greedy_select
smo_solve = _impl.smo_solve
transfer_pass = _impl.transfer_pass


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None
