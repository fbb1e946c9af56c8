"""Kernel backend selection.

The compiled Cython kernels are used when importable; otherwise the numpy
twins in :mod:`lcfrisk._pykernels` are used. Set ``LCFRISK_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import _pykernels

kernels = _pykernels
if not os.environ.get("LCFRISK_PURE_PYTHON"):
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        kernels = _pykernels

NAME = kernels.NAME


def available():
    """Return the dict of importable backends keyed by name."""
    found = {"numpy": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return found
