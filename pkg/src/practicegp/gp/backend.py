"""Selects the kernel-core implementation at import time.

The compiled extension is preferred; the numpy twin is used when the
extension is missing (source install without a compiler) or when
PRACTICEGP_BACKEND=numpy is set.
"""

from __future__ import annotations

import os

from . import _core_numpy

if os.environ.get("PRACTICEGP_BACKEND", "").lower() == "numpy":
    _impl = _core_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _core_numpy
        BACKEND = "numpy"

FAMILY_RBF = _core_numpy.FAMILY_RBF
FAMILY_RATQUAD = _core_numpy.FAMILY_RATQUAD
FAMILY_MATERN52 = _core_numpy.FAMILY_MATERN52

gram_from_sqdiffs = _impl.gram_from_sqdiffs
lml_from_sqdiffs = _impl.lml_from_sqdiffs
