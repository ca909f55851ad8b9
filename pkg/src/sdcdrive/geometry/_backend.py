"""Select the compiled grid kernels when available.

Set SDCDRIVE_NO_EXT=1 to force the pure-numpy fallback.
"""

import os

if os.environ.get("SDCDRIVE_NO_EXT"):
    from . import _kernels_py as kernels

    HAVE_EXT = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        from . import _kernels_py as kernels

        HAVE_EXT = False


def backend_name():
    return "cython" if HAVE_EXT else "numpy"
