"""Codec kernel dispatch.

The compiled extension is used when it imports; otherwise the pure-Python
twin. Set ``CABASIM_PURE=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("CABASIM_PURE"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py

bdi_select = _impl.bdi_select
bdi_compress = _impl.bdi_compress
bdi_decompress = _impl.bdi_decompress
fpc_compress = _impl.fpc_compress
fpc_decompress = _impl.fpc_decompress
cpack_compress = _impl.cpack_compress
cpack_decompress = _impl.cpack_decompress
