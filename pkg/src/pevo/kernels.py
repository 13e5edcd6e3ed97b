"""Backend selection for the O(N^2) quantization sums.

The compiled extension is used when importable; ``PEVO_KERNELS=python``
forces the numpy fallback.
"""

import os

if os.environ.get("PEVO_KERNELS", "").lower() == "python":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

        BACKEND = "python"

from . import _kernels_py as python_impl  # noqa: E402

left_apply = _impl.left_apply
reverse_apply = _impl.reverse_apply
assemble = _impl.assemble
roots_of_unity = _impl.roots_of_unity
impl = _impl
