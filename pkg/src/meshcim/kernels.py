"""Kernel backend selection.

The compiled extension is preferred when it built; the numpy fallback is
always available and bit-identical. Set MESHCIM_FORCE_FALLBACK=1 to pin
the fallback (used by the benchmark and the equivalence tests).
"""

import os

from . import _kernels_py

if os.environ.get("MESHCIM_FORCE_FALLBACK"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
mvm_batch = _impl.mvm_batch
scatter_accumulate = _impl.scatter_accumulate
relu_shift_sat8 = _impl.relu_shift_sat8
lane_max = _impl.lane_max
sat_add8 = _impl.sat_add8


def available_backends() -> dict[str, object]:
    """Importable backends by name (for benchmarks and tests)."""
    backends = {"numpy": _kernels_py}
    try:
        from . import _kernels

        backends["cython"] = _kernels
    except ImportError:
        pass
    return backends
