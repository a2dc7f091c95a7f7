"""Hot orbit kernels: compiled Cython core with a pure-numpy fallback.

The backend is chosen once at import. Set RPFCONE_FORCE_PY=1 to force the
numpy fallback (used by the backend-agreement tests and the benchmark).
Both backends implement the same contract; see kernels._ref for it.
"""

import os

if os.environ.get("RPFCONE_FORCE_PY") == "1":
    from . import _ref as _impl
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _ref as _impl
        BACKEND = "python"

orbit_positions = _impl.orbit_positions
log_inv_deriv_trace = _impl.log_inv_deriv_trace
backward_birkhoff_sums = _impl.backward_birkhoff_sums
backward_pair_products = _impl.backward_pair_products
backward_positions = _impl.backward_positions
