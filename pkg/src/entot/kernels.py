"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set ``ENTOT_PURE_PYTHON=1`` to force the numpy fallback (used by the
benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

if os.environ.get("ENTOT_PURE_PYTHON"):
    from entot import _kernels_np as _impl

    BACKEND = "numpy"
else:
    try:
        from entot import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from entot import _kernels_np as _impl

        BACKEND = "numpy"

update_f = _impl.update_f
update_g = _impl.update_g
marginal_residuals = _impl.marginal_residuals
dual_value = _impl.dual_value
sinkhorn_loop = _impl.sinkhorn_loop
