"""Select the compiled kernels when available, the numpy fallback otherwise.

Set ``LEVY_BURGERS_PURE=1`` to force the fallback (used by the benchmark and
by the equivalence tests).
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("LEVY_BURGERS_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _fallback

godunov_update = _impl.godunov_update
godunov_flux = _impl.godunov_flux
increment_power_means = _impl.increment_power_means
