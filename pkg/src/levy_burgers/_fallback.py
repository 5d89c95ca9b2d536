"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same semantics; the results
agree to round-off (the compiled loops sum in a different order).
"""

import numpy as np


def godunov_update(u, ratio):
    """One conservative Godunov update of ``u_t + (u**2/2)_x = 0`` on a ring.

    ``ratio`` is ``dt / dx``. The interface flux is the exact Riemann flux
    ``max(f(max(uL, 0)), f(min(uR, 0)))``.
    """
    u = np.asarray(u, dtype=np.float64)
    ur = np.roll(u, -1)
    flux = 0.5 * np.maximum(np.maximum(u, 0.0) ** 2, np.minimum(ur, 0.0) ** 2)
    return u - ratio * (flux - np.roll(flux, 1))


def godunov_flux(ul, ur):
    return 0.5 * np.maximum(np.maximum(ul, 0.0) ** 2, np.minimum(ur, 0.0) ** 2)


def increment_power_means(diffs, powers):
    """``out[i, j] = mean(|diffs[i]|**powers[j])`` for a 2-D array of rows."""
    a = np.abs(np.asarray(diffs, dtype=np.float64))
    powers = np.asarray(powers, dtype=np.float64)
    out = np.empty((a.shape[0], powers.shape[0]))
    for j, p in enumerate(powers):
        if p == 1.0:
            v = a
        elif p == 2.0:
            v = a * a
        elif p == 0.5:
            v = np.sqrt(a)
        else:
            v = a**p
        out[:, j] = v.mean(axis=1)
    return out
