import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from levy_burgers import _fallback, kernels

compiled = pytest.importorskip("levy_burgers._kernels")

vals = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


class TestGodunov:
    @given(arrays(float, st.integers(2, 64), elements=vals), st.floats(0.0, 0.2))
    @settings(max_examples=100, deadline=None)
    def test_backends_agree(self, u, ratio):
        np.testing.assert_allclose(compiled.godunov_update(u, ratio), _fallback.godunov_update(u, ratio),
                                   rtol=0, atol=1e-13)

    def test_conserves_mass(self, rng):
        u = rng.standard_normal(128)
        for mod in (compiled, _fallback):
            assert np.sum(mod.godunov_update(u, 0.1)) == pytest.approx(np.sum(u), abs=1e-12)

    def test_constant_state_is_fixed(self):
        u = np.full(16, 0.7)
        np.testing.assert_array_equal(compiled.godunov_update(u, 0.5), u)

    def test_riemann_flux(self):
        # transonic rarefaction has zero flux; shocks take the larger state
        assert _fallback.godunov_flux(-1.0, 1.0) == 0.0
        assert _fallback.godunov_flux(2.0, -1.0) == 2.0
        assert compiled.godunov_flux(-1.0, 1.0) == 0.0
        assert compiled.godunov_flux(1.0, -3.0) == 4.5

    def test_does_not_modify_input(self, rng):
        u = rng.standard_normal(32)
        keep = u.copy()
        compiled.godunov_update(u, 0.3)
        np.testing.assert_array_equal(u, keep)


class TestIncrementPowerMeans:
    def test_backends_agree(self, rng):
        d = rng.standard_normal((5, 300))
        p = np.array([0.5, 1.0, 2.0, 3.0, 1.3, 4.0])
        np.testing.assert_allclose(compiled.increment_power_means(d, p), _fallback.increment_power_means(d, p),
                                   rtol=1e-13)

    def test_known_values(self):
        d = np.array([[1.0, -2.0, 3.0, -4.0]])
        out = compiled.increment_power_means(d, np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out, [[2.5, 7.5, 25.0]], rtol=1e-15)

    def test_zero_rows(self):
        out = compiled.increment_power_means(np.zeros((2, 8)), np.array([0.5, 2.0]))
        assert not np.any(out)


class TestSelection:
    def test_default_is_compiled(self):
        if os.environ.get("LEVY_BURGERS_PURE"):
            pytest.skip("fallback forced by the environment")
        assert kernels.BACKEND == "cython"

    def test_env_forces_fallback(self):
        env = dict(os.environ, LEVY_BURGERS_PURE="1")
        out = subprocess.run([sys.executable, "-c", "from levy_burgers import kernels; print(kernels.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"
