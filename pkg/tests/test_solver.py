import numpy as np
import pytest

from conftest import basis_cos, random_field, sine
from levy_burgers import kernels
from levy_burgers.errors import BlowUpError, ResolutionError, StepSizeError
from levy_burgers.noise import CylindricalNoiseConfig, NoiseIncrement
from levy_burgers.solver import (
    CellField,
    IntegrationInfo,
    SolverConfig,
    auto_dt,
    cole_hopf_reference,
    convolution_nonlinear_term,
    default_max_mode,
    godunov_step,
    integrate,
    inviscid_integrate,
    nonlinear_term,
    step,
)
from levy_burgers.spectral import (
    FourierField,
    PhysicalField,
    dealias,
    read_csv,
    sobolev_norm,
    synthesize,
)


def rel_linf(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.grid_size == 4 * cfg.max_mode
        assert cfg.dt is None

    @pytest.mark.parametrize("kw", [{"nu": 0.0}, {"nu": 1.5}, {"dt": -1.0}, {"scheme": "rk2"}, {"max_mode": 0}])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)

    def test_grid_must_fit_modes(self):
        with pytest.raises(ResolutionError):
            SolverConfig(max_mode=16, grid_size=33)

    def test_noise_follows_resolution(self):
        cfg = SolverConfig(max_mode=64, noise=CylindricalNoiseConfig(max_mode=8))
        assert cfg.noise.max_mode == 64

    @pytest.mark.parametrize("nu, n", [(0.002, 1024), (0.004, 512), (0.008, 256), (0.001, 2048), (0.5, 4)])
    def test_default_resolution(self, nu, n):
        assert default_max_mode(nu) == n
        assert n >= 2 / nu

    def test_auto_dt(self):
        cfg = SolverConfig(max_mode=256, cfl_safety=0.5)
        assert auto_dt(cfg, 0.1) == pytest.approx(0.5 / (2 * np.pi * 256))
        assert auto_dt(cfg, 4.0) == pytest.approx(0.5 / (2 * np.pi * 256 * 4))
        assert auto_dt(SolverConfig(max_mode=1), 1.0) == 1e-2


class TestNonlinearTerm:
    def test_sine(self):
        q = nonlinear_term(sine(8))
        expected = np.zeros(8, dtype=complex)
        expected[1] = -0.5j * np.pi  # pi sin(4 pi x)
        np.testing.assert_allclose(q.coeffs, expected, atol=1e-14)

    def test_zero(self):
        assert nonlinear_term(FourierField.zeros(8)) == FourierField.zeros(8)

    def test_matches_convolution_n32(self, rng):
        u = random_field(rng, 32)
        a, b = nonlinear_term(u).coeffs, convolution_nonlinear_term(u).coeffs
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(b)))

    def test_matches_convolution_small_grid(self, rng):
        # aliases of the product land above the cutoff once G > 2N + floor(2N/3)
        u = random_field(rng, 12)
        a = nonlinear_term(u, grid_size=33).coeffs
        b = convolution_nonlinear_term(u).coeffs
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_energy_neutral_on_dealiased_fields(self, rng):
        u = dealias(random_field(rng, 48))
        q = nonlinear_term(u).coeffs
        inner = 2 * np.sum((q * np.conj(u.coeffs)).real)
        scale = np.sqrt(2 * np.sum(np.abs(q) ** 2)) * sobolev_norm(u, 0)
        assert abs(inner) <= 1e-10 * scale

    def test_resolution_error(self):
        with pytest.raises(ResolutionError):
            nonlinear_term(FourierField.zeros(8), grid_size=10)


class TestStep:
    def test_heat_decay_factor(self):
        cfg = SolverConfig(nu=0.1, dt=0.01, max_mode=4, enable_nonlinearity=False)
        c = np.zeros(4, dtype=complex)
        c[0] = 1.0
        out = step(FourierField(c), cfg)
        assert abs(out.coeffs[0] - np.exp(-0.0394784176043574)) <= 1e-14
        assert out.coeffs[0].real == pytest.approx(0.961290, abs=1e-6)

    def test_zero_stays_zero(self):
        cfg = SolverConfig(max_mode=16, dt=1e-3)
        assert step(FourierField.zeros(16), cfg, NoiseIncrement.zero(16)) == FourierField.zeros(16)

    def test_noise_added_after_decay(self, rng):
        cfg = SolverConfig(nu=0.1, dt=0.01, max_mode=4, enable_nonlinearity=False)
        dl = NoiseIncrement(rng.standard_normal((2, 4)), np.ones((2, 4)))
        u = random_field(rng, 4)
        out = step(u, cfg, dl)
        decay = np.exp(-0.1 * (2 * np.pi * u.wavenumbers) ** 2 * 0.01)
        np.testing.assert_allclose(out.coeffs, decay * u.coeffs + dl.coeffs, atol=1e-15)

    def test_cfl_violation(self):
        cfg = SolverConfig(max_mode=64, dt=0.1)
        with pytest.raises(StepSizeError):
            step(sine(64), cfg)

    def test_needs_dt(self):
        with pytest.raises(ValueError):
            step(sine(8), SolverConfig(max_mode=8))

    def test_blow_up(self):
        cfg = SolverConfig(max_mode=8, dt=1e-6, blowup_limit=1.0)
        with pytest.raises(BlowUpError) as err:
            step(sine(8) * 10, cfg)
        assert err.value.state is not None

    def test_non_finite(self):
        c = np.zeros(8, dtype=complex)
        c[0] = np.nan
        with pytest.raises(BlowUpError):
            step(FourierField(c), SolverConfig(max_mode=8, dt=1e-4, enable_nonlinearity=False))


class TestColeHopf:
    def test_zero_initial_data(self):
        out = cole_hopf_reference(PhysicalField(np.zeros(64)), 0.05, 0.3)
        assert np.max(np.abs(out.samples)) < 1e-14

    def test_linear_limit(self):
        u0 = synthesize(sine(16) * 0.01)
        # at t = 1 both profiles are below round-off (exp(-4 pi^2) ~ 7e-18)
        out = cole_hopf_reference(u0, 1.0, 1.0, quad_points=512)
        assert np.max(np.abs(out.samples)) < 1e-15
        # earlier, the nonlinear correction is relatively of order amplitude / nu
        out = cole_hopf_reference(u0, 1.0, 0.05, quad_points=512)
        heat = np.exp(-4 * np.pi**2 * 0.05) * u0.samples
        assert rel_linf(out.samples, heat) < 0.01

    def test_too_few_nodes(self):
        with pytest.raises(ResolutionError):
            cole_hopf_reference(synthesize(sine(16)), 1e-4, 0.01, quad_points=64)

    def test_etdrk4_matches_at_spec_step(self):
        cfg = SolverConfig(nu=0.05, dt=1e-4, max_mode=64, scheme="etdrk4")
        ut = integrate(sine(64), cfg, 0.5)
        ref = cole_hopf_reference(synthesize(sine(64)), 0.05, 0.5)
        assert rel_linf(synthesize(ut).samples, ref.samples) <= 1e-5

    def test_exp_euler_first_order(self):
        ref = cole_hopf_reference(synthesize(sine(64)), 0.05, 0.5)
        errs = {}
        for dt in (1e-4, 5e-5, 2e-5):
            cfg = SolverConfig(nu=0.05, dt=dt, max_mode=64)
            errs[dt] = rel_linf(synthesize(integrate(sine(64), cfg, 0.5)).samples, ref.samples)
        assert errs[1e-4] / errs[5e-5] == pytest.approx(2.0, rel=0.05)
        assert errs[2e-5] <= 1e-5


class TestIntegrate:
    def test_zero_time(self, rng):
        u = random_field(rng, 8)
        assert integrate(u, SolverConfig(max_mode=8), 0.0) == u

    def test_negative_time(self):
        with pytest.raises(ValueError):
            integrate(sine(8), SolverConfig(max_mode=8), -1.0)

    def test_viscous_decay_monotone(self):
        norms = []
        cfg = SolverConfig(nu=1.0, max_mode=16, dt=1e-3)
        integrate(basis_cos(16), cfg, 0.2, [lambda t, u, n: norms.append(sobolev_norm(u, 0))])
        assert len(norms) == 201
        assert all(b < a for a, b in zip(norms, norms[1:]))

    def test_energy_inequality_without_noise(self, rng):
        norms = []
        cfg = SolverConfig(nu=0.01, max_mode=64, dt=2e-4)
        integrate(random_field(rng, 64, 2.0) * 0.2, cfg, 0.2, [lambda t, u, n: norms.append(sobolev_norm(u, 0))])
        assert all(b <= a * (1 + 1e-8) for a, b in zip(norms, norms[1:]))

    def test_observer_stride(self):
        calls = []
        cfg = SolverConfig(max_mode=8, dt=0.01, nu=0.1)
        integrate(sine(8), cfg, 0.1, [lambda t, u, n: calls.append(n)], sample_stride=3)
        assert calls == [0, 3, 6, 9]

    def test_reproducible_bytes(self):
        cfg = SolverConfig(nu=0.02, max_mode=64, noise=CylindricalNoiseConfig())
        a = integrate(FourierField.zeros(64), cfg, 0.3, seed=3, trajectory=1)
        b = integrate(FourierField.zeros(64), cfg, 0.3, seed=3, trajectory=1)
        assert a.coeffs.tobytes() == b.coeffs.tobytes()
        c = integrate(FourierField.zeros(64), cfg, 0.3, seed=3, trajectory=2)
        assert c != a

    def test_mass_stays_zero_with_noise(self):
        cfg = SolverConfig(nu=0.02, max_mode=64, noise=CylindricalNoiseConfig())
        u = integrate(FourierField.zeros(64), cfg, 0.2, seed=1)
        s = synthesize(u).samples
        assert abs(np.mean(s)) <= 1e-14 * np.max(np.abs(s))

    def test_fixed_step_cfl_error_records_step(self):
        info = IntegrationInfo()
        cfg = SolverConfig(max_mode=32, dt=0.01, nu=0.01)
        with pytest.raises(StepSizeError):
            integrate(sine(32) * 5, cfg, 1.0, info=info)
        assert info.failed_step == 0

    def test_auto_step_shrinks_after_kick(self):
        info = IntegrationInfo()
        cfg = SolverConfig(nu=0.02, max_mode=64, noise=CylindricalNoiseConfig(), dt_update_interval=10**6)
        integrate(FourierField.zeros(64), cfg, 0.5, seed=0, info=info)
        assert info.steps > 0
        assert info.failed_step is None

    def test_blow_up_dump(self, tmp_path):
        cfg = SolverConfig(max_mode=16, nu=0.05, blowup_limit=0.5)
        with pytest.raises(BlowUpError) as err:
            integrate(sine(16), cfg, 1.0, trajectory=7, dump_dir=tmp_path)
        assert err.value.step_index == 0
        files = list(tmp_path.glob("traj7_t*.csv"))
        assert [f.name for f in files] == ["traj7_t0.000000.csv"]
        assert read_csv(files[0]) == sine(16)

    @pytest.mark.slow
    def test_energy_order_one_gradient_grows(self):
        res = {}
        for nu in (4e-3, 1e-3):
            n = default_max_mode(nu)
            cfg = SolverConfig(nu=nu, max_mode=n, noise=CylindricalNoiseConfig())
            e0, e1 = [], []

            def obs(t, u, k):
                if t >= 1.0:
                    e0.append(sobolev_norm(u, 0) ** 2)
                    e1.append(sobolev_norm(u, 1) ** 2)

            integrate(FourierField.zeros(n), cfg, 2.0, [obs], seed=11, sample_stride=20)
            res[nu] = (np.mean(e0), np.mean(e1))
        for e0, _ in res.values():
            assert 0.1 < e0 < 10.0
        assert res[1e-3][1] > res[4e-3][1]


class TestGodunov:
    def test_flux_shock(self):
        assert kernels.godunov_flux(np.array([1.0]), np.array([0.0]))[0] == 0.5

    def test_flux_sonic_rarefaction(self):
        assert kernels.godunov_flux(np.array([-1.0]), np.array([1.0]))[0] == 0.0

    def test_flux_cases(self):
        ul = np.array([2.0, -2.0, 1.0, -1.0, 0.5])
        ur = np.array([1.0, -3.0, -1.0, 0.5, -2.0])
        # upwind right, upwind left, transonic shocks pick the larger state
        np.testing.assert_allclose(kernels.godunov_flux(ul, ur), [2.0, 4.5, 0.5, 0.0, 2.0])

    def test_shock_speed(self):
        g = 400
        x = (np.arange(g) + 0.5) / g
        u = CellField(np.where(x < 0.5, 1.0, 0.0))
        out = inviscid_integrate(u, None, 0.4, cfl=0.9)
        front = 0.45 + np.sum(out.values[x > 0.45]) / g
        assert front == pytest.approx(0.7, abs=2e-3)

    def test_mass_conserved(self, rng):
        c = CellField(rng.standard_normal(128))
        c = CellField(c.values - c.values.mean())
        for _ in range(50):
            c = godunov_step(c, 0.5 / 128 / np.max(np.abs(c.values)))
        assert abs(c.mass) <= 1e-12

    def test_cfl_error(self):
        with pytest.raises(StepSizeError):
            godunov_step(CellField(np.array([1.0, -1.0, 0.5, -0.5])), 1.0)

    def test_zero_time(self):
        c = CellField.from_function(lambda x: np.sin(2 * np.pi * x), 64)
        assert np.array_equal(inviscid_integrate(c, None, 0.0).values, c.values)

    def test_noise_off_is_pure_godunov(self):
        c = CellField.from_function(lambda x: np.sin(2 * np.pi * x), 64)
        a = inviscid_integrate(c, None, 0.05, cfl=0.5, dt_cap=1e-3)
        b = c
        for _ in range(50):
            b = godunov_step(godunov_step(b, 5e-4), 5e-4)
        np.testing.assert_allclose(a.values, b.values, atol=1e-13)

    def test_forced_mass_and_reproducibility(self):
        c = CellField(np.zeros(256))
        noise = CylindricalNoiseConfig(max_mode=64)
        a = inviscid_integrate(c, noise, 0.3, seed=2, trajectory=4)
        b = inviscid_integrate(c, noise, 0.3, seed=2, trajectory=4)
        assert a.values.tobytes() == b.values.tobytes()
        assert abs(a.mass) <= 1e-12
        assert np.max(np.abs(a.values)) > 0

    def test_cell_averages_of_sine(self):
        c = CellField.from_function(lambda x: np.sin(2 * np.pi * x), 64)
        f = c.to_fourier(16)
        # cell averaging multiplies mode 1 by sinc(1/G)
        assert f.coeffs[0] == pytest.approx(-0.5j * np.sinc(1 / 64), abs=1e-12)

    def test_entropy_solution_has_one_shock(self):
        g = 1024
        c = inviscid_integrate(CellField.from_function(lambda x: np.sin(2 * np.pi * x), g), None, 1.0, cfl=0.9)
        jumps = np.diff(np.concatenate([c.values, c.values[:1]]))
        assert np.sum(jumps < -0.1) <= 2  # a single shock smeared over at most two cells
        assert abs(c.mass) <= 1e-12
