import json

import pytest

from levy_burgers.config import (
    DEFAULT_SWEEP,
    ExperimentConfig,
    ScaleRange,
    default_l_values,
    load_config,
    parse_config,
)
from levy_burgers.errors import ConfigError


class TestDefaults:
    def test_empty_document(self):
        cfg = parse_config("")
        assert cfg.sweep == DEFAULT_SWEEP
        assert cfg.noise.measure.alpha == 1.5
        assert cfg.window.burn_in == 1.0 and cfg.window.sigma == 5.0
        assert cfg.t_end == 6.0
        assert cfg.requests.l_values == default_l_values()
        assert not cfg.inviscid.enabled

    def test_hash_is_stable(self):
        assert parse_config("").config_hash() == parse_config("").config_hash()
        assert parse_config("").config_hash() == ExperimentConfig().config_hash()

    def test_hash_ignores_output_location(self):
        a = parse_config('[output]\nout_dir = "a"\n')
        b = parse_config('[output]\nout_dir = "b"\n')
        assert a.config_hash() == b.config_hash()

    def test_hash_tracks_physics(self):
        assert parse_config("").config_hash() != parse_config("[noise]\nalpha = 1.6\n").config_hash()

    def test_default_l_grid(self):
        ls = default_l_values()
        assert len(ls) == 36
        assert ls[0] == 1e-4 and ls[-1] == 0.5
        assert all(a < b for a, b in zip(ls, ls[1:]))

    def test_as_dict_is_json(self):
        d = parse_config("").as_dict()
        assert json.loads(json.dumps(d)) == d
        assert "output" not in parse_config("").as_dict(include_output=False)


class TestMinimal:
    def test_bare_nu(self):
        cfg = parse_config("nu = 0.002\n")
        assert cfg.sweep == (0.002,)
        assert cfg.solver.nu == 0.002
        assert cfg.solver.max_mode == 1024
        assert cfg.modes_for(0.002) == 1024

    def test_top_level_keys_route_to_sections(self):
        cfg = parse_config("nu = 0.004\nalpha = 1.3\nsigma = 2.0\n")
        assert cfg.noise.measure.alpha == 1.3
        assert cfg.window.sigma == 2.0
        assert cfg.t_end == 3.0

    def test_auto_modes_per_sweep_point(self):
        cfg = parse_config("[sweep]\nnu = [0.008, 0.004, 0.002]\n")
        assert [cfg.modes_for(nu) for nu in cfg.sweep] == [256, 512, 1024]
        assert cfg.solver_for(0.004).max_mode == 512

    def test_fixed_modes(self):
        cfg = parse_config("[solver]\nmax_mode = 256\n[sweep]\nnu = [0.004, 0.008]\n")
        assert cfg.modes_for(0.008) == 256 and not cfg.auto_modes


class TestRejects:
    def test_alpha_out_of_range(self):
        with pytest.raises(ConfigError, match="alpha"):
            parse_config("[noise]\nalpha = 2.5\n")

    @pytest.mark.parametrize("alpha", [1.0, 2.0, -1.0])
    def test_alpha_endpoints(self, alpha):
        with pytest.raises(ConfigError):
            parse_config(f"[noise]\nalpha = {alpha}\n")

    def test_syntax_error_position(self):
        with pytest.raises(ConfigError) as info:
            parse_config("[noise]\nalpha = = 1.5\n")
        assert "line 2" in str(info.value)
        assert "column" in str(info.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            parse_config("[noise]\nbogus = 1\n")

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            parse_config("bogus = 1\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="extra"):
            parse_config("[extra]\nx = 1\n")

    def test_duplicate_through_routing(self):
        with pytest.raises(ConfigError, match="twice"):
            parse_config("alpha = 1.5\n[noise]\nalpha = 1.6\n")

    def test_wrong_type(self):
        with pytest.raises(ConfigError, match="ensemble_size"):
            parse_config('[averaging]\nensemble_size = "many"\n')

    def test_burn_in_below_one(self):
        with pytest.raises(ConfigError, match="averaging"):
            parse_config("[averaging]\nburn_in = 0.5\n")

    def test_t_end_before_window_end(self):
        with pytest.raises(ConfigError, match="t_end"):
            parse_config("[solver]\nt_end = 3.0\n")

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError, match="scheme"):
            parse_config('[solver]\nscheme = "rk4"\n')

    def test_spectrum_range_beyond_resolution(self):
        with pytest.raises(ConfigError, match="spectrum_range"):
            parse_config("[solver]\nmax_mode = 64\n")

    def test_empty_inertial_range(self):
        with pytest.raises(ConfigError, match="inertial_range"):
            parse_config("nu = 0.02\n[solver]\nmax_mode = 256\n")

    def test_bad_l_value(self):
        with pytest.raises(ConfigError, match="l_values"):
            parse_config("[statistics]\nl_values = [0.1, 1.5]\n")

    def test_nu_out_of_range(self):
        with pytest.raises(ConfigError):
            parse_config("[sweep]\nnu = [0.0]\n")


class TestScaleRange:
    def test_parse_and_resolve(self):
        r = ScaleRange.parse("10nu:0.1")
        assert r.resolve(0.002) == pytest.approx((0.02, 0.1))
        assert str(r) == "10nu:0.1"

    def test_both_scaled(self):
        assert ScaleRange.parse("0.1nu:1nu").resolve(0.004) == pytest.approx((4e-4, 4e-3))

    @pytest.mark.parametrize("text", ["1", "a:b", "0:1", "1:2:3"])
    def test_bad(self, text):
        with pytest.raises(ValueError):
            ScaleRange.parse(text)

    def test_empty_after_scaling(self):
        with pytest.raises(ValueError):
            ScaleRange.parse("10nu:0.1").resolve(0.02)


def test_load_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("nu = 0.004\n")
    assert load_config(p).solver.max_mode == 512
