import math

import numpy as np
import pytest

from ale2fluid.config import ConfigError, load_config, parse_config


class TestDefaults:
    def test_gravity_defaults_match_benchmark(self):
        cfg = parse_config("scenario = gravity_relaxation\n")
        p = cfg.physical
        assert (p.rho1, p.rho2) == (1.0, 0.91)
        assert (p.eta1, p.eta2) == (0.01, 0.0091)
        assert p.g == 100.0
        assert p.gamma == 0.0
        assert (p.beta1, p.beta2) == (0.0, 0.0)
        assert cfg.scheme.dt == 0.025
        assert (cfg.nx, cfg.ny) == (40, 20)
        assert cfg.end_time == 3.0
        assert cfg.scheme.motion_axis == 1

    def test_couette_defaults_match_benchmark(self):
        cfg = parse_config("scenario = couette_gnbc\n")
        p = cfg.physical
        assert (cfg.H, cfg.L, cfg.V) == (13.6, 27.2, 0.25)
        assert p.rho1 == p.rho2 == 0.81
        assert p.eta1 == p.eta2 == 1.95
        assert p.gamma == 5.5
        assert p.beta1 == p.beta2 == 1.5
        assert p.theta_s == math.pi / 2
        assert p.g == 0.0
        assert p.wall_velocity("top") == 0.25
        assert p.wall_velocity("bottom") == -0.25
        assert cfg.scheme.motion_axis == 0

    def test_empty_config_defaults_to_gravity(self):
        cfg = parse_config("")
        assert cfg.scenario == "gravity_relaxation"


class TestErrors:
    def test_unknown_key_names_line_and_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config("scenario = gravity_relaxation\nbogus = 3\n")
        assert err.value.key == "bogus"
        assert err.value.line == 2

    def test_unparsable_value(self):
        with pytest.raises(ConfigError) as err:
            parse_config("nx = not_a_number\n")
        assert err.value.key == "nx"

    def test_negative_dt_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config("dt = -1\n")
        assert err.value.key == "dt"

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            parse_config("scenario = warp_drive\n")

    def test_bad_theta_s(self):
        with pytest.raises(ConfigError):
            parse_config("theta_s = 0\n")


class TestResolved:
    def test_overrides_and_echo(self):
        cfg = parse_config("scenario = couette_gnbc\n",
                           overrides={"dt": 0.25, "motion_scheme": "M3"})
        assert cfg.scheme.dt == 0.25
        assert cfg.scheme.motion_scheme == "M3"
        text = cfg.resolved_text()
        assert "scenario = couette_gnbc" in text.splitlines()[0]
        assert "dt = 0.25" in text
        # resolved text reparses to the same configuration
        again = parse_config(text)
        assert again.values == cfg.values

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config("# a comment\n\nnx = 10  # trailing\n")
        assert cfg.nx == 10

    def test_load_config(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("scenario = gravity_relaxation\nny = 6\n")
        cfg = load_config(path)
        assert cfg.ny == 6
