"""
Tests for config module
"""

import math

import pytest

from canaryaudit.canary import DEFAULT_TAU_GRID
from canaryaudit.config import (
    WORKERS_ENV,
    AuditConfig,
    ExperimentSpec,
    SweepPoint,
    output_directory,
    parse_ci,
)
from canaryaudit.exceptions import ConfigError, InvalidInputError


class TestAuditConfig:

    def test_defaults(self):
        """Test the documented default configuration"""
        config = AuditConfig()
        assert (config.n, config.k, config.d) == (1024, 32, 1000)
        assert config.num_null == 32
        assert config.ci == "wilson2"
        assert config.neighborhood == "add_remove"
        assert config.tau is None
        assert config.grid == DEFAULT_TAU_GRID
        assert config.workers == 1

    def test_from_file(self, config_file, temp_env):
        """Test loading a key=value file with aliases and comments"""
        config = AuditConfig.from_file(config_file)
        assert config.n == 50
        assert config.k == 4
        assert config.d == 100
        assert config.epsilon == 2.0
        assert config.ci_method == "bernstein"
        assert config.ci_order == 1
        assert config.tau == 0.5
        assert config.seed == 5

    def test_overrides_win_over_file(self, config_file, temp_env):
        """Test that flags beat the file and None flags are ignored"""
        config = AuditConfig.from_file(config_file, n=10, k=None, ci_order=None)
        assert config.n == 10
        assert config.k == 4
        assert config.ci_order == 1

    def test_workers_from_environment(self, temp_env):
        """Test CANARYAUDIT_WORKERS sets the default worker count"""
        temp_env[WORKERS_ENV] = "3"
        assert AuditConfig.from_file().workers == 3
        assert AuditConfig.from_file(workers=2).workers == 2

    def test_file_values(self, tmp_path, temp_env):
        """Test parsing of optional, list and boolean values"""
        path = tmp_path / "audit.conf"
        path.write_text(
            "tau_grid=0.5, 1.0,1.5\n"
            "both_directions=true\n"
            "m=auto\n"
            "sigma=none\n"
            "neighborhood=replace_one\n"
        )
        config = AuditConfig.from_file(str(path))
        assert config.tau_grid == (0.5, 1.0, 1.5)
        assert config.grid == (0.5, 1.0, 1.5)
        assert config.both_directions is True
        assert config.m is None
        assert config.sigma is None
        assert config.neighborhood == "replace_one"

    def test_unknown_key(self, tmp_path, temp_env):
        path = tmp_path / "audit.conf"
        path.write_text("n=10\nlearning_rate=0.1\n")
        with pytest.raises(ConfigError) as exc_info:
            AuditConfig.from_file(str(path))
        assert exc_info.value.field == "learning_rate"

    @pytest.mark.parametrize("key", ["out", "out_dir", "OUT"])
    def test_output_key_accepted_on_every_path(self, tmp_path, temp_env, key):
        """Test one file with an output directory loads as audit and as sweep"""
        path = tmp_path / "shared.conf"
        path.write_text(f"n=20\nK=4\nd=50\ntau=0.5\nrepeats=2\n{key}=shared\n")
        assert AuditConfig.from_file(str(path)).n == 20
        assert ExperimentSpec.from_file(str(path)).out_dir == "shared"
        assert output_directory(str(path)) == "shared"

    def test_sweep_keys_logged_for_single_audit(self, tmp_path, temp_env, mocker):
        mock_logger = mocker.patch("canaryaudit.config.logger")
        path = tmp_path / "shared.conf"
        path.write_text("n=20\nout=shared\n")
        AuditConfig.from_file(str(path))
        mock_logger.debug.assert_called_once()
        assert "out_dir" in mock_logger.debug.call_args[0][0]

    def test_invalid_sweep_value_rejected_on_every_path(self, tmp_path, temp_env):
        path = tmp_path / "shared.conf"
        path.write_text("n=20\nrepeats=many\n")
        for load in (AuditConfig.from_file, ExperimentSpec.from_file):
            with pytest.raises(ConfigError) as exc_info:
                load(str(path))
            assert exc_info.value.field == "repeats"

    def test_no_output_directory(self, config_file, temp_env):
        assert output_directory(config_file) is None
        assert output_directory(None) is None

    def test_unparseable_value(self, tmp_path, temp_env):
        path = tmp_path / "audit.conf"
        path.write_text("n=many\n")
        with pytest.raises(ConfigError) as exc_info:
            AuditConfig.from_file(str(path))
        assert exc_info.value.field == "n"

    def test_missing_file(self, tmp_path, temp_env):
        with pytest.raises(ConfigError) as exc_info:
            AuditConfig.from_file(str(tmp_path / "missing.conf"))
        assert exc_info.value.field == "config"

    @pytest.mark.parametrize(
        "changes,field",
        [
            ({"n": 0}, "n"),
            ({"k": 0}, "k"),
            ({"d": 0}, "d"),
            ({"workers": 0}, "workers"),
            ({"m": 0}, "m"),
            ({"seed": -1}, "seed"),
            ({"epsilon": 0.0}, "epsilon"),
            ({"epsilon": math.inf}, "epsilon"),
            ({"delta": 0.0}, "delta"),
            ({"beta": 1.0}, "beta"),
            ({"ci_method": "hoeffding"}, "ci"),
            ({"ci_order": 3}, "ci"),
            ({"k": 1}, "ci"),
            ({"m": 1}, "ci"),
            ({"neighborhood": "swap"}, "neighborhood"),
            ({"tau": math.nan}, "tau"),
            ({"tau_grid": ()}, "tau_grid"),
            ({"sigma": -1.0}, "sigma"),
        ],
    )
    def test_validation(self, changes, field):
        """Test each invariant names the offending field"""
        with pytest.raises(ConfigError) as exc_info:
            AuditConfig(**changes)
        assert exc_info.value.field == field
        assert str(exc_info.value).startswith(f"{field}: ")

    def test_config_error_is_invalid_input(self):
        with pytest.raises(InvalidInputError):
            AuditConfig(n=0)

    def test_fourth_order_needs_four_null_canaries(self):
        with pytest.raises(ConfigError):
            AuditConfig(k=8, m=3, ci_order=4)
        assert AuditConfig(k=8, m=4, ci_order=4).num_null == 4

    def test_with_changes_revalidates(self):
        config = AuditConfig(k=4)
        assert config.with_changes(k=2).k == 2
        with pytest.raises(ConfigError):
            config.with_changes(k=1)

    def test_to_dict(self):
        result = AuditConfig(k=4, tau_grid=[0.5, 1]).to_dict()
        assert result["m"] == 4
        assert result["ci"] == "wilson2"
        assert result["tau_grid"] == [0.5, 1.0]
        assert "ci_method" not in result


class TestParseCi:

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("wilson2", ("wilson", 2)),
            ("bernstein1", ("bernstein", 1)),
            ("  Wilson4 ", ("wilson", 4)),
        ],
    )
    def test_valid(self, text, expected):
        assert parse_ci(text) == expected

    @pytest.mark.parametrize("text", ["wilson3", "clopper1", "wilson", ""])
    def test_invalid(self, text):
        with pytest.raises(ConfigError) as exc_info:
            parse_ci(text)
        assert exc_info.value.field == "ci"


class TestExperimentSpec:

    def test_points_are_sorted_and_lowered(self):
        """Test grid order and the order-1 fallback for K=1"""
        spec = ExperimentSpec(
            base=AuditConfig(n=20, d=50, tau=0.5),
            k_values=[16, 1],
            ci_values=["wilson4", "bernstein2"],
        )
        points = list(spec.points())
        assert [(p.k, p.ci) for p in points] == [
            (1, "bernstein1"),
            (1, "wilson1"),
            (16, "bernstein2"),
            (16, "wilson4"),
        ]

    def test_points_deduplicated(self):
        spec = ExperimentSpec(
            base=AuditConfig(n=20, d=50, tau=0.5),
            k_values=[1],
            ci_values=["wilson2", "wilson4"],
        )
        assert [p.ci for p in spec.points()] == ["wilson1"]

    def test_order_limited_by_null_canaries(self):
        spec = ExperimentSpec(
            base=AuditConfig(n=20, k=8, m=2, d=50, tau=0.5), ci_values=["wilson4"]
        )
        assert [p.ci for p in spec.points()] == ["wilson2"]

    def test_empty_axes_use_base(self):
        base = AuditConfig(n=20, k=4, d=50, epsilon=3.0, tau=0.5)
        points = list(ExperimentSpec(base=base).points())
        assert points == [SweepPoint(n=20, k=4, d=50, epsilon=3.0, ci="wilson2")]

    def test_config_for_offsets_seed(self):
        base = AuditConfig(n=20, k=4, d=50, seed=7, tau=0.5)
        spec = ExperimentSpec(base=base, eps_values=[0.5], repeats=3)
        point = next(spec.points())
        config = spec.config_for(point, 2)
        assert config.seed == 9
        assert config.epsilon == 0.5
        assert config.tau == 0.5

    def test_invalid_point(self):
        with pytest.raises(ConfigError) as exc_info:
            ExperimentSpec(base=AuditConfig(n=20, k=4, d=50), n_values=[0])
        assert exc_info.value.field == "n"
        assert "sweep point" in str(exc_info.value)

    def test_invalid_repeats(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(repeats=0)

    def test_invalid_interval_name(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(ci_values=["wald1"])

    def test_from_file(self, tmp_path, temp_env):
        """Test sweep keys and base keys are split"""
        path = tmp_path / "sweep.conf"
        path.write_text(
            "n=20\n"
            "d=50\n"
            "tau=0.5\n"
            "sweep_K=1,4\n"
            "sweep_eps=1,2\n"
            "sweep_ci=bernstein1,wilson2\n"
            "repeats=2\n"
            "out=sweep_results\n"
        )
        spec = ExperimentSpec.from_file(str(path))
        assert spec.base.n == 20
        assert spec.k_values == [1, 4]
        assert spec.eps_values == [1.0, 2.0]
        assert spec.ci_values == ["bernstein1", "wilson2"]
        assert spec.repeats == 2
        assert spec.out_dir == "sweep_results"
        # K=1 lowers wilson2 to wilson1, so every K contributes two intervals
        assert len(list(spec.points())) == 8

    def test_from_file_overrides(self, tmp_path, temp_env):
        path = tmp_path / "sweep.conf"
        path.write_text("n=20\nd=50\ntau=0.5\nrepeats=2\n")
        spec = ExperimentSpec.from_file(
            str(path), repeats=5, out_dir=None, workers=2
        )
        assert spec.repeats == 5
        assert spec.out_dir == "results"
        assert spec.base.workers == 2

    def test_from_file_unknown_key(self, tmp_path, temp_env):
        path = tmp_path / "sweep.conf"
        path.write_text("sweep_batch=1,2\n")
        with pytest.raises(ConfigError):
            ExperimentSpec.from_file(str(path))
