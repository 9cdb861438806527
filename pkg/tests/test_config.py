"""Unit tests for run configuration loading and precedence."""

import pytest

from bug_localizer.composer import ComposerKind
from bug_localizer.config import RunConfig, build_config, load_config_file, parse_config_text
from bug_localizer.errors import ConfigError, InvalidFusionSpec, LeakageGuardError


class TestParseConfigText:
    """Test key=value parsing."""

    def test_scalar_typing(self):
        """Test that values are typed as YAML scalars."""
        values = parse_config_text("seed=7\nallow_leakage=true\nfixed_a=0.25\nproject=HBASE\n")

        assert values == {"seed": 7, "allow_leakage": True, "fixed_a": 0.25, "project": "HBASE"}

    def test_comments_and_blank_lines(self):
        """Test that comment and blank lines are skipped."""
        assert parse_config_text("# settings\n\n  seed = 3  \n") == {"seed": 3}

    def test_missing_equals(self):
        """Test that a line without '=' is refused with its line number."""
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("seed=1\nnonsense\n")


class TestLoadConfigFile:
    """Test config file formats."""

    def test_key_value_file(self, tmp_path):
        """Test a .cfg file of key=value lines."""
        path = tmp_path / "run.cfg"
        path.write_text("composers=borda,lr\nworkers=2\n")

        config = build_config(path)

        assert config.composers == ("borda", "lr")
        assert config.workers == 2

    def test_yaml_file(self, tmp_path):
        """Test a flat YAML mapping with a list value."""
        path = tmp_path / "run.yaml"
        path.write_text("composers: [combsum, corrb]\nbugcache_k: 7.5\nextensions: [.java]\n")

        config = build_config(path)

        assert config.composers == ("combsum", "corrb")
        assert config.bugcache_k == 7.5
        assert config.source_filter().is_source("A.java")
        assert not config.source_filter().is_source("a.py")

    def test_yaml_must_be_mapping(self, tmp_path):
        """Test that a YAML list is refused."""
        path = tmp_path / "run.yml"
        path.write_text("- seed\n- 1\n")

        with pytest.raises(ConfigError, match="flat mapping"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        """Test that an unreadable config file is a configuration error."""
        with pytest.raises(ConfigError, match="Cannot read"):
            load_config_file(tmp_path / "absent.cfg")


class TestBuildConfig:
    """Test validation and layering."""

    def test_defaults(self):
        """Test the built-in defaults."""
        config = build_config()

        assert config == RunConfig()
        assert config.bugcache_k == 15.0
        assert config.cutoff_mode == "relaxed"
        assert config.composers == ("fixed_weight",)

    def test_overrides_beat_file(self, tmp_path):
        """Test that flags win over the file and unset flags keep file values."""
        path = tmp_path / "run.cfg"
        path.write_text("seed=1\nproject=FILE\n")

        config = build_config(path, {"seed": 9, "project": None})

        assert config.seed == 9
        assert config.project == "FILE"

    def test_unknown_key(self, tmp_path):
        """Test that misspelled keys are refused."""
        path = tmp_path / "run.cfg"
        path.write_text("sead=1\n")

        with pytest.raises(ConfigError, match="Unknown configuration key: sead"):
            build_config(path)

    @pytest.mark.parametrize(
        "overrides",
        [
            {"seed": "one"},
            {"allow_leakage": "yes"},
            {"fixed_a": "heavy"},
            {"cutoff_mode": "loose"},
            {"composers": "borda,svm"},
            {"split_ratio": 1.0},
            {"workers": 0},
        ],
    )
    def test_invalid_values(self, overrides):
        """Test that badly typed or out of range values are refused."""
        with pytest.raises(ConfigError):
            build_config(overrides=overrides)

    def test_leakage_guard(self):
        """Test that the resolved history cut-off needs allow_leakage."""
        with pytest.raises(LeakageGuardError):
            build_config(overrides={"bugcache_cutoff": "resolved"})

        config = build_config(overrides={"bugcache_cutoff": "resolved", "allow_leakage": True})
        assert config.bugcache_config().allow_leakage

    def test_fixed_weight_range(self):
        """Test that blend weights outside [0, 1] are refused."""
        with pytest.raises(InvalidFusionSpec):
            build_config(overrides={"fixed_b": 1.5})

    def test_fusion_specs(self):
        """Test that every composer receives the seed and its own parameters."""
        config = build_config(overrides={"composers": "fixed_weight,corrb,rf", "seed": 5, "corrb_top_n": 3})

        specs = {spec.kind: spec for spec in config.fusion_specs()}

        assert specs[ComposerKind.FIXED_WEIGHT].params == {"seed": 5, "a": 0.2, "b": 0.3}
        assert specs[ComposerKind.CORRB].params == {"seed": 5, "top_n": 3}
        assert specs[ComposerKind.RF].params == {"seed": 5}

    def test_to_dict_lists(self):
        """Test that the manifest form uses plain lists."""
        data = build_config(overrides={"composers": "borda"}).to_dict()

        assert data["composers"] == ["borda"]
        assert isinstance(data["extensions"], list)
