"""
Unit tests for ConfigManager and EnvelopeRegistry.

Tests loading, saving and resetting run configurations, validation fallbacks,
and the committed envelope file with its built-in defaults.
"""

import json
import tempfile
from pathlib import Path

import pytest

from core.errors import ConfigError
from data import ConfigManager, EnvelopeRegistry, RunConfig
from data.config_manager import DEFAULT_ENVELOPES
from data.models import AUTO_METHOD, Envelope, EnvelopeKind, KernelMethod, Provenance


@pytest.fixture
def temp_config_path():
    """Create a temporary config file path for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir) / "run.json"


@pytest.fixture
def config_manager(temp_config_path):
    """Create a ConfigManager that knows two experiments and runs both by default."""
    return ConfigManager(
        temp_config_path,
        known_experiments=["semigroup", "boyd"],
        default_experiments=["semigroup", "boyd"],
    )


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")


class TestLoadConfig:
    """Tests for loading configuration."""

    def test_load_config_missing_file_returns_defaults(self, config_manager, temp_config_path):
        """Test that loading from a missing file returns the default config."""
        assert not temp_config_path.exists()

        config = config_manager.load_config()

        assert config.dim == 1
        assert config.R == 64.0
        assert config.N == 4096
        assert config.system == {"kind": "laplacian", "n": 2, "M": 1}
        assert config.kernel_method == AUTO_METHOD
        assert config.seed == 20240101
        assert config.jobs == 1

    def test_load_config_valid_file(self, config_manager, temp_config_path):
        """Test loading configuration from a valid JSON file."""
        _write(
            temp_config_path,
            {
                "grid": {"dim": 2, "R": 8, "N": 64},
                "system": {"kind": "lame", "n": 3, "mu": 1, "lambda": 0.5},
                "kernel_method": "symbol",
                "experiments": ["boyd", {"name": "semigroup", "params": {"t1": 0.5}}],
                "output_dir": "results",
                "seed": 7,
                "jobs": 2,
            },
        )

        config = config_manager.load_config()

        assert (config.dim, config.R, config.N) == (2, 8.0, 64)
        assert config.system["kind"] == "lame"
        assert config.kernel_method == KernelMethod.FOURIER_SYMBOL
        assert [e.name for e in config.experiments] == ["boyd", "semigroup"]
        assert config.experiments[1].params == {"t1": 0.5}
        assert config.output_dir == "results"
        assert config.seed == 7
        assert config.jobs == 2

    def test_missing_experiment_key_uses_default_suite(self, config_manager, temp_config_path):
        """Test that a file without "experiments" runs the default list."""
        _write(temp_config_path, {"grid": {"dim": 1}})

        config = config_manager.load_config()

        assert [e.name for e in config.experiments] == ["semigroup", "boyd"]

    def test_empty_experiment_list_is_kept(self, config_manager, temp_config_path):
        """Test that an explicit empty list runs nothing."""
        _write(temp_config_path, {"experiments": []})

        assert config_manager.load_config().experiments == []

    def test_load_config_corrupted_file_raises(self, config_manager, temp_config_path):
        """Test that invalid JSON is a configuration error."""
        temp_config_path.write_text("{ invalid json }", encoding="utf-8")

        with pytest.raises(ConfigError):
            config_manager.load_config()

    def test_non_object_file_raises(self, config_manager, temp_config_path):
        """Test that a JSON list is rejected."""
        _write(temp_config_path, [1, 2, 3])

        with pytest.raises(ConfigError):
            config_manager.load_config()


class TestConfigValidation:
    """Tests for validation of configuration values."""

    def test_invalid_grid_values_fall_back(self, config_manager, temp_config_path):
        """Test that out-of-range grid values use defaults."""
        _write(temp_config_path, {"grid": {"dim": 3, "R": -1, "N": 1000}})

        config = config_manager.load_config()

        assert config.dim == 1
        assert config.R == 64.0
        assert config.N == 4096

    def test_invalid_seed_and_jobs_fall_back(self, config_manager, temp_config_path):
        """Test that a negative seed and zero jobs use defaults."""
        _write(temp_config_path, {"seed": -5, "jobs": 0})

        config = config_manager.load_config()

        assert config.seed == 20240101
        assert config.jobs == 1

    def test_unknown_kernel_method(self, config_manager, temp_config_path):
        """Test that an unknown kernel method is rejected."""
        _write(temp_config_path, {"kernel_method": "magic"})

        with pytest.raises(ConfigError):
            config_manager.load_config()

    def test_unknown_experiment(self, config_manager, temp_config_path):
        """Test that an experiment outside the known set is rejected."""
        _write(temp_config_path, {"experiments": ["teleport"]})

        with pytest.raises(ConfigError):
            config_manager.load_config()

    def test_experiment_entries_need_names(self, config_manager, temp_config_path):
        """Test that entries without a name are rejected."""
        _write(temp_config_path, {"experiments": [{"params": {}}]})

        with pytest.raises(ConfigError):
            config_manager.load_config()

    def test_missing_system_file(self, config_manager, temp_config_path):
        """Test that a system path must exist relative to the config."""
        _write(temp_config_path, {"system": "systems/nowhere.json"})

        with pytest.raises(ConfigError):
            config_manager.load_config()

    def test_system_path_relative_to_config(self, config_manager, temp_config_path):
        """Test that an existing relative system path is accepted as given."""
        (temp_config_path.parent / "lap.json").write_text(
            json.dumps({"kind": "laplacian", "n": 2, "M": 1}), encoding="utf-8"
        )
        _write(temp_config_path, {"system": "lap.json"})

        assert config_manager.load_config().system == "lap.json"


class TestSaveConfig:
    """Tests for saving and resetting configuration."""

    def test_save_and_reload(self, config_manager, temp_config_path):
        """Test that a saved config loads back equal."""
        config = RunConfig(dim=2, R=8.0, N=64, kernel_method=KernelMethod.HARMONIC_EXPLICIT, seed=3)

        config_manager.save_config(config)
        loaded = config_manager.load_config()

        assert (loaded.dim, loaded.R, loaded.N) == (2, 8.0, 64)
        assert loaded.kernel_method == KernelMethod.HARMONIC_EXPLICIT
        assert loaded.seed == 3
        assert loaded.experiments == []

    def test_saved_file_is_sorted_json(self, config_manager, temp_config_path):
        """Test that the file uses plain values for the method."""
        config_manager.save_config(RunConfig())

        data = json.loads(temp_config_path.read_text(encoding="utf-8"))

        assert data["kernel_method"] == "auto"
        assert list(data) == sorted(data)

    def test_reset_to_defaults(self, config_manager, temp_config_path):
        """Test that reset writes and returns the defaults."""
        config = config_manager.reset_to_defaults()

        assert temp_config_path.exists()
        assert config.N == 4096


class TestEnvelopeRegistry:
    """Tests for the committed envelope file."""

    def test_defaults(self):
        """Test that the built-in registry holds every default envelope."""
        registry = EnvelopeRegistry()

        assert registry.get("boyd.max_error").value == 0.1
        assert registry.get("legendre_hadamard.kappa_o").kind == EnvelopeKind.MIN
        assert registry.get("unknown.metric") is None

    def test_missing_file_uses_defaults(self, temp_config_path):
        """Test that a missing envelope file gives the built-in registry."""
        registry = EnvelopeRegistry.load(temp_config_path)

        assert set(registry.envelopes) == set(DEFAULT_ENVELOPES)

    def test_round_trip(self, temp_config_path):
        """Test save then load with a modified entry."""
        envelopes = dict(DEFAULT_ENVELOPES)
        envelopes["boyd.max_error"] = Envelope("boyd.max_error", 0.5, EnvelopeKind.MAX, Provenance.TRIVIAL, "wide")

        EnvelopeRegistry(envelopes).save(temp_config_path)
        loaded = EnvelopeRegistry.load(temp_config_path)

        assert loaded.get("boyd.max_error").value == 0.5
        assert loaded.get("boyd.max_error").provenance == Provenance.TRIVIAL
        assert loaded.get("boyd.max_error").note == "wide"

    def test_missing_entries_filled_from_defaults(self, temp_config_path):
        """Test that a partial file is completed by the defaults."""
        _write(temp_config_path, {"version": 1, "envelopes": {"boyd.max_error": {"value": 0.3}}})

        registry = EnvelopeRegistry.load(temp_config_path)

        assert registry.get("boyd.max_error").value == 0.3
        assert registry.get("fatou.residual").value == DEFAULT_ENVELOPES["fatou.residual"].value

    def test_wrong_version(self, temp_config_path):
        """Test that unsupported versions are rejected."""
        _write(temp_config_path, {"version": 2, "envelopes": {}})

        with pytest.raises(ConfigError):
            EnvelopeRegistry.load(temp_config_path)

    def test_malformed_entry(self, temp_config_path):
        """Test that an entry without a value is rejected."""
        _write(temp_config_path, {"version": 1, "envelopes": {"boyd.max_error": {"kind": "max"}}})

        with pytest.raises(ConfigError):
            EnvelopeRegistry.load(temp_config_path)

    def test_committed_file_matches_defaults(self):
        """Test that envelopes.json at the repository root equals the built-in set."""
        path = Path(__file__).resolve().parent.parent / "envelopes.json"

        registry = EnvelopeRegistry.load(path)

        for name, envelope in DEFAULT_ENVELOPES.items():
            assert registry.get(name).value == envelope.value
            assert registry.get(name).kind == envelope.kind

    def test_admits(self):
        """Test MAX and MIN envelopes and non-finite metrics."""
        upper = Envelope("a.b", 1.0, EnvelopeKind.MAX)
        lower = Envelope("a.c", 1.0, EnvelopeKind.MIN)

        assert upper.admits(0.5) and not upper.admits(1.5)
        assert lower.admits(1.5) and not lower.admits(0.5)
        assert not upper.admits(float("nan"))
