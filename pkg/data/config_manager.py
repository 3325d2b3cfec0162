"""
ConfigManager for halfspace-kernels.

This module loads and saves run configurations (grid, system, kernel method,
experiment list, output directory, seed, worker count) and the registry of
committed envelopes that experiment metrics are checked against.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from core.errors import ConfigError
from data.models import AUTO_METHOD, Envelope, EnvelopeKind, ExperimentConfig, KernelMethod, Provenance, RunConfig


logger = logging.getLogger(__name__)


class ConfigManager:
    """Manages the JSON run configuration.

    A missing file yields the default RunConfig. A file that exists but
    cannot be parsed, or whose references do not resolve, raises ConfigError.
    Out-of-range numeric values fall back to their defaults with a warning.

    Attributes:
        config_path: Path to the JSON configuration file
    """

    def __init__(
        self,
        config_path: Union[str, Path],
        known_experiments: Optional[Sequence[str]] = None,
        default_experiments: Sequence[str] = (),
    ):
        """Initialize the ConfigManager.

        Args:
            config_path: Path to the JSON configuration file
            known_experiments: Experiment names accepted in the experiment list
                (None accepts any name)
            default_experiments: Experiments run when the file has no
                "experiments" key (an explicit empty list runs none)
        """
        self.config_path = Path(config_path)
        self.known_experiments = None if known_experiments is None else set(known_experiments)
        self.default_experiments = list(default_experiments)
        self._cached_config: Optional[RunConfig] = None

    @property
    def base_dir(self) -> Path:
        """Directory relative paths in the config are resolved against."""
        return self.config_path.parent

    def load_config(self) -> RunConfig:
        """Load the run configuration.

        Returns:
            RunConfig with loaded or default settings

        Raises:
            ConfigError: If the file is not valid JSON or a reference is broken
        """
        if not self.config_path.exists():
            logger.info(f"Config file not found at {self.config_path}, using defaults")
            self._cached_config = RunConfig()
            return self._cached_config

        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {self.config_path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {self.config_path} must hold a JSON object")

        config = self._dict_to_config(data)
        self._cached_config = config
        return config

    def save_config(self, config: RunConfig) -> None:
        """Save the configuration as indented JSON, creating parent directories.

        Args:
            config: RunConfig to save
        """
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        data = self._config_to_dict(config)
        with open(self.config_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True)
        self._cached_config = config
        logger.debug(f"Config saved to {self.config_path}")

    def reset_to_defaults(self) -> RunConfig:
        default_config = RunConfig()
        self.save_config(default_config)
        return default_config

    def _config_to_dict(self, config: RunConfig) -> Dict[str, Any]:
        return {
            "grid": {"dim": config.dim, "R": config.R, "N": config.N},
            "system": config.system,
            "kernel_method": _method_name(config.kernel_method),
            "experiments": [{"name": e.name, "params": e.params} for e in config.experiments],
            "output_dir": config.output_dir,
            "seed": config.seed,
            "jobs": config.jobs,
        }

    def _dict_to_config(self, data: Dict[str, Any]) -> RunConfig:
        """Convert a dictionary to RunConfig.

        Missing keys take their defaults; invalid numbers are replaced by
        defaults with a warning.

        Raises:
            ConfigError: For an unknown kernel method or experiment, or a
                system file that does not exist
        """
        defaults = RunConfig()

        grid = data.get("grid", {})
        dim = grid.get("dim", defaults.dim)
        if dim not in (1, 2):
            logger.warning(f"Invalid boundary dimension: {dim}, using default: {defaults.dim}")
            dim = defaults.dim
        R = self._validate_positive_float(grid.get("R", defaults.R), defaults.R)
        N = self._validate_power_of_two(grid.get("N", defaults.N), defaults.N)

        system = data.get("system", defaults.system)
        if isinstance(system, str):
            path = Path(system) if Path(system).is_absolute() else self.base_dir / system
            if not path.exists():
                raise ConfigError(f"System file {path} does not exist")
        elif not isinstance(system, dict):
            raise ConfigError(f"System must be an object or a file path, got {system!r}")

        kernel_method = data.get("kernel_method", defaults.kernel_method)
        if kernel_method != AUTO_METHOD:
            try:
                kernel_method = KernelMethod(kernel_method)
            except ValueError as e:
                raise ConfigError(f"Unknown kernel method {kernel_method!r}") from e

        entries = data.get("experiments", self.default_experiments)
        if not isinstance(entries, list):
            raise ConfigError(f"Experiments must be a list, got {entries!r}")
        experiments = [self._experiment(entry) for entry in entries]

        return RunConfig(
            dim=dim,
            R=R,
            N=N,
            system=system,
            kernel_method=kernel_method,
            experiments=experiments,
            output_dir=str(data.get("output_dir", defaults.output_dir)),
            seed=self._validate_non_negative_int(data.get("seed", defaults.seed), defaults.seed),
            jobs=self._validate_positive_int(data.get("jobs", defaults.jobs), defaults.jobs),
        )

    def _experiment(self, entry: Any) -> ExperimentConfig:
        if isinstance(entry, str):
            entry = {"name": entry}
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"Experiment entries need a name, got {entry!r}")
        name = str(entry["name"])
        if self.known_experiments is not None and name not in self.known_experiments:
            raise ConfigError(f"Unknown experiment '{name}'")
        params = entry.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"Parameters of experiment '{name}' must be an object")
        return ExperimentConfig(name=name, params=params)

    def _validate_positive_int(self, value: Any, default: int) -> int:
        try:
            int_value = int(value)
            if int_value > 0:
                return int_value
        except (TypeError, ValueError):
            pass
        logger.warning(f"Invalid positive int value: {value}, using default: {default}")
        return default

    def _validate_non_negative_int(self, value: Any, default: int) -> int:
        try:
            int_value = int(value)
            if int_value >= 0:
                return int_value
        except (TypeError, ValueError):
            pass
        logger.warning(f"Invalid non-negative int value: {value}, using default: {default}")
        return default

    def _validate_positive_float(self, value: Any, default: float) -> float:
        try:
            float_value = float(value)
            if float_value > 0:
                return float_value
        except (TypeError, ValueError):
            pass
        logger.warning(f"Invalid positive float value: {value}, using default: {default}")
        return default

    def _validate_power_of_two(self, value: Any, default: int) -> int:
        """Validate a grid size: an integer power of two, at least 8."""
        try:
            int_value = int(value)
            if int_value >= 8 and int_value & (int_value - 1) == 0:
                return int_value
        except (TypeError, ValueError):
            pass
        logger.warning(f"Invalid grid size: {value}, using default: {default}")
        return default



def _method_name(method: Union[KernelMethod, str]) -> str:
    return method if method == AUTO_METHOD else KernelMethod(method).value

# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------

# Built-in envelopes, used for entries missing from envelopes.json.
DEFAULT_ENVELOPES: Dict[str, Envelope] = {
    e.name: e
    for e in [
        Envelope("legendre_hadamard.kappa_o", 1e-12, EnvelopeKind.MIN, Provenance.PAPER,
                 "strict Legendre-Hadamard condition"),
        Envelope("kernel_properties.normalization_error", 0.05, EnvelopeKind.MAX, Provenance.DERIVED,
                 "profile mass outside [-R, R)^dim for R >= 32"),
        Envelope("kernel_properties.homogeneity_error", 1e-3, EnvelopeKind.MAX, Provenance.DERIVED,
                 "K(2y', 2) against 2^(1-n) K(y', 1) on periodized slices"),
        Envelope("kernel_properties.fd_order", 1.5, EnvelopeKind.MIN, Provenance.DERIVED,
                 "second-order stencil"),
        Envelope("semigroup.residual", 1e-4, EnvelopeKind.MAX, Provenance.DERIVED,
                 "periodization and tail error at t1 = t2 = 1"),
        Envelope("semigroup.commutator", 1e-4, EnvelopeKind.MAX, Provenance.DERIVED, ""),
        Envelope("semigroup.delta_identity", 1e-10, EnvelopeKind.MAX, Provenance.TRIVIAL, ""),
        Envelope("semigroup.refinement_improved", 1.0, EnvelopeKind.MIN, Provenance.DERIVED,
                 "residual does not grow when the box doubles at fixed h"),
        Envelope("nt_domination.max_ratio", 25.0, EnvelopeKind.MAX, Provenance.DERIVED,
                 "pilot envelope, n = 2, kappa = 1"),
        Envelope("fatou.residual", 1e-3, EnvelopeKind.MAX, Provenance.DERIVED, "semigroup tolerance"),
        Envelope("atom_decay.max_nu_mass", 10.0, EnvelopeKind.MAX, Provenance.DERIVED,
                 "pilot over 10 random atoms"),
        Envelope("atom_decay.max_off_cube_constant", 25.0, EnvelopeKind.MAX, Provenance.DERIVED, ""),
        Envelope("atom_decay.max_decay_deficit", 0.2, EnvelopeKind.MAX, Provenance.PAPER,
                 "n minus the fitted off-cube decay exponent"),
        Envelope("wellposedness_table.max_ratio", 25.0, EnvelopeKind.MAX, Provenance.DERIVED, ""),
        Envelope("m_ball_profile.m_ratio_min", 0.9, EnvelopeKind.MIN, Provenance.PAPER, ""),
        Envelope("m_ball_profile.m_ratio_max", 2.1, EnvelopeKind.MAX, Provenance.PAPER, ""),
        Envelope("m_ball_profile.m2_spread", 50.0, EnvelopeKind.MAX, Provenance.PAPER, ""),
        Envelope("cone_aperture_comparison.max_ratio", 4.0, EnvelopeKind.MAX, Provenance.DERIVED, ""),
        Envelope("cone_aperture_comparison.min_ratio", 1.0, EnvelopeKind.MIN, Provenance.TRIVIAL,
                 "nested cones"),
        Envelope("boyd.max_error", 0.1, EnvelopeKind.MAX, Provenance.PAPER, ""),
        Envelope("xw_decay.max_ratio", 50.0, EnvelopeKind.MAX, Provenance.DERIVED, ""),
    ]
}


class EnvelopeRegistry:
    """Committed envelopes keyed by ``<experiment>.<metric>``.

    Attributes:
        envelopes: Envelope per metric name
        version: Format version of the loaded file
    """

    VERSION = 1

    def __init__(self, envelopes: Optional[Dict[str, Envelope]] = None, version: int = VERSION):
        self.envelopes = dict(DEFAULT_ENVELOPES if envelopes is None else envelopes)
        self.version = version

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EnvelopeRegistry":
        """Load envelopes.json; built-in defaults fill entries it lacks.

        Raises:
            ConfigError: If the file exists but is malformed
        """
        path = Path(path)
        if not path.exists():
            logger.warning(f"Envelope file not found at {path}, using built-in envelopes")
            return cls()
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            version = int(data.get("version", cls.VERSION))
            entries = data["envelopes"]
            loaded = {
                name: Envelope(
                    name=name,
                    value=float(entry["value"]),
                    kind=EnvelopeKind(entry.get("kind", "max")),
                    provenance=Provenance(entry.get("provenance", "DERIVED")),
                    note=str(entry.get("note", "")),
                )
                for name, entry in entries.items()
            }
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as e:
            raise ConfigError(f"Envelope file {path} is malformed: {e}") from e
        if version != cls.VERSION:
            raise ConfigError(f"Envelope file version {version} is not supported")
        for name in sorted(set(DEFAULT_ENVELOPES) - set(loaded)):
            logger.warning(f"Envelope {name} missing from {path}, using built-in value")
            loaded[name] = DEFAULT_ENVELOPES[name]
        return cls(loaded, version)

    def get(self, name: str) -> Optional[Envelope]:
        return self.envelopes.get(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "envelopes": {
                name: {"value": e.value, "kind": e.kind.value, "provenance": e.provenance.value, "note": e.note}
                for name, e in sorted(self.envelopes.items())
            },
        }

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
