"""
Scenario registry for the quantum-walk toolkit.

Bundled scenarios live as YAML files under data/scenarios/ and are loaded
once into memory; any other scenario can be given by path.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from .config import get_settings
from .exceptions import ConfigError
from .models import ScenarioConfig
from .utils import read_yaml, validation_field

logger = logging.getLogger(__name__)

BUNDLED_SCENARIOS = (
    "hadamard-t3000",
    "a-impurity-g03",
    "b-impurity-g03",
    "b-impurity-g-03",
    "randomB-g02",
    "randomB-g03",
    "randomB-g05",
    "optics-eqS0N",
    "km-reflectance",
)


def load_config(path: Path) -> ScenarioConfig:
    """
    Parse and validate one scenario file.

    Raises:
        ConfigError: With line/column for YAML errors, or the dotted field
            name for validation errors
    """
    path = Path(path)
    document = read_yaml(path)
    if not isinstance(document, dict):
        raise ConfigError(f"{path.name} must contain a mapping at the top level")
    try:
        return ScenarioConfig(**document)
    except ValidationError as exc:
        field = validation_field(exc)
        message = exc.errors()[0].get("msg", str(exc))
        raise ConfigError(f"Invalid scenario {path.name}: {message}", field=field) from exc


def validate_config(path: Path) -> List[str]:
    """
    Check a scenario file without running it.

    Returns:
        Diagnostics, empty when the file is valid
    """
    try:
        load_config(path)
    except ConfigError as exc:
        return [str(exc)]
    return []


class ScenarioRegistry:
    """In-memory registry of bundled scenarios, keyed by name."""

    def __init__(self, scenario_dir: Optional[Path] = None):
        self.scenario_dir = Path(scenario_dir or get_settings().scenario_dir)
        self.scenarios: Dict[str, ScenarioConfig] = {}
        self._initialize_data()

    def _initialize_data(self):
        """Load every *.yaml file in the scenario directory."""
        if not self.scenario_dir.is_dir():
            logger.warning(f"Scenario directory {self.scenario_dir} does not exist")
            return
        for path in sorted(self.scenario_dir.glob("*.yaml")):
            config = load_config(path)
            self.scenarios[config.name] = config
        logger.debug(f"Loaded {len(self.scenarios)} bundled scenarios")

    def list_names(self) -> List[str]:
        """Names of all bundled scenarios, sorted."""
        return sorted(self.scenarios)

    def get(self, name: str) -> Optional[ScenarioConfig]:
        """Get a bundled scenario by name."""
        return self.scenarios.get(name)

    def resolve(self, name_or_path: str) -> Tuple[ScenarioConfig, Path]:
        """
        Look up a bundled name or load a file.

        Returns:
            The config and the directory relative paths inside it refer to

        Raises:
            KeyError: If neither a bundled name nor an existing file
        """
        config = self.get(name_or_path)
        if config is not None:
            return config, self.scenario_dir
        path = Path(name_or_path)
        if path.is_file():
            return load_config(path), path.resolve().parent
        raise KeyError(f"Unknown scenario '{name_or_path}'")


# Global registry instance
_registry_instance = None


def get_registry() -> ScenarioRegistry:
    """Get the registry instance."""
    global _registry_instance
    if _registry_instance is None:
        _registry_instance = ScenarioRegistry()
    return _registry_instance
