from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping

from errors import DomainError
from numerics_core import DEFAULT_PRECISION_BITS, MIN_PRECISION_BITS, to_exact

LOGGER = logging.getLogger(__name__)

MAX_PRECISION_BITS = 4096
MAX_BUDGET = 1_000_000_000
OUTPUT_FORMATS = ("json", "csv", "table")
PRECISION_ENV_VAR = "POLYALAB_PRECISION"


class Settings:
    def __init__(self, settings_file: str | os.PathLike[str] | None = None):
        self.settings_file = Path(settings_file or Path.home() / ".polyalab_settings.json")
        self.defaults = {
            "precision_bits": DEFAULT_PRECISION_BITS,
            "tolerance": "1e-10",
            "output_format": "table",
            "seed": 0,
            "budget": 10_000_000,
            "shift_points": 200,
            "refinement_depth": 40,
            "grid_steps": ["0.1", "0.25", "0.5", "1"],
        }
        self.data = self.load()

    def load(self) -> Dict[str, Any]:
        """Load settings with validation and error recovery."""
        try:
            if self.settings_file.exists():
                with self.settings_file.open("r", encoding="utf-8") as f:
                    loaded = json.load(f)
                    if not isinstance(loaded, dict):
                        raise ValueError("Settings root must be a JSON object")
                    return {**self.defaults, **validated_settings(loaded)}
        except Exception as e:
            LOGGER.warning("Failed to load settings (%s), using defaults", e)
            # Backup corrupted settings file if it exists
            if self.settings_file.exists():
                backup = self.settings_file.with_suffix(self.settings_file.suffix + ".bak")
                try:
                    self.settings_file.replace(backup)
                    LOGGER.warning("Backed up corrupted settings to %s", backup)
                except OSError:
                    LOGGER.exception("Could not back up corrupt settings")
        return dict(self.defaults)

    def save(self):
        try:
            self.settings_file.parent.mkdir(parents=True, exist_ok=True)
            descriptor, temporary_name = tempfile.mkstemp(
                prefix=f".{self.settings_file.name}.",
                dir=self.settings_file.parent,
                text=True,
            )
            try:
                with os.fdopen(descriptor, "w", encoding="utf-8") as stream:
                    json.dump(self.data, stream, indent=2)
                    stream.write("\n")
                    stream.flush()
                    os.fsync(stream.fileno())
                os.replace(temporary_name, self.settings_file)
            except Exception:
                try:
                    os.unlink(temporary_name)
                except OSError:
                    pass
                raise
        except OSError:
            LOGGER.exception("Could not save settings to %s", self.settings_file)

    def get(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def set(self, key: str, value: Any):
        """Store one option after the same validation ``load`` applies; clamps like it too."""
        if key not in self.defaults:
            raise DomainError(f"Unknown setting {key!r}; known: {', '.join(sorted(self.defaults))}")
        validated = validated_settings({key: value})
        if key not in validated:
            raise DomainError(f"Invalid value for {key}: {value!r}")
        self.data[key] = validated[key]
        self.save()


def validated_settings(loaded: Mapping[str, Any]) -> Dict[str, Any]:
    """The recognised, well-typed entries of ``loaded``; numeric options are clamped."""
    validated: Dict[str, Any] = {}
    if _is_number(loaded.get("precision_bits")):
        validated["precision_bits"] = max(
            MIN_PRECISION_BITS, min(MAX_PRECISION_BITS, int(loaded["precision_bits"]))
        )
    if _is_number(loaded.get("budget")):
        validated["budget"] = max(1, min(MAX_BUDGET, int(loaded["budget"])))
    if isinstance(loaded.get("seed"), int) and not isinstance(loaded["seed"], bool):
        validated["seed"] = loaded["seed"]
    if _is_number(loaded.get("shift_points")):
        validated["shift_points"] = max(2, min(100_000, int(loaded["shift_points"])))
    if _is_number(loaded.get("refinement_depth")):
        validated["refinement_depth"] = max(0, min(1000, int(loaded["refinement_depth"])))
    if loaded.get("output_format") in OUTPUT_FORMATS:
        validated["output_format"] = loaded["output_format"]
    if _is_positive_decimal(loaded.get("tolerance")):
        validated["tolerance"] = str(loaded["tolerance"])
    steps = loaded.get("grid_steps")
    if isinstance(steps, list) and steps and all(map(_is_positive_decimal, steps)):
        validated["grid_steps"] = [str(s) for s in steps]
    return validated


def _is_number(value: Any) -> bool:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False
    return math.isfinite(value)


def _is_positive_decimal(value: Any) -> bool:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        return False
    try:
        return to_exact(value) > 0
    except (ValueError, ZeroDivisionError):
        return False


@dataclass(frozen=True)
class RunConfig:
    """Per-invocation options: stored settings, then the environment, then flags."""

    precision_bits: int = DEFAULT_PRECISION_BITS
    tolerance: str = "1e-10"
    output_format: str = "table"
    seed: int = 0
    budget: int = 10_000_000
    shift_points: int = 200
    refinement_depth: int = 40
    grid_steps: tuple[str, ...] = field(default=("0.1", "0.25", "0.5", "1"))

    def __post_init__(self):
        if self.precision_bits < MIN_PRECISION_BITS:
            raise DomainError(
                f"precision_bits must be at least {MIN_PRECISION_BITS}, got {self.precision_bits}"
            )
        if self.budget < 1:
            raise DomainError(f"budget must be positive, got {self.budget}")
        if self.output_format not in OUTPUT_FORMATS:
            raise DomainError(f"Unknown output format {self.output_format!r}")
        if not _is_positive_decimal(self.tolerance):
            raise DomainError(f"tolerance must be a positive decimal, got {self.tolerance!r}")

    @property
    def tolerance_value(self):
        return to_exact(self.tolerance)

    @classmethod
    def from_sources(
        cls,
        settings: Settings | None = None,
        environ: Mapping[str, str] | None = None,
        **overrides: Any,
    ) -> RunConfig:
        """Layer settings, ``POLYALAB_PRECISION`` and explicit flags (None means unset)."""
        data = dict(settings.data) if settings is not None else {}
        config = cls(
            precision_bits=int(data.get("precision_bits", DEFAULT_PRECISION_BITS)),
            tolerance=str(data.get("tolerance", "1e-10")),
            output_format=data.get("output_format", "table"),
            seed=int(data.get("seed", 0)),
            budget=int(data.get("budget", 10_000_000)),
            shift_points=int(data.get("shift_points", 200)),
            refinement_depth=int(data.get("refinement_depth", 40)),
            grid_steps=tuple(data.get("grid_steps", cls.grid_steps)),
        )
        environ = os.environ if environ is None else environ
        env_precision = environ.get(PRECISION_ENV_VAR)
        if env_precision:
            try:
                config = replace(config, precision_bits=int(env_precision))
            except ValueError:
                LOGGER.warning("Ignoring non-integer %s=%r", PRECISION_ENV_VAR, env_precision)
        flags = {key: value for key, value in overrides.items() if value is not None}
        return replace(config, **flags) if flags else config
