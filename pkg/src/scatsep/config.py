"""Experiment configuration: INI-style files <-> dataclasses.

The format is flat key = value pairs inside four sections ([scenario],
[methods], [search], [output]); every key has a default matching the
headline simulation study, so an empty file is a valid configuration.
Parsing then serializing then parsing again yields an identical
configuration.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

from .scenario import (
    DEFAULT_EXPONENTS,
    MethodSpec,
    MicrophoneLayout,
    Scenario,
    default_methods,
)

__all__ = ["SliceSpec", "OutputSpec", "ExperimentConfig", "ConfigError"]


class ConfigError(ValueError):
    """Invalid configuration file or values."""


@dataclass(frozen=True)
class SliceSpec:
    """Axis-aligned field slice: plane, full extent and lattice resolution."""

    axis: str = "z"
    value: float = 0.0
    extent: float = 1.4
    resolution: float = 0.01

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ConfigError(f"slice axis must be x, y or z, got '{self.axis}'")
        if self.resolution <= 0.0:
            raise ConfigError("slice resolution must be positive")
        if self.extent <= 0.0:
            raise ConfigError("slice extent must be positive")

    def points_per_axis(self) -> int:
        return int(round(self.extent / self.resolution)) + 1


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    slice: SliceSpec = field(default_factory=SliceSpec)
    heatmap: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    methods: tuple[MethodSpec, ...] = field(
        default_factory=lambda: tuple(default_methods())
    )
    exponents: tuple[int, ...] = DEFAULT_EXPONENTS
    output: OutputSpec = field(default_factory=OutputSpec)

    def violations(self) -> list[str]:
        problems = self.scenario.violations()
        if not self.methods:
            problems.append("methods block is empty")
        if not self.exponents:
            problems.append("regularization exponent range is empty")
        if self.output.slice.extent < 2.0 * self.scenario.region_radius:
            problems.append(
                f"slice extent {self.output.slice.extent} m does not cover the "
                f"target region (diameter {2.0 * self.scenario.region_radius} m)"
            )
        return problems


_SCHEMA = {
    "scenario": (
        "region_radius", "scatterer_radius", "source", "snr_db", "frequencies",
        "sound_speed", "noise_seed", "grid_spacing", "include_scatterer_interior",
        "mic_radii", "mic_count_per_shell", "pointset_provider", "pointset_path",
        "second_pointset_path", "pointset_seed",
    ),
    "methods": ("enabled",),
    "search": ("exponent_min", "exponent_max"),
    "output": ("directory", "slice_axis", "slice_value", "slice_extent",
               "slice_resolution", "heatmap"),
}


def _parse_floats(text: str, count: int | None, key: str) -> tuple[float, ...]:
    parts = text.replace(",", " ").split()
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    if count is not None and len(values) != count:
        raise ConfigError(f"{key}: expected {count} values, got {len(values)}")
    return values


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got '{text}'")


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")

    def get(section, key, fallback=None):
        return parser.get(section, key, fallback=fallback)

    defaults = Scenario()
    sec = "scenario"
    snr_text = get(sec, "snr_db", str(defaults.snr_db))
    snr_db = None if snr_text.strip().lower() in ("inf", "none", "") else float(snr_text)
    layout = MicrophoneLayout(
        radii=_parse_floats(get(sec, "mic_radii", "0.5 0.55"), 2, "mic_radii"),
        count_per_shell=int(get(sec, "mic_count_per_shell", "25")),
        provider=get(sec, "pointset_provider", "tdesign").strip(),
        pointset_path=(get(sec, "pointset_path", "").strip() or None),
        second_pointset_path=(get(sec, "second_pointset_path", "").strip() or None),
        pointset_seed=int(get(sec, "pointset_seed", "0")),
    )
    try:
        scenario = Scenario(
            region_radius=float(get(sec, "region_radius", str(defaults.region_radius))),
            scatterer_radius=float(
                get(sec, "scatterer_radius", str(defaults.scatterer_radius))
            ),
            source=_parse_floats(get(sec, "source", "2.0 2.0 0.0"), 3, "source"),
            snr_db=snr_db,
            frequencies=_parse_floats(
                get(sec, "frequencies",
                    " ".join(str(f) for f in defaults.frequencies)),
                None, "frequencies",
            ),
            sound_speed=float(get(sec, "sound_speed", str(defaults.sound_speed))),
            noise_seed=int(get(sec, "noise_seed", str(defaults.noise_seed))),
            grid_spacing=float(get(sec, "grid_spacing", str(defaults.grid_spacing))),
            include_scatterer_interior=_parse_bool(
                get(sec, "include_scatterer_interior", "true"),
                "include_scatterer_interior",
            ),
            layout=layout,
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid [scenario] value: {exc}") from exc

    enabled = get("methods", "enabled", " ".join(m.label for m in default_methods()))
    try:
        methods = tuple(
            MethodSpec.from_label(label)
            for label in enabled.replace(",", " ").split()
        )
    except ValueError as exc:
        raise ConfigError(f"[methods] enabled: {exc}") from exc

    try:
        lo = int(get("search", "exponent_min", str(min(DEFAULT_EXPONENTS))))
        hi = int(get("search", "exponent_max", str(max(DEFAULT_EXPONENTS))))
    except ValueError as exc:
        raise ConfigError(f"invalid [search] value: {exc}") from exc
    if hi < lo:
        raise ConfigError("[search] exponent_max must be >= exponent_min")

    try:
        out = OutputSpec(
            directory=get("output", "directory", "out"),
            slice=SliceSpec(
                axis=get("output", "slice_axis", "z").strip(),
                value=float(get("output", "slice_value", "0.0")),
                extent=float(get("output", "slice_extent", "1.4")),
                resolution=float(get("output", "slice_resolution", "0.01")),
            ),
            heatmap=_parse_bool(get("output", "heatmap", "false"), "heatmap"),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid [output] value: {exc}") from exc

    return ExperimentConfig(
        scenario=scenario,
        methods=methods,
        exponents=tuple(range(lo, hi + 1)),
        output=out,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc


def serialize_config(config: ExperimentConfig) -> str:
    """Configuration -> INI text; parse(serialize(c)) == c."""
    sc = config.scenario
    lay = sc.layout
    parser = configparser.ConfigParser(interpolation=None)
    parser["scenario"] = {
        "region_radius": repr(sc.region_radius),
        "scatterer_radius": repr(sc.scatterer_radius),
        "source": " ".join(repr(v) for v in sc.source),
        "snr_db": "inf" if sc.snr_db is None else repr(sc.snr_db),
        "frequencies": " ".join(repr(f) for f in sc.frequencies),
        "sound_speed": repr(sc.sound_speed),
        "noise_seed": str(sc.noise_seed),
        "grid_spacing": repr(sc.grid_spacing),
        "include_scatterer_interior": str(sc.include_scatterer_interior).lower(),
        "mic_radii": " ".join(repr(v) for v in lay.radii),
        "mic_count_per_shell": str(lay.count_per_shell),
        "pointset_provider": lay.provider,
        "pointset_path": lay.pointset_path or "",
        "second_pointset_path": lay.second_pointset_path or "",
        "pointset_seed": str(lay.pointset_seed),
    }
    parser["methods"] = {"enabled": " ".join(m.label for m in config.methods)}
    parser["search"] = {
        "exponent_min": str(min(config.exponents)),
        "exponent_max": str(max(config.exponents)),
    }
    parser["output"] = {
        "directory": config.output.directory,
        "slice_axis": config.output.slice.axis,
        "slice_value": repr(config.output.slice.value),
        "slice_extent": repr(config.output.slice.extent),
        "slice_resolution": repr(config.output.slice.resolution),
        "heatmap": str(config.output.heatmap).lower(),
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def with_overrides(config: ExperimentConfig, out_dir=None, seed=None) -> ExperimentConfig:
    """CLI-flag overrides applied to a parsed configuration."""
    if out_dir is not None:
        config = replace(config, output=replace(config.output, directory=str(out_dir)))
    if seed is not None:
        config = replace(config, scenario=replace(config.scenario, noise_seed=int(seed)))
    return config
