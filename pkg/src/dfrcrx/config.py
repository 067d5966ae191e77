"""Experiment configuration: YAML schema, validation, defaults.

One nested YAML file drives every CLI command; unknown keys are rejected at
each level so typos fail loudly before any compute.  The schema is
documented in the repository README.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .errors import ConfigError
from .radarsim import SceneConfig, TargetSpec
from .waveform import DPSK, MSK, ModulationParams

KNOWN_DESIGNS = ("coherent-linear", "coherent-circular", "baseline-LS",
                 "baseline-penalized")


def _build(cls, mapping, where: str):
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class ModulationConfig:
    kind: str = DPSK
    n_chips: int = 30
    chip_duration: float = 1e-3
    sample_rate: float = 3000.0
    carrier_freq: float | None = None

    def __post_init__(self):
        if self.kind not in (DPSK, MSK):
            raise ConfigError(f"modulation.kind must be one of ({DPSK}, {MSK})")

    def params(self) -> ModulationParams:
        return ModulationParams(n_chips=self.n_chips,
                                chip_duration=self.chip_duration,
                                sample_rate=self.sample_rate,
                                carrier_freq=self.carrier_freq)


@dataclass
class AlphabetConfig:
    size: int = 4
    seed: int = 7


@dataclass
class FilterConfig:
    length: int | None = None
    peak_index: int | None = None
    designs: list = field(default_factory=lambda: ["coherent-linear",
                                                   "coherent-circular",
                                                   "baseline-LS"])
    penalty_mu: float = 100.0
    penalty_iters: int = 50

    def __post_init__(self):
        bad = [d for d in self.designs if d not in KNOWN_DESIGNS]
        if bad:
            raise ConfigError(f"unknown designs {bad}; allowed: {list(KNOWN_DESIGNS)}")
        if not self.designs:
            raise ConfigError("filters.designs must not be empty")


@dataclass
class SceneSection:
    n_range_gates: int = 450
    n_pulses: int = 50
    t_pri: float = 0.04
    wavelength: float = 0.03
    gate_spacing: float = 50.0
    cnr_db: float = 50.0
    snr_db: float = 10.0
    clutter_doppler_half_width: float = 0.1
    clutter_doppler_on_bin: bool = True
    noise: bool = True
    targets: list = field(default_factory=lambda: [
        {"range_cell": 225, "normalized_doppler": 0.3},
        {"range_cell": 228, "normalized_doppler": 0.3},
        {"range_cell": 221, "normalized_doppler": 0.3},
        {"range_cell": 235, "normalized_doppler": -0.3},
        {"range_cell": 215, "normalized_doppler": -0.25},
        {"range_cell": 245, "normalized_doppler": 0.2},
    ])

    def scene_config(self, pulse_len: int) -> SceneConfig:
        targets = []
        for i, spec in enumerate(self.targets):
            if not isinstance(spec, dict) or set(spec) != {"range_cell",
                                                           "normalized_doppler"}:
                raise ConfigError(
                    f"scene.targets[{i}] must have exactly the keys "
                    "range_cell and normalized_doppler"
                )
            targets.append(TargetSpec(int(spec["range_cell"]),
                                      float(spec["normalized_doppler"])))
        return SceneConfig(
            pulse_len=pulse_len,
            n_range_gates=self.n_range_gates,
            n_pulses=self.n_pulses,
            t_pri=self.t_pri,
            wavelength=self.wavelength,
            gate_spacing=self.gate_spacing,
            cnr_db=float(self.cnr_db),
            snr_db=float(self.snr_db),
            targets=targets,
            clutter_doppler_half_width=self.clutter_doppler_half_width,
            clutter_doppler_on_bin=self.clutter_doppler_on_bin,
            noise=self.noise,
        )


@dataclass
class DetectionConfig:
    exclusion: float = 0.1
    threshold_db: float = 10.0


@dataclass
class RadarConfig:
    seed: int = 2025
    mode: str | None = None  # filter application mode override


@dataclass
class PdConfig:
    snr_grid_db: list = field(default_factory=lambda: [-15.0, -10.0, -5.0,
                                                       0.0, 5.0, 10.0])
    trials: int = 500
    seed: int = 404
    cnr_db: float = 70.0
    target: dict = field(default_factory=lambda: {"range_cell": 225,
                                                  "normalized_doppler": 0.3})


@dataclass
class SerConfig:
    snr_grid_db: list = field(default_factory=lambda: list(range(-6, 17, 2)))
    trials: int = 10000
    seed: int = 505


@dataclass
class ExperimentConfig:
    modulation: ModulationConfig = field(default_factory=ModulationConfig)
    alphabet: AlphabetConfig = field(default_factory=AlphabetConfig)
    filters: FilterConfig = field(default_factory=FilterConfig)
    scene: SceneSection = field(default_factory=SceneSection)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    radar: RadarConfig = field(default_factory=RadarConfig)
    pd: PdConfig = field(default_factory=PdConfig)
    ser: SerConfig = field(default_factory=SerConfig)
    output_dir: str = "out"
    figures: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "modulation": ModulationConfig,
    "alphabet": AlphabetConfig,
    "filters": FilterConfig,
    "scene": SceneSection,
    "detection": DetectionConfig,
    "radar": RadarConfig,
    "pd": PdConfig,
    "ser": SerConfig,
}


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError("top level of the config must be a mapping")
    allowed = set(_SECTIONS) | {"output_dir", "figures"}
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build(cls, mapping.get(name), name)
    kwargs["output_dir"] = str(mapping.get("output_dir", "out"))
    kwargs["figures"] = bool(mapping.get("figures", True))
    cfg = ExperimentConfig(**kwargs)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: ExperimentConfig) -> None:
    params = cfg.modulation.params()  # raises on bad timing
    if cfg.alphabet.size < 1 or cfg.alphabet.size & (cfg.alphabet.size - 1):
        raise ConfigError("alphabet.size must be a power of two")
    if cfg.filters.length is not None and cfg.filters.length < 1:
        raise ConfigError("filters.length must be >= 1")
    if cfg.pd.trials < 1 or cfg.ser.trials < 1:
        raise ConfigError("pd.trials and ser.trials must be >= 1")
    for spec in cfg.scene.targets:
        cell = spec.get("range_cell") if isinstance(spec, dict) else None
        if cell is None or not 0 <= int(cell) < cfg.scene.n_range_gates:
            raise ConfigError(
                f"scene target {spec!r} outside [0, {cfg.scene.n_range_gates})"
            )
    if not np.isfinite(cfg.scene.snr_db):
        raise ConfigError("scene.snr_db must be finite")
    del params


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as handle:
            raw = yaml.safe_load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    return config_from_mapping(raw)
