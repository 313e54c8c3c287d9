"""Run configuration: an INI file plus ``section.key=value`` overrides.

Every component seed is derived from the single ``[run] seed`` so a whole
workflow replays from one number.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import GaConfig, VqmmConfig
from .dsp import FrameSpec, MfccConfig, feature_config_hash
from .frame_model import RfConfig
from .seeding import derive_seed
from .track_model import BoostConfig

CACHE_ENV = "SICTAG_CACHE_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    manifest: str = "manifest.csv"
    cache_dir: str = "cache"
    model_dir: str = "models"
    output_dir: str = "out"


@dataclass
class Features:
    sample_rate: int = 22050
    delta_window: int = 2
    voice_threshold: float = 0.5
    # stage-2 training vectors come from forests that never saw the track; 0 = in-sample
    cross_fit_folds: int = 3


@dataclass
class Experiment:
    k: int = 5
    n_repetitions: int = 8


@dataclass
class RunConfig:
    seed: int = 0
    jobs: int = 1
    paths: Paths = field(default_factory=Paths)
    frame: FrameSpec = field(default_factory=FrameSpec)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    features: Features = field(default_factory=Features)
    rf: RfConfig = field(default_factory=RfConfig)
    boost: BoostConfig = field(default_factory=BoostConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    vqmm: VqmmConfig = field(default_factory=VqmmConfig)
    experiment: Experiment = field(default_factory=Experiment)

    # component configs with seeds fanned out from the run seed
    def rf_config(self) -> RfConfig:
        return dataclasses.replace(self.rf, seed=derive_seed(self.seed, "rf") % 2**31)

    def boost_config(self) -> BoostConfig:
        return dataclasses.replace(self.boost, seed=derive_seed(self.seed, "boost") % 2**31)

    def ga_config(self) -> GaConfig:
        return dataclasses.replace(self.ga, seed=derive_seed(self.seed, "ga") % 2**31)

    def vqmm_config(self) -> VqmmConfig:
        return dataclasses.replace(self.vqmm, seed=derive_seed(self.seed, "vqmm") % 2**31)

    def rca_seed(self) -> int:
        return derive_seed(self.seed, "rca") % 2**31

    def experiment_seed(self) -> int:
        return derive_seed(self.seed, "experiment") % 2**31

    @property
    def feature_hash(self) -> str:
        return feature_config_hash(self.frame, self.mfcc, self.features.sample_rate,
                                   self.features.delta_window)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def resolve_paths(self, base: str | os.PathLike | None = None) -> Paths:
        base = Path(base or ".")
        cache = os.environ.get(CACHE_ENV) or self.paths.cache_dir

        def res(p):
            p = Path(p)
            return str(p if p.is_absolute() else base / p)

        return Paths(res(self.paths.manifest), res(cache), res(self.paths.model_dir),
                     res(self.paths.output_dir))


_SECTIONS = ("paths", "frame", "mfcc", "features", "rf", "boost", "ga", "vqmm", "experiment")


def _coerce(current, text: str, where: str):
    text = text.strip()
    try:
        if isinstance(current, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(float(v) for v in text.replace(",", " ").split())
        if current is None:
            if text.lower() in ("", "none"):
                return None
            return float(text) if any(c in text for c in ".eE") else int(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r}") from None
    return text


def apply_setting(cfg: RunConfig, key: str, value: str) -> RunConfig:
    """Apply ``section.key=value`` (or ``seed`` / ``jobs`` at top level)."""
    if "." not in key:
        if key not in ("seed", "jobs"):
            raise ConfigError(f"unknown setting {key!r}")
        return dataclasses.replace(cfg, **{key: _coerce(getattr(cfg, key), value, key)})
    section, name = key.split(".", 1)
    if section == "run":
        return apply_setting(cfg, name, value)
    if section not in _SECTIONS:
        raise ConfigError(f"unknown section {section!r}")
    sub = getattr(cfg, section)
    names = {f.name for f in dataclasses.fields(sub)}
    if name not in names:
        raise ConfigError(f"unknown setting {key!r}")
    try:
        new_sub = dataclasses.replace(sub, **{name: _coerce(getattr(sub, name), value, key)})
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return dataclasses.replace(cfg, **{section: new_sub})


def load_config(path: str | os.PathLike | None = None, overrides=()) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            for key, value in parser.items(section):
                cfg = apply_setting(cfg, key if section == "run" else f"{section}.{key}", value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        cfg = apply_setting(cfg, key.strip(), value)
    return cfg


def write_config(cfg: RunConfig, path: str | os.PathLike) -> None:
    parser = configparser.ConfigParser()
    parser["run"] = {"seed": str(cfg.seed), "jobs": str(cfg.jobs)}
    for section in _SECTIONS:
        sub = dataclasses.asdict(getattr(cfg, section))
        parser[section] = {k: ("none" if v is None else " ".join(map(str, v)) if isinstance(v, (list, tuple))
                               else str(v)) for k, v in sub.items() if k != "seed"}
    with open(path, "w") as fh:
        parser.write(fh)


def config_from_dict(doc: dict) -> RunConfig:
    """Rebuild a config from ``RunConfig.to_dict()`` output (as embedded in model documents)."""
    cfg = RunConfig()
    for key in ("seed", "jobs"):
        if key in doc:
            cfg = apply_setting(cfg, key, str(doc[key]))
    for section in _SECTIONS:
        for name, value in (doc.get(section) or {}).items():
            if section != "paths" and name == "seed":
                continue
            if isinstance(value, (list, tuple)):
                text = " ".join(map(str, value))
            else:
                text = "none" if value is None else str(value)
            cfg = apply_setting(cfg, f"{section}.{name}", text)
    return cfg
