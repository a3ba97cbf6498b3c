"""Run configuration: ``key = value`` files, validation and hashing."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..augment import KINDS, AugmentConfig
from ..data import SplitSpec
from ..encoders import ENCODER_MODES, AbstractionLevelConfig, EncoderConfig, standard_config, tiny_config
from ..errors import ConfigError

POINT_COUNTS = (512, 1024, 2048)


@dataclass(frozen=True)
class RunConfig:
    task: str = "cls"
    points: int = 1024
    batch_size: int = 32
    epochs: int = 200
    downstream_epochs: int | None = None
    base_lr: float = 1e-3
    lr_step: int = 10
    lr_gamma: float = 0.5
    tau: float = 0.5
    augmentation: str = "jitter"
    sigma: float = 0.01
    clip: float = 0.05
    max_perturb_angle: float = 0.06
    renormalize_normals: bool = False
    weight_decay_pretrain: float = 1e-6
    weight_decay_downstream: float | None = None
    decoupled_decay: bool = False
    encoder_mode: str = "dual"
    widths: str = "standard"
    n1_levels: tuple[int, ...] | None = None
    k_levels: tuple[int, ...] | None = None
    num_classes: int = 2
    precision: str = "float32"
    seed: int = 0
    test_fraction: float = 0.2
    labeled_fraction: float = 1.0
    folds: int = 1
    fold: int = 0
    allow_any_points: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.task not in ("cls", "seg"):
            raise ConfigError(f"task must be cls or seg, got {self.task!r}")
        if self.points < 1 or (self.points not in POINT_COUNTS and not self.allow_any_points):
            raise ConfigError(f"points must be one of {POINT_COUNTS} (or set allow_any_points), got {self.points}")
        positive_ints = ("batch_size", "epochs", "lr_step", "num_classes", "folds")
        for key in positive_ints:
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.downstream_epochs is not None and self.downstream_epochs < 1:
            raise ConfigError("downstream_epochs must be >= 1")
        if not 0 <= self.fold < self.folds:
            raise ConfigError(f"fold must lie in [0, folds), got {self.fold} of {self.folds}")
        if self.base_lr <= 0 or not 0 < self.lr_gamma <= 1:
            raise ConfigError("base_lr must be positive and lr_gamma in (0, 1]")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.augmentation not in KINDS:
            raise ConfigError(f"augmentation must be one of {KINDS}")
        if min(self.sigma, self.clip, self.max_perturb_angle, self.weight_decay_pretrain) < 0:
            raise ConfigError("sigma, clip, max_perturb_angle and weight decays must be non-negative")
        if self.weight_decay_downstream is not None and self.weight_decay_downstream < 0:
            raise ConfigError("weight_decay_downstream must be non-negative")
        if self.encoder_mode not in ENCODER_MODES:
            raise ConfigError(f"encoder_mode must be one of {ENCODER_MODES}")
        if self.widths not in ("standard", "tiny"):
            raise ConfigError("widths must be standard or tiny")
        if self.precision not in ("float32", "float64"):
            raise ConfigError("precision must be float32 or float64")
        for key in ("n1_levels", "k_levels"):
            value = getattr(self, key)
            if value is not None and (len(value) != 2 or min(value) < 1):
                raise ConfigError(f"{key} needs two positive integers")
        try:
            SplitSpec(self.test_fraction, self.labeled_fraction, self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -------------------------------------------------------------- derived

    @property
    def downstream_decay(self) -> float:
        if self.weight_decay_downstream is not None:
            return self.weight_decay_downstream
        return 1e-6 if self.task == "cls" else 1.0

    @property
    def head_epochs(self) -> int:
        return self.downstream_epochs or self.epochs

    @property
    def dtype(self):
        import numpy as np
        return np.float32 if self.precision == "float32" else np.float64

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(self.augmentation, self.sigma, self.clip, self.max_perturb_angle,
                             self.renormalize_normals)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.test_fraction, self.labeled_fraction, self.seed, self.folds, self.fold)

    def encoder_config(self) -> EncoderConfig:
        cfg = standard_config(self.points) if self.widths == "standard" else tiny_config()
        levels = list(cfg.levels)
        for i in range(2):
            n1 = self.n1_levels[i] if self.n1_levels else levels[i].n1
            k = self.k_levels[i] if self.k_levels else levels[i].k
            levels[i] = AbstractionLevelConfig(n1, k, levels[i].mlp_widths)
        cfg = replace(cfg, levels=tuple(levels))
        cfg.validate()
        return cfg

    def canonical(self) -> str:
        return "\n".join(f"{f.name} = {_format(getattr(self, f.name))}" for f in fields(self)) + "\n"

    def hash(self) -> bytes:
        return hashlib.sha256(self.canonical().encode("utf-8")).digest()

    def with_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(name: str, text: str, default):
    text = text.strip()
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if text.lower() == "none":
        if "None" not in str(kind):
            raise ConfigError(f"{name} cannot be none")
        return None
    try:
        if "tuple" in str(kind):
            return tuple(int(v) for v in text.split(","))
        if "bool" in str(kind):
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if "float" in str(kind):
            return float(text)
        if "int" in str(kind):
            return int(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    return text


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    known = {f.name for f in fields(RunConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        changes[key] = _parse_value(key, value, getattr(base, key))
    return replace(base, **changes)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), base)
