"""Experiment configuration: plain-text `section.key = value` files.

Every field has a default, unknown keys are rejected, and serialization
round-trips losslessly (floats printed with shortest round-trip repr).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .initializers import KINDS, InitStrategy
from .utils import fmt_float

TASK_KINDS = ("band2", "band4")


@dataclass
class TaskConfig:
    kind: str = "band4"
    sample_rate_hz: int = 16000
    duration_s: float = 0.25
    train_size: int = 96
    val_size: int = 40
    test_size: int = 40
    tone_count: int = 3
    noise_kind: str = "pink"
    noise_level: float = 0.05
    data_seed: int = 1000


@dataclass
class InitConfig:
    kind: str = "mel"
    seed: int = 42
    f_min_hz: float = 60.0
    f_max_hz: float = 7800.0
    n_filters: int = 40

    def strategy(self) -> InitStrategy:
        return InitStrategy(
            kind=self.kind, n_filters=self.n_filters,
            f_min_hz=self.f_min_hz, f_max_hz=self.f_max_hz, seed=self.seed,
        )


@dataclass
class FrontendConfig:
    kernel_width: int = 401
    stride: int = 160
    lp_width: int = 401
    sigma_lp_init: float = 80.0
    pcen_alpha_init: float = 0.96
    pcen_delta_init: float = 2.0
    pcen_r_init: float = 0.5
    pcen_s_init: float = 0.04
    eps: float = 1e-6


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    lr_max: float = 0.001
    lr_min: float = 1e-05
    restart_period_epochs: int = 3
    seed: int = 1234
    fixed_fb: bool = False
    hidden_units: int = 64
    patience: int = 1
    plateau_rel_tol: float = 0.01
    snr_floor_db: float = -10.0
    snr_cap_db: float = 30.0
    snr_step_db: float = 5.0


@dataclass
class SensitivityConfig:
    bins: int = 1024
    use_power: bool = False


@dataclass
class OutputConfig:
    dir: str = "runs/run"


@dataclass
class ExperimentConfig:
    task: TaskConfig = field(default_factory=TaskConfig)
    init: InitConfig = field(default_factory=InitConfig)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self):
        if self.task.kind not in TASK_KINDS:
            raise ConfigError(f"task.kind must be one of {TASK_KINDS}")
        self.init.strategy()  # SpecError on bad kind, filter count or range
        if self.task.sample_rate_hz <= 0 or self.task.duration_s <= 0:
            raise ConfigError("task.sample_rate_hz and task.duration_s must be positive")
        if self.init.f_max_hz > self.task.sample_rate_hz / 2:
            raise ConfigError("init.f_max_hz exceeds Nyquist")
        if self.frontend.kernel_width % 2 == 0 or self.frontend.lp_width % 2 == 0:
            raise ConfigError("kernel_width and lp_width must be odd")
        if self.frontend.stride < 1:
            raise ConfigError("frontend.stride must be >= 1")
        if self.train.epochs < 1 or self.train.batch_size < 1:
            raise ConfigError("train.epochs and train.batch_size must be >= 1")
        if self.train.lr_max <= 0 or self.train.lr_min < 0:
            raise ConfigError("learning rates must be positive")
        if self.sensitivity.bins < 64:
            raise ConfigError("sensitivity.bins must be >= 64")
        return self


_SECTIONS = {
    "task": TaskConfig,
    "init": InitConfig,
    "frontend": FrontendConfig,
    "train": TrainConfig,
    "sensitivity": SensitivityConfig,
    "output": OutputConfig,
}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)


def _parse_value(raw: str, target_type, key: str):
    raw = raw.strip()
    try:
        if target_type is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {target_type.__name__}") from exc


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = ["# leafkit config v1"]
    for section, cls in _SECTIONS.items():
        part = getattr(cfg, section)
        for f in fields(cls):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(part, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    field_types = {
        section: {f.name: f.type for f in fields(cls)} for section, cls in _SECTIONS.items()
    }
    type_map = {"int": int, "float": float, "bool": bool, "str": str}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} missing a section prefix")
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        if name not in field_types[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        ftype = field_types[section][name]
        target = type_map.get(ftype if isinstance(ftype, str) else ftype.__name__, str)
        setattr(getattr(cfg, section), name, _parse_value(raw, target, key))
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        fh.write(serialize_config(cfg))


def with_overrides(cfg: ExperimentConfig, seed=None, out_dir=None, fixed_fb=None,
                   init_kind=None) -> ExperimentConfig:
    """Functional copies for the common CLI overrides."""
    cfg = replace(
        cfg,
        task=replace(cfg.task), init=replace(cfg.init), frontend=replace(cfg.frontend),
        train=replace(cfg.train), sensitivity=replace(cfg.sensitivity),
        output=replace(cfg.output),
    )
    if seed is not None:
        cfg.train.seed = int(seed)
    if out_dir is not None:
        cfg.output.dir = str(out_dir)
    if fixed_fb is not None:
        cfg.train.fixed_fb = bool(fixed_fb)
    if init_kind is not None:
        cfg.init.kind = str(init_kind)
    return cfg
