"""FastAPI service wrapping the core package.

The CLI talks to this app in-process by default; `leafkit serve` exposes the
same endpoints over the network.  Request/response bodies are pydantic
models mirroring the plain-text experiment config, so remote callers get
structured validation errors instead of parse failures.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel as _BaseModel
from pydantic import ConfigDict, Field


class BaseModel(_BaseModel):
    model_config = ConfigDict(extra="forbid")

from . import __version__, runs
from .config import (
    ExperimentConfig,
    FrontendConfig,
    InitConfig,
    OutputConfig,
    SensitivityConfig,
    TaskConfig,
    TrainConfig,
    serialize_config,
)
from .errors import LeafkitError

app = FastAPI(title="leafkit", version=__version__)


class TaskModel(BaseModel):
    kind: str = "band4"
    sample_rate_hz: int = 16000
    duration_s: float = 0.25
    train_size: int = 128
    val_size: int = 48
    test_size: int = 48
    tone_count: int = 3
    noise_kind: str = "pink"
    noise_level: float = 0.05
    data_seed: int = 1000


class InitModel(BaseModel):
    kind: str = "mel"
    seed: int = 42
    f_min_hz: float = 60.0
    f_max_hz: float = 7800.0
    n_filters: int = 40


class FrontendModel(BaseModel):
    kernel_width: int = 401
    stride: int = 160
    lp_width: int = 401
    sigma_lp_init: float = 80.0
    pcen_alpha_init: float = 0.96
    pcen_delta_init: float = 2.0
    pcen_r_init: float = 0.5
    pcen_s_init: float = 0.04
    eps: float = 1e-6


class TrainModel(BaseModel):
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


class SensitivityModel(BaseModel):
    bins: int = 1024
    use_power: bool = False


class OutputModel(BaseModel):
    dir: str = "runs/run"


class ConfigModel(BaseModel):
    task: TaskModel = Field(default_factory=TaskModel)
    init: InitModel = Field(default_factory=InitModel)
    frontend: FrontendModel = Field(default_factory=FrontendModel)
    train: TrainModel = Field(default_factory=TrainModel)
    sensitivity: SensitivityModel = Field(default_factory=SensitivityModel)
    output: OutputModel = Field(default_factory=OutputModel)

    def to_core(self) -> ExperimentConfig:
        return ExperimentConfig(
            task=TaskConfig(**self.task.model_dump()),
            init=InitConfig(**self.init.model_dump()),
            frontend=FrontendConfig(**self.frontend.model_dump()),
            train=TrainConfig(**self.train.model_dump()),
            sensitivity=SensitivityConfig(**self.sensitivity.model_dump()),
            output=OutputConfig(**self.output.model_dump()),
        )

    @classmethod
    def from_core(cls, cfg: ExperimentConfig) -> "ConfigModel":
        return cls(
            task=TaskModel(**cfg.task.__dict__),
            init=InitModel(**cfg.init.__dict__),
            frontend=FrontendModel(**cfg.frontend.__dict__),
            train=TrainModel(**cfg.train.__dict__),
            sensitivity=SensitivityModel(**cfg.sensitivity.__dict__),
            output=OutputModel(**cfg.output.__dict__),
        )


class InitFbRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    out_dir: str | None = None
    overwrite: bool = False


class FilterRow(BaseModel):
    filter_index: int
    eta: float
    sigma_bw: float
    centre_hz: float
    fwhm_hz: float


class InitFbResponse(BaseModel):
    rows: list[FilterRow]
    csv: str
    svg: str
    files: list[str]


class TrainRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    overwrite: bool = False


class TrainResponse(BaseModel):
    run_dir: str
    epochs: int
    fixed_fb: bool
    init_kind: str
    final_val_loss: float
    final_val_accuracy: float
    best_val_accuracy: float
    files: list[str]


class AnalyzeRequest(BaseModel):
    run_dir: str
    bins: int | None = None
    use_power: bool | None = None


class AnalyzeResponse(BaseModel):
    run_dir: str
    epochs: int
    mean_final_jsd: float
    max_moving_filter: int
    per_filter_final: list[float]
    files: list[str]


class GradCheckRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    seed: int = 0
    h: float = 2e-5
    coords_per_group: int = 8
    tolerance: float = 1e-4


class GroupResult(BaseModel):
    group: str
    max_rel_err: float
    n_checked: int
    n_skipped: int
    passed: bool


class GradCheckResponse(BaseModel):
    passed: bool
    max_rel_err: float
    tolerance: float
    h: float
    groups: list[GroupResult]


class JsdRequest(BaseModel):
    p: list[float] | None = None
    q: list[float] | None = None
    filter_a: tuple[float, float] | None = None  # (eta, sigma_bw)
    filter_b: tuple[float, float] | None = None
    bins: int = 1024
    use_power: bool = False


class JsdResponse(BaseModel):
    jsd: float
    bins: int


@app.exception_handler(LeafkitError)
def leafkit_error_handler(request: Request, exc: LeafkitError):
    status = 400 if exc.category == "validation" else 500
    return JSONResponse(
        status_code=status,
        content={"error": {"type": type(exc).__name__, "message": str(exc)}},
    )


@app.get("/health")
def health():
    return runs.version_info()


@app.get("/config/default")
def default_config():
    return {"text": serialize_config(ExperimentConfig()), "config": ConfigModel()}


@app.post("/filterbank/init", response_model=InitFbResponse)
def filterbank_init(req: InitFbRequest):
    return runs.run_init_fb(req.config.to_core(), req.out_dir, req.overwrite)


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: TrainRequest):
    return runs.run_train(req.config.to_core(), req.overwrite)


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze_endpoint(req: AnalyzeRequest):
    return runs.run_analyze(req.run_dir, req.bins, req.use_power)


@app.post("/gradcheck", response_model=GradCheckResponse)
def gradcheck_endpoint(req: GradCheckRequest):
    return runs.run_grad_check(
        req.config.to_core(), seed=req.seed, h=req.h,
        coords_per_group=req.coords_per_group, tolerance=req.tolerance,
    )


@app.post("/jsd", response_model=JsdResponse)
def jsd_endpoint(req: JsdRequest):
    return runs.run_jsd(
        filter_a=req.filter_a, filter_b=req.filter_b, p=req.p, q=req.q,
        bins=req.bins, use_power=req.use_power,
    )
