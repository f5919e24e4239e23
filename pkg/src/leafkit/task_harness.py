"""Desk-scale classification tasks and the training loop.

band2 is a VAD-like binary task (tones-in-band vs. pure noise); band4 is a
BSID-like 4-way which-band task.  Clips are synthesized deterministically
from per-item seeds, normalized to -6 dBFS, then augmented each epoch with
additive noise at an SNR drawn from the curriculum's currently available
values.  The curriculum starts with a -10 dB ceiling and raises it by 5 dB
whenever validation loss plateaus, capped at +30 dB.

The training loop owns all mutable state; every random draw is keyed on
(config seed, epoch, stream), so identical configs give bit-identical runs.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .audio_io import AudioClip, SceneSpec, make_noise, mix_at_snr, normalize_dbfs, synthesize_scene
from .backend import backend_forward, softmax_cross_entropy
from .config import ExperimentConfig, serialize_config
from .diffengine import (
    AdamState,
    ModelSpec,
    ParamVector,
    adam_step,
    backward,
    cosine_annealing_lr,
    init_param_vector,
    save_checkpoint,
)
from .errors import FormatError, NumericsError, SpecError
from .filterbank import to_csv as filterbank_to_csv
from .frontend import forward_array
from .initializers import build_filterbank
from .utils import fmt_float, parallel_map, rng_for

TASK_BANDS = {
    # VAD-like: noise-only class vs. speech-band tones
    "band2": (None, (300.0, 3400.0)),
    # BSID-like: which of four log-spaced bands
    "band4": ((250.0, 700.0), (700.0, 1800.0), (1800.0, 4000.0), (4000.0, 7600.0)),
}
SPLITS = ("train", "val", "test")
METRICS_HEADER = "epoch,split,loss,accuracy,f1,auc,lr,max_snr_db"


@dataclass(frozen=True)
class SceneItem:
    spec: SceneSpec
    seed: int
    label: int


@dataclass
class Dataset:
    task: str
    n_classes: int
    splits: dict  # split name -> list[SceneItem]

    def items(self, split: str):
        if split not in self.splits:
            raise SpecError(f"unknown split {split!r}")
        return self.splits[split]


def make_dataset(task: str, sizes, seed: int, sample_rate_hz: int = 16000,
                 duration_s: float = 0.25, tone_count: int = 3,
                 noise_kind: str = "pink", noise_level: float = 0.05) -> Dataset:
    """Deterministic dataset of scene recipes with disjoint per-split seeds.

    Item seeds are consecutive inside a split block whose base is a multiple
    of the class count, so labels (= seed mod C) cycle and stay balanced
    within one clip.
    """
    if task not in TASK_BANDS:
        raise SpecError(f"unknown task {task!r}")
    bands = TASK_BANDS[task]
    C = len(bands)
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 3 or any(s < C * 10 for s in sizes):
        raise SpecError(f"each split needs at least {C * 10} items, got {sizes}")
    spec = SceneSpec(
        class_bands=bands, sample_rate_hz=sample_rate_hz, duration_s=duration_s,
        tone_count=tone_count, noise_kind=noise_kind, noise_level=noise_level,
    )
    splits = {}
    for split_idx, (split, size) in enumerate(zip(SPLITS, sizes)):
        # base is a multiple of 4 * 2**26, hence of C for C in {2, 4}
        base = ((seed % 2**20) * 4 + split_idx) * 2**26
        items = []
        for i in range(size):
            item_seed = base + i
            items.append(SceneItem(spec, item_seed, item_seed % C))
        splits[split] = items
    return Dataset(task, C, splits)


def synthesize_item(item: SceneItem, target_dbfs: float = -6.0):
    """Clean clip for one item, normalized to the corpus level."""
    clip, label, mask = synthesize_scene(item.spec, item.seed)
    return normalize_dbfs(clip, target_dbfs), label, mask


# ---------------------------------------------------------------------------
# metrics


def evaluate_metrics(outputs, labels) -> dict:
    """Accuracy, macro F1 and AUC from per-class scores.

    AUC is the Mann-Whitney rank statistic; with more than two classes it is
    the one-vs-rest macro average.  Metrics undefined for the label set
    (single class present) are reported as None rather than raised.
    """
    scores = np.asarray(outputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if scores.ndim != 2 or len(labels) != scores.shape[0]:
        raise SpecError("outputs must be (B, C) with one label per row")
    C = scores.shape[1]
    if C < 2:
        raise SpecError("need at least two classes")
    predictions = scores.argmax(axis=1)
    accuracy = float(np.mean(predictions == labels))

    present = np.unique(labels)
    if len(present) < 2:
        return {"accuracy": accuracy, "f1": None, "auc": None}

    f1_per_class = []
    for c in range(C):
        tp = int(np.sum((predictions == c) & (labels == c)))
        fp = int(np.sum((predictions == c) & (labels != c)))
        fn = int(np.sum((predictions != c) & (labels == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1_per_class.append(
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    f1 = float(np.mean(f1_per_class))

    aucs = []
    for c in range(C) if C > 2 else (1,):
        pos = labels == c
        n_pos, n_neg = int(pos.sum()), int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = rankdata(scores[:, c])
        u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
        aucs.append(u / (n_pos * n_neg))
    auc = float(np.mean(aucs)) if aucs else None
    return {"accuracy": accuracy, "f1": f1, "auc": auc}


# ---------------------------------------------------------------------------
# adaptive SNR curriculum


@dataclass(frozen=True)
class SnrCurriculum:
    max_snr_db: float = -10.0
    floor_db: float = -10.0
    cap_db: float = 30.0
    step_db: float = 5.0
    patience: int = 1
    rel_tol: float = 0.01
    best_loss: float = math.inf
    plateau_count: int = 0

    def available_snrs(self) -> np.ndarray:
        return np.arange(self.floor_db, self.max_snr_db + 1e-9, self.step_db)


def adaptive_snr_update(curriculum: SnrCurriculum, val_loss_history) -> SnrCurriculum:
    """Raise the SNR ceiling by step_db after `patience` non-improving epochs.

    Improvement means beating the best loss so far by more than rel_tol
    (relative); the plateau counter resets on every increment.  The ceiling
    never decreases and never exceeds cap_db.
    """
    if len(val_loss_history) == 0:
        raise SpecError("val_loss_history must be nonempty")
    loss = float(val_loss_history[-1])
    if loss < curriculum.best_loss * (1.0 - curriculum.rel_tol):
        return replace(curriculum, best_loss=loss, plateau_count=0)
    plateau = curriculum.plateau_count + 1
    if plateau >= curriculum.patience and curriculum.max_snr_db < curriculum.cap_db:
        return replace(
            curriculum,
            max_snr_db=min(curriculum.max_snr_db + curriculum.step_db, curriculum.cap_db),
            plateau_count=0,
        )
    return replace(curriculum, plateau_count=plateau)


# ---------------------------------------------------------------------------
# training


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    loss: float
    accuracy: float
    f1: float | None
    auc: float | None
    lr: float
    max_snr_db: float


@dataclass
class TrainingRun:
    run_dir: Path
    metrics: list
    snapshots: list          # per-epoch GaborFilterbank, entry 0 = init
    params: ParamVector
    completed: bool

    def val_accuracy(self, epoch: int = -1) -> float:
        rows = [m for m in self.metrics if m.split == "val"]
        return rows[epoch].accuracy

    def best_val_accuracy(self) -> float:
        return max(m.accuracy for m in self.metrics if m.split == "val")


def metrics_to_csv(rows) -> str:
    out = io.StringIO()
    out.write(METRICS_HEADER + "\n")
    for m in rows:
        f1 = "" if m.f1 is None else fmt_float(m.f1)
        auc = "" if m.auc is None else fmt_float(m.auc)
        out.write(
            f"{m.epoch},{m.split},{fmt_float(m.loss)},{fmt_float(m.accuracy)},"
            f"{f1},{auc},{fmt_float(m.lr)},{fmt_float(m.max_snr_db)}\n"
        )
    return out.getvalue()


def metrics_from_csv(text: str):
    rows = []
    header_seen = False
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != METRICS_HEADER:
                raise FormatError(f"unexpected metrics header {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise FormatError(f"bad metrics row {line!r}")
        rows.append(
            EpochMetrics(
                epoch=int(parts[0]), split=parts[1], loss=float(parts[2]),
                accuracy=float(parts[3]),
                f1=None if parts[4] == "" else float(parts[4]),
                auc=None if parts[5] == "" else float(parts[5]),
                lr=float(parts[6]), max_snr_db=float(parts[7]),
            )
        )
    if not header_seen:
        raise FormatError("metrics CSV missing header")
    return rows


def _augment(clips, masks, curriculum: SnrCurriculum, rng: np.random.Generator):
    """Additive noise at a curriculum SNR; noise-only clips pass through."""
    snrs = curriculum.available_snrs()
    out = []
    for clip, mask in zip(clips, masks):
        if not mask.any():
            out.append(clip.samples)
            continue
        snr = float(rng.choice(snrs))
        kind = "white" if rng.random() < 0.5 else "pink"
        noise = AudioClip(make_noise(kind, len(clip.samples), rng), clip.sample_rate_hz)
        out.append(mix_at_snr(clip, noise, snr, mask).samples)
    return np.stack(out)


def _forward_logits(x: np.ndarray, pv: ParamVector, batch_size: int = 16):
    chunks = []
    fp = pv.frontend_params()
    model = pv.backend_model()
    for start in range(0, x.shape[0], batch_size):
        features = forward_array(x[start : start + batch_size], fp).mean(axis=2)
        chunks.append(backend_forward(model, features)[0])
    return np.vstack(chunks)


def model_spec_for(cfg: ExperimentConfig, n_classes: int) -> ModelSpec:
    return ModelSpec(
        n_filters=cfg.init.n_filters,
        kernel_width=cfg.frontend.kernel_width,
        lp_width=cfg.frontend.lp_width,
        stride=cfg.frontend.stride,
        fs_hz=cfg.task.sample_rate_hz,
        n_hidden=cfg.train.hidden_units,
        n_classes=n_classes,
        eps=cfg.frontend.eps,
    )


def dataset_for(cfg: ExperimentConfig) -> Dataset:
    return make_dataset(
        cfg.task.kind,
        (cfg.task.train_size, cfg.task.val_size, cfg.task.test_size),
        cfg.task.data_seed,
        sample_rate_hz=cfg.task.sample_rate_hz,
        duration_s=cfg.task.duration_s,
        tone_count=cfg.task.tone_count,
        noise_kind=cfg.task.noise_kind,
        noise_level=cfg.task.noise_level,
    )


def train(dataset: Dataset, cfg: ExperimentConfig, run_dir) -> TrainingRun:
    """Run the full training loop, writing the TrainingRun directory.

    Layout: config.cfg copy, snapshots/epoch_NNNN.csv (epoch 0 = the
    initialization), checkpoints/, metrics.csv, MANIFEST.  In fixed_fb mode
    the filterbank gradient slices are zeroed before every update, so the
    snapshots stay bit-identical while PCEN and the rest keep training.
    """
    cfg.validate()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "snapshots").mkdir(exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)
    (run_dir / "config.cfg").write_text(serialize_config(cfg))

    fs = cfg.task.sample_rate_hz
    mspec = model_spec_for(cfg, dataset.n_classes)
    fb0 = build_filterbank(cfg.init.strategy(), fs, cfg.frontend.kernel_width)
    pv = init_param_vector(
        fb0, mspec,
        sigma_lp_init=cfg.frontend.sigma_lp_init,
        pcen_init=(cfg.frontend.pcen_alpha_init, cfg.frontend.pcen_delta_init,
                   cfg.frontend.pcen_r_init, cfg.frontend.pcen_s_init),
        backend_seed=cfg.train.seed,
    )
    adam = AdamState.zeros(len(pv.values))
    curriculum = SnrCurriculum(
        max_snr_db=cfg.train.snr_floor_db, floor_db=cfg.train.snr_floor_db,
        cap_db=cfg.train.snr_cap_db, step_db=cfg.train.snr_step_db,
        patience=cfg.train.patience, rel_tol=cfg.train.plateau_rel_tol,
    )

    train_items = dataset.items("train")
    val_items = dataset.items("val")
    train_clean = parallel_map(synthesize_item, train_items)
    val_clean = parallel_map(synthesize_item, val_items)
    train_labels = np.array([label for _, label, _ in train_clean])
    val_labels = np.array([label for _, label, _ in val_clean])

    steps_per_epoch = math.ceil(len(train_items) / cfg.train.batch_size)
    period = max(1, cfg.train.restart_period_epochs * steps_per_epoch)
    slices, _ = mspec.layout()

    def snapshot(epoch: int, bank):
        text = filterbank_to_csv(bank, fs, header_comments=[cfg.init.strategy().provenance()])
        (run_dir / "snapshots" / f"epoch_{epoch:04d}.csv").write_text(text)

    snapshots = [pv.frontend_params().filterbank]
    snapshot(0, snapshots[0])

    metrics_rows = []
    val_losses = []
    global_step = 0
    last_good = pv
    try:
        for epoch in range(1, cfg.train.epochs + 1):
            order = rng_for(cfg.train.seed, epoch, "shuffle").permutation(len(train_items))
            aug_rng = rng_for(cfg.train.seed, epoch, "augment")
            epoch_logits, epoch_labels, losses, lr = [], [], [], cfg.train.lr_max
            for start in range(0, len(order), cfg.train.batch_size):
                idx = order[start : start + cfg.train.batch_size]
                clips = [train_clean[i][0] for i in idx]
                masks = [train_clean[i][2] for i in idx]
                x = _augment(clips, masks, curriculum, aug_rng)
                labels = train_labels[idx]
                lr = cosine_annealing_lr(global_step, period, cfg.train.lr_max, cfg.train.lr_min)
                result = backward(x, labels, pv)
                grads = result.grads
                if cfg.train.fixed_fb:
                    grads.values[slices["eta"]] = 0.0
                    grads.values[slices["sigma_bw"]] = 0.0
                adam, pv = adam_step(adam, pv, grads, lr)
                global_step += 1
                losses.append(result.loss * len(idx))
                epoch_logits.append(result.logits)
                epoch_labels.append(labels)

            train_loss = float(np.sum(losses) / len(train_items))
            train_metrics = evaluate_metrics(np.vstack(epoch_logits), np.concatenate(epoch_labels))

            val_rng = rng_for(cfg.train.seed, epoch, "val")
            val_x = _augment([c for c, _, _ in val_clean], [m for _, _, m in val_clean],
                             curriculum, val_rng)
            val_logits = _forward_logits(val_x, pv, cfg.train.batch_size)
            val_loss, _, _ = softmax_cross_entropy(val_logits, val_labels)
            if not np.isfinite(val_loss):
                raise NumericsError("non-finite validation loss", stage="validate")
            val_metrics = evaluate_metrics(val_logits, val_labels)

            for split, loss, metric in (
                ("train", train_loss, train_metrics),
                ("val", float(val_loss), val_metrics),
            ):
                metrics_rows.append(EpochMetrics(
                    epoch, split, loss, metric["accuracy"], metric["f1"], metric["auc"],
                    lr, curriculum.max_snr_db,
                ))

            bank = pv.frontend_params().filterbank
            snapshots.append(bank)
            snapshot(epoch, bank)
            val_losses.append(float(val_loss))
            curriculum = adaptive_snr_update(curriculum, val_losses)
            last_good = pv
    except NumericsError as exc:
        save_checkpoint(run_dir / "checkpoints" / "last_good.ckpt", last_good, adam,
                        {"status": "aborted"})
        (run_dir / "metrics.csv").write_text(metrics_to_csv(metrics_rows))
        (run_dir / "MANIFEST").write_text(
            f"status = failed\nerror = {type(exc).__name__}: {exc}\nstage = {exc.stage}\n"
        )
        raise

    (run_dir / "metrics.csv").write_text(metrics_to_csv(metrics_rows))
    save_checkpoint(run_dir / "checkpoints" / "final.ckpt", pv, adam,
                    {"epochs": cfg.train.epochs})
    val_rows = [m for m in metrics_rows if m.split == "val"]
    (run_dir / "MANIFEST").write_text(
        "status = completed\n"
        f"epochs = {cfg.train.epochs}\n"
        f"final_val_accuracy = {fmt_float(val_rows[-1].accuracy)}\n"
        f"best_val_accuracy = {fmt_float(max(m.accuracy for m in val_rows))}\n"
    )
    return TrainingRun(run_dir, metrics_rows, snapshots, pv, True)
