"""Experiment orchestration: the operations behind the service and the CLI.

Each `run_*` function does the file I/O for one subcommand and returns a
JSON-friendly summary dict.  Output directories are refused when they
already hold content, unless `overwrite` is set and the directory carries a
leafkit marker (never clobber arbitrary paths).
"""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .diffengine import grad_check, init_param_vector
from .errors import SnapshotError, SpecError
from .filterbank import from_csv as filterbank_from_csv
from .filterbank import to_csv as filterbank_to_csv
from .initializers import build_filterbank
from .sensitivity import (
    FilterPmf,
    filter_pmf,
    jsd,
    summarize,
    summary_to_csv,
    trajectory,
    trajectory_to_csv,
)
from .svgplot import filterbank_figure, jsd_trajectory_figure, response_overlay_figure
from .task_harness import dataset_for, model_spec_for, train
from .utils import fmt_float

_MARKERS = ("MANIFEST", "config.cfg", "filterbank.csv")


def prepare_out_dir(path, overwrite: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise SpecError(
                f"{out} already has content; pass --overwrite to replace it"
            )
        if not any((out / m).exists() for m in _MARKERS):
            raise SpecError(f"{out} does not look like a leafkit output directory")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_init_fb(cfg: ExperimentConfig, out_dir=None, overwrite: bool = False) -> dict:
    """Build the configured filterbank; emit its CSV and response figure."""
    cfg.validate()
    strategy = cfg.init.strategy()
    fs = cfg.task.sample_rate_hz
    bank = build_filterbank(strategy, fs, cfg.frontend.kernel_width)
    csv_text = filterbank_to_csv(bank, fs, header_comments=[strategy.provenance()])
    title = f"{strategy.kind} initialization (N={strategy.n_filters})"
    svg_text = filterbank_figure(bank, fs, title)

    files = []
    if out_dir is not None:
        out = prepare_out_dir(out_dir, overwrite)
        (out / "filterbank.csv").write_text(csv_text)
        (out / "responses.svg").write_text(svg_text)
        files = [str(out / "filterbank.csv"), str(out / "responses.svg")]
    rows = [
        {
            "filter_index": i,
            "eta": float(bank.eta[i]),
            "sigma_bw": float(bank.sigma_bw[i]),
            "centre_hz": float(bank.centre_hz(fs)[i]),
            "fwhm_hz": float(bank.fwhm_hz(fs)[i]),
        }
        for i in range(bank.n_filters)
    ]
    return {"rows": rows, "csv": csv_text, "svg": svg_text, "files": files}


def run_train(cfg: ExperimentConfig, overwrite: bool = False) -> dict:
    """Train per config into cfg.output.dir; returns the run summary."""
    cfg.validate()
    run_dir = prepare_out_dir(cfg.output.dir, overwrite)
    dataset = dataset_for(cfg)
    result = train(dataset, cfg, run_dir)
    val_rows = [m for m in result.metrics if m.split == "val"]
    return {
        "run_dir": str(run_dir),
        "epochs": cfg.train.epochs,
        "fixed_fb": cfg.train.fixed_fb,
        "init_kind": cfg.init.kind,
        "final_val_loss": val_rows[-1].loss,
        "final_val_accuracy": val_rows[-1].accuracy,
        "best_val_accuracy": max(m.accuracy for m in val_rows),
        "files": [str(run_dir / "metrics.csv"), str(run_dir / "config.cfg")],
    }


def load_snapshots(run_dir) -> list:
    snap_dir = Path(run_dir) / "snapshots"
    if not snap_dir.is_dir():
        raise SnapshotError(f"{run_dir} has no snapshots/ directory")
    paths = sorted(snap_dir.glob("epoch_*.csv"))
    if not paths:
        raise SnapshotError(f"{snap_dir} holds no snapshot CSVs")
    return [filterbank_from_csv(p.read_text()) for p in paths]


def run_analyze(run_dir, bins: int | None = None, use_power: bool | None = None) -> dict:
    """Trajectory + summary CSVs and figures for an existing training run."""
    run_dir = Path(run_dir)
    banks = load_snapshots(run_dir)

    cfg = ExperimentConfig()
    cfg_path = run_dir / "config.cfg"
    if cfg_path.exists():
        from .config import load_config

        cfg = load_config(cfg_path)
    bins = cfg.sensitivity.bins if bins is None else int(bins)
    use_power = cfg.sensitivity.use_power if use_power is None else bool(use_power)

    traj = trajectory(banks, bins=bins, use_power=use_power)
    summary = summarize(traj)
    mean_final = summary["final_mean"]

    out = run_dir / "analysis"
    out.mkdir(exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_to_csv(traj))
    (out / "summary.csv").write_text(summary_to_csv(traj))
    (out / "jsd_trajectory.svg").write_text(
        jsd_trajectory_figure(traj.distances, f"mean final JSD = {mean_final:.3f}")
    )
    fs = cfg.task.sample_rate_hz
    (out / "responses_before_after.svg").write_text(
        response_overlay_figure(banks[0], banks[-1], fs, "initial vs learned responses")
    )
    return {
        "run_dir": str(run_dir),
        "epochs": traj.n_epochs - 1,
        "mean_final_jsd": mean_final,
        "max_moving_filter": summary["max_moving_filter"],
        "per_filter_final": [float(v) for v in summary["final_per_filter"]],
        "files": sorted(str(p) for p in out.iterdir()),
    }


def run_grad_check(cfg: ExperimentConfig, seed: int = 0, h: float = 2e-5,
                   coords_per_group: int = 8, tolerance: float = 1e-4) -> dict:
    """Finite-difference gate on a 0.1 s random clip under the configured model.

    The default probe step (2e-5) is tighter than the engine's 1e-4 default
    so the oracle's own truncation error stays well under the tolerance.
    """
    cfg.validate()
    fs = cfg.task.sample_rate_hz
    from .task_harness import TASK_BANDS

    n_classes = len(TASK_BANDS[cfg.task.kind])
    mspec = model_spec_for(cfg, n_classes)
    bank = build_filterbank(cfg.init.strategy(), fs, cfg.frontend.kernel_width)
    pv = init_param_vector(
        bank, mspec,
        sigma_lp_init=cfg.frontend.sigma_lp_init,
        pcen_init=(cfg.frontend.pcen_alpha_init, cfg.frontend.pcen_delta_init,
                   cfg.frontend.pcen_r_init, cfg.frontend.pcen_s_init),
        backend_seed=seed,
    )
    rng = np.random.Generator(np.random.PCG64(seed))
    clip = rng.uniform(-0.5, 0.5, int(round(0.1 * fs)))
    labels = np.array([seed % n_classes])
    report = grad_check(pv, clip[None, :], labels, h=h,
                        coords_per_group=coords_per_group, tolerance=tolerance, seed=seed)
    return {
        "passed": report.passed,
        "max_rel_err": report.max_rel_err,
        "tolerance": tolerance,
        "h": h,
        "groups": [
            {
                "group": g.group,
                "max_rel_err": g.max_rel_err,
                "n_checked": g.n_checked,
                "n_skipped": g.n_skipped,
                "passed": g.passed(tolerance),
            }
            for g in report.groups
        ],
    }


def run_jsd(filter_a=None, filter_b=None, p=None, q=None, bins: int = 1024,
            use_power: bool = False) -> dict:
    """Ad-hoc pair distance, from filter parameters or raw pmf vectors."""
    if p is not None and q is not None:
        pa = np.asarray(p, dtype=np.float64)
        qa = np.asarray(q, dtype=np.float64)
        if pa.sum() <= 0 or qa.sum() <= 0:
            raise SpecError("pmf vectors must have positive mass")
        value = jsd(FilterPmf(pa / pa.sum()), FilterPmf(qa / qa.sum()))
    elif filter_a is not None and filter_b is not None:
        pmf_a = filter_pmf(filter_a[0], filter_a[1], bins, use_power)
        pmf_b = filter_pmf(filter_b[0], filter_b[1], bins, use_power)
        value = jsd(pmf_a, pmf_b)
    else:
        raise SpecError("provide either two pmf vectors or two (eta, sigma_bw) pairs")
    return {"jsd": float(value), "bins": bins}


def version_info() -> dict:
    return {"status": "ok", "version": __version__}
