import json, sys, time
from pathlib import Path
from leafkit.config import ExperimentConfig
from leafkit.runs import run_train, run_analyze
import leafkit.task_harness as th

bands = sys.argv[3] if len(sys.argv) > 3 else "wide"
if bands == "narrow":
    th.TASK_BANDS = dict(th.TASK_BANDS)
    th.TASK_BANDS["band4"] = ((300.0, 500.0), (900.0, 1400.0), (2500.0, 3500.0), (5200.0, 6800.0))
else:
    th.TASK_BANDS = dict(th.TASK_BANDS)
    th.TASK_BANDS["band4"] = ((300.0, 700.0), (1000.0, 1800.0), (2500.0, 4000.0), (5000.0, 7400.0))

base = Path(sys.argv[1]); lr = float(sys.argv[2])
init_seed = int(sys.argv[4]) if len(sys.argv) > 4 else 18
res = {}
for kind in ("linear", "mel", "bark", "random"):
    cfg = ExperimentConfig()
    cfg.init.kind = kind
    cfg.init.seed = init_seed
    cfg.init.f_min_hz = 250.0
    cfg.init.f_max_hz = 7500.0
    cfg.task.tone_count = 4
    cfg.task.noise_level = 0.03
    cfg.train.batch_size = 32
    cfg.train.restart_period_epochs = 30
    cfg.train.lr_max = lr
    cfg.output.dir = str(base / f"{kind}_learn")
    out = run_train(cfg, overwrite=True)
    analysis = run_analyze(out["run_dir"])
    res[kind] = {"acc": out["final_val_accuracy"], "best": out["best_val_accuracy"],
                 "jsd": round(analysis["mean_final_jsd"], 4)}
    print(kind, json.dumps(res[kind]), flush=True)
rnd = res["random"]["jsd"]
print("(b) random most:", all(rnd > res[k]["jsd"] for k in ("linear","mel","bark")))
