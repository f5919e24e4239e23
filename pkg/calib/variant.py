"""Variant sweep for criterion (b): learnable runs only, report mean JSD."""
import json, sys, time
from pathlib import Path
from leafkit.config import ExperimentConfig
from leafkit.runs import run_train, run_analyze
import leafkit.task_harness as th

# narrow, well-separated class bands: wide random filters must migrate/narrow
th.TASK_BANDS = dict(th.TASK_BANDS)
th.TASK_BANDS["band4"] = ((300.0, 500.0), (900.0, 1400.0), (2500.0, 3500.0), (5200.0, 6800.0))

base = Path(sys.argv[1])
batch = int(sys.argv[2]); period = int(sys.argv[3])
res = {}
for kind in ("linear", "mel", "bark", "random"):
    cfg = ExperimentConfig()
    cfg.init.kind = kind
    cfg.train.batch_size = batch
    cfg.train.restart_period_epochs = period
    cfg.output.dir = str(base / f"{kind}_learn")
    t0 = time.time()
    out = run_train(cfg, overwrite=True)
    analysis = run_analyze(out["run_dir"])
    res[kind] = {"acc": out["final_val_accuracy"], "best": out["best_val_accuracy"],
                 "jsd": round(analysis["mean_final_jsd"], 4), "secs": round(time.time()-t0)}
    print(kind, json.dumps(res[kind]), flush=True)
rnd = res["random"]["jsd"]
print("(b) random most:", all(rnd > res[k]["jsd"] for k in ("linear","mel","bark")))
