"""Seed-pinning calibration: the 8-run e2e matrix, then criteria (a)/(b)/(c)."""
import json, sys, time
from pathlib import Path
from leafkit.config import ExperimentConfig
from leafkit.runs import run_train, run_analyze

base = Path(sys.argv[1] if len(sys.argv) > 1 else "calib/matrix")
train_seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1234
data_seed = int(sys.argv[3]) if len(sys.argv) > 3 else 1000
init_seed = int(sys.argv[4]) if len(sys.argv) > 4 else 42

results = {}
t_start = time.time()
for kind in ("linear", "mel", "bark", "random"):
    for fixed in (False, True):
        cfg = ExperimentConfig()
        cfg.init.kind = kind
        cfg.init.seed = init_seed
        cfg.task.data_seed = data_seed
        cfg.train.seed = train_seed
        cfg.train.fixed_fb = fixed
        tag = f"{kind}_{'fixed' if fixed else 'learn'}"
        cfg.output.dir = str(base / tag)
        t0 = time.time()
        out = run_train(cfg, overwrite=True)
        analysis = run_analyze(out["run_dir"])
        results[tag] = {
            "final_acc": out["final_val_accuracy"],
            "best_acc": out["best_val_accuracy"],
            "mean_jsd": analysis["mean_final_jsd"],
            "secs": round(time.time() - t0, 1),
        }
        print(tag, json.dumps(results[tag]), flush=True)

total = time.time() - t_start
print(f"TOTAL {total:.0f}s")
ok_a_final = all(results[f"{k}_learn"]["final_acc"] >= results[f"{k}_fixed"]["final_acc"]
                 for k in ("linear", "mel", "bark", "random"))
ok_a_best = all(results[f"{k}_learn"]["best_acc"] >= results[f"{k}_fixed"]["best_acc"]
                for k in ("linear", "mel", "bark", "random"))
rnd = results["random_learn"]["mean_jsd"]
ok_b = all(rnd > results[f"{k}_learn"]["mean_jsd"] for k in ("linear", "mel", "bark"))
ok_c = all(results[f"{k}_fixed"]["mean_jsd"] == 0.0 for k in ("linear", "mel", "bark", "random"))
print(f"(a) learn>=fixed final: {ok_a_final}  best: {ok_a_best}")
print(f"(b) random most moved: {ok_b}  (random {rnd:.3f} vs "
      + ", ".join(f"{k} {results[f'{k}_learn']['mean_jsd']:.3f}" for k in ("linear", "mel", "bark")))
print(f"(c) fixed zero movement: {ok_c}")
print(json.dumps(results))
