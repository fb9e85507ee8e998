"""
A full run through the harness
==============================

``run_command`` generates or loads the game, solves it, runs every seed and
writes a CSV trajectory, an SVG plot and a JSON summary per seed. This is the
same path the ``lana run`` command takes.
"""
import json
import tempfile
from pathlib import Path

from lana import parse_config, run_command

out = Path(tempfile.mkdtemp()) / "tournament"
cfg = parse_config({
    "generator": {"seed": 4, "n": 6, "kind": "cyclic", "contexts": 2},
    "judge": "ground_truth_sampled",
    "noise_epsilon": 0.1,
    "gamma": 0.1,
    "T": 1500,
    "seeds": [0, 1],
    "output_dir": str(out),
})
code, summary = run_command(cfg)
print("exit code", code, "files:", sorted(p.name for p in out.iterdir()))

for seed, res in summary["seeds"].items():
    for player, s in res["summary"]["players"].items():
        print(f"seed {seed} player {player}: KL {s['final_kl_to_star']:.3f}, "
              f"exploit {s['initial_exploitability']:.3f} -> {s['final_exploitability']:.3f}, "
              f"min slack {s['min_slack']:.1e}, dup skips {s['duplicate_skips']}")
    print("  horizon bound holds:", res["summary"]["horizon_bound"]["holds"])

print(json.dumps(summary["nash"]["contexts"][0], indent=1)[:300])
