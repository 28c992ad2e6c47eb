"""Train an energy model on Lennard-Jones pairs and read off forces."""

import tempfile

import numpy as np

from taafs.config import load_run_config
from taafs.data import lj_force
from taafs.harness import load_run, predict_pair, run_training

out = tempfile.mkdtemp(prefix="taafs-lj-")
for activation in ("tanh", "taaf"):
    cfg = load_run_config("", [
        "topology = net:16,16,1", f"activation = {activation}",
        "r_lo = 1.0", "r_hi = 1.8", "epochs = 60", "lr = 3e-3",
        f"out_dir = {out}/{activation}"])
    report = run_training(cfg)
    print(f"{activation}: {len(report.rows)} epochs, val RMSE {report.final_rmse:.2e}, "
          f"+{report.taaf_added} activation parameters")

    # Forces come from the input gradient, mapped back to the pair distance.
    model, stats, _ = load_run(f"{out}/{activation}")
    r = np.array([1.05, 2 ** (1 / 6), 1.6])
    energy, force = predict_pair(model, stats, r)
    for ri, f, ref in zip(r, force, lj_force(r)):
        print(f"  r={ri:.3f}  force {f:+.4f}  exact {ref:+.4f}")

print("outputs in", out)
