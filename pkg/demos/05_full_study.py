"""Run the prior-accuracy study end to end at reduced scale and render it.

Writes the fig2 CSVs into demos_out/ and, when the figplots package is
installed, renders the four-panel figure from them.  Full-scale runs go
through the CLI: `afgame experiment fig2 --out out/`.
"""
import shutil
import subprocess
from pathlib import Path

from afgame.experiments import ExperimentConfig, run_fig2

out = Path(__file__).resolve().parent / "demos_out"
cfg = ExperimentConfig.from_dict({
    "sim": {"n_paths": 2_000, "seed": 7},
    "detect_reps": 2_000,
    "sweeps": {"mu_b": [1.0, 1.5, 2.0]},
})
paths = run_fig2(cfg, out, progress=print)
for p in paths:
    print("wrote", p)

if shutil.which("figplots"):
    png = out / "fig2.png"
    subprocess.run(["figplots", "fig2", "--in", str(out), "--out", str(png)],
                   check=True)
    print("rendered", png)
else:
    print("figplots not installed; skipping the render step")
