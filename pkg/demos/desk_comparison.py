"""Run the desk-scale sweep and draw CRB versus transmit power for all schemes.

Takes about a minute per worker. Set SIXDMA_WORKERS to spread jobs over
processes.

    python3 demos/desk_comparison.py [output_dir]
"""

import sys
from pathlib import Path

from sixdma.harness import emit_csv, emit_plot, load_config, read_csv, run_experiment, summarize

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/desk-demo")
cfg = load_config("desk")
records = run_experiment(cfg)
csv_path = emit_csv(records, out / "results.csv")
rows = read_csv(csv_path)
emit_plot(rows, out / "crb_vs_power.svg")

for pattern, curves in summarize(rows).items():
    print(pattern)
    for scheme, (powers, median, *_band) in curves.items():
        print(f"  {scheme:6s}", " ".join(f"{v:.2e}" for v in median))
print(f"wrote {csv_path} and {out / 'crb_vs_power.svg'}")
