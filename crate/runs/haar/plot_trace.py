#!/usr/bin/env python3
"""Plot nmse_db versus iteration for every trace*.csv beside this script."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
plotted = False
for path in sorted(glob.glob(os.path.join(here, "trace*.csv"))):
    iters, nmse = [], []
    with open(path) as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        for row in rows:
            # Keep one point per outer iteration: the first block's row.
            if not row or row[0] == "iter" or row[1] != "1" or row[2] == "":
                continue
            iters.append(int(row[0]))
            nmse.append(float(row[2]))
    if iters:
        plt.plot(iters, nmse, label=os.path.basename(path))
        plotted = True
if not plotted:
    raise SystemExit("no trace*.csv with NMSE data found next to this script")
plt.xlabel("iteration")
plt.ylabel("NMSE (dB)")
plt.grid(True, alpha=0.3)
plt.legend()
out = os.path.join(here, "trace.png")
plt.savefig(out, dpi=150, bbox_inches="tight")
print("wrote", out)
