#!/usr/bin/env python3
"""Dump the sigmoid saving-rate curves s(k) for several steepness values."""

from pathlib import Path

import numpy as np

from levysolow.models import SavingsParams, savings

OUT = Path("out/savings")
GAMMAS = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]

if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    ks = np.linspace(0.01, 3.0, 300)
    header = "k," + ",".join(f"gamma{g:g}" for g in GAMMAS)
    rows = [header]
    for k in ks:
        vals = [savings(float(k), SavingsParams(0.2, 0.8, g, 1.0)) for g in GAMMAS]
        rows.append(",".join(f"{v:.17g}" for v in [k, *vals]))
    path = OUT / "savings_curves.csv"
    path.write_text("\n".join(rows) + "\n", newline="\n")
    print(path)
