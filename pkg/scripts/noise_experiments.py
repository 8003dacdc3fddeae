#!/usr/bin/env python3
"""Heavier stochastic experiments: driver comparison and Lyapunov sweep.

Both take minutes; the comparison quantifies how jump augmentation changes
max single-step moves and terminal kurtosis, the sweep traces the largest
Lyapunov exponent across noise scales.
"""

import sys
from pathlib import Path

from levysolow.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    for command, config in [
        ("ensemble", "noise_comparison.json"),
        ("lyapunov", "lyapunov_sweep.json"),
    ]:
        print(f"== {command} {config}")
        rc = main([command, "--config", str(ROOT / "configs" / config)])
        if rc != 0:
            sys.exit(rc)
