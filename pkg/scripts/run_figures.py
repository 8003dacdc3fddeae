#!/usr/bin/env python3
"""Regenerate every figure dataset from the checked-in configs.

Each dataset lands under out/ as CSV plus a sidecar; point any plotting tool
at the columns named in the README.
"""

import sys
from pathlib import Path

from levysolow.cli import main

ROOT = Path(__file__).resolve().parent.parent
RUNS = [
    ("slowfast", "fig1_slowfast.json"),
    ("bifurcate", "fig3_bifurcation.json"),
    ("phase-potential", "fig4_phase_potential.json"),
    ("simulate", "fig5a_jump_paths.json"),
    ("simulate", "fig5b_stable_paths.json"),
]

if __name__ == "__main__":
    for command, config in RUNS:
        print(f"== {command} {config}")
        rc = main([command, "--config", str(ROOT / "configs" / config)])
        if rc != 0:
            sys.exit(rc)
