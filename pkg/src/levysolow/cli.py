"""Command line entry point and CSV/sidecar serialization.

Commands: simulate | bifurcate | phase-potential | lyapunov | slowfast |
ensemble.  Every run reads a single JSON config document (individual keys
overridable with repeatable ``--set key=value`` flags), writes UTF-8 CSV with
LF line endings and a mandatory header, and drops one schema-versioned JSON
sidecar per command holding the fully resolved config.  Re-running with the
sidecar as the config reproduces the CSV byte for byte.

Exit codes: 0 success, 2 validation error, 3 runtime or numeric error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, models
from .ensemble import EnsembleSpec, compare_noise, run_ensemble
from .models import ModelParams, ProductionParams, SavingsParams, Variant
from .noise import JumpLaw, NoiseConfig, StreamId
from .sde import IntegratorConfig, NonFiniteStateError, simulate

SIDECAR_SCHEMA = "levysolow.sidecar/1"

# CSV column precedence for state components
_COLUMN_ORDER = ("k", "I", "X", "z", "p", "v")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat view of one run's configuration; sections mirror the JSON doc."""

    variant: str = "three_eq"
    savings: dict = field(default_factory=dict)
    production: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    seed: int = 0
    path_index: int = 0
    out_dir: str = "out"
    float_digits: int = 17
    init: list | None = None
    gamma_grid: list | None = None
    gamma_list: list | None = None
    k_grid: dict = field(default_factory=lambda: {"lo": 0.2, "hi": 2.5, "n": 201})
    eps_list: list | None = None
    quantiles: list = field(default_factory=list)
    n_paths: int = 100
    n_workers: int = 1
    compare_drivers: bool = False
    sigma_sweep: list | None = None
    seeds_per_point: int = 8
    lyapunov_system: str = "three_eq"
    renorm_interval: int = 10
    delta0: float = 1e-8
    k0: float = 1.0


_SECTION_KEYS = {
    "savings": {"s1", "s2", "gamma", "phi"},
    "production": {"B", "a"},
    "noise": {
        "sigma",
        "lam",
        "alpha_stable",
        "skew",
        "jump_family",
        "jump_scale",
        "jump_value",
    },
    "model": {
        "beta_mult",
        "rho",
        "beta_inv",
        "v",
        "eta_a",
        "epsilon_ts",
        "kappa",
        "gamma_inv",
    },
    "integrator": {"dt", "T", "k_min", "drivers"},
    "k_grid": {"lo", "hi", "n"},
}


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document; unknown keys are rejected by name."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    if doc.get("schema", "").startswith("levysolow.sidecar"):
        doc = doc.get("config", {})
    known = {f.name for f in fields(RunConfig)}
    rc = RunConfig()
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {key!r}")
        if key in _SECTION_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            bad = set(value) - _SECTION_KEYS[key]
            if bad:
                raise ConfigError(f"unknown config key: {key}.{sorted(bad)[0]!r}")
        setattr(rc, key, value)
    return rc


def config_doc(rc: RunConfig) -> dict:
    """Fully resolved config document (all sections materialized)."""
    mp = build_model_params(rc)
    cfg = build_integrator(rc)
    doc = {
        "variant": rc.variant,
        "savings": {
            "s1": mp.savings.s1,
            "s2": mp.savings.s2,
            "gamma": mp.savings.gamma,
            "phi": mp.savings.phi,
        },
        "production": {"B": mp.production.B, "a": mp.production.a},
        "noise": {
            "sigma": mp.noise.sigma,
            "lam": mp.noise.lam,
            "alpha_stable": mp.noise.alpha_stable,
            "skew": mp.noise.skew,
            "jump_family": mp.noise.jump_law.family,
            "jump_scale": mp.noise.jump_law.scale,
            "jump_value": mp.noise.jump_law.value,
        },
        "model": {
            "beta_mult": mp.beta_mult,
            "rho": mp.rho,
            "beta_inv": mp.beta_inv,
            "v": mp.v,
            "eta_a": mp.eta_a,
            "epsilon_ts": mp.epsilon_ts,
            "kappa": mp.kappa,
            "gamma_inv": mp.gamma_inv,
        },
        "integrator": {
            "dt": cfg.dt,
            "T": cfg.T,
            "k_min": cfg.k_min,
            "drivers": dict(cfg.drivers) if cfg.drivers else None,
        },
        "seed": rc.seed,
        "path_index": rc.path_index,
        "out_dir": rc.out_dir,
        "float_digits": rc.float_digits,
        "init": rc.init,
        "gamma_grid": rc.gamma_grid,
        "gamma_list": rc.gamma_list,
        "k_grid": dict(rc.k_grid),
        "eps_list": rc.eps_list,
        "quantiles": list(rc.quantiles),
        "n_paths": rc.n_paths,
        "n_workers": rc.n_workers,
        "compare_drivers": rc.compare_drivers,
        "sigma_sweep": rc.sigma_sweep,
        "seeds_per_point": rc.seeds_per_point,
        "lyapunov_system": rc.lyapunov_system,
        "renorm_interval": rc.renorm_interval,
        "delta0": rc.delta0,
        "k0": rc.k0,
    }
    return doc


def build_model_params(rc: RunConfig) -> ModelParams:
    noise_doc = dict(rc.noise)
    law = JumpLaw(
        family=noise_doc.pop("jump_family", "gaussian"),
        scale=noise_doc.pop("jump_scale", 0.1),
        value=noise_doc.pop("jump_value", 1.0),
    )
    return ModelParams(
        savings=SavingsParams(**rc.savings),
        production=ProductionParams(**rc.production),
        noise=NoiseConfig(jump_law=law, **noise_doc),
        **rc.model,
    )


def build_integrator(rc: RunConfig) -> IntegratorConfig:
    return IntegratorConfig(**rc.integrator)


def _fmt(value, digits: int) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), f".{digits}g")


def write_csv(path: Path, header: list[str], rows, digits: int) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v, digits) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_sidecar(
    out_dir: Path,
    command: str,
    rc: RunConfig,
    outputs: list[str],
    extra: dict | None = None,
) -> Path:
    doc = {
        "schema": SIDECAR_SCHEMA,
        "artifact_version": __version__,
        "command": command,
        "seed": rc.seed,
        "config": config_doc(rc),
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    path = out_dir / f"{command}.meta.json"
    path.write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    return path


def _state_columns(variant: Variant) -> list[str]:
    comps = variant.components
    return [c for c in _COLUMN_ORDER if c in comps]


def cmd_simulate(rc: RunConfig, out_dir: Path) -> list[str]:
    variant = Variant(rc.variant)
    mp = build_model_params(rc)
    cfg = build_integrator(rc)
    traj = simulate(
        variant, mp, cfg, init=rc.init, stream=StreamId(rc.seed, rc.path_index)
    )
    cols = _state_columns(variant)
    idx = [variant.components.index(c) for c in cols]
    rows = (
        [traj.times[n]] + [traj.states[n, i] for i in idx]
        for n in range(len(traj.times))
    )
    write_csv(out_dir / "simulate.csv", ["t"] + cols, rows, rc.float_digits)
    write_sidecar(
        out_dir,
        "simulate",
        rc,
        ["simulate.csv"],
        {
            "clamp_events": traj.meta["clamp_events"],
            "jump_events": traj.meta["jump_events"],
        },
    )
    return ["simulate.csv"]


def cmd_bifurcate(rc: RunConfig, out_dir: Path) -> list[str]:
    if not rc.gamma_grid:
        raise ConfigError("bifurcate requires 'gamma_grid'")
    mp = build_model_params(rc)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        diagram = analysis.bifurcation_diagram(rc.gamma_grid, mp)
    rows = []
    for eq in diagram.branches:
        for branch, root in enumerate(eq.roots):
            rows.append(
                (
                    eq.gamma,
                    branch,
                    root.k,
                    "stable" if root.stable else "unstable",
                )
            )
    write_csv(
        out_dir / "bifurcation.csv",
        ["gamma", "branch", "k_star", "stability"],
        rows,
        rc.float_digits,
    )
    write_sidecar(
        out_dir,
        "bifurcate",
        rc,
        ["bifurcation.csv"],
        {
            "gamma_c": diagram.gamma_c,
            "warnings": [str(w.message) for w in caught],
        },
    )
    return ["bifurcation.csv"]


def cmd_phase_potential(rc: RunConfig, out_dir: Path) -> list[str]:
    if not rc.gamma_list:
        raise ConfigError("phase-potential requires 'gamma_list'")
    mp = build_model_params(rc)
    kg = rc.k_grid
    k_values = np.linspace(kg["lo"], kg["hi"], int(kg["n"]))
    outputs = []
    for gamma in rc.gamma_list:
        line = analysis.phase_line(gamma, mp, k_values)
        rows = [
            (k, dkdt, analysis.potential(k, gamma, mp)) for k, dkdt in line
        ]
        name = f"phase_potential_gamma{gamma:g}.csv"
        write_csv(out_dir / name, ["k", "dkdt", "V"], rows, rc.float_digits)
        outputs.append(name)
    write_sidecar(out_dir, "phase-potential", rc, outputs)
    return outputs


def cmd_lyapunov(rc: RunConfig, out_dir: Path) -> list[str]:
    if not rc.sigma_sweep:
        raise ConfigError("lyapunov requires 'sigma_sweep'")
    variant = Variant(rc.lyapunov_system)
    mp = build_model_params(rc)
    cfg = build_integrator(rc)
    rows = []
    for sigma in rc.sigma_sweep:
        mp_s = replace(mp, noise=replace(mp.noise, sigma=float(sigma)))
        estimates = [
            analysis.lyapunov_largest(
                variant,
                mp_s,
                cfg,
                stream=StreamId(rc.seed, s),
                renorm_interval=rc.renorm_interval,
                delta0=rc.delta0,
                init=rc.init,
            )
            for s in range(rc.seeds_per_point)
        ]
        values = [e.value for e in estimates]
        mean = float(np.mean(values))
        if len(values) > 1:
            half = 1.96 * float(np.std(values, ddof=1)) / math.sqrt(len(values))
        else:
            half = estimates[0].half_width
        unreliable = int(any(not e.reliable for e in estimates))
        rows.append((sigma, mean, half, unreliable))
    write_csv(
        out_dir / "lyapunov.csv",
        ["sigma", "estimate", "half_width", "unreliable"],
        rows,
        rc.float_digits,
    )
    write_sidecar(out_dir, "lyapunov", rc, ["lyapunov.csv"])
    return ["lyapunov.csv"]


def cmd_slowfast(rc: RunConfig, out_dir: Path) -> list[str]:
    if not rc.eps_list:
        raise ConfigError("slowfast requires 'eps_list'")
    mp = build_model_params(rc)
    cfg = build_integrator(rc)
    stream = StreamId(rc.seed, rc.path_index)
    outputs = []
    rows = []
    for eps in rc.eps_list:
        full, red = analysis.paired_slowfast(mp, float(eps), stream, cfg, rc.k0)
        dk = full.component("k") - red.component("k")
        rows.append((eps, float(np.sqrt(np.mean(dk**2)))))
        name = f"slowfast_eps{eps:g}.csv"
        pair_rows = zip(full.times, full.component("k"), red.component("k"))
        write_csv(out_dir / name, ["t", "k_full", "k_reduced"], pair_rows, rc.float_digits)
        outputs.append(name)
    write_csv(out_dir / "slowfast.csv", ["eps", "rms"], rows, rc.float_digits)
    outputs.insert(0, "slowfast.csv")
    write_sidecar(out_dir, "slowfast", rc, outputs)
    return outputs


def cmd_ensemble(rc: RunConfig, out_dir: Path) -> list[str]:
    variant = Variant(rc.variant)
    mp = build_model_params(rc)
    cfg = build_integrator(rc)
    spec = EnsembleSpec(
        n_paths=rc.n_paths,
        base_seed=rc.seed,
        variant=variant,
        mp=mp,
        cfg=cfg,
        quantiles=tuple(rc.quantiles),
        init=tuple(rc.init) if rc.init else None,
    )
    extra: dict = {}
    outputs = ["ensemble.csv"]
    if rc.compare_drivers:
        comparison = compare_noise(spec)
        stats = comparison.stats[comparison.labels[1]]
        a, b = comparison.labels
        summary_rows = [
            (
                comparison.kurtosis[a],
                comparison.kurtosis[b],
                comparison.kurtosis_ratio,
                float(np.nanmax(comparison.max_step[a])),
                float(np.nanmax(comparison.max_step[b])),
                comparison.max_step_ratio,
                comparison.frac_paths_second_exceeds,
            )
        ]
        write_csv(
            out_dir / "ensemble_compare.csv",
            [
                f"kurtosis_{a.replace('+', '_')}",
                f"kurtosis_{b.replace('+', '_')}",
                "kurtosis_ratio",
                f"max_step_{a.replace('+', '_')}",
                f"max_step_{b.replace('+', '_')}",
                "max_step_ratio",
                "frac_paths_jumps_exceed",
            ],
            summary_rows,
            rc.float_digits,
        )
        outputs.append("ensemble_compare.csv")
        extra["n_failed"] = {
            label: len(s.failures) for label, s in comparison.stats.items()
        }
    else:
        stats = run_ensemble(spec, n_workers=rc.n_workers)
        extra["n_failed"] = len(stats.failures)
    extra["jump_events"] = stats.jump_events
    extra["clamp_events"] = stats.clamp_events
    qs = list(stats.quantiles)
    header = ["t", "component", "mean", "var"] + [f"q{q:g}" for q in qs]
    rows = []
    for ci, comp in enumerate(stats.components):
        for n in range(len(stats.times)):
            row = [stats.times[n], comp, stats.mean[n, ci], stats.variance[n, ci]]
            row.extend(stats.quantiles[q][n, ci] for q in qs)
            rows.append(row)
    write_csv(out_dir / "ensemble.csv", header, rows, rc.float_digits)
    write_sidecar(out_dir, "ensemble", rc, outputs, extra)
    return outputs


COMMANDS = {
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "phase-potential": cmd_phase_potential,
    "lyapunov": cmd_lyapunov,
    "slowfast": cmd_slowfast,
    "ensemble": cmd_ensemble,
}


def _apply_set(doc: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into config key {part!r}")
    node[parts[-1]] = value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levysolow",
        description="Simulation and bifurcation analysis of the jump-noise growth model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config or sidecar path")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (dotted paths, repeatable)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc: dict = {}
        if args.config is not None:
            try:
                doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return 4
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in config: {exc}") from exc
        if doc.get("schema", "").startswith("levysolow.sidecar"):
            doc = doc.get("config", {})
        for assignment in args.set:
            _apply_set(doc, assignment)
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.out is not None:
            doc["out_dir"] = str(args.out)
        rc = parse_config(doc)
        out_dir = Path(rc.out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"error: cannot create output directory: {exc}", file=sys.stderr)
            return 4
        outputs = COMMANDS[args.command](rc, out_dir)
    except (NonFiniteStateError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    for name in outputs:
        print(Path(rc.out_dir) / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
