"""Monte Carlo orchestration over many simulated paths.

Paths are independent: path p draws every channel from
StreamId(base_seed, p, channel), so results never depend on execution order
or worker count.  Aggregation is a deterministic reduction in path-index
order (Welford updates for mean and variance), which keeps ensembles
bit-reproducible even under thread pools.  Failed paths are excluded and
counted instead of aborting the run; heavy-tailed drivers occasionally
produce extreme excursions and the report must say so.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .models import ModelParams, Variant
from .noise import StreamId
from .sde import DEFAULT_DRIVERS, IntegratorConfig, Trajectory, simulate

_CHUNK = 256


@dataclass(frozen=True)
class EnsembleSpec:
    n_paths: int
    base_seed: int
    variant: Variant
    mp: ModelParams
    cfg: IntegratorConfig
    quantiles: tuple[float, ...] = ()
    init: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        qs = tuple(self.quantiles)
        if list(qs) != sorted(qs) or any(not 0.0 < q < 1.0 for q in qs):
            raise ValueError("quantiles must be sorted and inside (0, 1)")


@dataclass
class EnsembleStats:
    """Per-time summary over successful paths.

    ``mean``/``variance`` have shape (n_times, n_components); each requested
    quantile maps to an array of the same shape.  Quantile curves are
    non-crossing by construction.
    """

    times: np.ndarray
    components: tuple[str, ...]
    n_paths: int
    mean: np.ndarray
    variance: np.ndarray
    quantiles: dict[float, np.ndarray] = field(default_factory=dict)
    jump_events: int = 0
    clamp_events: int = 0
    failures: list[tuple[int, str]] = field(default_factory=list)


class _Welford:
    """Streaming mean/variance, updated strictly in path order."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self._m2 = np.zeros(shape)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (x - self.mean)

    @property
    def variance(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean)
        return self._m2 / (self.n - 1)


def _simulate_path(spec: EnsembleSpec, p: int) -> Trajectory:
    return simulate(
        spec.variant,
        spec.mp,
        spec.cfg,
        init=spec.init,
        stream=StreamId(spec.base_seed, p, 0),
    )


def run_ensemble(
    spec: EnsembleSpec, n_workers: int = 1, on_path=None
) -> EnsembleStats:
    """Simulate n_paths paths and aggregate their statistics.

    Bit-identical for any n_workers.  When quantiles are requested the whole
    (n_paths, n_times, n_components) block is held in memory; leave
    ``quantiles`` empty for large ensembles that only need moments.
    ``on_path(p, trajectory)`` is invoked in path order for every successful
    path.
    """
    variant = Variant(spec.variant)
    comps = variant.components
    n_times = spec.cfg.n_steps + 1
    agg: _Welford | None = None
    store = (
        np.empty((spec.n_paths, n_times, len(comps))) if spec.quantiles else None
    )
    jump_events = 0
    clamp_events = 0
    failures: list[tuple[int, str]] = []
    kept: list[int] = []

    def consume(p: int, result: Trajectory | Exception) -> None:
        nonlocal agg, jump_events, clamp_events
        if isinstance(result, Exception):
            failures.append((p, f"{type(result).__name__}: {result}"))
            return
        if agg is None:
            agg = _Welford(result.states.shape)
        agg.add(result.states)
        if store is not None:
            store[len(kept)] = result.states
        kept.append(p)
        jump_events += result.meta["jump_events"]
        clamp_events += result.meta["clamp_events"]
        if on_path is not None:
            on_path(p, result)

    if n_workers <= 1:
        for p in range(spec.n_paths):
            try:
                consume(p, _simulate_path(spec, p))
            except Exception as exc:  # noqa: BLE001 - recorded per path
                consume(p, exc)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for start in range(0, spec.n_paths, _CHUNK):
                idx = range(start, min(start + _CHUNK, spec.n_paths))

                def run(p: int):
                    try:
                        return _simulate_path(spec, p)
                    except Exception as exc:  # noqa: BLE001
                        return exc
                # collect the chunk, then reduce in path order
                for p, res in zip(idx, pool.map(run, idx)):
                    consume(p, res)

    if not kept:
        raise RuntimeError(
            f"all {spec.n_paths} paths failed; first: {failures[0][1]}"
        )
    times = np.arange(n_times) * spec.cfg.dt
    quantiles: dict[float, np.ndarray] = {}
    if store is not None:
        data = store[: len(kept)]
        qarr = np.quantile(data, list(spec.quantiles), axis=0)
        quantiles = {q: qarr[i] for i, q in enumerate(spec.quantiles)}
    assert agg is not None
    return EnsembleStats(
        times=times,
        components=comps,
        n_paths=len(kept),
        mean=agg.mean,
        variance=agg.variance,
        quantiles=quantiles,
        jump_events=jump_events,
        clamp_events=clamp_events,
        failures=failures,
    )


def excess_kurtosis(x: np.ndarray) -> float:
    """Sample excess kurtosis m4/m2**2 - 3."""
    x = np.asarray(x, dtype=float)
    mu = x.mean()
    m2 = ((x - mu) ** 2).mean()
    if m2 == 0.0:
        return 0.0
    m4 = ((x - mu) ** 4).mean()
    return float(m4 / m2**2 - 3.0)


@dataclass
class NoiseComparison:
    """Paired ensembles under two drivers sharing all Gaussian draws."""

    labels: tuple[str, str]
    stats: dict[str, EnsembleStats]
    max_step: dict[str, np.ndarray]  # per-path max |delta k|
    terminal: dict[str, np.ndarray]  # terminal k per path
    kurtosis: dict[str, float]
    max_step_ratio: float
    kurtosis_ratio: float
    frac_paths_second_exceeds: float


def _ratio(b: float, a: float) -> float:
    if b == a:
        return 1.0
    return b / a if a != 0.0 else math.inf


def compare_noise(
    spec: EnsembleSpec,
    drivers: Sequence[str] = ("gaussian", "gaussian+jumps"),
) -> NoiseComparison:
    """Run the ensemble under two drivers with a shared base seed.

    Gaussian channels occupy their own streams, so the Gaussian component of
    every path coincides between runs; the comparison isolates what the jump
    (or stable) augmentation adds.  The observed component is capital when
    present, otherwise the first component.
    """
    if len(drivers) != 2:
        raise ValueError("exactly two drivers are compared")
    variant = Variant(spec.variant)
    roles = tuple(DEFAULT_DRIVERS[variant])
    if not roles:
        raise ValueError(f"variant {variant.value!r} has no noise channels")
    comp = "k" if "k" in variant.components else variant.components[0]
    ci = variant.components.index(comp)

    stats: dict[str, EnsembleStats] = {}
    max_step: dict[str, np.ndarray] = {}
    terminal: dict[str, np.ndarray] = {}
    for label in drivers:
        cfg = replace(spec.cfg, drivers={role: label for role in roles})
        sub = replace(spec, cfg=cfg)
        steps = np.full(spec.n_paths, math.nan)
        terms = np.full(spec.n_paths, math.nan)

        def grab(p: int, traj: Trajectory, steps=steps, terms=terms) -> None:
            x = traj.states[:, ci]
            steps[p] = float(np.max(np.abs(np.diff(x))))
            terms[p] = float(x[-1])

        stats[label] = run_ensemble(sub, on_path=grab)
        max_step[label] = steps
        terminal[label] = terms

    a, b = drivers
    ok = ~(np.isnan(max_step[a]) | np.isnan(max_step[b]))
    kurt = {d: excess_kurtosis(terminal[d][ok]) for d in drivers}
    exceeds = float(np.mean(max_step[b][ok] > max_step[a][ok])) if ok.any() else 0.0
    return NoiseComparison(
        labels=(a, b),
        stats=stats,
        max_step=max_step,
        terminal=terminal,
        kurtosis=kurt,
        max_step_ratio=_ratio(float(np.nanmax(max_step[b])), float(np.nanmax(max_step[a]))),
        kurtosis_ratio=_ratio(kurt[b], kurt[a]),
        frac_paths_second_exceeds=exceeds,
    )
