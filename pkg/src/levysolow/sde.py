"""Euler-Maruyama time stepping with jump augmentation.

The scheme is the explicit update
``x_{n+1} = x_n + dt * drift + scale * sqrt(dt) * Z_n + sum(jumps)``
with jumps applied at full size and counts drawn per step from
Poisson(lam * dt); scaling the jump term by dt would make jump effects vanish
in the small-step limit, which contradicts their observed O(1) impact.

Noise channels are organized by role.  The shock X and the capital k each own
a fixed triple of stream channels (gaussian, jump, stable), identical across
variants, so that e.g. the full and reduced systems fed the same StreamId see
bit-identical shock paths.  Components k and z are floored at ``k_min``
(production is undefined below zero); clamp events are counted, not hidden.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .models import ModelParams, Variant, drift, make_drift, slaved_p
from .noise import (
    NoiseStream,
    StreamId,
    gaussian_increment,
    gaussian_increments,
    jump_batch,
    stable_increment,
)

# (gaussian, jump, stable) channel numbers per noise role, shared by all
# variants so paired runs line up stream-for-stream
ROLE_CHANNELS: dict[str, tuple[int, int, int]] = {
    "X": (0, 1, 2),
    "k": (3, 4, 5),
    "I": (6, 7, 8),
}

DRIVER_CHOICES = ("gaussian", "gaussian+jumps", "stable")

# noise-carrying roles and their default drivers per variant
DEFAULT_DRIVERS: dict[Variant, dict[str, str]] = {
    Variant.FULL4: {"X": "stable"},
    Variant.REDUCED: {"X": "stable"},
    Variant.THREE_EQ: {"k": "gaussian+jumps", "X": "gaussian+jumps"},
    Variant.OU: {"X": "gaussian"},
    Variant.DETERMINISTIC: {},
    Variant.LINEAR: {},
}


class NonFiniteStateError(RuntimeError):
    """A state component became non-finite; carries the offending step."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class JumpEvent(NamedTuple):
    step: int
    channel: int
    size: float


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, horizon, positivity floor and per-role noise drivers.

    ``drivers`` overrides the variant defaults, e.g. ``{"X": "gaussian"}``;
    valid drivers are gaussian, gaussian+jumps and stable.
    """

    dt: float = 0.01
    T: float = 50.0
    k_min: float = 1e-12
    drivers: Mapping[str, str] | None = None

    def __post_init__(self):
        if not 0.0 < self.dt <= self.T:
            raise ValueError("require 0 < dt <= T")
        if self.k_min <= 0:
            raise ValueError("k_min must be > 0")
        if self.drivers is not None:
            for role, drv in self.drivers.items():
                if role not in ROLE_CHANNELS:
                    raise ValueError(f"unknown noise role: {role!r}")
                if drv not in DRIVER_CHOICES:
                    raise ValueError(f"unknown driver: {drv!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class Trajectory:
    """One sample path on the uniform grid t_n = n * dt."""

    times: np.ndarray
    states: np.ndarray
    jump_log: list[JumpEvent]
    meta: dict

    @property
    def components(self) -> tuple[str, ...]:
        return tuple(self.meta["components"])

    def component(self, name: str) -> np.ndarray:
        return self.states[:, self.components.index(name)]


def resolve_drivers(variant: Variant, cfg: IntegratorConfig) -> dict[str, str]:
    """Per-role drivers for a variant, with config overrides applied."""
    drivers = dict(DEFAULT_DRIVERS[variant])
    if cfg.drivers:
        for role, drv in cfg.drivers.items():
            if role not in drivers:
                raise ValueError(
                    f"variant {variant.value!r} has no noise role {role!r}"
                )
            drivers[role] = drv
    return drivers


def _gauss_scale(variant: Variant, role: str, mp: ModelParams) -> float:
    # the original-scale shock equation carries sqrt(rho*sigma) diffusion;
    # everywhere else the Gaussian scale is sigma itself
    if role == "X" and variant is Variant.THREE_EQ:
        return math.sqrt(mp.rho * mp.noise.sigma)
    return mp.noise.sigma


def make_streams(
    variant: Variant, cfg: IntegratorConfig, stream: StreamId
) -> dict[str, dict[str, NoiseStream]]:
    """One NoiseStream per active (role, kind); kinds are gauss/jump/stable."""
    streams: dict[str, dict[str, NoiseStream]] = {}
    for role, drv in resolve_drivers(variant, cfg).items():
        ch_gauss, ch_jump, ch_stable = ROLE_CHANNELS[role]
        base = stream.channel
        entry: dict[str, NoiseStream] = {}
        if drv in ("gaussian", "gaussian+jumps"):
            entry["gauss"] = NoiseStream(stream.with_channel(base + ch_gauss))
        if drv == "gaussian+jumps":
            entry["jump"] = NoiseStream(stream.with_channel(base + ch_jump))
        if drv == "stable":
            entry["stable"] = NoiseStream(stream.with_channel(base + ch_stable))
        streams[role] = entry
    return streams


class EMStepResult(NamedTuple):
    state: tuple[float, ...]
    jumps: list[tuple[int, float]]  # (channel, size) applied this step
    clamped: int


def _guard_indices(variant: Variant) -> tuple[int, ...]:
    comps = variant.components
    return tuple(i for i, c in enumerate(comps) if c in ("k", "z"))


def _role_index(variant: Variant, role: str) -> int:
    return variant.components.index(role)


def em_step(
    variant: Variant,
    state: Sequence[float],
    mp: ModelParams,
    cfg: IntegratorConfig,
    streams: Mapping[str, Mapping[str, NoiseStream]],
) -> EMStepResult:
    """Advance one Euler-Maruyama step, drawing increments from ``streams``.

    Raises NonFiniteStateError if the incoming state is not finite.  Any
    guarded component falling below ``k_min`` is clamped there and counted.
    """
    for x in state:
        if not math.isfinite(x):
            raise NonFiniteStateError("non-finite state entering step")
    dt = cfg.dt
    dvec = drift(variant, state, mp)
    new = [s + dt * d for s, d in zip(state, dvec)]
    jumps: list[tuple[int, float]] = []
    noise = mp.noise
    # accumulate one total per role before touching the state so that the
    # float rounding matches the block path used by simulate()
    for role, entry in streams.items():
        idx = _role_index(variant, role)
        total = 0.0
        gauss = entry.get("gauss")
        if gauss is not None:
            total += _gauss_scale(variant, role, mp) * gaussian_increment(gauss, dt)
        jump = entry.get("jump")
        if jump is not None:
            ch = ROLE_CHANNELS[role][1]
            for size in jump_batch(jump, noise.lam, dt, noise.jump_law):
                total += size
                jumps.append((ch, size))
        stable = entry.get("stable")
        if stable is not None:
            total += noise.sigma * stable_increment(
                stable, noise.alpha_stable, dt, noise.skew
            )
        if total != 0.0:
            new[idx] += total
    clamped = 0
    for i in _guard_indices(variant):
        if new[i] < cfg.k_min:
            new[i] = cfg.k_min
            clamped += 1
    return EMStepResult(tuple(new), jumps, clamped)


class IncrementSource:
    """Per-step noise contributions for one trajectory.

    Gaussian channels are pre-generated in one block (bit-identical to single
    draws); jump and stable channels are stepped draw-by-draw so their
    interleaved count/size protocol is preserved.
    """

    def __init__(
        self,
        variant: Variant,
        mp: ModelParams,
        cfg: IntegratorConfig,
        stream: StreamId,
        n_steps: int,
    ):
        self.variant = variant
        self.mp = mp
        self.cfg = cfg
        self._entries = []
        noise = mp.noise
        for role, entry in make_streams(variant, cfg, stream).items():
            idx = _role_index(variant, role)
            gauss_block = None
            if "gauss" in entry:
                scale = _gauss_scale(variant, role, mp)
                gauss_block = (
                    scale * gaussian_increments(entry["gauss"], cfg.dt, n_steps)
                ).tolist()
            self._entries.append(
                (
                    idx,
                    ROLE_CHANNELS[role][1],
                    gauss_block,
                    entry.get("jump"),
                    entry.get("stable"),
                )
            )
        self._lam = noise.lam
        self._law = noise.jump_law
        self._alpha = noise.alpha_stable
        self._skew = noise.skew
        self._sigma = noise.sigma

    @property
    def gauss_blocks(self) -> list[tuple[int, list[float]]] | None:
        """(component, increments) pairs when every channel is pure Gaussian;
        None as soon as any jump or stable channel is active."""
        out = []
        for idx, _ch, gauss_block, jump, stable in self._entries:
            if jump is not None or stable is not None:
                return None
            if gauss_block is not None:
                out.append((idx, gauss_block))
        return out

    def step(self, n: int, jump_sink: list[JumpEvent] | None = None):
        """Noise contribution per component index for step n."""
        out: list[tuple[int, float]] = []
        dt = self.cfg.dt
        for idx, jump_ch, gauss_block, jump, stable in self._entries:
            total = 0.0
            if gauss_block is not None:
                total += gauss_block[n]
            if jump is not None:
                for size in jump_batch(jump, self._lam, dt, self._law):
                    total += size
                    if jump_sink is not None:
                        jump_sink.append(JumpEvent(n, jump_ch, size))
            if stable is not None:
                total += self._sigma * stable_increment(
                    stable, self._alpha, dt, self._skew
                )
            if total != 0.0:
                out.append((idx, total))
        return out


def default_init(variant: Variant, mp: ModelParams) -> tuple[float, ...]:
    """Start on (or next to) the balanced path.

    The fast variables sit on the slow manifold and the investment component
    starts on its invariant axis I = 0, where it stays bounded for every
    parameter set.
    """
    if variant is Variant.FULL4:
        return (1.0, 1.0, slaved_p(1.0, mp), 0.0)
    if variant is Variant.THREE_EQ:
        return (1.0, 0.0, 0.0)
    if variant is Variant.REDUCED:
        return (1.0, 0.0)
    if variant is Variant.DETERMINISTIC:
        return (1.0,)
    if variant is Variant.OU:
        return (0.0,)
    if variant is Variant.LINEAR:
        return (1.0,)
    raise ValueError(f"unknown variant: {variant!r}")


def simulate(
    variant: Variant,
    mp: ModelParams,
    cfg: IntegratorConfig,
    init: Sequence[float] | None = None,
    stream: StreamId = StreamId(0),
) -> Trajectory:
    """Integrate one path over N = T/dt steps.

    Deterministic in (variant, mp, cfg, init, stream): repeated calls are
    bit-identical.  Raises NonFiniteStateError (with the step index) if any
    component stops being finite.
    """
    variant = Variant(variant)
    comps = variant.components
    if init is None:
        init = default_init(variant, mp)
    state = tuple(float(x) for x in init)
    if len(state) != len(comps):
        raise ValueError(
            f"init for {variant.value!r} needs {len(comps)} components {comps}"
        )
    for i in _guard_indices(variant):
        if state[i] <= 0:
            raise ValueError(f"component {comps[i]!r} must start positive")
    n_steps = cfg.n_steps
    src = IncrementSource(variant, mp, cfg, stream, n_steps)
    dim = len(comps)
    cols: list[list[float]] = [[x] for x in state]
    jump_log: list[JumpEvent] = []
    guard = _guard_indices(variant)
    k_min = cfg.k_min
    dt = cfg.dt
    clamp_events = 0
    dfun = make_drift(variant, mp)
    isfinite = math.isfinite
    gauss_blocks = src.gauss_blocks
    state = list(state)
    for n in range(n_steps):
        for x in state:
            if not isfinite(x):
                raise NonFiniteStateError(
                    f"non-finite state at step {n} (t={n * dt:g})", step=n
                )
        dvec = dfun(state)
        new = [s + dt * d for s, d in zip(state, dvec)]
        if gauss_blocks is not None:
            for idx, block in gauss_blocks:
                new[idx] += block[n]
        else:
            for idx, incr in src.step(n, jump_log):
                new[idx] += incr
        for i in guard:
            if new[i] < k_min:
                new[i] = k_min
                clamp_events += 1
        state = new
        for i in range(dim):
            cols[i].append(new[i])
    for x in state:
        if not isfinite(x):
            raise NonFiniteStateError(
                f"non-finite state at step {n_steps}", step=n_steps
            )
    states = np.empty((n_steps + 1, dim))
    for i in range(dim):
        states[:, i] = cols[i]
    times = np.arange(n_steps + 1) * dt
    meta = {
        "variant": variant.value,
        "components": list(comps),
        "seed": stream.seed,
        "path_index": stream.path_index,
        "base_channel": stream.channel,
        "params": asdict(mp),
        "integrator": asdict(cfg),
        "init": list(init),
        "clamp_events": clamp_events,
        "jump_events": len(jump_log),
    }
    return Trajectory(times, states, jump_log, meta)


def ou_exact_step(x: float, eta: float, sigma: float, dt: float, z: float) -> float:
    """Exact mean-reverting transition over dt given a standard normal z.

    x * exp(-eta*dt) + sigma * sqrt((1 - exp(-2*eta*dt)) / (2*eta)) * z;
    the small-dt limit of the z coefficient is sigma * sqrt(dt).
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    decay = math.exp(-eta * dt)
    sd = sigma * math.sqrt((1.0 - math.exp(-2.0 * eta * dt)) / (2.0 * eta))
    return x * decay + sd * z


def strong_error(
    variant: Variant,
    mp: ModelParams,
    dt_list: Sequence[float],
    T: float = 1.0,
    n_paths: int = 200,
    base_seed: int = 0,
    x0: float = 1.0,
    refine: int = 4,
) -> list[tuple[float, float]]:
    """RMS endpoint error of the scheme against the exact transition oracle.

    Only the mean-reverting channel has an exact law, so ``variant`` must be
    OU.  A single Brownian path per Monte Carlo sample is generated on a grid
    ``refine`` times finer than the smallest step; the reference composes
    ou_exact_step on that fine grid and each coarse level integrates the
    aggregated increments of the same path.
    """
    if Variant(variant) is not Variant.OU:
        raise ValueError("an exact transition oracle is only available for 'ou'")
    dt_fine = min(dt_list) / refine
    n_fine = int(round(T / dt_fine))
    ratios = []
    for dt in dt_list:
        r = dt / dt_fine
        if abs(r - round(r)) > 1e-9:
            raise ValueError("every dt must be an integer multiple of the fine step")
        ratios.append(int(round(r)))
    eta, sigma = mp.eta_a, mp.noise.sigma
    sq_err = {dt: 0.0 for dt in dt_list}
    for p in range(n_paths):
        stream = NoiseStream(StreamId(base_seed, p, 0))
        z = stream.rng.standard_normal(n_fine)
        x_ref = x0
        for i in range(n_fine):
            x_ref = ou_exact_step(x_ref, eta, sigma, dt_fine, z[i])
        dw_fine = math.sqrt(dt_fine) * z
        for dt, r in zip(dt_list, ratios):
            dw = dw_fine.reshape(-1, r).sum(axis=1)
            x = x0
            for i in range(len(dw)):
                x = x + dt * (-eta * x) + sigma * dw[i]
            sq_err[dt] += (x - x_ref) ** 2
    return [(dt, math.sqrt(sq_err[dt] / n_paths)) for dt in dt_list]


def loglog_slope(pairs: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(dt)."""
    x = np.log([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    return float(np.polyfit(x, y, 1)[0])
