"""Equilibria, bifurcation structure, potentials, and stability estimates.

The deterministic capital equation dk/dt = beta*s(k)*k**a - k keeps the
balanced state k = 1 for every sigmoid steepness gamma (provided
beta*s(1) = 1) and undergoes a pitchfork at

    gamma_c = 2 * (psi+1)/(psi-1) * (1-a),        psi = s2/s1,

past which two additional stable equilibria flank the now unstable balanced
state.  Routines here locate the branches by bracketing plus bisection,
integrate the potential whose negative gradient is the drift, and estimate
largest Lyapunov exponents with the two-trajectory (Benettin) method under a
shared noise realization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad

from . import models
from .models import ModelParams, Variant
from .noise import StreamId
from .sde import IncrementSource, IntegratorConfig, default_init, simulate

ROOT_TOL = 1e-10
ROOT_MERGE_TOL = 1e-6


class Root(NamedTuple):
    k: float
    stable: bool


@dataclass
class EquilibriumSet:
    """All equilibria of the deterministic capital equation at one gamma."""

    gamma: float
    roots: list[Root]
    residuals: list[float]
    anomaly: str | None = None


@dataclass
class BifurcationDiagram:
    gamma_grid: list[float]
    branches: list[EquilibriumSet]
    gamma_c: float
    max_branch_jump: float = 0.0


@dataclass
class LyapunovEstimate:
    value: float
    half_width: float
    n_blocks: int
    clamp_fraction: float

    @property
    def reliable(self) -> bool:
        return self.clamp_fraction <= 0.01


@dataclass
class StabilityReport:
    """Summary of the linear stability picture at one parameter set."""

    gamma_grid: list[float]
    r_values: list[float]
    gamma_c: float
    jacobian_eigs: tuple[float, float, float]
    xi: float
    lyapunov: LyapunovEstimate | None = None


def stability_r(gamma: float, psi: float, a: float) -> float:
    """Decay rate of the linearization at the balanced state.

    Positive values mean k = 1 attracts; the root in gamma is the critical
    steepness.
    """
    if psi <= 1:
        raise ValueError("psi must exceed 1")
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    return 1.0 - a - 0.5 * (psi - 1.0) / (psi + 1.0) * gamma


def critical_gamma(psi: float, a: float) -> float:
    """Steepness at which the balanced state loses stability."""
    if psi <= 1:
        raise ValueError("psi must exceed 1")
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    return 2.0 * (psi + 1.0) / (psi - 1.0) * (1.0 - a)


def _bisect(f, lo: float, hi: float, flo: float) -> float:
    # plain bisection: unconditionally safe near the pitchfork where the
    # drift is nearly flat and Newton stalls
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-14 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def find_equilibria(
    gamma: float,
    mp: ModelParams,
    k_max: float = 10.0,
    n_grid: int = 10_000,
    k_min: float = 1e-4,
) -> EquilibriumSet:
    """Locate every equilibrium in (k_min, k_max].

    Sign changes of the drift on a log-spaced grid are bracketed, bisected,
    then Newton-polished with the analytic derivative.  Roots closer than
    1e-6 merge (the pitchfork creates near-coincident pairs); any count other
    than one or three is reported as an anomaly, not silently returned.
    """
    if k_max <= 1.0:
        raise ValueError("k_max must exceed 1")
    mp = replace(mp, savings=replace(mp.savings, gamma=gamma))
    f = lambda k: models.rhs_deterministic(k, mp)
    fprime = lambda k: models.rhs_deterministic_dk(k, mp)
    phi = mp.savings.phi
    grids = [np.geomspace(k_min, k_max, n_grid)]
    # near the pitchfork the new branches sit O(sqrt(gamma - gamma_c)) from
    # the balanced state, closer than the global grid resolves; a linear
    # refinement window around phi catches them
    lo, hi = max(k_min, 0.5 * phi), min(k_max, 2.0 * phi)
    grids.append(np.linspace(lo, hi, 6000))
    roots: list[float] = []
    # under balanced normalization k = phi is a root at every gamma; probe it
    # directly since the crossing degenerates to a tangency near criticality
    # and then escapes sign-change bracketing
    if abs(f(phi)) < ROOT_TOL:
        roots.append(phi)
    for grid in grids:
        vals = [f(k) for k in grid]
        for i in range(len(grid) - 1):
            a, b = vals[i], vals[i + 1]
            if a == 0.0:
                roots.append(float(grid[i]))
            elif (a > 0) != (b > 0):
                root = _bisect(f, float(grid[i]), float(grid[i + 1]), a)
                for _ in range(2):  # polish
                    d = fprime(root)
                    if d != 0.0:
                        step = f(root) / d
                        if abs(step) < 0.1:
                            root -= step
                roots.append(root)
        if vals[-1] == 0.0:
            roots.append(float(grid[-1]))
    clusters: list[list[float]] = []
    for r in sorted(roots):
        if clusters and abs(r - clusters[-1][-1]) < ROOT_MERGE_TOL:
            clusters[-1].append(r)
        else:
            clusters.append([r])
    # roots closer than the merge tolerance are one equilibrium; keep the
    # member with the best residual (the probed balanced root is exact)
    merged = [min(cluster, key=lambda r: abs(f(r))) for cluster in clusters]
    out = [Root(r, fprime(r) < 0) for r in merged]
    residuals = [abs(f(r.k)) for r in out]
    anomaly = None
    if len(out) not in (1, 3):
        anomaly = f"{len(out)} equilibria found at gamma={gamma:g}"
        warnings.warn(anomaly, stacklevel=2)
    return EquilibriumSet(gamma, out, residuals, anomaly)


BRANCH_JUMP_TOL = 0.5


def bifurcation_diagram(
    gamma_grid: Sequence[float], mp: ModelParams, k_max: float = 10.0
) -> BifurcationDiagram:
    """Equilibrium branches over a gamma grid plus the analytic critical value.

    Adjacent grid points with equal root counts are matched in sorted order;
    a matched root moving by more than BRANCH_JUMP_TOL signals a missed
    branch and is reported as a warning.
    """
    gammas = list(gamma_grid)
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma grid must be strictly increasing")
    branches = [find_equilibria(g, mp, k_max=k_max) for g in gammas]
    gc = critical_gamma(mp.savings.psi, mp.production.a)
    max_jump = 0.0
    for prev, cur in zip(branches, branches[1:]):
        if len(prev.roots) == len(cur.roots):
            for a, b in zip(prev.roots, cur.roots):
                max_jump = max(max_jump, abs(b.k - a.k))
    if max_jump > BRANCH_JUMP_TOL:
        warnings.warn(
            f"branch discontinuity: matched roots moved by {max_jump:.3g}",
            stacklevel=2,
        )
    return BifurcationDiagram(gammas, branches, gc, max_jump)


def potential(
    k: float, gamma: float, mp: ModelParams, k_ref: float = 1.0
) -> float:
    """Potential V(k) = -integral of the drift from k_ref, so V(k_ref) = 0.

    Computed by adaptive quadrature to relative tolerance 1e-9; the drift has
    no closed-form antiderivative once the sigmoid multiplies the power law.
    """
    if k <= 0:
        raise ValueError("capital must be positive")
    mp = replace(mp, savings=replace(mp.savings, gamma=gamma))
    val, _ = quad(
        lambda u: -models.rhs_deterministic(u, mp),
        k_ref,
        k,
        epsabs=1e-12,
        epsrel=1e-9,
        limit=200,
    )
    return val


def phase_line(
    gamma: float, mp: ModelParams, k_grid: Sequence[float]
) -> list[tuple[float, float]]:
    """The drift sampled on a grid; zero crossings mark equilibria."""
    mp = replace(mp, savings=replace(mp.savings, gamma=gamma))
    out = []
    for k in k_grid:
        if k <= 0:
            raise ValueError("k grid must be positive")
        out.append((float(k), models.rhs_deterministic(float(k), mp)))
    return out


def jacobian_eigs(
    state: Sequence[float], mp: ModelParams
) -> tuple[float, float, float]:
    """Eigenvalues of the capital/investment/shock system's Jacobian.

    The matrix is triangular at I = 0 (and treated as such throughout), so
    the eigenvalues are the diagonal rates: capital's local growth rate,
    beta_inv*k - (v + gamma), and -eta_a.
    """
    k = state[0]
    if k <= 0:
        raise ValueError("capital must be positive")
    sp, pp = mp.savings, mp.production
    lam_k = (
        models.savings_deriv(k, sp) * models.production(k, pp)
        + models.savings(k, sp) * models.production_deriv(k, pp)
        - mp.rho
    )
    lam_i = mp.beta_inv * k - (mp.v + mp.gamma_investment)
    return (lam_k, lam_i, -mp.eta_a)


def lyapunov_largest(
    variant: Variant,
    mp: ModelParams,
    cfg: IntegratorConfig,
    stream: StreamId = StreamId(0),
    renorm_interval: int = 10,
    delta0: float = 1e-8,
    init: Sequence[float] | None = None,
) -> LyapunovEstimate:
    """Largest Lyapunov exponent by the two-trajectory method.

    A companion trajectory offset by delta0 along the diagonal evolves under
    the same noise realization; the separation is renormalized every
    ``renorm_interval`` steps and the exponent is the mean log stretching
    rate per unit time.  The half-width is a 1.96-sigma band over the block
    rates.  Estimates with clamp events on more than 1% of steps are flagged
    unreliable.
    """
    variant = Variant(variant)
    if renorm_interval < 1:
        raise ValueError("renorm_interval must be >= 1")
    if init is None:
        init = default_init(variant, mp)
    dim = len(variant.components)
    state_a = [float(x) for x in init]
    off = delta0 / math.sqrt(dim)
    state_b = [x + off for x in state_a]
    n_steps = cfg.n_steps
    src = IncrementSource(variant, mp, cfg, stream, n_steps)
    guard = tuple(
        i for i, c in enumerate(variant.components) if c in ("k", "z")
    )
    dt = cfg.dt
    k_min = cfg.k_min
    clamp = 0
    log_sum = 0.0
    block_rates: list[float] = []
    dfun = models.make_drift(variant, mp)
    for n in range(n_steps):
        da = dfun(state_a)
        db = dfun(state_b)
        incr = src.step(n)
        for i in range(dim):
            state_a[i] += dt * da[i]
            state_b[i] += dt * db[i]
        for idx, x in incr:
            state_a[idx] += x
            state_b[idx] += x
        for i in guard:
            if state_a[i] < k_min:
                state_a[i] = k_min
                clamp += 1
            if state_b[i] < k_min:
                state_b[i] = k_min
                clamp += 1
        if (n + 1) % renorm_interval == 0:
            d = math.sqrt(
                sum((b - a) ** 2 for a, b in zip(state_a, state_b))
            )
            if d == 0.0:
                raise ArithmeticError("trajectories coalesced exactly")
            rate = math.log(d / delta0) / (renorm_interval * dt)
            block_rates.append(rate)
            log_sum += math.log(d / delta0)
            scale = delta0 / d
            for i in range(dim):
                state_b[i] = state_a[i] + (state_b[i] - state_a[i]) * scale
    n_blocks = len(block_rates)
    if n_blocks == 0:
        raise ValueError("horizon shorter than one renormalization interval")
    value = log_sum / (n_blocks * renorm_interval * dt)
    if n_blocks > 1:
        sd = float(np.std(block_rates, ddof=1))
        half = 1.96 * sd / math.sqrt(n_blocks)
    else:
        half = float("inf")
    return LyapunovEstimate(value, half, n_blocks, clamp / (2 * n_steps))


def slowfast_error(
    mp: ModelParams,
    eps_list: Sequence[float],
    stream: StreamId = StreamId(0),
    cfg: IntegratorConfig | None = None,
    k0: float = 1.0,
) -> list[tuple[float, float]]:
    """RMS gap between full and reduced capital paths per timescale ratio.

    Both systems consume the identical shock channel streams, so the gap
    isolates the slow-time reduction error, which shrinks with epsilon.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    out = []
    for eps in eps_list:
        full, red = paired_slowfast(mp, eps, stream, cfg, k0)
        dk = full.component("k") - red.component("k")
        out.append((float(eps), float(np.sqrt(np.mean(dk**2)))))
    return out


def paired_slowfast(
    mp: ModelParams,
    eps: float,
    stream: StreamId,
    cfg: IntegratorConfig,
    k0: float = 1.0,
):
    """Full and reduced trajectories driven by one shock realization."""
    mp_eps = replace(mp, epsilon_ts=eps)
    init_full = (k0, k0, models.slaved_p(k0, mp_eps), 0.0)
    init_red = (k0, 0.0)
    full = simulate(Variant.FULL4, mp_eps, cfg, init=init_full, stream=stream)
    red = simulate(Variant.REDUCED, mp_eps, cfg, init=init_red, stream=stream)
    return full, red


def stability_report(
    mp: ModelParams,
    gamma_grid: Sequence[float],
    state: Sequence[float] = (1.0, 0.0, 0.0),
    lyapunov: LyapunovEstimate | None = None,
) -> StabilityReport:
    """Assemble the stability picture: r(gamma), gamma_c, eigenvalues, xi."""
    psi, a = mp.savings.psi, mp.production.a
    gammas = [float(g) for g in gamma_grid]
    return StabilityReport(
        gamma_grid=gammas,
        r_values=[stability_r(g, psi, a) for g in gammas],
        gamma_c=critical_gamma(psi, a),
        jacobian_eigs=jacobian_eigs(state, mp),
        xi=models.threshold_xi(mp),
        lyapunov=lyapunov,
    )
