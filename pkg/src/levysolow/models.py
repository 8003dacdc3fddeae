"""Model family: sigmoid savings, power-law production, and drift fields.

Four coupled variants share one parameter set:

``full4``          slow capital k driven by fast variables z, p and a
                   mean-reverting shock X, with timescale ratio epsilon_ts.
``reduced``        the slow-time limit: k alone, forced by X.
``three_eq``       capital / investment / shock system in original scales.
``deterministic``  the noise-free scalar capital equation
                   dk/dt = beta_mult * s(k) * k**a - k.

Two auxiliary scalar variants exist as analysis oracles: ``ou`` (pure
mean-reverting shock) and ``linear`` (the exact linearization of the
deterministic equation around its balanced state, dv/dt = -r * v).

All functions here are pure and operate on plain floats, which keeps the
time-stepping hot loop cheap; evaluate pointwise when arrays are needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .noise import NoiseConfig


@dataclass(frozen=True)
class SavingsParams:
    """Sigmoid saving rate s(k) = s1 + (s2 - s1) / (1 + exp(-gamma*(k - phi)))."""

    s1: float = 0.2
    s2: float = 0.8
    gamma: float = 0.5
    phi: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.s1 < self.s2 < 1.0:
            raise ValueError("require 0 < s1 < s2 < 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.phi <= 0:
            raise ValueError("phi must be > 0")

    @property
    def psi(self) -> float:
        """Saving-rate ratio s2/s1 controlling the bifurcation threshold."""
        return self.s2 / self.s1


@dataclass(frozen=True)
class ProductionParams:
    """Power-law production f(k) = B * k**a with 0 < a < 1."""

    B: float = 1.5
    a: float = 0.3

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("B must be > 0")
        if not 0.0 < self.a < 1.0:
            raise ValueError("a must lie in (0, 1)")


@dataclass(frozen=True)
class ModelParams:
    """Every scalar coefficient of the model family.

    beta_mult    multiplier of the dimensionless capital equation.
    rho          capital depreciation rate.
    beta_inv     capital-investment interaction rate.
    v            investment decay rate.
    eta_a        shock mean-reversion rate.
    epsilon_ts   slow-fast timescale ratio.
    kappa        fast adjustment rate.
    gamma_inv    investment attrition rate; defaults to the sigmoid gamma,
                 which plays both roles in the source model.
    """

    savings: SavingsParams = field(default_factory=SavingsParams)
    production: ProductionParams = field(default_factory=ProductionParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    beta_mult: float = 2.0
    rho: float = 0.02
    beta_inv: float = 0.4
    v: float = 0.02
    eta_a: float = 0.1
    epsilon_ts: float = 0.05
    kappa: float = 1.0
    gamma_inv: float | None = None

    def __post_init__(self):
        for name in ("rho", "v", "eta_a", "kappa", "epsilon_ts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def gamma_investment(self) -> float:
        return self.savings.gamma if self.gamma_inv is None else self.gamma_inv


class Variant(str, Enum):
    FULL4 = "full4"
    THREE_EQ = "three_eq"
    REDUCED = "reduced"
    DETERMINISTIC = "deterministic"
    OU = "ou"
    LINEAR = "linear"

    @property
    def components(self) -> tuple[str, ...]:
        return _COMPONENTS[self]


_COMPONENTS = {
    Variant.FULL4: ("k", "z", "p", "X"),
    Variant.THREE_EQ: ("k", "I", "X"),
    Variant.REDUCED: ("k", "X"),
    Variant.DETERMINISTIC: ("k",),
    Variant.OU: ("X",),
    Variant.LINEAR: ("v",),
}

# components that must stay strictly positive (they enter k**a terms)
POSITIVE_COMPONENTS = ("k", "z")


def savings(k: float, p: SavingsParams) -> float:
    """Saving rate at capital k; strictly inside (s1, s2) for finite k."""
    t = p.gamma * (k - p.phi)
    if t >= 0:
        return p.s1 + (p.s2 - p.s1) / (1.0 + math.exp(-t))
    e = math.exp(t)
    return p.s1 + (p.s2 - p.s1) * e / (1.0 + e)


def savings_deriv(k: float, p: SavingsParams) -> float:
    """Exact derivative of the saving rate; gamma*(s2-s1)/4 at k = phi."""
    t = p.gamma * (k - p.phi)
    if t >= 0:
        sig = 1.0 / (1.0 + math.exp(-t))
    else:
        e = math.exp(t)
        sig = e / (1.0 + e)
    return p.gamma * (p.s2 - p.s1) * sig * (1.0 - sig)


def production(k: float, p: ProductionParams) -> float:
    """Output B * k**a; defined for k >= 0 only."""
    if k < 0:
        raise ValueError("capital must be nonnegative")
    return p.B * k**p.a


def production_deriv(k: float, p: ProductionParams) -> float:
    if k <= 0:
        raise ValueError("capital must be positive")
    return p.B * p.a * k ** (p.a - 1.0)


def rhs_deterministic(k: float, mp: ModelParams) -> float:
    """Drift of the dimensionless capital equation: beta*s(k)*k**a - k."""
    a = mp.production.a
    return mp.beta_mult * savings(k, mp.savings) * k**a - k


def rhs_deterministic_dk(k: float, mp: ModelParams) -> float:
    """Analytic d/dk of the deterministic drift (stability classifier)."""
    a = mp.production.a
    sp = mp.savings
    return (
        mp.beta_mult
        * (savings_deriv(k, sp) * k**a + savings(k, sp) * a * k ** (a - 1.0))
        - 1.0
    )


def slaved_p(k: float, mp: ModelParams) -> float:
    """Fast-variable value on the slow manifold: p = [1-s(k)]*beta/(beta-1)*k**a."""
    beta = mp.beta_mult
    if beta == 1.0:
        raise ValueError("beta_mult must differ from 1")
    return (1.0 - savings(k, mp.savings)) * beta / (beta - 1.0) * k**mp.production.a


def rhs_full4(state, mp: ModelParams) -> tuple[float, float, float, float]:
    """Drift of the slow-fast system (k, z, p, X).

    The 1/epsilon factor is applied to the fast z and p components; the X
    component carries only its mean reversion, noise being the integrator's
    job.
    """
    k, z, p, x = state
    beta = mp.beta_mult
    if beta == 1.0:
        raise ValueError("beta_mult must differ from 1")
    if z <= 0:
        raise ValueError("fast variable z must be positive")
    a = mp.production.a
    eps = mp.epsilon_ts
    za = z**a
    dk = beta * za - (beta - 1.0) * p - k
    dz = -mp.kappa * (z - k) / eps
    dp = (-p + (1.0 - savings(z, mp.savings)) * beta / (beta - 1.0) * za + x) / eps
    dx = -mp.eta_a * x
    return (dk, dz, dp, dx)


def rhs_reduced(state, mp: ModelParams) -> tuple[float, float]:
    """Drift of the slow-time limit (k, X)."""
    k, x = state
    dk = rhs_deterministic(k, mp) - (mp.beta_mult - 1.0) * x
    return (dk, -mp.eta_a * x)


def rhs_three_eq(state, mp: ModelParams) -> tuple[float, float, float]:
    """Drift of the capital / investment / shock system (k, I, X)."""
    k, i, x = state
    dk = savings(k, mp.savings) * production(k, mp.production) - mp.rho * k
    di = mp.beta_inv * k * i - (mp.v + mp.gamma_investment) * i
    return (dk, di, -mp.eta_a * x)


def linear_rate(mp: ModelParams) -> float:
    """Decay rate of the linearization around the balanced state.

    r = 1 - a - (1/2) * (psi-1)/(psi+1) * gamma, with psi = s2/s1.  Positive
    r means the balanced state attracts.
    """
    psi = mp.savings.psi
    return 1.0 - mp.production.a - 0.5 * (psi - 1.0) / (psi + 1.0) * mp.savings.gamma


def threshold_xi(mp: ModelParams) -> float:
    """Dimensionless stability indicator beta_inv * B / (rho * (1 + gamma)).

    Values above 1 are read as the stabilizing regime; the number is reported,
    not asserted.
    """
    gamma = mp.gamma_investment
    if gamma <= -1.0:
        raise ValueError("gamma must exceed -1")
    return mp.beta_inv * mp.production.B / (mp.rho * (1.0 + gamma))


def _rhs_deterministic_vec(state, mp: ModelParams) -> tuple[float]:
    return (rhs_deterministic(state[0], mp),)


def _rhs_ou(state, mp: ModelParams) -> tuple[float]:
    return (-mp.eta_a * state[0],)


def _rhs_linear(state, mp: ModelParams) -> tuple[float]:
    return (-linear_rate(mp) * state[0],)


_DRIFT_TABLE = {
    Variant.FULL4: rhs_full4,
    Variant.THREE_EQ: rhs_three_eq,
    Variant.REDUCED: rhs_reduced,
    Variant.DETERMINISTIC: _rhs_deterministic_vec,
    Variant.OU: _rhs_ou,
    Variant.LINEAR: _rhs_linear,
}


def drift(variant: Variant, state, mp: ModelParams) -> tuple[float, ...]:
    """Drift vector of any variant; noise terms are added by the integrator."""
    try:
        return _DRIFT_TABLE[variant](state, mp)
    except KeyError:
        raise ValueError(f"unknown variant: {variant!r}") from None


def make_drift(variant: Variant, mp: ModelParams):
    """Drift closure with parameters hoisted out of the stepping hot loop.

    Arithmetic is identical to :func:`drift`; only attribute lookups move out
    of the per-step path.
    """
    if variant is Variant.OU:
        eta = mp.eta_a
        return lambda s: (-eta * s[0],)
    if variant is Variant.LINEAR:
        r = linear_rate(mp)
        return lambda s: (-r * s[0],)
    fn = _DRIFT_TABLE[variant]
    return lambda s: fn(s, mp)
