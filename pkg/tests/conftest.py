import pytest

from levysolow.models import ModelParams, ProductionParams, SavingsParams
from levysolow.noise import JumpLaw, NoiseConfig


def make_balanced(gamma=0.5, sigma=0.1, lam=0.0, **model_kw):
    """psi=4, a=0.3, beta=2, phi=1 configuration with beta*s(1) = 1."""
    model_kw.setdefault("beta_mult", 2.0)
    return ModelParams(
        savings=SavingsParams(s1=0.2, s2=0.8, gamma=gamma, phi=1.0),
        production=ProductionParams(B=1.5, a=0.3),
        noise=NoiseConfig(sigma=sigma, lam=lam),
        **model_kw,
    )


def make_fig5(alpha_stable=2.0, jump_scale=0.1):
    """The jump-path reproduction parameter set from the headline simulation."""
    return ModelParams(
        savings=SavingsParams(s1=0.2, s2=0.8, gamma=0.5, phi=1.0),
        production=ProductionParams(B=1.5, a=0.33),
        noise=NoiseConfig(
            sigma=0.1,
            lam=0.01,
            jump_law=JumpLaw("gaussian", jump_scale),
            alpha_stable=alpha_stable,
        ),
        rho=0.02,
        v=0.02,
        beta_inv=0.4,
        eta_a=0.1,
    )


def make_fig1(eps=0.05, sigma=0.1):
    """Slow-fast comparison set: beta=2, a=0.3, kappa=1, Cauchy-driven shock."""
    return ModelParams(
        savings=SavingsParams(s1=0.2, s2=0.8, gamma=0.5, phi=1.0),
        production=ProductionParams(B=1.5, a=0.3),
        noise=NoiseConfig(sigma=sigma, alpha_stable=1.0),
        beta_mult=2.0,
        kappa=1.0,
        eta_a=0.1,
        epsilon_ts=eps,
    )


def make_stable_three_eq(sigma=0.1, lam=0.01, jump_scale=0.1):
    """ThreeEq set whose capital equation balances at k = 1 (rho = s(1)*B).

    v and eta_a are chosen so the capital direction dominates the largest
    Lyapunov exponent.
    """
    return ModelParams(
        savings=SavingsParams(s1=0.2, s2=0.8, gamma=0.5, phi=1.0),
        production=ProductionParams(B=1.5, a=0.3),
        noise=NoiseConfig(sigma=sigma, lam=lam, jump_law=JumpLaw("gaussian", jump_scale)),
        rho=0.75,
        beta_inv=0.4,
        v=0.6,
        eta_a=1.0,
    )


@pytest.fixture
def balanced_mp():
    return make_balanced()


@pytest.fixture
def fig5_mp():
    return make_fig5()


@pytest.fixture
def fig1_mp():
    return make_fig1()
