"""Jump-diffusion simulation and bifurcation analysis of a growth model
with sigmoid savings, driven by Gaussian, compound-Poisson and alpha-stable
noise."""

__version__ = "0.1.0"

from .models import (  # noqa: F401
    ModelParams,
    ProductionParams,
    SavingsParams,
    Variant,
)
from .noise import JumpLaw, NoiseConfig, StreamId  # noqa: F401
from .sde import IntegratorConfig, Trajectory, simulate  # noqa: F401
