"""Seedable stochastic increment sources.

Three kinds of increments drive the model family: Gaussian diffusion steps,
compound-Poisson jump batches, and symmetric (optionally skewed) alpha-stable
steps generated with the Chambers-Mallows-Stuck construction
(Chambers, Mallows and Stuck, JASA 71, 1976).

Every source is keyed by a :class:`StreamId`.  Identical ids reproduce the
identical increment sequence regardless of thread schedule or host, which is
what makes ensemble runs bit-reproducible.  Streams are built on numpy's
counter-based Philox generator seeded through ``SeedSequence(seed,
spawn_key=(path_index, channel))``, so distinct (path_index, channel) pairs
are statistically independent by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class JumpLaw:
    """Distribution of a single jump size.

    ``gaussian`` draws centered normal jumps with standard deviation
    ``scale``; ``constant`` is a point mass at ``value`` (useful for count
    bookkeeping tests).
    """

    family: str = "gaussian"
    scale: float = 0.1
    value: float = 1.0

    def __post_init__(self):
        if self.family not in ("gaussian", "constant"):
            raise ValueError(f"unknown jump law family: {self.family!r}")
        if self.family == "gaussian" and self.scale < 0:
            raise ValueError("jump scale must be >= 0")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "gaussian":
            return self.scale * rng.standard_normal(n)
        return np.full(n, self.value, dtype=float)


@dataclass(frozen=True)
class NoiseConfig:
    """Scales and shapes of all noise sources of a model.

    sigma         Gaussian diffusion scale (per sqrt-time).
    lam           jump intensity, expected events per unit time.
    jump_law      size distribution of individual jumps.
    alpha_stable  stability index in (0, 2]; 2 recovers Brownian scaling.
    skew          stable skewness in [-1, 1].
    """

    sigma: float = 0.1
    lam: float = 0.0
    jump_law: JumpLaw = field(default_factory=JumpLaw)
    alpha_stable: float = 2.0
    skew: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0.0 < self.alpha_stable <= 2.0:
            raise ValueError("alpha_stable must lie in (0, 2]")
        if not -1.0 <= self.skew <= 1.0:
            raise ValueError("skew must lie in [-1, 1]")


@dataclass(frozen=True)
class StreamId:
    """Value-like identity of one increment stream.

    seed        64-bit base seed shared by a whole run or ensemble.
    path_index  Monte Carlo path number.
    channel     independent noise source within one system.
    """

    seed: int
    path_index: int = 0
    channel: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit nonnegative integer")
        if self.path_index < 0 or self.channel < 0:
            raise ValueError("path_index and channel must be nonnegative")

    def with_channel(self, channel: int) -> "StreamId":
        return StreamId(self.seed, self.path_index, channel)


class NoiseStream:
    """Stateful draw counter for one stream id.

    A stream must be advanced from a single thread; create one stream per
    worker instead of sharing.  Batch draws and repeated single draws consume
    the underlying generator identically, so chunking never changes results.
    """

    def __init__(self, stream_id: StreamId):
        self.stream_id = stream_id
        ss = np.random.SeedSequence(
            stream_id.seed, spawn_key=(stream_id.path_index, stream_id.channel)
        )
        self._rng = np.random.Generator(np.random.Philox(ss))

    @property
    def rng(self) -> np.random.Generator:
        return self._rng


def gaussian_increment(stream: NoiseStream, dt: float) -> float:
    """One Brownian increment: sqrt(dt) * Z with Z standard normal."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return math.sqrt(dt) * stream.rng.standard_normal()


def gaussian_increments(stream: NoiseStream, dt: float, n: int) -> np.ndarray:
    """Block of n Brownian increments; same sequence as n single draws."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return math.sqrt(dt) * stream.rng.standard_normal(n)


def _cms_standard(alpha: float, skew: float, phi, w):
    """Standard stable variate from angle phi ~ U(-pi/2, pi/2) and w ~ Exp(1).

    Uses the S(alpha, beta; 1) parametrization.  The alpha = 1 case takes its
    dedicated branch; the general formula degenerates correctly at alpha = 2
    to a N(0, 2) variate.
    """
    if alpha == 1.0:
        if skew == 0.0:
            return np.tan(phi)
        bphi = _HALF_PI + skew * phi
        return (2.0 / math.pi) * (
            bphi * np.tan(phi)
            - skew * np.log(_HALF_PI * w * np.cos(phi) / bphi)
        )
    zeta = skew * math.tan(_HALF_PI * alpha)
    theta0 = math.atan(zeta) / alpha
    prefactor = (1.0 + zeta * zeta) ** (1.0 / (2.0 * alpha))
    shifted = alpha * (phi + theta0)
    return (
        prefactor
        * np.sin(shifted)
        / np.cos(phi) ** (1.0 / alpha)
        * (np.cos(phi - shifted) / w) ** ((1.0 - alpha) / alpha)
    )


def stable_increment(
    stream: NoiseStream, alpha: float, dt: float, skew: float = 0.0
) -> float:
    """One alpha-stable Levy increment over dt: dt**(1/alpha) * S.

    S is a standard stable variate from the Chambers-Mallows-Stuck sampler.
    A (phi, w) pair is consumed per draw for every alpha so the stream
    protocol does not depend on parameters.
    """
    _check_stable_args(alpha, skew, dt)
    phi = stream.rng.uniform(-_HALF_PI, _HALF_PI)
    w = stream.rng.standard_exponential()
    return dt ** (1.0 / alpha) * float(_cms_standard(alpha, skew, phi, w))


def stable_increments(
    stream: NoiseStream, alpha: float, dt: float, n: int, skew: float = 0.0
) -> np.ndarray:
    """Block of n stable increments (phi block then w block; block protocol)."""
    _check_stable_args(alpha, skew, dt)
    phi = stream.rng.uniform(-_HALF_PI, _HALF_PI, n)
    w = stream.rng.standard_exponential(n)
    return dt ** (1.0 / alpha) * _cms_standard(alpha, skew, phi, w)


def _check_stable_args(alpha: float, skew: float, dt: float) -> None:
    if not 0.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (0, 2]")
    if not -1.0 <= skew <= 1.0:
        raise ValueError("skew must lie in [-1, 1]")
    if dt <= 0:
        raise ValueError("dt must be > 0")


def jump_batch(
    stream: NoiseStream, lam: float, dt: float, jump_law: JumpLaw
) -> list[float]:
    """Jumps arriving during one step: count ~ Poisson(lam * dt), iid sizes.

    The Poisson measure is used uncompensated; an empty list means no event.
    Per step the stream consumes one count draw, then one draw per size.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if lam == 0.0:
        return []
    count = int(stream.rng.poisson(lam * dt))
    if count == 0:
        return []
    return jump_law.sample(stream.rng, count).tolist()
