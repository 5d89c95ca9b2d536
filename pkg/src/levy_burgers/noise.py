"""Cylindrical Levy noise with a truncated alpha-stable jump measure.

Each mode ``k = +-1..+-N`` carries an independent scalar Levy process with
triplet ``(0, 0, mu)`` where

    mu(dy) = intensity_scale * taper(|y|) / |y|**(1 + alpha) dy,

and ``taper`` is a cosine ramp from 1 at ``|y| = 1`` to 0 at ``|y| = 2``.
Jumps of size ``|y| >= delta`` are simulated exactly as a compound Poisson
process; the compensated jumps below ``delta`` are replaced by a Gaussian of
matched variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _integrate

from .spectral import TWO_PI, FourierField

MAX_REJECTION_ROUNDS = 200


@dataclass(frozen=True)
class LevyMeasureConfig:
    alpha: float = 1.5
    small_jump_cutoff: float = 0.05
    intensity_scale: float = 1.0
    inner_radius: float = 1.0
    outer_radius: float = 2.0

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not 0.0 < self.small_jump_cutoff < self.inner_radius < self.outer_radius:
            raise ValueError("need 0 < small_jump_cutoff < inner_radius < outer_radius")
        if self.intensity_scale < 0:
            raise ValueError("intensity_scale must be nonnegative")


def taper(r, m: LevyMeasureConfig | None = None):
    """Cosine truncation: 1 inside the inner radius, 0 beyond the outer one."""
    m = m or LevyMeasureConfig()
    a, b = m.inner_radius, m.outer_radius
    r = np.clip(np.abs(np.asarray(r, dtype=float)), a, b)
    return 0.5 * (1.0 + np.cos(np.pi * (r - a) / (b - a)))


def measure_density(y: float, m: LevyMeasureConfig) -> float:
    if y == 0:
        raise ValueError("the Levy density is singular at y = 0")
    r = abs(y)
    return m.intensity_scale * float(taper(r, m)) / r ** (1.0 + m.alpha)


@lru_cache(maxsize=256)
def _radial_integral(m: LevyMeasureConfig, power: float, lo: float) -> float:
    """``2 * int_{lo}^{outer} taper(y) y**(power - 1 - alpha) dy`` (both signs)."""
    if lo >= m.outer_radius:
        return 0.0
    e = power - 1.0 - m.alpha
    f = lambda y: float(taper(y, m)) * y**e
    total = 0.0
    pieces = [(lo, m.inner_radius), (m.inner_radius, m.outer_radius)]
    for a, b in pieces:
        a = max(a, lo)
        if b <= a:
            continue
        val, _ = _integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
    return 2.0 * m.intensity_scale * total


def jump_rate(m: LevyMeasureConfig) -> float:
    """Total mass of ``mu`` on ``|y| >= delta``: the compound-Poisson rate."""
    return _radial_integral(m, 0.0, m.small_jump_cutoff)


def small_jump_variance(m: LevyMeasureConfig) -> float:
    """``int_{|y| < delta} y**2 mu(dy)``, in closed form."""
    d = m.small_jump_cutoff
    return 2.0 * m.intensity_scale * d ** (2.0 - m.alpha) / (2.0 - m.alpha)


def large_jump_moment(m: LevyMeasureConfig, order: int) -> float:
    """``int_{|y| >= delta} y**order mu(dy)`` for even ``order`` (odd ones vanish)."""
    if order % 2:
        return 0.0
    return _radial_integral(m, float(order), m.small_jump_cutoff)


def _draw_jumps(m: LevyMeasureConfig, count: int, rng: np.random.Generator, stats=None):
    """Rejection sampler for jumps with density proportional to mu on |y| >= delta.

    The proposal is the symmetric Pareto law ``|y|**(-1-alpha)`` on
    ``[delta, outer_radius]`` and a proposal is kept with probability
    ``taper(|y|)``.
    """
    out = np.empty(count)
    if count == 0:
        return out
    a = m.alpha
    lo = m.small_jump_cutoff ** (-a)
    span = lo - m.outer_radius ** (-a)
    filled = 0
    rounds = 0
    while filled < count:
        if rounds >= MAX_REJECTION_ROUNDS:
            raise RuntimeError("rejection sampler failed to terminate")
        n = count - filled
        u = rng.random((3, n))
        r = (lo - u[0] * span) ** (-1.0 / a)
        keep = u[1] < taper(r, m)
        r = np.where(u[2] < 0.5, -r, r)[keep]
        out[filled : filled + r.size] = r
        filled += r.size
        if stats is not None:
            stats["rejected"] = stats.get("rejected", 0) + int(n - r.size)
        rounds += 1
    return out


class IncrementSampler:
    """Vectorized draws of scalar increments ``L(t + dt) - L(t)``.

    Rates and variances are computed once; :meth:`sample` then costs one
    Gaussian and one Poisson draw per increment plus the jumps themselves.
    """

    def __init__(self, m: LevyMeasureConfig, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.measure = m
        self.dt = dt
        self.rate = jump_rate(m)
        self.gauss_std = np.sqrt(small_jump_variance(m) * dt)
        self.stats: dict = {"rejected": 0}

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        x = rng.normal(0.0, self.gauss_std, n) if self.gauss_std > 0 else np.zeros(n)
        if self.rate > 0:
            # n independent Poisson(rate*dt) streams == one Poisson(n*rate*dt)
            # total with owners assigned uniformly
            total = int(rng.poisson(self.rate * self.dt * n))
            if total:
                owner = rng.integers(0, n, total)
                jumps = _draw_jumps(self.measure, total, rng, self.stats)
                x += np.bincount(owner, weights=jumps, minlength=n)
        return x.reshape(shape)


def sample_scalar_increment(dt: float, m: LevyMeasureConfig, rng: np.random.Generator) -> float:
    return float(IncrementSampler(m, dt).sample(rng, 1)[0])


def sample_scalar_increments(dt, m, rng, size) -> np.ndarray:
    return IncrementSampler(m, dt).sample(rng, size)


@dataclass(frozen=True)
class CylindricalNoiseConfig:
    """Mode loadings ``beta_k = amplitude * lambda_k**(-gamma0)``.

    ``amplitude=None`` picks the value giving ``beta_1 = 1``.
    ``sine_scale`` multiplies the loadings of the sine modes ``e_{-k}``; the
    default 1 keeps the forcing homogeneous in space.
    """

    gamma0: float = 1.1
    amplitude: float | None = None
    max_mode: int = 256
    measure: LevyMeasureConfig = field(default_factory=LevyMeasureConfig)
    sine_scale: float = 1.0

    def __post_init__(self):
        if self.gamma0 <= 1.0:
            raise ValueError(f"gamma0 must exceed 1, got {self.gamma0}")
        if self.amplitude is None:
            object.__setattr__(self, "amplitude", TWO_PI ** (2.0 * self.gamma0))
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.max_mode < 0:
            raise ValueError("max_mode must be nonnegative")

    def with_modes(self, max_mode: int) -> CylindricalNoiseConfig:
        return CylindricalNoiseConfig(
            self.gamma0, self.amplitude, max_mode, self.measure, self.sine_scale
        )


def eigenvalues(max_mode: int) -> np.ndarray:
    k = np.arange(1, max_mode + 1, dtype=float)
    return (TWO_PI * k) ** 2


def betas(c: CylindricalNoiseConfig) -> np.ndarray:
    """Loadings as a ``(2, N)`` array: row 0 for ``e_k``, row 1 for ``e_{-k}``."""
    b = c.amplitude * eigenvalues(c.max_mode) ** (-c.gamma0)
    return np.vstack([b, c.sine_scale * b])


@dataclass(frozen=True)
class NoiseIncrement:
    """Raw increments ``dL`` (shape ``(2, N)``) and the loadings applied to them."""

    dL: np.ndarray
    beta: np.ndarray

    @property
    def max_mode(self) -> int:
        return self.dL.shape[1]

    @property
    def field(self) -> FourierField:
        w = self.beta * self.dL
        return FourierField.from_real_basis(w[0], w[1])

    @property
    def coeffs(self) -> np.ndarray:
        w = self.beta * self.dL
        return (w[0] - 1j * w[1]) / np.sqrt(2.0)

    @classmethod
    def zero(cls, max_mode: int) -> NoiseIncrement:
        z = np.zeros((2, max_mode))
        return cls(z, z.copy())


class CylindricalSampler:
    """Draws :class:`NoiseIncrement` values for a fixed ``(config, dt)``."""

    def __init__(self, c: CylindricalNoiseConfig, dt: float):
        self.config = c
        self.dt = dt
        self.beta = betas(c)
        self.scalar = IncrementSampler(c.measure, dt)

    def sample(self, rng: np.random.Generator) -> NoiseIncrement:
        n = self.config.max_mode
        if n == 0 or self.config.amplitude == 0:
            return NoiseIncrement(np.zeros((2, n)), self.beta)
        return NoiseIncrement(self.scalar.sample(rng, (2, n)), self.beta)


def sample_cylindrical_increment(dt: float, c: CylindricalNoiseConfig, rng) -> NoiseIncrement:
    return CylindricalSampler(c, dt).sample(rng)


class CounterStreams:
    """Counter-based generators for the cells ``(seed, trajectory, step)``.

    The Philox key holds ``(seed, trajectory)`` and the high counter words
    hold ``(kind, step)``, so every cell owns a disjoint block of the stream
    and can be regenerated without replaying earlier steps. :meth:`at` resets
    one shared generator in place, which is much cheaper than building a new
    one per step; the returned generator is only valid until the next call.
    """

    def __init__(self, seed: int, trajectory: int = 0):
        key = (int(seed) & 0xFFFFFFFFFFFFFFFF) | ((int(trajectory) & 0xFFFFFFFFFFFFFFFF) << 64)
        self._bg = np.random.Philox(key=key)
        self._gen = np.random.Generator(self._bg)
        self._state = self._bg.state

    def at(self, step: int, kind: int = 0) -> np.random.Generator:
        st = self._state
        st["state"]["counter"] = np.array([0, 0, kind, step], dtype=np.uint64)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen


def stream(seed: int, trajectory: int, step: int, kind: int = 0) -> np.random.Generator:
    """Fresh generator for one ``(seed, trajectory, step)`` cell."""
    return CounterStreams(seed, trajectory).at(step, kind)
