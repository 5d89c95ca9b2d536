"""Time integration of the Levy-forced viscous Burgers equation.

The state is a :class:`~levy_burgers.spectral.FourierField`. The default
scheme is exponential Euler on the mild formulation,

    u_k <- exp(-nu lambda_k dt) (u_k - dt Q_k(u)) + beta_k dL_k,

with ``lambda_k = 4 pi^2 k^2`` and ``Q(u) = (u^2)_x / 2`` evaluated
pseudo-spectrally. ``scheme="etdrk4"`` swaps the deterministic part for the
fourth-order exponential Runge-Kutta method of Cox-Matthews (contour-integral
coefficients after Kassam-Trefethen); the noise enters the same way.

Two independent references live here as well: the Cole-Hopf formula by
direct kernel quadrature, and a Godunov finite-volume solver for the
inviscid (entropy) limit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import BlowUpError, ResolutionError, StepSizeError
from .noise import CounterStreams, CylindricalNoiseConfig, CylindricalSampler, NoiseIncrement
from .spectral import (
    TWO_PI,
    FourierField,
    PhysicalField,
    analyze_array,
    dealias_cutoff,
    default_grid_size,
    synthesize_array,
    write_csv,
)

log = logging.getLogger(__name__)

SCHEMES = ("exp_euler", "etdrk4")
BLOWUP_LIMIT = 1e3


@dataclass(frozen=True)
class SolverConfig:
    """Viscosity, resolution and stepping options.

    ``dt=None`` selects the adaptive step (see :func:`auto_dt`).
    """

    nu: float = 2e-3
    dt: float | None = None
    max_mode: int = 1024
    enable_nonlinearity: bool = True
    noise: CylindricalNoiseConfig | None = None
    scheme: str = "exp_euler"
    cfl_safety: float = 0.5
    dt_update_interval: int = 100
    grid_size: int | None = None
    blowup_limit: float = BLOWUP_LIMIT

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_mode < 1:
            raise ValueError("max_mode must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.grid_size is None:
            object.__setattr__(self, "grid_size", default_grid_size(self.max_mode))
        if self.grid_size < 2 * self.max_mode + 2:
            raise ResolutionError("grid_size must be at least 2 * max_mode + 2")
        if self.noise is not None and self.noise.max_mode != self.max_mode:
            object.__setattr__(self, "noise", self.noise.with_modes(self.max_mode))

    @property
    def eigenvalues(self) -> np.ndarray:
        return (TWO_PI * np.arange(1, self.max_mode + 1)) ** 2

    def cfl_limit(self, u_max: float) -> float:
        """Largest step allowed by the transport bound at speed ``u_max``."""
        if not self.enable_nonlinearity or u_max <= 0:
            return np.inf
        return self.cfl_safety / (TWO_PI * self.max_mode * u_max)


def default_max_mode(nu: float) -> int:
    """Smallest power of two with ``N >= 2 / nu``."""
    need = int(np.ceil(2.0 / nu - 1e-9))
    return 1 << max(need - 1, 1).bit_length()


def auto_dt(cfg: SolverConfig, u_max: float, dt_cap: float = 1e-2) -> float:
    """Adaptive step: the transport bound with a floor on the speed.

    The floor of one keeps the step bounded for nearly quiescent states, and
    ``dt_cap`` keeps the noise time resolution reasonable.
    """
    return min(dt_cap, cfg.cfl_limit(max(u_max, 1.0)))


def nonlinear_term_array(coeffs: np.ndarray, grid_size: int, return_umax=False):
    """Dealiased coefficients of ``u u_x = (u^2)_x / 2`` from coefficient array."""
    n = coeffs.shape[-1]
    u = synthesize_array(coeffs, grid_size)
    sq = analyze_array(u * u, n)
    q = 0.5j * TWO_PI * np.arange(1, n + 1) * sq
    q[..., dealias_cutoff(n) :] = 0.0
    if return_umax:
        return q, float(np.max(np.abs(u))) if u.size else 0.0
    return q


def nonlinear_term(f: FourierField, grid_size: int | None = None) -> FourierField:
    if grid_size is None:
        grid_size = default_grid_size(max(f.max_mode, 1))
    return FourierField(nonlinear_term_array(f.coeffs, grid_size))


def convolution_nonlinear_term(f: FourierField) -> FourierField:
    """O(N^2) direct evaluation of the dealiased ``u u_x``; an oracle for tests."""
    n = f.max_mode
    full = np.zeros(2 * n + 1, dtype=np.complex128)
    full[n + 1 :] = f.coeffs
    full[:n] = np.conj(f.coeffs[::-1])
    out = np.zeros(n, dtype=np.complex128)
    for k in range(1, n + 1):
        s = 0.0j
        for p in range(-n, n + 1):
            q = k - p
            if p == 0 or q == 0 or abs(q) > n:
                continue
            s += full[p + n] * full[q + n]
        out[k - 1] = 0.5j * TWO_PI * k * s
    # keep the 2/3 rule local so the oracle does not share code with the solver
    out[(2 * n) // 3 :] = 0.0
    return FourierField(out)


def _phi_coefficients(z: np.ndarray, contour_points: int = 32):
    """ETDRK4 weights for ``z = -nu lambda dt`` via a contour mean."""
    r = np.exp(1j * np.pi * (np.arange(1, contour_points + 1) - 0.5) / contour_points)
    lr = z[:, None] + r[None, :]
    e = np.exp(lr)
    half = np.real(np.mean((np.exp(lr / 2) - 1.0) / lr, axis=1))
    f1 = np.real(np.mean((-4.0 - lr + e * (4.0 - 3.0 * lr + lr**2)) / lr**3, axis=1))
    f2 = np.real(np.mean((2.0 + lr + e * (-2.0 + lr)) / lr**3, axis=1))
    f3 = np.real(np.mean((-4.0 - 3.0 * lr - lr**2 + e * (4.0 - lr)) / lr**3, axis=1))
    return half, f1, f2, f3


class Stepper:
    """Precomputed propagators for one ``(config, dt)`` pair."""

    def __init__(self, cfg: SolverConfig, dt: float):
        self.cfg = cfg
        self.dt = dt
        z = -cfg.nu * cfg.eigenvalues * dt
        self.decay = np.exp(z)
        if cfg.scheme == "etdrk4":
            self.half_decay = np.exp(z / 2)
            q, f1, f2, f3 = _phi_coefficients(z)
            self.weights = (dt * q, dt * f1, dt * f2, dt * f3)

    def _q(self, c):
        return nonlinear_term_array(c, self.cfg.grid_size, return_umax=True)

    def advance(self, c: np.ndarray, noise: np.ndarray | None):
        """Return ``(new_coeffs, max|u|)`` where the speed is that of the input state."""
        cfg = self.cfg
        if not cfg.enable_nonlinearity:
            out = self.decay * c
            u_max = 2.0 * float(np.sum(np.abs(c)))
        elif cfg.scheme == "exp_euler":
            q, u_max = self._q(c)
            out = self.decay * (c - self.dt * q)
        else:
            wq, w1, w2, w3 = self.weights
            e2 = self.half_decay
            na, u_max = self._q(c)
            na = -na
            a = e2 * c + wq * na
            nb = -self._q(a)[0]
            b = e2 * c + wq * nb
            nc = -self._q(b)[0]
            cc = e2 * a + wq * (2.0 * nc - na)
            nd = -self._q(cc)[0]
            out = self.decay * c + w1 * na + 2.0 * w2 * (nb + nc) + w3 * nd
        if noise is not None:
            out = out + noise
        return out, u_max


@lru_cache(maxsize=32)
def _stepper(cfg: SolverConfig, dt: float) -> Stepper:
    return Stepper(cfg, dt)


def _check_finite(c: np.ndarray, u_max: float, cfg: SolverConfig, prev: np.ndarray, index):
    if not np.isfinite(u_max) or not np.all(np.isfinite(c)) or u_max > cfg.blowup_limit:
        raise BlowUpError(
            f"solution blew up (max|u| = {u_max:.3g}) at step {index}",
            state=FourierField(prev),
            step_index=index,
        )


def step(
    u: FourierField,
    cfg: SolverConfig,
    dL: NoiseIncrement | None = None,
    dt: float | None = None,
) -> FourierField:
    """Advance one step of size ``dt`` (default ``cfg.dt``).

    Raises
    ------
    StepSizeError
        If ``dt`` exceeds the transport bound at the current speed by more
        than the safety factor (i.e. ``dt * 2 pi N max|u| > 1``).
    BlowUpError
        On non-finite values or ``max|u|`` above the blow-up guard.
    """
    dt = cfg.dt if dt is None else dt
    if dt is None:
        raise ValueError("step needs an explicit dt when the config uses auto stepping")
    c = u.coeffs
    if c.shape[0] != cfg.max_mode:
        raise ValueError("field and config disagree on max_mode")
    out, u_max = _stepper(cfg, dt).advance(c, None if dL is None else dL.coeffs)
    if cfg.enable_nonlinearity and dt * TWO_PI * cfg.max_mode * u_max > 1.0:
        raise StepSizeError(f"dt = {dt:.3g} violates the CFL bound at max|u| = {u_max:.3g}")
    _check_finite(out, u_max, cfg, c, None)
    return FourierField(out)


Observer = Callable[[float, FourierField, int], None]


@dataclass
class IntegrationInfo:
    steps: int = 0
    dt_history: list = field(default_factory=list)
    failed_step: int | None = None


def integrate(
    u0: FourierField,
    cfg: SolverConfig,
    t_end: float,
    observers: Sequence[Observer] = (),
    *,
    seed: int = 0,
    trajectory: int = 0,
    sample_stride: int = 1,
    info: IntegrationInfo | None = None,
    dump_dir: str | Path | None = None,
) -> FourierField:
    """Integrate from ``u0`` to ``t_end``.

    One cylindrical increment is drawn per step from the counter-based stream
    ``(seed, trajectory, step)``, so a trajectory is reproducible from its
    inputs alone. Observers receive ``(t, u, step_index)`` at ``t = 0`` and
    every ``sample_stride`` steps thereafter.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    info = info if info is not None else IntegrationInfo()
    c = np.array(u0.truncate(cfg.max_mode).coeffs)
    for obs in observers:
        obs(0.0, FourierField(c), 0)
    if t_end == 0:
        return FourierField(c)

    samplers: dict[float, CylindricalSampler] = {}
    streams = CounterStreams(seed, trajectory)
    fixed = cfg.dt is not None
    t = 0.0
    n = 0
    u_max = 2.0 * float(np.sum(np.abs(c)))
    dt = cfg.dt if fixed else auto_dt(cfg, u_max)
    while t < t_end * (1 - 1e-14):
        if not fixed and n % cfg.dt_update_interval == 0:
            dt = auto_dt(cfg, u_max)
        h = min(dt, t_end - t)
        if cfg.noise is not None:
            sampler = samplers.get(h)
            if sampler is None:
                if len(samplers) > 8:
                    samplers.clear()
                sampler = samplers[h] = CylindricalSampler(cfg.noise, h)
            noise = sampler.sample(streams.at(n)).coeffs
        else:
            noise = None
        try:
            out, u_max = _stepper(cfg, h).advance(c, noise)
            if cfg.enable_nonlinearity and h * TWO_PI * cfg.max_mode * u_max > 1.0:
                if fixed:
                    raise StepSizeError(
                        f"dt = {h:.3g} violates the CFL bound at max|u| = {u_max:.3g}"
                    )
                # speed jumped since the last re-evaluation: shrink and retry
                dt = auto_dt(cfg, u_max)
                continue
            _check_finite(out, u_max, cfg, c, n)
        except (BlowUpError, StepSizeError) as exc:
            info.failed_step = n
            if isinstance(exc, BlowUpError) and dump_dir is not None:
                path = Path(dump_dir) / f"traj{trajectory}_t{t:.6f}.csv"
                path.parent.mkdir(parents=True, exist_ok=True)
                write_csv(FourierField(c), path)
                log.error("blow-up state written to %s", path)
            if isinstance(exc, BlowUpError):
                exc.step_index = n
            raise
        c = out
        t += h
        n += 1
        info.steps = n
        if not info.dt_history or info.dt_history[-1] != h:
            info.dt_history.append(h)
        if observers and n % sample_stride == 0:
            f = FourierField(c)
            for obs in observers:
                obs(t, f, n)
    return FourierField(c)


def cole_hopf_reference(
    u0: PhysicalField, nu: float, t: float, quad_points: int = 2048
) -> PhysicalField:
    """Noise-free viscous solution at time ``t`` from the Cole-Hopf formula.

    With ``F(y) = int_0^y u0``, the solution is the ratio

        u(t, x) = sum_j w_j (x - y_j) / t / sum_j w_j,
        w_j = exp(-(x - y_j)^2 / (4 nu t) - F(y_j) / (2 nu)),

    over quadrature nodes ``y_j`` on [0, 1) and their periodic images; the
    trapezoid rule on the periodized kernel converges geometrically. ``F`` is
    evaluated spectrally from the band-limited ``u0``. The result is sampled
    on the grid of ``u0``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    g = u0.grid_size
    width = np.sqrt(2.0 * nu * t)
    if quad_points < 2 * ((g - 2) // 2) + 2 or 1.0 / quad_points > 0.5 * width:
        raise ResolutionError(
            f"{quad_points} quadrature nodes cannot resolve kernel width {width:.3g}"
        )
    n = (g - 2) // 2
    c = analyze_array(u0.samples, n)
    k = np.arange(1, n + 1)
    fc = c / (1j * TWO_PI * k)
    y = np.arange(quad_points) / quad_points
    F = synthesize_array(fc, quad_points)
    F = F - F[0]
    x = u0.grid
    images = int(np.ceil(10.0 * width)) + 1
    shifts = np.arange(-images, images + 1, dtype=float)
    out = np.empty(g)
    base = -F / (2.0 * nu)
    chunk = max(1, int(4_000_000 // (quad_points * shifts.size)))
    for s in range(0, g, chunk):
        xs = x[s : s + chunk]
        d = xs[:, None, None] - y[None, None, :] + shifts[None, :, None]
        lw = -(d * d) / (4.0 * nu * t) + base[None, None, :]
        lw -= lw.max(axis=(1, 2), keepdims=True)
        w = np.exp(lw)
        out[s : s + chunk] = (w * d).sum(axis=(1, 2)) / w.sum(axis=(1, 2)) / t
    return PhysicalField(out)


# ---------------------------------------------------------------------------
# inviscid limit


@dataclass(frozen=True, eq=False)
class CellField:
    """Cell averages over a uniform partition of [0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.grid_size) + 0.5) / self.grid_size

    @property
    def mass(self) -> float:
        return float(np.mean(self.values))

    @classmethod
    def from_function(cls, fn, grid_size: int, quad: int = 8) -> CellField:
        """Cell averages of ``fn`` by Gauss-Legendre quadrature in each cell."""
        xg, wg = np.polynomial.legendre.leggauss(quad)
        h = 1.0 / grid_size
        left = np.arange(grid_size) * h
        pts = left[:, None] + 0.5 * h * (xg[None, :] + 1.0)
        return cls((fn(pts) * wg[None, :]).sum(axis=1) / 2.0)

    def to_fourier(self, max_mode: int) -> FourierField:
        """Modes of the piecewise-constant field sampled at the cell centers."""
        c = analyze_array(self.values, max_mode)
        phase = np.exp(-1j * np.pi * np.arange(1, max_mode + 1) / self.grid_size)
        return FourierField(c * phase)


def godunov_step(c: CellField, dt: float, cfl: float = 1.0) -> CellField:
    """One Godunov update for ``u_t + (u^2/2)_x = 0``; exact mass conservation.

    Raises
    ------
    StepSizeError
        If ``dt * max|u| > cfl * dx``.
    """
    dx = 1.0 / c.grid_size
    u_max = float(np.max(np.abs(c.values))) if c.grid_size else 0.0
    if dt * u_max > cfl * dx * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3g} exceeds the CFL bound {dx / max(u_max, 1e-300):.3g}")
    return CellField(kernels.godunov_update(c.values, dt / dx))


def _cell_noise(dL: NoiseIncrement, grid_size: int) -> np.ndarray:
    n = dL.max_mode
    phase = np.exp(1j * np.pi * np.arange(1, n + 1) / grid_size)
    return synthesize_array(dL.coeffs * phase, grid_size)


def inviscid_integrate(
    u0: CellField,
    noise: CylindricalNoiseConfig | None,
    t_end: float,
    observers: Sequence[Callable[[float, CellField, int], None]] = (),
    *,
    seed: int = 0,
    trajectory: int = 0,
    cfl: float = 0.5,
    sample_stride: int = 1,
    dt_cap: float = 1e-2,
    info: IntegrationInfo | None = None,
) -> CellField:
    """Forced entropy solution by Strang splitting.

    Each step is a Godunov half step, the noise increment over the full step
    evaluated at the cell centers, and a second Godunov half step. The noise
    is truncated to the modes the grid can represent.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    info = info if info is not None else IntegrationInfo()
    g = u0.grid_size
    dx = 1.0 / g
    v = np.array(u0.values)
    for obs in observers:
        obs(0.0, CellField(v), 0)
    if t_end == 0:
        return CellField(v)
    if noise is not None:
        noise = noise.with_modes(min(noise.max_mode, (g - 2) // 2))
    samplers: dict[float, CylindricalSampler] = {}
    streams = CounterStreams(seed, trajectory)
    t = 0.0
    n = 0
    while t < t_end * (1 - 1e-14):
        u_max = float(np.max(np.abs(v)))
        h = min(dt_cap, cfl * dx / max(u_max, 1.0), t_end - t)
        v = kernels.godunov_update(v, 0.5 * h / dx)
        if noise is not None:
            sampler = samplers.get(h)
            if sampler is None:
                if len(samplers) > 8:
                    samplers.clear()
                sampler = samplers[h] = CylindricalSampler(noise, h)
            v = v + _cell_noise(sampler.sample(streams.at(n)), g)
        u_max = float(np.max(np.abs(v)))
        if not np.isfinite(u_max) or u_max > BLOWUP_LIMIT:
            info.failed_step = n
            raise BlowUpError(f"inviscid solution blew up at step {n}", step_index=n)
        # the kick can raise the speed; split the second half step if needed
        sub = max(1, int(np.ceil(0.5 * h * u_max / (cfl * dx))))
        for _ in range(sub):
            v = kernels.godunov_update(v, 0.5 * h / sub / dx)
        t += h
        n += 1
        info.steps = n
        if observers and n % sample_stride == 0:
            cf = CellField(v)
            for obs in observers:
                obs(t, cf, n)
    return CellField(v)


def with_noise(cfg: SolverConfig, noise: CylindricalNoiseConfig | None) -> SolverConfig:
    return replace(cfg, noise=noise)
