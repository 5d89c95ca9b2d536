"""Estimators for double averages over a time window and an ensemble.

``<<R>> = (1/sigma) int_T^{T+sigma} E[R(t)] dt`` is discretized as the equal
weight mean over snapshots taken on a uniform time grid inside the window,
pooled over trajectories. A :class:`StatAccumulator` holds running sums for
one or many trajectories; :func:`merge` combines them in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    DegenerateStatisticError,
    FitError,
    MissingStatisticError,
    ResolutionError,
    SchemaError,
    WindowError,
)
from .spectral import TWO_PI, FourierField, default_grid_size, shift_increment, synthesize_array

WINDOW_SLACK = 1e-9


@dataclass(frozen=True)
class AveragingWindow:
    """Window ``[burn_in, burn_in + sigma]`` and ensemble size.

    ``sample_stride`` counts nominal solver steps between snapshots; the
    harness turns it into a fixed time interval so that adaptive stepping
    does not bias the average toward fast (small-step) states.
    """

    burn_in: float = 1.0
    sigma: float = 5.0
    sample_stride: int = 50
    ensemble_size: int = 8

    def __post_init__(self):
        if self.burn_in < 1.0:
            raise ValueError("burn_in must be at least 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.sample_stride < 1 or self.ensemble_size < 1:
            raise ValueError("sample_stride and ensemble_size must be positive")

    @property
    def end(self) -> float:
        return self.burn_in + self.sigma

    def contains(self, t: float) -> bool:
        return self.burn_in - WINDOW_SLACK <= t <= self.end + WINDOW_SLACK


@dataclass(frozen=True)
class StatRequests:
    """Which statistics to collect.

    ``increments`` are the (p, l) grid for structure functions and
    ``sobolev`` the (n, k) pairs for moments ``||u||_n**k``. Per-mode energy
    and the Oleinik maxima are always collected.
    """

    p_values: tuple = (0.5, 1.0, 2.0, 3.0)
    l_values: tuple = ()
    sobolev: tuple = ((0.0, 2.0), (1.0, 2.0), (2.0, 2.0))

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "l_values", tuple(float(l) for l in self.l_values))
        object.__setattr__(self, "sobolev", tuple((float(n), float(k)) for n, k in self.sobolev))
        if any(p <= 0 for p in self.p_values):
            raise ValueError("structure-function orders must be positive")
        if any(not 0.0 < l < 1.0 for l in self.l_values):
            raise ValueError("increment lengths must lie in (0, 1)")
        if any(n < 0 or k < 1 for n, k in self.sobolev):
            raise ValueError("Sobolev moments need n >= 0 and k >= 1")


@dataclass(frozen=True)
class SpectrumConfig:
    layer_width: float = 2.0

    def __post_init__(self):
        if self.layer_width <= 1.0:
            raise ValueError("layer_width M must exceed 1")

    def layer(self, n: int) -> tuple[int, int]:
        m = self.layer_width
        return int(np.ceil(n / m - 1e-12)), int(np.floor(n * m + 1e-12))


@dataclass
class StatAccumulator:
    """Mergeable running sums over snapshots."""

    requests: StatRequests
    max_mode: int
    count: int = 0
    mode_power: np.ndarray = None
    increments: np.ndarray = None
    sobolev: np.ndarray = None
    oleinik_max: np.ndarray = None
    oleinik_records: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode_power is None:
            self.mode_power = np.zeros(self.max_mode)
        if self.increments is None:
            self.increments = np.zeros((len(self.requests.l_values), len(self.requests.p_values)))
        if self.sobolev is None:
            self.sobolev = np.zeros(len(self.requests.sobolev))
        if self.oleinik_max is None:
            self.oleinik_max = np.full(3, -np.inf)

    @classmethod
    def empty(cls, requests: StatRequests, max_mode: int) -> StatAccumulator:
        return cls(requests, max_mode)

    def copy(self) -> StatAccumulator:
        return StatAccumulator(
            self.requests,
            self.max_mode,
            self.count,
            self.mode_power.copy(),
            self.increments.copy(),
            self.sobolev.copy(),
            self.oleinik_max.copy(),
            list(self.oleinik_records),
        )

    def add(self, u: FourierField, t: float) -> StatAccumulator:
        """Add one snapshot in place (no window check); returns ``self``."""
        if u.max_mode != self.max_mode:
            raise ValueError("snapshot resolution differs from the accumulator's")
        c = u.coeffs
        power = c.real**2 + c.imag**2
        self.mode_power += power
        req = self.requests
        if req.l_values:
            self.increments += increment_moments(u, req.l_values, req.p_values)
        k = np.arange(1, self.max_mode + 1, dtype=float)
        for i, (n, kk) in enumerate(req.sobolev):
            norm_sq = float(np.sum(2.0 * (TWO_PI * k) ** (2.0 * n) * power))
            self.sobolev[i] += norm_sq ** (kk / 2.0)
        ol = np.array(oleinik_statistic(u, t))
        self.oleinik_max = np.maximum(self.oleinik_max, ol)
        self.oleinik_records.append((float(t), *map(float, ol)))
        self.count += 1
        return self

    # queries -------------------------------------------------------------

    def _need_samples(self):
        if self.count == 0:
            raise MissingStatisticError("no snapshots accumulated")

    def mean_mode_power(self) -> np.ndarray:
        """``<<|u_k|^2>>`` for ``k = 1..N``."""
        self._need_samples()
        return self.mode_power / self.count

    def _increment_index(self, p: float, l: float) -> tuple[int, int]:
        req = self.requests
        try:
            i = _index_of(req.l_values, l)
            j = _index_of(req.p_values, p)
        except ValueError:
            raise MissingStatisticError(f"structure function (p={p}, l={l}) was not requested")
        return i, j

    def _sobolev_index(self, n: float, k: float) -> int:
        try:
            return self.requests.sobolev.index((float(n), float(k)))
        except ValueError:
            raise MissingStatisticError(f"Sobolev moment (n={n}, k={k}) was not requested")


def _index_of(values: tuple, x: float) -> int:
    for i, v in enumerate(values):
        if abs(v - x) <= 1e-12 * max(1.0, abs(x)):
            return i
    raise ValueError(x)


def increment_moments(u: FourierField, l_values, p_values, grid_size: int | None = None):
    """``int |u(x+l) - u(x)|**p dx`` for every (l, p); rows follow ``l_values``."""
    g = grid_size or default_grid_size(max(u.max_mode, 1))
    k = u.wavenumbers
    ls = np.asarray(l_values, dtype=float)
    shifted = u.coeffs[None, :] * (np.exp(1j * TWO_PI * ls[:, None] * k[None, :]) - 1.0)
    diffs = synthesize_array(shifted, g)
    return kernels.increment_power_means(diffs, np.asarray(p_values, dtype=float))


def increment_moment(u: FourierField, l: float, p: float, grid_size: int | None = None) -> float:
    """Single-snapshot ``int |u(x+l) - u(x)|**p dx`` via :func:`shift_increment`."""
    g = grid_size or default_grid_size(max(u.max_mode, 1))
    d = synthesize_array(shift_increment(u, l).coeffs, g)
    return float(np.mean(np.abs(d) ** p))


def accumulate(
    acc: StatAccumulator,
    u: FourierField,
    t: float,
    window: AveragingWindow | None = None,
) -> StatAccumulator:
    """Return a new accumulator with the snapshot ``u`` at time ``t`` added.

    Raises
    ------
    WindowError
        If ``window`` is given and ``t`` lies outside it.
    """
    if window is not None and not window.contains(t):
        raise WindowError(f"t = {t} is outside [{window.burn_in}, {window.end}]")
    return acc.copy().add(u, t)


def merge(a: StatAccumulator, b: StatAccumulator) -> StatAccumulator:
    if a.requests != b.requests or a.max_mode != b.max_mode:
        raise SchemaError("cannot merge accumulators with different request sets")
    # records are sorted so the result does not depend on argument order
    records = sorted(a.oleinik_records + b.oleinik_records)
    return StatAccumulator(
        a.requests,
        a.max_mode,
        a.count + b.count,
        a.mode_power + b.mode_power,
        a.increments + b.increments,
        a.sobolev + b.sobolev,
        np.maximum(a.oleinik_max, b.oleinik_max),
        records,
    )


def merge_all(accs) -> StatAccumulator:
    accs = list(accs)
    if not accs:
        raise ValueError("nothing to merge")
    out = accs[0]
    for a in accs[1:]:
        out = merge(out, a)
    return out


def structure_function(acc: StatAccumulator, p: float, l: float) -> float:
    """``S_p(l) = <<int |u(x+l) - u(x)|**p dx>>``."""
    i, j = acc._increment_index(p, l)
    acc._need_samples()
    return float(acc.increments[i, j] / acc.count)


def energy_spectrum(acc: StatAccumulator, n: int, cfg: SpectrumConfig | None = None) -> float:
    """Layer-averaged spectrum ``E_n``.

    ``E_n = 1/(2n(M - 1/M)) * sum_{n/M <= |k| <= Mn} <<|u_k|^2>> / 2``; the sum
    runs over both signs of ``k``, which doubles the one-sided sum.
    """
    cfg = cfg or SpectrumConfig()
    if n < 1:
        raise ValueError("n must be a positive integer")
    lo, hi = cfg.layer(n)
    if hi > acc.max_mode:
        raise ResolutionError(f"layer up to k = {hi} exceeds max_mode = {acc.max_mode}")
    power = acc.mean_mode_power()
    m = cfg.layer_width
    total = float(np.sum(power[max(lo, 1) - 1 : hi]))
    return total / (2.0 * n * (m - 1.0 / m))


def energy_spectrum_curve(acc: StatAccumulator, n_values, cfg: SpectrumConfig | None = None):
    return np.array([energy_spectrum(acc, int(n), cfg) for n in n_values])


def sobolev_moment(acc: StatAccumulator, n: float, k: float) -> float:
    """``<<||u||_n ** k>>``."""
    i = acc._sobolev_index(n, k)
    acc._need_samples()
    return float(acc.sobolev[i] / acc.count)


def oleinik_statistic(u: FourierField, t: float, grid_size: int | None = None):
    """``(t |u|_inf, t |u_x|_1, t max(u_x)^+)`` on the synthesis grid."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if u.max_mode == 0:
        return 0.0, 0.0, 0.0
    g = grid_size or default_grid_size(u.max_mode)
    k = u.wavenumbers
    both = np.vstack([u.coeffs, u.coeffs * (1j * TWO_PI * k)])
    vals, du = synthesize_array(both, g)
    return (
        t * float(np.max(np.abs(vals))),
        t * float(np.mean(np.abs(du))),
        t * max(float(np.max(du)), 0.0),
    )


def flatness_ratio(acc: StatAccumulator, p: float, q: float, l: float) -> float:
    """``S_p(l)**(1/p) / S_q(l)**(1/q)``."""
    sp = structure_function(acc, p, l)
    sq = structure_function(acc, q, l)
    if sq == 0.0:
        raise DegenerateStatisticError(f"S_{q}({l}) is zero")
    return sp ** (1.0 / p) / sq ** (1.0 / q)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through ``(log x, log y)``."""

    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple
    n_points: int
    slope_stderr: float = float("nan")

    def prefactor(self) -> float:
        return float(np.exp(self.intercept))

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "range": list(self.fit_range),
            "n_points": self.n_points,
            "slope_stderr": self.slope_stderr,
        }


def fit_power_law(points, fit_range=None) -> ScalingFit:
    """Fit ``y = C x**slope`` on the points whose ``x`` lies in ``fit_range``.

    Raises
    ------
    FitError
        With fewer than three points in range, or nonpositive ``x``/``y`` there.
    """
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if fit_range is None:
        lo, hi = -np.inf, np.inf
    else:
        lo, hi = fit_range
    sel = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12))
    x, y = x[sel], y[sel]
    if x.size < 3:
        raise FitError(f"need at least 3 points in range, got {x.size}")
    if np.any(y <= 0) or np.any(x <= 0):
        raise FitError("power-law fit needs positive x and y")
    lx, ly = np.log(x), np.log(y)
    xm, ym = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - xm) ** 2))
    if sxx == 0.0:
        raise FitError("all x values coincide")
    slope = float(np.sum((lx - xm) * (ly - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = ly - (intercept + slope * lx)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ym) ** 2))
    # constant data leaves only log round-off in ss_tot; the line is then exact
    flat = ss_tot <= 1e-24 * x.size * max(1.0, ym * ym)
    r2 = 1.0 if flat else 1.0 - ss_res / ss_tot
    dof = x.size - 2
    stderr = float(np.sqrt(ss_res / dof / sxx)) if dof > 0 else float("nan")
    rng = (float(lo), float(hi)) if fit_range is not None else (float(x.min()), float(x.max()))
    return ScalingFit(slope, intercept, r2, rng, int(x.size), stderr)
