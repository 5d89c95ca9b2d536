"""Fourier representation of real zero-mean fields on the unit circle.

A field is stored by its complex coefficients ``u_k`` for ``k = 1..N``; the
negative modes follow from Hermitian symmetry and the mean is identically
zero, so

    u(x) = sum_{k=1}^{N} 2 Re(u_k exp(2 pi i k x)),   x in [0, 1).

In the real trigonometric basis ``e_k = sqrt(2) cos(2 pi k x)`` (k > 0) and
``e_{-k} = sqrt(2) sin(2 pi k x)`` the coefficients are related by
``u_k = (a_k - i a_{-k}) / sqrt(2)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MassConservationError, ResolutionError

TWO_PI = 2.0 * np.pi
MEAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FourierField:
    """Complex coefficients ``coeffs[k-1] = u_k`` for ``k = 1..max_mode``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def max_mode(self) -> int:
        return self.coeffs.shape[0]

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.max_mode + 1)

    @classmethod
    def zeros(cls, max_mode: int) -> FourierField:
        return cls(np.zeros(max_mode, dtype=np.complex128))

    @classmethod
    def from_real_basis(cls, cos_coeffs, sin_coeffs) -> FourierField:
        """Build from coefficients on ``e_k`` (cosines) and ``e_{-k}`` (sines)."""
        a = np.asarray(cos_coeffs, dtype=float)
        b = np.asarray(sin_coeffs, dtype=float)
        return cls((a - 1j * b) / np.sqrt(2.0))

    def real_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Inverse of :meth:`from_real_basis`."""
        s = np.sqrt(2.0)
        return s * self.coeffs.real, -s * self.coeffs.imag

    def truncate(self, max_mode: int) -> FourierField:
        """Drop or zero-pad modes so the result has exactly ``max_mode`` modes."""
        out = np.zeros(max_mode, dtype=np.complex128)
        m = min(max_mode, self.max_mode)
        out[:m] = self.coeffs[:m]
        return FourierField(out)

    def __add__(self, other: FourierField) -> FourierField:
        return FourierField(self.coeffs + other.coeffs)

    def __sub__(self, other: FourierField) -> FourierField:
        return FourierField(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> FourierField:
        return FourierField(self.coeffs * scalar)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, FourierField):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PhysicalField:
    """Samples on the uniform grid ``x_j = j / G``."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float).reshape(-1)
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def grid_size(self) -> int:
        return self.samples.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.grid_size) / self.grid_size


def default_grid_size(max_mode: int) -> int:
    """Grid with enough headroom that a quadratic product is alias-free."""
    return 4 * max_mode


def _check_grid(grid_size: int, max_mode: int) -> None:
    if grid_size < 2 * max_mode + 2:
        raise ResolutionError(
            f"grid of {grid_size} points cannot resolve {max_mode} modes "
            f"(need at least {2 * max_mode + 2})"
        )


def synthesize_array(coeffs: np.ndarray, grid_size: int) -> np.ndarray:
    """Evaluate coefficient array(s) on the grid; works along the last axis."""
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[-1]
    _check_grid(grid_size, n)
    spec = np.zeros(coeffs.shape[:-1] + (grid_size // 2 + 1,), dtype=np.complex128)
    spec[..., 1 : n + 1] = coeffs
    return np.fft.irfft(spec, n=grid_size) * grid_size


def analyze_array(samples: np.ndarray, max_mode: int) -> np.ndarray:
    """Coefficients ``k = 1..max_mode`` of real samples; the mean is dropped."""
    samples = np.asarray(samples)
    g = samples.shape[-1]
    _check_grid(g, max_mode)
    return np.fft.rfft(samples)[..., 1 : max_mode + 1] / g


def synthesize(f: FourierField, grid_size: int | None = None) -> PhysicalField:
    """Evaluate ``f`` on a uniform grid of ``grid_size`` points (default 4N)."""
    if grid_size is None:
        grid_size = default_grid_size(max(f.max_mode, 1))
    return PhysicalField(synthesize_array(f.coeffs, grid_size))


def analyze(p: PhysicalField, max_mode: int) -> FourierField:
    """Discrete Fourier coefficients of a zero-mean field.

    Raises
    ------
    MassConservationError
        If the sample mean exceeds ``1e-10`` (relative to the field scale
        when that is larger than one).
    """
    s = p.samples
    scale = max(1.0, float(np.max(np.abs(s)))) if s.size else 1.0
    mean = float(np.mean(s)) if s.size else 0.0
    if abs(mean) > MEAN_TOL * scale:
        raise MassConservationError(f"field mean {mean:.3e} is not zero")
    return FourierField(analyze_array(s, max_mode))


def sobolev_norm(f: FourierField, theta: float) -> float:
    """Homogeneous Sobolev norm ``||u||_theta``; ``theta = 0`` is the L2 norm."""
    return float(np.sqrt(sobolev_norm_sq(f.coeffs, theta)))


def sobolev_norm_sq(coeffs: np.ndarray, theta: float) -> float:
    k = np.arange(1, coeffs.shape[-1] + 1, dtype=float)
    w = 2.0 * (TWO_PI * k) ** (2.0 * theta)
    return float(np.sum(w * (coeffs.real**2 + coeffs.imag**2)))


def derivative(f: FourierField, order: int = 1) -> FourierField:
    if order < 0:
        raise ValueError("derivative order must be nonnegative")
    if order == 0:
        return f
    return FourierField(f.coeffs * (1j * TWO_PI * f.wavenumbers) ** order)


def shift_increment(f: FourierField, l: float) -> FourierField:
    """Coefficients of ``x -> u(x + l) - u(x)``, shifted exactly in Fourier space."""
    return FourierField(f.coeffs * (np.exp(1j * TWO_PI * f.wavenumbers * l) - 1.0))


def dealias_cutoff(max_mode: int) -> int:
    return (2 * max_mode) // 3


def dealias(f: FourierField) -> FourierField:
    """2/3 rule: zero every mode above ``floor(2N/3)``."""
    c = np.array(f.coeffs)
    c[dealias_cutoff(f.max_mode) :] = 0.0
    return FourierField(c)


def write_csv(f: FourierField, path) -> None:
    """Snapshot format: header ``k,re,im`` and one row per mode."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "re", "im"])
        for k, c in zip(f.wavenumbers, f.coeffs):
            w.writerow([int(k), f"{c.real:.17g}", f"{c.imag:.17g}"])


def read_csv(path) -> FourierField:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return FourierField.zeros(0)
    n = max(int(r["k"]) for r in rows)
    c = np.zeros(n, dtype=np.complex128)
    for r in rows:
        k = int(r["k"])
        if k < 1:
            raise ValueError(f"mode index {k} out of range")
        c[k - 1] = complex(float(r["re"]), float(r["im"]))
    return FourierField(c)
