"""Periodic-box spectral discretization.

Fields live on a uniform cubic grid of ``n`` points per axis covering
``[-L/2, L/2)^N``.  Exact Fourier multipliers (Laplacian, bilaplacian and the
associated quadratic forms) are evaluated with real FFTs; everything else
(masses, L^p norms, nonlinear integrals) uses the trapezoidal rule, which on a
periodic grid is the same as the midpoint rule with weight ``h^N``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "RealField",
    "mass",
    "inner",
    "laplacian_norm_sq",
    "gradient_norm_sq",
    "lp_norm",
    "spectral_quadratic_form",
    "apply_laplacian",
    "apply_bilaplacian",
    "apply_gradient",
    "dilate",
    "commensurate_box_length",
]


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    points_per_axis: int
    box_length: float

    def __post_init__(self):
        n = self.points_per_axis
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")
        if int(n) != n or n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {n}")
        if not (math.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive and finite, got {self.box_length}")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "points_per_axis", int(n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dimension

    @property
    def volume(self) -> float:
        return self.box_length**self.dimension

    def axis(self) -> np.ndarray:
        """Sample positions along one axis, centred on the origin."""
        n = self.points_per_axis
        return (np.arange(n) - n // 2) * self.spacing

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = self.axis()
        return tuple(np.meshgrid(*([x] * self.dimension), indexing="ij"))

    def radius_sq(self) -> np.ndarray:
        return sum(c**2 for c in self.coordinates())

    def with_box_length(self, box_length: float) -> "GridSpec":
        return GridSpec(self.dimension, self.points_per_axis, box_length)


class _Spectrum:
    """Cached wavenumber tables for one grid (real-FFT half-spectrum layout)."""

    def __init__(self, grid: GridSpec):
        n, d, L = grid.points_per_axis, grid.dimension, grid.box_length
        self.grid = grid
        full = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
        half = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
        axes = [full] * (d - 1) + [half]
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        self.axes = axes
        self.mesh = mesh
        self.k2 = functools.reduce(np.add, [m**2 for m in mesh])
        self.k4 = self.k2**2
        # Parseval weights: interior columns of the half spectrum stand for
        # two conjugate modes.
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.weights = np.broadcast_to(w, self.k2.shape)
        self.scale = grid.cell_volume / grid.size
        # odd-order multipliers drop the Nyquist mode
        self.odd_mesh = []
        for m in mesh:
            m = m.copy()
            m[np.isclose(np.abs(m), np.pi * n / L)] = 0.0
            self.odd_mesh.append(m)

    def forward(self, samples: np.ndarray) -> np.ndarray:
        return sfft.rfftn(samples)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfftn(coeffs, s=self.grid.shape)

    def quadratic(self, coeffs: np.ndarray, multiplier=None) -> float:
        """``sum multiplier * |f_hat|^2`` scaled so that multiplier 1 gives the mass."""
        power = coeffs.real**2 + coeffs.imag**2
        if multiplier is not None:
            power = power * multiplier
        return float(np.sum(self.weights * power) * self.scale)


@functools.lru_cache(maxsize=128)
def spectrum(grid: GridSpec) -> _Spectrum:
    return _Spectrum(grid)


class RealField:
    """Immutable real samples on a :class:`GridSpec`."""

    __slots__ = ("grid", "samples")

    def __init__(self, grid: GridSpec, samples):
        arr = np.array(samples, dtype=np.float64)
        if arr.size != grid.size:
            raise ValueError(f"expected {grid.size} samples, got {arr.size}")
        arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("field samples must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", arr)

    def __setattr__(self, name, value):
        raise AttributeError("RealField is immutable")

    def __reduce__(self):
        # slots plus the frozen __setattr__ defeat default pickling (worker pools)
        return (RealField, (self.grid, self.samples))

    def __repr__(self):
        return f"RealField({self.grid!r}, max|f|={np.max(np.abs(self.samples)):.3g})"

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "RealField":
        return cls(grid, func(*grid.coordinates()))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RealField":
        return cls(grid, np.zeros(grid.shape))

    def __mul__(self, c):
        return RealField(self.grid, self.samples * float(c))

    __rmul__ = __mul__

    def __add__(self, other: "RealField"):
        _check_same_grid(self, other)
        return RealField(self.grid, self.samples + other.samples)

    def __sub__(self, other: "RealField"):
        _check_same_grid(self, other)
        return RealField(self.grid, self.samples - other.samples)

    def __neg__(self):
        return RealField(self.grid, -self.samples)


def _check_same_grid(a: RealField, b: RealField):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def mass(f: RealField) -> float:
    return float(np.sum(f.samples**2) * f.grid.cell_volume)


def inner(f: RealField, g: RealField) -> float:
    _check_same_grid(f, g)
    return float(np.sum(f.samples * g.samples) * f.grid.cell_volume)


def spectral_quadratic_form(f: RealField, multiplier: str | np.ndarray = "one") -> float:
    """Evaluate ``sum m(xi) |f_hat(xi)|^2`` with the quadrature normalization.

    ``multiplier`` is ``"one"``, ``"k2"``, ``"k4"`` or an array broadcastable to
    the half spectrum.
    """
    sp = spectrum(f.grid)
    if isinstance(multiplier, str):
        multiplier = {"one": None, "k2": sp.k2, "k4": sp.k4}[multiplier]
    return sp.quadratic(sp.forward(f.samples), multiplier)


def laplacian_norm_sq(f: RealField) -> float:
    return spectral_quadratic_form(f, "k4")


def gradient_norm_sq(f: RealField) -> float:
    return spectral_quadratic_form(f, "k2")


def lp_norm(f: RealField, p: float) -> float:
    if not p > 1:
        raise ValueError(f"lp_norm requires p > 1, got {p}")
    return float((np.sum(np.abs(f.samples) ** p) * f.grid.cell_volume) ** (1.0 / p))


def apply_laplacian(f: RealField) -> RealField:
    sp = spectrum(f.grid)
    return RealField(f.grid, sp.inverse(-sp.k2 * sp.forward(f.samples)))


def apply_bilaplacian(f: RealField) -> RealField:
    sp = spectrum(f.grid)
    return RealField(f.grid, sp.inverse(sp.k4 * sp.forward(f.samples)))


def apply_gradient(f: RealField) -> tuple[RealField, ...]:
    """Spectral partial derivatives; the Nyquist mode is dropped on each axis."""
    sp = spectrum(f.grid)
    fh = sp.forward(f.samples)
    return tuple(RealField(f.grid, sp.inverse(1j * m * fh)) for m in sp.odd_mesh)


def dilate(f: RealField, s: float) -> RealField:
    """Mass-preserving dilation ``e^{Ns/2} f(e^s x)``.

    The representation is exact: the samples are rescaled and the box shrinks
    by ``e^{-s}``, so no interpolation takes place.
    """
    if s == 0:
        return f
    grid = f.grid
    new_grid = grid.with_box_length(grid.box_length * math.exp(-s))
    return RealField(new_grid, f.samples * math.exp(0.5 * grid.dimension * s))


def commensurate_box_length(wavenumber: float, approx_length: float) -> float:
    """Closest box length to ``approx_length`` on which ``wavenumber`` is a lattice mode."""
    if wavenumber <= 0:
        return float(approx_length)
    period = 2.0 * np.pi / wavenumber
    return period * max(1, round(approx_length / period))
