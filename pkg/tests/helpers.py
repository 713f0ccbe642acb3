import numpy as np

from binls.model import StatePair
from binls.spectral import GridSpec, spectrum


def bandlimited(grid: GridSpec, rng, kmax: float = 3.0, envelope: float | None = None):
    """Random smooth real samples with spectrum cut at ``|ξ| <= kmax``."""
    sp = spectrum(grid)
    c = rng.standard_normal(sp.k2.shape) + 1j * rng.standard_normal(sp.k2.shape)
    c[sp.k2 > kmax**2] = 0.0
    f = sp.inverse(c)
    f = f / np.max(np.abs(f))
    if envelope is not None:
        f = f * np.exp(-grid.radius_sq() / envelope**2)
    return f


def random_pair(grid: GridSpec, rng, kmax: float = 3.0, envelope: float | None = None) -> StatePair:
    return StatePair.from_arrays(grid, bandlimited(grid, rng, kmax, envelope), bandlimited(grid, rng, kmax, envelope))
