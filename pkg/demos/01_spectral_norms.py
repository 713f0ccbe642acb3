"""
Norms and dilations on the periodic box
=======================================

Every quantity in the package is a spectral quadrature on ``[-L/2, L/2)^N``.
This script checks a few of them against closed forms.
"""

import math

import numpy as np

from binls.spectral import (
    GridSpec,
    RealField,
    dilate,
    gradient_norm_sq,
    laplacian_norm_sq,
    mass,
)

# %%
# A Gaussian on a wide box: the moments are known exactly.
grid = GridSpec(1, 512, 40.0)
f = RealField.from_function(grid, lambda x: np.exp(-x**2 / 2))
print("mass       ", mass(f), "exact", math.sqrt(math.pi))
print("|grad f|^2 ", gradient_norm_sq(f), "exact", 0.5 * math.sqrt(math.pi))
print("|lap f|^2  ", laplacian_norm_sq(f), "exact", 0.75 * math.sqrt(math.pi))

# %%
# The interpolation inequality |∇f|² <= |f| |Δf| is an equality for one mode.
g2 = GridSpec(2, 32, 2 * math.pi)
mode = RealField.from_function(g2, lambda x, y: np.cos(3 * x + y))
print("single mode:", gradient_norm_sq(mode), math.sqrt(mass(mode) * laplacian_norm_sq(mode)))

# %%
# Mass-preserving dilation.  Samples are rescaled and the box shrinks by e^{-s},
# so the operation is exact: mass is kept, |Δ·|² scales by e^{4s}.
s = math.log(2)
d = dilate(f, s)
print("box", d.grid.box_length, "mass", mass(d))
print("|lap|^2 ratio", laplacian_norm_sq(d) / laplacian_norm_sq(f))
