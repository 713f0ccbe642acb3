"""
Mountain-pass solutions above the mass-critical exponent
========================================================

For r > 2 + 8/N the energy is unbounded below on the sphere.  When βρ^{r-2}
is small a barrier separates small and large bending energies, and a saddle
is found by descending the maximum of the energy along dilation fibers.
"""

from binls import model
from binls.constants import gn_constant_estimate, thresholds
from binls.model import SystemParams
from binls.mountain_pass import (
    bending_lower_bound,
    bracket_roots_h,
    build_endpoints,
    dilation_path_critical,
    saddle_search,
)
from binls.spectral import GridSpec

C = gn_constant_estimate(2, 8.0).C_gn
th0 = thresholds(SystemParams(2, 1.0, 1.0, 1.0, 4.0, 4.0, 1.0), C)
beta = 0.5 * min(th0.c_star, th0.c_lower_star)
prm = SystemParams(2, 1.0, 1.0, beta, 4.0, 4.0, 1.0)
th = thresholds(prm, C)

# %%
# The barrier function h and its roots.
geo = bracket_roots_h(prm, th)
print(geo)

# %%
# Two dilations of one profile, on either side of the barrier.
grid = GridSpec(2, 128, 16.0)
e0, e1 = build_endpoints(prm, grid, geo)
for name, e in (("inside", e0), ("outside", e1)):
    t = model.evaluate_terms(e, prm)
    print(f"{name:8s} bending={t.bending:.4g}  I={t.energy(prm):.4g}")
s, top = dilation_path_critical(e0, prm, -1.0, 6.0)
print("path maximum", top, "at s =", s)

# %%
# Saddle search: the level sits above the barrier height and λ > α²/4.
rep = saddle_search(prm, grid, thresholds=th)
for k, v in rep.summary().items():
    print(f"{k:28s} {v}")
print("bending lower bound", bending_lower_bound(prm, th))
