"""
Optimal constants and thresholds
================================

The Gagliardo-Nirenberg constant is estimated by maximizing the Weinstein
quotient.  From it follow the coupling constant D1, the mountain-pass
thresholds c* and c_*, and the cap at the mass-critical exponent.
"""

from binls.constants import (
    combined_inequality_ratio,
    d1_constant,
    estimate_R,
    extremal_pair,
    gn_constant_estimate,
    rho_star,
    thresholds,
)
from binls.model import SystemParams
from binls.spectral import GridSpec

# %%
# N=1, r=6.  The estimate does not move under grid refinement.
for n, L in [(256, 20.0), (512, 40.0), (1024, 40.0)]:
    est = gn_constant_estimate(1, 6.0, grid=GridSpec(1, n, L))
    print(f"n={n:5d} L={L:4.0f}  C = {est.C_gn:.12f}  ({est.iterations} iterations)")

# %%
# The coupling bound K <= D1 M^{r(1-γ)/2} B^{rγ/2} is sharp at (u, sqrt(r2/r1) u).
prm = SystemParams(1, 1.0, 1.0, 1.0, 3.0, 3.0, 1.0)
D1 = d1_constant(3.0, 3.0, est.C_gn)
print("ratio at the extremal pair:", combined_inequality_ratio(extremal_pair(est.extremal, prm), prm, D1))

# %%
# Thresholds in the mass-supercritical case N=2, r=8, where c* = 1/(8 D1 D2).
prm2 = SystemParams(2, 1.0, 1.0, 1.0, 4.0, 4.0, 1.0)
est2 = gn_constant_estimate(2, 8.0)
th = thresholds(prm2, est2.C_gn)
print("c*  =", th.c_star, " 1/(8 D1) =", 1 / (8 * th.D1))
print("c_* =", th.c_lower_star)

# %%
# The quotient supremum R.  With equal α it is finite exactly on the
# borderline window of r; outside it the ascent keeps climbing.
for r1 in (2.25, 3.5):
    p = SystemParams(1, 1.0, 1.0, 1.0, r1, r1, 1.0)
    res = estimate_R(p, GridSpec(1, 512, 40.0), ascent_iters=100)
    rs = "0 (R infinite)" if res.R_diverging else f"{rho_star(res.R_estimate, 1.0, p.r):.4f}"
    print(f"r={2 * r1}: R >= {res.R_estimate:.4g}  diverging={res.R_diverging}  rho* ~ {rs}")
