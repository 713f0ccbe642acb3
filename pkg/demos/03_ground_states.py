"""
Ground states and the dichotomy in ρ
====================================

Minimize the energy on the sphere |u|² + |v|² = ρ².  Below the borderline
exponent every mass gives a compact minimizer.  Inside the borderline window
small masses vanish (the infimum sits at the coupling-free level m^J) and
large masses concentrate.
"""

import math

from binls.ground_state import dichotomy_scan, minimize_ground_state
from binls.model import SystemParams
from binls.spectral import GridSpec, commensurate_box_length

# A box that fits the carrier |ξ|² = α/2, so that m^J is reachable on the torus.
L = commensurate_box_length(math.sqrt(0.5), 53.0)

# %%
# One run, with the diagnostics a converged state must satisfy.
prm = SystemParams(1, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0)
rep = minimize_ground_state(prm, GridSpec(1, 1024, 80.0))
for k, v in rep.summary().items():
    print(f"{k:20s} {v}")

# %%
# Unequal exponents: the single constraint lets mass move between the
# components, and the split settles at r2/r1.
rep = minimize_ground_state(SystemParams(1, 1.0, 1.0, 1.0, 2.5, 1.5, 1.0), GridSpec(1, 512, 40.0))
print("mass_v/mass_u =", rep.mass_v / rep.mass_u)

# %%
# Scan at r = 7, inside the borderline window.
scan = dichotomy_scan(SystemParams(1, 1.0, 1.0, 1.0, 3.5, 3.5, 1.0), [0.3, 1.0, 2.0, 3.0], GridSpec(1, 2048, L))
for row in scan.rows:
    print(f"rho={row.rho:4.1f}  {row.status:10s} m={row.energy:+.6e}  m^J={row.mj_value:+.6e}")
print("rho* bracket:", scan.rho_star_bracket())
print("sub-additivity checks:", scan.subadditivity)
