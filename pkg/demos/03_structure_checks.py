"""
Numerical structure checks
==========================

Brackets, the Jacobi identity and the Poisson-map test M J0 M^T = J0(Phi).
The Poisson-map defect is shown against h: it vanishes only for the exact
flow, and for the splitting methods it shrinks like a power of h rather
than sitting at the finite-difference floor.
"""
import numpy as np

import volterra_poisson as vp

rng = np.random.default_rng(vp.DEFAULT_SEED)
s = vp.random_state(6, rng)

for r in vp.involution_report(s):
    print(f"{{{r.pair[0].value:>2},{r.pair[1].value:>2}}}_{r.bracket_kind.value:<2} = {r.value: .1e}")

for kind in vp.StructureKind:
    print(f"Jacobi defect {kind.value:<5} {vp.jacobi_identity_residual(kind, s):.1e}")

# %%
# Calibration of the finite-difference check, then the defect of each method.
print("h=0 identity    ", f"{vp.poisson_map_residual('rk4', s, 0.0).residual:.1e}")
print("near-exact flow ", f"{vp.reference_flow_residual(s, 0.1):.1e}")
print(f"{'method':<11}" + "".join(f"{'h=' + str(h):>11}" for h in (0.2, 0.1, 0.05)))
for method in vp.StepMethod:
    res = [vp.poisson_map_residual(method, s, h).residual for h in (0.2, 0.1, 0.05)]
    print(f"{method.value:<11}" + "".join(f"{r:>11.2e}" for r in res))

# %%
# Casimir H0 along long runs.
y0 = vp.initial_state(20)
for method in ("se", "lobatto2", "rk4"):
    print(f"{method:<9} max |H0(t) - H0(0)| over 2000 steps: {vp.casimir_respect(method, y0, 0.1, 2000):.2e}")
