"""
The Volterra lattice and its two brackets
=========================================

A periodic lattice y_1..y_m (m even) with y_i' = y_i (y_{i+1} - y_{i-1}).
This script evaluates the vector field, the four conserved quantities and
the two structure matrices, and checks that both give the same flow.
"""
import numpy as np

import volterra_poisson as vp

# a small state to look at by hand
y = vp.LatticeState([1.0, 2.0, 3.0, 4.0])
print("rhs         ", vp.volterra_rhs(y))
print("invariants  ", vp.invariants(y))

# J0 is quadratic in y, J1 cubic; at m=4 the offset-2 band of J1 wraps onto itself
print("J0 =\n", vp.structure_matrix("J0", y).entries)
print("J1 =\n", vp.structure_matrix("J1", y).entries)

# %%
# The flow has two Hamiltonian descriptions: J0 grad H1 = J1 grad H0 = f.
rng = np.random.default_rng(0)
s = vp.random_state(12, rng)
f = vp.volterra_rhs(s)
for kind, H in (("J0", "H1"), ("J1", "H0")):
    lhs = vp.structure_matrix(kind, s) @ vp.gradient(H, s)
    print(f"|{kind} grad {H} - f| / |f| = {np.linalg.norm(lhs - f) / np.linalg.norm(f):.1e}")

# H0 = 1/2 sum log y is a Casimir of J0: J0 grad H0 vanishes identically
print("|J0 grad H0| =", np.abs(vp.structure_matrix("J0", s) @ vp.gradient("H0", s)).max())

# %%
# Odd/even split and the map to the Toda chain.
sp = vp.split(s)
print("u =", np.round(sp.u, 3))
print("v =", np.round(sp.v, 3))
ts = vp.toda_map(s)
da, db = vp.toda_rhs(ts)
print("Toda a =", np.round(ts.a, 3))
print("sum b' =", db.sum(), "(telescoping)")
