"""
Splitting integrators and the error table
=========================================

Symplectic Euler (SE) on the (u, v) split is explicit because every
implicit equation is diagonal. Its adjoint composed with it over half steps
gives the second-order Lobatto IIIA-B pair. Two generic baselines
(implicit midpoint, RK4) are provided for comparison.
"""
import numpy as np

import volterra_poisson as vp
from volterra_poisson.harness import format_table, table1

s = vp.SplitState([1.0, 3.0], [2.0, 4.0])
out = vp.symplectic_euler_step(s, 0.1)
print("one SE step:   u' =", out.u, " v' =", out.v, " sum =", out.u.sum() + out.v.sum())

# Lobatto IIIA-B equals adjoint(h/2) o SE(h/2)
lob = vp.lobatto3ab2_step(s, 0.1)
comp = vp.adjoint_symplectic_euler_step(vp.symplectic_euler_step(s, 0.05), 0.05)
print("composition defect:", max(np.abs(lob.u - comp.u).max(), np.abs(lob.v - comp.v).max()))

# %%
# Local error order against a fine RK4 reference.
y0 = vp.random_state(8, np.random.default_rng(1))


def local_error(method, h):
    ref = y0
    for _ in range(100):
        ref = vp.rk4_step(ref, h / 100)
    return np.linalg.norm(vp.step(method, y0, h).y - ref.y)


for method in vp.StepMethod:
    e = [local_error(method, h) for h in (0.1, 0.05)]
    print(f"{method.value:<11} local order ~ {np.log2(e[0] / e[1]):.2f}")

# %%
# Average invariant errors on the benchmark initial condition.
# t_end is shortened here; use t_end=2000 (or the CLI) for the full table.
rows = table1(["se", "lobatto2"], [20], [0.2, 0.1, 0.05], t_end=200.0)
print(format_table(rows))
