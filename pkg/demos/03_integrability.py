"""
Integrability through Nijenhuis tensors and torsion
===================================================

N_J vanishes exactly when N_phi does; the two differ by the factor 4/5.
The same verdict comes out of the restricted torsion of the first canonical
connection.
"""

# %%
import numpy as np

from goldenconn import catalog, verify
from goldenconn import connections as cn

for name in ["flat_fibonacci", "twisted_book", "integrable_nonparallel", "random:3:2:7"]:
    pair = catalog.get(name).pair()
    v = verify.integrability_verdict(pair)
    crit = verify.check_torsion_criterion(pair)
    print(f"{name:24s} |N_phi| {v['max_nijenhuis_phi']:.3e}  |N_J| {v['max_nijenhuis_j']:.3e}"
          f"  integrable {v['integrable']!s:5}  torsion criterion {crit.passed}")

# %%
# components on the twisted book: N(d_x, d_y) = (0, 0, 4) for J and (0, 0, 5) for phi
pair = catalog.get("twisted_book").pair()
p = np.array([[0.3, 0.1, -0.4]])
print("N_J(dx, dy)  ", cn.nijenhuis_tensor(pair.j_field, p)[0, :, 0, 1])
print("N_phi(dx, dy)", cn.nijenhuis_tensor(pair.phi_field, p)[0, :, 0, 1])

# %%
# the torsion-based identity holds for every structure, integrable or not
lhs, rhs = verify.toro_nijenhuis_sides(pair)
print("toro-Nijenhuis residual:", np.abs(lhs - rhs).max())
