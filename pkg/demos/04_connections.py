"""
Adapted connections
===================

The Levi-Civita connection is rarely adapted to phi. The first canonical
connection always is, and the Schouten, nabla - (nabla J)J/2 and phi-formula
constructions agree when they start from Levi-Civita.
"""

# %%
import numpy as np

from goldenconn import catalog, verify
from goldenconn import connections as cn

pair = catalog.get("twisted_book").pair()
for law in (pair.levi_civita, pair.first_canonical):
    res = cn.is_adapted(law, pair.phi_field, pair.g, pair.points)
    print(f"{law.label:16s} |nabla phi| {res['phi_residual']:.3e}  |nabla g| {res['g_residual']:.3e}  adapted {res['verdict']}")

# %%
base = pair.levi_civita
a = cn.schouten(base, pair.j_field).coefficients(pair.points)
b = cn.nabla0_type(base, pair.j_field).coefficients(pair.points)
c = cn.crasmareanu_formula(base, pair.phi_field).coefficients(pair.points)
print("Schouten vs nabla0-type:", np.abs(a - b).max(), " phi-formula vs nabla0-type:", np.abs(c - b).max())

# %%
# adding a J-commuting, metric-skew potential keeps a connection natural
trials = verify.natural_closure_trials(pair, count=5, seed=1)
print("natural after random projected potentials:", [t["verdict"] for t in trials])

# %%
# gamma[k, i, j] is the d_k component of nabla_{d_i} d_j
gamma = pair.first_canonical.coefficients(np.array([[0.0, 0.0, 0.0]]))[0]
print("first canonical at the origin, nonzero components:")
for k, i, j in zip(*np.nonzero(np.abs(gamma) > 1e-12)):
    print(f"  Gamma^{k}_{i}{j} = {gamma[k, i, j]:+.3f}")
