"""
Golden and product structures on a chart
========================================

A Golden structure phi satisfies phi^2 = phi + I. It corresponds one to one
with an almost product structure J = (2 phi - I)/sqrt5, and a metric is pure
when g phi is symmetric.
"""

# %%
import numpy as np

from goldenconn import catalog
from goldenconn.golden import adapted_orthonormal_frame, check_golden, check_product

entry = catalog.get("twisted_book")
pair = entry.pair()
print("eigen ranks (r, s):", (pair.r, pair.s))
print("sample points:", pair.points.shape)

# %%
p = np.array([[0.5, -0.2, 0.1]])
phi = pair.phi_field.jet(p).value[0]
J = pair.j_field.jet(p).value[0]
g = pair.g.jet(p).value[0]
print("phi at p\n", phi.round(6))
print("|phi^2 - phi - I| =", np.abs(phi @ phi - phi - np.eye(3)).max())
print("|J^2 - I|         =", np.abs(J @ J - np.eye(3)).max())
print("|g phi - phi^T g| =", np.abs(g @ phi - phi.T @ g).max())

# %%
print("sup over samples:", check_golden(pair.phi_field, pair.points), check_product(pair.j_field, pair.points))

# %%
# an orthonormal frame whose first r vectors span the +1 eigenbundle of J
frame = adapted_orthonormal_frame(pair, p[0])
print("frame^T g frame = I:", np.allclose(frame.T @ g @ frame, np.eye(3)))
print("J in the frame\n", np.linalg.solve(frame, J @ frame).round(12))
