"""
Coefficient expressions and their derivatives
=============================================

Tensor components are written as small formulas over the chart coordinates.
They are parsed once and differentiated exactly by forward-mode dual numbers.
"""

# %%
import numpy as np

from goldenconn import exprdsl as ex
from goldenconn.fields import evaluate_jet

coords = ["x", "y"]
e = ex.parse("phi * x^2 * sin(y) - sqrt5 / (1 + y^2)", coords)
print("canonical text:", ex.to_text(e))

# %%
# value, gradient and Hessian at two points at once
pts = np.array([[0.5, 0.25], [-1.0, 2.0]])
value, grad, hess = evaluate_jet([e], coords, pts, 2)
print("values   ", value[:, 0])
print("gradients", grad[:, 0])

# %%
# a central difference agrees with the dual-number gradient
h = 1e-6
fd = [(evaluate_jet([e], coords, pts + h * d, 0)[0] - evaluate_jet([e], coords, pts - h * d, 0)[0])[:, 0] / (2 * h)
      for d in np.eye(2)]
print("max |AD - FD|:", np.abs(grad[:, 0] - np.array(fd).T).max())

# %%
# errors point at the offending character
try:
    ex.parse("x * (y + ", coords)
except ex.ExprSyntaxError as err:
    print("syntax error:", err)
