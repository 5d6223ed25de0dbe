"""
First prolongations and the command line
========================================

A structure group whose Lie algebra has vanishing first prolongation (and is
closed under transposition) admits a functorial connection. The orthogonal
block algebra of a Golden Riemannian structure does; the bare product algebra
does not.
"""

# %%
import subprocess
import sys
import tempfile
from pathlib import Path

from goldenconn import catalog, verify

for alg in [verify.orthogonal_algebra(3), verify.orthogonal_block_algebra(2, 1),
            verify.general_linear_block_algebra(1, 1), verify.general_linear_block_algebra(2, 1)]:
    res = verify.first_prolongation_dim(alg)
    print(f"{alg.name:14s} dim {alg.dim:2d}  prolongation {res['dimension']:2d}  transpose invariant {res['transpose_invariant']}")

# %%
# any catalog entry can be exported to a spec file and checked from the shell
tmp = Path(tempfile.mkdtemp())
spec = tmp / "twisted_book.toml"
spec.write_text(catalog.export(catalog.get("twisted_book")))
print(spec.read_text())

# %%
for args in (["validate", str(spec)], ["lemmas", str(spec)], ["prolongation", "--algebra", "oxo", "--r", "2", "--s", "1"]):
    run = subprocess.run([sys.executable, "-m", "goldenconn", *args], capture_output=True, text=True)
    print("$ goldenconn", " ".join(args), f"(exit {run.returncode})")
    print(run.stdout)
