"""The special source-parameter basis.

The alpha dependence of the lifted field is expanded in functions
Psi_n(alpha) built by Gram-Schmidt from {alpha^n exp(alpha)}.  Two
properties matter downstream: the family is orthonormal on [a1, a2],
and the derivative coupling matrix S has unit determinant, so the
coupled elliptic system it enters is never singular.

Run:  python demos/03_source_basis.py
"""

import numpy as np

from cwscat.basis import build_basis

basis = build_basis(0.1, 0.6, 6)

G = basis.gram()
print("Gram matrix departure from identity:",
      f"{np.max(np.abs(G - np.eye(basis.N))):.2e}")

S = basis.S
print(f"det S = {np.linalg.det(S):.12f}")
print("S is upper triangular with unit diagonal:")
with np.printoptions(precision=3, suppress=True):
    print(S)

# expand a smooth function of alpha and check the reproduction
alphas = np.linspace(0.1, 0.6, 200)
target = np.cos(3.0 * alphas) * np.exp(-alphas)
# sample at the quadrature nodes, project, resynthesize
samples = np.cos(3.0 * basis.nodes) * np.exp(-basis.nodes)
coef = basis.project(samples)
recon = np.tensordot(coef, basis.evaluate(alphas), (0, 0))
print(f"\nprojection of cos(3a)exp(-a) with N = {basis.N}: "
      f"max error {np.max(np.abs(recon - target)):.2e}")

for N in range(1, 7):
    b = build_basis(0.1, 0.6, N)
    s = np.cos(3.0 * b.nodes) * np.exp(-b.nodes)
    r = np.tensordot(b.project(s), b.evaluate(alphas), (0, 0))
    print(f"  N = {N}: max error {np.max(np.abs(r - target)):.2e}")
