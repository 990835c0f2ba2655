"""
Block-circular chains and the roots of unity
============================================

A chain whose blocks feed each other in a ring has its dominant eigenvalues
exactly on the unit circle, at the B-th roots of unity, with eigenvectors
constant on each block. A small uniform perturbation pulls them inside.
"""
import numpy as np

from cpcca import CircularSpec, circular_check, cluster, generate_circular

np.set_printoptions(precision=4, suppress=True)

for blocks in (3, 4, 6):
    P = generate_circular(CircularSpec(blocks=blocks, block_size=5, eps=0.0, seed=1))
    rep = circular_check(P, blocks)
    print(f"{blocks} blocks: eigenvalue error {rep['max_eigenvalue_error']:.1e}, "
          f"block deviation {rep['max_block_deviation']:.1e}, passed {rep['passed']}")

# clustering recovers the ring as a permutation matrix
P = generate_circular(CircularSpec(3, 10, 0.0, seed=42))
print("unperturbed coarse matrix\n", np.round(cluster(P, 3, mode="magnitude").coarse_matrix, 12) + 0.0)

# with noise the blocks become metastable and the coarse matrix moves toward
# a permuted near-identity
for eps in (0.01, 0.1):
    P = generate_circular(CircularSpec(3, 10, eps, seed=42))
    res = cluster(P, 3, mode="magnitude")
    print(f"eps={eps}: |lambda| = {np.abs(res.eigenvalues)}")
    print(res.coarse_matrix)
