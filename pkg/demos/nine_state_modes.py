"""
Magnitude versus real part on a nine-state cycle
================================================

Nine states arranged in three rings. Depending on which eigenvalues are
called dominant, the same chain is coarse-grained into a 3-cycle of
macrostates or into three slowly mixing groups.
"""
import numpy as np

from cpcca import cluster, fixture, select_n_clusters

np.set_printoptions(precision=4, suppress=True)

for name in ("example2:0.9:0.1", "example2:0.1:0.9"):
    P = fixture(name)
    print("=" * 60)
    print(name)
    for mode in ("magnitude", "real"):
        res = cluster(P, 3, mode=mode)
        print(f"\n-- {mode}: eigenvalues {np.round(res.eigenvalues, 4)}")
        print("coarse matrix\n", res.coarse_matrix)
        print("crispness %.4f" % res.crispness)
        groups = [sorted((np.flatnonzero(res.assignments == j) + 1).tolist())
                  for j in range(3)]
        print("groups (1-based)", groups)

# magnitude mode cannot use 2 clusters here: it would cut the pair -1/2 +/- 0.866i
scan = select_n_clusters(fixture("example2:0.9:0.1"), "magnitude", range(2, 5))
for e in scan.entries:
    print(e.n_clusters, "skipped: " + e.reason if e.skipped else f"crispness {e.crispness:.4f}")
print("selected", scan.selected)
