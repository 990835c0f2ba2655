"""
Timing the pipeline across sizes
================================

Five random matrices per size, each from its own seed. The matrix-dependent
numbers are reproducible; only the timings change between runs. Pass
``--large`` to add the 400 and 1600 state nearly uncoupled runs.
"""
import sys

import numpy as np

from cpcca import BenchPlan, fit_quadratic, run_bench

for eps in (0.0, 0.1):
    report = run_bench(BenchPlan(sizes=(30, 60, 90, 120), trials=5, eps=eps))
    print(f"\ncircular chains, eps={eps}: {report.n_ok} of {len(report.records)} ok")
    summary = report.timing_summary()
    for size in report.plan.sizes:
        t = summary[str(size)]["total"]
        d = report.pairwise_differences(size)
        print(f"  N={size:4d}  total {1e3 * t['mean']:7.2f} ms +/- {1e3 * t['std']:.2f}"
              f"   max |Pc_a - Pc_b|_inf {max(d['inf']):.1e}")

# time growth fitted with a quadratic in N
sizes = np.array(report.plan.sizes, dtype=float)
means = [summary[str(s)]["total"]["mean"] for s in report.plan.sizes]
a, b, c, resid = fit_quadratic(sizes, means)
print(f"\ntotal seconds ~ {a:.3e} N^2 + {b:.3e} N + {c:.3e}  (residual {resid:.1e})")

if "--large" in sys.argv:
    plan = BenchPlan(sizes=(400, 1600), trials=1, generator="uncoupled", blocks=4,
                     n_clusters=4, mode="real")
    for r in run_bench(plan).records:
        print(f"uncoupled N={r.size}: {r.timings['total']:.2f} s, crispness {r.crispness:.4f}")
