"""Runtime and reproducibility benchmarks on generated matrices.

A :class:`BenchPlan` lists matrix sizes and a number of random trials per
size. Every trial draws its own matrix from a seed derived from
``(seed, size, trial)`` so the matrix content, the coarse matrices and their
pairwise differences are reproducible; only the timings vary between runs.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (CpccaError, DegenerateDesign, DimensionMismatch,
                     InsufficientPoints, InvalidSpec)
from .matrix import CircularSpec, generate_circular, generate_nearly_uncoupled
from .pcca import METHODS, cluster
from .spectral import normalize_mode

STAGES = ("spectral", "optimize", "coarse_grain", "total")
NORMS = ("1", "2", "inf")

__all__ = ["BenchPlan", "BenchReport", "TrialRecord", "run_bench", "trial_seed",
           "generate_trial_matrix", "compare_coarse", "compare_reports",
           "fit_quadratic", "STAGES", "NORMS"]


@dataclass(frozen=True)
class BenchPlan:
    """What to run.

    ``generator`` is ``"circular"`` (``blocks`` groups, perturbation ``eps``)
    or ``"uncoupled"`` (``blocks`` groups leaking ``coupling`` per row). Every
    size must be a multiple of ``blocks``.
    """
    sizes: tuple = (30, 60, 90, 120)
    trials: int = 5
    generator: str = "circular"
    blocks: int = 3
    eps: float = 0.0
    coupling: float = 0.01
    mode: str = "magnitude"
    n_clusters: int = 3
    method: str = "nelder-mead"
    weight: str = "uniform"
    seed: int = 0
    warmup: bool = True
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "mode", normalize_mode(self.mode))

    def check(self):
        if self.trials < 1:
            raise InvalidSpec("trials must be >= 1")
        if not self.sizes or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise InvalidSpec("sizes must be non-empty and strictly increasing")
        if any(s % self.blocks for s in self.sizes):
            raise InvalidSpec(f"every size must be a multiple of blocks={self.blocks}")
        if self.generator not in ("circular", "uncoupled"):
            raise InvalidSpec(f"unknown generator {self.generator!r}")
        if self.method not in METHODS:
            raise InvalidSpec(f"unknown method {self.method!r}")
        if self.jobs < 1:
            raise InvalidSpec("jobs must be >= 1")

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown plan keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        return d


def trial_seed(base: int, size: int, trial: int) -> int:
    """64-bit seed for one trial, independent of execution order."""
    ss = np.random.SeedSequence([int(base), int(size), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_trial_matrix(plan: BenchPlan, size: int, trial: int):
    seed = trial_seed(plan.seed, size, trial)
    block_size = size // plan.blocks
    if plan.generator == "circular":
        return generate_circular(CircularSpec(plan.blocks, block_size, plan.eps, seed)), seed
    return generate_nearly_uncoupled(plan.blocks, block_size, plan.coupling, seed), seed


@dataclass
class TrialRecord:
    size: int
    trial: int
    seed: int
    status: str
    error: str = ""
    timings: dict = field(default_factory=dict)
    coarse_matrix: np.ndarray | None = None
    crispness: float = float("nan")
    objective: float = float("nan")

    def deterministic_dict(self):
        return {
            "size": self.size, "trial": self.trial, "seed": self.seed,
            "status": self.status, "error": self.error,
            "crispness": None if np.isnan(self.crispness) else float(self.crispness),
            "objective": None if np.isnan(self.objective) else float(self.objective),
            "coarse_matrix": None if self.coarse_matrix is None else self.coarse_matrix.tolist(),
        }


def _run_trial(plan, size, trial):
    P, seed = generate_trial_matrix(plan, size, trial)
    try:
        res = cluster(P, plan.n_clusters, plan.mode, plan.weight, plan.method)
    except CpccaError as exc:
        return TrialRecord(size, trial, seed, "failed", exc.code)
    return TrialRecord(size, trial, seed, "ok", "", dict(res.timings), res.coarse_matrix,
                       res.crispness, res.objective)


@dataclass
class BenchReport:
    plan: BenchPlan
    records: list

    def by_size(self, size):
        return [r for r in self.records if r.size == size]

    @property
    def n_ok(self):
        return sum(r.status == "ok" for r in self.records)

    def timing_summary(self):
        """Mean and unbiased standard deviation of every stage per size."""
        out = {}
        for size in self.plan.sizes:
            ok = [r for r in self.by_size(size) if r.status == "ok"]
            stats = {}
            for stage in STAGES:
                t = np.array([r.timings[stage] for r in ok])
                stats[stage] = {
                    "mean": float(t.mean()) if t.size else None,
                    "std": float(t.std(ddof=1)) if t.size > 1 else None,
                }
            out[str(size)] = stats
        return out

    def pairwise_differences(self, size):
        """Aligned norm differences between the coarse matrices of all trial pairs."""
        ok = [r for r in self.by_size(size) if r.status == "ok"]
        diffs = {p: [] for p in NORMS}
        for a, b in itertools.combinations(ok, 2):
            for p in NORMS:
                diffs[p].append(compare_coarse(a.coarse_matrix, b.coarse_matrix, p))
        return diffs

    def to_dict(self, timing=True):
        sizes = []
        for size in self.plan.sizes:
            recs = self.by_size(size)
            diffs = self.pairwise_differences(size)
            sizes.append({
                "size": size,
                "ok": sum(r.status == "ok" for r in recs),
                "failed": sum(r.status != "ok" for r in recs),
                "trials": [r.deterministic_dict() for r in recs],
                "pairwise_differences": {
                    p: {"max": max(v) if v else None,
                        "mean": float(np.mean(v)) if v else None,
                        "values": v}
                    for p, v in diffs.items()},
            })
        d = {"plan": self.plan.to_dict(), "sizes": sizes}
        if timing:
            d["timing"] = self.timing_summary()
        return d

    def to_json(self, timing=True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """One row per (size, trial) with one column per stage timing."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["size", "trial", "seed", "status", "error"]
                        + [f"{s}_seconds" for s in STAGES] + ["crispness", "objective"])
        for r in self.records:
            writer.writerow([r.size, r.trial, r.seed, r.status, r.error]
                            + [repr(r.timings[s]) if s in r.timings else "" for s in STAGES]
                            + [repr(float(r.crispness)), repr(float(r.objective))])
        return buf.getvalue()


def run_bench(plan: BenchPlan) -> BenchReport:
    """Generate, cluster and time every (size, trial) of ``plan``.

    Pipeline errors mark the trial as failed instead of aborting. With
    ``plan.warmup`` each size is clustered once untimed before its trials.
    """
    plan.check()
    records = []
    for size in plan.sizes:
        if plan.warmup:
            _run_trial(plan, size, 0)
        if plan.jobs > 1:
            with ThreadPoolExecutor(plan.jobs) as pool:
                recs = list(pool.map(lambda t: _run_trial(plan, size, t), range(plan.trials)))
        else:
            recs = [_run_trial(plan, size, t) for t in range(plan.trials)]
        records.extend(recs)
    return BenchReport(plan, records)


def compare_reports(a: BenchReport, b: BenchReport) -> dict:
    """Compare two runs over the same matrices (e.g. two optimizer settings).

    Returns, per size, the aligned norm differences of matching trials and the
    percentage difference of mean total time ``100 * (b - a) / a``.
    """
    out = {}
    for size in a.plan.sizes:
        ra = {r.trial: r for r in a.by_size(size) if r.status == "ok"}
        rb = {r.trial: r for r in b.by_size(size) if r.status == "ok"}
        common = sorted(set(ra) & set(rb))
        if any(ra[t].seed != rb[t].seed for t in common):
            raise DimensionMismatch("reports were generated from different matrices")
        diffs = {p: [compare_coarse(ra[t].coarse_matrix, rb[t].coarse_matrix, p)
                     for t in common] for p in NORMS}
        ta = np.mean([ra[t].timings["total"] for t in common]) if common else np.nan
        tb = np.mean([rb[t].timings["total"] for t in common]) if common else np.nan
        out[str(size)] = {"trials": common, "differences": diffs,
                          "percent_time_difference": float(100.0 * (tb - ta) / ta)}
    return out


def _norm(M, p):
    p = str(p).lower()
    if p in ("1", "1.0"):
        return float(np.linalg.norm(M, 1))
    if p in ("2", "2.0"):
        return float(np.linalg.norm(M, 2))
    if p in ("inf", "infinity"):
        return float(np.linalg.norm(M, np.inf))
    raise ValueError(f"unsupported norm {p!r}; use 1, 2 or inf")


def compare_coarse(A, B, p="inf") -> float:
    """Smallest ``||A - Q^T B Q||_p`` over cluster permutations ``Q``.

    ``p`` is 1 or inf (induced norms) or 2 (spectral norm). All permutations
    are tried for up to 5 clusters; larger matrices are compared as given.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"cannot compare shapes {A.shape} and {B.shape}")
    n = A.shape[0]
    perms = itertools.permutations(range(n)) if n <= 5 else [tuple(range(n))]
    return min(_norm(A - B[np.ix_(q, q)], p) for q in perms)


def fit_quadratic(xs, ys):
    """Least-squares ``y ~ a x^2 + b x + c``; returns ``(a, b, c, residual_norm)``."""
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch("xs and ys differ in length")
    if x.size < 3:
        raise InsufficientPoints(f"need at least 3 points, got {x.size}")
    if np.unique(x).size < 3:
        raise DegenerateDesign("need at least 3 distinct x values")
    V = np.column_stack([x * x, x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    resid = float(np.linalg.norm(V @ coef - y))
    a, b, c = (float(v) for v in coef)
    return a, b, c, resid
