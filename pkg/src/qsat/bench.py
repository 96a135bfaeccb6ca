"""Benchmark harness: instance suites, medians, exponential fits and resampled errors."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .mnsum import SizeError
from .qaoa import QaoaAngles
from .sat import MAX_BRUTE_FORCE_N, CnfInstance, is_satisfiable, sample_instance, threshold

log = logging.getLogger(__name__)

__all__ = [
    "FitResult",
    "SuiteRecord",
    "MedianResult",
    "BenchConfig",
    "generate_suite",
    "exp_fit",
    "resample_error",
    "excess_exponent",
    "median_runtime",
    "median_runtime_table",
    "runtime_bound_from_mean",
    "jensen_median_holds",
    "run_benchmark",
    "rows_to_csv",
    "summary_table",
    "plot_data",
    "CSV_COLUMNS",
]


@dataclass
class FitResult:
    """Least-squares line through ``(n, log value)``.

    ``slope_err`` is the standard error of the OLS slope unless replaced by a
    resampled estimate (see :func:`resample_error`).
    """

    slope: float
    intercept: float
    corr: float
    slope_err: float
    log_base: float

    def describe(self) -> str:
        base = "2" if self.log_base == 2 else "e"
        return f"{self.intercept:+.3f} {self.slope:+.3f}n (base {base})"


def exp_fit(points: Iterable[tuple[float, float]], log_base: float = 2) -> FitResult:
    """Fit ``log_base(value) = intercept + slope * n`` by ordinary least squares."""
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    n, value = pts[:, 0], pts[:, 1]
    if np.unique(n).size < 2:
        raise ValueError("need at least two distinct n")
    if np.any(value <= 0) or not np.all(np.isfinite(value)):
        raise ValueError("values must be finite and positive")
    y = np.log(value) / math.log(log_base)
    nm, ym = n.mean(), y.mean()
    sxx = np.sum((n - nm) ** 2)
    sxy = np.sum((n - nm) * (y - ym))
    syy = np.sum((y - ym) ** 2)
    slope = sxy / sxx
    intercept = ym - slope * nm
    corr = 1.0 if syy == 0 else float(np.clip(sxy / math.sqrt(sxx * syy), -1, 1))
    dof = n.size - 2
    if dof > 0:
        resid = y - (intercept + slope * n)
        slope_err = math.sqrt(max(np.sum(resid**2), 0.0) / dof / sxx)
    else:
        slope_err = 0.0
    return FitResult(float(slope), float(intercept), corr, slope_err, log_base)


_AGGREGATES: dict[str, Callable[[np.ndarray], float]] = {
    "mean": lambda v: float(np.mean(v)),
    "median": lambda v: float(np.median(v)),
}


def resample_error(
    values_by_n: Mapping[int, Sequence[float]],
    repeats: int = 100,
    rng_seed=None,
    aggregate: str = "median",
    log_base: float = 2,
) -> float:
    """Standard deviation of the fitted slope over random half-samples.

    Each repeat keeps a uniformly random half of the instances at every size,
    aggregates them (mean or median), and refits.
    """
    agg = _AGGREGATES[aggregate]
    rng = np.random.default_rng(rng_seed)
    sizes = sorted(values_by_n)
    arrays = {n: np.asarray(values_by_n[n], dtype=float) for n in sizes}
    if any(a.size < 2 for a in arrays.values()):
        raise ValueError("need at least two instances per size")
    slopes = np.empty(repeats)
    for i in range(repeats):
        pts = []
        for n in sizes:
            a = arrays[n]
            half = rng.choice(a.size, size=a.size // 2, replace=False)
            pts.append((n, agg(a[half])))
        slopes[i] = exp_fit(pts, log_base).slope
    return float(slopes.std(ddof=1)) if repeats > 1 else 0.0


def excess_exponent(exponent: float, k: int, r: float) -> float:
    """Exponent (natural log) above the random-guessing baseline ``-2**-k r``."""
    return exponent + 2.0**-k * r


@dataclass
class MedianResult:
    value: float
    lower_bound: bool = False
    infinite: int = 0
    count: int = 0


def median_runtime(runtimes: Sequence[float]) -> MedianResult:
    """Median with even counts averaged; infinite runtimes sort last.

    If the median position itself is infinite, the largest finite runtime is
    returned as a lower bound and ``lower_bound`` is set.
    """
    a = np.sort(np.asarray(runtimes, dtype=float))
    if a.size == 0:
        raise ValueError("empty runtime list")
    inf = int(np.count_nonzero(~np.isfinite(a)))
    value = float(np.median(a)) if inf == 0 else _median_sorted(a)
    if math.isfinite(value):
        return MedianResult(value, False, inf, a.size)
    finite = a[np.isfinite(a)]
    bound = float(finite.max()) if finite.size else math.inf
    return MedianResult(bound, True, inf, a.size)


def _median_sorted(a: np.ndarray) -> float:
    mid = a.size // 2
    if a.size % 2:
        return float(a[mid])
    lo, hi = a[mid - 1], a[mid]
    return float(lo) if lo == hi else float((lo + hi) / 2)


def median_runtime_table(runtimes_by_n: Mapping[int, Sequence[float]]) -> list[tuple[int, MedianResult]]:
    table = []
    for n in sorted(runtimes_by_n):
        values = runtimes_by_n[n]
        if len(values) == 0:
            log.warning("no runtimes for n = %d; skipped", n)
            continue
        table.append((n, median_runtime(values)))
    return table


def runtime_bound_from_mean(mean_success: float) -> float:
    """``1 / mean_success``, which is at most twice the median of ``1 / p_succ``."""
    if not 0 < mean_success <= 1:
        raise ValueError("mean success must lie in (0, 1]")
    return 1.0 / mean_success


def jensen_median_holds(probabilities: Sequence[float], slack: float = 0.0) -> bool:
    """Check ``1 / mean(p) <= 2 * median(1 / p) + slack``."""
    p = np.asarray(probabilities, dtype=float)
    if np.any(p <= 0):
        runtimes = np.where(p > 0, 1 / np.where(p > 0, p, 1), np.inf)
    else:
        runtimes = 1 / p
    med = median_runtime(runtimes).value
    return runtime_bound_from_mean(float(p.mean())) <= 2 * med + slack


# -- suites ------------------------------------------------------------------

@dataclass
class SuiteRecord:
    k: int
    r: float
    seed: int
    instances: dict[int, list[CnfInstance]] = field(default_factory=dict)
    rejected: dict[int, int] = field(default_factory=dict)
    exhausted: dict[int, bool] = field(default_factory=dict)

    def rejection_fraction(self, n: int) -> float:
        total = len(self.instances[n]) + self.rejected[n]
        return self.rejected[n] / total if total else 0.0


def _seed_for(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint32)[0])


def generate_suite(
    k: int, r: float, sizes: Sequence[int], count_per_size: int, seed: int = 0, max_samples: int = 10_000
) -> SuiteRecord:
    """Sample instances per size and keep the first ``count_per_size`` satisfiable ones.

    At most ``max_samples`` instances are drawn per size; ``exhausted[n]`` is
    set if that cap was hit first.
    """
    if max(sizes) > MAX_BRUTE_FORCE_N:
        raise SizeError(f"sizes above {MAX_BRUTE_FORCE_N} cannot be filtered by brute force")
    suite = SuiteRecord(k, r, seed)
    for n in sizes:
        rng = np.random.default_rng(_seed_for(seed, n))
        kept: list[CnfInstance] = []
        rejected = drawn = 0
        while len(kept) < count_per_size and drawn < max_samples:
            inst = sample_instance(n, k, r, rng)
            drawn += 1
            if is_satisfiable(inst):
                kept.append(inst)
            else:
                rejected += 1
        suite.instances[n] = kept
        suite.rejected[n] = rejected
        suite.exhausted[n] = len(kept) < count_per_size
    return suite


# -- benchmark pipeline ------------------------------------------------------

CSV_COLUMNS = [
    "method", "n", "k", "r", "instance", "run", "seed", "success", "flips",
    "evaluations", "tries", "success_probability", "runtime", "error",
]

METHODS = ("walksat", "walksatlm", "qaoa", "hybrid")


@dataclass
class BenchConfig:
    k: int
    r: float
    sizes: list
    count: int
    methods: list
    seed: int = 0
    max_tries: int = 1_000_000
    angles: Optional[QaoaAngles] = None
    hybrid_rounds: int = 100
    resample_repeats: int = 100
    runs: int = 1

    @classmethod
    def from_dict(cls, doc: dict, seed_fallback: Optional[int] = None) -> "BenchConfig":
        unknown = set(doc) - {
            "k", "r", "sizes", "count", "methods", "seed", "seeds", "max_tries",
            "angles", "hybrid_rounds", "resample_repeats", "runs",
        }
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        k = int(doc["k"])
        r = doc.get("r", "threshold")
        r = threshold(k) if r == "threshold" else float(r)
        sizes = [int(n) for n in doc["sizes"]]
        if not sizes or min(sizes) < 1:
            raise ValueError("sizes must be positive")
        if max(sizes) > MAX_BRUTE_FORCE_N:
            raise SizeError(f"sizes above {MAX_BRUTE_FORCE_N} are not supported")
        methods = list(doc.get("methods", ["walksat"]))
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        seed = doc.get("seed", doc.get("seeds", seed_fallback if seed_fallback is not None else 0))
        if isinstance(seed, list):
            seed = seed[0]
        angles = doc.get("angles")
        if angles is not None:
            angles = QaoaAngles.from_dict(angles)
        if any(m in ("qaoa", "hybrid") for m in methods) and angles is None:
            raise ValueError("methods qaoa/hybrid need 'angles'")
        count = int(doc["count"])
        if count < 1:
            raise ValueError("count must be >= 1")
        return cls(
            k, r, sizes, count, methods, int(seed), int(doc.get("max_tries", 1_000_000)), angles,
            int(doc.get("hybrid_rounds", 100)), int(doc.get("resample_repeats", 100)),
            max(1, int(doc.get("runs", 1))),
        )


def _run_one(task):
    method, inst, index, run, seed, cfg = task
    from . import solvers  # local import keeps worker start-up light

    row = {c: "" for c in CSV_COLUMNS}
    row.update(method=method, n=inst.n, k=inst.k, r=cfg.r, instance=index, run=run, seed=seed)
    try:
        if method in ("walksat", "walksatlm"):
            fn = solvers.walksat if method == "walksat" else solvers.walksatlm
            res = fn(inst, seed, max_tries=cfg.max_tries)
            runtime = res.evaluations if res.success else math.inf
            row.update(success=res.success, flips=res.flips, evaluations=res.evaluations, tries=res.tries, runtime=runtime)
        elif method == "qaoa":
            from .simulator import success_probability

            p = success_probability(inst, cfg.angles)
            row.update(success_probability=p, runtime=(1 / p if p > 0 else math.inf), success=p > 0)
        else:
            res = solvers.walksat_qaoa_hybrid(inst, cfg.angles, seed, rounds=cfg.hybrid_rounds)
            row.update(
                success_probability=res.round_success, runtime=res.runtime, success=res.solve.success,
                flips=res.solve.flips, evaluations=res.solve.evaluations, tries=res.solve.tries,
            )
    except Exception as exc:  # recorded per row; the caller turns it into a nonzero exit
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_benchmark(cfg: BenchConfig, threads: int = 1) -> tuple[list[dict], SuiteRecord]:
    """Generate the suite and measure every (method, instance) pair."""
    suite = generate_suite(cfg.k, cfg.r, cfg.sizes, cfg.count, cfg.seed)
    tasks = []
    for n in cfg.sizes:
        for i, inst in enumerate(suite.instances[n]):
            for mi, method in enumerate(cfg.methods):
                runs = 1 if method == "qaoa" else cfg.runs
                for run in range(runs):
                    tasks.append((method, inst, i, run, _seed_for(cfg.seed, n, i, mi, run), cfg))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_one, tasks, chunksize=8))
    else:
        rows = [_run_one(t) for t in tasks]
    return rows, suite


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _runtimes(rows, method) -> dict[int, list[float]]:
    """Per-instance runtimes by size; repeated runs of one instance are averaged."""
    per_instance: dict[tuple[int, int], list[float]] = {}
    for row in rows:
        if row["method"] == method and not row["error"]:
            per_instance.setdefault((int(row["n"]), int(row["instance"])), []).append(float(row["runtime"]))
    out: dict[int, list[float]] = {}
    for (n, _), values in sorted(per_instance.items()):
        out.setdefault(n, []).append(float(np.mean(values)))
    return out


def summary_table(rows: Sequence[dict], cfg: BenchConfig) -> list[dict]:
    """One fit per method: base-2 fit of median runtime against n, with resampled slope error."""
    summary = []
    for mi, method in enumerate(cfg.methods):
        by_n = _runtimes(rows, method)
        table = median_runtime_table(by_n)
        entry = {"method": method, "medians": {n: m.value for n, m in table}}
        usable = [(n, m.value) for n, m in table if math.isfinite(m.value) and m.value > 0]
        if len({n for n, _ in usable}) >= 2:
            fit = exp_fit(usable, 2)
            try:
                fit.slope_err = resample_error(
                    {n: by_n[n] for n, _ in usable}, cfg.resample_repeats, _seed_for(cfg.seed, 99, mi), "median"
                )
            except ValueError:
                pass
            entry.update(
                fit=fit.describe(), slope=fit.slope, intercept=fit.intercept, corr=fit.corr, slope_err=fit.slope_err,
                excess_exponent_ln=excess_exponent(-fit.slope * math.log(2), cfg.k, cfg.r),
            )
        summary.append(entry)
    return summary


def format_summary(summary: Sequence[dict]) -> str:
    lines = [f"{'method':<10} {'fit (log2 runtime)':<28} {'corr':>8} {'error':>8}"]
    for e in summary:
        if "fit" in e:
            lines.append(f"{e['method']:<10} {e['fit']:<28} {e['corr']:>8.5f} {e['slope_err']:>8.4f}")
        else:
            lines.append(f"{e['method']:<10} {'(insufficient data)':<28}")
    return "\n".join(lines)


def plot_data(rows: Sequence[dict], method: str, repeats: int = 100, seed: int = 0) -> list[tuple[int, float, float]]:
    """``(n, median runtime, half-sample std of the median)`` triplets."""
    rng = np.random.default_rng(seed)
    out = []
    for n, values in sorted(_runtimes(rows, method).items()):
        a = np.asarray(values)
        med = median_runtime(a).value
        if a.size >= 2:
            meds = [np.median(a[rng.choice(a.size, a.size // 2, replace=False)]) for _ in range(repeats)]
            err = float(np.std(meds, ddof=1))
        else:
            err = 0.0
        out.append((n, med, err))
    return out


def config_to_json(cfg: BenchConfig) -> str:
    doc = {
        "k": cfg.k, "r": cfg.r, "sizes": cfg.sizes, "count": cfg.count, "methods": cfg.methods,
        "seed": cfg.seed, "max_tries": cfg.max_tries,
    }
    if cfg.angles is not None:
        doc["angles"] = cfg.angles.to_dict()
    return json.dumps(doc)
