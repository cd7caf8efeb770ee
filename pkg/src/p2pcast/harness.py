"""Seeded Monte Carlo experiment harness.

A grid of cells (distribution x policy x size x run) is evaluated with one
derived seed per cell, so the whole result set is a pure function of the
configuration and the master seed. Raw per-cell metrics stream into
``results.csv`` as they finish; completed cells are recognised on restart and
skipped, which makes interrupted runs resumable and re-runs byte-identical.
Aggregation pools runs (and, for the headline rows, all distributions) into
means with Student-t 95% confidence half-widths.

Config files are flat ``key=value`` text::

    distributions=flat,tight,loose
    policies=FCS,GDN
    sizes=10,20,50
    runs=3
    M=4
    u0=16
    capacities=1,5,10,16

The master seed and output directory come from the command line (or the
caller), not the config file.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .delay_space import KINDS, DistributionSpec, generate
from .metrics import compute_metrics
from .rng import derive_seed, make_rng
from .topology import (
    ALL_POLICY_CODES,
    AdmissionStuck,
    CapacityProfile,
    PolicySpec,
    build,
)

RESULTS_HEADER = (
    "policy,distribution,n,run,seed,min_delay_mean_s,tree_delay_mean_s,"
    "mean_node_vuln,max_sys_vuln,build_ms,failed"
)
AGG_HEADER = "policy,distribution,n,metric,mean,ci95_halfwidth,k"
METRIC_COLUMNS = ("min_delay_mean_s", "tree_delay_mean_s", "mean_node_vuln", "max_sys_vuln")

#: Grid sizes used by the default full experiment (capped for desk-scale runs).
DEFAULT_GRID_SIZES = (10, 20, 50, 100, 200, 500, 1000, 2000, 5000)
#: Seed of the built-in demo grid, chosen so every demo cell builds feasibly.
DEMO_SEED = 7


@dataclass(frozen=True)
class SimParams:
    """Per-build parameters shared by every cell."""

    m: int = 4
    u0: int = 16
    capacity_choices: tuple[int, ...] = (1, 5, 10, 16)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("M must be at least 1")
        if self.u0 < self.m:
            raise ValueError(f"u0={self.u0} cannot be below M={self.m}")
        ch = tuple(int(c) for c in self.capacity_choices)
        if not ch or any(c < 0 for c in ch):
            raise ValueError("capacities must be a non-empty list of non-negative ints")
        object.__setattr__(self, "capacity_choices", ch)


@dataclass(frozen=True)
class ExperimentConfig:
    """A full experiment grid."""

    distributions: tuple[str, ...]
    policies: tuple[str, ...]
    sizes: tuple[int, ...]
    runs: int
    master_seed: int = 0
    sim: SimParams = SimParams()

    def __post_init__(self) -> None:
        if not self.distributions or not self.policies or not self.sizes:
            raise ValueError("distributions, policies and sizes must all be non-empty")
        for d in self.distributions:
            if d not in KINDS:
                raise ValueError(f"unknown distribution {d!r}; expected one of {KINDS}")
        for p in self.policies:
            PolicySpec.from_code(p)  # raises on unknown codes
        for n in self.sizes:
            if n < 2:
                raise ValueError(f"size {n} is too small; need the peercaster plus a peer")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        for name, values in (
            ("distributions", self.distributions),
            ("policies", self.policies),
            ("sizes", self.sizes),
        ):
            if len(set(values)) != len(values):
                raise ValueError(f"duplicate entries in {name}: {values}")

    @classmethod
    def default_grid(cls, master_seed: int = 0) -> "ExperimentConfig":
        """All distributions, all 14 policies, the capped size ladder, 3 runs."""
        return cls(
            distributions=KINDS,
            policies=ALL_POLICY_CODES,
            sizes=DEFAULT_GRID_SIZES,
            runs=3,
            master_seed=master_seed,
        )

    @classmethod
    def demo_grid(cls, master_seed: int = DEMO_SEED) -> "ExperimentConfig":
        """A small grid that exercises every distribution and policy in seconds."""
        return cls(
            distributions=KINDS,
            policies=ALL_POLICY_CODES,
            sizes=(10, 30),
            runs=2,
            master_seed=master_seed,
        )


def parse_config(text: str) -> dict[str, str]:
    """Parse flat ``key=value`` config text (``#`` starts a comment line)."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in mapping:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        mapping[key] = value.strip()
    return mapping


_CONFIG_KEYS = {"distributions", "policies", "sizes", "runs", "M", "u0", "capacities"}


def config_from_mapping(
    mapping: dict[str, str],
    master_seed: int = 0,
    sizes_override: tuple[int, ...] | None = None,
    policies_override: tuple[str, ...] | None = None,
) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from parsed config keys."""
    unknown = set(mapping) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}; expected {sorted(_CONFIG_KEYS)}")
    missing = {"distributions", "policies", "sizes", "runs"} - set(mapping)
    if missing:
        raise ValueError(f"config is missing required keys: {sorted(missing)}")

    def _csv_list(key: str) -> tuple[str, ...]:
        return tuple(part.strip() for part in mapping[key].split(",") if part.strip())

    sim = SimParams(
        m=int(mapping.get("M", 4)),
        u0=int(mapping.get("u0", 16)),
        capacity_choices=(
            tuple(int(c) for c in mapping["capacities"].split(","))
            if "capacities" in mapping
            else (1, 5, 10, 16)
        ),
    )
    return ExperimentConfig(
        distributions=_csv_list("distributions"),
        policies=policies_override or tuple(p.upper() for p in _csv_list("policies")),
        sizes=sizes_override or tuple(int(s) for s in _csv_list("sizes")),
        runs=int(mapping["runs"]),
        master_seed=master_seed,
        sim=sim,
    )


@dataclass(frozen=True)
class CellResult:
    """Metrics of one grid cell (one build)."""

    policy: str
    distribution: str
    n: int
    run: int
    seed: int
    min_delay_mean_s: float | None
    tree_delay_mean_s: float | None
    mean_node_vuln: float | None
    max_sys_vuln: float | None
    build_ms: int
    failed: bool

    def key(self) -> tuple[str, str, int, int]:
        return (self.policy, self.distribution, self.n, self.run)

    def csv_row(self) -> str:
        def fmt(v: float | None) -> str:
            return "" if v is None else repr(float(v))

        return (
            f"{self.policy},{self.distribution},{self.n},{self.run},{self.seed},"
            f"{fmt(self.min_delay_mean_s)},{fmt(self.tree_delay_mean_s)},"
            f"{fmt(self.mean_node_vuln)},{fmt(self.max_sys_vuln)},"
            f"{self.build_ms},{int(self.failed)}"
        )


def cell_seed(master_seed: int, policy: str, distribution: str, n: int, run: int) -> int:
    """The derived seed that makes a cell reproducible in isolation."""
    return derive_seed(master_seed, "cell", policy, distribution, n, run)


def iter_cells(config: ExperimentConfig):
    """Cells in canonical order: distribution, then policy, then size, then run."""
    for dist in config.distributions:
        for policy in config.policies:
            for n in config.sizes:
                for run in range(config.runs):
                    yield (policy, dist, n, run)


def run_cell(
    policy: str, distribution: str, n: int, run: int, master_seed: int, sim: SimParams
) -> CellResult:
    """Generate, build and measure a single cell."""
    seed = cell_seed(master_seed, policy, distribution, n, run)
    space = generate(DistributionSpec.preset(distribution, n, seed))
    caps = CapacityProfile.sample(n, make_rng(seed, "capacities"), sim.capacity_choices, sim.u0)
    t0 = time.perf_counter()
    try:
        topo = build(space, caps, PolicySpec.from_code(policy), sim.m, seed)
    except AdmissionStuck:
        build_ms = int(round((time.perf_counter() - t0) * 1000))
        return CellResult(policy, distribution, n, run, seed, None, None, None, None, build_ms, True)
    build_ms = int(round((time.perf_counter() - t0) * 1000))
    report = compute_metrics(topo, space, sim.m)
    return CellResult(
        policy, distribution, n, run, seed,
        report.min_delay_mean_s, report.tree_delay_mean_s,
        report.mean_node_vuln, report.max_sys_vuln,
        build_ms, False,
    )


def _run_cell_task(task) -> CellResult:
    policy, dist, n, run, master_seed, sim = task
    return run_cell(policy, dist, n, run, master_seed, sim)


def read_results_csv(path) -> list[CellResult]:
    """Parse a raw results file back into :class:`CellResult` rows."""
    out: list[CellResult] = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RESULTS_HEADER.split(","):
            raise ValueError(f"unexpected results header in {path}: {reader.fieldnames}")
        for r in reader:
            out.append(
                CellResult(
                    policy=r["policy"],
                    distribution=r["distribution"],
                    n=int(r["n"]),
                    run=int(r["run"]),
                    seed=int(r["seed"]),
                    min_delay_mean_s=float(r["min_delay_mean_s"]) if r["min_delay_mean_s"] else None,
                    tree_delay_mean_s=float(r["tree_delay_mean_s"]) if r["tree_delay_mean_s"] else None,
                    mean_node_vuln=float(r["mean_node_vuln"]) if r["mean_node_vuln"] else None,
                    max_sys_vuln=float(r["max_sys_vuln"]) if r["max_sys_vuln"] else None,
                    build_ms=int(r["build_ms"]),
                    failed=r["failed"] == "1",
                )
            )
    return out


def run_experiment(
    config: ExperimentConfig,
    out_dir,
    parallel: int = 1,
    progress=None,
) -> tuple[list[CellResult], list["AggregateRow"]]:
    """Run every cell of the grid, streaming rows into ``out_dir/results.csv``.

    Cells already present in the file are skipped (resume semantics), so
    re-running a finished experiment leaves the raw file byte-identical.
    ``parallel`` > 1 distributes cells over worker processes; results are
    written in canonical order either way, so parallelism changes wall time
    only. Returns all cell results plus the aggregate rows, which are also
    rewritten to ``out_dir/agg.csv``.
    """
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")

    done: set[tuple[str, str, int, int]] = set()
    if os.path.exists(results_path):
        done = {r.key() for r in read_results_csv(results_path)}
        mode = "a"
    else:
        mode = "w"

    todo = [
        (policy, dist, n, run, config.master_seed, config.sim)
        for (policy, dist, n, run) in iter_cells(config)
        if (policy, dist, n, run) not in done
    ]

    with open(results_path, mode, encoding="ascii", newline="\n") as f:
        if mode == "w":
            f.write(RESULTS_HEADER + "\n")
            f.flush()
        if parallel > 1 and todo:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                for result in pool.map(_run_cell_task, todo, chunksize=1):
                    f.write(result.csv_row() + "\n")
                    f.flush()
                    if progress is not None:
                        progress(result)
        else:
            for task in todo:
                result = _run_cell_task(task)
                f.write(result.csv_row() + "\n")
                f.flush()
                if progress is not None:
                    progress(result)

    all_results = read_results_csv(results_path)
    agg = aggregate(all_results)
    write_aggregate_csv(agg, os.path.join(out_dir, "agg.csv"))
    return all_results, agg


@dataclass(frozen=True)
class AggregateRow:
    """Mean and 95% confidence half-width of one metric over one cell group."""

    policy: str
    distribution: str  # a distribution name, or "all" for the pooled rows
    n: int
    metric: str
    mean: float
    ci95_halfwidth: float | None
    k: int


def mean_ci95(values) -> tuple[float, float | None]:
    """Sample mean and Student-t 95% confidence half-width.

    A single sample has no spread estimate: the half-width is None.
    """
    arr = np.asarray(values, dtype=np.float64)
    k = len(arr)
    if k == 0:
        raise ValueError("cannot aggregate an empty group")
    mean = float(arr.mean())
    if k == 1:
        return mean, None
    sd = float(arr.std(ddof=1))
    t = float(stats.t.ppf(0.975, k - 1))
    return mean, t * sd / np.sqrt(k)


def aggregate(results: list[CellResult]) -> list[AggregateRow]:
    """Aggregate raw cells into per-(policy, n) rows.

    Pooled rows (distribution="all") merge every distribution's runs, mirroring
    headline comparisons; per-distribution rows follow. Failed cells are
    excluded; groups with no successful cell emit no row.
    """
    policies = list(dict.fromkeys(r.policy for r in results))
    dists = list(dict.fromkeys(r.distribution for r in results))
    sizes = sorted({r.n for r in results})
    ok = [r for r in results if not r.failed]

    grouped: dict[tuple[str, str, int], list[CellResult]] = {}
    for r in ok:
        grouped.setdefault((r.policy, r.distribution, r.n), []).append(r)

    rows: list[AggregateRow] = []

    def emit(policy: str, label: str, n: int, cells: list[CellResult]) -> None:
        if not cells:
            return
        for metric in METRIC_COLUMNS:
            values = [getattr(c, metric) for c in cells]
            mean, hw = mean_ci95(values)
            rows.append(AggregateRow(policy, label, n, metric, mean, hw, len(cells)))

    for policy in policies:
        for n in sizes:
            pooled = [c for d in dists for c in grouped.get((policy, d, n), [])]
            emit(policy, "all", n, pooled)
            for d in dists:
                emit(policy, d, n, grouped.get((policy, d, n), []))
    return rows


def write_aggregate_csv(rows: list[AggregateRow], path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(AGG_HEADER + "\n")
        for r in rows:
            hw = "" if r.ci95_halfwidth is None else repr(float(r.ci95_halfwidth))
            f.write(f"{r.policy},{r.distribution},{r.n},{r.metric},{float(r.mean)!r},{hw},{r.k}\n")
