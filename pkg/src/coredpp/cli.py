"""Experiment runner: build models, draw samples, evaluate diagnostics,
run parameter sweeps and timing benchmarks, and emit plot-ready CSV/JSON.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
The environment variable COREDPP_THREADS caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import baselines, diagnostics, modelio
from .coreset import CoreModel, construct
from .datagen import SyntheticSpec, gen_synthetic, load_points
from .errors import DataError, NumericError, ParseError, UsageError
from .kdpp import build_kdpp, kdpp_sample
from .kernels import (
    KernelMatrix,
    PointSet,
    linear_kernel,
    median_heuristic_bandwidth,
    rbf_kernel,
)
from .sampler import coredpp_sample
from .seeding import child_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


@dataclasses.dataclass
class RunConfig:
    """Resolved knobs for one command invocation; JSON round-trip stable."""

    command: str
    synthetic: str | None = None
    data: str | None = None
    kernel: str = "linear"
    k: int = 2
    m: int = 2
    nu: int = 1
    passes: int = 1
    init: str = "kmeanspp"
    sampler: str = "coredpp"
    samples: int = 0
    seed: int = 0
    seeds: tuple[int, ...] = ()
    out: str | None = None
    budget: int = diagnostics.DEFAULT_BUDGET
    probes: int = 20_000

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["seeds"] = tuple(d.get("seeds", ()))
        return cls(**d)


class _Parser(argparse.ArgumentParser):
    """argparse that exits with the usage code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parse_synthetic(text: str) -> SyntheticSpec:
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError(f"--synthetic wants nClust:perCluster:dim:meanNorm, got {text!r}")
    try:
        n_clusters, per_cluster, dim = int(parts[0]), int(parts[1]), int(parts[2])
        mean_norm = float(parts[3])
    except ValueError as exc:
        raise UsageError(f"bad --synthetic value {text!r}: {exc}") from exc
    try:
        return SyntheticSpec(n_clusters, per_cluster, dim, mean_norm)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _resolve_points(args) -> PointSet:
    if getattr(args, "synthetic", None):
        spec = _parse_synthetic(args.synthetic)
        spec = dataclasses.replace(spec, seed=args.seed)
        return gen_synthetic(spec)
    if getattr(args, "data", None):
        return load_points(args.data)
    raise UsageError("need a dataset: pass --synthetic or --data")


def _build_kernel(points: PointSet, spec: str, seed: int) -> KernelMatrix:
    if spec == "linear":
        return linear_kernel(points)
    if spec == "rbf" or spec.startswith("rbf:"):
        if ":" in spec:
            try:
                bw = float(spec.split(":", 1)[1])
            except ValueError as exc:
                raise UsageError(f"bad rbf bandwidth in {spec!r}") from exc
        else:
            bw = median_heuristic_bandwidth(points, child_rng(seed, 4))
        return rbf_kernel(points, bw)
    raise UsageError(f"unknown kernel {spec!r} (use linear or rbf[:bandwidth])")


def _check_geometry(n: int, k: int, m: int) -> None:
    if not (1 <= k <= m <= n):
        raise UsageError(f"need 1 <= k <= M <= N, got k={k}, M={m}, N={n}")


def _build_model(kernel: KernelMatrix, points: PointSet, args) -> tuple[CoreModel, float]:
    _check_geometry(kernel.n, args.k, args.m)
    rng = child_rng(args.seed, 1)
    start = time.perf_counter()
    if args.sampler == "kpp":
        model = baselines.kpp_baseline(points, kernel, args.m, args.k, rng)
    elif args.sampler in ("coredpp", "exact"):
        model = construct(kernel, args.k, args.m, args.nu, rng,
                          max_passes=args.passes, init=args.init,
                          exact=(args.sampler == "exact"))
    else:
        raise UsageError(f"--sampler {args.sampler!r} does not build a model")
    return model, time.perf_counter() - start


def cmd_build(args) -> int:
    points = _resolve_points(args)
    kernel = _build_kernel(points, args.kernel, args.seed)
    model, overhead = _build_model(kernel, points, args)
    out = args.out or "model.json"
    modelio.save_core_model(model, out)
    print(f"wrote {out} (n={kernel.n}, M={model.partition.m}, k={model.k}); "
          f"overhead {overhead:.3f}s")
    return EXIT_OK


def cmd_sample(args) -> int:
    out = args.out or "samples.csv"
    sampler = args.sampler
    rng = child_rng(args.seed, 2)
    rows: list[tuple[int, ...]] = []
    per_sample: list[float] = []
    setup_seconds = 0.0
    if sampler in ("coredpp", "kpp"):
        if not args.model:
            raise UsageError(f"--sampler {sampler} needs --model")
        model = modelio.load_core_model(args.model)
        start = time.perf_counter()
        model.stage_one  # eigenstructure ready before per-sample timing
        setup_seconds = time.perf_counter() - start
        for _ in range(args.samples):
            t0 = time.perf_counter()
            draw = coredpp_sample(model, rng)
            per_sample.append(time.perf_counter() - t0)
            rows.append(tuple(sorted(draw.items)))
    elif sampler == "exact":
        points = _resolve_points(args)
        kernel = _build_kernel(points, args.kernel, args.seed)
        start = time.perf_counter()
        model = build_kdpp(kernel, args.k)
        setup_seconds = time.perf_counter() - start
        for _ in range(args.samples):
            t0 = time.perf_counter()
            rows.append(kdpp_sample(model, rng))
            per_sample.append(time.perf_counter() - t0)
    elif sampler == "mcmc":
        points = _resolve_points(args)
        kernel = _build_kernel(points, args.kernel, args.seed)
        start = time.perf_counter()
        run = baselines.mcmc_sample_until_converged(kernel, args.k, args.chains,
                                                    args.psrf_threshold, args.mcmc_cap, rng)
        setup_seconds = time.perf_counter() - start
        if not run.converged:
            print(f"warning: diagnostic still {run.psrf:.3f} after {run.iterations} "
                  "iterations", file=sys.stderr)
        for _ in range(args.samples):
            t0 = time.perf_counter()
            state = baselines.initial_chain_state(kernel,
                                                  rng.choice(kernel.n, size=args.k, replace=False))
            for _ in range(run.iterations):
                state = baselines.mcmc_kdpp_step(kernel, state, rng)
            rows.append(state.current)
            per_sample.append(time.perf_counter() - t0)
    else:
        raise UsageError(f"unknown sampler {sampler!r}")

    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)
    sidecar = {
        "sampler": sampler,
        "n_samples": args.samples,
        "setup_seconds": setup_seconds,
        "per_sample_seconds": per_sample,
        "mean_per_sample_seconds": (sum(per_sample) / len(per_sample)) if per_sample else None,
        "amortized_seconds": ((setup_seconds + sum(per_sample)) / len(per_sample))
        if per_sample else None,
    }
    with open(out + ".timing.json", "w") as fh:
        json.dump(sidecar, fh)
        fh.write("\n")
    print(f"wrote {len(rows)} samples to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.model:
        raise UsageError("eval needs --model")
    points = _resolve_points(args)
    kernel = _build_kernel(points, args.kernel, args.seed)
    model = modelio.rebuild_core_model(kernel, modelio.load_core_model(args.model))
    report = diagnostics.evaluate_model(kernel, model, model.k, child_rng(args.seed, 3),
                                        budget=args.budget, n_probes=args.probes)
    text = report.to_json(indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


# -- sweep -----------------------------------------------------------------------


SWEEP_METHODS = ("coredpp", "coredpp-exact", "coredpp-random", "kpp")


@dataclasses.dataclass(frozen=True)
class SweepTask:
    cell_index: int
    n_clusters: int
    per_cluster: int
    dim: int
    mean_norm: float
    k: int
    m: int
    nu: int
    passes: int
    seed: int
    method: str
    kernel: str
    budget: int
    sample_draws: int = 100


def run_sweep_task(task: SweepTask) -> dict:
    spec = SyntheticSpec(task.n_clusters, task.per_cluster, task.dim, task.mean_norm,
                         seed=task.seed)
    points = gen_synthetic(spec)
    kernel = _build_kernel(points, task.kernel, task.seed)
    rng = child_rng(task.seed, 1)
    start = time.perf_counter()
    if task.method == "kpp":
        model = baselines.kpp_baseline(points, kernel, task.m, task.k, rng)
    elif task.method in ("coredpp", "coredpp-exact", "coredpp-random"):
        model = construct(kernel, task.k, task.m, task.nu, rng, max_passes=task.passes,
                          init="random" if task.method == "coredpp-random" else "kmeanspp",
                          exact=(task.method == "coredpp-exact"))
    else:
        raise UsageError(f"unknown sweep method {task.method!r}")
    overhead = time.perf_counter() - start

    if math.comb(kernel.n, task.k) <= task.budget:
        tv = diagnostics.tv_exact(kernel, model, task.k, task.budget)
        tv_kind = "exact"
    else:
        tv, _ = diagnostics.tv_empirical(kernel, model, task.k, 20_000,
                                         child_rng(task.seed, 3))
        tv_kind = "estimate"

    draw_rng = child_rng(task.seed, 2)
    t0 = time.perf_counter()
    for _ in range(task.sample_draws):
        coredpp_sample(model, draw_rng)
    per_sample = (time.perf_counter() - t0) / max(task.sample_draws, 1)

    return {
        "cell_index": task.cell_index,
        "n_clusters": task.n_clusters,
        "mean_norm": task.mean_norm,
        "n": spec.n,
        "dim": task.dim,
        "k": task.k,
        "m": task.m,
        "nu": task.nu,
        "seed": task.seed,
        "method": task.method,
        "tv": tv,
        "tv_kind": tv_kind,
        "overhead_seconds": overhead,
        "per_sample_seconds": per_sample,
    }


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("COREDPP_THREADS")
    if cap is not None:
        try:
            limit = max(1, int(cap))
        except ValueError:
            limit = 1
    else:
        limit = os.cpu_count() or 1
    return max(1, min(limit, n_tasks))


def run_sweep(tasks: list[SweepTask]) -> list[dict]:
    """Execute tasks (possibly in parallel); rows come back in cell order."""
    workers = _worker_count(len(tasks))
    if workers == 1:
        rows = [run_sweep_task(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_sweep_task, tasks, chunksize=1))
    rows.sort(key=lambda r: r["cell_index"])
    return rows


def _parse_grid(text: str, cast) -> list:
    try:
        return [cast(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from exc


SWEEP_COLUMNS = ["cell_index", "n_clusters", "mean_norm", "n", "dim", "k", "m", "nu",
                 "seed", "method", "tv", "tv_kind", "overhead_seconds",
                 "per_sample_seconds"]


def cmd_sweep(args) -> int:
    nclust_grid = _parse_grid(args.nclust_grid, int)
    norm_grid = _parse_grid(args.mean_norm_grid, float)
    m_grid = _parse_grid(args.m_grid, int) if args.m_grid else [args.m]
    k_grid = _parse_grid(args.k_grid, int) if args.k_grid else [args.k]
    seeds = _parse_grid(args.seeds, int) if args.seeds else [args.seed]
    methods = _parse_grid(args.methods, str)
    for method in methods:
        if method not in SWEEP_METHODS:
            raise UsageError(f"unknown method {method!r}; choose from {SWEEP_METHODS}")
    tasks = []
    idx = 0
    for nclust in nclust_grid:
        for norm in norm_grid:
            for m in m_grid:
                for k in k_grid:
                    for seed in seeds:
                        for method in methods:
                            _check_geometry(nclust * args.per_cluster, k, m)
                            tasks.append(SweepTask(idx, nclust, args.per_cluster,
                                                   args.dim, norm, k, m, args.nu,
                                                   args.passes, seed, method,
                                                   args.kernel, args.budget))
                            idx += 1
    rows = run_sweep(tasks)
    out = args.out or "sweep.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


# -- bench -----------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class BenchConfig:
    sample_n_grid: tuple[int, ...] = (800, 8000)
    overhead_n_grid: tuple[int, ...] = (2000, 4000, 8000)
    m: int = 40
    k: int = 5
    nu: int = 2
    dim: int = 30
    n_clusters: int = 20
    mean_norm: float = 8.0
    warmup: int = 5
    reps: int = 20
    batch: int = 50          # draws per timed repetition; reported per draw
    overhead_reps: int = 3
    seed: int = 0
    with_mcmc: bool = True
    mcmc_chains: int = 4
    mcmc_cap: int = 5000
    psrf_threshold: float = 1.1


def _bench_points(config: BenchConfig, n: int) -> PointSet:
    per = max(1, n // config.n_clusters)
    spec = SyntheticSpec(config.n_clusters, per, config.dim, config.mean_norm,
                         seed=config.seed)
    return gen_synthetic(spec)


def _median_time(fn, warmup: int, reps: int) -> float:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def run_bench(config: BenchConfig) -> list[dict]:
    """Timing rows: construction overhead vs N, per-sample time vs N, MCMC cost."""
    rows: list[dict] = []

    for n in config.overhead_n_grid:
        points = _bench_points(config, n)
        kernel = linear_kernel(points)
        rng = child_rng(config.seed, 1)

        def build():
            construct(kernel, config.k, config.m, config.nu, rng, max_passes=1)

        seconds = _median_time(build, warmup=1, reps=config.overhead_reps)
        rows.append({"measure": "overhead", "method": "coredpp-construct",
                     "n": n, "value": seconds})

    for n in config.sample_n_grid:
        points = _bench_points(config, n)
        kernel = linear_kernel(points)
        model = construct(kernel, config.k, config.m, config.nu,
                          child_rng(config.seed, 1), max_passes=1)
        model.stage_one
        rng = child_rng(config.seed, 2)
        batch = max(config.batch, 1)

        def draw_core():
            for _ in range(batch):
                coredpp_sample(model, rng)

        seconds = _median_time(draw_core, config.warmup, config.reps) / batch
        rows.append({"measure": "per_sample", "method": "coredpp", "n": n,
                     "value": seconds})

        exact = build_kdpp(kernel, config.k)

        def draw_exact():
            for _ in range(batch):
                kdpp_sample(exact, rng)

        seconds = _median_time(draw_exact, config.warmup, config.reps) / batch
        rows.append({"measure": "per_sample", "method": "exact", "n": n,
                     "value": seconds})

    if config.with_mcmc:
        n = min(config.sample_n_grid)
        points = _bench_points(config, n)
        kernel = linear_kernel(points)
        rng = child_rng(config.seed, 5)
        t0 = time.perf_counter()
        run = baselines.mcmc_sample_until_converged(kernel, config.k, config.mcmc_chains,
                                                    config.psrf_threshold,
                                                    config.mcmc_cap, rng)
        inclusive = time.perf_counter() - t0
        t0 = time.perf_counter()
        state = baselines.initial_chain_state(kernel,
                                              rng.choice(kernel.n, size=config.k, replace=False))
        for _ in range(run.iterations):
            state = baselines.mcmc_kdpp_step(kernel, state, rng)
        exclusive = time.perf_counter() - t0
        rows.append({"measure": "mcmc_iterations", "method": "mcmc", "n": n,
                     "value": run.iterations})
        rows.append({"measure": "per_sample_inclusive", "method": "mcmc", "n": n,
                     "value": inclusive})
        rows.append({"measure": "per_sample_exclusive", "method": "mcmc", "n": n,
                     "value": exclusive})
    return rows


def cmd_bench(args) -> int:
    config = BenchConfig(
        sample_n_grid=tuple(_parse_grid(args.n_grid, int)),
        overhead_n_grid=tuple(_parse_grid(args.overhead_n_grid, int)),
        m=args.m, k=args.k, nu=args.nu, warmup=args.warmup, reps=args.reps,
        seed=args.seed, with_mcmc=not args.no_mcmc,
    )
    rows = run_bench(config)
    out = args.out or "bench.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["measure", "method", "n", "value"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def _add_data_flags(p):
    p.add_argument("--data", help="CSV point set (rows of comma-separated floats)")
    p.add_argument("--synthetic", help="nClust:perCluster:dim:meanNorm")
    p.add_argument("--kernel", default="linear", help="linear or rbf[:bandwidth]")


def _add_model_flags(p):
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--M", dest="m", type=int, default=2)
    p.add_argument("--nu", type=int, default=1)
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--init", choices=("kmeanspp", "random"), default="kmeanspp")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coredpp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="construct and serialize a core model")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--sampler", choices=("coredpp", "exact", "kpp"), default="coredpp",
                   help="construction method (exact = unaccelerated objectives)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("sample", help="draw subsets from a model or directly")
    _add_data_flags(p)
    p.add_argument("--model", help="model file (coredpp/kpp samplers)")
    p.add_argument("--sampler", choices=("coredpp", "exact", "mcmc", "kpp"),
                   default="coredpp")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--psrf-threshold", type=float, default=1.1)
    p.add_argument("--mcmc-cap", type=int, default=20_000)
    p.add_argument("--out")

    p = sub.add_parser("eval", help="diagnostics report for a model + dataset")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=diagnostics.DEFAULT_BUDGET)
    p.add_argument("--probes", type=int, default=20_000)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="grid experiment over synthetic data")
    p.add_argument("--nclust-grid", default="10")
    p.add_argument("--mean-norm-grid", default="5,6,7,8,9")
    p.add_argument("--per-cluster", type=int, default=6)
    p.add_argument("--dim", type=int, default=30)
    p.add_argument("--m-grid")
    p.add_argument("--k-grid")
    _add_model_flags(p)
    p.add_argument("--kernel", default="linear")
    p.add_argument("--methods", default="coredpp,kpp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--budget", type=int, default=diagnostics.DEFAULT_BUDGET)
    p.add_argument("--out")

    p = sub.add_parser("bench", help="scaling-shape timing benchmark")
    p.add_argument("--n-grid", default="800,8000")
    p.add_argument("--overhead-n-grid", default="2000,4000,8000")
    p.add_argument("--M", dest="m", type=int, default=40)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--nu", type=int, default=2)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-mcmc", action="store_true")
    p.add_argument("--out")
    return parser


_COMMANDS = {
    "build": cmd_build,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
