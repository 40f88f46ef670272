"""Command-line front end.

    tpcluster run --benchmark fir --variant scalar --config 16c16f1p --size 1024 --taps 16
    tpcluster sweep --calib my_calibration.csv --format markdown --out results.md
    tpcluster verify-fp --ops convert --exhaustive
    tpcluster calib-template --out calibration.csv

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 missing data.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import dse, sched
from .kernels import DEFAULT_SEED, Benchmark, KernelSpec, Variant, build
from .timing import COUNTER_FIELDS, ClusterConfig, SimulationError, canonical_configs, counters_csv, simulate
from .tpfloat import conformance

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_MISSING = 0, 1, 2, 3

# what a bare ``--size N`` sets for each benchmark
PRIMARY_DIMS = {
    "conv": ("h", "w"), "dwt": ("n",), "fft": ("n",), "fir": ("n",), "iir": ("n",),
    "kmeans": ("points",), "matmul": ("m", "n", "k"), "svm": ("samples",),
}
DIM_FLAGS = {"taps": "taps", "levels": "levels", "clusters": "k", "dim": "dim",
             "iters": "iters", "svs": "svs"}


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_kernel_flags(p: argparse.ArgumentParser, multi: bool) -> None:
    names = [b.value for b in Benchmark]
    if multi:
        p.add_argument("--benchmark", type=_csv_list, default=names,
                       help=f"comma-separated subset of {','.join(names)} (default: all)")
        p.add_argument("--variant", type=_csv_list, default=list(dse.DEFAULT_VARIANTS),
                       help="comma-separated subset of scalar,f16,bf16")
        p.add_argument("--config", type=_csv_list, default=None,
                       help="comma-separated config ids (default: the 18 canonical ones)")
        p.add_argument("--size", default="desk", choices=("desk", "small"))
    else:
        p.add_argument("--benchmark", required=True, choices=names)
        p.add_argument("--variant", default="scalar", choices=("scalar", "f16", "bf16"))
        p.add_argument("--config", default=None, help="config id such as 16c16f1p")
        p.add_argument("--cores", type=int)
        p.add_argument("--fpus", type=int)
        p.add_argument("--stages", type=int, choices=(0, 1, 2))
        p.add_argument("--size", default="desk",
                       help="preset (desk, small) or the main problem dimension")
        for flag in DIM_FLAGS:
            p.add_argument(f"--{flag}", type=int)
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="any other kernel parameter")
    p.add_argument("--schedule", action="store_true", help="apply the latency-aware list scheduler")
    p.add_argument("--calib", type=Path, help="calibration CSV (default: shipped table of published operating points)")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--format", default="csv", choices=("csv", "markdown"))
    p.add_argument("--seed", type=_u64, default=DEFAULT_SEED)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tpcluster",
                                 description="Transprecision FP cluster simulator and design-space sweep.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="simulate one benchmark on one configuration")
    _add_kernel_flags(run, multi=False)

    sw = sub.add_parser("sweep", help="simulate benchmarks over many configurations")
    _add_kernel_flags(sw, multi=True)
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")

    vf = sub.add_parser("verify-fp", help="check the FP library against the float64 oracle")
    vf.add_argument("--ops", type=_csv_list, default=list(conformance.ALL_OPS),
                    help=f"comma-separated subset of {','.join(conformance.ALL_OPS)}")
    vf.add_argument("--formats", type=_csv_list, default=["f32", "f16", "bf16"])
    vf.add_argument("--samples", type=int, default=100_000, help="sampled cases per op and format")
    vf.add_argument("--exhaustive", action=argparse.BooleanOptionalAction, default=True,
                    help="walk all 2^16 encodings for round-trip conversions")
    vf.add_argument("--seed", type=_u64, default=0)
    vf.add_argument("--out", type=Path)
    vf.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)

    ct = sub.add_parser("calib-template", help="write a calibration CSV with one row per config and corner")
    ct.add_argument("--calib", type=Path, help="prefill from this file (default: shipped table)")
    ct.add_argument("--out", type=Path)
    return ap


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _config(a) -> ClusterConfig:
    if a.config is not None:
        if any(v is not None for v in (a.cores, a.fpus, a.stages)):
            raise UsageError("give either --config or --cores/--fpus/--stages, not both")
        return ClusterConfig.from_id(a.config)
    if a.cores is None:
        if a.fpus is not None or a.stages is not None:
            raise UsageError("--fpus/--stages need --cores")
        return ClusterConfig.from_id("16c16f1p")
    return ClusterConfig(a.cores, a.fpus if a.fpus is not None else a.cores,
                         1 if a.stages is None else a.stages)


def _size(a):
    dims: dict[str, int] = {}
    if a.size not in ("desk", "small"):
        try:
            n = int(a.size)
        except ValueError:
            raise UsageError(f"--size must be desk, small or an integer, got {a.size!r}") from None
        dims.update({k: n for k in PRIMARY_DIMS[a.benchmark]})
    for flag, key in DIM_FLAGS.items():
        v = getattr(a, flag)
        if v is not None:
            dims[key] = v
    for kv in a.param:
        key, sep, val = kv.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {kv!r}")
        try:
            dims[key.strip()] = int(val)
        except ValueError:
            raise UsageError(f"--param {key} needs an integer value") from None
    return dims or a.size


def cmd_run(a) -> int:
    cfg = _config(a)
    spec = KernelSpec(a.benchmark, a.variant, cfg.n_cores, _size(a), a.seed)
    calib = dse.load_calibration(a.calib)
    if a.calib is not None and not dse.corners(calib, cfg.config_id):
        print(f"error: {a.calib} has no calibration rows for {cfg.config_id}", file=sys.stderr)
        return EXIT_MISSING
    kb = build(spec)
    progs = sched.schedule_programs(kb.programs, cfg) if a.schedule else kb.programs
    res = simulate(cfg, progs)
    row = dse.partial_metrics(res.elapsed_cycles, kb.flops, cfg.config_id, calib,
                              benchmark=spec.kind.value, variant=spec.variant.value,
                              counters={k: getattr(res.summed(), k) for k in COUNTER_FIELDS})
    if a.format == "markdown":
        head = "| core | " + " | ".join(COUNTER_FIELDS) + " |\n|---|" + "---|" * len(COUNTER_FIELDS) + "\n"
        body = "".join(f"| {i} | " + " | ".join(str(getattr(c, k)) for k in COUNTER_FIELDS) + " |\n"
                       for i, c in enumerate(res.per_core))
        text = head + body + "\n" + dse.results_markdown([row]) + "\n"
    else:
        text = counters_csv(res) + "\n" + dse.results_csv([row])
    _emit(text, a.out)
    return EXIT_OK


def _summary_rows(rows) -> list[dse.MetricRow]:
    ok = [r for r in rows if not r.status.startswith("error")]
    if not ok:
        return []
    summ = dse.normalize_summary(ok)
    out = []
    for cid, vals in summ.items():
        out.append(dse.MetricRow("NAVG", "", cid, 0, 0, status="summary", **vals))
    return out


def cmd_sweep(a) -> int:
    try:
        cfgs = [ClusterConfig.from_id(c) for c in a.config] if a.config else canonical_configs()
        benches = [Benchmark.parse(b) for b in a.benchmark]
        variants = [Variant.parse(v) for v in a.variant]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    calib = dse.load_calibration(a.calib)
    rows = dse.sweep(benches, cfgs, calib, variants=variants, size=a.size, seed=a.seed,
                     schedule=a.schedule, jobs=a.jobs)
    if a.format == "markdown":
        text = dse.results_markdown(rows)
    else:
        text = dse.results_csv(rows + _summary_rows(rows))
    _emit(text, a.out)
    if rows and all(r.status.startswith("error") for r in rows):
        print("error: every sweep cell failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify_fp(a) -> int:
    if a.samples < 1:
        raise UsageError("--samples must be positive")
    try:
        rep = conformance.run(a.ops, a.formats, a.samples, a.seed, a.exhaustive, a.inject_fault)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("op", "format", "checked", "mismatches"))
    for r in rep.results:
        w.writerow((r.op, r.fmt, r.checked, r.mismatches))
    _emit(buf.getvalue(), a.out)
    if not rep.ok:
        print(f"mismatch: {rep.first_failure}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_calib_template(a) -> int:
    _emit(dse.calib_template(dse.load_calibration(a.calib)), a.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify-fp": cmd_verify_fp,
            "calib-template": cmd_calib_template}


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        return COMMANDS[a.cmd](a)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except dse.CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, SimulationError) as exc:
        # bad kernel dimensions or configuration values are usage problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
