"""Design-space sweep: cycles to Gflop/s, Gflop/s/W and Gflop/s/mm².

Performance and area efficiency use the 0.80 V operating point, energy
efficiency the 0.65 V one.  Calibration rows come from a small CSV file;
the shipped table only holds the three operating points published for the
cluster, every other configuration needs user-supplied ``estimated`` rows.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .kernels import DEFAULT_SEED, Benchmark, KernelSpec, Variant, build
from .sched import schedule_programs
from .timing import COUNTER_FIELDS, ClusterConfig, canonical_configs, simulate

CALIB_HEADER = ("config_id", "voltage", "freq_mhz", "power_mw", "area_mm2", "provenance")
METRICS = ("perf_gflops", "energy_eff_gflops_per_w", "area_eff_gflops_per_mm2")


class Voltage(enum.Enum):
    V065 = "0.65"
    V080 = "0.80"

    @classmethod
    def parse(cls, v) -> "Voltage":
        if isinstance(v, cls):
            return v
        try:
            x = float(v)
        except (TypeError, ValueError):
            raise ValueError(f"bad voltage {v!r}") from None
        for m in cls:
            if math.isclose(x, float(m.value)):
                return m
        raise ValueError(f"voltage {v!r} is neither 0.65 nor 0.80")


class Provenance(enum.Enum):
    PAPER = "paper"
    ESTIMATED = "estimated"


class CalibrationError(LookupError):
    def __init__(self, config_id: str, voltage: Voltage):
        super().__init__(f"no calibration for {config_id} at {voltage.value} V")
        self.config_id = config_id
        self.voltage = voltage


@dataclass(frozen=True)
class CalibrationRecord:
    config_id: str
    voltage: Voltage
    freq_mhz: float
    power_mw: float
    area_mm2: float
    provenance: Provenance = Provenance.ESTIMATED

    def __post_init__(self):
        ClusterConfig.from_id(self.config_id)
        object.__setattr__(self, "voltage", Voltage.parse(self.voltage))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        for name in ("freq_mhz", "power_mw", "area_mm2"):
            v = float(getattr(self, name))
            if not v > 0 or not math.isfinite(v):
                raise ValueError(f"{self.config_id}: {name} must be positive, got {v}")
            object.__setattr__(self, name, v)


def read_calibration(text: str) -> list[CalibrationRecord]:
    """Parse calibration CSV text.  Rows with all numeric fields blank are skipped."""
    rd = csv.DictReader(io.StringIO(text))
    if tuple(rd.fieldnames or ()) != CALIB_HEADER:
        raise ValueError(f"calibration header must be {','.join(CALIB_HEADER)}")
    out: list[CalibrationRecord] = []
    seen = set()
    for ln, row in enumerate(rd, start=2):
        nums = [row[k].strip() for k in ("freq_mhz", "power_mw", "area_mm2")]
        if not any(nums):
            continue
        if not all(nums):
            raise ValueError(f"line {ln}: partially filled calibration row")
        rec = CalibrationRecord(row["config_id"].strip(), row["voltage"].strip(),
                                *map(float, nums), row["provenance"].strip() or "estimated")
        key = (rec.config_id, rec.voltage)
        if key in seen:
            raise ValueError(f"line {ln}: duplicate row for {rec.config_id} at {rec.voltage.value} V")
        seen.add(key)
        out.append(rec)
    return out


def load_calibration(path: str | Path | None = None) -> list[CalibrationRecord]:
    """Load a calibration file; ``None`` loads the shipped table of published operating points."""
    if path is None:
        text = resources.files("tpcluster").joinpath("data/calibration.csv").read_text()
    else:
        text = Path(path).read_text()
    return read_calibration(text)


def calibration_csv(records: Iterable[CalibrationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CALIB_HEADER)
    for r in records:
        w.writerow((r.config_id, r.voltage.value, _num(r.freq_mhz), _num(r.power_mw),
                    _num(r.area_mm2), r.provenance.value))
    return buf.getvalue()


def calib_template(records: Iterable[CalibrationRecord] = ()) -> str:
    """Every canonical (config, corner) pair, pre-filled where ``records`` has data."""
    have = {(r.config_id, r.voltage): r for r in records}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CALIB_HEADER)
    for cfg in canonical_configs():
        for v in Voltage:
            r = have.get((cfg.config_id, v))
            if r is None:
                w.writerow((cfg.config_id, v.value, "", "", "", "estimated"))
            else:
                w.writerow((r.config_id, v.value, _num(r.freq_mhz), _num(r.power_mw),
                            _num(r.area_mm2), r.provenance.value))
    return buf.getvalue()


def corners(records: Iterable[CalibrationRecord], config_id: str) -> dict[Voltage, CalibrationRecord]:
    return {r.voltage: r for r in records if r.config_id == config_id}


@dataclass
class MetricRow:
    benchmark: str
    variant: str
    config_id: str
    cycles: int
    flops: int
    perf_gflops: float = math.nan
    energy_eff_gflops_per_w: float = math.nan
    area_eff_gflops_per_mm2: float = math.nan
    area_mm2: float = math.nan
    provenance: str = ""
    status: str = "ok"
    counters: dict = field(default_factory=dict)

    def key(self) -> tuple:
        return (self.benchmark, self.variant, self.config_id)


def _rate(cycles: int, flops: int) -> float:
    if cycles < 0 or flops < 0:
        raise ValueError("cycles and flops must be non-negative")
    if flops == 0:
        return 0.0
    if cycles == 0:
        raise ValueError("positive flops in zero cycles")
    return flops / cycles


def _fill(row: MetricRow, have: dict[Voltage, CalibrationRecord]) -> MetricRow:
    fpc = _rate(row.cycles, row.flops)
    hi, lo = have.get(Voltage.V080), have.get(Voltage.V065)
    if hi is not None:
        row.perf_gflops = fpc * hi.freq_mhz / 1e3
        row.area_mm2 = hi.area_mm2
        row.area_eff_gflops_per_mm2 = row.perf_gflops / hi.area_mm2
    if lo is not None:
        row.energy_eff_gflops_per_w = fpc * lo.freq_mhz / lo.power_mw
        if hi is None:
            row.area_mm2 = lo.area_mm2
    row.provenance = "+".join(sorted({r.provenance.value for r in have.values()}))
    row.status = {2: "ok", 1: "partial-calibration", 0: "no-calibration"}[len(have)]
    return row


def metrics(cycles: int, flops: int, calib: Iterable[CalibrationRecord], *,
            benchmark: str = "", variant: str = "", counters: dict | None = None) -> MetricRow:
    """All three metrics for one configuration; both voltage corners are required."""
    calib = list(calib)
    ids = {r.config_id for r in calib}
    if len(ids) > 1:
        raise ValueError(f"calibration rows mix configurations: {sorted(ids)}")
    if not ids:
        raise ValueError("no calibration rows given")
    cid = ids.pop()
    have = corners(calib, cid)
    for v in (Voltage.V080, Voltage.V065):
        if v not in have:
            raise CalibrationError(cid, v)
    return _fill(MetricRow(benchmark, variant, cid, cycles, flops, counters=counters or {}), have)


def partial_metrics(cycles: int, flops: int, config_id: str, calib: Iterable[CalibrationRecord], *,
                    benchmark: str = "", variant: str = "", counters: dict | None = None) -> MetricRow:
    """Like ``metrics`` but fills only what the available corners allow (others NaN)."""
    row = MetricRow(benchmark, variant, config_id, cycles, flops, counters=counters or {})
    return _fill(row, corners(calib, config_id))


DEFAULT_VARIANTS = ("scalar", "f16", "bf16")


def _group(job) -> list[MetricRow]:
    """Build one (benchmark, variant, n_cores) stream set and run it on each config."""
    bench, variant, n_cores, cfg_ids, size, seed, schedule, calib = job
    rows = []
    try:
        kb = build(KernelSpec(bench, variant, n_cores, size, seed))
    except Exception as exc:          # reported per cell, the sweep goes on
        return [MetricRow(bench, variant, c, 0, 0, status=f"error: {exc}") for c in cfg_ids]
    for cid in cfg_ids:
        try:
            cfg = ClusterConfig.from_id(cid)
            progs = kb.programs
            if schedule:
                progs = schedule_programs(progs, cfg)
            res = simulate(cfg, progs)
            rows.append(partial_metrics(res.elapsed_cycles, kb.flops, cid, calib,
                                        benchmark=bench, variant=variant,
                                        counters=asdict(res.summed())))
        except Exception as exc:
            rows.append(MetricRow(bench, variant, cid, 0, kb.flops, status=f"error: {exc}"))
    return rows


def sweep(benchmarks: Sequence = tuple(Benchmark), configs: Sequence = (), calib=None, *,
          variants: Sequence = DEFAULT_VARIANTS, size="desk", seed: int | None = None,
          schedule: bool = False, jobs: int = 1) -> list[MetricRow]:
    """Simulate every (benchmark, variant, config) cell; sorted, deterministic output.

    Cells whose configuration lacks calibration still carry cycles and flops,
    with the missing metrics left as NaN and the status column saying why.
    """
    calib = load_calibration() if calib is None else list(calib)
    cfgs = [c if isinstance(c, ClusterConfig) else ClusterConfig.from_id(c)
            for c in (configs or canonical_configs())]
    benches = sorted({Benchmark.parse(b).value for b in benchmarks})
    vars_ = sorted({Variant.parse(v).value for v in variants})
    by_cores: dict[int, list[str]] = {}
    for c in cfgs:
        by_cores.setdefault(c.n_cores, []).append(c.config_id)
    seed = DEFAULT_SEED if seed is None else seed
    job_list = [(b, v, n, sorted(set(ids)), size, seed, schedule, calib)
                for b in benches for v in vars_ for n, ids in sorted(by_cores.items())]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            parts = list(ex.map(_group, job_list))
    else:
        parts = [_group(j) for j in job_list]
    rows = [r for p in parts for r in p]
    rows.sort(key=lambda r: (r.benchmark, r.variant, _cfg_order(r.config_id)))
    return rows


def _cfg_order(cid: str):
    c = ClusterConfig.from_id(cid)
    return (c.n_cores, -c.n_fpus, c.pipeline_stages)


def normalize_summary(rows: Sequence[MetricRow], metrics_: Sequence[str] = METRICS) -> dict[str, dict[str, float]]:
    """Per-config mean of min-max normalized metrics.

    Each (benchmark, variant) pair is normalized across configurations on
    its own; NaN cells are left out.  When max == min the value is 0.
    """
    if not rows:
        raise ValueError("nothing to normalize")
    cfg_ids = sorted({r.config_id for r in rows}, key=_cfg_order)
    out = {c: {} for c in cfg_ids}
    for m in metrics_:
        groups: dict[tuple, list[MetricRow]] = {}
        for r in rows:
            if not math.isnan(getattr(r, m)):
                groups.setdefault((r.benchmark, r.variant), []).append(r)
        acc: dict[str, list[float]] = {c: [] for c in cfg_ids}
        for grp in groups.values():
            vals = [getattr(r, m) for r in grp]
            lo, hi = min(vals), max(vals)
            for r, v in zip(grp, vals):
                acc[r.config_id].append(0.0 if hi == lo else (v - lo) / (hi - lo))
        for c in cfg_ids:
            out[c][m] = sum(acc[c]) / len(acc[c]) if acc[c] else math.nan
    return out


def best_configs(rows: Sequence[MetricRow], metric: str = "perf_gflops") -> dict[tuple, str]:
    """Best configuration per (benchmark, variant); ties go to the first in sweep order."""
    best: dict[tuple, MetricRow] = {}
    for r in rows:
        v = getattr(r, metric)
        if math.isnan(v):
            continue
        k = (r.benchmark, r.variant)
        if k not in best or v > getattr(best[k], metric):
            best[k] = r
    return {k: r.config_id for k, r in best.items()}


def _num(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else format(v, ".6g")
    return str(v)


RESULT_HEADER = ("benchmark", "variant", "config_id", "status", "provenance", "cycles", "flops",
                 *METRICS, "area_mm2", *COUNTER_FIELDS)


def results_csv(rows: Sequence[MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for r in rows:
        w.writerow((r.benchmark, r.variant, r.config_id, r.status, r.provenance, r.cycles, r.flops,
                    *(_num(getattr(r, m)) for m in METRICS), _num(r.area_mm2),
                    *(r.counters.get(k, "") for k in COUNTER_FIELDS)))
    return buf.getvalue()


_TITLES = {"perf_gflops": "Performance [Gflop/s]",
           "energy_eff_gflops_per_w": "Energy efficiency [Gflop/s/W]",
           "area_eff_gflops_per_mm2": "Area efficiency [Gflop/s/mm²]"}


def results_markdown(rows: Sequence[MetricRow]) -> str:
    """One table per metric; the best configuration of each row is boxed as ``[v]``."""
    if not rows:
        return ""
    cfg_ids = sorted({r.config_id for r in rows}, key=_cfg_order)
    keys = sorted({(r.benchmark, r.variant) for r in rows})
    cell = {r.key(): r for r in rows}
    summary = normalize_summary(rows)
    lines = []
    for m in METRICS:
        best = best_configs(rows, m)
        lines += [f"### {_TITLES[m]}", "",
                  "| benchmark | variant | " + " | ".join(cfg_ids) + " |",
                  "|---|---|" + "---|" * len(cfg_ids)]
        for b, v in keys:
            vals = []
            for c in cfg_ids:
                r = cell.get((b, v, c))
                s = "" if r is None else _num(getattr(r, m)) or "-"
                if best.get((b, v)) == c:
                    s = f"[{s}]"
                vals.append(s)
            lines.append(f"| {b} | {v} | " + " | ".join(vals) + " |")
        navg = [_num(round(summary[c][m], 2)) if not math.isnan(summary[c][m]) else "-" for c in cfg_ids]
        lines += ["| NAVG | | " + " | ".join(navg) + " |", ""]
    return "\n".join(lines)
