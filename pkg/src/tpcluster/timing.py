"""Cycle-level timing model of the shared-FPU cluster.

Cores are in-order and single-issue.  Each cycle runs in two phases:
every live core first decides what it wants (stall, issue, or request a
shared resource), then each contended resource (TCDM bank, FPU, DIV-SQRT)
grants one requester round-robin.  Losers retry next cycle.  Cycle numbers
reported in traces are 1-based.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from .isa import Kind, Program, Region, validate
from .tpfloat.formats import F16, F32, BF16

DIVSQRT_LATENCY = {F32.name: 11, F16.name: 7, BF16.name: 6}
CANONICAL_CORES = (8, 16)
CANONICAL_SHARING = (4, 2, 1)  # cores per FPU
CANONICAL_STAGES = (0, 1, 2)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClusterConfig:
    n_cores: int
    n_fpus: int
    pipeline_stages: int
    n_tcdm_banks: int | None = None
    l2_latency_cycles: int = 15
    tcdm_bytes: int | None = None

    def __post_init__(self):
        if self.n_cores < 1 or self.n_fpus < 1:
            raise ValueError("need at least one core and one FPU")
        if self.n_cores % self.n_fpus:
            raise ValueError(f"{self.n_cores} cores cannot be split over {self.n_fpus} FPUs")
        if self.pipeline_stages not in CANONICAL_STAGES:
            raise ValueError(f"pipeline_stages must be 0, 1 or 2, got {self.pipeline_stages}")
        if self.n_tcdm_banks is None:
            object.__setattr__(self, "n_tcdm_banks", 2 * self.n_cores)
        nb = self.n_tcdm_banks
        if nb < 1 or nb & (nb - 1):
            raise ValueError(f"bank count {nb} is not a power of two")
        if self.tcdm_bytes is None:
            object.__setattr__(self, "tcdm_bytes", 64 * 1024 if self.n_cores <= 8 else 128 * 1024)
        if self.l2_latency_cycles < 1:
            raise ValueError("L2 latency must be at least one cycle")

    @property
    def config_id(self) -> str:
        return f"{self.n_cores}c{self.n_fpus}f{self.pipeline_stages}p"

    @property
    def fp_latency(self) -> int:
        return self.pipeline_stages + 1

    @property
    def is_canonical(self) -> bool:
        return (self.n_cores in CANONICAL_CORES
                and self.n_cores // self.n_fpus in CANONICAL_SHARING
                and self.n_tcdm_banks == 2 * self.n_cores
                and self.l2_latency_cycles == 15)

    @classmethod
    def from_id(cls, config_id: str, **kw) -> "ClusterConfig":
        m = re.fullmatch(r"(\d+)c(\d+)f(\d)p", config_id.strip())
        if not m:
            raise ValueError(f"bad configuration id {config_id!r}; expected e.g. 16c16f1p")
        return cls(int(m[1]), int(m[2]), int(m[3]), **kw)


def canonical_configs(n_cores: Sequence[int] = CANONICAL_CORES) -> list[ClusterConfig]:
    """The 18-point design space: cores x sharing factor x pipeline stages."""
    return [ClusterConfig(c, c // share, s)
            for c in n_cores for share in CANONICAL_SHARING for s in CANONICAL_STAGES]


def fpu_map(core_id: int, n_cores: int, n_fpus: int) -> int:
    if not 0 <= core_id < n_cores:
        raise ValueError(f"core {core_id} outside 0..{n_cores - 1}")
    return core_id % n_fpus


def tcdm_bank(addr: int, n_banks: int) -> int:
    if addr % 4:
        raise ValueError(f"unaligned TCDM address {addr}")
    return (addr // 4) % n_banks


def arbitrate(requesters, last_grant: int, n_cores: int | None = None) -> int:
    """First requester strictly after ``last_grant`` in cyclic core-id order."""
    reqs = sorted(set(requesters))
    if not reqs:
        raise ValueError("arbitrate needs at least one requester")
    for r in reqs:
        if r > last_grant:
            return r
    return reqs[0]


@dataclass
class Counters:
    total: int = 0
    active: int = 0
    tcdm_contention: int = 0
    l2_stall: int = 0
    fpu_stall: int = 0
    fpu_contention: int = 0
    fpu_wb_stall: int = 0
    icache_miss: int = 0
    idle: int = 0

    @property
    def stalls(self) -> int:
        return (self.tcdm_contention + self.l2_stall + self.fpu_stall
                + self.fpu_contention + self.fpu_wb_stall + self.icache_miss)

    def conserved(self) -> bool:
        return self.active + self.stalls + self.idle == self.total


COUNTER_FIELDS = tuple(f.name for f in fields(Counters))


@dataclass
class SimResult:
    elapsed_cycles: int
    per_core: list[Counters]
    total_flops: int
    fpu_grants: dict[int, list[int]] | None = None
    trace: list[list[tuple[int, int]]] | None = None

    @property
    def flops_per_cycle(self) -> float:
        return self.total_flops / self.elapsed_cycles if self.elapsed_cycles else 0.0

    def summed(self) -> Counters:
        out = Counters()
        for c in self.per_core:
            for name in COUNTER_FIELDS:
                setattr(out, name, getattr(out, name) + getattr(c, name))
        return out


def counters_csv(result: SimResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("core",) + COUNTER_FIELDS)
    for i, c in enumerate(result.per_core):
        w.writerow((i,) + tuple(asdict(c)[n] for n in COUNTER_FIELDS))
    return buf.getvalue()


# decoded instruction kinds
_INT, _TCDM, _L2, _FP, _DS, _BAR, _END = range(7)


def _check_barriers(programs: Sequence[Program]) -> None:
    seqs = [p.barrier_ids() for p in programs]
    ref = seqs[0]
    for core, seq in enumerate(seqs[1:], start=1):
        for pos in range(max(len(ref), len(seq))):
            a = ref[pos] if pos < len(ref) else None
            b = seq[pos] if pos < len(seq) else None
            if a != b:
                bid = a if a is not None else b
                raise SimulationError(
                    f"inconsistent barrier sequence at barrier id {bid}: "
                    f"core 0 has {a}, core {core} has {b}")


def _decode(p: Program, cfg: ClusterConfig):
    out = []
    fpu = p.core_id % cfg.n_fpus
    for ins in p.instrs:
        k = ins.kind
        if k is Kind.INT:
            out.append((_INT, ins.dst, ins.srcs, 0, 0))
        elif k in (Kind.LOAD, Kind.STORE):
            if ins.region is Region.L2:
                out.append((_L2, ins.dst, ins.srcs, 0, 0))
            else:
                if ins.addr >= cfg.tcdm_bytes:
                    raise SimulationError(
                        f"TCDM address {ins.addr} exceeds {cfg.tcdm_bytes} bytes on core {p.core_id}")
                out.append((_TCDM, ins.dst, ins.srcs, tcdm_bank(ins.addr, cfg.n_tcdm_banks), 0))
        elif k is Kind.FP:
            out.append((_FP, ins.dst, ins.srcs, fpu, cfg.fp_latency))
        elif k is Kind.DIVSQRT:
            out.append((_DS, ins.dst, ins.srcs, 0, DIVSQRT_LATENCY[ins.fmt.name]))
        elif k is Kind.BARRIER:
            out.append((_BAR, None, (), ins.barrier_id, 0))
        else:
            out.append((_END, None, (), 0, 0))
    return out


class _Core:
    __slots__ = ("cid", "code", "pc", "busy_until", "ready", "base",
                 "wb", "ctr", "state", "trace")

    def __init__(self, cid, code, trace):
        self.cid = cid
        self.code = code
        self.pc = 0
        self.busy_until = 0   # first cycle the core may act again
        self.ready = {}       # reg -> first cycle its value can be consumed
        self.base = {}        # reg -> ready cycle before write-back delays
        self.wb = {}          # pending FP write-back slot -> reg (stages=2 only)
        self.ctr = Counters()
        self.state = 0        # 0 running, 1 at barrier, 2 finished
        self.trace = [] if trace else None


def _push_wb(core: _Core, slot: int) -> None:
    """Move the FP write-back occupying ``slot`` one cycle later, cascading."""
    wb = core.wb
    if slot not in wb:
        return
    moving = wb.pop(slot)
    s = slot + 1
    while True:
        nxt = wb.get(s)
        wb[s] = moving
        core.ready[moving] = s + 1
        if nxt is None:
            return
        moving, s = nxt, s + 1


def simulate(cfg: ClusterConfig, programs: Sequence[Program], *, check: bool = True,
             trace: bool = False, record_grants: bool = False) -> SimResult:
    """Run one program per core to End and return per-core counters."""
    if len(programs) != cfg.n_cores:
        raise SimulationError(f"{cfg.config_id} needs {cfg.n_cores} programs, got {len(programs)}")
    for i, p in enumerate(programs):
        if p.core_id != i:
            raise SimulationError(f"program {i} is labelled core {p.core_id}")
        if check:
            diag = validate(p)
            if diag is not None:
                raise SimulationError(f"core {i}: {diag.rule} at index {diag.index}: {diag.message}")
    _check_barriers(programs)

    n = cfg.n_cores
    cores = [_Core(i, _decode(p, cfg), trace) for i, p in enumerate(programs)]
    wb_rule = cfg.pipeline_stages == 2
    stages = cfg.pipeline_stages
    l2_lat = cfg.l2_latency_cycles
    bank_last: dict[int, int] = {}
    fpu_last: dict[int, int] = {}
    ds_last = n - 1
    ds_free = 0           # first cycle the DIV-SQRT unit is free
    ds_owner = -1
    grants = {f: [0] * n for f in range(cfg.n_fpus)} if record_grants else None

    live = n
    waiting_barrier = 0
    t = 0
    while live:
        t += 1
        bank_req: dict[int, list] = {}
        fpu_req: dict[int, list] = {}
        ds_req: list = []
        for c in cores:
            st = c.state
            if st:
                c.ctr.idle += 1
                continue
            if c.busy_until > t:
                c.ctr.l2_stall += 1
                continue
            kind, dst, srcs, res, lat = c.code[c.pc]
            # (1) wait for source operands
            if srcs:
                ready = c.ready
                worst = None
                wt = t
                for s in srcs:
                    r = ready.get(s, 0)
                    if r > wt:
                        wt, worst = r, s
                if worst is not None:
                    if t < c.base[worst]:
                        c.ctr.fpu_stall += 1
                    else:
                        c.ctr.fpu_wb_stall += 1
                    continue
            if kind == _INT:
                _issue_fast(c, t, dst, wb_rule)
            elif kind == _TCDM:
                bank_req.setdefault(res, []).append(c)
            elif kind == _FP:
                fpu_req.setdefault(res, []).append(c)
            elif kind == _DS:
                ds_req.append(c)
            elif kind == _L2:
                c.ctr.active += 1
                c.busy_until = t + l2_lat
                if dst is not None:
                    c.ready[dst] = t + l2_lat
                    c.base[dst] = t + l2_lat
                if wb_rule:
                    _push_wb(c, t)
                if c.trace is not None:
                    c.trace.append((c.pc, t))
                c.pc += 1
            elif kind == _BAR:
                c.state = 1
                c.ctr.idle += 1
                waiting_barrier += 1
            else:
                c.state = 2
                c.ctr.idle += 1
                live -= 1

        # (2) arbitration of shared resources
        for bank, reqs in bank_req.items():
            win = _rr(reqs, bank_last.get(bank, n - 1))
            bank_last[bank] = win.cid
            for c in reqs:
                if c is win:
                    _issue_fast(c, t, c.code[c.pc][1], wb_rule)
                else:
                    c.ctr.tcdm_contention += 1
        for fpu, reqs in fpu_req.items():
            win = _rr(reqs, fpu_last.get(fpu, n - 1))
            fpu_last[fpu] = win.cid
            if grants is not None:
                grants[fpu][win.cid] += 1
            for c in reqs:
                if c is win:
                    _issue_fp(c, t, stages, wb_rule)
                else:
                    c.ctr.fpu_contention += 1
        if ds_req:
            if ds_free > t:
                for c in ds_req:
                    if c.cid == ds_owner:
                        c.ctr.fpu_stall += 1
                    else:
                        c.ctr.fpu_contention += 1
            else:
                win = _rr(ds_req, ds_last)
                ds_last = win.cid
                for c in ds_req:
                    if c is win:
                        lat = c.code[c.pc][4]
                        ds_free = t + lat
                        ds_owner = c.cid
                        _issue_result(c, t, lat)
                    else:
                        c.ctr.fpu_contention += 1

        # (3) barrier release: everyone resumes next cycle
        if waiting_barrier and waiting_barrier == live:
            if live != n:
                # some core already ended while others wait: impossible after the sequence check
                raise SimulationError("barrier reached by a subset of cores")
            for c in cores:
                c.state = 0
                if c.trace is not None:
                    c.trace.append((c.pc, t))
                c.pc += 1
            waiting_barrier = 0

    per_core = []
    for c in cores:
        c.ctr.total = t
        if not c.ctr.conserved():
            raise SimulationError(f"counter conservation violated on core {c.cid}: {c.ctr}")
        per_core.append(c.ctr)
    res = SimResult(t, per_core, sum(p.flops for p in programs), grants)
    if trace:
        res.trace = [c.trace for c in cores]
    return res


def _rr(reqs: list, last: int):
    best = None
    for c in reqs:
        if c.cid > last and (best is None or c.cid < best.cid):
            best = c
    if best is None:
        best = min(reqs, key=lambda c: c.cid)
    return best


def _issue_fast(c: _Core, t: int, dst, wb_rule: bool) -> None:
    c.ctr.active += 1
    if dst is not None:
        c.ready[dst] = t + 1
        c.base[dst] = t + 1
    if wb_rule:
        _push_wb(c, t)
    if c.trace is not None:
        c.trace.append((c.pc, t))
    c.pc += 1


def _issue_result(c: _Core, t: int, lat: int) -> None:
    dst = c.code[c.pc][1]
    c.ctr.active += 1
    if dst is not None:
        c.ready[dst] = t + lat
        c.base[dst] = t + lat
    if c.trace is not None:
        c.trace.append((c.pc, t))
    c.pc += 1


def _issue_fp(c: _Core, t: int, stages: int, wb_rule: bool) -> None:
    dst = c.code[c.pc][1]
    c.ctr.active += 1
    if dst is not None:
        c.base[dst] = t + stages + 1
        if wb_rule:
            slot = t + stages
            while slot in c.wb:
                slot += 1
            c.wb[slot] = dst
            c.ready[dst] = slot + 1
        else:
            c.ready[dst] = t + stages + 1
    if c.trace is not None:
        c.trace.append((c.pc, t))
    c.pc += 1
