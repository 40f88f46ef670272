"""Abstract per-core instruction streams consumed by the timing model.

Streams are straight-line (fully unrolled) and use unlimited virtual
registers.  Addresses are byte addresses with 4-byte words.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .tpfloat.formats import FpFormat, get_format


class Kind(enum.Enum):
    INT = "int"
    LOAD = "load"
    STORE = "store"
    FP = "fp"
    DIVSQRT = "divsqrt"
    BARRIER = "barrier"
    END = "end"


class Region(enum.Enum):
    TCDM = "tcdm"
    L2 = "l2"


FP_OPS = frozenset({
    "add", "sub", "mul", "fma", "cmp", "convert", "cast_pack",
    "vadd", "vsub", "vmul", "vfma", "vfdotp", "shuffle",
})
VECTOR_ONLY_OPS = frozenset({"cast_pack", "vadd", "vsub", "vmul", "vfma", "vfdotp", "shuffle"})
DIVSQRT_OPS = frozenset({"div", "sqrt"})
WORD = 4


@dataclass(frozen=True)
class Instr:
    kind: Kind
    dst: int | None = None
    srcs: tuple[int, ...] = ()
    region: Region | None = None
    addr: int | None = None
    op: str | None = None
    fmt: FpFormat | None = None
    vectorial: bool = False
    barrier_id: int | None = None

    @property
    def is_fp(self) -> bool:
        return self.kind in (Kind.FP, Kind.DIVSQRT)

    @property
    def is_mem(self) -> bool:
        return self.kind in (Kind.LOAD, Kind.STORE)


def int_op(dst: int | None, *srcs: int) -> Instr:
    return Instr(Kind.INT, dst, tuple(srcs))


def load(dst: int, addr: int, region: Region = Region.TCDM, srcs: Sequence[int] = ()) -> Instr:
    return Instr(Kind.LOAD, dst, tuple(srcs), region=region, addr=addr)


def store(addr: int, src: int, region: Region = Region.TCDM) -> Instr:
    return Instr(Kind.STORE, None, (src,), region=region, addr=addr)


def fp_op(op: str, fmt, dst: int, *srcs: int, vectorial: bool = False) -> Instr:
    return Instr(Kind.FP, dst, tuple(srcs), op=op, fmt=get_format(fmt), vectorial=vectorial)


def divsqrt(op: str, fmt, dst: int, *srcs: int) -> Instr:
    return Instr(Kind.DIVSQRT, dst, tuple(srcs), op=op, fmt=get_format(fmt))


def barrier(barrier_id: int) -> Instr:
    return Instr(Kind.BARRIER, barrier_id=barrier_id)


def end() -> Instr:
    return Instr(Kind.END)


@dataclass(frozen=True)
class Program:
    core_id: int
    instrs: tuple[Instr, ...]
    flops: int = 0

    def __post_init__(self):
        object.__setattr__(self, "instrs", tuple(self.instrs))
        if self.flops < 0:
            raise ValueError("flops must be non-negative")

    def __len__(self) -> int:
        return len(self.instrs)

    def barrier_ids(self) -> list[int]:
        return [i.barrier_id for i in self.instrs if i.kind is Kind.BARRIER]


@dataclass(frozen=True)
class Diagnostic:
    index: int
    rule: str
    message: str = ""


def _check(ins: Instr, idx: int, defined: set[int]) -> Diagnostic | None:
    for s in ins.srcs:
        if s not in defined:
            return Diagnostic(idx, "def-before-use", f"register r{s} used before definition")
    k = ins.kind
    if k is Kind.FP:
        if ins.op not in FP_OPS:
            return Diagnostic(idx, "operand", f"unknown FP op {ins.op!r}")
        if ins.fmt is None:
            return Diagnostic(idx, "format", "FP op without a format")
        if ins.vectorial and not ins.fmt.is_16bit:
            return Diagnostic(idx, "format", f"vectorial op in {ins.fmt.name}")
        if ins.op in VECTOR_ONLY_OPS and not ins.vectorial:
            return Diagnostic(idx, "format", f"{ins.op} is a packed-SIMD op")
    elif k is Kind.DIVSQRT:
        if ins.op not in DIVSQRT_OPS:
            return Diagnostic(idx, "operand", f"unknown div/sqrt op {ins.op!r}")
        if ins.fmt is None or ins.vectorial:
            return Diagnostic(idx, "format", "div/sqrt needs a scalar format")
    elif k in (Kind.LOAD, Kind.STORE):
        if ins.addr is None or ins.region is None:
            return Diagnostic(idx, "operand", "memory access without region/address")
        if ins.addr < 0 or ins.addr % WORD:
            return Diagnostic(idx, "operand", f"unaligned address {ins.addr}")
        if k is Kind.LOAD and ins.dst is None:
            return Diagnostic(idx, "operand", "load without destination")
        if k is Kind.STORE and len(ins.srcs) != 1:
            return Diagnostic(idx, "operand", "store needs exactly one source")
    elif k is Kind.BARRIER and ins.barrier_id is None:
        return Diagnostic(idx, "operand", "barrier without id")
    return None


def validate(p: Program) -> Diagnostic | None:
    """Return the first rule violation, or None when the program is well formed."""
    instrs = p.instrs
    if not instrs:
        return Diagnostic(0, "end-placement", "program is empty; End is required")
    defined: set[int] = set()
    last = len(instrs) - 1
    for idx, ins in enumerate(instrs):
        if not isinstance(ins, Instr):
            return Diagnostic(idx, "operand", f"not an instruction: {ins!r}")
        if ins.kind is Kind.END and idx != last:
            return Diagnostic(idx, "end-placement", "End before the last instruction")
        diag = _check(ins, idx, defined)
        if diag is not None:
            return diag
        if ins.dst is not None:
            defined.add(ins.dst)
    if instrs[last].kind is not Kind.END:
        return Diagnostic(last, "end-placement", "last instruction is not End")
    return None


@dataclass(frozen=True)
class StreamStats:
    n_instrs: int
    n_fp: int
    n_mem: int

    @property
    def n_int(self) -> int:
        return self.n_instrs - self.n_fp - self.n_mem

    def _ratio(self, n: int) -> float:
        return n / self.n_instrs if self.n_instrs else 0.0

    @property
    def fp_intensity(self) -> float:
        return self._ratio(self.n_fp)

    @property
    def mem_intensity(self) -> float:
        return self._ratio(self.n_mem)

    @property
    def int_fraction(self) -> float:
        return self._ratio(self.n_int)

    def __add__(self, other: "StreamStats") -> "StreamStats":
        return StreamStats(self.n_instrs + other.n_instrs, self.n_fp + other.n_fp,
                           self.n_mem + other.n_mem)


def stream_stats(p: Program | Iterable[Instr]) -> StreamStats:
    """FP and memory intensity; Barrier and End are left out of the denominator."""
    instrs = p.instrs if isinstance(p, Program) else p
    n = n_fp = n_mem = 0
    for ins in instrs:
        if ins.kind in (Kind.BARRIER, Kind.END):
            continue
        n += 1
        if ins.is_fp:
            n_fp += 1
        elif ins.is_mem:
            n_mem += 1
    return StreamStats(n, n_fp, n_mem)


def aggregate_stats(programs: Iterable[Program]) -> StreamStats:
    total = StreamStats(0, 0, 0)
    for p in programs:
        total = total + stream_stats(p)
    return total


# Text dump: one instruction per line.
#   int r3 r1,r2 | load r4 - tcdm 256 | store - r4 tcdm 256
#   fp r7 r5,r6 fma f32 scalar | divsqrt r3 r2 sqrt f16 | barrier 2 | end

def _regs(srcs) -> str:
    return ",".join(f"r{s}" for s in srcs) if srcs else "-"


def _dst(d) -> str:
    return "-" if d is None else f"r{d}"


def format_instr(ins: Instr) -> str:
    k = ins.kind
    if k is Kind.BARRIER:
        return f"barrier {ins.barrier_id}"
    if k is Kind.END:
        return "end"
    head = f"{k.value} {_dst(ins.dst)} {_regs(ins.srcs)}"
    if k in (Kind.LOAD, Kind.STORE):
        return f"{head} {ins.region.value} {ins.addr}"
    if k is Kind.FP:
        return f"{head} {ins.op} {ins.fmt.name} {'vector' if ins.vectorial else 'scalar'}"
    if k is Kind.DIVSQRT:
        return f"{head} {ins.op} {ins.fmt.name}"
    return head


def _parse_reg(tok: str) -> int | None:
    return None if tok == "-" else int(tok[1:])


def parse_instr(line: str) -> Instr:
    f = line.split()
    k = Kind(f[0])
    if k is Kind.BARRIER:
        return barrier(int(f[1]))
    if k is Kind.END:
        return end()
    dst = _parse_reg(f[1])
    srcs = () if f[2] == "-" else tuple(int(t[1:]) for t in f[2].split(","))
    if k in (Kind.LOAD, Kind.STORE):
        return Instr(k, dst, srcs, region=Region(f[3]), addr=int(f[4]))
    if k is Kind.FP:
        return Instr(k, dst, srcs, op=f[3], fmt=get_format(f[4]), vectorial=f[5] == "vector")
    if k is Kind.DIVSQRT:
        return Instr(k, dst, srcs, op=f[3], fmt=get_format(f[4]))
    return Instr(k, dst, srcs)


def dump_program(p: Program) -> str:
    lines = [f"# core {p.core_id} flops {p.flops}"]
    lines += [format_instr(i) for i in p.instrs]
    return "\n".join(lines) + "\n"


def load_program(text: str) -> Program:
    core_id, flops, instrs = 0, 0, []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 4 and parts[0] == "core" and parts[2] == "flops":
                core_id, flops = int(parts[1]), int(parts[3])
            continue
        instrs.append(parse_instr(line))
    return Program(core_id, tuple(instrs), flops)
