"""Shared plumbing for the benchmark generators.

A kernel is described by a :class:`KernelSpec`.  Its generator lays data
out in TCDM, emits one straight-line instruction stream per core with
contiguous static chunking, and counts useful flops analytically.  The
functional reference replays the same operation order with the bit-exact
arithmetic of :mod:`tpcluster.tpfloat`, next to a float64 mirror.
"""

from __future__ import annotations

import enum
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .. import isa
from ..isa import Instr, Kind, Program, Region
from ..tpfloat import _core
from ..tpfloat.formats import BF16, F16, F32, FpFormat

DEFAULT_SEED = 0x5EED


class Benchmark(enum.Enum):
    CONV = "conv"
    DWT = "dwt"
    FFT = "fft"
    FIR = "fir"
    IIR = "iir"
    KMEANS = "kmeans"
    MATMUL = "matmul"
    SVM = "svm"

    @classmethod
    def parse(cls, name) -> "Benchmark":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown benchmark {name!r}") from None


class Variant(enum.Enum):
    SCALAR_F32 = "scalar"
    VECTOR_F16 = "f16"
    VECTOR_BF16 = "bf16"

    @property
    def fmt(self) -> FpFormat:
        return {"scalar": F32, "f16": F16, "bf16": BF16}[self.value]

    @property
    def is_vector(self) -> bool:
        return self is not Variant.SCALAR_F32

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, cls):
            return name
        aliases = {"scalar": "scalar", "scalar_f32": "scalar", "f32": "scalar",
                   "f16": "f16", "vector_f16": "f16", "vector": "f16",
                   "bf16": "bf16", "vector_bf16": "bf16"}
        try:
            return cls(aliases[str(name).lower()])
        except KeyError:
            raise ValueError(f"unknown variant {name!r}") from None


@dataclass(frozen=True)
class KernelSpec:
    kind: Benchmark
    variant: Variant = Variant.SCALAR_F32
    n_cores: int = 1
    size: Mapping[str, Any] | str = "desk"
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        object.__setattr__(self, "kind", Benchmark.parse(self.kind))
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.n_cores < 1:
            raise ValueError("n_cores must be positive")

    @property
    def fmt(self) -> FpFormat:
        return self.variant.fmt


@dataclass
class KernelBuild:
    spec: KernelSpec
    params: dict
    programs: list[Program]
    flops: int
    inputs: dict[str, np.ndarray]
    layout: "Layout"
    expected: np.ndarray | None = None   # float64 oracle outputs
    extra: dict = field(default_factory=dict)


@dataclass
class ReferenceResult:
    outputs: np.ndarray        # decoded values in the variant's format
    bits: np.ndarray
    oracle: np.ndarray         # float64 mirror of the same algorithm
    max_abs_error: float
    max_rel_error: float       # normwise: max |err| / max |oracle|


def chunk(n_items: int, n_cores: int, core: int) -> tuple[range, int]:
    """Contiguous static chunk for ``core`` plus the number of padding items.

    The iteration count is padded up to a multiple of ``n_cores``; padding
    lands on the last core(s) and does no useful work.
    """
    per = -(-n_items // n_cores)
    lo = min(core * per, n_items)
    hi = min(lo + per, n_items)
    return range(lo, hi), per - (hi - lo)


class Layout:
    """Word-granular TCDM allocator shared by all cores of a build.

    Region starts are staggered across banks (``STAGGER`` words per region
    modulo ``SPAN``) so equally sized arrays walked in step do not alias.
    """

    STAGGER = 5
    SPAN = 32

    def __init__(self):
        self.regions: dict[str, tuple[int, int]] = {}
        self.top = 0
        self.alloc("scratch", 4)

    def alloc(self, name: str, n_words: int) -> int:
        if name in self.regions:
            raise ValueError(f"region {name} allocated twice")
        want = (self.STAGGER * len(self.regions)) % self.SPAN
        self.top += 4 * ((want - self.top // 4) % self.SPAN)
        base = self.top
        self.regions[name] = (base, n_words)
        self.top += 4 * max(1, n_words)
        return base

    def addr(self, name: str, word: int) -> int:
        base, n = self.regions[name]
        if not 0 <= word < n:
            raise IndexError(f"word {word} outside region {name} of {n} words")
        return base + 4 * word

    @property
    def bytes_used(self) -> int:
        return self.top


_NOP = Instr(Kind.INT)


class Emitter:
    """Builds one core's straight-line stream with fresh virtual registers."""

    def __init__(self, core_id: int, layout: Layout):
        self.core_id = core_id
        self.layout = layout
        self.instrs: list[Instr] = []
        self.flops = 0
        self._next = 0
        self._pad = False

    def _reg(self) -> int:
        r = self._next
        self._next += 1
        return r

    def ints(self, n: int = 1) -> None:
        """Loop and address bookkeeping that produces no consumed value."""
        self.instrs.extend([_NOP] * n)

    def iop(self, *srcs: int) -> int:
        """Integer-side op producing a value (e.g. a SIMD lane shuffle)."""
        r = self._reg()
        self.instrs.append(Instr(Kind.INT, r, srcs))
        return r

    def ld(self, region: str, word: int, *srcs: int, l2: bool = False) -> int:
        r = self._reg()
        reg = Region.L2 if l2 else Region.TCDM
        self.instrs.append(Instr(Kind.LOAD, r, srcs, region=reg, addr=self.layout.addr(region, word)))
        return r

    def st(self, region: str, word: int, src: int) -> None:
        addr = self.layout.addr("scratch", 0) if self._pad else self.layout.addr(region, word)
        self.instrs.append(Instr(Kind.STORE, None, (src,), region=Region.TCDM, addr=addr))

    def fp(self, op: str, fmt: FpFormat, *srcs: int, vec: bool = False) -> int:
        r = self._reg()
        self.instrs.append(Instr(Kind.FP, r, srcs, op=op, fmt=fmt, vectorial=vec))
        return r

    def ds(self, op: str, fmt: FpFormat, *srcs: int) -> int:
        r = self._reg()
        self.instrs.append(Instr(Kind.DIVSQRT, r, srcs, op=op, fmt=fmt))
        return r

    def bar(self, bid: int) -> None:
        self.instrs.append(isa.barrier(bid))

    def useful(self, n: int) -> None:
        if not self._pad:
            self.flops += n

    @contextmanager
    def padding(self, on: bool = True):
        prev, self._pad = self._pad, on
        try:
            yield
        finally:
            self._pad = prev

    def program(self) -> Program:
        return Program(self.core_id, tuple(self.instrs) + (isa.end(),), self.flops)


class Barriers:
    """Issues matching barrier ids on every core."""

    def __init__(self, ems: list[Emitter]):
        self.ems = ems
        self.next_id = 0

    def __call__(self) -> None:
        for e in self.ems:
            e.bar(self.next_id)
        self.next_id += 1


def items(n_items: int, e: Emitter, n_cores: int, skew: int = 0):
    """Yield (item, is_padding) for a core's chunk; padding reuses the last item.

    ``skew`` rotates the start of the chunk by ``skew * core_id`` items so that
    cores walking identical bank sequences do not move in lockstep.
    """
    rng, pad = chunk(n_items, n_cores, e.core_id)
    order = list(rng)
    if order and skew:
        s = (skew * e.core_id) % len(order)
        order = order[s:] + order[:s]
    for it in order:
        yield it, False
    for _ in range(pad):
        yield (rng.stop - 1 if len(rng) else n_items - 1), True


class Arith:
    """Vectorized bit-exact arithmetic in one format (arrays of encodings)."""

    def __init__(self, fmt: FpFormat):
        self.fmt = fmt

    def q(self, x) -> np.ndarray:
        return _core.from_float(self.fmt, np.asarray(x, dtype=np.float64)).astype(np.int64)

    def val(self, bits) -> np.ndarray:
        return _core.to_float(self.fmt, bits)

    def add(self, a, b):
        return _core.add(self.fmt, a, b).astype(np.int64)

    def sub(self, a, b):
        return _core.sub(self.fmt, a, b).astype(np.int64)

    def mul(self, a, b):
        return _core.mul(self.fmt, a, b).astype(np.int64)

    def fma(self, a, b, c):
        return _core.fma(self.fmt, a, b, c).astype(np.int64)

    def div(self, a, b):
        return _core.div(self.fmt, a, b).astype(np.int64)

    def widen_fma(self, a, b, c32):
        """16-bit product accumulated into F32 (one vfdotp lane step)."""
        return _core.fma_widen(self.fmt, a, b, c32).astype(np.int64)

    def to_f32(self, a):
        return _core.convert(self.fmt, F32, a).astype(np.int64)

    def from_f32(self, a32):
        return _core.convert(F32, self.fmt, a32).astype(np.int64)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=np.int64)


def quantize(fmt: FpFormat, x) -> np.ndarray:
    """Round float64 data to ``fmt`` and return it back as float64."""
    return _core.to_float(fmt, _core.from_float(fmt, np.asarray(x, dtype=np.float64)))


def compare(outputs_bits: np.ndarray, fmt: FpFormat, oracle: np.ndarray) -> ReferenceResult:
    out = _core.to_float(fmt, outputs_bits)
    err = np.abs(out - oracle)
    max_abs = float(err.max()) if err.size else 0.0
    scale = float(np.abs(oracle).max()) if oracle.size else 0.0
    rel = max_abs / scale if scale > 0 else max_abs
    return ReferenceResult(out, outputs_bits, oracle, max_abs, rel)
