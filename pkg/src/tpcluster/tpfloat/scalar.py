"""Scalar and packed-SIMD value types with the FPU operation set.

These wrap the vectorized datapath in :mod:`._core` for single values.
Every operation is a pure function of its bit inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _core
from .formats import F32, FpFormat, get_format


class FpUsageError(ValueError):
    """Raised when operands do not satisfy an operation's format contract."""


class RoundMode(enum.Enum):
    RNE = "rne"


def _check_rm(rm) -> None:
    if rm is not RoundMode.RNE and str(rm).lower() not in ("rne", "roundmode.rne"):
        raise FpUsageError(f"unsupported rounding mode {rm!r}; only RNE is implemented")


@dataclass(frozen=True)
class Scalar:
    fmt: FpFormat
    bits: int

    def __post_init__(self):
        object.__setattr__(self, "fmt", get_format(self.fmt))
        if not 0 <= int(self.bits) <= self.fmt.mask:
            raise FpUsageError(f"bits 0x{int(self.bits):x} do not fit {self.fmt.name}")
        object.__setattr__(self, "bits", int(self.bits))

    @classmethod
    def from_float(cls, fmt, x: float) -> "Scalar":
        fmt = get_format(fmt)
        return cls(fmt, int(_core.from_float(fmt, np.array([x], dtype=np.float64))[0]))

    def to_float(self) -> float:
        return float(_core.to_float(self.fmt, np.array([self.bits]))[0])

    @property
    def is_nan(self) -> bool:
        return bool(_core.is_nan(self.fmt, np.array([self.bits]))[0])

    def __repr__(self) -> str:
        digits = self.fmt.width // 4
        return f"Scalar({self.fmt.name}, 0x{self.bits:0{digits}x}={self.to_float()!r})"


@dataclass(frozen=True)
class Packed16:
    """Two 16-bit lanes in one 32-bit register image; lane0 is bits [15:0]."""

    fmt: FpFormat
    lane0: int
    lane1: int

    def __post_init__(self):
        object.__setattr__(self, "fmt", get_format(self.fmt))
        if not self.fmt.is_16bit:
            raise FpUsageError("packed vectors hold 16-bit formats only")
        for lane in (self.lane0, self.lane1):
            if not 0 <= int(lane) <= 0xFFFF:
                raise FpUsageError(f"lane 0x{int(lane):x} is not a 16-bit pattern")
        object.__setattr__(self, "lane0", int(self.lane0))
        object.__setattr__(self, "lane1", int(self.lane1))

    @property
    def word(self) -> int:
        return (self.lane1 << 16) | self.lane0

    @classmethod
    def from_word(cls, fmt, word: int) -> "Packed16":
        return cls(fmt, word & 0xFFFF, (word >> 16) & 0xFFFF)

    @classmethod
    def from_floats(cls, fmt, x0: float, x1: float) -> "Packed16":
        fmt = get_format(fmt)
        return cls(fmt, Scalar.from_float(fmt, x0).bits, Scalar.from_float(fmt, x1).bits)

    def lanes(self) -> tuple[Scalar, Scalar]:
        return Scalar(self.fmt, self.lane0), Scalar(self.fmt, self.lane1)

    def to_floats(self) -> tuple[float, float]:
        l0, l1 = self.lanes()
        return l0.to_float(), l1.to_float()


def _same_fmt(fmt, *vals) -> FpFormat:
    fmt = get_format(fmt)
    for v in vals:
        if v.fmt != fmt:
            raise FpUsageError(f"operand in {v.fmt.name} where {fmt.name} was expected")
    return fmt


def _one(fn, fmt, *args) -> int:
    return int(fn(fmt, *(np.array([a]) for a in args))[0])


_ARITH = {"add": _core.add, "sub": _core.sub, "mul": _core.mul}


def fp_arith(op: str, fmt, a: Scalar, b: Scalar, rm=RoundMode.RNE) -> Scalar:
    _check_rm(rm)
    fmt = _same_fmt(fmt, a, b)
    if op not in _ARITH:
        raise FpUsageError(f"unknown arithmetic op {op!r}")
    return Scalar(fmt, _one(_ARITH[op], fmt, a.bits, b.bits))


def fp_fma(fmt, a: Scalar, b: Scalar, c: Scalar, rm=RoundMode.RNE) -> Scalar:
    """a*b + c rounded once."""
    _check_rm(rm)
    fmt = _same_fmt(fmt, a, b, c)
    return Scalar(fmt, _one(_core.fma, fmt, a.bits, b.bits, c.bits))


def fp_fma_widen(src_fmt, a16: Scalar, b16: Scalar, c32: Scalar, rm=RoundMode.RNE) -> Scalar:
    """Product of two 16-bit operands accumulated into an F32 addend."""
    _check_rm(rm)
    src_fmt = get_format(src_fmt)
    if not src_fmt.is_16bit:
        raise FpUsageError("fma_widen needs a 16-bit source format")
    _same_fmt(src_fmt, a16, b16)
    _same_fmt(F32, c32)
    return Scalar(F32, _one(_core.fma_widen, src_fmt, a16.bits, b16.bits, c32.bits))


def fp_divsqrt(op: str, fmt, a: Scalar, b: Scalar | None = None, rm=RoundMode.RNE) -> Scalar:
    _check_rm(rm)
    if op == "div":
        if b is None:
            raise FpUsageError("div needs two operands")
        fmt = _same_fmt(fmt, a, b)
        return Scalar(fmt, _one(_core.div, fmt, a.bits, b.bits))
    if op == "sqrt":
        if b is not None:
            raise FpUsageError("sqrt takes one operand")
        fmt = _same_fmt(fmt, a)
        return Scalar(fmt, _one(_core.sqrt, fmt, a.bits))
    raise FpUsageError(f"unknown div/sqrt op {op!r}")


def convert(src: Scalar, dst_fmt, rm=RoundMode.RNE) -> Scalar:
    _check_rm(rm)
    dst_fmt = get_format(dst_fmt)
    return Scalar(dst_fmt, _one(lambda f, x: _core.convert(f, dst_fmt, x), src.fmt, src.bits))


def cast_and_pack(a: Scalar, b: Scalar, dst_fmt, rm=RoundMode.RNE) -> Packed16:
    """Convert two F32 scalars and place them in lane0 (a) and lane1 (b)."""
    dst_fmt = get_format(dst_fmt)
    if not dst_fmt.is_16bit:
        raise FpUsageError("cast_and_pack targets a 16-bit format")
    _same_fmt(F32, a, b)
    return Packed16(dst_fmt, convert(a, dst_fmt, rm).bits, convert(b, dst_fmt, rm).bits)


_SIMD = {"vadd": "add", "vsub": "sub", "vmul": "mul"}


def simd_op(op: str, va: Packed16, vb: Packed16, vc: Packed16 | None = None,
            rm=RoundMode.RNE) -> Packed16:
    fmt = _same_fmt(va.fmt, vb)
    if op == "vfma":
        if vc is None:
            raise FpUsageError("vfma needs an addend vector")
        _same_fmt(fmt, vc)
        lanes = [fp_fma(fmt, x, y, z, rm) for x, y, z in zip(va.lanes(), vb.lanes(), vc.lanes())]
    elif op in _SIMD:
        lanes = [fp_arith(_SIMD[op], fmt, x, y, rm) for x, y in zip(va.lanes(), vb.lanes())]
    else:
        raise FpUsageError(f"unknown SIMD op {op!r}")
    return Packed16(fmt, lanes[0].bits, lanes[1].bits)


def vfdotp(va: Packed16, vb: Packed16, c: Scalar, rm=RoundMode.RNE) -> Scalar:
    """c + a0*b0 rounded to F32, then + a1*b1 rounded again; products are exact."""
    fmt = _same_fmt(va.fmt, vb)
    a0, a1 = va.lanes()
    b0, b1 = vb.lanes()
    acc = fp_fma_widen(fmt, a0, b0, c, rm)
    return fp_fma_widen(fmt, a1, b1, acc, rm)


def shuffle(va: Packed16, vb: Packed16, sel: tuple[int, int]) -> Packed16:
    """Selectors 0..3 address a.lane0, a.lane1, b.lane0, b.lane1."""
    fmt = _same_fmt(va.fmt, vb)
    pool = (va.lane0, va.lane1, vb.lane0, vb.lane1)
    if len(sel) != 2:
        raise FpUsageError("shuffle needs exactly two selectors")
    for s in sel:
        if not isinstance(s, (int, np.integer)) or not 0 <= s < 4:
            raise FpUsageError(f"lane selector {s!r} out of range 0..3")
    return Packed16(fmt, pool[sel[0]], pool[sel[1]])


def fp_cmp(rel: str, fmt, a: Scalar, b: Scalar) -> bool:
    """Quiet comparison; any NaN operand makes every relation false."""
    fmt = _same_fmt(fmt, a, b)
    if rel not in ("eq", "lt", "le"):
        raise FpUsageError(f"unknown relation {rel!r}")
    return bool(_core.compare(rel, fmt, np.array([a.bits]), np.array([b.bits]))[0])
