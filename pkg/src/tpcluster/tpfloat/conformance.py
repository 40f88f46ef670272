"""Conformance runs of the integer datapath against the float64 oracle.

Round trips between each 16-bit format and binary32 are checked for every
16-bit encoding, and narrowing separately on random binary32 patterns.
Arithmetic is checked on sampled operands that stress rounding boundaries,
subnormals and special values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _core, oracle, sampling
from .formats import BF16, F16, F32, FpFormat, get_format

ARITH_OPS = ("add", "sub", "mul", "fma", "div", "sqrt")
ALL_OPS = ("convert", "narrow") + ARITH_OPS + ("fma_widen",)
BATCH = 1 << 18


@dataclass(frozen=True)
class Mismatch:
    op: str
    fmt: str
    operands: tuple[str, ...]
    got: str
    want: str

    def __str__(self) -> str:
        return f"{self.op}.{self.fmt}({', '.join(self.operands)}) = {self.got}, expected {self.want}"


@dataclass
class CheckResult:
    op: str
    fmt: str
    checked: int = 0
    mismatches: int = 0
    first: Mismatch | None = None


@dataclass
class ConformanceReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.mismatches == 0 for r in self.results)

    @property
    def checked(self) -> int:
        return sum(r.checked for r in self.results)

    @property
    def first_failure(self) -> Mismatch | None:
        return next((r.first for r in self.results if r.first is not None), None)


def _hex(fmt: FpFormat, v) -> str:
    return f"0x{int(v) & fmt.mask:0{fmt.width // 4}x}"


def _tally(res: CheckResult, got, want, ins: Sequence[tuple[FpFormat, np.ndarray]], out_fmt) -> None:
    got, want = np.asarray(got, dtype=np.int64), np.asarray(want, dtype=np.int64)
    bad = np.flatnonzero(got != want)
    res.checked += got.size
    res.mismatches += bad.size
    if bad.size and res.first is None:
        i = bad[0]
        res.first = Mismatch(res.op, res.fmt, tuple(_hex(f, a[i]) for f, a in ins),
                             _hex(out_fmt, got[i]), _hex(out_fmt, want[i]))


Impl = Callable[..., np.ndarray]


def _impls(fault: str | None) -> dict[str, Impl]:
    impl = {"add": _core.add, "sub": _core.sub, "mul": _core.mul, "fma": _core.fma,
            "div": _core.div, "sqrt": _core.sqrt, "convert": _core.convert,
            "fma_widen": _core.fma_widen}
    if fault is not None:
        if fault not in impl:
            raise ValueError(f"cannot inject a fault into {fault!r}")
        good = impl[fault]

        def broken(*args):
            # wrong rounding on odd-significand results: step one ulp up
            out = np.asarray(good(*args), dtype=np.int64)
            return np.where(out & 1, out + 1, out)
        impl[fault] = broken
    return impl


def check_conversions(formats: Sequence = (F16, BF16), samples: int | None = None,
                      seed: int = 0, fault: str | None = None) -> list[CheckResult]:
    """16-bit -> binary32 -> 16-bit round trips, both legs against the oracle.

    ``samples=None`` walks all 2**16 encodings; one case per encoding.
    """
    impl = _impls(fault)["convert"]
    rng = np.random.default_rng(seed)
    out = []
    for fmt in map(get_format, formats):
        res = CheckResult("convert", f"{fmt.name}<->{F32.name}")
        if samples is None:
            bits = np.arange(1 << 16, dtype=np.int64)
        else:
            bits = rng.integers(0, 1 << 16, samples, dtype=np.int64)
        wide = impl(fmt, F32, bits)
        back = impl(F32, fmt, wide)
        w_ok = wide == oracle.convert(fmt, F32, bits)
        b_ok = back == oracle.convert(F32, fmt, wide)
        # non-NaN encodings must survive the trip unchanged
        nan = np.asarray(_core.is_nan(fmt, bits), dtype=bool)
        same = nan | (back == bits)
        good = np.where(w_ok & b_ok & same, 0, 1)
        want = np.zeros_like(good)
        _tally(res, good, want, [(fmt, bits)], fmt)
        if res.first is not None:
            i = int(np.flatnonzero(good)[0])
            leg = (impl(fmt, F32, bits[i:i + 1]), oracle.convert(fmt, F32, bits[i:i + 1]), F32) \
                if not w_ok[i] else (back[i:i + 1], oracle.convert(F32, fmt, wide[i:i + 1]), fmt)
            res.first = Mismatch("convert", res.fmt, (_hex(fmt, bits[i]),),
                                 _hex(leg[2], leg[0][0]), _hex(leg[2], leg[1][0]))
        out.append(res)
    return out


def check_narrowing(fmt, n: int, seed: int = 0, fault: str | None = None) -> CheckResult:
    """Random binary32 encodings narrowed to a 16-bit format."""
    fmt = get_format(fmt)
    impl = _impls(fault)["convert"]
    rng = np.random.default_rng([seed, 7, fmt.sig_bits_stored])
    res = CheckResult("narrow", f"{F32.name}->{fmt.name}")
    done = 0
    while done < n:
        m = min(BATCH, n - done)
        r32 = sampling.operands(F32, m, rng)
        _tally(res, impl(F32, fmt, r32), oracle.convert(F32, fmt, r32), [(F32, r32)], fmt)
        done += m
    return res


def check_op(op: str, fmt, n: int, seed: int = 0, fault: str | None = None) -> CheckResult:
    """``n`` sampled cases of one arithmetic op (or fma_widen) in one format."""
    fmt = get_format(fmt)
    impl = _impls(fault)[op]
    rng = np.random.default_rng([seed, ARITH_OPS.index(op) if op in ARITH_OPS else 99, fmt.width,
                                 fmt.sig_bits_stored])
    res = CheckResult(op, fmt.name)
    done = 0
    while done < n:
        m = min(BATCH, n - done)
        a = sampling.operands(fmt, m, rng)
        b = sampling.operands(fmt, m, rng)
        if op == "sqrt":
            _tally(res, impl(fmt, a), oracle.sqrt(fmt, a), [(fmt, a)], fmt)
        elif op == "fma":
            c = sampling.operands(fmt, m, rng)
            half = m // 4
            c[:half] = sampling.cancelling_addend(fmt, oracle.mul(fmt, a[:half], b[:half]), rng)
            _tally(res, impl(fmt, a, b, c), oracle.fma(fmt, a, b, c), [(fmt, a), (fmt, b), (fmt, c)], fmt)
        elif op == "fma_widen":
            c = sampling.operands(F32, m, rng)
            got = impl(fmt, a, b, c)
            # must equal: widen both factors exactly, then one binary32 FMA
            want = _core.fma(F32, _core.convert(fmt, F32, a), _core.convert(fmt, F32, b), c)
            _tally(res, got, want, [(fmt, a), (fmt, b), (F32, c)], F32)
            _tally(res, got, oracle.fma_widen(fmt, a, b, c), [(fmt, a), (fmt, b), (F32, c)], F32)
            res.checked -= m       # same cases, two references
        else:
            _tally(res, impl(fmt, a, b), getattr(oracle, op)(fmt, a, b), [(fmt, a), (fmt, b)], fmt)
        done += m
    return res


def run(ops: Sequence[str] = ALL_OPS, formats: Sequence = (F32, F16, BF16), n: int = 100_000,
        seed: int = 0, exhaustive: bool = True, fault: str | None = None) -> ConformanceReport:
    """Run the selected checks with ``n`` sampled cases per op and format.

    Round-trip conversions cover all 2**16 encodings when ``exhaustive``,
    otherwise ``n`` random ones.
    """
    bad = set(ops) - set(ALL_OPS)
    if bad:
        raise ValueError(f"unknown ops {sorted(bad)}; choose from {', '.join(ALL_OPS)}")
    fmts = [get_format(f) for f in formats]
    narrow = [f for f in fmts if f.is_16bit]
    rep = ConformanceReport()
    for op in ops:
        if op == "convert":
            rep.results += check_conversions(narrow, None if exhaustive else n, seed, fault)
        elif op == "narrow":
            rep.results += [check_narrowing(f, n, seed, fault) for f in narrow]
        else:
            for f in fmts:
                if op == "fma_widen" and not f.is_16bit:
                    continue
                rep.results.append(check_op(op, f, n, seed, fault))
    return rep
