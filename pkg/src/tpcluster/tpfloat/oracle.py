"""Reference arithmetic built on host binary64 hardware.

This path shares no code with the integer datapath in ``_core``.  Values
are decoded to float64 exactly, the operation is carried out in float64
(with an error-free TwoSum and round-to-odd where float64 itself is not
exact), and the result is narrowed once.  Narrowing goes float64 ->
float32 with round-to-odd and then to the 16-bit target with the host's
RNE cast; round-to-odd with at least p+2 bits makes the second rounding
innocuous.
"""

from __future__ import annotations

import ml_dtypes
import numpy as np

from .formats import BF16, F16, F32, FpFormat

_HOST = {F32.name: np.float32, F16.name: np.float16, BF16.name: ml_dtypes.bfloat16}
_UINT = {16: np.uint16, 32: np.uint32}


def decode(fmt: FpFormat, bits) -> np.ndarray:
    b = np.asarray(bits).astype(_UINT[fmt.width])
    with np.errstate(invalid="ignore"):
        return b.view(_HOST[fmt.name]).astype(np.float64)


def _odd_round(exact_hi: np.ndarray, exact_lo: np.ndarray) -> np.ndarray:
    """Round-to-odd of hi+lo, where hi = RN(hi+lo) already."""
    inexact = exact_lo != 0
    lsb_even = (exact_hi.view(np.int64) & 1) == 0
    toward = np.where(exact_lo > 0, np.inf, -np.inf)
    return np.where(inexact & lsb_even, np.nextafter(exact_hi, toward), exact_hi)


def _to_f32_odd(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        r = x.astype(np.float32)
    back = r.astype(np.float64)
    inexact = (back != x) & np.isfinite(back) & np.isfinite(x)
    lsb_even = (r.view(np.uint32) & 1) == 0
    toward = np.where(x > back, np.float32(np.inf), np.float32(-np.inf)).astype(np.float32)
    adj = np.nextafter(r, toward)
    return np.where(inexact & lsb_even, adj, r)


def encode(fmt: FpFormat, x) -> np.ndarray:
    """Narrow float64 values to ``fmt`` with a single effective RNE rounding."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        if fmt is F32 or fmt == F32:
            out = x.astype(np.float32)
        else:
            out = _to_f32_odd(x).astype(_HOST[fmt.name])
    bits = out.view(_UINT[fmt.width]).copy()
    bits[np.isnan(x)] = fmt.qnan_bits
    return bits


def _binop(fmt, a, b, op):
    x, y = decode(fmt, a), decode(fmt, b)
    with np.errstate(all="ignore"):
        return encode(fmt, op(x, y))


def add(fmt, a, b):
    return _binop(fmt, a, b, np.add)


def sub(fmt, a, b):
    return _binop(fmt, a, b, np.subtract)


def mul(fmt, a, b):
    return _binop(fmt, a, b, np.multiply)


def div(fmt, a, b):
    return _binop(fmt, a, b, np.divide)


def sqrt(fmt, a):
    with np.errstate(all="ignore"):
        return encode(fmt, np.sqrt(decode(fmt, a)))


def _fused(p: np.ndarray, c: np.ndarray) -> np.ndarray:
    """p + c with p exact, returned as a round-to-odd float64."""
    with np.errstate(all="ignore"):
        s = p + c
        bp = s - c
        bc = s - bp
        err = (p - bp) + (c - bc)
    finite = np.isfinite(s)
    return np.where(finite, _odd_round(s, np.where(finite, err, 0.0)), s)


def fma(fmt, a, b, c):
    x, y, z = decode(fmt, a), decode(fmt, b), decode(fmt, c)
    with np.errstate(all="ignore"):
        p = x * y  # exact: at most 2*24 significant bits
    return encode(fmt, _fused(p, z))


def fma_widen(src_fmt, a, b, c):
    x, y, z = decode(src_fmt, a), decode(src_fmt, b), decode(F32, c)
    with np.errstate(all="ignore"):
        p = x * y
    return encode(F32, _fused(p, z))


def convert(src_fmt, dst_fmt, a):
    return encode(dst_fmt, decode(src_fmt, a))


def compare(rel, fmt, a, b):
    x, y = decode(fmt, a), decode(fmt, b)
    with np.errstate(invalid="ignore"):
        return {"eq": np.equal, "lt": np.less, "le": np.less_equal}[rel](x, y)
