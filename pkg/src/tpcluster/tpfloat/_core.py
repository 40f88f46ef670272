"""Vectorized bit-level arithmetic.

Every function takes and returns numpy integer arrays of raw encodings.
Finite operands are unpacked into ``(sign, exp, sig)`` with value
``(-1)**sign * sig * 2**exp``, combined exactly in int64, and rounded once
to nearest-even by :func:`round_pack`.  Significands are kept below 2**62.
"""

from __future__ import annotations

import numpy as np

from .formats import F32, FpFormat

ZERO, FINITE, INF, NAN = 0, 1, 2, 3

_I64 = np.int64


def _as_bits(x, fmt: FpFormat) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype.kind not in "iu":
        raise TypeError(f"bit patterns must be integers, got dtype {arr.dtype}")
    return arr.astype(_I64) & fmt.mask


def _out(bits: np.ndarray, fmt: FpFormat) -> np.ndarray:
    return bits.astype(np.uint16 if fmt.width == 16 else np.uint32)


def bitlen(x: np.ndarray) -> np.ndarray:
    """Bit length of non-negative int64 values (0 for 0)."""
    x = np.asarray(x, dtype=_I64)
    n = np.zeros(x.shape, dtype=_I64)
    for s in (32, 16, 8, 4, 2, 1):
        hit = (x >> (n + s)) != 0
        n = n + s * hit
    return n + (x != 0)


def unpack(bits, fmt: FpFormat):
    """Split encodings into (sign, cls, exp, sig)."""
    b = _as_bits(bits, fmt)
    s = fmt.sig_bits_stored
    sign = (b >> (fmt.width - 1)) & 1
    efield = (b >> s) & fmt.exp_max_field
    frac = b & fmt.frac_mask
    normal = (efield != 0) & (efield != fmt.exp_max_field)
    sig = np.where(normal, frac | (1 << s), frac)
    exp = np.where(normal, efield - fmt.bias - s, fmt.emin - s)
    cls = np.full(b.shape, FINITE, dtype=np.int8)
    cls[(efield == 0) & (frac == 0)] = ZERO
    top = efield == fmt.exp_max_field
    cls[top & (frac == 0)] = INF
    cls[top & (frac != 0)] = NAN
    return sign, cls, exp.astype(_I64), sig.astype(_I64)


def round_pack(fmt: FpFormat, sign, exp, sig, sticky=None) -> np.ndarray:
    """Round ``sig * 2**exp`` (plus a sticky tail) to nearest-even in ``fmt``.

    ``sticky`` marks non-zero bits below the LSB of ``sig``; when it is set,
    ``sig`` must carry at least precision+2 bits.
    """
    sign = np.asarray(sign, dtype=_I64)
    exp = np.asarray(exp, dtype=_I64)
    sig = np.asarray(sig, dtype=_I64)
    if sticky is None:
        sticky = np.zeros(sig.shape, dtype=bool)
    s = fmt.sig_bits_stored
    nb = bitlen(sig)
    top = exp + nb - 1
    q = np.maximum(top - s, fmt.emin - s)
    shift = q - exp
    right = shift > 0
    rs = np.clip(shift, 0, 63)
    ls = np.clip(-shift, 0, 63)
    keep = np.where(right, sig >> rs, sig << ls)
    rpos = np.maximum(rs - 1, 0)
    rbit = np.where(right, (sig >> rpos) & 1, 0)
    low = sig & ((np.ones_like(sig) << rpos) - 1)
    st = sticky | (right & (low != 0))
    keep = keep + (rbit & (st | (keep & 1)))
    bits = ((q + s + fmt.bias - 1) << s) + keep
    bits = np.where(bits >= fmt.inf_bits, fmt.inf_bits, bits)
    bits = np.where((sig == 0) & ~np.asarray(sticky, dtype=bool), 0, bits)
    return bits | (sign << (fmt.width - 1))


def _add_core(fmt_out, sx, ex, mx, sy, ey, my):
    """Exact-then-round sum of two finite terms with significands < 2**49."""
    swap = ey > ex
    sx, sy = np.where(swap, sy, sx), np.where(swap, sx, sy)
    ex, ey = np.where(swap, ey, ex), np.where(swap, ex, ey)
    mx, my = np.where(swap, my, mx), np.where(swap, mx, my)
    d = ex - ey
    kmax = 61 - bitlen(mx)
    exact = d <= kmax
    k = np.where(exact, d, kmax)
    xs = mx << k
    rsh = np.clip(d - k, 0, 62)     # my < 2**49, so 62 already clears it
    ys = my >> rsh
    lost = (my & ((np.ones_like(my) << rsh) - 1)) != 0
    ys = ys | lost
    total = np.where(sx == 1, -xs, xs) + np.where(sy == 1, -ys, ys)
    sign = (total < 0).astype(_I64)
    return round_pack(fmt_out, sign, ex - k, np.abs(total))


def add(fmt: FpFormat, a, b, subtract: bool = False) -> np.ndarray:
    sa, ca, ea, ma = unpack(a, fmt)
    sb, cb, eb, mb = unpack(b, fmt)
    if subtract:
        sb = sb ^ 1
    a_b = _as_bits(a, fmt)
    b_b = _as_bits(b, fmt) ^ (fmt.sign_mask if subtract else 0)
    res = _add_core(fmt, sa, ea, ma, sb, eb, mb)
    res = np.where(cb == ZERO, a_b, res)
    res = np.where(ca == ZERO, b_b, res)
    both_zero = (ca == ZERO) & (cb == ZERO)
    res = np.where(both_zero, (sa & sb) << (fmt.width - 1), res)
    res = np.where(cb == INF, b_b, res)
    res = np.where(ca == INF, a_b, res)
    nan = (ca == NAN) | (cb == NAN) | ((ca == INF) & (cb == INF) & (sa != sb))
    res = np.where(nan, fmt.qnan_bits, res)
    return _out(res, fmt)


def sub(fmt: FpFormat, a, b) -> np.ndarray:
    return add(fmt, a, b, subtract=True)


def mul(fmt: FpFormat, a, b) -> np.ndarray:
    sa, ca, ea, ma = unpack(a, fmt)
    sb, cb, eb, mb = unpack(b, fmt)
    sign = sa ^ sb
    res = round_pack(fmt, sign, ea + eb, ma * mb)
    signed_zero = sign << (fmt.width - 1)
    signed_inf = signed_zero | fmt.inf_bits
    res = np.where((ca == ZERO) | (cb == ZERO), signed_zero, res)
    res = np.where((ca == INF) | (cb == INF), signed_inf, res)
    nan = (ca == NAN) | (cb == NAN) | ((ca == INF) & (cb == ZERO)) | ((ca == ZERO) & (cb == INF))
    res = np.where(nan, fmt.qnan_bits, res)
    return _out(res, fmt)


def _fma_mixed(src_fmt: FpFormat, out_fmt: FpFormat, a, b, c) -> np.ndarray:
    """a*b + c with a, b in ``src_fmt`` and c, result in ``out_fmt``; one rounding."""
    sa, ca, ea, ma = unpack(a, src_fmt)
    sb, cb, eb, mb = unpack(b, src_fmt)
    sc, cc, ec, mc = unpack(c, out_fmt)
    c_b = _as_bits(c, out_fmt)
    sp = sa ^ sb
    p_zero = (ca == ZERO) | (cb == ZERO)
    p_inf = (ca == INF) | (cb == INF)
    res = _add_core(out_fmt, sp, ea + eb, ma * mb, sc, ec, mc)
    # c == 0 and product finite non-zero: round the product alone
    only_p = round_pack(out_fmt, sp, ea + eb, ma * mb)
    res = np.where((cc == ZERO) & ~p_zero, only_p, res)
    res = np.where(p_zero & (cc != ZERO), c_b, res)
    res = np.where(p_zero & (cc == ZERO), (sp & sc) << (out_fmt.width - 1), res)
    res = np.where(cc == INF, c_b, res)
    res = np.where(p_inf, (sp << (out_fmt.width - 1)) | out_fmt.inf_bits, res)
    nan = (
        (ca == NAN) | (cb == NAN) | (cc == NAN)
        | ((ca == INF) & (cb == ZERO)) | ((ca == ZERO) & (cb == INF))
        | (p_inf & (cc == INF) & (sp != sc))
    )
    res = np.where(nan, out_fmt.qnan_bits, res)
    return _out(res, out_fmt)


def fma(fmt: FpFormat, a, b, c) -> np.ndarray:
    return _fma_mixed(fmt, fmt, a, b, c)


def fma_widen(src_fmt: FpFormat, a, b, c) -> np.ndarray:
    """16-bit product accumulated into a binary32 addend."""
    if not src_fmt.is_16bit:
        raise ValueError(f"widening FMA needs a 16-bit source format, got {src_fmt.name}")
    return _fma_mixed(src_fmt, F32, a, b, c)


def _normalize(sig, exp, precision):
    sh = np.maximum(precision - bitlen(sig), 0)
    return sig << sh, exp - sh


def div(fmt: FpFormat, a, b) -> np.ndarray:
    sa, ca, ea, ma = unpack(a, fmt)
    sb, cb, eb, mb = unpack(b, fmt)
    sign = sa ^ sb
    p = fmt.precision
    fin = (ca == FINITE) & (cb == FINITE)
    ma, ea = _normalize(np.where(fin, ma, 1), ea, p)
    mb, eb = _normalize(np.where(fin, mb, 1), eb, p)
    num = ma << (p + 2)
    quo = num // mb
    rem = num - quo * mb
    res = round_pack(fmt, sign, ea - eb - (p + 2), quo, rem != 0)
    signed_zero = sign << (fmt.width - 1)
    signed_inf = signed_zero | fmt.inf_bits
    res = np.where((ca == ZERO) | (cb == INF), signed_zero, res)
    res = np.where((cb == ZERO) | (ca == INF), signed_inf, res)
    nan = (ca == NAN) | (cb == NAN) | ((ca == ZERO) & (cb == ZERO)) | ((ca == INF) & (cb == INF))
    res = np.where(nan, fmt.qnan_bits, res)
    return _out(res, fmt)


def _isqrt(n: np.ndarray) -> np.ndarray:
    r = np.floor(np.sqrt(n.astype(np.float64))).astype(_I64)
    for _ in range(2):
        r = np.where(r * r > n, r - 1, r)
    for _ in range(2):
        r = np.where((r + 1) * (r + 1) <= n, r + 1, r)
    return r


def sqrt(fmt: FpFormat, a) -> np.ndarray:
    sa, ca, ea, ma = unpack(a, fmt)
    a_b = _as_bits(a, fmt)
    p = fmt.precision
    fin = ca == FINITE
    ma, ea = _normalize(np.where(fin, ma, 1), ea, p)
    k = (p + 4) + ((ea - (p + 4)) & 1)
    n = ma << k
    r = _isqrt(n)
    res = round_pack(fmt, np.zeros_like(sa), (ea - k) >> 1, r, r * r != n)
    res = np.where((ca == ZERO) | ((ca == INF) & (sa == 0)), a_b, res)
    nan = (ca == NAN) | ((sa == 1) & (ca != ZERO))
    res = np.where(nan, fmt.qnan_bits, res)
    return _out(res, fmt)


def convert(src_fmt: FpFormat, dst_fmt: FpFormat, a) -> np.ndarray:
    sa, ca, ea, ma = unpack(a, src_fmt)
    res = round_pack(dst_fmt, sa, ea, ma)
    signed_zero = sa << (dst_fmt.width - 1)
    res = np.where(ca == ZERO, signed_zero, res)
    res = np.where(ca == INF, signed_zero | dst_fmt.inf_bits, res)
    res = np.where(ca == NAN, dst_fmt.qnan_bits, res)
    return _out(res, dst_fmt)


def _order_key(bits, fmt):
    b = _as_bits(bits, fmt)
    mag = b & ~fmt.sign_mask & fmt.mask
    return np.where((b & fmt.sign_mask) != 0, -mag, mag)


def is_nan(fmt: FpFormat, a) -> np.ndarray:
    return unpack(a, fmt)[1] == NAN


def compare(rel: str, fmt: FpFormat, a, b) -> np.ndarray:
    """Quiet comparison; any NaN operand yields False."""
    unordered = is_nan(fmt, a) | is_nan(fmt, b)
    ka, kb = _order_key(a, fmt), _order_key(b, fmt)
    if rel == "eq":
        out = ka == kb
    elif rel == "lt":
        out = ka < kb
    elif rel == "le":
        out = ka <= kb
    else:
        raise ValueError(f"unknown relation {rel!r}")
    return out & ~unordered


def negate(fmt: FpFormat, a) -> np.ndarray:
    """Sign flip (a bit operation, no rounding, NaN untouched)."""
    return _out(_as_bits(a, fmt) ^ fmt.sign_mask, fmt)


# -- float <-> bits helpers for tests and kernel data -----------------------

def from_float(fmt: FpFormat, x) -> np.ndarray:
    """Round float64 values into ``fmt`` with a single RNE step."""
    x = np.asarray(x, dtype=np.float64)
    m, e = np.frexp(np.where(np.isfinite(x), x, 0.0))
    sig = np.abs(np.ldexp(m, 53)).astype(_I64)
    sign = np.signbit(x).astype(_I64)
    res = round_pack(fmt, sign, e.astype(_I64) - 53, sig)
    res = np.where(x == 0, sign << (fmt.width - 1), res)
    res = np.where(np.isinf(x), (sign << (fmt.width - 1)) | fmt.inf_bits, res)
    res = np.where(np.isnan(x), fmt.qnan_bits, res)
    return _out(res, fmt)


def to_float(fmt: FpFormat, bits) -> np.ndarray:
    """Exact float64 value of each encoding."""
    sign, cls, exp, sig = unpack(bits, fmt)
    val = np.ldexp(sig.astype(np.float64), exp.astype(np.int32))
    val = np.where(cls == INF, np.inf, val)
    val = np.where(cls == NAN, np.nan, val)
    return np.where(sign == 1, -val, val)
