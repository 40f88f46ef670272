"""FFT: in-place radix-2 decimation-in-frequency with a final bit reversal.

Butterfly (span h, twiddle w):  a' = a + b,  b' = (a - b) * w.

Real and imaginary parts live in separate arrays.  Every stage is split
across cores and closed by a barrier; the bit-reversal permutation is an
out-of-place parallel copy.  Butterfly operand indices come from a
precomputed index table (three loads per butterfly).  The vector variant
runs two butterflies per iteration on (re, re) and (im, im) lane pairs; at
the last stage (h = 1) both partners share a word, so lanes are regrouped
with shuffles on the way in and out.

The scalar complex multiply uses the fma form

    re = fma(dr, wr, -(di * wi)),   im = fma(dr, wi, di * wr)

(four FP ops, a sign flip and two moves: 7 issue slots).  The packed one
has no fused negate-accumulate worth the lane juggling and uses

    re = dr*wr - di*wi,   im = dr*wi + di*wr

(six SIMD ops and four moves: 10 issue slots).
"""

from __future__ import annotations

import numpy as np

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize
from ..tpfloat import _core
from ..tpfloat.formats import FpFormat, get_format

CMUL_SLOTS = {False: 7, True: 10}
FLOPS_PER_BUTTERFLY = 10


def _check_pow2(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two >= 2, got {n}")
    return n.bit_length() - 1


def _bitrev(n: int) -> np.ndarray:
    bits = _check_pow2(n)
    idx = np.arange(n)
    out = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        out |= ((idx >> b) & 1) << (bits - 1 - b)
    return out


def _stage(n: int, s: int):
    """(i0, i1, twiddle exponent) for every butterfly of stage ``s``."""
    h = n >> (s + 1)
    b = np.arange(n // 2)
    g, j = divmod(b, h)
    i0 = g * 2 * h + j
    return i0, i0 + h, j << s


def twiddles(n: int, fmt) -> tuple[np.ndarray, np.ndarray]:
    """W_n^k for k < n/2, rounded to ``fmt`` (returned as float64 values)."""
    k = np.arange(n // 2)
    w = np.exp(-2j * np.pi * k / n)
    fmt = get_format(fmt)
    return quantize(fmt, w.real), quantize(fmt, w.imag)


def _neg(fmt: FpFormat, bits):
    return bits ^ (1 << (fmt.width - 1))


def _dif(A: Arith, re, im, wre, wim, n: int, vector: bool):
    """Butterfly network on encodings; returns natural-order (re, im)."""
    re, im = re.copy(), im.copy()
    for s in range(_check_pow2(n)):
        i0, i1, t = _stage(n, s)
        ar, ai, br, bi = re[i0], im[i0], re[i1], im[i1]
        wr, wi = wre[t], wim[t]
        sr, si = A.add(ar, br), A.add(ai, bi)
        dr, di = A.sub(ar, br), A.sub(ai, bi)
        if vector:
            yr = A.sub(A.mul(dr, wr), A.mul(di, wi))
            yi = A.add(A.mul(dr, wi), A.mul(di, wr))
        else:
            yr = A.fma(dr, wr, _neg(A.fmt, A.mul(di, wi)))
            yi = A.fma(dr, wi, A.mul(di, wr))
        re[i0], im[i0], re[i1], im[i1] = sr, si, yr, yi
    rev = _bitrev(n)
    return re[rev], im[rev]


def fft_radix2_dif(x, fmt, vector: bool | None = None) -> np.ndarray:
    """Spectrum of ``x`` computed in ``fmt`` arithmetic (inputs rounded to fmt).

    ``vector`` selects the packed complex-multiply form; it defaults to True
    for 16-bit formats, matching the kernel variants.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    _check_pow2(n)
    fmt = get_format(fmt)
    if vector is None:
        vector = fmt.is_16bit
    A = Arith(fmt)
    wre, wim = twiddles(n, fmt)
    re, im = _dif(A, A.q(x.real), A.q(x.imag), A.q(wre), A.q(wim), n, vector)
    return _core.to_float(fmt, re) + 1j * _core.to_float(fmt, im)


@register
class Fft(Kernel):
    kind = Benchmark.FFT
    sizes = {"desk": {"n": 256}, "small": {"n": 32}}

    def resolve(self, size):
        p = super().resolve(size)
        _check_pow2(p["n"])
        if p["n"] < 4:
            raise ValueError("FFT length must be at least 4")
        return p

    def generate(self, params, rng, fmt):
        n = params["n"]
        return {"re": quantize(fmt, rng.uniform(-1, 1, n)),
                "im": quantize(fmt, rng.uniform(-1, 1, n))}

    def flops(self, params):
        n = params["n"]
        return FLOPS_PER_BUTTERFLY * (n // 2) * _check_pow2(n)

    def emit(self, ctx: Ctx):
        n = ctx.params["n"]
        stages = _check_pow2(n)
        lay, fmt, nc, vec = ctx.layout, ctx.fmt, ctx.spec.n_cores, ctx.vec
        per_word = 2 if vec else 1
        for name in ("re", "im", "Xre", "Xim"):
            lay.alloc(name, n // per_word)
        n_it = n // 2 // per_word
        lay.alloc("idx", 3 * stages * n_it)
        lay.alloc("wre", stages * n_it if vec else n // 2)
        lay.alloc("wim", stages * n_it if vec else n // 2)
        for s in range(stages):
            i0s, i1s, ts = _stage(n, s)
            last = vec and (n >> (s + 1)) == 1
            for e in ctx.ems:
                for it, pad in items(n_it, e, nc, skew=1):
                    with e.padding(pad):
                        b = it * per_word
                        base = 3 * (s * n_it + it)
                        ix = [e.ld("idx", base + u) for u in range(3)]
                        if vec:
                            w0 = int(i0s[b]) // 2
                            w1 = w0 + 1 if last else int(i1s[b]) // 2
                            wa = s * n_it + it
                            wr, wi = e.ld("wre", wa, ix[2]), e.ld("wim", wa, ix[2])
                        else:
                            w0, w1 = int(i0s[b]), int(i1s[b])
                            wr, wi = e.ld("wre", int(ts[b]), ix[2]), e.ld("wim", int(ts[b]), ix[2])
                        ar, ai = e.ld("re", w0, ix[0]), e.ld("im", w0, ix[0])
                        br, bi = e.ld("re", w1, ix[1]), e.ld("im", w1, ix[1])
                        if last:   # words hold (x[4q], x[4q+1]) and (x[4q+2], x[4q+3])
                            ar, br = e.iop(ar, br), e.iop(ar, br)
                            ai, bi = e.iop(ai, bi), e.iop(ai, bi)
                        v = "v" if vec else ""
                        sr, si = e.fp(v + "add", fmt, ar, br, vec=vec), e.fp(v + "add", fmt, ai, bi, vec=vec)
                        dr, di = e.fp(v + "sub", fmt, ar, br, vec=vec), e.fp(v + "sub", fmt, ai, bi, vec=vec)
                        yr, yi = self._cmul(e, fmt, vec, dr, di, wr, wi)
                        if last:
                            sr, yr = e.iop(sr, yr), e.iop(sr, yr)
                            si, yi = e.iop(si, yi), e.iop(si, yi)
                        e.st("re", w0, sr)
                        e.st("im", w0, si)
                        e.st("re", w1, yr)
                        e.st("im", w1, yi)
                        e.ints(12 if vec else 1)   # vector: paired index bookkeeping
                        e.useful(FLOPS_PER_BUTTERFLY * per_word)
            ctx.bar()
        rev = _bitrev(n)
        for e in ctx.ems:
            for it, pad in items(n // per_word, e, nc, skew=1):
                with e.padding(pad):
                    if vec:
                        src = [int(rev[2 * it]), int(rev[2 * it + 1])]
                        r0, r1 = (e.ld("re", k // 2) for k in src)
                        m0, m1 = (e.ld("im", k // 2) for k in src)
                        e.st("Xre", it, e.iop(r0, r1))
                        e.st("Xim", it, e.iop(m0, m1))
                    else:
                        e.st("Xre", it, e.ld("re", int(rev[it])))
                        e.st("Xim", it, e.ld("im", int(rev[it])))
                    e.ints(1)

    @staticmethod
    def _cmul(e, fmt, vec, dr, di, wr, wi):
        if vec:
            a = e.fp("vmul", fmt, dr, wr, vec=True)
            b = e.fp("vmul", fmt, di, wi, vec=True)
            yr = e.fp("vsub", fmt, a, b, vec=True)
            c = e.fp("vmul", fmt, dr, wi, vec=True)
            d = e.fp("vmul", fmt, di, wr, vec=True)
            yi = e.fp("vadd", fmt, c, d, vec=True)
            e.ints(CMUL_SLOTS[True] - 6)                # register moves
            return yr, yi
        t = e.fp("mul", fmt, di, wi)
        nt = e.iop(t)                                   # sign flip
        yr = e.fp("fma", fmt, dr, wr, nt)
        u = e.fp("mul", fmt, di, wr)
        yi = e.fp("fma", fmt, dr, wi, u)
        e.ints(CMUL_SLOTS[False] - 5)                   # register moves
        return yr, yi

    def reference(self, params, data, spec):
        n = params["n"]
        A = Arith(spec.fmt)
        wre, wim = twiddles(n, spec.fmt)
        re, im = _dif(A, A.q(data["re"]), A.q(data["im"]), A.q(wre), A.q(wim), n,
                      spec.variant.is_vector)
        return np.concatenate([re, im])

    def oracle(self, params, data, spec):
        n = params["n"]
        wre, wim = twiddles(n, spec.fmt)
        re, im = np.array(data["re"], dtype=np.float64), np.array(data["im"], dtype=np.float64)
        for s in range(_check_pow2(n)):
            i0, i1, t = _stage(n, s)
            ar, ai, br, bi = re[i0], im[i0], re[i1], im[i1]
            dr, di = ar - br, ai - bi
            re[i0], im[i0] = ar + br, ai + bi
            re[i1] = dr * wre[t] - di * wim[t]
            im[i1] = dr * wim[t] + di * wre[t]
        rev = _bitrev(n)
        return np.concatenate([re[rev], im[rev]])
