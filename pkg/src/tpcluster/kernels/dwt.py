"""DWT: multi-level periodic Daubechies-4 analysis.

Each level filters the current approximation ``s`` (length m) into
approximation and detail halves:

    a[k] = sum_t h[t] s[(2k+t) mod m],   d[k] = sum_t g[t] s[(2k+t) mod m]

Coefficient pairs k are split across cores.  Between levels a single core
copies the new approximation back into the working buffer; that sequential
region plus the shrinking levels limit the parallel speed-up.  The vector
variant computes (a[k], d[k]) as the two lanes of one register: each sample
is broadcast to both lanes and multiplied by the packed (h[t], g[t]) pair.
"""

from __future__ import annotations

import numpy as np

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize

TAPS = 4
_S3 = np.sqrt(3.0)
D4_LOW = np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * np.sqrt(2.0))
D4_HIGH = np.array([D4_LOW[3], -D4_LOW[2], D4_LOW[1], -D4_LOW[0]])


def _windows(m: int) -> np.ndarray:
    k = np.arange(m // 2)[:, None]
    return (2 * k + np.arange(TAPS)[None, :]) % m


@register
class Dwt(Kernel):
    kind = Benchmark.DWT
    sizes = {"desk": {"n": 1024, "levels": 3}, "small": {"n": 128, "levels": 2}}

    def resolve(self, size):
        p = super().resolve(size)
        n, lv = p["n"], p["levels"]
        if lv < 1 or n % (1 << lv) or (n >> (lv - 1)) < TAPS:
            raise ValueError(f"DWT needs n divisible by 2**levels with >= {TAPS} samples at the last level")
        return p

    def generate(self, params, rng, fmt):
        return {"x": quantize(fmt, rng.uniform(-1, 1, params["n"])),
                "h": quantize(fmt, D4_LOW), "g": quantize(fmt, D4_HIGH)}

    def flops(self, params):
        n = params["n"]
        return sum(2 * 2 * TAPS * (n >> (lv + 1)) for lv in range(params["levels"]))

    def emit(self, ctx: Ctx):
        n, levels = ctx.params["n"], ctx.params["levels"]
        lay, fmt, nc, vec = ctx.layout, ctx.fmt, ctx.spec.n_cores, ctx.vec
        wd = (lambda i: i // 2) if vec else (lambda i: i)   # halfword -> containing word
        lay.alloc("s", wd(n) + 1)
        lay.alloc("a", wd(n // 2) + 1)
        lay.alloc("d", wd(n) + 1)        # all detail bands, coarsest last
        # one coefficient table per core, on distinct banks
        n_coef = TAPS if vec else 2 * TAPS
        cstride = n_coef + 1
        lay.alloc("hg", nc * cstride)
        d_off = 0
        for lv in range(levels):
            m = n >> lv
            win = _windows(m)
            for e in ctx.ems:
                for k, pad in items(m // 2, e, nc, skew=1):
                    with e.padding(pad):
                        xs = [e.ld("s", wd(int(i))) for i in win[k]]
                        if vec:
                            acc = None
                            for t in range(TAPS):
                                b = e.iop(xs[t])                  # broadcast to both lanes
                                c = e.ld("hg", e.core_id * cstride + t)   # (h[t], g[t])
                                acc = e.fp("vmul", fmt, b, c, vec=True) if acc is None else \
                                    e.fp("vfma", fmt, b, c, acc, vec=True)
                            e.st("a", wd(k), acc)
                            e.st("d", wd(d_off + k), acc)
                            e.ints(1)
                        else:
                            for j, coef in enumerate(("h", "g")):
                                acc = None
                                for t in range(TAPS):
                                    c = e.ld("hg", e.core_id * cstride + j * TAPS + t)
                                    acc = e.fp("mul", fmt, xs[t], c) if acc is None else \
                                        e.fp("fma", fmt, xs[t], c, acc)
                                e.st("a" if j == 0 else "d", k if j == 0 else d_off + k, acc)
                            e.ints(3)
                        e.useful(2 * 2 * TAPS)
            d_off += m // 2
            ctx.bar()
            if lv + 1 < levels:
                self._copy_back(ctx.ems[0], m // 2, vec)
                ctx.bar()

    @staticmethod
    def _copy_back(e, count, vec):
        """Single-core copy of the approximation into the working buffer."""
        step = 2 if vec else 1
        for i in range(0, count, step):
            v = e.ld("a", i // step)
            e.st("s", i // step, v)
            e.ints(1)

    def _levels(self, params, data, fmt):
        A = Arith(fmt)
        return A, A.q(data["x"]), A.q(data["h"]), A.q(data["g"])

    def reference(self, params, data, spec):
        A, s, h, g = self._levels(params, data, spec.fmt)
        details = []
        for _ in range(params["levels"]):
            win = _windows(s.size)
            a = d = None
            for t in range(TAPS):
                xt = s[win[:, t]]
                a = A.mul(xt, h[t]) if a is None else A.fma(xt, h[t], a)
                d = A.mul(xt, g[t]) if d is None else A.fma(xt, g[t], d)
            details.append(d)
            s = a
        return np.concatenate(details + [s])

    def oracle(self, params, data, spec):
        s, h, g = data["x"], data["h"], data["g"]
        details = []
        for _ in range(params["levels"]):
            win = _windows(s.size)
            a = s[win[:, 0]] * h[0]
            d = s[win[:, 0]] * g[0]
            for t in range(1, TAPS):
                a = a + s[win[:, t]] * h[t]
                d = d + s[win[:, t]] * g[t]
            details.append(d)
            s = a
        return np.concatenate(details + [s])
