"""CONV: valid 2D correlation of an (H+4)x(W+4) image with a 5x5 kernel.

Output pixels are split across cores in row-major order.  The vector
variant computes two horizontally adjacent outputs per iteration: each
image row contributes three input words shared by both outputs, the odd
window is realigned with lane shuffles, and the kernel row is stored as
pairs (w0,w1), (w2,w3), (w4,0) so that three vfdotp cover five taps.
"""

from __future__ import annotations

import numpy as np

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize

KS = 5          # kernel side
KP = 3          # coefficient pairs per kernel row (last one zero-padded)


def _odd(n: int) -> int:
    return n | 1


@register
class Conv(Kernel):
    kind = Benchmark.CONV
    sizes = {"desk": {"h": 32, "w": 32}, "small": {"h": 8, "w": 8}}

    def generate(self, params, rng, fmt):
        h, w = params["h"], params["w"]
        return {"x": quantize(fmt, rng.uniform(-1, 1, (h + KS - 1, w + KS - 1))),
                "k": quantize(fmt, rng.uniform(-1, 1, (KS, KS)) / KS)}

    def flops(self, params):
        return 2 * KS * KS * params["h"] * params["w"]

    def emit(self, ctx: Ctx):
        h, w = ctx.params["h"], ctx.params["w"]
        lay, fmt, nc = ctx.layout, ctx.fmt, ctx.spec.n_cores
        rows = h + KS - 1
        if not ctx.vec:
            sx = _odd(w + KS - 1)
            lay.alloc("x", rows * sx)
            lay.alloc("k", KS * KS)
            lay.alloc("y", h * w)
            for e in ctx.ems:
                for o, pad in items(h * w, e, nc, skew=1):
                    r, c = divmod(o, w)
                    with e.padding(pad):
                        acc = None
                        for kr in range(KS):
                            for kc in range(KS):
                                xv = e.ld("x", (r + kr) * sx + c + kc)
                                kv = e.ld("k", kr * KS + kc)
                                acc = e.fp("mul", fmt, xv, kv) if acc is None else e.fp("fma", fmt, xv, kv, acc)
                        e.st("y", r * w + c, acc)
                        e.ints(1)
                        e.useful(2 * KS * KS)
            return
        wp = w + (w & 1)
        sx = _odd((wp + KS + 1) // 2)     # words per padded image row
        lay.alloc("x", rows * sx)
        lay.alloc("k", KS * KP)
        lay.alloc("y", h * wp // 2)
        for e in ctx.ems:
            for o, pad in items(h * wp // 2, e, nc, skew=1):
                r, cw = divmod(o, wp // 2)
                with e.padding(pad):
                    e.ints(4)
                    acc0 = acc1 = None
                    for kr in range(KS):
                        e.ints(5)
                        base = (r + kr) * sx + cw
                        words = [e.ld("x", base + u) for u in range(KP + 1)]
                        for u in range(KP):
                            kv = e.ld("k", kr * KP + u)
                            odd = e.iop(words[u], words[u + 1])   # (x[c+2u+1], x[c+2u+2])
                            acc0 = e.fp("vfdotp", fmt, words[u], kv, *(() if acc0 is None else (acc0,)), vec=True)
                            acc1 = e.fp("vfdotp", fmt, odd, kv, *(() if acc1 is None else (acc1,)), vec=True)
                    e.st("y", o, e.fp("cast_pack", fmt, acc0, acc1, vec=True))
                    e.useful(2 * KS * KS * min(2, w - 2 * cw))

    def reference(self, params, data, spec):
        h, w = params["h"], params["w"]
        A = Arith(spec.fmt)
        x, k = A.q(data["x"]), A.q(data["k"])
        if not spec.variant.is_vector:
            acc = None
            for kr in range(KS):
                for kc in range(KS):
                    t = x[kr:kr + h, kc:kc + w]
                    acc = A.mul(t, k[kr, kc]) if acc is None else A.fma(t, k[kr, kc], acc)
            return acc
        # the zero sixth tap multiplies an in-range (padded) pixel
        xp = np.concatenate([x, A.zeros((x.shape[0], 2))], axis=1)
        kz = np.concatenate([k, A.zeros((KS, 1))], axis=1)
        acc = A.zeros((h, w))
        for kr in range(KS):
            for kc in range(KS + 1):
                acc = A.widen_fma(xp[kr:kr + h, kc:kc + w], kz[kr, kc], acc)
        return A.from_f32(acc)

    def oracle(self, params, data, spec):
        h, w = params["h"], params["w"]
        x, k = data["x"], data["k"]
        acc = x[0:h, 0:w] * k[0, 0]
        for kr in range(KS):
            for kc in range(KS):
                if kr or kc:
                    acc = acc + x[kr:kr + h, kc:kc + w] * k[kr, kc]
        return acc
