"""SVM: linear-kernel support vector machine inference.

    f(x_s) = b_s + sum_i alpha_i <sv_i, x_s>

The sample/support-vector dot products are split across cores; after a
barrier, core 0 fetches the dual coefficients from L2 and forms the
weighted sums.  The vector variant uses vfdotp (F32 accumulation) for the
dot products and converts each kernel value back to the 16-bit format.
"""

from __future__ import annotations

import numpy as np

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize


def _odd(n: int) -> int:
    return n | 1


@register
class Svm(Kernel):
    kind = Benchmark.SVM
    sizes = {"desk": {"samples": 8, "svs": 16, "dim": 64},
             "small": {"samples": 4, "svs": 4, "dim": 16}}

    def resolve(self, size):
        p = super().resolve(size)
        if p["dim"] % 2 or min(p.values()) < 1:
            raise ValueError("SVM needs positive sizes and an even dim")
        return p

    def generate(self, params, rng, fmt):
        s, nsv, d = params["samples"], params["svs"], params["dim"]
        return {"x": quantize(fmt, rng.uniform(-1, 1, (s, d))),
                "sv": quantize(fmt, rng.uniform(-1, 1, (nsv, d))),
                "alpha": quantize(fmt, rng.uniform(-1, 1, nsv) / nsv),
                "bias": quantize(fmt, rng.uniform(-0.5, 0.5, s))}

    def flops(self, params):
        s, nsv, d = params["samples"], params["svs"], params["dim"]
        return 2 * s * nsv * d + 2 * s * nsv

    def emit(self, ctx: Ctx):
        s, nsv, d = ctx.params["samples"], ctx.params["svs"], ctx.params["dim"]
        lay, fmt, nc, vec = ctx.layout, ctx.fmt, ctx.spec.n_cores, ctx.vec
        dw = d // 2 if vec else d
        stride = _odd(dw)
        lay.alloc("x", s * stride)
        lay.alloc("sv", nsv * stride)
        lay.alloc("kmat", s * nsv)
        lay.alloc("alpha", nsv)          # lives in L2
        lay.alloc("bias", s)
        lay.alloc("f", s)
        for e in ctx.ems:
            for q, pad in items(s * nsv, e, nc, skew=1):
                si, vi = divmod(q, nsv)
                with e.padding(pad):
                    acc = None
                    for j in range(dw):
                        xv = e.ld("x", si * stride + j)
                        sv = e.ld("sv", vi * stride + j)
                        if vec:
                            acc = e.fp("vfdotp", fmt, xv, sv, *(() if acc is None else (acc,)), vec=True)
                        else:
                            acc = e.fp("mul", fmt, xv, sv) if acc is None else e.fp("fma", fmt, xv, sv, acc)
                            e.ints(1)
                    if vec:
                        acc = e.fp("convert", fmt, acc)
                        e.ints(36)
                    e.st("kmat", q, acc)
                    e.useful(2 * d)
        ctx.bar()
        e = ctx.ems[0]
        alphas = [e.ld("alpha", i, l2=True) for i in range(nsv)]
        for si in range(s):
            acc = e.ld("bias", si)
            for i in range(nsv):
                acc = e.fp("fma", fmt, alphas[i], e.ld("kmat", si * nsv + i), acc)
            e.st("f", si, acc)
            e.ints(2)
            e.useful(2 * nsv)

    def reference(self, params, data, spec):
        A = Arith(spec.fmt)
        x, sv = A.q(data["x"]), A.q(data["sv"])
        alpha, bias = A.q(data["alpha"]), A.q(data["bias"])
        d = params["dim"]
        xs, vs = x[:, None, :], sv[None, :, :]
        if spec.variant.is_vector:
            acc = np.zeros((x.shape[0], sv.shape[0]), dtype=np.int64)   # +0.0 in F32
            for j in range(d):
                acc = A.widen_fma(xs[..., j], vs[..., j], acc)
            kmat = A.from_f32(acc)
        else:
            kmat = A.mul(xs[..., 0], vs[..., 0])
            for j in range(1, d):
                kmat = A.fma(xs[..., j], vs[..., j], kmat)
        f = bias
        for i in range(sv.shape[0]):
            f = A.fma(alpha[i], kmat[:, i], f)
        return f

    def oracle(self, params, data, spec):
        x, sv, alpha, bias = data["x"], data["sv"], data["alpha"], data["bias"]
        kmat = x[:, None, 0] * sv[None, :, 0]
        for j in range(1, params["dim"]):
            kmat = kmat + x[:, None, j] * sv[None, :, j]
        f = bias.copy()
        for i in range(sv.shape[0]):
            f = f + alpha[i] * kmat[:, i]
        return f
