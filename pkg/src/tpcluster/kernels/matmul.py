"""MATMUL: C = A @ B, rows of C split across cores.

Scalar: one fma per MAC with both operands loaded.  Vector: rows of B are
paired and transposed with two lane shuffles so that one vfdotp accumulates
two products into an F32 accumulator; two outputs are cast-and-packed into
one word.
"""

from __future__ import annotations

import numpy as np

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize
from ..tpfloat.formats import F32


def _even(n: int) -> int:
    return n + (n & 1)


def _odd(n: int) -> int:
    """Row stride in words; odd strides spread a column over all banks."""
    return n | 1


@register
class Matmul(Kernel):
    kind = Benchmark.MATMUL
    sizes = {"desk": {"m": 32, "n": 32, "k": 32}, "small": {"m": 16, "n": 16, "k": 16}}

    def generate(self, params, rng, fmt):
        m, n, k = params["m"], params["n"], params["k"]
        return {"a": quantize(fmt, rng.uniform(-1, 1, (m, k))),
                "b": quantize(fmt, rng.uniform(-1, 1, (k, n)))}

    def flops(self, params):
        return 2 * params["m"] * params["n"] * params["k"]

    def emit(self, ctx: Ctx):
        m, n, k = ctx.params["m"], ctx.params["n"], ctx.params["k"]
        lay, fmt = ctx.layout, ctx.fmt
        if not ctx.vec:
            sa, sb = _odd(k), _odd(n)
            lay.alloc("a", m * sa)
            lay.alloc("b", k * sb)
            lay.alloc("c", m * n)
            for e in ctx.ems:
                for i, pad in items(m, e, ctx.spec.n_cores):
                    with e.padding(pad):
                        for j in range(n):
                            e.ints(2)
                            acc = None
                            for kk in range(k):
                                a = e.ld("a", i * sa + kk)
                                b = e.ld("b", kk * sb + j)
                                acc = e.fp("mul", fmt, a, b) if acc is None else e.fp("fma", fmt, a, b, acc)
                                if kk & 1:
                                    e.ints(1)
                            e.st("c", i * n + j, acc)
                            e.useful(2 * k)
            return
        kp, np_ = _even(k), _even(n)
        kw, nw = kp // 2, np_ // 2
        sa, sb = _odd(kw), _odd(nw)
        lay.alloc("a", m * sa)
        lay.alloc("b", kp * sb)
        lay.alloc("c", m * nw)
        for e in ctx.ems:
            for i, pad in items(m, e, ctx.spec.n_cores):
                with e.padding(pad):
                    for jw in range(nw):
                        e.ints(3)
                        acc0 = acc1 = None
                        for kq in range(kw):
                            a = e.ld("a", i * sa + kq)
                            b0 = e.ld("b", (2 * kq) * sb + jw)
                            b1 = e.ld("b", (2 * kq + 1) * sb + jw)
                            t0 = e.iop(b0, b1)   # (B[2q][j],   B[2q+1][j])
                            t1 = e.iop(b0, b1)   # (B[2q][j+1], B[2q+1][j+1])
                            acc0 = e.fp("vfdotp", fmt, a, t0, *(() if acc0 is None else (acc0,)), vec=True)
                            acc1 = e.fp("vfdotp", fmt, a, t1, *(() if acc1 is None else (acc1,)), vec=True)
                        packed = e.fp("cast_pack", fmt, acc0, acc1, vec=True)
                        e.st("c", i * nw + jw, packed)
                        cols = min(2, n - 2 * jw)
                        e.useful(2 * k * cols)

    def reference(self, params, data, spec):
        fmt = spec.fmt
        A = Arith(fmt)
        a, b = A.q(data["a"]), A.q(data["b"])
        k = params["k"]
        if not spec.variant.is_vector:
            acc = A.mul(a[:, 0, None], b[None, 0, :])
            for kk in range(1, k):
                acc = A.fma(a[:, kk, None], b[None, kk, :], acc)
            return acc
        acc = np.zeros((params["m"], params["n"]), dtype=np.int64)  # +0.0 in F32
        for kk in range(k):
            acc = A.widen_fma(a[:, kk, None], b[None, kk, :], acc)
        return A.from_f32(acc)

    def oracle(self, params, data, spec):
        a, b = data["a"], data["b"]
        acc = a[:, 0, None] * b[None, 0, :]
        for kk in range(1, params["k"]):
            acc = acc + a[:, kk, None] * b[None, kk, :]
        return acc
