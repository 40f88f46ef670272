"""FIR: y[n] = sum_t h[t] x[n-t], outputs split across cores.

The input carries a zero history of ``H`` samples (taps rounded up to even)
so every window is in range.  The vector variant processes output pairs:
coefficients are stored reversed and paired, the odd-aligned window of
y[n] is assembled with one lane shuffle per pair, and vfdotp accumulates
into F32 before a final cast-and-pack.
"""

from __future__ import annotations

import numpy as np

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize


def _geometry(params):
    n, t = params["n"], params["taps"]
    tp = t + (t & 1)
    n_pad = n + (n & 1)
    return n, t, tp, tp, n_pad   # history H == tp


@register
class Fir(Kernel):
    kind = Benchmark.FIR
    sizes = {"desk": {"n": 1024, "taps": 16}, "small": {"n": 64, "taps": 8}}

    def generate(self, params, rng, fmt):
        return {"x": quantize(fmt, rng.uniform(-1, 1, params["n"])),
                "h": quantize(fmt, rng.uniform(-1, 1, params["taps"]) / params["taps"] ** 0.5)}

    def flops(self, params):
        return 2 * params["n"] * params["taps"]

    def emit(self, ctx: Ctx):
        n, t, tp, hist, n_pad = _geometry(ctx.params)
        lay, fmt = ctx.layout, ctx.fmt
        if not ctx.vec:
            lay.alloc("x", hist + n)
            lay.alloc("h", t)
            lay.alloc("y", n)
            for e in ctx.ems:
                for i, pad in items(n, e, ctx.spec.n_cores, skew=1):
                    with e.padding(pad):
                        e.ints(1)
                        acc = None
                        for tt in range(t):
                            xv = e.ld("x", hist + i - tt)
                            hv = e.ld("h", tt)
                            acc = e.fp("mul", fmt, xv, hv) if acc is None else e.fp("fma", fmt, xv, hv, acc)
                        e.st("y", i, acc)
                        e.useful(2 * t)
            return
        half = tp // 2
        lay.alloc("x", (hist + n_pad) // 2)
        lay.alloc("h", half)      # reversed, zero-padded coefficient pairs
        lay.alloc("y", n_pad // 2)
        for e in ctx.ems:
            for p, pad in items(n_pad // 2, e, ctx.spec.n_cores, skew=1):
                with e.padding(pad):
                    i = 2 * p
                    e.ints(2)
                    w0 = (i + hist - tp) // 2        # first word of the window
                    words = [e.ld("x", w0 + u) for u in range(half + 1)]
                    acc0 = acc1 = None
                    for u in range(half):
                        hv = e.ld("h", u)
                        s = e.iop(words[u], words[u + 1])   # odd-aligned pair for y[i]
                        acc0 = e.fp("vfdotp", fmt, s, hv, *(() if acc0 is None else (acc0,)), vec=True)
                    for u in range(half):
                        hv = e.ld("h", u)
                        acc1 = e.fp("vfdotp", fmt, words[u + 1], hv, *(() if acc1 is None else (acc1,)), vec=True)
                    e.st("y", p, e.fp("cast_pack", fmt, acc0, acc1, vec=True))
                    e.useful(2 * t * min(2, n - i))

    def _vector_order(self, params):
        """Tap index used by each lane step of the vector variant, in order."""
        _, _, tp, _, _ = _geometry(params)
        return [tp - 1 - j for j in range(tp)]

    def reference(self, params, data, spec):
        n, t, tp, hist, _ = _geometry(params)
        A = Arith(spec.fmt)
        xq = np.concatenate([np.zeros(hist + 1), data["x"]])   # one extra zero for lookahead
        x = A.q(xq)
        h = A.q(np.concatenate([data["h"], np.zeros(tp - t)]))
        idx = np.arange(n)
        base = hist + 1
        if not spec.variant.is_vector:
            acc = A.mul(x[base + idx], h[0])
            for tt in range(1, t):
                acc = A.fma(x[base + idx - tt], h[tt], acc)
            return acc
        acc = np.zeros(n, dtype=np.int64)
        for tt in self._vector_order(params):
            acc = A.widen_fma(x[base + idx - tt], h[tt], acc)
        return A.from_f32(acc)

    def oracle(self, params, data, spec):
        n, t, tp, _, _ = _geometry(params)
        x = np.concatenate([np.zeros(tp), data["x"]])
        h = np.concatenate([data["h"], np.zeros(tp - t)])
        idx = np.arange(n) + tp
        order = range(t) if not spec.variant.is_vector else self._vector_order(params)
        acc = np.zeros(n)
        first = True
        for tt in order:
            term = x[idx - tt] * h[tt]
            acc = term if first else acc + term
            first = False
        return acc
