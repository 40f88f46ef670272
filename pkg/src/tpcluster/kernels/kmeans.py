"""KMEANS: a fixed number of Lloyd iterations over a small point set.

Each iteration has a parallel assignment stage (squared distances to the
K centroids, argmin with strict compares) and a sequential update stage on
core 0 (per-cluster sums kept in registers, then one division per
coordinate), separated by barriers.  Empty clusters keep their centroid.

The vector variant packs two coordinates per word: differences are taken
with packed subtracts and squared distances accumulate in F32 through
vfdotp; the update sums coordinates with packed adds.  Because the update
stage follows the data, the generator replays the reference to learn the
assignments of each iteration.
"""

from __future__ import annotations

import numpy as np

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize
from ..tpfloat import _core
from ..tpfloat.formats import F32


@register
class Kmeans(Kernel):
    kind = Benchmark.KMEANS
    needs_reference = True
    sizes = {"desk": {"points": 128, "k": 4, "dim": 8, "iters": 2},
             "small": {"points": 32, "k": 4, "dim": 8, "iters": 1}}

    def resolve(self, size):
        p = super().resolve(size)
        if p["dim"] % 2:
            raise ValueError("KMEANS dim must be even (two coordinates per word)")
        if p["k"] < 1 or p["points"] < p["k"] or p["iters"] < 1:
            raise ValueError("KMEANS needs 1 <= k <= points and iters >= 1")
        return p

    def generate(self, params, rng, fmt):
        n, k, d = params["points"], params["k"], params["dim"]
        centers = rng.uniform(-0.6, 0.6, (k, d))
        x = centers[np.arange(n) % k] + rng.normal(0.0, 0.08, (n, d))
        x = quantize(fmt, np.clip(x, -1, 1))
        return {"x": x, "c0": x[:k].copy()}

    def flops(self, params):
        n, k, d, it = params["points"], params["k"], params["dim"], params["iters"]
        return it * (n * (3 * k * d + d) + k * d)

    def _run(self, params, data, spec):
        """Returns (final centroid bits, per-iteration assignments and counts)."""
        fmt, vec = spec.fmt, spec.variant.is_vector
        A = Arith(fmt)
        x, c = A.q(data["x"]), A.q(data["c0"])
        k, d = params["k"], params["dim"]
        history = []
        for _ in range(params["iters"]):
            dist = []
            for ci in range(k):
                diff = A.sub(x, c[ci][None, :])
                if vec:
                    acc = np.zeros(x.shape[0], dtype=np.int64)     # +0.0 in F32
                    for j in range(d):
                        acc = A.widen_fma(diff[:, j], diff[:, j], acc)
                else:
                    acc = A.mul(diff[:, 0], diff[:, 0])
                    for j in range(1, d):
                        acc = A.fma(diff[:, j], diff[:, j], acc)
                dist.append(acc)
            dfmt = F32 if vec else fmt
            best = np.zeros(x.shape[0], dtype=np.int64)
            bd = dist[0]
            for ci in range(1, k):
                less = _core.compare("lt", dfmt, dist[ci], bd).astype(bool)
                best = np.where(less, ci, best)
                bd = np.where(less, dist[ci], bd)
            counts = np.bincount(best, minlength=k)
            newc = c.copy()
            for ci in range(k):
                members = np.flatnonzero(best == ci)
                if members.size == 0:
                    continue
                acc = A.zeros(d)
                for p in members:
                    acc = A.add(acc, x[p])
                cnt = A.q(np.full(d, float(members.size)))
                newc[ci] = A.div(acc, cnt)
            history.append((best, counts))
            c = newc
        return c, history

    def emit(self, ctx: Ctx):
        n, k, d = ctx.params["points"], ctx.params["k"], ctx.params["dim"]
        lay, fmt, nc, vec = ctx.layout, ctx.fmt, ctx.spec.n_cores, ctx.vec
        per = 2 if vec else 1
        dw = d // per
        lay.alloc("x", n * dw)
        lay.alloc("cen", k * dw)
        lay.alloc("assign", n)
        _, history = self._run(ctx.params, ctx.data, ctx.spec)
        for best, counts in history:
            for e in ctx.ems:
                for p, pad in items(n, e, nc, skew=1):
                    with e.padding(pad):
                        xs = [e.ld("x", p * dw + j) for j in range(dw)]
                        dist = []
                        for ci in range(k):
                            acc = None
                            for j in range(dw):
                                cv = e.ld("cen", ci * dw + j)
                                if vec:
                                    df = e.fp("vsub", fmt, xs[j], cv, vec=True)
                                    acc = e.fp("vfdotp", fmt, df, df, *(() if acc is None else (acc,)), vec=True)
                                else:
                                    df = e.fp("sub", fmt, xs[j], cv)
                                    acc = e.fp("mul", fmt, df, df) if acc is None else e.fp("fma", fmt, df, df, acc)
                            dist.append(acc)
                        bd = dist[0]
                        for ci in range(1, k):
                            flag = e.fp("cmp", F32, dist[ci], bd)
                            bd = e.iop(flag, dist[ci], bd)          # select
                        e.st("assign", p, bd)
                        e.ints(18 if vec else 12)
                        e.useful(3 * k * d)
            ctx.bar()
            self._update(ctx.ems[0], fmt, vec, best, counts, k, dw)
            ctx.bar()

    @staticmethod
    def _update(e, fmt, vec, best, counts, k, dw):
        zero = e.iop()
        acc = [[zero] * dw for _ in range(k)]
        for p, ci in enumerate(best):
            e.ld("assign", p)
            for j in range(dw):
                xv = e.ld("x", p * dw + j)
                acc[ci][j] = e.fp("vadd" if vec else "add", fmt, acc[ci][j], xv, vec=vec)
            e.ints(2)
            e.useful(dw * (2 if vec else 1))
        for ci in range(k):
            e.useful(dw * (2 if vec else 1))
            if counts[ci] == 0:
                continue
            cf = e.fp("convert", fmt, e.iop())          # integer count to fmt
            for j in range(dw):
                if vec:
                    lanes = [e.ds("div", fmt, e.iop(acc[ci][j]), cf) for _ in range(2)]
                    e.st("cen", ci * dw + j, e.iop(*lanes))
                else:
                    e.st("cen", ci * dw + j, e.ds("div", fmt, acc[ci][j], cf))

    def reference(self, params, data, spec):
        return self._run(params, data, spec)[0].ravel()

    def oracle(self, params, data, spec):
        x, c = np.array(data["x"]), np.array(data["c0"])
        k = params["k"]
        for _ in range(params["iters"]):
            dist = np.stack([((x - c[ci]) ** 2).sum(axis=1) for ci in range(k)], 1)
            best = np.argmin(dist, axis=1)
            for ci in range(k):
                m = best == ci
                if m.any():
                    c[ci] = x[m].sum(axis=0) / m.sum()
        return c.ravel()
