"""IIR: block state-space evaluation of a recursive filter.

With a state-space realization (A, B, C, D) of the transfer function and
blocks of L inputs x_k, the lifted system is

    s_{k+1} = A^L s_k + B_L x_k,      y_k = C_L s_k + D_L x_k

    B_L = [A^{L-1}B ... AB B],  C_L rows C A^r,  D_L lower-triangular
    Toeplitz with D on the diagonal and C A^{r-j-1} B below it.

The kernel runs in three barrier-separated phases: input terms
z = D_L x and u = B_L x for every block (parallel), the state recursion
(sequential on core 0), and outputs y = z + C_L s (parallel).  The vector
variant keeps the two rows of each product in the two lanes and works
column by column with broadcast inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .base import Ctx, Kernel, register
from .common import Arith, Benchmark, items, quantize

# 2nd-order Butterworth low-pass, cutoff 0.2 of Nyquist
DEFAULT_B, DEFAULT_A = signal.butter(2, 0.2)
BLOCK = 2


@dataclass(frozen=True)
class BlockForm:
    a: np.ndarray      # A^L           (P x P)
    b: np.ndarray      # B_L           (P x L)
    c: np.ndarray      # C_L           (L x P)
    d: np.ndarray      # D_L           (L x L)

    @property
    def order(self) -> int:
        return self.a.shape[0]

    @property
    def block_len(self) -> int:
        return self.d.shape[0]


def iir_block_form(taps: dict, block_len: int) -> BlockForm:
    """Lift the filter ``taps = {"b": ..., "a": ...}`` to blocks of ``block_len``.

    An empty or missing ``a`` means a pure FIR filter.  Filters whose
    leading denominator coefficient is zero or whose poles are not strictly
    inside the unit circle are rejected.
    """
    if block_len < 1:
        raise ValueError("block length must be >= 1")
    b = np.atleast_1d(np.asarray(taps.get("b", ()), dtype=np.float64))
    a = np.atleast_1d(np.asarray(taps.get("a", None) if taps.get("a", None) is not None else (), dtype=np.float64))
    if b.size == 0:
        raise ValueError("numerator coefficients are empty")
    if a.size == 0:
        a = np.array([1.0])
    if a[0] == 0 or not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise ValueError("degenerate denominator: a[0] must be finite and non-zero")
    if a.size > 1 and np.any(np.abs(np.roots(a)) >= 1.0):
        raise ValueError("unstable filter: poles on or outside the unit circle")
    # pad so that numerator and denominator have the same length
    m = max(a.size, b.size)
    a = np.concatenate([a, np.zeros(m - a.size)])
    b = np.concatenate([b, np.zeros(m - b.size)])
    A, B, C, D = signal.tf2ss(b, a)
    p, L = A.shape[0], block_len
    pw = [np.eye(p)]
    for _ in range(L):
        pw.append(pw[-1] @ A)
    bl = np.zeros((p, L))
    cl = np.zeros((L, p))
    dl = np.zeros((L, L))
    for j in range(L):
        bl[:, j] = (pw[L - 1 - j] @ B).ravel()
    for r in range(L):
        cl[r] = (C @ pw[r]).ravel()
        for j in range(r + 1):
            dl[r, j] = D[0, 0] if r == j else (C @ pw[r - j - 1] @ B)[0, 0]
    return BlockForm(pw[L], bl, cl, dl)


def block_filter(bf: BlockForm, x) -> np.ndarray:
    """float64 evaluation of the block recursion (zero initial state)."""
    x = np.asarray(x, dtype=np.float64)
    L = bf.block_len
    n = x.size
    xb = np.concatenate([x, np.zeros(-n % L)]).reshape(-1, L)
    s = np.zeros(bf.order)
    out = np.empty_like(xb)
    for k, blk in enumerate(xb):
        out[k] = bf.c @ s + bf.d @ blk
        s = bf.a @ s + bf.b @ blk
    return out.ravel()[:n]


@register
class Iir(Kernel):
    kind = Benchmark.IIR
    sizes = {"desk": {"n": 1024}, "small": {"n": 64}}

    def form(self, fmt) -> tuple[np.ndarray, ...]:
        bf = iir_block_form({"b": DEFAULT_B, "a": DEFAULT_A}, BLOCK)
        return tuple(quantize(fmt, m) for m in (bf.a, bf.b, bf.c, bf.d))

    def generate(self, params, rng, fmt):
        return {"x": quantize(fmt, rng.uniform(-1, 1, params["n"]))}

    def flops(self, params):
        # per block: D_L (lower triangle), B_L and C_L products, 2 flops each;
        # the state update A^L s is needed for all but the last block
        P, L = 2, BLOCK
        nb = -(-params["n"] // L)
        return 2 * ((L * (L + 1) // 2 + P * L + L * P) * nb + P * P * (nb - 1))

    def emit(self, ctx: Ctx):
        n = ctx.params["n"]
        P, L = 2, BLOCK
        nb = -(-n // L)
        lay, fmt, nc, vec = ctx.layout, ctx.fmt, ctx.spec.n_cores, ctx.vec
        per = 2 if vec else 1
        lay.alloc("x", nb * L // per)
        lay.alloc("cd", L * L)
        lay.alloc("cb", P * L)
        lay.alloc("ca", P * P)
        lay.alloc("cc", L * P)
        lay.alloc("z", nb * L // per)
        lay.alloc("u", nb * P // per)
        lay.alloc("s", nb * P // per)
        lay.alloc("y", nb * L // per)
        flop = {"d": L * (L + 1), "b": 2 * P * L, "a": 2 * P * P, "c": 2 * L * P}
        # phase 1: z = D_L x, u = B_L x
        for e in ctx.ems:
            for k, pad in items(nb, e, nc, skew=1):
                with e.padding(pad):
                    if vec:
                        e.ints(6)
                        xw = e.ld("x", k)
                        bx = [e.iop(xw) for _ in range(L)]        # lane broadcasts
                        for name, out in (("cd", "z"), ("cb", "u")):
                            acc = None
                            for j in range(L):
                                col = e.ld(name, j)
                                acc = e.fp("vmul", fmt, col, bx[j], vec=True) if acc is None else \
                                    e.fp("vfma", fmt, col, bx[j], acc, vec=True)
                            e.st(out, k, acc)
                    else:
                        e.ints(10)
                        for r in range(L):
                            acc = None
                            for j in range(r + 1):
                                c, xv = e.ld("cd", r * L + j), e.ld("x", k * L + j)
                                acc = e.fp("mul", fmt, c, xv) if acc is None else e.fp("fma", fmt, c, xv, acc)
                            e.st("z", k * L + r, acc)
                        for p in range(P):
                            acc = None
                            for j in range(L):
                                c, xv = e.ld("cb", p * L + j), e.ld("x", k * L + j)
                                acc = e.fp("mul", fmt, c, xv) if acc is None else e.fp("fma", fmt, c, xv, acc)
                            e.st("u", k * P + p, acc)
                    e.useful(flop["d"] + flop["b"])
        ctx.bar()
        # phase 2: state recursion on one core
        e = ctx.ems[0]
        for k in range(nb):
            if vec:
                e.ints(5)
                if k + 1 < nb:
                    sw = e.ld("s", k)
                    bs = [e.iop(sw) for _ in range(P)]
                    acc = e.ld("u", k)
                    for j in range(P):
                        acc = e.fp("vfma", fmt, e.ld("ca", j), bs[j], acc, vec=True)
                    e.st("s", k + 1, acc)
            else:
                e.ints(6)
                if k + 1 < nb:
                    for p in range(P):
                        acc = e.ld("u", k * P + p)
                        for j in range(P):
                            c, sv = e.ld("ca", p * P + j), e.ld("s", k * P + j)
                            acc = e.fp("fma", fmt, c, sv, acc)
                        e.st("s", (k + 1) * P + p, acc)
            if k + 1 < nb:
                e.useful(flop["a"])
        ctx.bar()
        # phase 3: y = z + C_L s
        for e in ctx.ems:
            for k, pad in items(nb, e, nc, skew=1):
                with e.padding(pad):
                    if vec:
                        e.ints(6)
                        acc = e.ld("z", k)
                        sw = e.ld("s", k)
                        bs = [e.iop(sw) for _ in range(P)]
                        for j in range(P):
                            acc = e.fp("vfma", fmt, e.ld("cc", j), bs[j], acc, vec=True)
                        e.st("y", k, acc)
                    else:
                        e.ints(6)
                        for r in range(L):
                            acc = e.ld("z", k * L + r)
                            for j in range(P):
                                c, sv = e.ld("cc", r * P + j), e.ld("s", k * P + j)
                                acc = e.fp("fma", fmt, c, sv, acc)
                            e.st("y", k * L + r, acc)
                    e.useful(flop["c"])

    def reference(self, params, data, spec):
        n = params["n"]
        A = Arith(spec.fmt)
        ma, mb, mc, md = (A.q(m) for m in self.form(spec.fmt))
        L, P = BLOCK, 2
        x = A.q(np.concatenate([data["x"], np.zeros(-n % L)])).reshape(-1, L)
        vec = spec.variant.is_vector

        def dot(rowc, cols, acc=None, lo=0):
            for j in range(lo, len(cols)):
                acc = A.mul(rowc[j], cols[j]) if acc is None else A.fma(rowc[j], cols[j], acc)
            return acc

        # column-form vector code multiplies the zero upper triangle of D_L too
        z = np.stack([dot(md[r], [x[:, j] for j in range(L if vec else r + 1)]) for r in range(L)], 1)
        u = np.stack([dot(mb[p], [x[:, j] for j in range(L)]) for p in range(P)], 1)
        s = A.zeros(u.shape)
        for k in range(1, s.shape[0]):
            for p in range(P):
                acc = u[k - 1, p]
                for j in range(P):
                    acc = A.fma(ma[p, j], s[k - 1, j], acc)
                s[k, p] = acc
        y = A.zeros(z.shape)
        for r in range(L):
            acc = z[:, r]
            for j in range(P):
                acc = A.fma(mc[r, j], s[:, j], acc)
            y[:, r] = acc
        return y.ravel()[:n]

    def oracle(self, params, data, spec):
        ma, mb, mc, md = self.form(spec.fmt)
        return block_filter(BlockForm(ma, mb, mc, md), data["x"])
