"""Kernel interface and the build / run_reference entry points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .common import (Arith, Barriers, Benchmark, Emitter, KernelBuild, KernelSpec, Layout,
                     ReferenceResult, compare, quantize)
from ..tpfloat.formats import F32


@dataclass
class Ctx:
    spec: KernelSpec
    params: dict
    data: dict
    layout: Layout
    ems: list[Emitter]
    bar: Barriers

    @property
    def fmt(self):
        return self.spec.fmt

    @property
    def vec(self) -> bool:
        return self.spec.variant.is_vector


class Kernel:
    """One benchmark: sizes, data, stream emission and reference arithmetic."""

    kind: ClassVar[Benchmark]
    sizes: ClassVar[dict[str, dict]]
    # data-dependent streams need the functional reference before emission
    needs_reference: ClassVar[bool] = False
    f32_inputs: ClassVar[frozenset] = frozenset()

    def resolve(self, size) -> dict:
        if isinstance(size, str):
            if size not in self.sizes:
                raise ValueError(f"unknown size preset {size!r} for {self.kind.value}")
            return dict(self.sizes[size])
        params = dict(self.sizes["desk"])
        unknown = set(size) - set(params)
        if unknown:
            raise ValueError(f"unknown {self.kind.value} parameters: {sorted(unknown)}")
        params.update(size)
        return params

    def generate(self, params: dict, rng: np.random.Generator, fmt) -> dict:
        raise NotImplementedError

    def emit(self, ctx: Ctx) -> None:
        raise NotImplementedError

    def reference(self, params: dict, data: dict, spec: KernelSpec) -> np.ndarray:
        """Output bit patterns computed with the variant's arithmetic."""
        raise NotImplementedError

    def oracle(self, params: dict, data: dict, spec: KernelSpec) -> np.ndarray:
        """float64 evaluation with the same algorithm and operation order."""
        raise NotImplementedError

    def flops(self, params: dict) -> int:
        raise NotImplementedError

    def out_fmt(self, spec: KernelSpec):
        return spec.fmt


_REGISTRY: dict[Benchmark, Kernel] = {}


def register(cls):
    _REGISTRY[cls.kind] = cls()
    return cls


def kernel_for(kind) -> Kernel:
    return _REGISTRY[Benchmark.parse(kind)]


def build(spec: KernelSpec, inputs: dict | None = None) -> KernelBuild:
    """Generate per-core instruction streams and reference data for ``spec``."""
    k = kernel_for(spec.kind)
    params = k.resolve(spec.size)
    rng = np.random.default_rng(spec.seed)
    data = k.generate(params, rng, spec.fmt)
    for name, v in (inputs or {}).items():
        if name not in data:
            raise ValueError(f"{spec.kind.value} has no input named {name!r}")
        v = np.asarray(v, dtype=np.float64)
        if v.shape != data[name].shape:
            raise ValueError(f"input {name} must have shape {data[name].shape}, got {v.shape}")
        data[name] = quantize(F32 if name in k.f32_inputs else spec.fmt, v)
    layout = Layout()
    ems = [Emitter(c, layout) for c in range(spec.n_cores)]
    ctx = Ctx(spec, params, data, layout, ems, Barriers(ems))
    if k.needs_reference:
        data["_ref_bits"] = k.reference(params, data, spec)
    k.emit(ctx)
    programs = [e.program() for e in ems]
    total = sum(p.flops for p in programs)
    expected = k.oracle(params, data, spec)
    return KernelBuild(spec, params, programs, total, data, layout, expected)


def run_reference(spec: KernelSpec, kb: KernelBuild | None = None) -> ReferenceResult:
    """Evaluate the kernel with tpfloat arithmetic and compare against float64."""
    k = kernel_for(spec.kind)
    if kb is None:
        kb = build(spec)
    bits = kb.inputs.get("_ref_bits")
    if bits is None:
        bits = k.reference(kb.params, kb.inputs, spec)
    oracle = kb.expected if kb.expected is not None else k.oracle(kb.params, kb.inputs, spec)
    return compare(np.asarray(bits), k.out_fmt(spec), np.asarray(oracle, dtype=np.float64))


def analytic_flops(spec: KernelSpec) -> int:
    k = kernel_for(spec.kind)
    return k.flops(k.resolve(spec.size))


__all__ = ["Ctx", "Kernel", "register", "kernel_for", "build", "run_reference", "analytic_flops",
           "Arith"]
