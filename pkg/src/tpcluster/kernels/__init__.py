"""The eight DSP benchmarks in scalar-F32 and packed 16-bit variants."""

from .common import (DEFAULT_SEED, Benchmark, KernelBuild, KernelSpec, ReferenceResult,
                     Variant, chunk)
from .base import analytic_flops, build, kernel_for, run_reference
from . import conv, dwt, fft, fir, iir, kmeans, matmul, svm  # noqa: F401  (registration)
from .fft import fft_radix2_dif
from .iir import BlockForm, block_filter, iir_block_form

__all__ = [
    "DEFAULT_SEED", "Benchmark", "KernelBuild", "KernelSpec", "ReferenceResult", "Variant",
    "analytic_flops", "build", "chunk", "kernel_for", "run_reference",
    "fft_radix2_dif", "BlockForm", "block_filter", "iir_block_form",
]
