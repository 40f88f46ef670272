"""Bit-exact float32 / float16 / bfloat16 arithmetic with 2-way packed SIMD."""

from .formats import BF16, F16, F32, FORMATS, FormatKind, FpFormat, get_format
from .scalar import (
    FpUsageError,
    Packed16,
    RoundMode,
    Scalar,
    cast_and_pack,
    convert,
    fp_arith,
    fp_cmp,
    fp_divsqrt,
    fp_fma,
    fp_fma_widen,
    shuffle,
    simd_op,
    vfdotp,
)

__all__ = [
    "BF16", "F16", "F32", "FORMATS", "FormatKind", "FpFormat", "get_format",
    "FpUsageError", "Packed16", "RoundMode", "Scalar",
    "cast_and_pack", "convert", "fp_arith", "fp_cmp", "fp_divsqrt", "fp_fma",
    "fp_fma_widen", "shuffle", "simd_op", "vfdotp",
]
