"""Operand generators that stress rounding, cancellation and special values."""

from __future__ import annotations

import numpy as np

from .formats import FpFormat


def _compose(fmt: FpFormat, sign, efield, frac) -> np.ndarray:
    return (sign << (fmt.width - 1)) | (efield << fmt.sig_bits_stored) | frac


def specials(fmt: FpFormat) -> np.ndarray:
    s = fmt.sig_bits_stored
    one = fmt.bias << s
    vals = [
        0, fmt.sign_mask, one, one | fmt.sign_mask,
        fmt.inf_bits, fmt.inf_bits | fmt.sign_mask, fmt.qnan_bits,
        fmt.inf_bits | 1,                                   # signaling NaN pattern
        (fmt.inf_bits - 1),                                 # largest finite
        1 << s,                                             # smallest normal
        1, fmt.frac_mask,                                   # subnormal extremes
        one + 1, one - 1, (fmt.bias + 1) << s,
    ]
    vals += [v | fmt.sign_mask for v in vals]
    return np.array(sorted(set(v & fmt.mask for v in vals)), dtype=np.int64)


def operands(fmt: FpFormat, n: int, rng: np.random.Generator) -> np.ndarray:
    """Mixture of uniform encodings, clustered exponents, subnormals and specials."""
    out = rng.integers(0, 1 << fmt.width, n, dtype=np.int64)
    pick = rng.random(n)
    sign = rng.integers(0, 2, n, dtype=np.int64)
    frac = rng.integers(0, 1 << fmt.sig_bits_stored, n, dtype=np.int64)
    near = rng.integers(fmt.bias - 6, fmt.bias + 7, n, dtype=np.int64)
    low = rng.integers(0, 4, n, dtype=np.int64)
    high = rng.integers(fmt.exp_max_field - 3, fmt.exp_max_field, n, dtype=np.int64)
    sp = specials(fmt)
    out = np.where(pick < 0.35, _compose(fmt, sign, near, frac), out)
    out = np.where((pick >= 0.35) & (pick < 0.45), _compose(fmt, sign, low, frac), out)
    out = np.where((pick >= 0.45) & (pick < 0.50), _compose(fmt, sign, high, frac), out)
    out = np.where((pick >= 0.50) & (pick < 0.53), sp[rng.integers(0, len(sp), n)], out)
    return out


def cancelling_addend(fmt: FpFormat, product_bits: np.ndarray, rng) -> np.ndarray:
    """Addends within a few ulps of -product, for FMA cancellation cases."""
    delta = rng.integers(-3, 4, product_bits.shape, dtype=np.int64)
    mag = (product_bits.astype(np.int64) & ~fmt.sign_mask & fmt.mask) + delta
    mag = np.clip(mag, 0, fmt.inf_bits - 1)
    return (mag | (~product_bits.astype(np.int64) & fmt.sign_mask)) & fmt.mask
