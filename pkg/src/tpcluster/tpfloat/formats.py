"""Floating-point format descriptors for the three transprecision formats."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class FormatKind(enum.Enum):
    F32 = "f32"
    F16 = "f16"
    BF16 = "bf16"


@dataclass(frozen=True)
class FpFormat:
    kind: FormatKind
    exp_bits: int
    sig_bits_stored: int

    def __post_init__(self):
        if self.width not in (16, 32):
            raise ValueError(f"unsupported format width {self.width}")

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def width(self) -> int:
        return 1 + self.exp_bits + self.sig_bits_stored

    @property
    def precision(self) -> int:
        """Significand bits including the hidden bit."""
        return self.sig_bits_stored + 1

    @property
    def bias(self) -> int:
        return (1 << (self.exp_bits - 1)) - 1

    @property
    def emin(self) -> int:
        return 1 - self.bias

    @property
    def emax(self) -> int:
        return self.bias

    @property
    def exp_max_field(self) -> int:
        return (1 << self.exp_bits) - 1

    @property
    def sign_mask(self) -> int:
        return 1 << (self.width - 1)

    @property
    def frac_mask(self) -> int:
        return (1 << self.sig_bits_stored) - 1

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1

    @property
    def inf_bits(self) -> int:
        return self.exp_max_field << self.sig_bits_stored

    @property
    def qnan_bits(self) -> int:
        """Canonical quiet NaN: positive, all-ones exponent, MSB of fraction set."""
        return self.inf_bits | (1 << (self.sig_bits_stored - 1))

    @property
    def is_16bit(self) -> bool:
        return self.width == 16

    def __repr__(self) -> str:
        return f"FpFormat({self.name})"


F32 = FpFormat(FormatKind.F32, 8, 23)
F16 = FpFormat(FormatKind.F16, 5, 10)
BF16 = FpFormat(FormatKind.BF16, 8, 7)

FORMATS = {f.name: f for f in (F32, F16, BF16)}


def get_format(fmt) -> FpFormat:
    """Accept an FpFormat, a FormatKind or a name such as ``"bf16"``."""
    if isinstance(fmt, FpFormat):
        return fmt
    if isinstance(fmt, FormatKind):
        return FORMATS[fmt.value]
    try:
        return FORMATS[str(fmt).lower()]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}") from None
