import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpcluster.tpfloat import (BF16, F16, F32, FpUsageError, Packed16, RoundMode, Scalar,
                               cast_and_pack, convert, fp_arith, fp_cmp, fp_divsqrt, fp_fma,
                               fp_fma_widen, get_format, shuffle, simd_op, vfdotp)
from tpcluster.tpfloat import _core, oracle

FMTS = [F32, F16, BF16]


def S(fmt, bits):
    return Scalar(fmt, bits)


def bits_of(fmt):
    return st.integers(0, fmt.mask)


# --- format descriptors ---------------------------------------------------

def test_format_geometry():
    assert (F32.exp_bits, F32.sig_bits_stored, F32.width) == (8, 23, 32)
    assert (F16.exp_bits, F16.sig_bits_stored, F16.width) == (5, 10, 16)
    assert (BF16.exp_bits, BF16.sig_bits_stored, BF16.width) == (8, 7, 16)
    assert get_format("bf16") is BF16
    with pytest.raises(ValueError):
        get_format("f8")


# --- worked examples ------------------------------------------------------

def test_add_examples():
    assert fp_arith("add", F32, S(F32, 0x3F800000), S(F32, 0x40000000)).bits == 0x40400000
    assert fp_arith("add", F16, S(F16, 0x3C00), S(F16, 0x3C00)).bits == 0x4000


def test_fma_examples():
    two, three, one = (Scalar.from_float(F32, v) for v in (2.0, 3.0, 1.0))
    assert fp_fma(F32, two, three, one).to_float() == 7.0
    x, c = Scalar.from_float(F16, 3.25), Scalar.from_float(F16, -1.5)
    assert fp_fma(F16, x, S(F16, 0), c).bits == c.bits


def test_fma_is_fused():
    # (1 + 2^-12)^2 - (1 + 2^-11) = 2^-24 exactly; mul-then-add loses it
    a = S(F32, 0x3F800800)
    c = S(F32, 0xBF801000)
    fused = fp_fma(F32, a, a, c)
    split = fp_arith("add", F32, fp_arith("mul", F32, a, a), c)
    assert fused.bits == 0x33800000
    assert split.bits == 0
    assert fused != split


def test_fma_widen_examples():
    three = S(F16, 0x4200)
    assert fp_fma_widen(F16, three, three, S(F32, 0)).bits == 0x41100000
    nan = S(BF16, BF16.qnan_bits)
    assert fp_fma_widen(BF16, nan, S(BF16, 0x3F80), S(F32, 0)).is_nan
    with pytest.raises(FpUsageError):
        fp_fma_widen(F32, S(F32, 0), S(F32, 0), S(F32, 0))


def test_divsqrt_examples():
    one, two = Scalar.from_float(F32, 1.0), Scalar.from_float(F32, 2.0)
    assert fp_divsqrt("div", F32, one, two).to_float() == 0.5
    assert fp_divsqrt("sqrt", F16, S(F16, 0x4400)).bits == 0x4000
    assert fp_divsqrt("sqrt", F32, Scalar.from_float(F32, -4.0)).is_nan
    inf = fp_divsqrt("div", F32, Scalar.from_float(F32, -1.0), S(F32, 0))
    assert inf.bits == 0xFF800000
    with pytest.raises(FpUsageError):
        fp_divsqrt("div", F32, one)


# frozen against the host float64 -> narrow casts (numpy / ml_dtypes)
@pytest.mark.parametrize("op,fmt,args,want", [
    ("div", F32, (0x3F800000, 0x40400000), 0x3EAAAAAB),    # 1/3
    ("div", F16, (0x3C00, 0x4200), 0x3555),
    ("div", BF16, (0x3F80, 0x4040), 0x3EAB),
    ("sqrt", F32, (0x40000000,), 0x3FB504F3),              # sqrt(2)
    ("sqrt", F16, (0x4000,), 0x3DA8),
])
def test_frozen_divsqrt(op, fmt, args, want):
    assert fp_divsqrt(op, fmt, *(S(fmt, a) for a in args)).bits == want


def test_convert_examples():
    assert convert(Scalar.from_float(F32, 1.0), F16).bits == 0x3C00
    assert convert(S(F32, 0x40490FDB), BF16).bits == 0x4049
    assert convert(S(F16, 0x7C00), F32).bits == 0x7F800000
    assert convert(Scalar.from_float(F32, 1e6), F16).bits == 0x7C00
    assert convert(Scalar.from_float(F32, -1e6), F16).bits == 0xFC00


def test_convert_ties_to_even():
    # 1 + 2^-11 sits halfway between 1.0 and the next binary16 value
    assert convert(S(F32, 0x3F801000), F16).bits == 0x3C00
    assert convert(S(F32, 0x3F803000), F16).bits == 0x3C02
    # bfloat16: lower half exactly 0x8000 is a tie
    assert convert(S(F32, 0x3F808000), BF16).bits == 0x3F80
    assert convert(S(F32, 0x3F818000), BF16).bits == 0x3F82


def test_subnormals_kept():
    tiny = S(F16, 0x0001)                       # 2^-24
    assert convert(tiny, F32).to_float() == 2.0 ** -24
    assert fp_arith("add", F16, tiny, tiny).bits == 0x0002
    assert fp_arith("mul", F16, S(F16, 0x0400), S(F16, 0x3800)).bits == 0x0200


def test_cast_and_pack():
    a, b = Scalar.from_float(F32, 1.5), Scalar.from_float(F32, -2.0)
    v = cast_and_pack(a, b, F16)
    assert (v.lane0, v.lane1) == (0x3E00, 0xC000)
    assert v.word == 0xC0003E00
    v = cast_and_pack(Scalar.from_float(F32, 1e6), S(F32, 0), F16)
    assert (v.lane0, v.lane1) == (0x7C00, 0x0000)
    with pytest.raises(FpUsageError):
        cast_and_pack(a, b, F32)


def test_simd_examples():
    va = Packed16.from_floats(F16, 1.0, 2.0)
    vb = Packed16.from_floats(F16, 3.0, 4.0)
    assert simd_op("vadd", va, vb).to_floats() == (4.0, 6.0)
    zero = Packed16(F16, 0, 0)
    assert simd_op("vfma", va, vb, zero) == simd_op("vmul", va, vb)
    with pytest.raises(FpUsageError):
        simd_op("vadd", va, Packed16.from_floats(BF16, 1.0, 1.0))


def test_vfdotp_examples():
    va = Packed16.from_floats(F16, 1.0, 2.0)
    vb = Packed16.from_floats(F16, 3.0, 4.0)
    assert vfdotp(va, vb, Scalar.from_float(F32, 0.5)).to_float() == 11.5
    nan = Packed16(F16, F16.qnan_bits, 0x3C00)
    assert vfdotp(nan, vb, S(F32, 0)).is_nan


def test_shuffle_examples():
    va, vb = Packed16(F16, 0x1111, 0x2222), Packed16(F16, 0x3333, 0x4444)
    assert shuffle(va, vb, (0, 1)) == va
    assert shuffle(va, vb, (1, 0)) == Packed16(F16, 0x2222, 0x1111)
    assert shuffle(va, vb, (1, 2)) == Packed16(F16, 0x2222, 0x3333)
    with pytest.raises(FpUsageError):
        shuffle(va, vb, (0, 4))


def test_cmp_examples():
    assert fp_cmp("lt", F16, Scalar.from_float(F16, 1.0), Scalar.from_float(F16, 2.0))
    assert fp_cmp("eq", F32, S(F32, 0), S(F32, 0x80000000))
    nan = S(F32, F32.qnan_bits)
    assert not any(fp_cmp(r, F32, nan, nan) for r in ("eq", "lt", "le"))


def test_usage_errors():
    with pytest.raises(FpUsageError):
        fp_arith("add", F32, S(F32, 0), S(F16, 0))
    with pytest.raises(FpUsageError):
        Scalar(F16, 0x10000)
    with pytest.raises(FpUsageError):
        Packed16(F32, 0, 0)
    with pytest.raises(FpUsageError):
        fp_arith("add", F32, S(F32, 0), S(F32, 0), rm="rtz")
    assert fp_arith("add", F32, S(F32, 0), S(F32, 0), rm=RoundMode.RNE).bits == 0


def test_nan_is_canonical():
    snan = S(F32, 0x7F800001)
    for fmt in FMTS:
        got = fp_arith("add", fmt, S(fmt, fmt.inf_bits), S(fmt, fmt.inf_bits | fmt.sign_mask))
        assert got.bits == fmt.qnan_bits
    assert fp_arith("mul", F32, snan, S(F32, 0x3F800000)).bits == F32.qnan_bits


# --- exhaustive conversion round trips ------------------------------------

@pytest.mark.parametrize("fmt", [F16, BF16])
def test_round_trip_all_encodings(fmt):
    v = np.arange(1 << 16, dtype=np.int64)
    wide = _core.convert(fmt, F32, v)
    assert np.array_equal(wide, oracle.convert(fmt, F32, v))
    back = _core.convert(F32, fmt, wide)
    keep = ~_core.is_nan(fmt, v).astype(bool)
    assert np.array_equal(back[keep], v[keep])
    assert np.all(back[~keep] == fmt.qnan_bits)


# --- properties -----------------------------------------------------------

@pytest.mark.parametrize("fmt", FMTS)
@pytest.mark.parametrize("op", ["add", "mul"])
@given(data=st.data())
def test_commutative(fmt, op, data):
    a, b = data.draw(bits_of(fmt)), data.draw(bits_of(fmt))
    assert fp_arith(op, fmt, S(fmt, a), S(fmt, b)) == fp_arith(op, fmt, S(fmt, b), S(fmt, a))


@pytest.mark.parametrize("fmt", FMTS)
@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
@given(data=st.data())
def test_binary_ops_match_oracle(fmt, op, data):
    a, b = data.draw(bits_of(fmt)), data.draw(bits_of(fmt))
    fn = fp_divsqrt if op == "div" else fp_arith
    got = fn(op, fmt, S(fmt, a), S(fmt, b)).bits
    assert got == int(getattr(oracle, op)(fmt, np.array([a]), np.array([b]))[0])


@pytest.mark.parametrize("fmt", FMTS)
@given(data=st.data())
def test_fma_matches_oracle(fmt, data):
    a, b, c = (data.draw(bits_of(fmt)) for _ in range(3))
    got = fp_fma(fmt, S(fmt, a), S(fmt, b), S(fmt, c)).bits
    assert got == int(oracle.fma(fmt, *(np.array([x]) for x in (a, b, c)))[0])


@pytest.mark.parametrize("fmt", [F16, BF16])
@given(data=st.data())
def test_fma_widen_equals_convert_then_fma(fmt, data):
    a, b = data.draw(bits_of(fmt)), data.draw(bits_of(fmt))
    c = data.draw(bits_of(F32))
    got = fp_fma_widen(fmt, S(fmt, a), S(fmt, b), S(F32, c))
    want = fp_fma(F32, convert(S(fmt, a), F32), convert(S(fmt, b), F32), S(F32, c))
    assert got == want


@pytest.mark.parametrize("fmt", [F16, BF16])
@pytest.mark.parametrize("op", ["vadd", "vsub", "vmul", "vfma"])
@given(data=st.data())
def test_simd_lanes_match_scalar(fmt, op, data):
    lanes = [data.draw(st.integers(0, 0xFFFF)) for _ in range(6)]
    va, vb, vc = (Packed16(fmt, lanes[i], lanes[i + 1]) for i in (0, 2, 4))
    out = simd_op(op, va, vb, vc if op == "vfma" else None)
    for k, (x, y, z) in enumerate(zip(va.lanes(), vb.lanes(), vc.lanes())):
        want = fp_fma(fmt, x, y, z) if op == "vfma" else fp_arith(op[1:], fmt, x, y)
        assert (out.lane0, out.lane1)[k] == want.bits


@pytest.mark.parametrize("fmt", [F16, BF16])
@given(data=st.data())
def test_vfdotp_two_step_order(fmt, data):
    lanes = [data.draw(st.integers(0, 0xFFFF)) for _ in range(4)]
    c = S(F32, data.draw(bits_of(F32)))
    va, vb = Packed16(fmt, *lanes[:2]), Packed16(fmt, *lanes[2:])
    p0 = fp_fma_widen(fmt, va.lanes()[0], vb.lanes()[0], c)
    assert vfdotp(va, vb, c) == fp_fma_widen(fmt, va.lanes()[1], vb.lanes()[1], p0)


@pytest.mark.parametrize("fmt", [F16, BF16])
@given(a=st.integers(0, 0xFFFFFFFF), b=st.integers(0, 0xFFFFFFFF))
def test_cast_and_pack_is_two_conversions(fmt, a, b):
    v = cast_and_pack(S(F32, a), S(F32, b), fmt)
    assert v.lane0 == convert(S(F32, a), fmt).bits
    assert v.lane1 == convert(S(F32, b), fmt).bits


@pytest.mark.parametrize("fmt", FMTS)
@given(data=st.data())
def test_cmp_matches_oracle(fmt, data):
    a, b = data.draw(bits_of(fmt)), data.draw(bits_of(fmt))
    for rel in ("eq", "lt", "le"):
        want = bool(oracle.compare(rel, fmt, np.array([a]), np.array([b]))[0])
        assert fp_cmp(rel, fmt, S(fmt, a), S(fmt, b)) == want


@given(a=st.integers(0, 0xFFFF))
def test_sqrt_matches_oracle_f16(a):
    assert fp_divsqrt("sqrt", F16, S(F16, a)).bits == int(oracle.sqrt(F16, np.array([a]))[0])


def test_pure_functions():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 1 << 32, 1000)
    b = rng.integers(0, 1 << 32, 1000)
    assert np.array_equal(_core.add(F32, a, b), _core.add(F32, a.copy(), b.copy()))
