import numpy as np
import pytest
from scipy import signal

from tpcluster.isa import validate
from tpcluster.kernels import (Benchmark, KernelSpec, analytic_flops, block_filter, build,
                               fft_radix2_dif, iir_block_form, run_reference)
from tpcluster.timing import ClusterConfig, simulate
from tpcluster.tpfloat import F16, F32

from conftest import cached_build

KINDS = [b.value for b in Benchmark]
VARIANTS = ["scalar", "f16", "bf16"]


def test_matmul_flops():
    assert analytic_flops(KernelSpec("matmul", size={"m": 16, "n": 16, "k": 16})) == 8192
    assert build(KernelSpec("matmul", size="small")).flops == 8192


def test_fir_flops():
    kb = build(KernelSpec("fir", size={"n": 64, "taps": 8}))
    assert kb.flops == 1024


def test_fir_identity_filter():
    spec = KernelSpec("fir", size={"n": 64, "taps": 1})
    kb = build(spec, inputs={"h": [1.0]})
    res = run_reference(spec, kb)
    assert res.max_rel_error == 0.0
    assert np.array_equal(res.outputs, kb.inputs["x"])


def test_fft_impulse():
    x = np.zeros(8)
    x[0] = 1.0
    for fmt in ("f32", "f16", "bf16"):
        assert np.array_equal(fft_radix2_dif(x, fmt), np.ones(8, dtype=complex))


def test_fft_against_naive_dft():
    rng = np.random.default_rng(11)
    x = rng.uniform(-1, 1, 16) + 1j * rng.uniform(-1, 1, 16)
    k = np.arange(16)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / 16) @ x
    # log2(16) stages of complex rounding, a few ulps each
    for fmt, eps in ((F32, 2.0 ** -24), (F16, 2.0 ** -11)):
        err = np.max(np.abs(fft_radix2_dif(x, fmt) - dft)) / np.max(np.abs(dft))
        assert err < 4 * 4 * eps


def test_fft_rejects_odd_length():
    with pytest.raises(ValueError):
        fft_radix2_dif(np.ones(12), "f32")


def test_iir_pure_fir_block_form():
    b = np.array([0.5, -0.25, 0.125])
    x = np.random.default_rng(1).uniform(-1, 1, 40)
    bf = iir_block_form({"b": b}, 2)
    assert np.allclose(block_filter(bf, x), np.convolve(x, b)[:40], rtol=0, atol=1e-14)


def test_iir_first_order():
    x = np.random.default_rng(2).uniform(-1, 1, 64)
    want = signal.lfilter([1.0], [1.0, -0.5], x)
    bf = iir_block_form({"b": [1.0], "a": [1.0, -0.5]}, 4)
    got = block_filter(bf, x).astype(np.float32)
    assert np.max(np.abs(got - want)) / np.max(np.abs(want)) < 1e-5


def test_iir_block_of_one_is_recurrence():
    bf = iir_block_form({"b": [1.0], "a": [1.0, -0.5]}, 1)
    assert bf.a.shape == (1, 1) and bf.d.shape == (1, 1)
    assert bf.a[0, 0] == 0.5
    x = np.arange(5.0)
    assert np.allclose(block_filter(bf, x), signal.lfilter([1.0], [1.0, -0.5], x))


@pytest.mark.parametrize("taps", [
    {"b": [1.0], "a": [1.0, -1.0]},       # pole on the unit circle
    {"b": [1.0], "a": [1.0, -2.5, 1.0]},
    {"b": [1.0], "a": [0.0, 1.0]},
    {"b": []},
])
def test_iir_rejects_bad_filters(taps):
    with pytest.raises(ValueError):
        iir_block_form(taps, 2)


def test_iir_rejects_empty_block():
    with pytest.raises(ValueError):
        iir_block_form({"b": [1.0]}, 0)


@pytest.mark.parametrize("kind", KINDS)
def test_flops_invariant_across_cores_and_variants(kind):
    want = analytic_flops(KernelSpec(kind, size="small"))
    for v in VARIANTS:
        for nc in (1, 4):
            assert cached_build(kind, v, nc).flops == want


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("variant", VARIANTS)
def test_reference_independent_of_core_count(kind, variant):
    a = run_reference(KernelSpec(kind, variant, 1, "small"), cached_build(kind, variant, 1))
    b = run_reference(KernelSpec(kind, variant, 8, "small"), cached_build(kind, variant, 8))
    assert np.array_equal(a.bits, b.bits)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("variant", VARIANTS)
def test_reference_error_small(kind, variant):
    res = run_reference(KernelSpec(kind, variant, 1, "small"), cached_build(kind, variant, 1))
    bound = {"scalar": 1e-5, "f16": 1e-2, "bf16": 5e-2}[variant]
    assert res.max_rel_error < bound


@pytest.mark.parametrize("kind", KINDS)
def test_streams_validate_and_run(kind):
    kb = cached_build(kind, "f16", 4)
    assert all(validate(p) is None for p in kb.programs)
    ids = kb.programs[0].barrier_ids()
    assert all(p.barrier_ids() == ids for p in kb.programs)
    r = simulate(ClusterConfig(4, 2, 1), kb.programs)
    assert r.total_flops == kb.flops


def test_matmul_f16_error_bound():
    # bound from the float64 oracle: K products, each rounded, accumulated in f16
    spec = KernelSpec("matmul", "f16", 1, {"m": 32, "n": 32, "k": 32})
    res = run_reference(spec)
    assert res.max_rel_error < 32 * 2.0 ** -11


def test_deterministic_build():
    a = build(KernelSpec("svm", "bf16", 2, "small"))
    b = build(KernelSpec("svm", "bf16", 2, "small"))
    assert a.programs == b.programs
    assert all(np.array_equal(a.inputs[k], b.inputs[k]) for k in a.inputs)
    c = build(KernelSpec("svm", "bf16", 2, "small", seed=1))
    assert any(not np.array_equal(a.inputs[k], c.inputs[k]) for k in a.inputs)


def test_unknown_kernel_and_bad_sizes():
    with pytest.raises(ValueError):
        KernelSpec("nosuch")
    with pytest.raises(ValueError):
        build(KernelSpec("fft", size={"n": 48}))
    with pytest.raises(ValueError):
        build(KernelSpec("fir", size="small"), inputs={"nosuch": [1.0]})
