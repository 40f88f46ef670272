import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpcluster.isa import Program, barrier, divsqrt, end, fp_op, int_op, load, store
from tpcluster.kernels import KernelSpec, build
from tpcluster.timing import (COUNTER_FIELDS, ClusterConfig, SimulationError, arbitrate,
                              canonical_configs, counters_csv, fpu_map, simulate, tcdm_bank)


def prog(core, body):
    return Program(core, tuple(body) + (end(),))


def independent_adds(n):
    return [fp_op("add", "f32", i + 1) for i in range(n)]


def test_config_ids():
    cfgs = canonical_configs()
    assert len(cfgs) == 18
    assert len({c.config_id for c in cfgs}) == 18
    c = ClusterConfig.from_id("16c4f2p")
    assert (c.n_cores, c.n_fpus, c.pipeline_stages, c.n_tcdm_banks) == (16, 4, 2, 32)
    assert c.is_canonical
    for bad in ("16c5f1p", "8c8f3p", "x"):
        with pytest.raises(ValueError):
            ClusterConfig.from_id(bad)


@pytest.mark.parametrize("args,want", [((4, 8, 4), 0), ((3, 8, 8), 3), ((9, 16, 4), 1)])
def test_fpu_map(args, want):
    assert fpu_map(*args) == want


@pytest.mark.parametrize("addr,want", [(0, 0), (4, 1), (68, 1)])
def test_tcdm_bank(addr, want):
    assert tcdm_bank(addr, 16) == want


def test_tcdm_bank_unaligned():
    with pytest.raises(ValueError):
        tcdm_bank(6, 16)


def test_arbitrate():
    assert arbitrate({0, 4}, 0) == 4
    assert arbitrate({2}, 2) == 2
    assert arbitrate({1, 3}, 3) == 1
    with pytest.raises(ValueError):
        arbitrate(set(), 0)


def test_dependent_add_stalls_once():
    r = simulate(ClusterConfig(1, 1, 1), [prog(0, [fp_op("add", "f32", 1), fp_op("add", "f32", 2, 1)])],
                 trace=True)
    assert r.trace[0] == [(0, 1), (1, 3)]
    assert r.per_core[0].fpu_stall == 1


def test_divsqrt_is_exclusive():
    def body(core):
        a = 64 * core
        return [load(1, a), load(2, a + 4), divsqrt("div", "f32", 3, 1, 2), store(a + 8, 3)]
    r = simulate(ClusterConfig(2, 2, 1), [prog(0, body(0)), prog(1, body(1))], trace=True)
    first, second = r.trace[0][2][1], r.trace[1][2][1]
    assert second == first + 11
    # each store issues once its div result is back
    assert r.trace[0][3][1] == first + 11
    assert r.trace[1][3][1] == second + 11


def test_shared_fpu_contention():
    # alternating grants: every op waits one cycle for its partner's grant
    r = simulate(ClusterConfig(2, 1, 1), [prog(0, independent_adds(100)), prog(1, independent_adds(100))])
    assert [c.fpu_contention for c in r.per_core] == [99, 100]
    assert [c.active for c in r.per_core] == [100, 100]


def test_round_robin_fairness():
    progs = [prog(c, independent_adds(1000)) for c in range(2)]
    r = simulate(ClusterConfig(2, 1, 0), progs, trace=True, record_grants=True)
    issued = [sum(1 for _, t in r.trace[c] if t <= 1000) for c in range(2)]
    assert sum(issued) == 1000
    assert abs(issued[0] - issued[1]) <= 1
    assert r.fpu_grants == {0: [1000, 1000]}


@pytest.mark.parametrize("stages", [0, 1])
def test_fir_closed_form(stages):
    # per output: 1 int + T x (2 loads + 1 FP) + 1 store, and the store waits
    # ``stages`` cycles for the last FMA; the chain itself never stalls
    # because each FMA is three instructions after its predecessor.  End
    # takes the final cycle.
    n, t = 64, 8
    kb = build(KernelSpec("fir", "scalar", 1, {"n": n, "taps": t}))
    r = simulate(ClusterConfig(1, 1, stages), kb.programs)
    assert r.elapsed_cycles == n * (3 * t + 2 + stages) + 1
    assert r.per_core[0].fpu_stall == n * stages


def test_wb_conflict_only_with_two_stages():
    body = [fp_op("add", "f32", 1), int_op(2), int_op(3), int_op(4), fp_op("add", "f32", 5, 1)]
    got = {s: simulate(ClusterConfig(1, 1, s), [prog(0, body)]).per_core[0].fpu_wb_stall for s in (0, 1, 2)}
    assert got[0] == got[1] == 0
    assert got[2] > 0


def test_barrier_idles_early_core():
    progs = [prog(0, [int_op(1), barrier(0)]), prog(1, [int_op(i + 1) for i in range(10)] + [barrier(0)])]
    r = simulate(ClusterConfig(2, 2, 1), progs)
    assert r.per_core[0].idle >= 9
    assert all(c.total == r.elapsed_cycles for c in r.per_core)


def test_inconsistent_barriers():
    progs = [prog(0, [barrier(0), barrier(1)]), prog(1, [barrier(0), barrier(2)])]
    with pytest.raises(SimulationError, match="barrier id 1"):
        simulate(ClusterConfig(2, 2, 1), progs)


def test_l2_latency():
    from tpcluster.isa import Region
    r = simulate(ClusterConfig(1, 1, 1), [prog(0, [load(1, 0, Region.L2)])])
    assert r.per_core[0].l2_stall == 14
    assert r.elapsed_cycles == 16


def test_program_count_checked():
    with pytest.raises(SimulationError):
        simulate(ClusterConfig(2, 2, 1), [prog(0, [])])


def test_counters_csv():
    r = simulate(ClusterConfig(2, 1, 1), [prog(c, independent_adds(3)) for c in range(2)])
    lines = counters_csv(r).splitlines()
    assert lines[0] == "core," + ",".join(COUNTER_FIELDS)
    assert len(lines) == 3


@st.composite
def cluster(draw, divsqrt_ok=True):
    n = draw(st.sampled_from([1, 2, 4]))
    progs = []
    for c in range(n):
        body, defined = [], []
        for _ in range(draw(st.integers(0, 25))):
            k = draw(st.integers(0, 4))
            r = len(defined) + 1
            src = tuple(draw(st.lists(st.sampled_from(defined), max_size=2))) if defined else ()
            if k == 0:
                body.append(int_op(r, *src))
            elif k == 1:
                body.append(load(r, 4 * draw(st.integers(0, 15))))
            elif k == 2 and defined:
                body.append(store(4 * draw(st.integers(0, 15)), defined[-1]))
                continue
            elif k == 3:
                body.append(fp_op("fma", "f16", r, *src))
            elif divsqrt_ok:
                body.append(divsqrt("sqrt", "bf16", r, *src[:1]))
            else:
                body.append(fp_op("mul", "f32", r, *src))
            defined.append(r)
        progs.append(prog(c, body + [barrier(0)]))
    return n, progs


@given(data=cluster(), stages=st.sampled_from([0, 1, 2]), share=st.sampled_from([1, 2, 4]))
def test_conservation_and_determinism(data, stages, share):
    n, progs = data
    cfg = ClusterConfig(n, max(1, n // share), stages)
    r = simulate(cfg, progs)
    for c in r.per_core:
        assert c.conserved()
        assert c.total == r.elapsed_cycles
    assert simulate(cfg, progs) == r


@given(data=cluster(divsqrt_ok=False), stages=st.sampled_from([0, 1]))
def test_private_fpus_never_contend(data, stages):
    # the DIV-SQRT unit stays cluster-wide, so only pipelined ops here
    n, progs = data
    r = simulate(ClusterConfig(n, n, stages), progs)
    assert all(c.fpu_contention == 0 for c in r.per_core)


def test_more_fpus_never_hurt_on_kernels():
    for kind in ("matmul", "kmeans"):
        kb = build(KernelSpec(kind, "f16", 8, "small"))
        cyc = [simulate(ClusterConfig(8, f, 1), kb.programs).elapsed_cycles for f in (8, 4, 2)]
        assert cyc == sorted(cyc)
