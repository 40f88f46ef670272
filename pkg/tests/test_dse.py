import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpcluster import dse
from tpcluster.dse import CalibrationError, CalibrationRecord, MetricRow, Provenance, Voltage


def rec(cid, v, f, p, a, prov="estimated"):
    return CalibrationRecord(cid, v, f, p, a, prov)


FULL = [rec("16c16f1p", "0.80", 370, 110.0, 2.10), rec("16c16f1p", "0.65", 300, 40.0, 2.10)]


def test_perf_anchor():
    # 7.73 flop/cycle over the cluster at 370 MHz
    row = dse.metrics(1000, 7730, FULL)
    assert row.perf_gflops == pytest.approx(2.86, abs=0.005)
    assert row.status == "ok"
    assert row.energy_eff_gflops_per_w == pytest.approx(7.73 * 300 / 40.0)


def test_area_identity():
    row = dse.partial_metrics(1000, 1000 * 1.74 / 0.43, "8c4f1p", dse.load_calibration())
    assert row.perf_gflops == pytest.approx(1.74)
    assert round(row.area_eff_gflops_per_mm2, 2) in (1.79, 1.78)
    assert row.area_eff_gflops_per_mm2 * row.area_mm2 == row.perf_gflops


def test_zero_flops():
    row = dse.metrics(500, 0, FULL)
    assert (row.perf_gflops, row.energy_eff_gflops_per_w, row.area_eff_gflops_per_mm2) == (0, 0, 0)
    with pytest.raises(ValueError):
        dse.metrics(0, 10, FULL)


def test_missing_corner_named():
    with pytest.raises(CalibrationError) as ei:
        dse.metrics(100, 100, FULL[:1])
    assert ei.value.config_id == "16c16f1p"
    assert ei.value.voltage is Voltage.V065
    assert "16c16f1p" in str(ei.value) and "0.65" in str(ei.value)


def test_mixed_configs_rejected():
    with pytest.raises(ValueError):
        dse.metrics(100, 100, FULL + [rec("8c8f1p", "0.80", 400, 50, 1.0)])


def test_partial_metrics_statuses():
    calib = dse.load_calibration()
    hi = dse.partial_metrics(100, 700, "16c16f1p", calib)
    lo = dse.partial_metrics(100, 700, "16c16f0p", calib)
    none = dse.partial_metrics(100, 700, "8c8f2p", calib)
    assert hi.status == lo.status == "partial-calibration"
    assert math.isnan(hi.energy_eff_gflops_per_w) and not math.isnan(hi.perf_gflops)
    assert math.isnan(lo.perf_gflops) and not math.isnan(lo.energy_eff_gflops_per_w)
    assert none.status == "no-calibration" and math.isnan(none.perf_gflops)
    assert hi.provenance == "paper"


def test_shipped_table():
    calib = dse.load_calibration()
    assert {(r.config_id, r.voltage.value) for r in calib} == {
        ("16c16f0p", "0.65"), ("16c16f1p", "0.80"), ("8c4f1p", "0.80")}
    assert all(r.provenance is Provenance.PAPER for r in calib)


def test_calibration_round_trip():
    text = dse.calibration_csv(FULL)
    assert dse.read_calibration(text) == FULL


@pytest.mark.parametrize("body", [
    "16c16f1p,0.80,370,,2.1,paper\n",
    "16c16f1p,0.80,370,100,2.1,paper\n16c16f1p,0.8,370,100,2.1,paper\n",
    "16c16f1p,0.90,370,100,2.1,paper\n",
    "16c16f1p,0.80,-1,100,2.1,paper\n",
    "16c3f1p,0.80,370,100,2.1,paper\n",
])
def test_bad_calibration(body):
    with pytest.raises(ValueError):
        dse.read_calibration(",".join(dse.CALIB_HEADER) + "\n" + body)


def test_template_covers_design_space():
    lines = dse.calib_template(dse.load_calibration()).splitlines()
    assert len(lines) == 1 + 36
    assert "16c16f1p,0.80,370,110,2.1,paper" in lines
    # the blank rows parse back to just the filled ones
    assert len(dse.read_calibration("\n".join(lines))) == 3


def rows_for(values, metric="perf_gflops", bench="fir"):
    return [MetricRow(bench, "scalar", cid, 1, 1, **{metric: v})
            for cid, v in zip(("8c8f0p", "8c8f1p", "8c8f2p"), values)]


def test_normalize_examples():
    s = dse.normalize_summary(rows_for([1.0, 2.0, 3.0]), ["perf_gflops"])
    assert [s[c]["perf_gflops"] for c in ("8c8f0p", "8c8f1p", "8c8f2p")] == [0.0, 0.5, 1.0]
    s = dse.normalize_summary(rows_for([4.0, 4.0, 4.0]), ["perf_gflops"])
    assert all(v["perf_gflops"] == 0.0 for v in s.values())
    with pytest.raises(ValueError):
        dse.normalize_summary([])


def test_normalize_averages_benchmarks():
    rows = rows_for([1.0, 2.0, 3.0]) + rows_for([3.0, 1.0, 2.0], bench="iir")
    s = dse.normalize_summary(rows, ["perf_gflops"])
    assert s["8c8f0p"]["perf_gflops"] == 0.5
    assert s["8c8f1p"]["perf_gflops"] == 0.25


pos = st.floats(0.01, 1e4, allow_nan=False)


@given(a=st.lists(pos, min_size=3, max_size=3), b=st.lists(pos, min_size=3, max_size=3),
       k=st.floats(0.01, 1e3))
def test_scale_invariance(a, b, k):
    # identical normalized summaries mean every argmax/argmin is unchanged
    base = rows_for(a) + rows_for(b, bench="iir")
    scaled = rows_for([k * v for v in a]) + rows_for(b, bench="iir")
    s0 = dse.normalize_summary(base, ["perf_gflops"])
    s1 = dse.normalize_summary(scaled, ["perf_gflops"])
    for c in s0:
        assert s1[c]["perf_gflops"] == pytest.approx(s0[c]["perf_gflops"], abs=1e-9)


def test_small_sweep_structure():
    cfgs = ["8c8f1p", "8c4f1p", "16c16f1p"]
    rows = dse.sweep(["fir", "kmeans"], cfgs, variants=["scalar", "f16"], size="small")
    assert len(rows) == 2 * 2 * 3
    assert [r.key() for r in rows] == sorted((r.key() for r in rows),
                                             key=lambda k: (k[0], k[1], dse._cfg_order(k[2])))
    by = {r.key(): r for r in rows}
    assert by[("fir", "scalar", "8c4f1p")].status == "partial-calibration"
    assert by[("fir", "scalar", "8c8f1p")].status == "no-calibration"
    for r in rows:
        assert r.cycles > 0 and r.flops > 0
        if not math.isnan(r.area_eff_gflops_per_mm2):
            assert r.area_eff_gflops_per_mm2 * r.area_mm2 == pytest.approx(r.perf_gflops, rel=1e-15)
    # more FPUs never lower performance at equal cores and stages
    assert by[("fir", "f16", "8c8f1p")].cycles <= by[("fir", "f16", "8c4f1p")].cycles


def test_sweep_deterministic_csv():
    args = (["iir"], ["8c8f1p", "8c4f1p"])
    a = dse.results_csv(dse.sweep(*args, variants=["bf16"], size="small"))
    b = dse.results_csv(dse.sweep(*args, variants=["bf16"], size="small", jobs=2))
    assert a == b
    assert a.splitlines()[0].split(",")[:3] == ["benchmark", "variant", "config_id"]


def test_sweep_error_cells():
    rows = dse.sweep(["fft"], ["8c8f1p"], variants=["scalar"], size={"n": 12})
    assert rows[0].status.startswith("error")


def test_markdown_boxes_best():
    rows = rows_for([1.0, 3.0, 2.0])
    md = dse.results_markdown(rows)
    assert "| fir | scalar | 1 | [3] | 2 |" in md
    assert "| NAVG | | 0 | 1 | 0.5 |" in md
