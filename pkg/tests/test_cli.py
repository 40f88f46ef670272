import csv
import io

import pytest

from tpcluster.cli import main
from tpcluster.timing import COUNTER_FIELDS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def elapsed(out):
    counters, _, result = out.partition("\n\n")
    return int(next(csv.DictReader(io.StringIO(result)))["cycles"])


def test_run_fir(capsys):
    code, out, _ = run(capsys, "run", "--benchmark", "fir", "--variant", "scalar", "--config", "16c16f1p",
                       "--size", "256", "--taps", "16")
    assert code == 0
    lines = out.split("\n\n")[0].splitlines()
    assert lines[0] == "core," + ",".join(COUNTER_FIELDS)
    assert len(lines) == 17
    row = next(csv.DictReader(io.StringIO(out.split("\n\n")[1])))
    assert row["flops"] == str(2 * 256 * 16)
    assert row["status"] == "partial-calibration"


def test_unknown_benchmark(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["run", "--benchmark", "nosuch"])
    assert ei.value.code == 2


@pytest.mark.parametrize("argv", [
    ["run", "--benchmark", "fir", "--config", "8c8f1p", "--cores", "8"],
    ["run", "--benchmark", "fir", "--size", "huge"],
    ["run", "--benchmark", "fft", "--size", "12"],
    ["run", "--benchmark", "fir", "--param", "taps"],
    ["sweep", "--benchmark", "nosuch"],
    ["verify-fp", "--ops", "nosuch"],
    ["verify-fp", "--samples", "0"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_missing_calibration(capsys, tmp_path):
    f = tmp_path / "calib.csv"
    f.write_text("config_id,voltage,freq_mhz,power_mw,area_mm2,provenance\n8c8f1p,0.80,400,50,1.0,estimated\n")
    code, _, err = run(capsys, "run", "--benchmark", "fir", "--size", "small", "--calib", str(f))
    assert code == 3
    assert "16c16f1p" in err
    code, _, _ = run(capsys, "sweep", "--calib", str(tmp_path / "absent.csv"))
    assert code == 3


def test_schedule_never_worse(capsys):
    base = ["run", "--benchmark", "fir", "--size", "small", "--config", "8c8f2p"]
    _, plain, _ = run(capsys, *base)
    _, tuned, _ = run(capsys, *base, "--schedule")
    assert elapsed(tuned) <= elapsed(plain)


def test_run_markdown(capsys):
    code, out, _ = run(capsys, "run", "--benchmark", "svm", "--variant", "f16", "--size", "small",
                       "--cores", "4", "--fpus", "2", "--format", "markdown")
    assert code == 0
    assert out.startswith("| core |")
    assert "4c2f1p" in out


def test_verify_convert_count(capsys):
    code, out, _ = run(capsys, "verify-fp", "--ops", "convert", "--exhaustive")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert sum(int(r["checked"]) for r in rows) == 2 * 2 ** 16
    assert all(r["mismatches"] == "0" for r in rows)


def test_verify_small_default(capsys):
    code, _, _ = run(capsys, "verify-fp", "--samples", "2000")
    assert code == 0


def test_verify_injected_fault(capsys):
    code, out, err = run(capsys, "verify-fp", "--ops", "mul", "--formats", "bf16", "--samples", "500",
                         "--inject-fault", "mul")
    assert code == 1
    assert err.startswith("mismatch: mul.bf16(0x")
    assert "expected 0x" in err


def test_sweep_byte_identical(capsys, tmp_path):
    argv = ["sweep", "--benchmark", "fir,iir", "--variant", "scalar,f16", "--config", "8c8f1p,8c4f1p",
            "--size", "small"]
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.csv"
        assert run(capsys, *argv, "--out", str(path))[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    text = outs[0].decode()
    assert text.count("\nNAVG,") == 2
    assert "8c4f1p,partial-calibration,paper" in text


def test_sweep_markdown(capsys):
    code, out, _ = run(capsys, "sweep", "--benchmark", "matmul", "--variant", "scalar",
                       "--config", "16c16f1p,16c8f1p,16c4f1p", "--size", "small", "--format", "markdown")
    assert code == 0
    assert "### Performance [Gflop/s]" in out
    assert "[" in out.split("| matmul | scalar |")[1].splitlines()[0]


def test_calib_template(capsys, tmp_path):
    path = tmp_path / "t.csv"
    assert run(capsys, "calib-template", "--out", str(path))[0] == 0
    lines = path.read_text().splitlines()
    assert len(lines) == 37
    assert lines[0] == "config_id,voltage,freq_mhz,power_mw,area_mm2,provenance"
