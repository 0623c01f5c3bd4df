import json

import numpy as np
import pytest

from smra import codec
from smra.cli import EXIT_DATA, EXIT_DECODE, EXIT_OK, EXIT_USAGE, main
from smra.sources import dump_raw, load_raw


@pytest.fixture
def setup(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("L=3\n0 1\n0 2\n1 2\n2 1\n1 3\n2 3\n0 3\n")
    m = tmp_path / "m.txt"
    m.write_text("3<-1 erasure:0.1\n3<-2 erasure:0.25\n2<-1 erasure:0.2\n1<-2 erasure:0.2\n")
    return tmp_path, g, m


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds(setup, capsys):
    d, g, m = setup
    code, out, _ = run(capsys, "bounds", "--graph", g, "--model", m, "--source", 3)
    assert code == EXIT_OK
    js = json.loads(out)
    assert js["storage"] == pytest.approx(1.0)  # neighbour 0 forces the full entropy
    code, out, _ = run(capsys, "bounds", "--graph", g, "--model", m, "--source", 3, "--full-memory")
    assert code == EXIT_OK


def test_graph_valid_and_invalid(setup, capsys):
    d, g, m = setup
    code, out, _ = run(capsys, "graph", "--graph", g, "--source", 3)
    assert code == EXIT_OK
    js = json.loads(out)
    assert js["valid"] and js["previous_requests"] == [0, 1, 2]
    bad = d / "bad.txt"
    bad.write_text("L=3\n0 1\n1 1\n")
    code, out, _ = run(capsys, "graph", "--graph", bad)
    assert code == EXIT_DATA
    assert not json.loads(out)["valid"]


def test_usage_errors(setup, capsys):
    d, g, m = setup
    with pytest.raises(SystemExit) as exc:
        main(["bounds"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["nosuch"])
    assert exc.value.code == EXIT_USAGE
    code, _, err = run(capsys, "experiment", "--table", "custom")
    assert code == EXIT_USAGE and "custom" in err


def test_missing_file_is_data_error(setup, capsys):
    d, g, m = setup
    code, _, err = run(capsys, "bounds", "--graph", d / "none.txt", "--model", m, "--source", 1)
    assert code == EXIT_DATA and err


@pytest.mark.parametrize("flags", [[], ["--universal"], ["--universal", "--type-table"]])
def test_file_round_trip(setup, capsys, flags):
    d, g, m = setup
    assert run(capsys, "synth", "--graph", g, "--model", m, "--source", 3, "--n", 1200,
               "--seed", 4, "--outdir", d / "raw")[0] == EXIT_OK
    x = (d / "raw" / "3.raw").read_bytes()
    sides = [f"{j}={d / 'raw' / f'3-from-{j}.raw'}" for j in (1, 2)]
    argv = ["encode", "--graph", g, "--source", 3, "--input", d / "raw" / "3.raw",
            "--output", d / "3.smra", "--report", d / "3.json", *flags]
    if not flags:
        argv += ["--model", m]
    for s in sides:
        argv += ["--side", s]
    assert run(capsys, *argv)[0] == EXIT_OK
    report = json.loads((d / "3.json").read_text())
    assert report["n"] == 1200
    for j in (0, 1, 2):
        code, out, _ = run(capsys, "extract", "--stream", d / "3.smra", "--prev", j,
                           "--output", d / f"tx{j}.bin")
        assert code == EXIT_OK and json.loads(out)["bits"] >= 0
        side = [] if j == 0 else ["--side", d / "raw" / f"3-from-{j}.raw"]
        code, _, err = run(capsys, "decode", "--transmission", d / f"tx{j}.bin", *side,
                           "--output", d / f"x{j}.raw")
        assert code == EXIT_OK, err
        assert (d / f"x{j}.raw").read_bytes() == x


def test_decode_failure_exit_code(setup, capsys):
    d, g, m = setup
    run(capsys, "synth", "--graph", g, "--model", m, "--source", 3, "--n", 800, "--outdir", d / "raw")
    run(capsys, "encode", "--graph", g, "--model", m, "--source", 3, "--input", d / "raw" / "3.raw",
        "--side", f"1={d / 'raw' / '3-from-1.raw'}", "--side", f"2={d / 'raw' / '3-from-2.raw'}",
        "--output", d / "3.smra", "--report", d / "r.json")
    run(capsys, "extract", "--stream", d / "3.smra", "--prev", 1, "--output", d / "tx.bin")
    # a fully erased side information cannot be completed from the short prefix
    y = np.full(800, 2, dtype=np.uint8)
    (d / "bad.raw").write_bytes(dump_raw(y))
    code, _, err = run(capsys, "decode", "--transmission", d / "tx.bin", "--side", d / "bad.raw",
                       "--output", d / "x.raw")
    assert code == EXIT_DECODE and "decode failure" in err


def test_corrupt_stream_is_data_error(setup, capsys):
    d, g, m = setup
    (d / "junk.smra").write_bytes(b"SMRA" + b"\0" * 40)
    code, _, err = run(capsys, "extract", "--stream", d / "junk.smra", "--prev", 1, "--output", d / "o")
    assert code == EXIT_DATA


def test_unknown_prev_is_data_error(setup, capsys):
    d, g, m = setup
    run(capsys, "synth", "--graph", g, "--model", m, "--source", 3, "--n", 400, "--outdir", d / "raw")
    run(capsys, "encode", "--graph", g, "--model", m, "--source", 3, "--input", d / "raw" / "3.raw",
        "--side", f"1={d / 'raw' / '3-from-1.raw'}", "--side", f"2={d / 'raw' / '3-from-2.raw'}",
        "--output", d / "3.smra", "--report", d / "r.json")
    code, _, _ = run(capsys, "extract", "--stream", d / "3.smra", "--prev", 7, "--output", d / "o")
    assert code == EXIT_DATA


def test_experiment_custom_formats(capsys):
    code, out, _ = run(capsys, "experiment", "--table", "custom", "--n", 500,
                       "--channels", "erasure:0.05", "erasure:0.1", "--seeds", 2)
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0].startswith("table,n,channel") and len(lines) == 4
    code, out, _ = run(capsys, "experiment", "--table", "custom", "--n", 500,
                       "--channels", "erasure:0.05", "--seeds", 1, "--format", "json")
    assert json.loads(out)["rows"][0]["theoretical"] == 25
    code, out, _ = run(capsys, "experiment", "--table", "custom", "--n", 500,
                       "--channels", "erasure:0.05", "--seeds", 1, "--format", "table")
    assert "practical mean" in out


def test_oracle(capsys, tmp_path):
    code, out, _ = run(capsys, "oracle", "--n", 8, "--channel", "bsc:0.2", "--rates", "0.5", "0.3,0.4",
                       "--trials", 200)
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == "n,sum_rate,eps,trials,p_err,ci_lo,ci_hi" and len(lines) == 3
    assert lines[2].startswith("8,0.7")
    code, _, _ = run(capsys, "oracle", "--n", 8, "--channel", "gaussian:1,0.5", "--rates", "0.5")
    assert code == EXIT_DATA


def test_gaussian(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("L=3\n0 1\n0 2\n1 3\n2 3\n")
    m = tmp_path / "m.txt"
    m.write_text("3<-1 gaussian:1,0.9\n3<-2 gaussian:1,0.0\n")
    code, out, _ = run(capsys, "gaussian", "--graph", g, "--model", m, "--source", 3, "--delta", 0.25)
    assert code == EXIT_OK
    js = json.loads(out)
    assert js["points"]["2"]["rate"] == pytest.approx(1.0, abs=1e-12)
    assert js["points"]["1"]["rate"] < 1.0
    assert all(p["distortion"] <= 0.25 + 1e-12 for p in js["points"].values())


def test_output_flag(setup, capsys):
    d, g, m = setup
    out = d / "b.json"
    assert run(capsys, "bounds", "--graph", g, "--model", m, "--source", 2, "--output", out)[0] == 0
    assert "storage" in json.loads(out.read_text())
