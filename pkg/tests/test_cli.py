import json

from auvsitl import selftest, tlog
from auvsitl.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_IO, EXIT_OK, main


def test_selftest_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    assert "checks passed" in capsys.readouterr().out


def test_selftest_checks():
    results = selftest.run_selftest()
    assert results
    assert all(r.ok for r in results), [r for r in results if not r.ok]
    assert selftest.crc16_reference(b"123456789") == 0x6F91


def test_selftest_flags_bad_golden(tmp_path):
    golden = tmp_path / "golden.hex"
    golden.write_text("fe0900010100000000000c03000403722c\n", encoding="utf-8")
    results = selftest.check_golden(golden)
    assert len(results) == 1
    assert not results[0].ok


def test_run_writes_outputs_and_replays(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--seed", "2", "--duration", "2", "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["seed"] == 2
    assert report["sim_time"] == 2.0
    data = (out / "run.tlog").read_bytes()
    assert len(tlog.read_tlog(data)) == report["frames_delivered"]
    assert (out / "run.csv").read_text(encoding="utf-8").startswith("t,x,y,depth")

    csv_path = tmp_path / "messages.csv"
    assert main(["replay", "--tlog", str(out / "run.tlog"), "--csv", str(csv_path)]) == EXIT_OK
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(tlog.REPLAY_HEADER)
    assert len(lines) == report["frames_delivered"] + 1


def test_run_with_pdf(tmp_path):
    assert main(["run", "--duration", "1", "--out", str(tmp_path), "--pdf"]) == EXIT_OK
    assert (tmp_path / "report.pdf").exists()


def test_invalid_scenario_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"duration": -5, "objects": []}', encoding="utf-8")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == EXIT_INVALID
    broken = tmp_path / "broken.json"
    broken.write_text('{"objects": [', encoding="utf-8")
    assert main(["run", "--scenario", str(broken), "--out", str(tmp_path)]) == EXIT_INVALID
    latin1 = tmp_path / "latin1.json"
    latin1.write_bytes('{"description": "pr\xfcfstand", "objects": []}'.encode("latin-1"))
    assert main(["run", "--scenario", str(latin1), "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["run", "--duration", "0", "--out", str(tmp_path)]) == EXIT_INVALID


def test_divergence_exits_3(tmp_path):
    scenario = tmp_path / "tipped.json"
    scenario.write_text('{"initial": {"attitude_deg": [0, 70, 0]}, "objects": []}', encoding="utf-8")
    assert main(["run", "--scenario", str(scenario), "--out", str(tmp_path)]) == EXIT_DIVERGED


def test_replay_errors_exit_1(tmp_path):
    corrupt = tmp_path / "corrupt.tlog"
    corrupt.write_bytes(b"\x00" * 12)
    assert main(["replay", "--tlog", str(corrupt), "--csv", str(tmp_path / "x.csv")]) == EXIT_IO
    missing = tmp_path / "missing.tlog"
    assert main(["replay", "--tlog", str(missing), "--csv", str(tmp_path / "y.csv")]) == EXIT_IO


def test_batch(tmp_path):
    folder = tmp_path / "scenarios"
    folder.mkdir()
    for name in ("a", "b"):
        (folder / f"{name}.json").write_text('{"duration": 1, "objects": []}', encoding="utf-8")
    out = tmp_path / "batch"
    assert main(["batch", "--scenarios", str(folder), "--out", str(out), "--workers", "1"]) == EXIT_OK
    assert (out / "a.tlog").exists()
    assert (out / "b_report.json").exists()
    assert main(["batch", "--scenarios", str(tmp_path / "nothing_here"), "--out", str(out)]) == EXIT_IO
