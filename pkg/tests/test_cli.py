import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eraserqkd import harness, jsonio
from eraserqkd.cli import main
from eraserqkd.protocol.session import ConfigError


def _write_config(tmp_path, name="cfg", **fields):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps({"rounds": 400, "seed": 5, **fields}))
    return path


def test_run_writes_transcript_and_report(tmp_path, capsys):
    cfg = _write_config(tmp_path, attack="INTERCEPT_Z(BOTH)")
    assert main(["run", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "qber=" in out and "EAVESDROPPER DETECTED" in out
    lines = (tmp_path / "cfg.transcript.jsonl").read_text().splitlines()
    assert len(lines) == 400
    report = json.loads((tmp_path / "cfg.report.json").read_text())
    assert report["eve_detected"] is True


def test_run_twice_is_byte_identical(tmp_path):
    cfg = _write_config(tmp_path, transcript="a.jsonl", report="a.json")
    main(["run", str(cfg)])
    first = (tmp_path / "a.jsonl").read_bytes(), (tmp_path / "a.json").read_bytes()
    main(["run", str(cfg)])
    assert first == ((tmp_path / "a.jsonl").read_bytes(), (tmp_path / "a.json").read_bytes())


def test_written_json_round_trips(tmp_path):
    cfg = _write_config(tmp_path)
    main(["run", str(cfg)])
    text = (tmp_path / "cfg.report.json").read_text()
    assert jsonio.dumps(json.loads(text)) == text
    for line in (tmp_path / "cfg.transcript.jsonl").read_text().splitlines():
        assert jsonio.dumps_line(json.loads(line)) == line


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_canonicalization_is_idempotent(x):
    once = jsonio.dumps_line({"x": x})
    assert jsonio.dumps_line(json.loads(once)) == once


def test_repetitions_and_workers(tmp_path):
    cfg = _write_config(tmp_path, rounds=200, repetitions=2, workers=2)
    assert main(["run", str(cfg)]) == 0
    reps = [(tmp_path / f"cfg.report.rep{i}.json").read_text() for i in range(2)]
    assert reps[0] != reps[1]
    serial = harness.run(replace(harness.load_run_config(cfg), workers=1))
    assert [r.report_path.read_text() for r in serial] == reps


def test_run_with_sweep_block(tmp_path):
    cfg = _write_config(tmp_path, sweep={"layout": "ERASER_PBS", "points": 5})
    assert main(["run", str(cfg)]) == 0
    assert json.loads((tmp_path / "cfg.sweep.json").read_text())["points"] == 5


@pytest.mark.parametrize("fields, field", [
    ({"rounds": 0}, "rounds"),
    ({"colour": "blue"}, "colour"),
    ({"attack": "INTERCEPT_Z(X)"}, "attack"),
    ({"protocol": "B92"}, "protocol"),
    ({"protocol": "BB84", "attack": "INTERCEPT_ERASER(A)"}, "attack"),
    ({"sweep": {"layout": "NOPE"}}, "sweep"),
    ({"repetitions": 0}, "repetitions"),
])
def test_config_errors(tmp_path, capsys, fields, field):
    cfg = _write_config(tmp_path, **fields)
    with pytest.raises(ConfigError) as info:
        harness.load_run_config(cfg)
    assert info.value.field == field
    assert main(["run", str(cfg)]) == 2
    assert field in capsys.readouterr().err


def test_syntax_error_reports_line_and_column(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "rounds": 10,\n  "seed": ,\n}')
    assert main(["run", str(cfg)]) == 2
    assert "bad.json:3:11" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = _write_config(tmp_path, transcript="file/t.jsonl")
    assert main(["run", str(cfg)]) == 2


def test_attack_dict_form(tmp_path):
    cfg = harness.config_from_dict({"rounds": 10, "attack": {"kind": "INTERCEPT_ERASER", "variant": "B"}})
    assert cfg.session.attack.label == "INTERCEPT_ERASER(B)"


def test_bb84_protocol_run(tmp_path):
    cfg = _write_config(tmp_path, protocol="BB84", rounds=2000, attack="INTERCEPT_Z(Q)")
    assert main(["run", str(cfg)]) == 0
    first = json.loads((tmp_path / "cfg.transcript.jsonl").read_text().splitlines()[0])
    assert "alice_basis" in first


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["sweep", "BARE_MZI", "8", str(out)]) == 0
    data = json.loads(out.read_text())
    assert list(data) == ["layout", "points", "phi", "series", "visibility", "absorbed"]
    for phi, p in zip(data["phi"], data["series"]["D1"]):
        assert p == pytest.approx(math.cos(phi / 2) ** 2, abs=1e-9)
    assert data["visibility"]["D1"] == pytest.approx(1, abs=1e-9)


def test_sweep_timebin_splits_bins(tmp_path):
    out = tmp_path / "t.json"
    assert main(["sweep", "ERASER_TIMEBIN", "6", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["visibility_by_time_bin"]["D1@t1"] == pytest.approx(1, abs=1e-9)


def test_sweep_usage_errors(tmp_path):
    assert main(["sweep", "BARE_MZI", "1", str(tmp_path / "x.json")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["sweep", "NOT_A_LAYOUT", "4", str(tmp_path / "x.json")])
    assert info.value.code == 2


def test_oracle_command(tmp_path, capsys):
    out = tmp_path / "o.json"
    assert main(["oracle", str(out)]) == 0
    data = json.loads(out.read_text())
    assert "INTERCEPT_Z(BOTH)" in data["reproduces_25_percent"]
    assert {"strategy": "INTERCEPT_Z(Q)", "policy": "UNIFORM_A_B", "qber": "1/8"} in data["diverges_from_25_percent"]
    assert data["overlaps"]["channel_state_bit0_no_wpi_vs_wpi"] == 0.25
    assert "diverges" in capsys.readouterr().out


def test_selftest_command(monkeypatch, capsys):
    # the full check list runs under the acceptance suite; here only the CLI wiring matters
    fast = [c for c in harness.SELFTEST_CHECKS if c[0] != "oracle vs Monte Carlo"]
    monkeypatch.setattr(harness, "SELFTEST_CHECKS", fast)
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == len(fast)
    assert f"{len(fast)}/{len(fast)} checks passed" in out


def test_selftest_failure_exit_code(monkeypatch, capsys):
    def broken():
        raise AssertionError("forced")

    monkeypatch.setattr(harness, "SELFTEST_CHECKS", [("forced failure", broken)])
    assert main(["selftest"]) == 1
    assert "[FAIL] forced failure: forced" in capsys.readouterr().out


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_oracle_publishes_timebin_weights():
    weights = harness.timebin_peak_weights()
    assert weights["phi=0"] == pytest.approx({"D1@t0": 0.125, "D1@t1": 0.5, "D1@t2": 0.125,
                                              "D2@t0": 0.125, "D2@t2": 0.125}, abs=1e-12)
