from __future__ import annotations

import ctypes.util
import json

import pytest

from heapscope.core import Callsite, SampleKind, SampleRecord
from heapscope.main import build_parser, main
from heapscope.report import parse_json
from heapscope.storage import SampleFileFooter, SampleFileHeader, read_sample_file, read_trace, render_sample_file


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("HEAPSCOPE_OUT", "HEAPSCOPE_THRESHOLD", "HEAPSCOPE_SEED", "HEAPSCOPE_LEAK_ESTIMATOR"):
        monkeypatch.delenv(name, raising=False)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_replay_summary(capsys):
    assert main(["replay", "--generate", "staircase:steps=3", "--threshold", "1000"]) == 0
    out = capsys.readouterr().out
    assert "threshold            1009 B" in out
    assert "threshold samples    3" in out
    assert "max recon error      0 B" in out


def test_replay_json_and_saved_trace(tmp_path, capsys):
    trace = tmp_path / "leak.trace"
    assert main([
        "replay", "--generate", "leak:n=19", "--threshold", "1009", "--emit-json", "--save-trace", str(trace),
    ]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["threshold_samples"] == 19
    assert payload["leaks"][0]["file"] == "leak.py"
    assert payload["leaks"][0]["probability"] == "0.952381"
    assert len(read_trace(trace)) == payload["events"]

    assert main(["replay", "--trace", str(trace), "--threshold", "1009", "--emit-json"]) == 0
    assert json.loads(capsys.readouterr().out) == payload


def test_replay_bad_spec_exits_with_error(capsys):
    assert main(["replay", "--generate", "heap:n=1"]) == 2


def test_report_text_and_json(tmp_path, capsys):
    path = tmp_path / "run.samples"
    record = SampleRecord(SampleKind.GROWTH, 10, 4096, 4096, 4096, 1.0, Callsite("app.py", 3), 1)
    path.write_text(
        render_sample_file(SampleFileHeader(1009, 2018, 10_000_000), [record], SampleFileFooter(elapsed_ns=100)),
        encoding="utf-8",
    )
    out_json = tmp_path / "profile.json"
    assert main(["report", "--in", str(path), "--sort", "peak_mem", "--json", str(out_json)]) == 0
    text = capsys.readouterr().out
    assert "app.py:3" in text
    doc = parse_json(out_json.read_text(encoding="utf-8"))
    assert doc.rows[0].alloc_bytes_sampled == 4096

    assert main(["report", "--in", str(path), "--json", "-", "--estimator", "laplace"]) == 0
    out = capsys.readouterr().out
    assert '"leak_estimator": "laplace"' in out


def test_report_missing_file(tmp_path):
    assert main(["report", "--in", str(tmp_path / "nope.samples")]) == 2


@pytest.mark.skipif(ctypes.util.find_library("c") is None, reason="C library not loadable")
def test_run_command(tmp_path):
    script = tmp_path / "prog.py"
    script.write_text(
        "import sys\nfrom heapscope import shim\nshim.free(shim.malloc(int(sys.argv[1])))\n",
        encoding="utf-8",
    )
    out = tmp_path / "prog.samples"
    status = main(["run", "--out", str(out), "--threshold", "1009", "--no-cpu", str(script), "--", "5000"])
    assert status == 0
    parsed = read_sample_file(out)
    assert parsed.footer.allocs == 1
    assert parsed.records[0].net_delta == 5000


def test_run_help_names_the_shim_entry_points(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    text = capsys.readouterr().out
    assert "heapscope.shim.malloc" in text
    assert "no memory records" in text


def test_run_without_shim_calls_records_no_memory(tmp_path):
    script = tmp_path / "plain.py"
    script.write_text("data = [bytes(4096) for _ in range(1000)]\n", encoding="utf-8")
    out = tmp_path / "plain.samples"
    status = main(["run", "--out", str(out), "--threshold", "1009", "--no-cpu", str(script)])
    assert status == 0
    parsed = read_sample_file(out)
    assert parsed.footer.allocs == 0
    assert parsed.records == []
