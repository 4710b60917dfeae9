"""End-to-end tests of the command-line surface via main(argv)."""

import json

import numpy as np
import pytest

from cakesim import (
    AttentionTrace,
    Pattern,
    SyntheticSpec,
    TraceHeader,
    ValidationMode,
    load_trace,
    save_trace,
    synth_generate,
    validate_trace,
)
from cakesim.cli import main


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _json_out(capsys, argv):
    code, out, err = _run(capsys, argv)
    assert code == 0, err
    return json.loads(out)


def _make_trace(tmp_path, name="trace.bin", **kw):
    spec = dict(pattern=Pattern.MIXED, num_layers=4, num_heads=1, seq_len=128, window=32, seed=7)
    spec.update(kw)
    path = tmp_path / name
    save_trace(synth_generate(SyntheticSpec(**spec)), path)
    return str(path)


class TestSynthCommand:
    def test_writes_a_valid_trace(self, tmp_path, capsys):
        out_path = tmp_path / "t.bin"
        report = _json_out(
            capsys,
            [
                "synth", "--pattern", "mixed", "--layers", "3", "--heads", "2",
                "--seq-len", "64", "--window", "16", "--seed", "5",
                "--out", str(out_path),
            ],
        )
        assert report["header"]["num_layers"] == 3
        assert report["header"]["window"] == 16
        trace = load_trace(out_path)
        assert trace.header.num_heads == 2
        assert validate_trace(trace, ValidationMode.STRICT) == []

    def test_report_can_go_to_a_file(self, tmp_path, capsys):
        out_path = tmp_path / "t.bin"
        report_path = tmp_path / "report.json"
        code, out, _ = _run(
            capsys,
            [
                "synth", "--pattern", "sink", "--layers", "1", "--seq-len", "32",
                "--window", "8", "--out", str(out_path), "--report-out", str(report_path),
            ],
        )
        assert code == 0
        assert out == ""
        assert json.loads(report_path.read_text())["schema_version"] == 1

    def test_missing_out_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--pattern", "sink", "--layers", "1", "--seq-len", "32"])
        assert exc.value.code == 2

    def test_window_beyond_sequence_is_a_config_error(self, tmp_path, capsys):
        code, _, err = _run(
            capsys,
            [
                "synth", "--pattern", "sink", "--layers", "1", "--seq-len", "8",
                "--window", "64", "--out", str(tmp_path / "t.bin"),
            ],
        )
        assert code == 2
        assert "error:" in err


class TestStatsCommand:
    def test_single_layer_gets_the_whole_fraction(self, tmp_path, capsys):
        trace = _make_trace(tmp_path, pattern=Pattern.DISPERSED, num_layers=1)
        report = _json_out(capsys, ["stats", trace])
        assert report["findings"] == []
        assert report["layers"][0]["fraction"] == 1.0

    def test_identical_layers_get_identical_fractions(self, tmp_path, capsys):
        block = synth_generate(SyntheticSpec(Pattern.SHIFTING, 1, 1, 64, 16, seed=3)).data[0]
        header = TraceHeader(num_layers=3, num_heads=1, seq_len=64, window=16)
        path = tmp_path / "equal.bin"
        save_trace(AttentionTrace(header, np.stack([block] * 3)), path)
        report = _json_out(capsys, ["stats", str(path)])
        fractions = [layer["fraction"] for layer in report["layers"]]
        assert len(set(fractions)) == 1

    def test_fractions_sum_to_one(self, tmp_path, capsys):
        report = _json_out(capsys, ["stats", _make_trace(tmp_path)])
        total = sum(layer["fraction"] for layer in report["layers"])
        assert abs(total - 1.0) < 1e-9

    def test_findings_flip_the_exit_code(self, tmp_path, capsys):
        header = TraceHeader(num_layers=1, num_heads=1, seq_len=2, window=1)
        trace = AttentionTrace(header, np.array([[[[0.5, 0.5005]]]]))
        path = tmp_path / "offsum.bin"
        save_trace(trace, path)
        code, out, _ = _run(capsys, ["stats", str(path), "--validation", "lenient"])
        assert code == 0
        assert json.loads(out)["findings"] == []
        code, out, _ = _run(capsys, ["stats", str(path), "--validation", "strict"])
        assert code == 1
        assert json.loads(out)["findings"][0]["kind"] == "row_sum"

    def test_missing_file_is_an_input_error(self, capsys):
        code, _, err = _run(capsys, ["stats", "/nonexistent/trace.bin"])
        assert code == 2
        assert "error:" in err

    def test_corrupt_file_is_an_input_error(self, tmp_path, capsys):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x00\x00\x00\x02{}")
        code, _, err = _run(capsys, ["stats", str(path)])
        assert code == 2
        assert "error:" in err


class TestPrefillCommand:
    def test_uniform_strategy_splits_evenly(self, tmp_path, capsys):
        trace = _make_trace(tmp_path, num_layers=4, seq_len=200)
        report = _json_out(
            capsys, ["prefill", trace, "--b-total", "400", "--strategy", "uniform"]
        )
        assert report["final_budgets"] == [100, 100, 100, 100]
        assert report["cache_sizes"] == [100, 100, 100, 100]

    def test_cascade_matches_oneshot_keep_sets(self, tmp_path, capsys):
        trace = _make_trace(tmp_path)
        casc = _json_out(capsys, ["prefill", trace, "--b-total", "300", "--mode", "cascade"])
        ones = _json_out(capsys, ["prefill", trace, "--b-total", "300", "--mode", "oneshot"])
        assert casc["final_budgets"] == ones["final_budgets"]
        assert casc["keep_positions"] == ones["keep_positions"]

    def test_ledger_fields_present(self, tmp_path, capsys):
        report = _json_out(
            capsys, ["prefill", _make_trace(tmp_path), "--b-total", "300"]
        )
        ledger = report["ledger"]
        assert ledger["cascade_peak_slots"] <= (300 + 128) * 1
        assert ledger["naive_peak_slots"] == 128 * 4
        assert len(ledger["per_stage_slots"]) == 4

    def test_missing_budget_is_a_config_error(self, tmp_path, capsys):
        code, _, err = _run(capsys, ["prefill", _make_trace(tmp_path)])
        assert code == 2
        assert "b_total" in err

    def test_budget_below_floor_is_a_config_error(self, tmp_path, capsys):
        code, _, err = _run(capsys, ["prefill", _make_trace(tmp_path), "--b-total", "50"])
        assert code == 2
        assert "floor" in err

    def test_reports_are_byte_identical_across_runs(self, tmp_path, capsys):
        trace = _make_trace(tmp_path)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["prefill", trace, "--b-total", "300", "--out", str(a)]) == 0
        assert main(["prefill", trace, "--b-total", "300", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestDecodeCommand:
    def test_sizes_stay_bounded(self, tmp_path, capsys):
        trace = _make_trace(tmp_path)
        report = _json_out(
            capsys,
            ["decode", trace, "--b-total", "300", "--steps", "16", "--source", "sink"],
        )
        budgets = report["budgets"]
        for row in report["per_step_sizes"]:
            assert all(size <= b for size, b in zip(row, budgets))
        assert len(report["final_positions"]) == 4

    def test_zero_steps(self, tmp_path, capsys):
        report = _json_out(
            capsys, ["decode", _make_trace(tmp_path), "--b-total", "300", "--steps", "0"]
        )
        assert report["per_step_sizes"] == []
        assert report["max_size_per_layer"] == []


class TestVerifyCommand:
    def test_small_campaign_passes(self, capsys):
        report = _json_out(
            capsys, ["verify", "--trials", "200", "--max-size", "64", "--seed", "3"]
        )
        assert report["pass"] is True
        assert report["theorem2"]["failures"] == 0
        assert report["prop1"]["failures"] == 0

    def test_zero_trials_is_a_vacuous_pass(self, capsys):
        report = _json_out(capsys, ["verify", "--trials", "0"])
        assert report["pass"] is True


class TestConfigHandling:
    def test_flags_override_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tau1": 2.0, "gamma": 100.0, "b_total": 300}))
        trace = _make_trace(tmp_path)
        report = _json_out(
            capsys, ["prefill", trace, "--config", str(cfg), "--tau1", "0.5"]
        )
        assert report["config"]["tau1"] == 0.5
        assert report["config"]["gamma"] == 100.0
        assert report["config"]["window"] == 32  # untouched default

    def test_unknown_config_key_is_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tau_one": 2.0}))
        code, _, err = _run(capsys, ["verify", "--trials", "1", "--config", str(cfg)])
        assert code == 2
        assert "unknown config keys" in err

    def test_non_object_config_is_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        code, _, err = _run(capsys, ["verify", "--trials", "1", "--config", str(cfg)])
        assert code == 2

    def test_malformed_config_is_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        code, _, err = _run(capsys, ["verify", "--trials", "1", "--config", str(cfg)])
        assert code == 2
        assert "cannot read config" in err

    def test_invalid_config_value_is_rejected(self, tmp_path, capsys):
        trace = _make_trace(tmp_path)
        code, _, err = _run(
            capsys, ["prefill", trace, "--b-total", "300", "--pool-kernel", "4"]
        )
        assert code == 2
