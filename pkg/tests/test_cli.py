"""Tests for the command-line interface.

Proves:
1. The documented generation example (2 devices x 3 frames at 20 dB)
   exits 0, writes the dataset file and reports 6 rows.
2. Generation requires --seed and unknown subcommands exit with the
   argparse usage status.
3. The documented latency invocation (reference workloads with the
   reported processing override at 60 kHz) reports t_air within 2% of
   0.491 ms, and exactly 490.68 us; the profiler variant reports its
   measured workloads.
4. The consistency check prints a median-relative-error line plus PASS
   and exits 0; the multi-width suite confirms strict width ordering.
5. The variance probe emits valid JSON and exits 0 when every row
   increases along the noise axis.
6. A generated dataset round-trips through train and eval, eval
   reporting accuracy, per-SNR cells and a confusion matrix.
7. Failures print one JSON error object to stderr and exit nonzero; a
   sweep whose only point fails exits 1 and lists the failure.
"""

import json

import pytest

from rffsim import cli


def _run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_documented_example(tmp_path, capsys):
    out = tmp_path / "d.bin"
    code, stdout, _ = _run(
        capsys, "gen", "--devices", "2", "--frames", "3", "--snr", "20",
        "--channel", "tdl20", "--method", "lldr", "--seed", "1",
        "--out", str(out))
    assert code == 0
    assert out.exists()
    info = json.loads(stdout)
    assert info["n_rows"] == 6
    assert info["feature_len"] == 320


def test_gen_requires_seed(tmp_path):
    with pytest.raises(SystemExit) as err:
        cli.main(["gen", "--devices", "2", "--frames", "3",
                  "--out", str(tmp_path / "d.bin")])
    assert err.value.code == 2


def test_unknown_subcommand_exits_with_usage():
    with pytest.raises(SystemExit) as err:
        cli.main(["frobnicate"])
    assert err.value.code == 2


def test_latency_documented_example(capsys):
    code, stdout, _ = _run(
        capsys, "latency", "--scs", "60000",
        "--ue-flops", "7.34e5", "--ue-bytes", "5.91e5",
        "--bs-flops", "1.37e6", "--bs-bytes", "1.39e6",
        "--trffi-override", "81.04e-6")
    assert code == 0
    report = json.loads(stdout)
    assert abs(report["t_air"] - 4.9068e-4) < 1e-7
    assert abs(report["t_air"] - 0.491e-3) / 0.491e-3 < 0.02
    assert report["bound_kinds"] == {"ue": "memory", "bs": "memory"}


def test_latency_profiler_reports_measured_workloads(capsys):
    code, stdout, _ = _run(capsys, "latency", "--profile-pipeline")
    assert code == 0
    report = json.loads(stdout)
    assert report["workloads"]["bs"]["flops"] > 0
    assert report["t_air"] > 0


def test_theorem_check_passes(capsys):
    code, stdout, _ = _run(capsys, "theorem-check", "--trials", "40")
    assert code == 0
    assert "median relative error" in stdout
    assert stdout.strip().endswith("PASS")


def test_theorem_suite_orders_widths(capsys):
    code, stdout, _ = _run(capsys, "theorem-check", "--trials", "30",
                           "--widths", "4,16,32")
    assert code == 0
    assert "width ordering strict: True" in stdout


def test_variance_probe_monotone(capsys):
    code, stdout, _ = _run(capsys, "variance-probe", "--trials", "120")
    assert code == 0
    report = json.loads(stdout)
    assert report["all_rows_increasing"] is True


def test_train_eval_round_trip(tmp_path, capsys):
    data = tmp_path / "d.bin"
    model = tmp_path / "m.bin"
    code, _, _ = _run(
        capsys, "gen", "--devices", "2", "--frames-train", "40",
        "--frames-test", "4", "--snr", "20", "--seed", "3",
        "--out", str(data))
    assert code == 0
    code, stdout, _ = _run(
        capsys, "train", "--data", str(data), "--out", str(model),
        "--log-out", str(tmp_path / "log.csv"), "--epochs", "2",
        "--train-seed", "3")
    assert code == 0
    assert json.loads(stdout)["epochs_run"] <= 2
    code, stdout, _ = _run(capsys, "eval", "--data", str(data),
                           "--model", str(model))
    assert code == 0
    metrics = json.loads(stdout)
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert metrics["n_rows"] == 8
    assert "20" in metrics["per_snr"]


def test_errors_emit_json_on_stderr(tmp_path, capsys):
    code, _, stderr = _run(capsys, "eval", "--data",
                           str(tmp_path / "missing.bin"), "--model", "x")
    assert code != 0
    err = json.loads(stderr)
    assert err["error"] == "FileNotFoundError"
    assert "message" in err


def test_sweep_with_failing_point_exits_nonzero(tmp_path, capsys):
    code, stdout, _ = _run(
        capsys, "sweep", "--devices", "2", "--frames-train", "40",
        "--frames-test", "4", "--snr", "20", "--seed", "4",
        "--axis", "subband_width", "--values", "12",
        "--out-dir", str(tmp_path))
    assert code == 1
    summary = json.loads(stdout)
    assert len(summary["failures"]) == 1
