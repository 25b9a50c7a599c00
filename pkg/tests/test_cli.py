import json

import pytest

from fedback import load_trace
from fedback.cli import main


@pytest.fixture
def config_path(tmp_path):
    cfg = {
        "n_clients": 6,
        "n_rounds": 40,
        "rho": 1.0,
        "gains": {"gain": 2.0, "filter_alpha": 0.9},
        "targets": 0.3,
        "seed": 0,
        "algorithm": "fedback",
        "data": {"task": "regression", "n_samples": 120, "n_features": 3, "noise": 0.05},
        "partition": {"scheme": "dirichlet", "beta": 0.5},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_writes_trace_and_report(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    trace = load_trace(out / "trace.csv")
    assert len(trace) == 40
    report = json.loads((out / "trace_report.json").read_text())
    assert report["rounds"] == 40
    assert "events" in capsys.readouterr().out


def test_run_flag_overrides_config(tmp_path, config_path):
    out = tmp_path / "out"
    code = main(["run", "--config", str(config_path), "--out", str(out), "--rounds", "7"])
    assert code == 0
    assert len(load_trace(out / "trace.csv")) == 7


def test_sweep_writes_one_run_per_rate(tmp_path, config_path, capsys):
    out = tmp_path / "sweep"
    code = main(
        [
            "sweep",
            "--config",
            str(config_path),
            "--out",
            str(out),
            "--rates",
            "0.2,0.5",
            "--rounds",
            "20",
        ]
    )
    assert code == 0
    assert (out / "trace_rate0.2.csv").exists()
    assert (out / "trace_rate0.5.csv").exists()
    assert (out / "trace_rate0.2_report.json").exists()
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3  # header plus one row per rate


def test_compare_requires_explicit_seed_out_algorithm(config_path):
    with pytest.raises(SystemExit):
        main(["compare", "--config", str(config_path)])


def test_compare_rejects_fedback_as_baseline(tmp_path, config_path):
    code = main(
        [
            "compare",
            "--config",
            str(config_path),
            "--seed",
            "1",
            "--out",
            str(tmp_path / "cmp"),
            "--algorithm",
            "fedback",
        ]
    )
    assert code == 2


def test_compare_writes_matched_seed_results(tmp_path, config_path, capsys):
    out = tmp_path / "cmp"
    code = main(
        [
            "compare",
            "--config",
            str(config_path),
            "--seed",
            "3",
            "--out",
            str(out),
            "--algorithm",
            "fedadmm",
            "--rounds",
            "60",
            "--target-gap",
            "0.5",
        ]
    )
    assert code == 0
    payload = json.loads((out / "compare.json").read_text())
    assert payload["seed"] == 3
    assert set(payload["results"]) == {"fedback", "fedadmm"}
    assert (out / "trace_fedback.csv").exists()
    assert (out / "trace_fedadmm.csv").exists()
    assert "fedback" in capsys.readouterr().out


def test_validate_passes_on_clean_trace(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    main(["run", "--config", str(config_path), "--out", str(out)])
    code = main(["validate", "--config", str(config_path), "--trace", str(out / "trace.csv")])
    assert code == 0
    output = capsys.readouterr().out
    assert "PASS" in output
    assert "FAIL" not in output


def test_validate_fails_on_corrupted_trace(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    main(["run", "--config", str(config_path), "--out", str(out)])
    path = out / "trace.csv"
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    column = header.index("delta_0")
    fields = lines[5].split(",")
    fields[column] = "1e9"
    lines[5] = ",".join(fields)
    path.write_text("\n".join(lines) + "\n")
    code = main(["validate", "--config", str(config_path), "--trace", str(path)])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_missing_config_is_reported(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
    assert code == 2
    assert "error" in capsys.readouterr().err
