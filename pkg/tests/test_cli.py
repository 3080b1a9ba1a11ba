"""Command-line harness: subcommands, output headers, exit codes."""

import csv
import json

import numpy as np
import pytest

from qhmm_kernels import cli, hmm, qhmm


def _read_csv(path):
    header = []
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                header.append(line.rstrip("\n"))
            else:
                rows.append(next(csv.reader([line])))
    return header, rows


def _check_header(header):
    assert header[0].startswith("# qhmm-kernels ")
    assert header[1].startswith("# config=")
    assert header[2].startswith("# seed=")


def test_sample_command(tmp_path):
    out = tmp_path / "samples.csv"
    code = cli.main(["sample", "--model", "market4", "--n", "5",
                     "--length", "6", "--seed", "1", "--out", str(out)])
    assert code == 0
    header, rows = _read_csv(out)
    _check_header(header)
    assert rows[0] == ["sequence"]
    assert len(rows) == 6
    assert all(len(r[0]) == 6 and set(r[0]) <= {"0", "1"} for r in rows[1:])


def test_sample_is_reproducible(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sample", "--n", "10", "--seed", "3"]
    assert cli.main(args + ["--out", str(out1)]) == 0
    assert cli.main(args + ["--out", str(out2)]) == 0
    # headers differ in the config hash (it covers the output path);
    # the sampled data must be identical
    assert _read_csv(out1)[1] == _read_csv(out2)[1]


def test_distribution_command_sums_to_one(tmp_path):
    out = tmp_path / "dist.csv"
    assert cli.main(["distribution", "--t", "4", "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    _check_header(header)
    assert rows[0] == ["sequence", "probability"]
    probs = [float(r[1]) for r in rows[1:]]
    assert len(probs) == 16
    assert np.isclose(sum(probs), 1.0, atol=1e-9)


def test_gram_command(tmp_path):
    out = tmp_path / "gram.csv"
    assert cli.main(["gram", "--kernel", "predictive:trace", "--n", "10",
                     "--length", "5", "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    _check_header(header)
    assert any("min_eigenvalue_raw=" in line for line in header)
    values = np.array([[float(v) for v in row] for row in rows[1:]])
    assert values.shape == (10, 10)
    assert np.allclose(np.diag(values), 1.0, atol=1e-9)
    assert np.allclose(values, values.T, atol=1e-9)


def test_gram_command_with_dataset_file(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("sequence,class\n0101,0\n1111,1\n0011,0\n")
    out = tmp_path / "gram.csv"
    assert cli.main(["gram", "--data", str(data), "--out", str(out)]) == 0
    _, rows = _read_csv(out)
    assert rows[0] == ["0101", "1111", "0011"]


def test_histogram_command_with_dim_trend(tmp_path):
    out = tmp_path / "hist.csv"
    assert cli.main([
        "histogram", "--model", "market4", "--kernel", "predictive:trace",
        "--kernel", "rbf", "--n", "10", "--length", "5", "--bins", "4",
        "--dim-trend", "--out", str(out),
    ]) == 0
    header, rows = _read_csv(out)
    assert any("upper-half distance mass" in line for line in header)
    assert rows[0] == ["model", "kernel", "bin_low", "bin_high", "count"]
    # 2 kernels x 4 bins
    assert len(rows) == 1 + 8


def test_classify_command(tmp_path):
    out = tmp_path / "table.csv"
    assert cli.main([
        "classify", "--task", "structural", "--kernel", "predictive:trace",
        "--kernel", "rbf", "--n", "40", "--reps", "2",
        "--classifiers", "svc", "--out", str(out),
    ]) == 0
    _, rows = _read_csv(out)
    assert rows[0][0] == "Classifier"
    assert rows[1][0] == "RFS"
    kernels_seen = {r[1] for r in rows[2:]}
    assert kernels_seen == {"predictive:trace", "rbf"}
    for r in rows[2:]:
        assert 0.0 <= float(r[2]) <= 1.0


def test_verify_command_all_suites(tmp_path, capsys):
    out = tmp_path / "verify.csv"
    code = cli.main(["verify", "--suite", "prop2,cptp,metric", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    for suite in ("prop2", "cptp", "metric"):
        assert f"{suite}: pass" in printed
    _, rows = _read_csv(out)
    assert all(r[1] == "pass" for r in rows[1:])


def test_verify_unknown_suite_is_usage_error(tmp_path):
    out = tmp_path / "verify.csv"
    assert cli.main(["verify", "--suite", "bogus", "--out", str(out)]) == 1


def test_circuits_swap_command(tmp_path):
    out = tmp_path / "swap.csv"
    assert cli.main(["circuits", "swap", "--dim", "4", "--shots", "500",
                     "--identical", "--out", str(out)]) == 0
    _, rows = _read_csv(out)
    assert rows[0] == ["estimate", "exact", "shots"]
    assert float(rows[1][0]) == 1.0 and float(rows[1][1]) == 1.0


def test_circuits_tomo_command(tmp_path):
    out = tmp_path / "tomo.csv"
    assert cli.main(["circuits", "tomo", "--shots", "50000",
                     "--out", str(out)]) == 0
    _, rows = _read_csv(out)
    assert rows[0] == ["rx", "ry", "rz", "frobenius_error"]
    assert float(rows[1][3]) < 0.05


def test_circuits_projgram_command(tmp_path):
    out = tmp_path / "proj.csv"
    assert cli.main(["circuits", "projgram", "--sequences", "00,01,10,11",
                     "--out", str(out)]) == 0
    _, rows = _read_csv(out)
    assert rows[0] == ["00", "01", "10", "11"]
    values = np.array([[float(v) for v in row] for row in rows[1:]])
    assert np.allclose(np.diag(values), 1.0, atol=1e-12)


def test_load_model_from_files(tmp_path):
    m = hmm.market_model()
    hmm_path = tmp_path / "classical.json"
    hmm.save(m, hmm_path)
    q = cli.load_model(str(hmm_path))
    assert q.dim == 4

    q_path = tmp_path / "channel.json"
    qhmm.save(qhmm.embed_hmm(m), q_path)
    assert cli.load_model(str(q_path)).dim == 4

    rng = np.random.default_rng(0)
    u_path = tmp_path / "dilation.json"
    qhmm.save_unitary(qhmm.random_qhmm(2, 2, ("0", "1"), rng), u_path)
    assert cli.load_model(str(u_path)).dim == 2


def test_load_model_errors():
    with pytest.raises(cli.UsageError):
        cli.load_model("/nonexistent/model.json")


def test_missing_model_file_is_usage_error(tmp_path):
    out = tmp_path / "x.csv"
    assert cli.main(["sample", "--model", "/nonexistent.json",
                     "--out", str(out)]) == 1


def test_config_file_supplies_defaults(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"n": 3, "length": 4, "seed": 9}))
    out = tmp_path / "samples.csv"
    assert cli.main(["--config", str(config), "sample", "--out", str(out)]) == 0
    _, rows = _read_csv(out)
    assert len(rows) == 4  # header + 3 samples
    assert all(len(r[0]) == 4 for r in rows[1:])


def test_bad_config_is_usage_error(tmp_path):
    out = tmp_path / "x.csv"
    assert cli.main(["--config", "/nonexistent.json", "sample",
                     "--out", str(out)]) == 1


def test_unknown_subcommand_is_usage_error():
    assert cli.main(["frobnicate"]) == 1
