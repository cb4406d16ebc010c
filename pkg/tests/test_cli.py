import json

import pytest

from stabeval.cli import main

from conftest import tiny_tsv_rows

GEN_CFG = """\
[generator]
n_documents = 12
segments_per_doc = 2
n_systems = 4
n_buckets = 2
harshness = 0.5 1.0 2.0
item_noise_sigma = 0.6
quality_range = 0.0 1.0
"""

SWEEP_CFG = """\
[sweep]
doc_counts = 6 12
seed = 3
n_simulations = 10
n_permutations = 50
[study:balanced]
item_grouping = psxs
[study:zscore]
item_grouping = no_grouping
normalization = zscore
"""

STUDY_CFG = """\
[study]
item_grouping = psxs
num_documents = 8
n_permutations = 100
seed = 5
"""


@pytest.fixture
def synth_tsv(tmp_path):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text(GEN_CFG)
    out = tmp_path / "synth.tsv"
    assert main(["gen", "--config", str(cfg), "--out", str(out), "--seed", "7"]) == 0
    return out


def test_validate_ok(tiny_tsv, capsys):
    assert main(["validate", "--dataset", str(tiny_tsv)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("OK")
    assert "documents" in out


def test_validate_missing_rating_fails(tmp_path, capsys):
    rows = [r for r in tiny_tsv_rows() if "\tdoc2\t0\tsysB\tr3\t" not in r]
    path = tmp_path / "bad.tsv"
    path.write_text("\n".join(rows) + "\n")
    assert main(["validate", "--dataset", str(path)]) == 1
    assert "INVALID" in capsys.readouterr().err


def test_validate_malformed_severity_reports_line(tmp_path, capsys):
    rows = tiny_tsv_rows()
    rows[4] = rows[4].replace("\t\t\t\t\t\t", "\tCritical\tFluency\t\t\t\t")
    path = tmp_path / "bad.tsv"
    path.write_text("\n".join(rows) + "\n")
    assert main(["validate", "--dataset", str(path)]) == 1
    assert "line 5" in capsys.readouterr().err


def test_gen_validate_roundtrip(synth_tsv, capsys):
    assert main(["validate", "--dataset", str(synth_tsv)]) == 0
    out = capsys.readouterr().out
    assert "documents:         12" in out
    assert "systems:           4" in out


def test_stats_command(synth_tsv, capsys):
    assert main(["stats", "--dataset", str(synth_tsv)]) == 0
    out = capsys.readouterr().out
    assert "raters:            6" in out


def test_simulate_prints_ranking(synth_tsv, tmp_path, capsys):
    cfg = tmp_path / "study.cfg"
    cfg.write_text(STUDY_CFG)
    code = main(["simulate", "--dataset", str(synth_tsv), "--config", str(cfg)])
    assert code == 0
    out = capsys.readouterr().out
    assert "ranking" in out
    assert "significantly-better matrix" in out
    for i in range(4):
        assert f"sys{i:02d}" in out


def test_sweep_outputs(synth_tsv, tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(SWEEP_CFG)
    out_dir = tmp_path / "out"
    code = main(
        ["sweep", "--dataset", str(synth_tsv), "--config", str(cfg), "--out", str(out_dir)]
    )
    assert code == 0
    csv_text = (out_dir / "sweep.csv").read_text()
    lines = csv_text.strip().split("\n")
    assert lines[0].startswith("label,")
    assert len(lines) == 1 + 2 * 2  # two studies x two doc counts
    payload = json.loads((out_dir / "sweep.json").read_text())
    assert len(payload["points"]) == 4
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert set(manifest) >= {
        "version", "config_hash", "master_seed", "dataset_fingerprint",
        "started_at", "finished_at",
    }


def test_sweep_thread_count_does_not_change_csv(synth_tsv, tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(SWEEP_CFG)
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    main(["sweep", "--dataset", str(synth_tsv), "--config", str(cfg),
          "--out", str(out1), "--threads", "1"])
    main(["sweep", "--dataset", str(synth_tsv), "--config", str(cfg),
          "--out", str(out2), "--threads", "2"])
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_agreement_outputs(synth_tsv, tmp_path):
    out_dir = tmp_path / "agree"
    assert main(["agreement", "--dataset", str(synth_tsv), "--out", str(out_dir)]) == 0
    tau_lines = (out_dir / "pairwise_tau.csv").read_text().strip().split("\n")
    assert tau_lines[0] == "rater_a,rater_b,single_document_tau,all_shared_tau"
    assert any(line.startswith("GRAND_MEAN") for line in tau_lines)
    hist_lines = (out_dir / "rater_histograms.csv").read_text().strip().split("\n")
    assert hist_lines[0] == "rater,bin_left,bin_right,count,mean,median"
    assert len(hist_lines) > 1


def test_usage_error_exit_code():
    assert main(["sweep", "--dataset", "x.tsv"]) == 2  # missing required args
    assert main(["no-such-command"]) == 2


def test_missing_file_exit_code(tmp_path):
    assert main(["validate", "--dataset", str(tmp_path / "missing.tsv")]) == 3
