import json
import subprocess
import sys
from pathlib import Path

import pytest

from vulnscape.cli import main

DATA = Path(__file__).parent / "data"


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "vulnscape.cli", *args],
                          capture_output=True, text=True, env=env)


def test_embed_writes_file_and_exits_zero(fixture_dir, tmp_path):
    out = tmp_path / "emb.csv"
    code = main(["embed", "--method", "tsne", "--wave", "6", "--seed", "42",
                 "--edi", str(fixture_dir / "edi.csv"), "--out", str(out)])
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header == "key,wave,x,y"
    assert len(out.read_text().splitlines()) == 25


def test_embed_trace_output(fixture_dir, tmp_path):
    out = tmp_path / "emb.csv"
    trace = tmp_path / "trace.csv"
    code = main(["embed", "--method", "tsne", "--wave", "6", "--seed", "1",
                 "--edi", str(fixture_dir / "edi.csv"), "--out", str(out),
                 "--trace-out", str(trace)])
    assert code == 0
    assert trace.read_text().splitlines()[0] == "iteration,objective"


def test_cluster_k_zero_exits_one_naming_constraint(fixture_dir, tmp_path):
    result = run_cli("cluster", "--k", "0", "--seed", "1",
                     "--edi", str(fixture_dir / "edi.csv"),
                     "--out", str(tmp_path / "sol.csv"))
    assert result.returncode == 1
    assert "k=0" in result.stderr


def test_unknown_flag_prints_usage_and_exits_one():
    result = run_cli("embed", "--definitely-not-a-flag")
    assert result.returncode == 1
    assert "usage" in result.stderr.lower()


def test_missing_seed_is_usage_error(fixture_dir, tmp_path):
    result = run_cli("embed", "--wave", "6", "--edi", str(fixture_dir / "edi.csv"),
                     "--out", str(tmp_path / "x.csv"))
    assert result.returncode == 1
    assert "--seed" in result.stderr


@pytest.mark.parametrize("command", ["ingest", "embed", "cluster", "validate",
                                     "screen", "stability", "retention", "link", "serve"])
def test_help_exits_zero_and_lists_flags(command):
    result = run_cli(command, "--help")
    assert result.returncode == 0
    assert "--help" in result.stdout
    if command in ("embed", "cluster", "validate", "screen", "stability"):
        assert "--seed" in result.stdout


def test_missing_edi_file_is_validation_error(tmp_path):
    result = run_cli("embed", "--wave", "6", "--seed", "1",
                     "--edi", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path / "x.csv"))
    assert result.returncode == 1
    assert result.stderr


def test_unwritable_output_is_runtime_error(fixture_dir, tmp_path):
    # a directory that cannot be created under a file -> runtime failure (2)
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory")
    result = run_cli("retention", "--registrations", str(DATA / "class_fixture.csv"),
                     "--out-dir", str(blocker / "run"), "--edi", "")
    assert result.returncode == 2
    assert result.stderr


def test_help_shows_defaults():
    result = run_cli("cluster", "--help")
    assert result.returncode == 0
    assert "default" in result.stdout


def test_cluster_solution_csv(fixture_dir, tmp_path):
    out = tmp_path / "sol.csv"
    code = main(["cluster", "--wave", "6", "--seed", "9", "--k", "3",
                 "--edi", str(fixture_dir / "edi.csv"), "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "key,wave,x,y,label"
    labels = {line.split(",")[-1] for line in lines[1:]}
    assert labels == {"0", "1", "2"}


def test_validate_writes_hopkins_csv(fixture_dir, tmp_path, capsys):
    out = tmp_path / "hopkins.csv"
    code = main(["validate", "--wave", "6", "--seed", "3", "--exponent", "one",
                 "--edi", str(fixture_dir / "edi.csv"), "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scope,label,m,repeats,H_av,p_value,skipped"
    assert lines[-1].startswith("overall")
    summary = json.loads(capsys.readouterr().out)
    assert 0.0 <= summary["overall_h_av"] <= 1.0


def test_screen_da_level_aggregation(fixture_dir, tmp_path, capsys):
    out = tmp_path / "screen.csv"
    code = main(["screen", "--wave", "6", "--seed", "2", "--alpha", "0.05",
                 "--edi", str(fixture_dir / "edi.csv"),
                 "--census", str(fixture_dir / "census_da.csv"),
                 "--catalog", str(fixture_dir / "catalog.csv"),
                 "--da-geo", str(fixture_dir / "da.geojson"),
                 "--nbhd-geo", str(fixture_dir / "neighborhoods.geojson"),
                 "--out", str(out)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert "household_income_median" in summary["significant"]
    header = out.read_text().splitlines()[0]
    assert header == "var_id,label,category,test_used,statistic,p_value,significant,flags"


def test_stability_csv(fixture_dir, tmp_path):
    out = tmp_path / "stability.csv"
    code = main(["stability", "--seed", "5", "--method", "pca",
                 "--edi", str(fixture_dir / "edi.csv"), "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "neighborhood,w2,w3,w4,w5,w6,transitions,a_label"
    assert len(lines) == 25


def test_retention_matches_pipeline_golden(tmp_path):
    out_dir = tmp_path / "run"
    code = main(["retention", "--registrations", str(DATA / "class_fixture.csv"),
                 "--out-dir", str(out_dir), "--edi", ""])
    assert code == 0
    golden = DATA / "golden_bottomup"
    for name in ("journeys.csv", "rejections.csv", "facet_exit_age.csv",
                 "facet_span.csv", "facet_neighborhood_share.csv"):
        assert (out_dir / name).read_bytes() == (golden / name).read_bytes(), name


def test_link_reports_correlation(fixture_dir, capsys):
    code = main(["link", "--registrations", str(fixture_dir / "class.csv"),
                 "--edi", str(fixture_dir / "edi.csv"), "--scale", "one_or_more"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert -1.0 <= payload["r"] <= 1.0
    assert 0.0 <= payload["p_value"] <= 1.0
    assert payload["n"] == 24


def test_data_dir_env_var_supplies_defaults(fixture_dir, tmp_path):
    import os

    env = dict(os.environ, VULNSCAPE_DATA_DIR=str(fixture_dir))
    result = run_cli("ingest", env=env)
    assert result.returncode == 0
    summary = json.loads(result.stdout)
    assert summary["edi_records"] == 120
