import hashlib
import json
from pathlib import Path

import pytest

from sciline.cli import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_STAGE_FAILURE, main


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    """Small synthetic corpus plus a pipeline config pointing at it."""
    root = tmp_path_factory.mktemp("cli_fixture")
    data = root / "data"
    config_path = root / "pipeline.toml"
    config_path.write_text(
        f"""
seed = 42
threads = 1

[input]
corpus = ["{data}/corpus.ndjson"]
embeddings = "{data}/embeddings.bin"
contexts = "{data}/contexts.ndjson"

[output]
dir = "{root}/out"

[synth]
seed = 42
n_years = 5
n_fields = 2
papers_per_year = 40
crowding_start = 0.2
crowding_end = 0.7
citation_penalty = 0.7
review_penalty = 1.05
twin_pairs = 4
calibrate_truth = false
"""
    )
    assert main(["--config", str(config_path), "synth", "--out", str(data)]) == EXIT_OK
    return root


def out_digests(out_dir):
    digests = {}
    for p in sorted(Path(out_dir).rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            digests[str(p.relative_to(out_dir))] = hashlib.sha256(
                p.read_bytes()
            ).hexdigest()
    return digests


def test_run_all_stages(fixture_dir):
    config = str(fixture_dir / "pipeline.toml")
    assert main(["--config", config, "run"]) == EXIT_OK
    manifest = json.loads((fixture_dir / "out" / "manifest.json").read_text())
    assert [e["stage"] for e in manifest] == [
        "ingest", "stylize", "disrupt", "recombine",
        "reception", "twins", "regress", "report",
    ]
    assert all(e["status"] == "ok" for e in manifest)
    for e in manifest:
        assert e["inputs"], "every stage records input hashes"
        assert "duration_s" in e
    out = fixture_dir / "out"
    for name in ("scores.csv", "disruption.csv", "combos.csv", "reception.csv",
                 "ratio_series.csv", "twins.csv", "models.csv", "rejects.csv"):
        assert (out / name).exists(), name


def test_outputs_carry_seed_header(fixture_dir):
    scores = (fixture_dir / "out" / "scores.csv").read_text().splitlines()
    assert scores[0] == "# seed=42"


def test_single_stage_run(fixture_dir, tmp_path):
    config = str(fixture_dir / "pipeline.toml")
    out = tmp_path / "only_stylize"
    assert main(["--config", config, "--out", str(out), "run",
                 "--stages", "stylize"]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert [e["stage"] for e in manifest] == ["stylize"]


def test_missing_embeddings_is_config_error(fixture_dir, tmp_path):
    config = tmp_path / "broken.toml"
    data = fixture_dir / "data"
    config.write_text(
        f"""
[input]
corpus = ["{data}/corpus.ndjson"]
embeddings = "{data}/nonexistent.bin"
[output]
dir = "{tmp_path}/out"
"""
    )
    code = main(["--config", str(config), "run"])
    assert code == EXIT_CONFIG_ERROR


def test_missing_embeddings_names_path(fixture_dir, tmp_path, capsys):
    config = tmp_path / "broken.toml"
    data = fixture_dir / "data"
    config.write_text(
        f"""
[input]
corpus = ["{data}/corpus.ndjson"]
embeddings = "{data}/nonexistent.bin"
"""
    )
    main(["--config", str(config), "--out", str(tmp_path / "o"), "run"])
    err = capsys.readouterr().err
    assert "nonexistent.bin" in err


def test_stage_failure_exits_one_with_partial_manifest(fixture_dir, tmp_path):
    config = tmp_path / "bad_regress.toml"
    base = (fixture_dir / "pipeline.toml").read_text()
    config.write_text(
        base.replace("[synth]", "[regress]\nresponses = [\"bogus\"]\n\n[synth]")
    )
    out = tmp_path / "out"
    code = main(["--config", str(config), "--out", str(out), "run"])
    assert code == EXIT_STAGE_FAILURE
    manifest = json.loads((out / "manifest.json").read_text())
    stages = {e["stage"]: e["status"] for e in manifest}
    assert stages["regress"] == "failed"
    assert "report" not in stages  # downstream stage aborted


def test_unknown_stage_is_config_error(fixture_dir):
    config = str(fixture_dir / "pipeline.toml")
    assert main(["--config", config, "run", "--stages", "warp"]) == EXIT_CONFIG_ERROR


def test_rerun_byte_identical(fixture_dir, tmp_path):
    config = str(fixture_dir / "pipeline.toml")
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["--config", config, "--out", str(out1), "run"]) == EXIT_OK
    assert main(["--config", config, "--out", str(out2), "run"]) == EXIT_OK
    assert out_digests(out1) == out_digests(out2)


def test_stylize_out_csv_convention(fixture_dir, tmp_path):
    config = str(fixture_dir / "pipeline.toml")
    target = tmp_path / "mydir" / "stylization.csv"
    assert main(["--config", config, "stylize", "--out", str(target),
                 "--variant", "pct5"]) == EXIT_OK
    lines = target.read_text().splitlines()
    assert lines[1].startswith("paper_id,")
    assert ",pct5," in lines[2]


def test_seed_accepted_after_subcommand(fixture_dir, tmp_path):
    config = str(fixture_dir / "pipeline.toml")
    out = tmp_path / "seeded"
    assert main(["--config", config, "--out", str(out), "recombine",
                 "--threshold", "0.5", "--window", "5", "--dim", "64",
                 "--seed", "42"]) == EXIT_OK
    combos = (out / "combos.csv").read_text().splitlines()
    assert combos[0] == "# seed=42"


def test_report_svg_flag(fixture_dir, tmp_path):
    config = str(fixture_dir / "pipeline.toml")
    svg_dir = tmp_path / "plots"
    out = tmp_path / "report_out"
    assert main(["--config", config, "--out", str(out), "report",
                 "--svg", str(svg_dir)]) == EXIT_OK
    svgs = list(svg_dir.glob("*.svg"))
    assert svgs, "report emits SVG files"
    text = svgs[0].read_text()
    assert text.startswith("<?xml")
    assert "seed=42" in text


def test_svg_deterministic(fixture_dir, tmp_path):
    config = str(fixture_dir / "pipeline.toml")
    a, b = tmp_path / "sa", tmp_path / "sb"
    for out in (a, b):
        assert main(["--config", config, "--out", str(out), "report"]) == EXIT_OK
    for svg in sorted(a.glob("*.svg")):
        twin = b / svg.name
        assert svg.read_bytes() == twin.read_bytes()
