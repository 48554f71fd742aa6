import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from sciline import corpus as corpus_mod
from sciline import embed_space, twins
from sciline.synth import SynthConfig, generate_corpus

SYNTH_FILES = ("corpus.ndjson", "embeddings.bin", "contexts.ndjson",
               "edges.csv", "truth.json")


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_paper_count_contract(tmp_path):
    config = SynthConfig(seed=5, n_years=3, n_fields=2, papers_per_year=10,
                         pre_years=0, calibrate_truth=False)
    truth = generate_corpus(config, tmp_path)
    assert truth["n_papers"] == 60
    corpus = corpus_mod.load_corpus([tmp_path / "corpus.ndjson"])
    assert len(corpus) == 60


def test_same_seed_byte_identical(tmp_path):
    config = SynthConfig(seed=8, n_years=3, n_fields=2, papers_per_year=12,
                         twin_pairs=2, calibrate_truth=False)
    generate_corpus(config, tmp_path / "a")
    generate_corpus(config, tmp_path / "b")
    for name in SYNTH_FILES:
        assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / name), name


def test_different_seed_differs(tmp_path):
    a = SynthConfig(seed=1, n_years=2, n_fields=1, papers_per_year=10,
                    calibrate_truth=False)
    b = SynthConfig(seed=2, n_years=2, n_fields=1, papers_per_year=10,
                    calibrate_truth=False)
    generate_corpus(a, tmp_path / "a")
    generate_corpus(b, tmp_path / "b")
    assert digest(tmp_path / "a" / "embeddings.bin") != digest(
        tmp_path / "b" / "embeddings.bin"
    )


def test_crowding_schedule_moves_mean_stylization_down(tmp_path):
    config = SynthConfig(seed=17, n_years=5, n_fields=2, papers_per_year=80,
                         crowding_start=0.05, crowding_end=0.85,
                         calibrate_truth=False)
    generate_corpus(config, tmp_path)
    corpus = corpus_mod.load_corpus(
        [tmp_path / "corpus.ndjson"], embeddings_path=tmp_path / "embeddings.bin"
    )
    entries, _ = embed_space.stylize_corpus(corpus)
    by_year = {}
    for e in entries:
        by_year.setdefault(e.cohort_year, []).append(e.score)
    means = [float(np.mean(by_year[y])) for y in sorted(by_year)]
    assert means[-1] < means[0]


def test_truth_records_planted_parameters(tmp_path):
    config = SynthConfig(seed=3, n_years=4, n_fields=1, papers_per_year=40,
                         citation_penalty=0.6, review_penalty=1.05,
                         twin_pairs=3, calibrate_truth=True,
                         calibration_replicas=2)
    truth = generate_corpus(config, tmp_path)
    planted = truth["planted"]
    assert planted["c5_ratio"] == 0.6
    assert planted["turnaround_ratio"] == 1.05
    assert len(planted["twin_pairs"]) == 3
    assert len(planted["yearly_mean_stylization"]) == 4
    assert "stylization_slope" in planted
    on_disk = json.loads((tmp_path / "truth.json").read_text())
    assert on_disk["planted"]["c5_ratio"] == 0.6


def test_injected_twins_are_detectable(tmp_path):
    config = SynthConfig(seed=21, n_years=4, n_fields=2, papers_per_year=40,
                         twin_pairs=5, calibrate_truth=False)
    truth = generate_corpus(config, tmp_path)
    corpus = corpus_mod.load_corpus(
        [tmp_path / "corpus.ndjson"], embeddings_path=tmp_path / "embeddings.bin"
    )
    contexts = twins.load_contexts(tmp_path / "contexts.ndjson")
    counts = twins.cocitation_pairs(contexts)
    detected = {
        (t.paper_a, t.paper_b) for t in twins.detect_twins(counts, corpus)
    }
    planted = {tuple(p) for p in truth["planted"]["twin_pairs"]}
    assert planted <= detected


def test_edges_csv_matches_reference_ids(tmp_path):
    config = SynthConfig(seed=4, n_years=3, n_fields=1, papers_per_year=15,
                         calibrate_truth=False)
    generate_corpus(config, tmp_path)
    corpus = corpus_mod.load_corpus([tmp_path / "corpus.ndjson"])
    edges = set()
    for line in (tmp_path / "edges.csv").read_text().splitlines()[1:]:
        citing, cited = line.split(",")
        edges.add((citing, cited))
    want = {
        (p.paper_id, ref) for p in corpus.papers() for ref in p.reference_ids
    }
    assert edges == want


def test_submission_dates_within_bounds(tmp_path):
    config = SynthConfig(seed=6, n_years=3, n_fields=1, papers_per_year=30,
                         review_base_days=180.0, review_shape=64.0,
                         calibrate_truth=False)
    generate_corpus(config, tmp_path)
    corpus = corpus_mod.load_corpus([tmp_path / "corpus.ndjson"])
    lags = [
        p.history.accepted - p.history.submitted
        for p in corpus.papers()
        if p.history is not None
    ]
    assert lags, "generated papers carry submission histories"
    assert min(lags) > 30
    assert max(lags) < 1000


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        SynthConfig.from_dict({"seed": 1, "bogus_knob": 3})
    with pytest.raises(ValueError):
        SynthConfig.from_dict({"n_years": 2})  # seed is mandatory
