import json

import numpy as np
import pytest

from sciline import corpus as corpus_mod


def record(paper_id, year, **kw):
    base = {
        "paper_id": paper_id,
        "year": year,
        "doi": kw.pop("doi", None),
        "journal": kw.pop("journal", None),
        "fields_l0": kw.pop("fields_l0", []),
        "fields_l1": kw.pop("fields_l1", ["field_a"]),
        "author_ids": kw.pop("author_ids", []),
        "reference_ids": kw.pop("reference_ids", []),
        "concept_ids": kw.pop("concept_ids", []),
    }
    base.update(kw)
    return {k: v for k, v in base.items() if v is not None}


def write_ndjson(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")
    return path


def build_corpus(tmp_path, records, vectors=None, name="corpus.ndjson"):
    """Round-trip records (and optional {pid: vector}) through the loaders."""
    path = write_ndjson(tmp_path / name, records)
    emb_path = None
    if vectors is not None:
        emb_path = tmp_path / "emb.bin"
        corpus_mod.write_embeddings(
            emb_path, {pid: np.asarray(v, dtype=np.float32) for pid, v in vectors.items()}
        )
    return corpus_mod.load_corpus([path], embeddings_path=emb_path)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
