"""Publication corpus: NDJSON loading, validation, dedup, and cohort views.

A corpus is an immutable index over paper records. Input is NDJSON (one
record per line); embeddings live in a separate binary file and are
attached after loading. Malformed lines are collected into a rejects
report rather than silently dropped.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"
SUPPORTED_SCHEMA_VERSIONS = frozenset({"1"})

EMBEDDING_MAGIC = b"SCIV1"

_EPOCH = date(1970, 1, 1)

MIN_YEAR = 1800


class CorpusError(Exception):
    """Base class for corpus loading and lookup failures."""


class SchemaVersionError(CorpusError):
    pass


class DuplicatePaperIdError(CorpusError):
    def __init__(self, paper_id: str):
        super().__init__(f"duplicate paper_id: {paper_id!r}")
        self.paper_id = paper_id


class UnknownFieldError(CorpusError):
    def __init__(self, tag: str):
        super().__init__(f"unknown field tag: {tag!r}")
        self.tag = tag


class EmbeddingFormatError(CorpusError):
    pass


def parse_iso_date(text: str) -> int:
    """ISO-8601 date string -> days since 1970-01-01 (may be negative)."""
    return (date.fromisoformat(text) - _EPOCH).days


def format_days(days: int) -> str:
    return (_EPOCH + timedelta(days=days)).isoformat()


@dataclass(frozen=True, slots=True)
class SubmissionHistory:
    """Submission and acceptance dates, in days since epoch."""

    submitted: int
    accepted: int


@dataclass(frozen=True, slots=True)
class PaperRecord:
    paper_id: str
    year: int
    doi: str | None = None
    journal: str | None = None
    fields_l0: frozenset[str] = frozenset()
    fields_l1: frozenset[str] = frozenset()
    author_ids: tuple[str, ...] = ()
    reference_ids: frozenset[str] = frozenset()
    concept_ids: frozenset[str] = frozenset()
    issue_order: int | None = None
    history: SubmissionHistory | None = None
    embedding_ref: int | None = None


@dataclass(frozen=True, slots=True)
class RejectedLine:
    path: str
    line: int  # 1-based within its file
    reason: str


@dataclass(frozen=True, slots=True)
class EmbeddingStore:
    """Dense paper embeddings; one row per embedded paper."""

    dim: int
    vectors: np.ndarray  # float32, shape (count, dim)
    row_index: dict[str, int]

    def get(self, paper_id: str) -> np.ndarray | None:
        row = self.row_index.get(paper_id)
        return None if row is None else self.vectors[row]

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.row_index


@dataclass(frozen=True, slots=True)
class Cohort:
    """All embedded papers sharing a publication year and a level-1 field."""

    year: int
    field: str
    members: tuple[str, ...]  # sorted by paper_id

    def __len__(self) -> int:
        return len(self.members)


class Corpus:
    """Immutable indexed view over loaded paper records.

    Safe for concurrent readers; built once by :func:`load_corpus`.
    """

    def __init__(
        self,
        papers: dict[str, PaperRecord],
        rejects: tuple[RejectedLine, ...] = (),
        embeddings: EmbeddingStore | None = None,
    ):
        self._papers = papers
        self.rejects = rejects
        self.embeddings = embeddings
        self._known_l1 = frozenset(t for p in papers.values() for t in p.fields_l1)
        self._known_l0 = frozenset(t for p in papers.values() for t in p.fields_l0)
        # field-year counts over both tag levels (a tag counts a paper once)
        sizes: dict[tuple[int, str], int] = {}
        for p in papers.values():
            for tag in p.fields_l0 | p.fields_l1:
                key = (p.year, tag)
                sizes[key] = sizes.get(key, 0) + 1
        self._field_sizes = sizes
        self._cohort_index = self._build_cohort_index()

    def _build_cohort_index(self) -> dict[tuple[int, str], tuple[str, ...]]:
        index: dict[tuple[int, str], list[str]] = {}
        if self.embeddings is None:
            return {}
        for pid, p in self._papers.items():
            if pid not in self.embeddings:
                continue
            for tag in p.fields_l1:
                index.setdefault((p.year, tag), []).append(pid)
        return {k: tuple(sorted(v)) for k, v in index.items()}

    def __len__(self) -> int:
        return len(self._papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self._papers

    def __getitem__(self, paper_id: str) -> PaperRecord:
        return self._papers[paper_id]

    def get(self, paper_id: str) -> PaperRecord | None:
        return self._papers.get(paper_id)

    def papers(self) -> list[PaperRecord]:
        """All records, sorted by paper_id."""
        return [self._papers[k] for k in sorted(self._papers)]

    def paper_ids(self) -> list[str]:
        return sorted(self._papers)

    @property
    def known_fields_l1(self) -> frozenset[str]:
        return self._known_l1

    @property
    def known_fields_l0(self) -> frozenset[str]:
        return self._known_l0

    def years(self) -> list[int]:
        return sorted({p.year for p in self._papers.values()})

    def with_embeddings(self, store: EmbeddingStore) -> "Corpus":
        """Attach an embedding store; sets each record's embedding_ref."""
        papers = {
            pid: replace(p, embedding_ref=store.row_index.get(pid))
            for pid, p in self._papers.items()
        }
        return Corpus(papers, self.rejects, store)

    def embedded_ids(self) -> list[str]:
        if self.embeddings is None:
            return []
        return sorted(pid for pid in self._papers if pid in self.embeddings)

    def missing_embedding_count(self) -> int:
        """Papers excluded from scoring because no embedding row exists."""
        if self.embeddings is None:
            return len(self._papers)
        return sum(1 for pid in self._papers if pid not in self.embeddings)

    def cohort_view(self, year: int, field_tag: str) -> Cohort:
        """Embedded papers with the given year and level-1 field, sorted by id."""
        if field_tag not in self._known_l1:
            raise UnknownFieldError(field_tag)
        members = self._cohort_index.get((year, field_tag), ())
        return Cohort(year=year, field=field_tag, members=members)

    def cohorts(self) -> list[Cohort]:
        """Every nonempty cohort, in (year, field) order."""
        return [
            Cohort(year=y, field=f, members=m)
            for (y, f), m in sorted(self._cohort_index.items())
        ]

    def field_size(self, year: int, field_tag: str) -> int:
        if field_tag not in self._known_l1 and field_tag not in self._known_l0:
            raise UnknownFieldError(field_tag)
        return self._field_sizes.get((year, field_tag), 0)

    def index_dump(self) -> bytes:
        """Canonical JSON dump of the index; identical loads give identical bytes."""
        payload = {
            "schema_version": SCHEMA_VERSION,
            "papers": [
                {
                    "paper_id": p.paper_id,
                    "doi": p.doi,
                    "year": p.year,
                    "journal": p.journal,
                    "fields_l0": sorted(p.fields_l0),
                    "fields_l1": sorted(p.fields_l1),
                    "author_ids": list(p.author_ids),
                    "reference_ids": sorted(p.reference_ids),
                    "concept_ids": sorted(p.concept_ids),
                    "issue_order": p.issue_order,
                    "submitted": p.history.submitted if p.history else None,
                    "accepted": p.history.accepted if p.history else None,
                }
                for p in self.papers()
            ],
            "rejects": [
                {"path": r.path, "line": r.line, "reason": r.reason}
                for r in self.rejects
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()

    def index_digest(self) -> str:
        return hashlib.sha256(self.index_dump()).hexdigest()


_LIST_FIELDS = ("fields_l0", "fields_l1", "author_ids", "reference_ids", "concept_ids")


def _parse_record(obj: dict) -> PaperRecord:
    """Validate one decoded NDJSON object; raises ValueError with a short reason."""
    if not isinstance(obj, dict):
        raise ValueError("not_an_object")
    paper_id = obj.get("paper_id")
    if not isinstance(paper_id, str) or not paper_id:
        raise ValueError("missing_field:paper_id")
    year = obj.get("year")
    if not isinstance(year, int) or isinstance(year, bool):
        raise ValueError("missing_field:year")
    if year < MIN_YEAR:
        raise ValueError("year_below_minimum")
    lists: dict[str, list] = {}
    for key in _LIST_FIELDS:
        value = obj.get(key, [])
        if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
            raise ValueError(f"bad_field:{key}")
        lists[key] = value
    refs = frozenset(lists["reference_ids"])
    if paper_id in refs:
        raise ValueError("self_reference")
    doi = obj.get("doi")
    if doi is not None and not isinstance(doi, str):
        raise ValueError("bad_field:doi")
    journal = obj.get("journal")
    if journal is not None and not isinstance(journal, str):
        raise ValueError("bad_field:journal")
    issue_order = obj.get("issue_order")
    if issue_order is not None and (
        not isinstance(issue_order, int) or isinstance(issue_order, bool)
    ):
        raise ValueError("bad_field:issue_order")
    history = None
    submitted, accepted = obj.get("submitted"), obj.get("accepted")
    if submitted is not None or accepted is not None:
        try:
            sub = parse_iso_date(submitted) if submitted is not None else None
            acc = parse_iso_date(accepted) if accepted is not None else None
        except (ValueError, TypeError) as exc:
            # re-raise with our reason, not fromisoformat's message
            raise ValueError("bad_date") from exc
        if sub is not None and acc is not None:
            if acc < sub:
                raise ValueError("accepted_before_submitted")
            history = SubmissionHistory(submitted=sub, accepted=acc)
        # one-sided dates carry no usable turnaround information; keep record
    return PaperRecord(
        paper_id=paper_id,
        year=year,
        doi=doi or None,
        journal=journal,
        fields_l0=frozenset(lists["fields_l0"]),
        fields_l1=frozenset(lists["fields_l1"]),
        author_ids=tuple(lists["author_ids"]),
        reference_ids=refs,
        concept_ids=frozenset(lists["concept_ids"]),
        issue_order=issue_order,
        history=history,
    )


def load_corpus(
    paths: list[str | Path],
    schema_version: str = SCHEMA_VERSION,
    embeddings_path: str | Path | None = None,
) -> Corpus:
    """Load NDJSON record files into an immutable corpus.

    Malformed lines become :class:`RejectedLine` entries on the corpus;
    a duplicate paper_id is a hard error. Optionally attaches embeddings.
    """
    if schema_version not in SUPPORTED_SCHEMA_VERSIONS:
        raise SchemaVersionError(
            f"unsupported schema version {schema_version!r}; "
            f"supported: {sorted(SUPPORTED_SCHEMA_VERSIONS)}"
        )
    papers: dict[str, PaperRecord] = {}
    rejects: list[RejectedLine] = []
    for path in paths:
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    rejects.append(RejectedLine(str(path), lineno, "invalid_json"))
                    continue
                try:
                    record = _parse_record(obj)
                except ValueError as exc:
                    rejects.append(RejectedLine(str(path), lineno, str(exc)))
                    continue
                if record.paper_id in papers:
                    raise DuplicatePaperIdError(record.paper_id)
                papers[record.paper_id] = record
    corpus = Corpus(papers, tuple(rejects))
    if embeddings_path is not None:
        corpus = corpus.with_embeddings(read_embeddings(embeddings_path))
    return corpus


def dedupe_by_doi(corpus: Corpus) -> tuple[Corpus, int]:
    """Drop every paper whose DOI is shared by two or more papers.

    All sharers are removed (no winner is picked); papers without a DOI
    are untouched. Returns the deduped corpus and the number removed.
    """
    by_doi: dict[str, list[str]] = {}
    for p in corpus.papers():
        if p.doi:
            by_doi.setdefault(p.doi, []).append(p.paper_id)
    drop = {pid for ids in by_doi.values() if len(ids) >= 2 for pid in ids}
    if not drop:
        return corpus, 0
    kept = {pid: corpus[pid] for pid in corpus.paper_ids() if pid not in drop}
    return Corpus(kept, corpus.rejects, corpus.embeddings), len(drop)


def write_rejects_csv(
    rejects: tuple[RejectedLine, ...], path: str | Path, seed: int | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(["line", "reason"])
        for r in rejects:
            writer.writerow([r.line, r.reason])


def write_embeddings(
    path: str | Path, vectors: dict[str, np.ndarray] | None = None, *,
    ids: list[str] | None = None, matrix: np.ndarray | None = None,
) -> None:
    """Write the binary embedding file (magic, u32 dim, u64 count, rows).

    Accepts either a mapping paper_id -> vector or parallel ids/matrix.
    Row order follows the mapping's iteration order / the ids list.
    """
    if vectors is not None:
        ids = list(vectors)
        matrix = np.asarray([vectors[i] for i in ids], dtype=np.float32)
    assert ids is not None and matrix is not None
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("ids and matrix shapes disagree")
    dim = matrix.shape[1]
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<IQ", dim, len(ids)))
        for i, pid in enumerate(ids):
            encoded = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(matrix[i].astype("<f4").tobytes())


def read_embeddings(path: str | Path) -> EmbeddingStore:
    """Read the binary embedding file into an :class:`EmbeddingStore`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(EMBEDDING_MAGIC))
        if magic != EMBEDDING_MAGIC:
            raise EmbeddingFormatError(f"bad magic in {path}: {magic!r}")
        header = fh.read(12)
        if len(header) != 12:
            raise EmbeddingFormatError(f"truncated header in {path}")
        dim, count = struct.unpack("<IQ", header)
        vectors = np.empty((count, dim), dtype=np.float32)
        row_index: dict[str, int] = {}
        for row in range(count):
            (id_len,) = struct.unpack("<I", fh.read(4))
            pid = fh.read(id_len).decode("utf-8")
            raw = fh.read(4 * dim)
            if len(raw) != 4 * dim:
                raise EmbeddingFormatError(f"truncated row {row} in {path}")
            vec = np.frombuffer(raw, dtype="<f4")
            if pid in row_index:
                raise EmbeddingFormatError(f"duplicate embedding id {pid!r}")
            row_index[pid] = row
            vectors[row] = vec
    if count and not np.all(np.isfinite(vectors)):
        raise EmbeddingFormatError(f"non-finite embedding entries in {path}")
    return EmbeddingStore(dim=dim, vectors=vectors, row_index=row_index)
