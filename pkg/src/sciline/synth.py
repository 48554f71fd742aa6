"""Seeded synthetic corpus generator with planted effects.

Produces NDJSON records, the binary embedding file, citation edges,
twin citation contexts, and a truth.json recording every planted
parameter, so each pipeline stage can be checked against known ground
truth. Planted effects: a stylization decline (cohorts grow more
crowded year over year, pulling papers toward existing neighbors), a
citation bias and a review-latency bias against stylized papers, and
injected near-duplicate twin pairs.

Everything is driven by per-stage seeded generators, so outputs are
byte-identical for a given config.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import embed_space
from .corpus import (
    Corpus,
    EmbeddingStore,
    PaperRecord,
    format_days,
    write_embeddings,
)
from .reception import trend_fit


@dataclass(frozen=True, slots=True)
class SynthConfig:
    seed: int
    start_year: int = 1960
    n_years: int = 8
    n_fields: int = 2
    papers_per_year: int = 60          # per field
    growth_rate: float = 1.0           # yearly multiplier on papers_per_year
    dim: int = 32
    clusters_per_field: int = 3
    # cluster concentration schedule: per-year probability that a paper
    # attaches next to an existing cohort member instead of pioneering a
    # fresh direction; raising it over the years plants the stylization
    # decline
    crowding_start: float = 0.3
    crowding_end: float = 0.3
    pioneer_noise: float = 0.8         # spread of fresh directions around cluster centers
    attach_noise: float = 0.15         # spread of attached papers around their anchor
    # citation model
    c5_base_rate: float = 6.0          # expected citations within 5 years
    late_rate: float = 1.5             # expected citations in years 5-9
    citation_penalty: float = 1.0      # multiplier on stylized papers' c5 rate
    pa_strength: float = 0.0           # preferential-attachment exponent for organic refs
    recency_decay: float = 0.3         # per-year decay for organic reference choice
    organic_refs_rate: float = 3.0     # expected organic references per paper
    # review-lag model
    review_base_days: float = 180.0
    review_shape: float = 64.0         # gamma shape; higher = tighter spread
    review_penalty: float = 1.0        # multiplier on stylized papers' mean lag
    # twins
    twin_pairs: int = 0
    twin_noise: float = 0.002
    # concepts / authors
    concepts_per_field: int = 12
    concepts_min: int = 2
    concepts_max: int = 5
    cross_field_concept_prob: float = 0.05
    authors_per_field: int = 40
    team_max: int = 5
    # knowledge-base years before start_year (no embeddings)
    pre_years: int = 3
    pre_papers_per_year: int = 20
    # labeling parameters used for planting (must match the analysis run)
    label_variant: str = "knn5"
    label_removal_rank: int = 1
    # estimate true yearly score means from replica cohorts
    calibrate_truth: bool = True
    calibration_replicas: int = 4

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        if "seed" not in data:
            raise ValueError("synth config requires an explicit seed")
        return cls(**data)


@dataclass(slots=True)
class _Draft:
    """Mutable paper under construction."""

    paper_id: str
    year: int
    field: str
    journal: str
    issue_order: int
    vector: np.ndarray | None
    cluster: int
    authors: tuple[str, ...] = ()
    concepts: tuple[str, ...] = ()
    references: set = field(default_factory=set)
    submitted: int | None = None
    accepted: int | None = None
    is_twin: bool = False


def _rng(config: SynthConfig, *stage) -> np.random.Generator:
    tokens = [config.seed] + [
        t if isinstance(t, int) else int.from_bytes(str(t).encode(), "little") % (2**31)
        for t in stage
    ]
    return np.random.default_rng(tokens)


def _crowding(config: SynthConfig, year_index: int) -> float:
    if config.n_years == 1:
        return config.crowding_start
    frac = year_index / (config.n_years - 1)
    return config.crowding_start + frac * (config.crowding_end - config.crowding_start)


def _field_name(j: int) -> str:
    return f"field_{j:02d}"


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm < 1e-9:
        v = np.ones_like(v)
        norm = np.linalg.norm(v)
    # float32 round-trip now so planted labels match the loaded corpus exactly
    return (v / norm).astype(np.float32)


def _fresh_vector(
    rng: np.random.Generator, centers: np.ndarray, scale: float
) -> tuple[np.ndarray, int]:
    cluster = int(rng.integers(len(centers)))
    v = centers[cluster] + scale * rng.standard_normal(centers.shape[1])
    return _unit(v), cluster


def _cohort_vectors(
    rng: np.random.Generator,
    centers: np.ndarray,
    count: int,
    crowding: float,
    config: SynthConfig,
) -> tuple[np.ndarray, list[int]]:
    """One cohort's unit vectors under the concentration model.

    Each paper either pioneers a fresh direction around a cluster center
    or, with the crowding probability, lands next to a randomly chosen
    earlier cohort member.
    """
    vectors: list[np.ndarray] = []
    clusters: list[int] = []
    for i in range(count):
        if i > 0 and rng.random() < crowding:
            anchor = int(rng.integers(len(vectors)))
            v = vectors[anchor].astype(np.float64)
            v = v + config.attach_noise * rng.standard_normal(len(v))
            vectors.append(_unit(v))
            clusters.append(clusters[anchor])
        else:
            v, cluster = _fresh_vector(rng, centers, config.pioneer_noise)
            vectors.append(v)
            clusters.append(cluster)
    return np.stack(vectors), clusters


def _year_counts(config: SynthConfig) -> list[int]:
    return [
        max(1, int(round(config.papers_per_year * config.growth_rate**t)))
        for t in range(config.n_years)
    ]


def _generate_drafts(config: SynthConfig) -> tuple[list[_Draft], np.ndarray]:
    centers_rng = _rng(config, "clusters")
    centers = []
    for _ in range(config.n_fields):
        c = centers_rng.standard_normal((config.clusters_per_field, config.dim))
        centers.append(c / np.linalg.norm(c, axis=1, keepdims=True))
    drafts: list[_Draft] = []
    serial = 0
    counts = _year_counts(config)
    vec_rng = _rng(config, "embeddings")
    for t in range(config.n_years):
        year = config.start_year + t
        crowding = _crowding(config, t)
        for j in range(config.n_fields):
            vectors, clusters = _cohort_vectors(
                vec_rng, centers[j], counts[t], crowding, config
            )
            for vector, cluster in zip(vectors, clusters):
                drafts.append(
                    _Draft(
                        paper_id=f"P{serial:07d}",
                        year=year,
                        field=_field_name(j),
                        journal=f"J{j}_{serial % 2}",
                        issue_order=serial,
                        vector=vector,
                        cluster=cluster,
                    )
                )
                serial += 1
    # knowledge-base papers before the start year, without embeddings
    pre_rng = _rng(config, "pre")
    for t in range(config.pre_years):
        year = config.start_year - config.pre_years + t
        for j in range(config.n_fields):
            for _ in range(config.pre_papers_per_year):
                drafts.append(
                    _Draft(
                        paper_id=f"P{serial:07d}",
                        year=year,
                        field=_field_name(j),
                        journal=f"J{j}_{serial % 2}",
                        issue_order=serial,
                        vector=None,
                        cluster=int(pre_rng.integers(config.clusters_per_field)),
                    )
                )
                serial += 1
    return drafts, np.array(centers)


def _inject_twins(
    config: SynthConfig, drafts: list[_Draft], centers: np.ndarray
) -> list[tuple[str, str]]:
    if config.twin_pairs == 0:
        return []
    rng = _rng(config, "twins")
    eligible_years = list(range(config.start_year, config.start_year + config.n_years))
    serial = len(drafts)
    pairs: list[tuple[str, str]] = []
    for _ in range(config.twin_pairs):
        year = int(rng.choice(eligible_years))
        j = int(rng.integers(config.n_fields))
        base, cluster = _fresh_vector(rng, centers[j], config.pioneer_noise)
        members: list[str] = []
        b2b = bool(rng.random() < 0.5)
        journal = f"J{j}_twin" if b2b else None
        for m in range(2):
            v = base.astype(np.float64) + config.twin_noise * rng.standard_normal(
                config.dim
            )
            v = (v / np.linalg.norm(v)).astype(np.float32)
            pid = f"P{serial:07d}"
            drafts.append(
                _Draft(
                    paper_id=pid,
                    year=year,
                    field=_field_name(j),
                    journal=journal if journal else f"J{j}_{serial % 2}",
                    issue_order=serial if b2b else serial * 7 + m,
                    vector=v,
                    cluster=cluster,
                    is_twin=True,
                )
            )
            members.append(pid)
            serial += 1
        # adjacent issue positions for the back-to-back half
        if b2b:
            drafts[-1].issue_order = drafts[-2].issue_order + 1
        pairs.append((members[0], members[1]))
    return pairs


def _assign_metadata(config: SynthConfig, drafts: list[_Draft]) -> None:
    """Authors and concepts; twin members get disjoint author sets."""
    rng = _rng(config, "metadata")
    field_authors = {
        _field_name(j): [f"A{j}_{i:03d}" for i in range(config.authors_per_field)]
        for j in range(config.n_fields)
    }
    field_concepts = {
        _field_name(j): [f"C{j}_{i:02d}" for i in range(config.concepts_per_field)]
        for j in range(config.n_fields)
    }
    all_concepts = [c for pool in field_concepts.values() for c in pool]
    concept_weights = {
        f: 1.0 / np.arange(1, len(pool) + 1)
        for f, pool in field_concepts.items()
    }
    twin_author_cursor = 0
    for d in drafts:
        pool = field_authors[d.field]
        if d.is_twin:
            # deterministic disjoint slices so twins never share authors
            size = 2
            start = (twin_author_cursor * size) % (len(pool) - size)
            d.authors = tuple(pool[start : start + size])
            twin_author_cursor += 1
        else:
            size = int(rng.integers(1, config.team_max + 1))
            picks = rng.choice(len(pool), size=min(size, len(pool)), replace=False)
            d.authors = tuple(pool[i] for i in sorted(picks))
        n_concepts = int(rng.integers(config.concepts_min, config.concepts_max + 1))
        weights = concept_weights[d.field]
        probs = weights / weights.sum()
        local = rng.choice(
            field_concepts[d.field],
            size=min(n_concepts, len(field_concepts[d.field])),
            replace=False,
            p=probs,
        )
        concepts = set(local.tolist())
        if rng.random() < config.cross_field_concept_prob:
            concepts.add(str(rng.choice(all_concepts)))
        d.concepts = tuple(sorted(concepts))


def _label_drafts(config: SynthConfig, drafts: list[_Draft]) -> dict[str, str]:
    """Stylized/popularized labels from the same scoring the pipeline runs."""
    embedded = {d.paper_id: d.vector for d in drafts if d.vector is not None}
    ids = sorted(embedded)
    matrix = np.stack([embedded[pid] for pid in ids])
    store = EmbeddingStore(
        dim=config.dim,
        vectors=matrix.astype(np.float32),
        row_index={pid: i for i, pid in enumerate(ids)},
    )
    papers = {
        d.paper_id: PaperRecord(
            paper_id=d.paper_id,
            year=d.year,
            fields_l1=frozenset({d.field}),
        )
        for d in drafts
    }
    corpus = Corpus(papers).with_embeddings(store)
    entries, _ = embed_space.stylize_corpus(
        corpus,
        variant=config.label_variant,
        removal_rank=config.label_removal_rank,
    )
    return {pid: s.label for pid, s in embed_space.aggregate_paper_scores(entries).items()}


def _assign_citations(
    config: SynthConfig, drafts: list[_Draft], labels: dict[str, str]
) -> None:
    rng = _rng(config, "citations")
    ordered = sorted(drafts, key=lambda d: (d.year, d.paper_id))
    years_arr = np.array([d.year for d in ordered])
    penalty_arr = np.array(
        [
            config.citation_penalty
            if labels.get(d.paper_id) == "stylized"
            else 1.0
            for d in ordered
        ]
    )
    indegree = np.zeros(len(ordered))
    position = {d.paper_id: i for i, d in enumerate(ordered)}

    def window_candidates(lo_year: int, hi_year: int, exclude: int) -> np.ndarray:
        lo = int(np.searchsorted(years_arr, lo_year, side="left"))
        hi = int(np.searchsorted(years_arr, hi_year, side="right"))
        block = np.arange(lo, hi)
        return block[block != exclude]

    # receiver quotas: every paper draws its within-window and late citers,
    # in paper-id order so the stream is stable
    for d in sorted(drafts, key=lambda x: x.paper_id):
        me = position[d.paper_id]
        penalty = penalty_arr[me]
        n5 = (
            int(rng.poisson(config.c5_base_rate * penalty))
            if config.c5_base_rate > 0
            else 0
        )
        if n5:
            pool = window_candidates(d.year, d.year + 4, me)
            if len(pool):
                picks = rng.choice(pool, size=min(n5, len(pool)), replace=False)
                for i in sorted(int(x) for x in picks):
                    ordered[i].references.add(d.paper_id)
                    indegree[me] += 1
        n_late = int(rng.poisson(config.late_rate)) if config.late_rate > 0 else 0
        if n_late:
            pool = window_candidates(d.year + 5, d.year + 9, me)
            if len(pool):
                picks = rng.choice(pool, size=min(n_late, len(pool)), replace=False)
                for i in sorted(int(x) for x in picks):
                    ordered[i].references.add(d.paper_id)
                    indegree[me] += 1
    if config.organic_refs_rate <= 0:
        return
    # organic references to older papers (preferential attachment + recency);
    # the citation penalty weights organic uptake as well, so the planted
    # group ratio is not diluted by label-blind references
    for me, d in enumerate(ordered):
        k = int(np.searchsorted(years_arr, d.year, side="left"))
        if k == 0:
            continue
        n_refs = int(rng.poisson(config.organic_refs_rate))
        if n_refs == 0:
            continue
        weights = (
            (indegree[:k] + 1.0) ** config.pa_strength
            * np.exp(-config.recency_decay * (d.year - years_arr[:k]))
            * penalty_arr[:k]
        )
        probs = weights / weights.sum()
        picks = rng.choice(k, size=min(n_refs, k), replace=False, p=probs)
        for i in sorted(int(x) for x in picks):
            d.references.add(ordered[i].paper_id)
            indegree[i] += 1


def _wire_twin_refs_and_contexts(
    config: SynthConfig,
    drafts: list[_Draft],
    pairs: list[tuple[str, str]],
) -> list[dict]:
    """Shared references for twins plus co-citation contexts for detection."""
    rng = _rng(config, "twin_refs")
    index = {d.paper_id: d for d in drafts}
    by_year: dict[int, list[str]] = {}
    for d in drafts:
        by_year.setdefault(d.year, []).append(d.paper_id)
    contexts: list[dict] = []
    for a, b in pairs:
        da, db = index[a], index[b]
        earlier = sorted(
            pid for y, ids in by_year.items() if y < da.year for pid in ids
        )
        earlier = [pid for pid in earlier if pid not in (a, b)]
        # twins draw on the same literature: pool both members' accumulated
        # references (organic and quota-born) into one shared set, then give
        # each member a single distinct reference so the lists differ
        shared = (da.references | db.references) - {a, b}
        unshared = [pid for pid in earlier if pid not in shared]
        while len(shared) < 6 and unshared:
            shared.add(unshared.pop(int(rng.integers(len(unshared)))))
        da.references = set(shared)
        db.references = set(shared)
        if len(unshared) >= 2:
            picks = rng.choice(len(unshared), size=2, replace=False)
            da.references.add(unshared[int(picks[0])])
            db.references.add(unshared[int(picks[1])])
        later = [
            pid
            for y, ids in by_year.items()
            if y >= da.year
            for pid in ids
            if pid not in (a, b)
        ]
        later.sort()
        n_citers = min(3, len(later))
        picks = rng.choice(len(later), size=n_citers, replace=False)
        for k, i in enumerate(sorted(int(x) for x in picks)):
            citer = index[later[i]]
            citer.references |= {a, b}
            contexts.append(
                {
                    "citing_paper_id": citer.paper_id,
                    "sentence_index": 10 + k,
                    "group_index": 0,
                    "cited_ids": [a, b],
                }
            )
    return contexts


def _assign_review_lags(
    config: SynthConfig, drafts: list[_Draft], labels: dict[str, str]
) -> None:
    rng = _rng(config, "review")
    for d in sorted(drafts, key=lambda x: x.paper_id):
        penalty = (
            config.review_penalty if labels.get(d.paper_id) == "stylized" else 1.0
        )
        mean = config.review_base_days * penalty
        days = int(round(rng.gamma(config.review_shape, mean / config.review_shape)))
        days = max(1, days)
        # submitted some day within the publication year
        year_start = (np.datetime64(f"{d.year}-01-01") - np.datetime64("1970-01-01")).astype(int)
        submitted = int(year_start) + int(rng.integers(0, 330))
        d.submitted = submitted
        d.accepted = submitted + days


def _calibrate_yearly_means(
    config: SynthConfig, centers: np.ndarray
) -> dict[int, float]:
    """Monte-Carlo estimate of the expected yearly mean stylization.

    Regenerates each (year, field) cohort `calibration_replicas` times
    with independent seeds and the production cohort sizes, scores each
    replica, and averages. This pins the planted decline independently
    of the emitted corpus sample.
    """
    counts = _year_counts(config)
    means: dict[int, float] = {}
    for t in range(config.n_years):
        scores: list[float] = []
        for rep in range(config.calibration_replicas):
            rng = _rng(config, "calibration", rep, t)
            for j in range(config.n_fields):
                vectors, _ = _cohort_vectors(
                    rng, centers[j], counts[t], _crowding(config, t), config
                )
                ids = tuple(f"X{i:05d}" for i in range(len(vectors)))
                rows, valid = embed_space.rotate_cohort(
                    vectors.astype(np.float64), config.label_removal_rank
                )
                kept = tuple(i for i, ok in zip(ids, valid) if ok)
                entries = embed_space.score_unit_vectors(
                    rows[valid], kept, config.label_variant
                )
                scores.extend(e.score for e in entries)
        means[config.start_year + t] = float(np.mean(scores))
    return means


def generate_corpus(config: SynthConfig, out_dir: str | Path) -> dict:
    """Write the synthetic corpus and return the truth record.

    Files: corpus.ndjson, embeddings.bin, contexts.ndjson, edges.csv,
    truth.json. Fully deterministic per config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    drafts, centers = _generate_drafts(config)
    twin_ids = _inject_twins(config, drafts, centers)
    _assign_metadata(config, drafts)
    if config.citation_penalty != 1.0 or config.review_penalty != 1.0:
        labels = _label_drafts(config, drafts)
    else:
        labels = {}   # no planted bias needs them
    _assign_citations(config, drafts, labels)
    contexts = _wire_twin_refs_and_contexts(config, drafts, twin_ids)
    _assign_review_lags(config, drafts, labels)

    drafts.sort(key=lambda d: d.paper_id)
    with open(out / "corpus.ndjson", "w", encoding="utf-8") as fh:
        for d in drafts:
            record = {
                "paper_id": d.paper_id,
                "doi": f"10.9999/{d.paper_id}",
                "year": d.year,
                "journal": d.journal,
                "fields_l0": [f"discipline_{d.field[-2:]}"],
                "fields_l1": [d.field],
                "author_ids": list(d.authors),
                "reference_ids": sorted(d.references),
                "concept_ids": list(d.concepts),
                "issue_order": d.issue_order,
            }
            if d.submitted is not None:
                record["submitted"] = format_days(d.submitted)
                record["accepted"] = format_days(d.accepted)
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    embedded = [(d.paper_id, d.vector) for d in drafts if d.vector is not None]
    write_embeddings(
        out / "embeddings.bin",
        ids=[pid for pid, _ in embedded],
        matrix=np.stack([v for _, v in embedded]) if embedded else np.zeros((0, config.dim)),
    )
    with open(out / "contexts.ndjson", "w", encoding="utf-8") as fh:
        for ctx in contexts:
            fh.write(json.dumps(ctx, sort_keys=True) + "\n")
    with open(out / "edges.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["citing", "cited"])
        for d in drafts:
            for ref in sorted(d.references):
                writer.writerow([d.paper_id, ref])

    truth: dict = {
        "config": asdict(config),
        "n_papers": len(drafts),
        "labels": {
            "n_stylized": sum(1 for v in labels.values() if v == "stylized"),
            "n_popularized": sum(1 for v in labels.values() if v == "popularized"),
            "variant": config.label_variant,
            "removal_rank": config.label_removal_rank,
        },
        "planted": {
            "c5_ratio": config.citation_penalty,
            "turnaround_ratio": config.review_penalty,
            "twin_pairs": [list(p) for p in twin_ids],
        },
    }
    if config.calibrate_truth:
        yearly = _calibrate_yearly_means(config, centers)
        truth["planted"]["yearly_mean_stylization"] = {
            str(y): m for y, m in sorted(yearly.items())
        }
        if len(yearly) >= 3:
            fit = trend_fit(yearly)
            truth["planted"]["stylization_slope"] = fit.beta
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return truth
