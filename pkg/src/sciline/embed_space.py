"""Embedding-space stylization scores within (year, field) cohorts.

A paper's stylization score is its mean cosine distance to the k most
similar papers published in the same year and level-1 field, computed
after a rotation step (mean-centering plus optional removal of leading
principal directions) that strips components shared by the whole
cohort. Papers scoring strictly above their cohort mean are labeled
"stylized", the rest "popularized".
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Cohort, Corpus, EmbeddingStore
from .linalg import top_principal_directions

VARIANTS = ("knn5", "knn10", "pct5")

DEGENERATE_NORM = 1e-12

LABEL_STYLIZED = "stylized"
LABEL_POPULARIZED = "popularized"


class CohortTooSmallError(ValueError):
    pass


class DegenerateCohortError(ValueError):
    """All rows collapsed to zero after rotation; nothing can be scored."""


@dataclass(frozen=True, slots=True)
class StylizationEntry:
    paper_id: str
    variant: str
    score: float
    neighbor_ids: tuple[str, ...]
    cohort_year: int
    cohort_field: str
    cohort_mean: float
    label: str


@dataclass(frozen=True, slots=True)
class RotatedCohortMatrix:
    key: tuple[int, str]
    ids: tuple[str, ...]          # non-degenerate member ids, ascending
    matrix: np.ndarray            # unit rows aligned with ids
    removal_rank: int
    degenerate_ids: tuple[str, ...]


def rotate_cohort(
    vectors: np.ndarray,
    removal_rank: int,
    *,
    center: bool = True,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Strip shared cohort components and re-normalize rows to unit norm.

    Subtracts the cohort mean vector (the focal row participates in the
    mean), then projects out the top `removal_rank` principal directions
    found by seeded power iteration. Rows whose norm collapses below
    1e-12 are flagged degenerate and zeroed.

    Returns (rows, valid): rows has unit norm where valid is True and
    zeros elsewhere. `center=False` skips the rotation entirely and
    only normalizes, matching the "prior to rotation" variant.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise CohortTooSmallError("rotation needs a cohort of at least 2 vectors")
    if removal_rank < 0:
        raise ValueError("removal_rank must be >= 0")
    work = vectors.copy()
    if center:
        work -= work.mean(axis=0)
        if removal_rank > 0:
            directions = top_principal_directions(work, removal_rank, seed=seed)
            for d in directions:
                work -= np.outer(work @ d, d)
    norms = np.linalg.norm(work, axis=1)
    valid = norms >= DEGENERATE_NORM
    rows = np.zeros_like(work)
    if valid.any():
        rows[valid] = work[valid] / norms[valid, None]
    return rows, valid


def effective_k(variant: str, cohort_size: int) -> int:
    """Number of neighbors averaged for a cohort of the given (valid) size."""
    others = cohort_size - 1
    if variant == "knn5":
        return min(5, others)
    if variant == "knn10":
        return min(10, others)
    if variant == "pct5":
        return max(1, math.ceil(0.05 * others))
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def score_unit_vectors(
    matrix: np.ndarray,
    ids: tuple[str, ...],
    variant: str,
    year: int = 0,
    field_tag: str = "",
) -> list[StylizationEntry]:
    """Score an already-rotated cohort of unit vectors.

    Distance is cosine distance (1 - dot). Each paper's score is the
    mean of its k smallest distances to other members, ties at the k-th
    neighbor broken by ascending paper_id. `ids` must be ascending.
    """
    n = len(ids)
    if n < 2:
        raise CohortTooSmallError("scoring needs at least 2 cohort members")
    k = effective_k(variant, n)
    distances = np.maximum(1.0 - matrix @ matrix.T, 0.0)
    # columns are in ascending-id order, so a stable sort breaks
    # distance ties by ascending paper_id; the k nearest others are
    # always within the k+1 smallest overall
    head = np.argsort(distances, axis=1, kind="stable")[:, : k + 1]
    scores = np.empty(n)
    neighbors: list[tuple[str, ...]] = []
    for i in range(n):
        picked = head[i][head[i] != i][:k]
        scores[i] = float(np.mean(distances[i, picked]))
        neighbors.append(tuple(ids[j] for j in picked))
    cohort_mean = float(scores.mean())
    return [
        StylizationEntry(
            paper_id=ids[i],
            variant=variant,
            score=float(scores[i]),
            neighbor_ids=neighbors[i],
            cohort_year=year,
            cohort_field=field_tag,
            cohort_mean=cohort_mean,
            label=LABEL_STYLIZED if scores[i] > cohort_mean else LABEL_POPULARIZED,
        )
        for i in range(n)
    ]


def rotate_cohort_matrix(
    cohort: Cohort,
    store: EmbeddingStore,
    removal_rank: int,
    *,
    center: bool = True,
    seed: int = 0,
) -> RotatedCohortMatrix:
    vectors = np.stack([store.get(pid) for pid in cohort.members]).astype(np.float64)
    rows, valid = rotate_cohort(vectors, removal_rank, center=center, seed=seed)
    ids = tuple(pid for pid, ok in zip(cohort.members, valid) if ok)
    degenerate = tuple(pid for pid, ok in zip(cohort.members, valid) if not ok)
    return RotatedCohortMatrix(
        key=(cohort.year, cohort.field),
        ids=ids,
        matrix=rows[valid],
        removal_rank=removal_rank,
        degenerate_ids=degenerate,
    )


def _scores_leave_one_out(
    vectors: np.ndarray,
    ids: tuple[str, ...],
    variant: str,
    removal_rank: int,
    seed: int,
    year: int,
    field_tag: str,
) -> list[StylizationEntry]:
    """Scoring variant where each focal paper is excluded from the mean.

    The cohort mean is recomputed per focal paper (leave-one-out); the
    principal directions removed, when requested, still come from the
    full centered cohort.
    """
    n = len(ids)
    k = effective_k(variant, n)
    total = vectors.sum(axis=0)
    directions = np.zeros((0, vectors.shape[1]))
    if removal_rank > 0:
        directions = top_principal_directions(
            vectors - vectors.mean(axis=0), removal_rank, seed=seed
        )
    scores: dict[str, float] = {}
    neighbors: dict[str, tuple[str, ...]] = {}
    for i in range(n):
        mean_loo = (total - vectors[i]) / (n - 1)
        rows = vectors - mean_loo
        for d in directions:
            rows -= np.outer(rows @ d, d)
        norms = np.linalg.norm(rows, axis=1)
        valid = norms >= DEGENERATE_NORM
        if not valid[i]:
            continue
        unit = np.zeros_like(rows)
        unit[valid] = rows[valid] / norms[valid, None]
        distances = np.maximum(1.0 - unit @ unit[i], 0.0)
        candidates = sorted(
            (float(distances[j]), ids[j])
            for j in range(n)
            if j != i and valid[j]
        )
        if not candidates:
            continue
        picked = candidates[: min(k, len(candidates))]
        scores[ids[i]] = sum(d for d, _ in picked) / len(picked)
        neighbors[ids[i]] = tuple(pid for _, pid in picked)
    if not scores:
        raise DegenerateCohortError(
            f"cohort ({year}, {field_tag!r}) is fully degenerate after rotation"
        )
    cohort_mean = float(np.mean(list(scores.values())))
    return [
        StylizationEntry(
            paper_id=pid,
            variant=variant,
            score=scores[pid],
            neighbor_ids=neighbors[pid],
            cohort_year=year,
            cohort_field=field_tag,
            cohort_mean=cohort_mean,
            label=LABEL_STYLIZED if scores[pid] > cohort_mean else LABEL_POPULARIZED,
        )
        for pid in sorted(scores)
    ]


def stylization_scores(
    cohort: Cohort,
    store: EmbeddingStore,
    variant: str = "knn5",
    removal_rank: int = 1,
    *,
    center: bool = True,
    exclude_focal_from_mean: bool = False,
    seed: int = 0,
) -> list[StylizationEntry]:
    """Rotate a cohort and score every non-degenerate member.

    `exclude_focal_from_mean` switches to leave-one-out centering, where
    each paper's own vector does not participate in the mean it is
    centered by.
    """
    if len(cohort) < 2:
        raise CohortTooSmallError(
            f"cohort ({cohort.year}, {cohort.field!r}) has {len(cohort)} members"
        )
    if exclude_focal_from_mean and center:
        vectors = np.stack(
            [store.get(pid) for pid in cohort.members]
        ).astype(np.float64)
        return _scores_leave_one_out(
            vectors, cohort.members, variant, removal_rank, seed,
            cohort.year, cohort.field,
        )
    rotated = rotate_cohort_matrix(
        cohort, store, removal_rank, center=center, seed=seed
    )
    if len(rotated.ids) == 0:
        raise DegenerateCohortError(
            f"cohort ({cohort.year}, {cohort.field!r}) is fully degenerate after rotation"
        )
    if len(rotated.ids) < 2:
        raise CohortTooSmallError(
            f"cohort ({cohort.year}, {cohort.field!r}) has <2 usable members after rotation"
        )
    return score_unit_vectors(
        rotated.matrix, rotated.ids, variant, cohort.year, cohort.field
    )


@dataclass(slots=True)
class StylizeStats:
    cohorts_scored: int = 0
    cohorts_skipped_small: int = 0
    cohorts_skipped_degenerate: int = 0
    small_cohort_warnings: int = 0   # scored with 2-5 members
    degenerate_members: int = 0


def stylize_corpus(
    corpus: Corpus,
    variant: str = "knn5",
    removal_rank: int = 1,
    *,
    center: bool = True,
    exclude_focal_from_mean: bool = False,
    seed: int = 0,
    threads: int = 1,
) -> tuple[list[StylizationEntry], StylizeStats]:
    """Score every cohort of the corpus; deterministic regardless of threads.

    Cohorts are computed independently and merged in (year, field)
    order, so the output is identical for any thread count.
    """
    if corpus.embeddings is None:
        raise ValueError("corpus has no embeddings attached")
    cohorts = corpus.cohorts()
    stats = StylizeStats()

    def run(cohort: Cohort):
        try:
            return stylization_scores(
                cohort, corpus.embeddings, variant, removal_rank,
                center=center, exclude_focal_from_mean=exclude_focal_from_mean,
                seed=seed,
            )
        except CohortTooSmallError:
            return "small"
        except DegenerateCohortError:
            return "degenerate"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cohorts))
    else:
        results = [run(c) for c in cohorts]

    entries: list[StylizationEntry] = []
    for cohort, result in zip(cohorts, results):
        if result == "small":
            stats.cohorts_skipped_small += 1
            continue
        if result == "degenerate":
            stats.cohorts_skipped_degenerate += 1
            continue
        stats.cohorts_scored += 1
        if len(result) <= 5:
            stats.small_cohort_warnings += 1
        stats.degenerate_members += len(cohort) - len(result)
        entries.extend(result)
    return entries, stats


def paper_score(paper_id: str, entries: list[StylizationEntry]) -> float:
    """Mean of one paper's per-cohort scores (single variant)."""
    scores = [e.score for e in entries if e.paper_id == paper_id]
    if not scores:
        raise ValueError(f"no stylization entries for {paper_id!r}")
    return float(np.mean(scores))


@dataclass(frozen=True, slots=True)
class PaperScore:
    paper_id: str
    score: float          # mean over the paper's cohorts
    label: str            # score > mean of its cohorts' means
    n_cohorts: int
    year: int


def aggregate_paper_scores(entries: list[StylizationEntry]) -> dict[str, PaperScore]:
    """Resolve multi-field membership to one score and label per paper.

    The paper-level label compares the mean per-cohort score against the
    mean of the same cohorts' means; for single-field papers this is
    exactly the cohort label.
    """
    by_paper: dict[str, list[StylizationEntry]] = {}
    for e in entries:
        by_paper.setdefault(e.paper_id, []).append(e)
    out: dict[str, PaperScore] = {}
    for pid in sorted(by_paper):
        group = by_paper[pid]
        score = float(np.mean([e.score for e in group]))
        mean_of_means = float(np.mean([e.cohort_mean for e in group]))
        out[pid] = PaperScore(
            paper_id=pid,
            score=score,
            label=LABEL_STYLIZED if score > mean_of_means else LABEL_POPULARIZED,
            n_cohorts=len(group),
            year=group[0].cohort_year,
        )
    return out


HIST_BIN_WIDTH = 0.01
HIST_RANGE = (0.0, 2.0)
HIST_BINS = int(round((HIST_RANGE[1] - HIST_RANGE[0]) / HIST_BIN_WIDTH))


@dataclass(frozen=True, slots=True)
class DecadeReport:
    histograms: dict[int, np.ndarray]             # decade -> 200 bin counts
    decade_means: dict[int, float]
    field_decade_means: dict[tuple[str, int], float]


def decade_distribution(entries: list[StylizationEntry]) -> DecadeReport:
    """Histogram scores by decade (bin width 0.01 over [0, 2]) and report
    per-decade and per-(field, decade) means. Decades with no entries are
    simply absent."""
    if not entries:
        raise ValueError("decade_distribution needs at least one entry")
    hists: dict[int, np.ndarray] = {}
    sums: dict[int, list[float]] = {}
    field_sums: dict[tuple[str, int], list[float]] = {}
    for e in entries:
        decade = (e.cohort_year // 10) * 10
        if decade not in hists:
            hists[decade] = np.zeros(HIST_BINS, dtype=np.int64)
        idx = min(int(e.score / HIST_BIN_WIDTH), HIST_BINS - 1)
        hists[decade][idx] += 1
        sums.setdefault(decade, []).append(e.score)
        field_sums.setdefault((e.cohort_field, decade), []).append(e.score)
    return DecadeReport(
        histograms=hists,
        decade_means={d: float(np.mean(v)) for d, v in sums.items()},
        field_decade_means={k: float(np.mean(v)) for k, v in field_sums.items()},
    )


def write_scores_csv(
    entries: list[StylizationEntry], path: str | Path, seed: int | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["paper_id", "variant", "year", "field", "score",
             "cohort_mean", "label", "neighbors"]
        )
        for e in entries:
            writer.writerow(
                [e.paper_id, e.variant, e.cohort_year, e.cohort_field,
                 format(e.score, ".12g"), format(e.cohort_mean, ".12g"),
                 e.label, ";".join(e.neighbor_ids)]
            )
