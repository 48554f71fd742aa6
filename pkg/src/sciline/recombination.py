"""Knowledge recombination: first-seen concept pairs and their distances.

A combination is an unordered pair of concept tags co-occurring in one
paper. Pairs never seen before (in the pre-cutoff baseline or any prior
year) become events in their first year; later papers carrying the pair
count as reuse. Pair distance is measured in a seeded random-walk
embedding of the concept co-occurrence graph built from the five-year
window ending in the event year; distances above a threshold mark
remote links.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import Corpus, PaperRecord
from .linalg import top_signed_eigenpairs

WINDOW_YEARS = 5
DEFAULT_DIM = 64
DEFAULT_WALKS_PER_NODE = 10
DEFAULT_WALK_LENGTH = 40
DEFAULT_CONTEXT_WINDOW = 5
REMOTE_THRESHOLDS = (0.4, 0.5, 0.6)

Pair = tuple[str, str]


def make_pair(a: str, b: str) -> Pair:
    return (a, b) if a < b else (b, a)


def extract_pairs(paper: PaperRecord) -> set[Pair]:
    """All unordered pairs of the paper's concept tags."""
    tags = sorted(paper.concept_ids)
    return {(tags[i], tags[j]) for i in range(len(tags)) for j in range(i + 1, len(tags))}


def baseline_pairs(corpus: Corpus, cutoff_year: int) -> set[Pair]:
    """Union of concept pairs over all papers published before the cutoff."""
    seen: set[Pair] = set()
    for p in corpus.papers():
        if p.year < cutoff_year:
            seen |= extract_pairs(p)
    return seen


@dataclass(frozen=True, slots=True)
class ComboEvent:
    concept_a: str
    concept_b: str
    first_year: int
    originator_ids: tuple[str, ...]
    reuse_count: int
    distance: float | None = None
    remote: bool | None = None
    disconnected: bool = False

    @property
    def pair(self) -> Pair:
        return (self.concept_a, self.concept_b)


def detect_new_combos(corpus: Corpus, baseline: set[Pair]) -> list[ComboEvent]:
    """Scan years ascending and emit one event per never-seen pair.

    Every paper using the pair in its first year is an originator; later
    papers add to reuse_count. Output is ordered by (first_year, pair).
    """
    by_year: dict[int, list[PaperRecord]] = {}
    for p in corpus.papers():
        by_year.setdefault(p.year, []).append(p)
    seen = set(baseline)
    events: dict[Pair, ComboEvent] = {}
    for year in sorted(by_year):
        year_pairs: dict[Pair, list[str]] = {}
        for p in by_year[year]:
            for pair in extract_pairs(p):
                if pair in seen:
                    if pair in events:
                        e = events[pair]
                        events[pair] = replace(e, reuse_count=e.reuse_count + 1)
                    continue
                year_pairs.setdefault(pair, []).append(p.paper_id)
        for pair, originators in year_pairs.items():
            events[pair] = ComboEvent(
                concept_a=pair[0],
                concept_b=pair[1],
                first_year=year,
                originator_ids=tuple(sorted(originators)),
                reuse_count=0,
            )
        seen |= set(year_pairs)
    return sorted(events.values(), key=lambda e: (e.first_year, e.pair))


def reuse_count(event: ComboEvent, corpus: Corpus) -> int:
    """Papers published after the event's first year containing the pair."""
    pair = event.pair
    return sum(
        1
        for p in corpus.papers()
        if p.year > event.first_year and pair in extract_pairs(p)
    )


def occurrence_conservation(
    corpus: Corpus, baseline: set[Pair], events: list[ComboEvent]
) -> tuple[int, int]:
    """(event mass, occurrence count) for the conservation identity.

    Event mass is the sum of originator counts plus reuses; occurrences
    count every (paper, non-baseline pair) incidence. The two must be
    equal.
    """
    mass = sum(len(e.originator_ids) + e.reuse_count for e in events)
    occurrences = 0
    for p in corpus.papers():
        occurrences += sum(1 for pair in extract_pairs(p) if pair not in baseline)
    return mass, occurrences


@dataclass(frozen=True, slots=True)
class ConceptWindowEmbedding:
    window: tuple[int, int]        # inclusive year range [year-4, year]
    dim: int
    seed: int
    concepts: tuple[str, ...]
    vectors: np.ndarray            # unit rows aligned with concepts; zero if degenerate
    component: dict[str, int]      # connected component labels
    degenerate: frozenset[str]     # concepts with no usable embedding

    def vector(self, concept: str) -> np.ndarray | None:
        try:
            idx = self.concepts.index(concept)
        except ValueError:
            return None
        return self.vectors[idx]


def _cooccurrence_graph(
    corpus: Corpus, start: int, end: int
) -> tuple[list[str], dict[int, list[tuple[int, float]]]]:
    """Concept vocabulary and weighted adjacency for papers in [start, end].

    Edge weight is the number of window papers containing both concepts.
    """
    weights: dict[Pair, int] = {}
    vocab: set[str] = set()
    for p in corpus.papers():
        if start <= p.year <= end:
            vocab |= p.concept_ids
            for pair in extract_pairs(p):
                weights[pair] = weights.get(pair, 0) + 1
    concepts = sorted(vocab)
    index = {c: i for i, c in enumerate(concepts)}
    adjacency: dict[int, list[tuple[int, float]]] = {i: [] for i in range(len(concepts))}
    for (a, b), w in sorted(weights.items()):
        adjacency[index[a]].append((index[b], float(w)))
        adjacency[index[b]].append((index[a], float(w)))
    for i in adjacency:
        adjacency[i].sort()
    return concepts, adjacency


def _components(n: int, adjacency: dict[int, list[tuple[int, float]]]) -> list[int]:
    labels = [-1] * n
    current = 0
    for root in range(n):
        if labels[root] != -1:
            continue
        stack = [root]
        labels[root] = current
        while stack:
            node = stack.pop()
            for nbr, _ in adjacency[node]:
                if labels[nbr] == -1:
                    labels[nbr] = current
                    stack.append(nbr)
        current += 1
    return labels


def _random_walks(
    adjacency: dict[int, list[tuple[int, float]]],
    n: int,
    seed: int,
    walks_per_node: int,
    walk_length: int,
) -> list[list[int]]:
    """Weighted random walks, seeded per start node and merged in node order."""
    walks: list[list[int]] = []
    for node in range(n):
        rng = np.random.default_rng([seed, node])
        for _ in range(walks_per_node):
            walk = [node]
            while len(walk) < walk_length:
                nbrs = adjacency[walk[-1]]
                if not nbrs:
                    break
                cumulative = np.cumsum([w for _, w in nbrs])
                draw = rng.random() * cumulative[-1]
                walk.append(nbrs[int(np.searchsorted(cumulative, draw, side="right"))][0])
            walks.append(walk)
    return walks


def _ppmi(counts: np.ndarray) -> np.ndarray:
    total = counts.sum()
    if total == 0:
        return np.zeros_like(counts)
    row = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.log(counts * total / np.outer(row, row))
    pmi[~np.isfinite(pmi)] = 0.0
    return np.maximum(pmi, 0.0)


def concept_window_embedding(
    corpus: Corpus,
    year: int,
    dim: int = DEFAULT_DIM,
    seed: int = 42,
    walks_per_node: int = DEFAULT_WALKS_PER_NODE,
    walk_length: int = DEFAULT_WALK_LENGTH,
    context_window: int = DEFAULT_CONTEXT_WINDOW,
) -> ConceptWindowEmbedding:
    """Embed concepts of the window [year-4, year] via random walks.

    Walk co-occurrence counts (context window 5) are turned into a PPMI
    matrix and factored by seeded power iteration; rows are
    unit-normalized. Fully deterministic for a given seed.
    """
    start, end = year - (WINDOW_YEARS - 1), year
    concepts, adjacency = _cooccurrence_graph(corpus, start, end)
    n = len(concepts)
    if n == 0:
        raise ValueError(f"no papers with concepts in window [{start}, {end}]")
    walks = _random_walks(adjacency, n, seed, walks_per_node, walk_length)
    counts = np.zeros((n, n), dtype=np.float64)
    for walk in walks:
        length = len(walk)
        for i in range(length):
            for j in range(i + 1, min(i + context_window + 1, length)):
                counts[walk[i], walk[j]] += 1.0
                counts[walk[j], walk[i]] += 1.0
    ppmi = _ppmi(counts)
    rank = min(dim, n)
    values, vectors = top_signed_eigenpairs(ppmi, rank, seed=seed)
    keep = values > 1e-12
    if keep.any():
        coords = vectors[keep].T * np.sqrt(values[keep])[None, :]
    else:
        coords = np.zeros((n, 1))
    norms = np.linalg.norm(coords, axis=1)
    unit = np.zeros_like(coords)
    usable = norms >= 1e-12
    unit[usable] = coords[usable] / norms[usable, None]
    labels = _components(n, adjacency)
    return ConceptWindowEmbedding(
        window=(start, end),
        dim=dim,
        seed=seed,
        concepts=tuple(concepts),
        vectors=unit,
        component={c: labels[i] for i, c in enumerate(concepts)},
        degenerate=frozenset(c for i, c in enumerate(concepts) if not usable[i]),
    )


def combo_distance(pair: Pair, embedding: ConceptWindowEmbedding) -> tuple[float, bool]:
    """(distance in [0, 1], disconnected flag) for a concept pair.

    Distance is (1 - cosine)/2 on the window embedding. Pairs straddling
    components, missing from the vocabulary, or hitting a degenerate
    vector get the disconnected convention: distance 1.0, flag True.
    """
    a, b = pair
    comp = embedding.component
    if a not in comp or b not in comp:
        return 1.0, True
    if comp[a] != comp[b] or a in embedding.degenerate or b in embedding.degenerate:
        return 1.0, True
    va = embedding.vector(a)
    vb = embedding.vector(b)
    cos = float(np.clip(va @ vb, -1.0, 1.0))
    return (1.0 - cos) / 2.0, False


def classify_remote(distance: float, threshold: float = 0.5) -> bool:
    """Strictly-greater comparison against the remoteness threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    if not 0.0 <= distance <= 1.0:
        raise ValueError("distance must be in [0, 1]")
    return distance > threshold


def measure_events(
    corpus: Corpus,
    events: list[ComboEvent],
    threshold: float = 0.5,
    dim: int = DEFAULT_DIM,
    seed: int = 42,
    walks_per_node: int = DEFAULT_WALKS_PER_NODE,
    walk_length: int = DEFAULT_WALK_LENGTH,
    context_window: int = DEFAULT_CONTEXT_WINDOW,
) -> list[ComboEvent]:
    """Fill distance/remote/disconnected on events, one window per year."""
    out: list[ComboEvent] = []
    cache: dict[int, ConceptWindowEmbedding] = {}
    for e in events:
        if e.first_year not in cache:
            cache[e.first_year] = concept_window_embedding(
                corpus, e.first_year, dim=dim, seed=seed,
                walks_per_node=walks_per_node, walk_length=walk_length,
                context_window=context_window,
            )
        distance, disconnected = combo_distance(e.pair, cache[e.first_year])
        out.append(
            replace(
                e,
                distance=distance,
                remote=classify_remote(distance, threshold),
                disconnected=disconnected,
            )
        )
    return out


@dataclass(frozen=True, slots=True)
class RemoteStats:
    year: int
    distance_ratio_stylized: float
    distance_ratio_popularized: float
    remote_prob_ratio_stylized: float
    remote_prob_ratio_popularized: float
    n_stylized: int
    n_popularized: int
    dropped_no_combo: int


def group_remote_stats(
    events: list[ComboEvent],
    labels: dict[str, str],
    year_of: dict[str, int],
    year: int,
    include_no_combo: bool = True,
) -> RemoteStats:
    """Group-to-overall ratios of mean combination distance and remote
    probability for papers of one year.

    Per paper, distance is the mean over its new combinations
    (disconnected ones enter at 1.0) and remote probability the fraction
    of them that are remote. With `include_no_combo`, papers introducing
    nothing contribute zero on both; otherwise they are dropped.
    """
    per_paper: dict[str, tuple[list[float], list[bool]]] = {}
    for e in events:
        if e.first_year != year or e.distance is None:
            continue
        for pid in e.originator_ids:
            if labels.get(pid) is None:
                continue
            bucket = per_paper.setdefault(pid, ([], []))
            bucket[0].append(e.distance)
            bucket[1].append(bool(e.remote))
    dropped = 0
    rows: list[tuple[str, float, float]] = []
    for pid, label in labels.items():
        if year_of.get(pid) != year:
            continue
        if pid in per_paper:
            distances, remotes = per_paper[pid]
            rows.append((label, float(np.mean(distances)), float(np.mean(remotes))))
        elif include_no_combo:
            rows.append((label, 0.0, 0.0))
        else:
            dropped += 1
    sty = [(d, r) for lab, d, r in rows if lab == "stylized"]
    pop = [(d, r) for lab, d, r in rows if lab == "popularized"]
    if not sty or not pop:
        raise ValueError(f"year {year}: both label groups must be nonempty")
    overall_d = float(np.mean([d for _, d, _ in rows]))
    overall_r = float(np.mean([r for _, _, r in rows]))

    def ratio(group_mean: float, overall: float) -> float:
        return group_mean / overall if overall > 0 else float("nan")

    return RemoteStats(
        year=year,
        distance_ratio_stylized=ratio(float(np.mean([d for d, _ in sty])), overall_d),
        distance_ratio_popularized=ratio(float(np.mean([d for d, _ in pop])), overall_d),
        remote_prob_ratio_stylized=ratio(float(np.mean([r for _, r in sty])), overall_r),
        remote_prob_ratio_popularized=ratio(float(np.mean([r for _, r in pop])), overall_r),
        n_stylized=len(sty),
        n_popularized=len(pop),
        dropped_no_combo=dropped,
    )


def write_combos_csv(
    events: list[ComboEvent], path: str | Path, seed: int | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["concept_a", "concept_b", "first_year", "originators", "distance",
             "remote", "reuse_count", "disconnected_flag"]
        )
        for e in events:
            writer.writerow(
                [e.concept_a, e.concept_b, e.first_year,
                 ";".join(e.originator_ids),
                 "" if e.distance is None else format(e.distance, ".12g"),
                 "" if e.remote is None else int(e.remote),
                 e.reuse_count, int(e.disconnected)]
            )
