"""Twin papers: simultaneous-discovery pairs and score validation.

Twin candidates are pairs repeatedly cited together in the same
parenthetical group or adjacent sentences; accepted pairs share the
publication year, have disjoint author lists, and heavily overlapping
references. Because twins report near-identical findings, a sound
stylization measure must give them near-identical scores; the
validation battery quantifies that against year/field-matched controls.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, PaperRecord
from .embed_space import StylizationEntry
from .reception import rank_sum_test

DEFAULT_MIN_COCITE = 3
DEFAULT_REFSIM_THRESHOLD = 0.5

Pair = tuple[str, str]


@dataclass(frozen=True, slots=True)
class CitationContext:
    """One parenthetical citation group inside a citing paper."""

    citing_paper_id: str
    sentence_index: int
    group_index: int
    cited_ids: tuple[str, ...]


def load_contexts(path: str | Path) -> list[CitationContext]:
    contexts: list[CitationContext] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            cited = tuple(obj["cited_ids"])
            if not cited:
                raise ValueError(f"{path}:{lineno}: cited_ids must be nonempty")
            contexts.append(
                CitationContext(
                    citing_paper_id=obj["citing_paper_id"],
                    sentence_index=int(obj["sentence_index"]),
                    group_index=int(obj["group_index"]),
                    cited_ids=cited,
                )
            )
    return contexts


def _pairs_of(ids) -> set[Pair]:
    unique = sorted(set(ids))
    return {
        (unique[i], unique[j])
        for i in range(len(unique))
        for j in range(i + 1, len(unique))
    }


def cocitation_pairs(contexts: list[CitationContext]) -> dict[Pair, int]:
    """Co-citation counts: within-group pairs plus adjacent-sentence pairs.

    Every unordered pair inside one context group counts once. For each
    unordered pair of distinct groups of the same citing paper whose
    sentence indexes differ by at most 1, every cross-group pair counts
    once more.
    """
    counts: dict[Pair, int] = {}

    def bump(pair: Pair, by: int = 1) -> None:
        counts[pair] = counts.get(pair, 0) + by

    by_citer: dict[str, list[CitationContext]] = {}
    for ctx in contexts:
        for pair in _pairs_of(ctx.cited_ids):
            bump(pair)
        by_citer.setdefault(ctx.citing_paper_id, []).append(ctx)
    for groups in by_citer.values():
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                g1, g2 = groups[i], groups[j]
                if abs(g1.sentence_index - g2.sentence_index) > 1:
                    continue
                cross = {
                    (a, b) if a < b else (b, a)
                    for a in set(g1.cited_ids)
                    for b in set(g2.cited_ids)
                    if a != b
                }
                for pair in cross:
                    bump(pair)
    return counts


def refsim(paper_a: PaperRecord, paper_b: PaperRecord) -> float | None:
    """Reference-overlap coefficient |A∩B| / min(|A|, |B|); None if a
    paper has no references."""
    ra, rb = paper_a.reference_ids, paper_b.reference_ids
    if not ra or not rb:
        return None
    return len(ra & rb) / min(len(ra), len(rb))


@dataclass(frozen=True, slots=True)
class TwinPair:
    paper_a: str
    paper_b: str
    co_citation_count: int
    refsim: float
    year: int
    b2b: bool
    b2b_order_known: bool
    score_diff: float | None = None


def b2b_flag(pair: Pair, corpus: Corpus) -> tuple[bool, bool]:
    """(back-to-back, order_known): same journal and year with adjacent
    issue positions. Missing order data yields (False, False)."""
    a, b = corpus[pair[0]], corpus[pair[1]]
    if a.journal is None or a.journal != b.journal or a.year != b.year:
        return False, True
    if a.issue_order is None or b.issue_order is None:
        return False, False
    return abs(a.issue_order - b.issue_order) == 1, True


def detect_twins(
    pair_counts: dict[Pair, int],
    corpus: Corpus,
    min_cocite: int = DEFAULT_MIN_COCITE,
    refsim_threshold: float = DEFAULT_REFSIM_THRESHOLD,
) -> list[TwinPair]:
    """Filter co-citation pairs down to accepted twins, in pair order.

    Keeps pairs co-cited at least `min_cocite` times whose members are
    both in the corpus, share the publication year, have disjoint author
    sets, and have reference overlap at or above the threshold.
    """
    twins: list[TwinPair] = []
    for pair in sorted(pair_counts):
        count = pair_counts[pair]
        if count < min_cocite:
            continue
        a = corpus.get(pair[0])
        b = corpus.get(pair[1])
        if a is None or b is None:
            continue
        if a.year != b.year:
            continue
        if set(a.author_ids) & set(b.author_ids):
            continue
        overlap = refsim(a, b)
        if overlap is None or overlap < refsim_threshold:
            continue
        is_b2b, order_known = b2b_flag(pair, corpus)
        twins.append(
            TwinPair(
                paper_a=pair[0],
                paper_b=pair[1],
                co_citation_count=count,
                refsim=overlap,
                year=a.year,
                b2b=is_b2b,
                b2b_order_known=order_known,
            )
        )
    return twins


def _pair_seed(seed: int, pair: Pair) -> list[int]:
    digest = hashlib.sha256(f"{pair[0]}|{pair[1]}".encode()).digest()
    return [seed, int.from_bytes(digest[:8], "little")]


def sample_controls(pair: Pair, corpus: Corpus, seed: int) -> str:
    """Uniformly pick a control paper from the twins' year sharing a
    level-1 field with the first member; excludes both twins and papers
    without embeddings. Deterministic per (seed, pair)."""
    a = corpus[pair[0]]
    store = corpus.embeddings
    candidates = [
        p.paper_id
        for p in corpus.papers()
        if p.year == a.year
        and p.paper_id not in pair
        and p.fields_l1 & a.fields_l1
        and (store is None or p.paper_id in store)
    ]
    if not candidates:
        raise ValueError(f"no control candidates for pair {pair}")
    rng = np.random.default_rng(_pair_seed(seed, pair))
    return candidates[int(rng.integers(len(candidates)))]


SURVIVAL_GRID = tuple(float(t) for t in np.linspace(0.0, 1.0, 201))


def _survival(diffs: list[float]) -> tuple[float, ...]:
    arr = np.asarray(diffs)
    return tuple(float(np.mean(arr > t)) for t in SURVIVAL_GRID)


@dataclass(frozen=True, slots=True)
class ValidationReport:
    n_pairs: int
    pearson_r: float | None      # None when either score vector is constant
    frac_twin_within_005: float
    frac_control_within_005: float
    rank_sum_p: float
    mutual_knn_fraction: float
    overlap_histogram: tuple[int, ...]   # shared neighbors 0..5
    survival_thresholds: tuple[float, ...]
    survival_twin: tuple[float, ...]
    survival_control: tuple[float, ...]
    twin_diffs: tuple[float, ...]
    control_diffs: tuple[float, ...]


def validate_scores(
    pairs: list[TwinPair],
    entries: dict[str, StylizationEntry],
    controls: dict[Pair, str],
) -> ValidationReport:
    """Score-consistency battery over accepted twin pairs.

    Compares twin score gaps against twin-vs-control gaps, reports the
    Pearson correlation of twin scores, the fraction of gaps within
    0.05, a rank-sum p-value for gap distributions, and how often twins
    are mutual k-nearest neighbors.
    """
    if not pairs:
        raise ValueError("validate_scores needs at least one twin pair")
    scores_a: list[float] = []
    scores_b: list[float] = []
    twin_diffs: list[float] = []
    control_diffs: list[float] = []
    mutual = 0
    overlap_hist = [0] * 6
    usable = 0
    for pair in pairs:
        ea = entries.get(pair.paper_a)
        eb = entries.get(pair.paper_b)
        if ea is None or eb is None:
            continue
        usable += 1
        scores_a.append(ea.score)
        scores_b.append(eb.score)
        twin_diffs.append(abs(ea.score - eb.score))
        control_id = controls.get((pair.paper_a, pair.paper_b))
        ec = entries.get(control_id) if control_id else None
        if ec is not None:
            control_diffs.append(abs(ea.score - ec.score))
        if pair.paper_b in ea.neighbor_ids and pair.paper_a in eb.neighbor_ids:
            mutual += 1
        shared = len(set(ea.neighbor_ids) & set(eb.neighbor_ids))
        overlap_hist[min(shared, 5)] += 1
    if usable == 0:
        raise ValueError("no twin pair has scores for both members")
    a = np.asarray(scores_a)
    b = np.asarray(scores_b)
    if np.std(a) == 0.0 or np.std(b) == 0.0:
        pearson = None   # correlation undefined for constant scores
    else:
        pearson = float(np.corrcoef(a, b)[0, 1])
    twin_arr = np.asarray(twin_diffs)
    control_arr = np.asarray(control_diffs)
    rank_p = (
        rank_sum_test(twin_diffs, control_diffs) if len(control_diffs) else float("nan")
    )
    return ValidationReport(
        n_pairs=usable,
        pearson_r=pearson,
        frac_twin_within_005=float(np.mean(twin_arr <= 0.05)),
        frac_control_within_005=(
            float(np.mean(control_arr <= 0.05)) if len(control_diffs) else float("nan")
        ),
        rank_sum_p=rank_p,
        mutual_knn_fraction=mutual / usable,
        overlap_histogram=tuple(overlap_hist),
        survival_thresholds=SURVIVAL_GRID,
        survival_twin=_survival(twin_diffs),
        survival_control=_survival(control_diffs) if control_diffs else (),
        twin_diffs=tuple(twin_diffs),
        control_diffs=tuple(control_diffs),
    )


def write_twins_csv(
    pairs: list[TwinPair],
    entries: dict[str, StylizationEntry],
    controls: dict[Pair, str],
    path: str | Path,
    seed: int | None = None,
) -> None:
    def fmt(x) -> str:
        return "" if x is None else format(x, ".12g")

    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["paper_a", "paper_b", "cocite", "refsim", "b2b", "score_a",
             "score_b", "score_diff", "control_id", "control_diff"]
        )
        for pair in pairs:
            ea = entries.get(pair.paper_a)
            eb = entries.get(pair.paper_b)
            control_id = controls.get((pair.paper_a, pair.paper_b), "")
            ec = entries.get(control_id) if control_id else None
            score_a = ea.score if ea else None
            score_b = eb.score if eb else None
            diff = abs(score_a - score_b) if ea and eb else None
            control_diff = abs(score_a - ec.score) if ea and ec else None
            writer.writerow(
                [pair.paper_a, pair.paper_b, pair.co_citation_count,
                 fmt(pair.refsim), int(pair.b2b), fmt(score_a), fmt(score_b),
                 fmt(diff), control_id, fmt(control_diff)]
            )
