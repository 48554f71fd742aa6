"""Citation-graph metrics: the CD index and its per-reference decomposition.

For a focal paper p with references r_p, the index looks at every later
paper citing p or a member of r_p; citers that reach p while bypassing
r_p push the index toward +1 (disruption), citers using both push it
toward -1 (consolidation). The decomposition repeats the computation as
if each reference were the only one, yielding per-reference
consolidation/disruption components whose population dispersions
summarize how unevenly the paper treats its knowledge base.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus


class UnknownPaperError(KeyError):
    pass


class CitationGraph:
    """Forward (paper -> references) and inverse (paper -> citers) indexes.

    Years are known for corpus papers; bare reference ids appearing only
    on the cited side carry year None and never act as citers.
    """

    def __init__(self, references: dict[str, set[str]], years: dict[str, int | None]):
        self.references = {k: frozenset(v) - {k} for k, v in references.items()}
        self.years: dict[str, int | None] = dict(years)
        citers: dict[str, set[str]] = {}
        for citing, refs in self.references.items():
            self.years.setdefault(citing, None)
            for cited in refs:
                citers.setdefault(cited, set()).add(citing)
                self.years.setdefault(cited, None)
        self._citers = {k: frozenset(v) for k, v in citers.items()}

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "CitationGraph":
        references = {p.paper_id: set(p.reference_ids) for p in corpus.papers()}
        years = {p.paper_id: p.year for p in corpus.papers()}
        return cls(references, years)

    @classmethod
    def from_edges(
        cls, edges: list[tuple[str, str]], years: dict[str, int | None]
    ) -> "CitationGraph":
        references: dict[str, set[str]] = {}
        for citing, cited in edges:
            references.setdefault(citing, set()).add(cited)
        return cls(references, years)

    def nodes(self) -> list[str]:
        return sorted(self.years)

    def refs_of(self, paper_id: str) -> frozenset[str]:
        if paper_id not in self.years:
            raise UnknownPaperError(paper_id)
        return self.references.get(paper_id, frozenset())

    def citers_of(self, paper_id: str) -> frozenset[str]:
        if paper_id not in self.years:
            raise UnknownPaperError(paper_id)
        return self._citers.get(paper_id, frozenset())

    def year_of(self, paper_id: str) -> int | None:
        return self.years.get(paper_id)


def _later_citers(graph: CitationGraph, paper_id: str, targets: frozenset[str]) -> set[str]:
    """Papers published strictly after the focal year citing the focal
    paper or any target reference (same-year citers are excluded)."""
    focal_year = graph.year_of(paper_id)
    pool: set[str] = set(graph.citers_of(paper_id))
    for ref in targets:
        pool |= graph.citers_of(ref)
    pool.discard(paper_id)
    if focal_year is None:
        return set()
    return {
        c for c in pool
        if graph.year_of(c) is not None and graph.year_of(c) > focal_year
    }


def cd_index(graph: CitationGraph, paper_id: str) -> float | None:
    """CD in [-1, 1]: mean over later citers of (-2 f b + f), where f
    marks citing the focal paper and b citing any of its references.
    None when no later citer touches the focal paper or its references."""
    if paper_id not in graph.years:
        raise UnknownPaperError(paper_id)
    refs = graph.refs_of(paper_id)
    citers_p = graph.citers_of(paper_id)
    pool = _later_citers(graph, paper_id, refs)
    if not pool:
        return None
    total = 0
    for c in pool:
        f = 1 if c in citers_p else 0
        b = 1 if graph.refs_of(c) & refs else 0
        total += -2 * f * b + f
    return total / len(pool)


@dataclass(frozen=True, slots=True)
class ReferenceComponent:
    reference_id: str
    c_j: float            # in [-1, 0]
    d_j: float            # in [-1, 1]
    empty_citer_set: bool  # no later paper cites p or this reference


@dataclass(frozen=True, slots=True)
class DisruptionProfile:
    paper_id: str
    cd: float | None
    per_ref: tuple[ReferenceComponent, ...]
    c_prime: float | None   # population std of the C_j
    d_prime: float | None   # population std of the D_j
    cd_prime: float | None  # population std of the D_j - C_j
    n_citers: int


def decompose_cd(graph: CitationGraph, paper_id: str) -> DisruptionProfile:
    """Per-reference consolidation/disruption components and their dispersions.

    Each reference j is treated as if it were the focal paper's only
    reference: over later papers citing p or j, C_j = mean(-f b_j) and
    D_j = mean(f - f b_j). References nobody co-examines (empty citer
    set) contribute C_j = D_j = 0 and are flagged. Dispersions are
    population (1/N) standard deviations; a reference-free paper gets an
    empty profile with null dispersions.
    """
    if paper_id not in graph.years:
        raise UnknownPaperError(paper_id)
    refs = sorted(graph.refs_of(paper_id))
    cd = cd_index(graph, paper_id)
    n_citers = len(_later_citers(graph, paper_id, graph.refs_of(paper_id)))
    if not refs:
        return DisruptionProfile(
            paper_id=paper_id, cd=cd, per_ref=(),
            c_prime=None, d_prime=None, cd_prime=None, n_citers=n_citers,
        )
    citers_p = graph.citers_of(paper_id)
    components: list[ReferenceComponent] = []
    for ref in refs:
        pool = _later_citers(graph, paper_id, frozenset({ref}))
        if not pool:
            components.append(ReferenceComponent(ref, 0.0, 0.0, True))
            continue
        c_sum = 0
        d_sum = 0
        ref_citers = graph.citers_of(ref)
        for c in pool:
            f = 1 if c in citers_p else 0
            b = 1 if c in ref_citers else 0
            c_sum += -f * b
            d_sum += f - f * b
        components.append(
            ReferenceComponent(ref, c_sum / len(pool), d_sum / len(pool), False)
        )
    c_vals = np.array([comp.c_j for comp in components])
    d_vals = np.array([comp.d_j for comp in components])
    return DisruptionProfile(
        paper_id=paper_id,
        cd=cd,
        per_ref=tuple(components),
        c_prime=float(np.std(c_vals)),
        d_prime=float(np.std(d_vals)),
        cd_prime=float(np.std(d_vals - c_vals)),
        n_citers=n_citers,
    )


@dataclass(frozen=True, slots=True)
class DisruptionRatio:
    year: int
    cutoff: float
    p_stylized: float
    p_popularized: float
    ratio: float | None   # None when the popularized exceedance is zero
    undefined: bool


def disruption_ratio(
    cd_by_paper: dict[str, float],
    labels: dict[str, str],
    year_of: dict[str, int],
    year: int,
) -> DisruptionRatio:
    """Likelihood ratio of exceeding the year's median CD, stylized over
    popularized. Papers without a defined CD never enter."""
    values = [
        (cd_by_paper[pid], labels[pid])
        for pid in cd_by_paper
        if year_of.get(pid) == year and pid in labels
    ]
    stylized = [v for v, lab in values if lab == "stylized"]
    popularized = [v for v, lab in values if lab == "popularized"]
    if not stylized or not popularized:
        raise ValueError(f"year {year}: both label groups must be nonempty")
    cutoff = float(np.median([v for v, _ in values]))
    p_s = sum(1 for v in stylized if v > cutoff) / len(stylized)
    p_p = sum(1 for v in popularized if v > cutoff) / len(popularized)
    if p_p == 0.0:
        return DisruptionRatio(year, cutoff, p_s, p_p, None, True)
    return DisruptionRatio(year, cutoff, p_s, p_p, p_s / p_p, False)


def pagerank(
    graph: CitationGraph,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> dict[str, float]:
    """PageRank over the citation graph (edges citer -> cited).

    Power iteration to `tol` in L1; mass of dangling nodes (papers with
    no resolvable references) is redistributed uniformly. Scores sum
    to 1.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must be in (0, 1)")
    nodes = graph.nodes()
    if not nodes:
        raise ValueError("pagerank on an empty graph")
    n = len(nodes)
    index = {node: i for i, node in enumerate(nodes)}
    out_edges: list[np.ndarray] = []
    for node in nodes:
        refs = [index[r] for r in sorted(graph.refs_of(node)) if r in index]
        out_edges.append(np.array(refs, dtype=np.int64))
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = np.zeros(n)
        dangling = 0.0
        for i, targets in enumerate(out_edges):
            if len(targets) == 0:
                dangling += x[i]
            else:
                np.add.at(new, targets, x[i] / len(targets))
        new = damping * (new + dangling / n) + (1.0 - damping) / n
        if float(np.abs(new - x).sum()) < tol:
            x = new
            break
        x = new
    return {node: float(x[index[node]]) for node in nodes}


def write_disruption_csv(
    profiles: list[DisruptionProfile], path: str | Path, seed: int | None = None
) -> None:
    def fmt(x: float | None) -> str:
        return "" if x is None else format(x, ".12g")

    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["paper_id", "cd", "c_prime", "d_prime", "cd_prime", "n_citers", "n_refs"]
        )
        for p in profiles:
            writer.writerow(
                [p.paper_id, fmt(p.cd), fmt(p.c_prime), fmt(p.d_prime),
                 fmt(p.cd_prime), p.n_citers, len(p.per_ref)]
            )
