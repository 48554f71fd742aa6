"""Reception metrics: citation windows, normalization, delayed recognition,
review turnaround, and the yearly stylized/popularized ratio series.

Citation windows are half-open ([0, 5) and [0, 10) year offsets), so a
same-year citation counts. Group comparisons use a two-sided Wilcoxon
rank-sum test, exact by enumeration for small samples and normal with
tie and continuity corrections otherwise.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from .corpus import Corpus, SubmissionHistory
from .disruption import CitationGraph

TURNAROUND_MIN_DAYS = 30
TURNAROUND_MAX_DAYS = 1000

EXCLUDED_TOO_SHORT = "too_short"
EXCLUDED_TOO_LONG = "too_long"
EXCLUDED_MISSING = "missing_dates"


def citation_windows(
    graph: CitationGraph, paper_id: str, inclusive: bool = False
) -> tuple[int, int, int]:
    """(c5, c10, total): citations with year offset in [0,5), [0,10), and all.

    `inclusive` switches to closed windows [0,5] / [0,10].
    """
    focal_year = graph.year_of(paper_id)
    if paper_id not in graph.years:
        raise KeyError(paper_id)
    hi5, hi10 = (6, 11) if inclusive else (5, 10)
    c5 = c10 = total = 0
    for citer in graph.citers_of(paper_id):
        total += 1
        year = graph.year_of(citer)
        if year is None or focal_year is None:
            continue
        offset = year - focal_year
        if 0 <= offset < hi5:
            c5 += 1
        if 0 <= offset < hi10:
            c10 += 1
    return c5, c10, total


@dataclass(frozen=True, slots=True)
class NormalizationResult:
    values: dict[str, float]                       # per paper, field-averaged
    per_group: dict[tuple[str, int], dict[str, float]]  # (field, year) -> pid -> value
    zero_groups: frozenset[tuple[str, int]]        # groups where every count is 0


def normalize_citations(
    counts: dict[str, int],
    year_of: dict[str, int],
    fields_of: dict[str, frozenset[str]],
) -> NormalizationResult:
    """Divide each count by its (field, year) group mean.

    Groups whose mean is zero yield 0 for all members and are flagged.
    Multi-field papers are normalized within each field, then averaged.
    """
    groups: dict[tuple[str, int], list[str]] = {}
    for pid in counts:
        for tag in fields_of.get(pid, frozenset()):
            groups.setdefault((tag, year_of[pid]), []).append(pid)
    per_group: dict[tuple[str, int], dict[str, float]] = {}
    zero_groups: set[tuple[str, int]] = set()
    for key, members in groups.items():
        mean = float(np.mean([counts[pid] for pid in members]))
        if mean == 0.0:
            zero_groups.add(key)
            per_group[key] = {pid: 0.0 for pid in members}
        else:
            per_group[key] = {pid: counts[pid] / mean for pid in members}
    values: dict[str, float] = {}
    for pid in counts:
        tags = fields_of.get(pid, frozenset())
        if not tags:
            continue
        values[pid] = float(
            np.mean([per_group[(tag, year_of[pid])][pid] for tag in tags])
        )
    return NormalizationResult(
        values=values,
        per_group=per_group,
        zero_groups=frozenset(zero_groups),
    )


def sleeping_beauty(trajectory: list[int] | list[float]) -> float:
    """Delayed-recognition strength of a yearly citation trajectory.

    Sums, from publication to the citation peak t_m (earliest peak on
    ties), the gap between the straight line joining c_0 to c_{t_m} and
    the actual counts, each term scaled by max(1, c_t):

        B = sum_{t=0}^{t_m} ((c_{t_m} - c_0)/t_m * t + c_0 - c_t) / max(1, c_t)

    B = 0 when the peak is immediate. Trajectories running above the
    line yield negative terms, so B can be negative.
    """
    if len(trajectory) == 0:
        raise ValueError("empty citation trajectory")
    counts = list(trajectory)
    t_m = int(np.argmax(counts))  # argmax returns the earliest maximum
    if t_m == 0:
        return 0.0
    # exact rational arithmetic so integer trajectories give exact sums
    c0, cm = Fraction(counts[0]), Fraction(counts[t_m])
    slope = (cm - c0) / t_m
    total = sum(
        (slope * t + c0 - Fraction(counts[t])) / max(1, Fraction(counts[t]))
        for t in range(t_m + 1)
    )
    return float(total)


def citation_trajectory(
    graph: CitationGraph, paper_id: str, end_year: int
) -> list[int]:
    """Yearly citation counts from the publication year through end_year."""
    focal_year = graph.year_of(paper_id)
    if focal_year is None:
        raise ValueError(f"paper {paper_id!r} has no known year")
    length = end_year - focal_year + 1
    if length < 1:
        raise ValueError("end_year precedes the publication year")
    counts = [0] * length
    for citer in graph.citers_of(paper_id):
        year = graph.year_of(citer)
        if year is not None and 0 <= year - focal_year < length:
            counts[year - focal_year] += 1
    return counts


@dataclass(frozen=True, slots=True)
class TurnaroundResult:
    days: int | None
    excluded_reason: str | None

    @property
    def kept(self) -> bool:
        return self.excluded_reason is None


def turnaround(
    history: SubmissionHistory | None,
    min_days: int = TURNAROUND_MIN_DAYS,
    max_days: int = TURNAROUND_MAX_DAYS,
    include_outliers: bool = False,
) -> TurnaroundResult:
    """Days from submission to acceptance, with the default [30, 1000]
    plausibility filter; `include_outliers` disables the bounds."""
    if history is None:
        return TurnaroundResult(None, EXCLUDED_MISSING)
    days = history.accepted - history.submitted
    if days < 0:
        raise ValueError("accepted date precedes submitted date")
    if not include_outliers:
        if days < min_days:
            return TurnaroundResult(days, EXCLUDED_TOO_SHORT)
        if days > max_days:
            return TurnaroundResult(days, EXCLUDED_TOO_LONG)
    return TurnaroundResult(days, None)


RANK_SUM_EXACT_MAX = 8


def _rank_sum_u(a: np.ndarray, b: np.ndarray) -> float:
    combined = np.concatenate([a, b])
    ranks = sstats.rankdata(combined)  # midranks for ties
    r1 = float(ranks[: len(a)].sum())
    return r1 - len(a) * (len(a) + 1) / 2.0


def rank_sum_test(sample_a, sample_b) -> float:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value.

    Exact by full enumeration of group assignments when both samples
    have at most 8 values (p is the fraction of assignments whose U is
    at least as far from its null mean); otherwise the normal
    approximation with tie correction and a 0.5 continuity correction.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("rank_sum_test needs two nonempty samples")
    n1, n2 = a.size, b.size
    mu = n1 * n2 / 2.0
    u_obs = _rank_sum_u(a, b)
    if n1 <= RANK_SUM_EXACT_MAX and n2 <= RANK_SUM_EXACT_MAX:
        combined = np.concatenate([a, b])
        ranks = sstats.rankdata(combined)
        offset = n1 * (n1 + 1) / 2.0
        observed = abs(u_obs - mu)
        hits = 0
        total = 0
        for picks in itertools.combinations(range(n1 + n2), n1):
            u = ranks[list(picks)].sum() - offset
            total += 1
            # tolerance eats float noise from midranks
            if abs(u - mu) >= observed - 1e-9:
                hits += 1
        return hits / total
    combined = np.concatenate([a, b])
    n = n1 + n2
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(((tie_counts**3) - tie_counts).sum())
    variance = (n1 * n2 / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        return 1.0
    z = max(abs(u_obs - mu) - 0.5, 0.0) / math.sqrt(variance)
    return float(min(1.0, math.erfc(z / math.sqrt(2.0))))


def significance_stars(p_value: float | None) -> str:
    """Figure-style stars: * p<0.1, ** p<0.05, *** p<0.01."""
    if p_value is None:
        return ""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


@dataclass(frozen=True, slots=True)
class RatioPoint:
    year: int
    stylized_mean: float
    popularized_mean: float
    ratio: float | None     # None when the popularized mean is <= 0
    p_value: float
    stars: str
    n_stylized: int
    n_popularized: int


@dataclass(frozen=True, slots=True)
class RatioSeries:
    metric: str
    points: tuple[RatioPoint, ...]
    skipped_years: tuple[int, ...]  # years lacking one of the groups


def ratio_series(
    metric: str,
    values: dict[str, float],
    labels: dict[str, str],
    year_of: dict[str, int],
) -> RatioSeries:
    """Yearly stylized/popularized mean ratio with rank-sum significance."""
    by_year: dict[int, dict[str, list[float]]] = {}
    for pid, value in values.items():
        label = labels.get(pid)
        year = year_of.get(pid)
        if label is None or year is None:
            continue
        by_year.setdefault(year, {}).setdefault(label, []).append(value)
    points: list[RatioPoint] = []
    skipped: list[int] = []
    for year in sorted(by_year):
        groups = by_year[year]
        sty = groups.get("stylized", [])
        pop = groups.get("popularized", [])
        if not sty or not pop:
            skipped.append(year)
            continue
        s_mean = float(np.mean(sty))
        p_mean = float(np.mean(pop))
        p_value = rank_sum_test(sty, pop)
        ratio = s_mean / p_mean if p_mean > 0 else None
        points.append(
            RatioPoint(
                year=year,
                stylized_mean=s_mean,
                popularized_mean=p_mean,
                ratio=ratio,
                p_value=p_value,
                stars=significance_stars(p_value),
                n_stylized=len(sty),
                n_popularized=len(pop),
            )
        )
    return RatioSeries(metric=metric, points=tuple(points), skipped_years=tuple(skipped))


def silverman_bandwidth(x: np.ndarray) -> float:
    std = float(np.std(x))
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    candidates = [v for v in (std, iqr / 1.34) if v > 0]
    if not candidates:
        raise ValueError("degenerate x-range: bandwidth is undefined")
    return 0.9 * min(candidates) * len(x) ** (-0.2)


def kernel_smooth(
    points: list[tuple[float, float]],
    bandwidth: float | None = None,
    grid_size: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Nadaraya-Watson estimate with a Gaussian kernel on an even x-grid."""
    if len(points) < 2:
        raise ValueError("kernel_smooth needs at least 2 points")
    pts = sorted(points)
    x = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.array([p[1] for p in pts], dtype=np.float64)
    if x.max() == x.min():
        raise ValueError("degenerate x-range")
    h = bandwidth if bandwidth is not None else silverman_bandwidth(x)
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    grid = np.linspace(x.min(), x.max(), grid_size)
    weights = np.exp(-0.5 * ((grid[:, None] - x[None, :]) / h) ** 2)
    curve = (weights * y[None, :]).sum(axis=1) / weights.sum(axis=1)
    return grid, curve


@dataclass(frozen=True, slots=True)
class TrendFit:
    beta: float
    intercept: float
    r2: float
    beta_se: float
    years: tuple[int, ...]
    fitted: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]


def trend_fit(yearly_means: dict[int, float]) -> TrendFit:
    """OLS fit of yearly means against year, with a 95% confidence band."""
    if len(yearly_means) < 3:
        raise ValueError("trend_fit needs at least 3 years")
    years = sorted(yearly_means)
    x = np.array(years, dtype=np.float64)
    y = np.array([yearly_means[t] for t in years])
    n = len(x)
    x_mean = x.mean()
    sxx = float(((x - x_mean) ** 2).sum())
    beta = float(((x - x_mean) * (y - y.mean())).sum() / sxx)
    intercept = float(y.mean() - beta * x_mean)
    fitted = intercept + beta * x
    rss = float(((y - fitted) ** 2).sum())
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 0.0 if tss == 0.0 else 1.0 - rss / tss
    sigma2 = rss / (n - 2)
    beta_se = math.sqrt(sigma2 / sxx)
    t_crit = float(sstats.t.ppf(0.975, n - 2))
    se_fit = np.sqrt(sigma2 * (1.0 / n + (x - x_mean) ** 2 / sxx))
    return TrendFit(
        beta=beta,
        intercept=intercept,
        r2=r2,
        beta_se=beta_se,
        years=tuple(years),
        fitted=tuple(float(v) for v in fitted),
        ci_low=tuple(float(v) for v in fitted - t_crit * se_fit),
        ci_high=tuple(float(v) for v in fitted + t_crit * se_fit),
    )


@dataclass(frozen=True, slots=True)
class ReceptionRow:
    paper_id: str
    c5: int
    c10: int
    citation_count: int
    citation_normalized: float | None
    sb_strength: float | None
    turnaround_days: int | None
    excluded_reason: str | None


def build_reception_rows(
    corpus: Corpus,
    graph: CitationGraph,
    min_days: int = TURNAROUND_MIN_DAYS,
    max_days: int = TURNAROUND_MAX_DAYS,
    include_outliers: bool = False,
    inclusive_windows: bool = False,
) -> list[ReceptionRow]:
    """One ReceptionRow per corpus paper, sorted by paper_id."""
    papers = corpus.papers()
    end_year = max(p.year for p in papers) if papers else 0
    counts: dict[str, int] = {}
    windows: dict[str, tuple[int, int, int]] = {}
    for p in papers:
        w = citation_windows(graph, p.paper_id, inclusive=inclusive_windows)
        windows[p.paper_id] = w
        counts[p.paper_id] = w[2]
    normalized = normalize_citations(
        counts,
        {p.paper_id: p.year for p in papers},
        {p.paper_id: p.fields_l1 for p in papers},
    )
    rows: list[ReceptionRow] = []
    for p in papers:
        c5, c10, total = windows[p.paper_id]
        sb = sleeping_beauty(citation_trajectory(graph, p.paper_id, end_year))
        t = turnaround(p.history, min_days, max_days, include_outliers)
        rows.append(
            ReceptionRow(
                paper_id=p.paper_id,
                c5=c5,
                c10=c10,
                citation_count=total,
                citation_normalized=normalized.values.get(p.paper_id),
                sb_strength=sb,
                turnaround_days=t.days,
                excluded_reason=t.excluded_reason,
            )
        )
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def write_reception_csv(
    rows: list[ReceptionRow], path: str | Path, seed: int | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["paper_id", "c5", "c10", "citation_count", "citation_normalized",
             "sb_strength", "turnaround_days", "excluded_reason"]
        )
        for r in rows:
            writer.writerow(
                [r.paper_id, r.c5, r.c10, r.citation_count,
                 _fmt(r.citation_normalized), _fmt(r.sb_strength),
                 _fmt(r.turnaround_days), r.excluded_reason or ""]
            )


def write_ratio_series_csv(
    series_list: list[RatioSeries], path: str | Path, seed: int | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["metric", "year", "stylized_mean", "popularized_mean", "ratio",
             "p_value", "stars", "n_stylized", "n_popularized"]
        )
        for series in series_list:
            for pt in series.points:
                writer.writerow(
                    [series.metric, pt.year, _fmt(pt.stylized_mean),
                     _fmt(pt.popularized_mean), _fmt(pt.ratio), _fmt(pt.p_value),
                     pt.stars, pt.n_stylized, pt.n_popularized]
                )


def write_trend_csv(
    fits: dict[str, TrendFit], path: str | Path, seed: int | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["metric", "year", "fitted", "ci_low", "ci_high", "beta", "beta_se", "r2"]
        )
        for metric in sorted(fits):
            fit = fits[metric]
            for i, year in enumerate(fit.years):
                writer.writerow(
                    [metric, year, _fmt(fit.fitted[i]), _fmt(fit.ci_low[i]),
                     _fmt(fit.ci_high[i]), _fmt(fit.beta), _fmt(fit.beta_se),
                     _fmt(fit.r2)]
                )
