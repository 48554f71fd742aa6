"""Covariate construction and fixed-effects regressions.

Two estimators: OLS with year/field fixed effects absorbed by
alternating within-group demeaning (HC1 robust standard errors), and
Poisson pseudo-maximum-likelihood via IRLS with explicit fixed-effect
dummies (sandwich standard errors). Rows are canonically sorted before
fitting so results are bit-identical under input permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as slinalg
from scipy import stats as sstats

from .corpus import Corpus

DEMEAN_TOL = 1e-10
IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
SEPARATION_BETA = 30.0

COVARIATE_NAMES = (
    "stylization",
    "team_size",
    "field_size",
    "reference_count",
    "knowledge_age_mean",
    "knowledge_age_dispersion",
    "career_age_mean",
    "career_age_dispersion",
)


class CollinearityError(ValueError):
    def __init__(self, columns: list[str]):
        super().__init__(f"collinear columns: {', '.join(columns)}")
        self.columns = columns


class ConvergenceError(RuntimeError):
    def __init__(self, trace: list[float]):
        super().__init__(
            f"IRLS failed to converge in {len(trace)} iterations; "
            f"last coefficient changes: {trace[-3:]}"
        )
        self.trace = trace


@dataclass(frozen=True, slots=True)
class CovariateRow:
    paper_id: str
    stylization: float
    team_size: int
    field_size: int
    reference_count: int
    knowledge_age_mean: float | None
    knowledge_age_dispersion: float | None
    career_age_mean: float | None
    career_age_dispersion: float | None
    year: int
    field: str
    missing: tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return not self.missing


def build_covariates(corpus: Corpus, scores: dict[str, float]) -> list[CovariateRow]:
    """One row per scored paper; unresolvable parts get missing flags.

    Knowledge age uses references resolvable in the corpus; career age
    uses each author's first corpus publication year. Field size and the
    fixed-effect field come from the paper's lexicographically first
    level-1 tag.
    """
    first_pub: dict[str, int] = {}
    for p in corpus.papers():
        for author in p.author_ids:
            prev = first_pub.get(author)
            if prev is None or p.year < prev:
                first_pub[author] = p.year
    rows: list[CovariateRow] = []
    for pid in sorted(scores):
        p = corpus.get(pid)
        if p is None:
            continue
        missing: list[str] = []
        ref_years = [
            corpus[r].year for r in sorted(p.reference_ids) if r in corpus
        ]
        if ref_years:
            ages = np.array([p.year - y for y in ref_years], dtype=np.float64)
            k_mu, k_theta = float(ages.mean()), float(ages.std())
        else:
            k_mu = k_theta = None
            missing.append("knowledge_age")
        if p.author_ids:
            careers = np.array(
                [p.year - first_pub[a] for a in p.author_ids], dtype=np.float64
            )
            c_mu, c_theta = float(careers.mean()), float(careers.std())
        else:
            c_mu = c_theta = None
            missing.append("career_age")
        if p.fields_l1:
            field = min(p.fields_l1)
            fs = corpus.field_size(p.year, field)
        else:
            field = ""
            fs = 0
            missing.append("field")
        rows.append(
            CovariateRow(
                paper_id=pid,
                stylization=scores[pid],
                team_size=len(p.author_ids),
                field_size=fs,
                reference_count=len(p.reference_ids),
                knowledge_age_mean=k_mu,
                knowledge_age_dispersion=k_theta,
                career_age_mean=c_mu,
                career_age_dispersion=c_theta,
                year=p.year,
                field=field,
                missing=tuple(missing),
            )
        )
    return rows


@dataclass(frozen=True, slots=True)
class RegressionResult:
    model: str                      # "ols_fe" or "poisson_pml"
    response: str
    coef: dict[str, float]
    se: dict[str, float]
    p_values: dict[str, float]
    n_obs: int
    r2: float                       # R^2 (OLS) or pseudo-R^2 (Poisson)
    fe_dimensions: tuple[str, ...]
    dropped_groups: tuple[str, ...] = ()
    separation_flag: bool = False
    iterations: int = 0


def _design(
    rows: list[CovariateRow],
    response: dict[str, float],
    covariates: tuple[str, ...],
) -> tuple[list[CovariateRow], np.ndarray, np.ndarray]:
    """Canonically ordered fit rows plus (X, y); drops incomplete rows
    and rows without a response value."""
    usable = sorted(
        (r for r in rows if r.complete and r.paper_id in response
         and response[r.paper_id] is not None),
        key=lambda r: r.paper_id,
    )
    if not usable:
        raise ValueError("no complete rows with a response value")
    X = np.array(
        [[float(getattr(r, name)) for name in covariates] for r in usable]
    )
    y = np.array([float(response[r.paper_id]) for r in usable])
    return usable, X, y


def _check_rank(X: np.ndarray, names: list[str]) -> None:
    _, r, pivots = slinalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        raise CollinearityError(list(names))
    bad = [names[pivots[i]] for i in range(len(diag)) if diag[i] < 1e-10 * diag[0]]
    if bad:
        raise CollinearityError(sorted(bad))


def _demean_two_way(
    matrix: np.ndarray, groups: list[np.ndarray], tol: float = DEMEAN_TOL
) -> np.ndarray:
    """Alternately subtract group means until the update stalls."""
    work = matrix.astype(np.float64, copy=True)
    if not groups:
        return work - work.mean(axis=0)
    group_indexes = []
    for g in groups:
        _, inverse = np.unique(g, return_inverse=True)
        group_indexes.append((inverse, np.bincount(inverse).astype(np.float64)))
    for _ in range(10_000):
        delta = 0.0
        for inverse, sizes in group_indexes:
            sums = np.zeros((len(sizes), work.shape[1]))
            np.add.at(sums, inverse, work)
            means = sums / sizes[:, None]
            adjustment = means[inverse]
            delta = max(delta, float(np.abs(adjustment).max()))
            work -= adjustment
        if delta < tol:
            break
    return work


def ols_fe(
    rows: list[CovariateRow],
    response: dict[str, float],
    fe: tuple[str, ...] = ("year", "field"),
    covariates: tuple[str, ...] = COVARIATE_NAMES,
    response_name: str = "y",
) -> RegressionResult:
    """Within-estimator OLS with HC1 robust standard errors.

    Fixed effects are absorbed by alternating demeaning iterated to
    1e-10; the degrees-of-freedom correction counts the absorbed
    effects. R^2 is reported on the demeaned model.
    """
    usable, X, y = _design(rows, response, covariates)
    n = len(usable)
    groups = []
    n_absorbed = 0
    for dim in fe:
        values = np.array([getattr(r, dim) for r in usable])
        groups.append(values)
        n_absorbed += len(np.unique(values))
    if fe:
        # shared grand mean counted once across dimensions
        n_absorbed -= len(fe) - 1
        stacked = _demean_two_way(np.column_stack([y[:, None], X]), groups)
        y_t, x_t = stacked[:, 0], stacked[:, 1:]
        names = list(covariates)
    else:
        y_t = y.astype(np.float64)
        x_t = np.column_stack([np.ones(n), X])
        names = ["intercept", *covariates]
        n_absorbed = 0
    _check_rank(x_t, names)
    k = x_t.shape[1]
    if n <= k + n_absorbed:
        raise ValueError(
            f"{n} observations cannot identify {k} coefficients "
            f"plus {n_absorbed} absorbed effects"
        )
    xtx_inv = np.linalg.inv(x_t.T @ x_t)
    beta = xtx_inv @ (x_t.T @ y_t)
    residuals = y_t - x_t @ beta
    dof = n - k - n_absorbed
    meat = (x_t * residuals[:, None] ** 2).T @ x_t
    vcov = xtx_inv @ meat @ xtx_inv * (n / dof)
    se = np.sqrt(np.maximum(np.diag(vcov), 0.0))
    rss = float(residuals @ residuals)
    tss = float(((y_t - y_t.mean()) ** 2).sum())
    r2 = 0.0 if tss == 0.0 else 1.0 - rss / tss
    p = 2.0 * sstats.norm.sf(np.abs(beta) / np.where(se > 0, se, np.inf))
    return RegressionResult(
        model="ols_fe",
        response=response_name,
        coef=dict(zip(names, map(float, beta))),
        se=dict(zip(names, map(float, se))),
        p_values=dict(zip(names, map(float, p))),
        n_obs=n,
        r2=r2,
        fe_dimensions=tuple(fe),
    )


def _poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * (term - (y - mu)).sum())


def poisson_pml(
    rows: list[CovariateRow],
    response: dict[str, float],
    fe: tuple[str, ...] = ("year", "field"),
    covariates: tuple[str, ...] = COVARIATE_NAMES,
    response_name: str = "y",
) -> RegressionResult:
    """Log-link Poisson fitted by IRLS with explicit fixed-effect dummies.

    Fixed-effect groups whose outcomes are all zero are dropped and
    reported. Standard errors are the robust sandwich; pseudo-R^2 is
    1 - deviance/null deviance. Coefficients above 30 in magnitude set
    the separation flag.
    """
    usable, X, y = _design(rows, response, covariates)
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise ValueError("Poisson response must be nonnegative integers")
    dropped: list[str] = []
    while True:
        changed = False
        for dim in fe:
            values = np.array([getattr(r, dim) for r in usable])
            keep_mask = np.ones(len(usable), dtype=bool)
            for level in np.unique(values):
                mask = values == level
                if y[mask].sum() == 0:
                    keep_mask &= ~mask
                    dropped.append(f"{dim}={level}")
                    changed = True
            if not keep_mask.all():
                usable = [r for r, keep in zip(usable, keep_mask) if keep]
                X = X[keep_mask]
                y = y[keep_mask]
        if not changed:
            break
    if len(usable) == 0:
        raise ValueError("all observations dropped (all-zero outcome groups)")
    n = len(usable)
    columns = [np.ones(n)]
    names = ["intercept"]
    for dim in fe:
        values = [getattr(r, dim) for r in usable]
        levels = sorted(set(values))
        for level in levels[1:]:   # first level absorbed into the intercept
            columns.append(np.array([1.0 if v == level else 0.0 for v in values]))
            names.append(f"{dim}={level}")
    for j, name in enumerate(covariates):
        columns.append(X[:, j])
        names.append(name)
    design = np.column_stack(columns)
    _check_rank(design, names)
    beta = np.zeros(design.shape[1])
    beta[0] = math.log(max(y.mean(), 1e-12))
    trace: list[float] = []
    converged = False
    for iteration in range(1, IRLS_MAX_ITER + 1):
        eta = np.clip(design @ beta, -30.0, 30.0)
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        wx = design * mu[:, None]
        beta_new = np.linalg.solve(design.T @ wx, wx.T @ z)
        change = float(np.abs(beta_new - beta).max())
        trace.append(change)
        beta = beta_new
        if change < IRLS_TOL:
            converged = True
            break
    if not converged:
        raise ConvergenceError(trace)
    eta = np.clip(design @ beta, -30.0, 30.0)
    mu = np.exp(eta)
    bread = np.linalg.inv(design.T @ (design * mu[:, None]))
    meat = (design * ((y - mu) ** 2)[:, None]).T @ design
    vcov = bread @ meat @ bread
    se = np.sqrt(np.maximum(np.diag(vcov), 0.0))
    deviance = _poisson_deviance(y, mu)
    null_mu = np.full(n, y.mean())
    null_deviance = _poisson_deviance(y, null_mu)
    pseudo_r2 = 0.0 if null_deviance == 0.0 else 1.0 - deviance / null_deviance
    p = 2.0 * sstats.norm.sf(np.abs(beta) / np.where(se > 0, se, np.inf))
    return RegressionResult(
        model="poisson_pml",
        response=response_name,
        coef=dict(zip(names, map(float, beta))),
        se=dict(zip(names, map(float, se))),
        p_values=dict(zip(names, map(float, p))),
        n_obs=n,
        r2=pseudo_r2,
        fe_dimensions=tuple(fe),
        dropped_groups=tuple(dropped),
        separation_flag=bool(np.any(np.abs(beta) > SEPARATION_BETA)),
        iterations=len(trace),
    )


def table_marker(p_value: float) -> str:
    """Table-style markers: + p<0.1, * p<0.05, ** p<0.01, *** p<0.001."""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    if p_value < 0.1:
        return "+"
    return ""


def model_table(results: list[RegressionResult]) -> tuple[str, str]:
    """(csv, markdown) renderings of a coefficient table.

    One column per result; coefficient rows carry significance markers
    with robust standard errors in parentheses underneath. Fixed-effect
    dummy coefficients are summarized as Yes/No rows.
    """
    if not results:
        raise ValueError("model_table needs at least one result")
    row_names: list[str] = []
    for res in results:
        for name in res.coef:
            if "=" in name:
                continue
            if name not in row_names:
                row_names.append(name)
    headers = ["", *(f"{r.response} ({r.model})" for r in results)]
    rows: list[list[str]] = []
    for name in row_names:
        coef_cells = [name]
        se_cells = [""]
        for res in results:
            if name in res.coef:
                coef_cells.append(
                    f"{res.coef[name]:.4f}{table_marker(res.p_values[name])}"
                )
                se_cells.append(f"({res.se[name]:.4f})")
            else:
                coef_cells.append("")
                se_cells.append("")
        rows.append(coef_cells)
        rows.append(se_cells)
    for dim in ("year", "field"):
        rows.append(
            [f"{dim} FE",
             *("Yes" if dim in r.fe_dimensions else "No" for r in results)]
        )
    rows.append(["N", *(str(r.n_obs) for r in results)])
    rows.append(["(Pseudo) R2", *(f"{r.r2:.4f}" for r in results)])
    csv_lines = [",".join(headers)]
    csv_lines += [",".join(cells) for cells in rows]
    csv_text = "\n".join(csv_lines) + "\n"
    md_lines = ["| " + " | ".join(headers) + " |"]
    md_lines.append("|" + "---|" * len(headers))
    md_lines += ["| " + " | ".join(cells) + " |" for cells in rows]
    md_text = "\n".join(md_lines) + "\n"
    return csv_text, md_text
