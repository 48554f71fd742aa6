"""Command-line pipeline: ingest -> stylize -> disrupt -> recombine ->
reception -> twins -> regress -> report, driven by one TOML config.

Each stage writes its CSV/JSON/SVG artifacts plus a manifest entry
(stage, input hashes, parameters, duration). A failed stage aborts the
stages after it with exit code 1; configuration problems exit with 2.
All randomness flows from the single configured seed, so reruns are
byte-identical (the manifest's wall-clock durations excepted).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import (
    corpus as corpus_mod,
    disruption,
    embed_space,
    recombination,
    reception,
    regress,
    svgplot,
    synth,
    twins as twins_mod,
)

STAGES = (
    "ingest",
    "stylize",
    "disrupt",
    "recombine",
    "reception",
    "twins",
    "regress",
    "report",
)

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_CONFIG_ERROR = 2

POISSON_RESPONSES = {"c5", "c10", "citation_count"}
DEFAULT_RESPONSES = (
    "c5",
    "c10",
    "citation_count",
    "citation_normalized",
    "sb_strength",
    "turnaround_days",
)


class ConfigError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {p}: {exc}") from exc


def _section(config: dict, name: str) -> dict:
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section [{name}] must be a table")
    return dict(value)


class Pipeline:
    """Shared state across stages plus manifest bookkeeping."""

    def __init__(self, config: dict, out_dir: Path, seed: int, threads: int):
        self.config = config
        self.out = out_dir
        self.seed = seed
        self.threads = threads
        self.manifest: list[dict] = []
        self.manifest_path = out_dir / "manifest.json"
        # computed state
        self.corpus: corpus_mod.Corpus | None = None
        self.entries: list[embed_space.StylizationEntry] | None = None
        self.paper_scores: dict[str, embed_space.PaperScore] | None = None
        self.graph: disruption.CitationGraph | None = None
        self.profiles: list[disruption.DisruptionProfile] | None = None
        self.events: list[recombination.ComboEvent] | None = None
        self.reception_rows: list[reception.ReceptionRow] | None = None
        self.ratio_tables: list[reception.RatioSeries] | None = None
        self.twin_pairs: list[twins_mod.TwinPair] | None = None
        self.twin_report: twins_mod.ValidationReport | None = None
        self.regression_results: list[regress.RegressionResult] | None = None

    # -- config accessors -------------------------------------------------

    def input_paths(self) -> dict:
        return _section(self.config, "input")

    def corpus_paths(self) -> list[Path]:
        paths = self.input_paths().get("corpus")
        if not paths:
            raise ConfigError("config [input].corpus must list NDJSON files")
        if isinstance(paths, str):
            paths = [paths]
        return [Path(p) for p in paths]

    def embeddings_path(self) -> Path | None:
        value = self.input_paths().get("embeddings")
        return Path(value) if value else None

    def contexts_path(self) -> Path | None:
        value = self.input_paths().get("contexts")
        return Path(value) if value else None

    # -- manifest ----------------------------------------------------------

    def _flush_manifest(self) -> None:
        with open(self.manifest_path, "w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def record(
        self,
        stage: str,
        status: str,
        inputs: list[Path],
        params: dict,
        duration: float,
        outputs: list[Path],
        error: str | None = None,
    ) -> None:
        entry = {
            "stage": stage,
            "status": status,
            "inputs": {
                str(p): _sha256(p) for p in inputs if p is not None and p.exists()
            },
            "params": params,
            "duration_s": round(duration, 6),
            "outputs": [str(p) for p in outputs],
        }
        if error:
            entry["error"] = error
        self.manifest.append(entry)
        self._flush_manifest()

    # -- prerequisites -----------------------------------------------------

    def need_corpus(self) -> corpus_mod.Corpus:
        if self.corpus is None:
            params = _section(self.config, "ingest")
            loaded = corpus_mod.load_corpus(
                self.corpus_paths(),
                schema_version=str(params.get("schema_version", corpus_mod.SCHEMA_VERSION)),
                embeddings_path=self.embeddings_path(),
            )
            if params.get("dedupe", True):
                loaded, removed = corpus_mod.dedupe_by_doi(loaded)
                self.dedupe_removed = removed
            else:
                self.dedupe_removed = 0
            self.corpus = loaded
        return self.corpus

    def need_entries(self) -> list[embed_space.StylizationEntry]:
        if self.entries is None:
            params = _section(self.config, "stylize")
            corpus = self.need_corpus()
            entries, stats = embed_space.stylize_corpus(
                corpus,
                variant=params.get("variant", "knn5"),
                removal_rank=int(params.get("removal_rank", 1)),
                center=bool(params.get("center", True)),
                exclude_focal_from_mean=bool(
                    params.get("exclude_focal_from_mean", False)
                ),
                seed=self.seed,
                threads=self.threads,
            )
            self.entries = entries
            self.stylize_stats = stats
        return self.entries

    def need_scores(self) -> dict[str, embed_space.PaperScore]:
        if self.paper_scores is None:
            self.paper_scores = embed_space.aggregate_paper_scores(self.need_entries())
        return self.paper_scores

    def labels(self) -> dict[str, str]:
        return {pid: s.label for pid, s in self.need_scores().items()}

    def need_graph(self) -> disruption.CitationGraph:
        if self.graph is None:
            self.graph = disruption.CitationGraph.from_corpus(self.need_corpus())
        return self.graph

    def need_reception_rows(self) -> list[reception.ReceptionRow]:
        if self.reception_rows is None:
            params = _section(self.config, "reception")
            self.reception_rows = reception.build_reception_rows(
                self.need_corpus(),
                self.need_graph(),
                min_days=int(params.get("min_days", reception.TURNAROUND_MIN_DAYS)),
                max_days=int(params.get("max_days", reception.TURNAROUND_MAX_DAYS)),
                include_outliers=bool(params.get("include_outliers", False)),
                inclusive_windows=bool(params.get("inclusive_windows", False)),
            )
        return self.reception_rows

    def year_of(self) -> dict[str, int]:
        return {p.paper_id: p.year for p in self.need_corpus().papers()}

    # -- stages ------------------------------------------------------------

    def stage_ingest(self) -> list[Path]:
        corpus = self.need_corpus()
        rejects_path = self.out / "rejects.csv"
        corpus_mod.write_rejects_csv(corpus.rejects, rejects_path, seed=self.seed)
        summary_path = self.out / "corpus_summary.json"
        summary = {
            "seed": self.seed,
            "n_papers": len(corpus),
            "n_rejected_lines": len(corpus.rejects),
            "n_deduped": getattr(self, "dedupe_removed", 0),
            "n_missing_embeddings": corpus.missing_embedding_count(),
            "years": corpus.years(),
            "n_fields_l1": len(corpus.known_fields_l1),
            "index_digest": corpus.index_digest(),
        }
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return [rejects_path, summary_path]

    def stage_stylize(self) -> list[Path]:
        entries = self.need_entries()
        params = _section(self.config, "stylize")
        path = self.out / str(params.get("out_file", "scores.csv"))
        embed_space.write_scores_csv(entries, path, seed=self.seed)
        stats = self.stylize_stats
        summary_path = self.out / "stylize_summary.json"
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "seed": self.seed,
                    "n_entries": len(entries),
                    "cohorts_scored": stats.cohorts_scored,
                    "cohorts_skipped_small": stats.cohorts_skipped_small,
                    "cohorts_skipped_degenerate": stats.cohorts_skipped_degenerate,
                    "small_cohort_warnings": stats.small_cohort_warnings,
                    "degenerate_members": stats.degenerate_members,
                },
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
        return [path, summary_path]

    def stage_disrupt(self) -> list[Path]:
        params = _section(self.config, "disrupt")
        min_citations = int(params.get("min_citations", 1))
        graph = self.need_graph()
        corpus = self.need_corpus()
        profiles = [
            disruption.decompose_cd(graph, pid) for pid in corpus.paper_ids()
        ]
        self.profiles = [p for p in profiles if p.n_citers >= min_citations]
        csv_path = self.out / "disruption.csv"
        disruption.write_disruption_csv(self.profiles, csv_path, seed=self.seed)
        # per-year likelihood ratio of clearing the median CD
        labels = self.labels()
        year_of = self.year_of()
        cd_by_paper = {p.paper_id: p.cd for p in self.profiles if p.cd is not None}
        ratio_path = self.out / "disruption_ratio.csv"
        with open(ratio_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# seed={self.seed}\n")
            fh.write("year,cutoff,p_stylized,p_popularized,ratio,undefined\n")
            for year in sorted({year_of[pid] for pid in cd_by_paper}):
                try:
                    r = disruption.disruption_ratio(cd_by_paper, labels, year_of, year)
                except ValueError:
                    continue
                ratio_txt = "" if r.ratio is None else format(r.ratio, ".12g")
                fh.write(
                    f"{r.year},{format(r.cutoff, '.12g')},"
                    f"{format(r.p_stylized, '.12g')},"
                    f"{format(r.p_popularized, '.12g')},"
                    f"{ratio_txt},{int(r.undefined)}\n"
                )
        return [csv_path, ratio_path]

    def stage_recombine(self) -> list[Path]:
        params = _section(self.config, "recombine")
        corpus = self.need_corpus()
        scored_years = [s.year for s in self.need_scores().values()]
        default_cutoff = min(scored_years) if scored_years else min(corpus.years())
        cutoff = int(params.get("baseline_cutoff", default_cutoff))
        baseline = recombination.baseline_pairs(corpus, cutoff)
        events = recombination.detect_new_combos(corpus, baseline)
        events = recombination.measure_events(
            corpus,
            events,
            threshold=float(params.get("threshold", 0.5)),
            dim=int(params.get("dim", recombination.DEFAULT_DIM)),
            seed=int(params.get("seed", self.seed)),
            walks_per_node=int(
                params.get("walks_per_node", recombination.DEFAULT_WALKS_PER_NODE)
            ),
            walk_length=int(params.get("walk_length", recombination.DEFAULT_WALK_LENGTH)),
            context_window=int(
                params.get("context_window", recombination.DEFAULT_CONTEXT_WINDOW)
            ),
        )
        self.events = events
        combos_path = self.out / "combos.csv"
        recombination.write_combos_csv(events, combos_path, seed=self.seed)
        labels = self.labels()
        year_of = self.year_of()
        stats_path = self.out / "remote_stats.csv"
        with open(stats_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# seed={self.seed}\n")
            fh.write(
                "year,distance_ratio_stylized,distance_ratio_popularized,"
                "remote_prob_ratio_stylized,remote_prob_ratio_popularized,"
                "n_stylized,n_popularized\n"
            )
            for year in sorted({e.first_year for e in events}):
                try:
                    s = recombination.group_remote_stats(
                        events, labels, year_of, year,
                        include_no_combo=bool(params.get("include_no_combo", True)),
                    )
                except ValueError:
                    continue
                fh.write(
                    f"{s.year},{format(s.distance_ratio_stylized, '.12g')},"
                    f"{format(s.distance_ratio_popularized, '.12g')},"
                    f"{format(s.remote_prob_ratio_stylized, '.12g')},"
                    f"{format(s.remote_prob_ratio_popularized, '.12g')},"
                    f"{s.n_stylized},{s.n_popularized}\n"
                )
        return [combos_path, stats_path]

    def stage_reception(self) -> list[Path]:
        rows = self.need_reception_rows()
        labels = self.labels()
        year_of = self.year_of()
        rows_path = self.out / "reception.csv"
        reception.write_reception_csv(rows, rows_path, seed=self.seed)
        metric_values: dict[str, dict[str, float]] = {
            "c5": {r.paper_id: float(r.c5) for r in rows},
            "c10": {r.paper_id: float(r.c10) for r in rows},
            "citation_normalized": {
                r.paper_id: r.citation_normalized
                for r in rows
                if r.citation_normalized is not None
            },
            "sb_strength": {
                r.paper_id: r.sb_strength for r in rows if r.sb_strength is not None
            },
            "turnaround_days": {
                r.paper_id: float(r.turnaround_days)
                for r in rows
                if r.excluded_reason is None and r.turnaround_days is not None
            },
        }
        series = []
        for metric in sorted(metric_values):
            values = {
                pid: v for pid, v in metric_values[metric].items() if pid in labels
            }
            if values:
                series.append(reception.ratio_series(metric, values, labels, year_of))
        self.ratio_tables = series
        ratio_path = self.out / "ratio_series.csv"
        reception.write_ratio_series_csv(series, ratio_path, seed=self.seed)
        # stylization decline trend on yearly mean scores
        by_year: dict[int, list[float]] = {}
        for e in self.need_entries():
            by_year.setdefault(e.cohort_year, []).append(e.score)
        fits: dict[str, reception.TrendFit] = {}
        if len(by_year) >= 3:
            fits["stylization_mean"] = reception.trend_fit(
                {y: float(np.mean(v)) for y, v in by_year.items()}
            )
        trend_path = self.out / "trend.csv"
        reception.write_trend_csv(fits, trend_path, seed=self.seed)
        return [rows_path, ratio_path, trend_path]

    def stage_twins(self) -> list[Path]:
        params = _section(self.config, "twins")
        contexts_path = self.contexts_path()
        if contexts_path is None:
            raise ConfigError("config [input].contexts is required for the twins stage")
        contexts = twins_mod.load_contexts(contexts_path)
        corpus = self.need_corpus()
        counts = twins_mod.cocitation_pairs(contexts)
        min_cocite = int(params.get("min_cocite", twins_mod.DEFAULT_MIN_COCITE))
        if bool(params.get("strict_cocite", False)):
            min_cocite += 1   # read "more than three" strictly
        pairs = twins_mod.detect_twins(
            counts,
            corpus,
            min_cocite=min_cocite,
            refsim_threshold=float(
                params.get("refsim_threshold", twins_mod.DEFAULT_REFSIM_THRESHOLD)
            ),
        )
        self.twin_pairs = pairs
        entries_by_paper: dict[str, embed_space.StylizationEntry] = {}
        for e in self.need_entries():
            entries_by_paper.setdefault(e.paper_id, e)
        controls: dict[tuple[str, str], str] = {}
        for pair in pairs:
            key = (pair.paper_a, pair.paper_b)
            try:
                controls[key] = twins_mod.sample_controls(key, corpus, self.seed)
            except ValueError:
                continue
        csv_path = self.out / "twins.csv"
        twins_mod.write_twins_csv(
            pairs, entries_by_paper, controls, csv_path, seed=self.seed
        )
        report_path = self.out / "twin_validation.json"
        payload: dict = {"seed": self.seed, "n_pairs": len(pairs)}
        if pairs:
            try:
                report = twins_mod.validate_scores(pairs, entries_by_paper, controls)
            except ValueError:
                report = None
            if report is not None:
                self.twin_report = report
                payload.update(
                    {
                        "pearson_r": report.pearson_r,
                        "frac_twin_within_005": report.frac_twin_within_005,
                        "frac_control_within_005": report.frac_control_within_005,
                        "rank_sum_p": report.rank_sum_p,
                        "mutual_knn_fraction": report.mutual_knn_fraction,
                        "overlap_histogram": list(report.overlap_histogram),
                    }
                )
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return [csv_path, report_path]

    def stage_regress(self) -> list[Path]:
        params = _section(self.config, "regress")
        corpus = self.need_corpus()
        scores = {pid: s.score for pid, s in self.need_scores().items()}
        rows = regress.build_covariates(corpus, scores)
        fe = tuple(params.get("fe", ["year", "field"]))
        responses = list(params.get("responses", DEFAULT_RESPONSES))
        reception_rows = self.need_reception_rows()
        response_values: dict[str, dict[str, float]] = {
            "c5": {r.paper_id: float(r.c5) for r in reception_rows},
            "c10": {r.paper_id: float(r.c10) for r in reception_rows},
            "citation_count": {
                r.paper_id: float(r.citation_count) for r in reception_rows
            },
            "citation_normalized": {
                r.paper_id: r.citation_normalized
                for r in reception_rows
                if r.citation_normalized is not None
            },
            "sb_strength": {
                r.paper_id: r.sb_strength
                for r in reception_rows
                if r.sb_strength is not None
            },
            "turnaround_days": {
                r.paper_id: float(r.turnaround_days)
                for r in reception_rows
                if r.excluded_reason is None and r.turnaround_days is not None
            },
        }
        results: list[regress.RegressionResult] = []
        for response in responses:
            if response not in response_values:
                raise ConfigError(f"unknown regression response {response!r}")
            model = params.get(
                "model", "poisson" if response in POISSON_RESPONSES else "ols"
            )
            fit = (
                regress.poisson_pml
                if (model == "poisson" or (model == "auto" and response in POISSON_RESPONSES))
                else regress.ols_fe
            )
            results.append(
                fit(rows, response_values[response], fe=fe, response_name=response)
            )
        self.regression_results = results
        csv_text, md_text = regress.model_table(results)
        csv_path = self.out / "models.csv"
        md_path = self.out / "models.md"
        csv_path.write_text(f"# seed={self.seed}\n" + csv_text, encoding="utf-8")
        md_path.write_text(f"<!-- seed={self.seed} -->\n" + md_text, encoding="utf-8")
        return [csv_path, md_path]

    def stage_report(self) -> list[Path]:
        params = _section(self.config, "report")
        svg_dir = Path(params.get("svg_dir", self.out))
        svg_dir.mkdir(parents=True, exist_ok=True)
        outputs: list[Path] = []
        comment = f"seed={self.seed}"
        entries = self.need_entries()
        report = embed_space.decade_distribution(entries)
        edges = [i * embed_space.HIST_BIN_WIDTH for i in range(embed_space.HIST_BINS + 1)]
        hist_path = svg_dir / "stylization_decades.svg"
        svgplot.histogram(
            hist_path,
            "Stylization score distribution by decade",
            edges,
            {str(d): report.histograms[d].tolist() for d in sorted(report.histograms)},
            x_label="stylization score",
            comment=comment,
        )
        outputs.append(hist_path)
        by_year: dict[int, list[float]] = {}
        for e in entries:
            by_year.setdefault(e.cohort_year, []).append(e.score)
        yearly = {y: float(np.mean(v)) for y, v in sorted(by_year.items())}
        if len(yearly) >= 3:
            fit = reception.trend_fit(yearly)
            trend_path = svg_dir / "stylization_trend.svg"
            svgplot.line_chart(
                trend_path,
                "Mean stylization by year",
                {
                    "mean": [(float(y), m) for y, m in yearly.items()],
                    "fit": list(zip(map(float, fit.years), fit.fitted)),
                },
                bands={
                    "fit": list(
                        zip(map(float, fit.years), fit.ci_low, fit.ci_high)
                    )
                },
                x_label="year",
                y_label="stylization",
                comment=comment,
            )
            outputs.append(trend_path)
        for series in self.ratio_tables or []:
            pts = [(float(p.year), p.ratio) for p in series.points if p.ratio is not None]
            if len(pts) < 2:
                continue
            chart_series = {series.metric: pts}
            if len(pts) >= 5:
                grid, curve = reception.kernel_smooth(pts)
                chart_series["smoothed"] = list(
                    zip(map(float, grid), map(float, curve))
                )
            path = svg_dir / f"ratio_{series.metric}.svg"
            svgplot.line_chart(
                path,
                f"Stylized/popularized mean ratio: {series.metric}",
                chart_series,
                x_label="year",
                y_label="ratio",
                comment=comment,
            )
            outputs.append(path)
        summary_path = self.out / "report_summary.json"
        summary: dict = {
            "seed": self.seed,
            "n_entries": len(entries),
            "n_papers_scored": len(self.need_scores()),
            "decade_means": {str(d): m for d, m in report.decade_means.items()},
        }
        if self.twin_report is not None:
            summary["twin_mutual_knn_fraction"] = self.twin_report.mutual_knn_fraction
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(summary_path)
        return outputs

    # -- driver ------------------------------------------------------------

    def stage_inputs(self, stage: str) -> list[Path]:
        base = list(self.corpus_paths())
        emb = self.embeddings_path()
        ctx = self.contexts_path()
        extra: list[Path] = []
        if stage in {"ingest", "stylize", "twins"} and emb:
            extra.append(emb)
        if stage == "twins" and ctx:
            extra.append(ctx)
        if stage not in {"ingest"}:
            scores = self.out / "scores.csv"
            if scores.exists():
                extra.append(scores)
        return base + extra

    def run_stage(self, stage: str) -> None:
        func = getattr(self, f"stage_{stage}")
        params = _section(self.config, stage)
        params.update({"seed": self.seed, "threads": self.threads})
        inputs = self.stage_inputs(stage)
        start = time.perf_counter()
        try:
            outputs = func()
        except Exception as exc:
            self.record(
                stage, "failed", inputs, params, time.perf_counter() - start, [],
                error=f"{type(exc).__name__}: {exc}",
            )
            raise
        self.record(
            stage, "ok", inputs, params, time.perf_counter() - start, outputs
        )


def validate_config(config: dict, stages: list[str]) -> None:
    """Referenced input paths must exist before any stage runs."""
    inputs = _section(config, "input")
    paths = inputs.get("corpus")
    if not paths:
        raise ConfigError("config [input].corpus must list NDJSON files")
    if isinstance(paths, str):
        paths = [paths]
    for p in map(Path, paths):
        if not p.exists():
            raise ConfigError(f"missing corpus file: {p}")
    emb = inputs.get("embeddings")
    needs_embeddings = any(s != "ingest" for s in stages)
    if needs_embeddings and not emb:
        raise ConfigError("config [input].embeddings is required for analysis stages")
    if emb and not Path(emb).exists():
        raise ConfigError(f"missing embeddings file: {emb}")
    ctx = inputs.get("contexts")
    if "twins" in stages and not ctx:
        raise ConfigError("config [input].contexts is required for the twins stage")
    if ctx and not Path(ctx).exists():
        raise ConfigError(f"missing contexts file: {ctx}")


def run_pipeline(
    config: dict, out_dir: Path, seed: int, threads: int, stages: list[str]
) -> int:
    for stage in stages:
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
    stages = [s for s in STAGES if s in stages]
    validate_config(config, stages)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline = Pipeline(config, out_dir, seed, threads)
    for stage in stages:
        try:
            pipeline.run_stage(stage)
        except Exception as exc:
            print(f"stage {stage} failed: {exc}", file=sys.stderr)
            return EXIT_STAGE_FAILURE
        print(f"stage {stage}: ok")
    return EXIT_OK


def _merge_overrides(config: dict, section: str, overrides: dict) -> dict:
    merged = dict(config)
    table = dict(merged.get(section, {}))
    for key, value in overrides.items():
        if value is not None:
            table[key] = value
    merged[section] = table
    return merged


def build_parser() -> argparse.ArgumentParser:
    # global options are accepted both before and after the subcommand;
    # the after-command copies default to SUPPRESS so they never clobber
    # values parsed at the top level
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="TOML config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="global random seed (default 42)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker cap; never changes results")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (default out/)")

    parser = argparse.ArgumentParser(
        prog="sciline",
        description="Bibliometric metric pipeline over publication corpora.",
    )
    parser.add_argument("--config", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", parents=[common],
                   help="load, validate, dedupe; write rejects report")

    p = sub.add_parser("stylize", parents=[common],
                       help="cohort stylization scores and labels")
    p.add_argument("--variant", choices=embed_space.VARIANTS)
    p.add_argument("--removal-rank", type=int, dest="removal_rank")
    p.add_argument(
        "--no-center", action="store_false", dest="center", default=None,
        help="skip rotation entirely (the 'prior to rotation' variant)",
    )
    p.add_argument(
        "--exclude-focal-mean", action="store_true", default=None,
        dest="exclude_focal_from_mean",
        help="leave each focal paper out of the cohort mean it is "
        "centered by (default: included)",
    )

    p = sub.add_parser("disrupt", parents=[common],
                       help="CD index and dispersion decomposition")
    p.add_argument("--min-citations", type=int, dest="min_citations")
    p.add_argument(
        "--cd-prime-literal", action="store_true", default=True,
        help="compute CD' literally as the dispersion of D_j - C_j "
        "(which algebraically equals the dispersion of per-reference "
        "focal-citation rates); this is the only implemented reading",
    )

    p = sub.add_parser("recombine", parents=[common],
                       help="new concept pairs and their distances")
    p.add_argument("--threshold", type=float)
    p.add_argument("--window", type=int,
                   help="accepted for interface parity; the co-occurrence "
                   "window is fixed at 5 years")
    p.add_argument("--dim", type=int)
    p.add_argument("--baseline-cutoff", type=int, dest="baseline_cutoff")

    p = sub.add_parser("reception", parents=[common],
                       help="citation windows, SB strength, turnaround")
    p.add_argument("--min-days", type=int, dest="min_days")
    p.add_argument("--max-days", type=int, dest="max_days")
    p.add_argument("--include-outliers", action="store_true", default=None,
                   dest="include_outliers")
    p.add_argument(
        "--inclusive-windows", action="store_true", default=None,
        dest="inclusive_windows",
        help="count citations in closed windows [0,5]/[0,10] instead of "
        "the default half-open [0,5)/[0,10)",
    )

    p = sub.add_parser("twins", parents=[common],
                       help="twin-pair detection and score validation")
    p.add_argument("--min-cocite", type=int, dest="min_cocite")
    p.add_argument("--refsim-threshold", type=float, dest="refsim_threshold")
    p.add_argument("--strict-cocite", action="store_true", default=None,
                   dest="strict_cocite",
                   help="require strictly more than min-cocite co-citations")

    p = sub.add_parser("regress", parents=[common],
                       help="fixed-effects OLS / Poisson PML models")
    p.add_argument("--response", action="append", dest="responses",
                   help="repeatable; defaults to all six responses")
    p.add_argument("--model", choices=["auto", "ols", "poisson"])
    p.add_argument("--fe", help="comma-joined fixed effects, e.g. year,field")

    sub.add_parser("synth", parents=[common],
                   help="generate a synthetic corpus with planted effects")

    p = sub.add_parser("report", parents=[common],
                       help="SVG plots and summary")
    p.add_argument("--svg", dest="svg_dir", help="directory for SVG output")

    p = sub.add_parser("run", parents=[common], help="run the full pipeline")
    p.add_argument("--stages", help="comma-joined subset of stages, in pipeline order")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    seed = args.seed if args.seed is not None else int(config.get("seed", 42))
    threads = args.threads if args.threads is not None else int(config.get("threads", 1))
    out_section = _section(config, "output") if "output" in config else {}
    out_arg = args.out
    # `stylize --out scores.csv` names the CSV itself
    if args.command == "stylize" and out_arg and out_arg.endswith(".csv"):
        target = Path(out_arg)
        config = _merge_overrides(config, "stylize", {"out_file": target.name})
        out_arg = str(target.parent)
    out_dir = Path(out_arg or out_section.get("dir", "out"))

    if args.command == "synth":
        synth_table = _section(config, "synth")
        if args.seed is not None:
            synth_table["seed"] = args.seed
        try:
            synth_config = synth.SynthConfig.from_dict(synth_table)
        except (TypeError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
        truth = synth.generate_corpus(synth_config, out_dir)
        print(f"synthetic corpus with {truth['n_papers']} papers written to {out_dir}")
        return EXIT_OK

    overrides = {
        "stylize": {
            "variant": getattr(args, "variant", None),
            "removal_rank": getattr(args, "removal_rank", None),
            "center": getattr(args, "center", None),
            "exclude_focal_from_mean": getattr(
                args, "exclude_focal_from_mean", None
            ),
        },
        "disrupt": {"min_citations": getattr(args, "min_citations", None)},
        "recombine": {
            "threshold": getattr(args, "threshold", None),
            "dim": getattr(args, "dim", None),
            "baseline_cutoff": getattr(args, "baseline_cutoff", None),
        },
        "reception": {
            "min_days": getattr(args, "min_days", None),
            "max_days": getattr(args, "max_days", None),
            "include_outliers": getattr(args, "include_outliers", None),
            "inclusive_windows": getattr(args, "inclusive_windows", None),
        },
        "twins": {
            "min_cocite": getattr(args, "min_cocite", None),
            "refsim_threshold": getattr(args, "refsim_threshold", None),
            "strict_cocite": getattr(args, "strict_cocite", None),
        },
        "regress": {
            "responses": getattr(args, "responses", None),
            "model": getattr(args, "model", None),
            "fe": getattr(args, "fe", "").split(",") if getattr(args, "fe", None) else None,
        },
        "report": {"svg_dir": getattr(args, "svg_dir", None)},
    }
    for section, table in overrides.items():
        config = _merge_overrides(config, section, table)

    if args.command == "run":
        stages = (
            [s.strip() for s in args.stages.split(",") if s.strip()]
            if args.stages
            else list(STAGES)
        )
    else:
        stages = [args.command]
    try:
        return run_pipeline(config, out_dir, seed, threads, stages)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
