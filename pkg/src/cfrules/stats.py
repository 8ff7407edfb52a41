"""Correlation, significance, partial correlation, split-plot ANOVA and model fitting."""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from scipy import stats as sps

from .engine import MODELS, StrategyConfig
from .experiment import DEFAULT_DESIGN, DesignSpec, SubjectRecord, generate_items, predict_item

log = logging.getLogger(__name__)


class DegenerateInput(ValueError):
    """A statistic is undefined for the given data (e.g. a constant vector)."""


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson product-moment correlation."""
    if len(xs) != len(ys):
        raise ValueError("pearson needs equal-length inputs")
    n = len(xs)
    if n < 3:
        raise ValueError("pearson needs at least three pairs")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    # relative test: catches float noise left over from a constant input
    scale_x = max(abs(x) for x in xs) or 1.0
    scale_y = max(abs(y) for y in ys) or 1.0
    if sxx <= n * (1e-12 * scale_x) ** 2 or syy <= n * (1e-12 * scale_y) ** 2:
        raise DegenerateInput("correlation undefined for a constant vector")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def critical_r(df: int, alpha: float = 0.05) -> float:
    """Smallest |r| significant at ``alpha`` (two-tailed) with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be at least 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    t = sps.t.ppf(1.0 - alpha / 2.0, df)
    return float(t / math.sqrt(t * t + df))


def partial_correlation(r_xy: float, r_xz: float, r_yz: float) -> float:
    """Correlation of x and y with z partialled out."""
    denom = (1.0 - r_xz**2) * (1.0 - r_yz**2)
    if denom <= 0.0:
        raise DegenerateInput("partial correlation undefined when |r_xz| or |r_yz| is 1")
    return (r_xy - r_xz * r_yz) / math.sqrt(denom)


@dataclass
class AnovaResult:
    F_model: float
    df: tuple[int, int]
    p_model: float
    F_form: float
    p_form: float
    F_interaction: float
    p_interaction: float
    means: dict[str, float]
    medians: dict[str, float]
    ss: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "F_model": _json_num(self.F_model),
            "df": list(self.df),
            "p_model": self.p_model,
            "F_form": _json_num(self.F_form),
            "p_form": self.p_form,
            "F_interaction": _json_num(self.F_interaction),
            "p_interaction": self.p_interaction,
            "means": self.means,
            "medians": self.medians,
            "ss": self.ss,
        }


def _json_num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _f_ratio(ms_effect: float, ms_error: float) -> float:
    if ms_error > 0:
        return ms_effect / ms_error
    return 0.0 if ms_effect <= 0 else math.inf


def mixed_anova(scores: Mapping[object, tuple[int, Mapping[str, float]]]) -> AnovaResult:
    """Two-level split-plot ANOVA.

    ``scores`` maps subject -> (group, {level: score}), with exactly two
    within-subject levels shared by every subject.  Group is the between
    factor; the model x subjects-within-groups term is the error for the
    model and interaction effects.
    """
    if not scores:
        raise ValueError("no data")
    levels = sorted({lvl for _, within in scores.values() for lvl in within})
    if len(levels) != 2:
        raise ValueError("mixed_anova needs exactly two within-subject levels")
    for subj, (_, within) in scores.items():
        if sorted(within) != levels:
            raise ValueError(f"subject {subj!r} lacks a score for every level")
    groups: dict[int, list[list[float]]] = {}
    for group, within in scores.values():
        groups.setdefault(group, []).append([float(within[lvl]) for lvl in levels])
    if len(groups) < 2 or any(len(rows) < 2 for rows in groups.values()):
        raise ValueError("mixed_anova needs at least two subjects in each of two groups")

    k = len(levels)
    rows = [row for g in groups.values() for row in g]
    n = len(rows)
    n_groups = len(groups)
    grand = math.fsum(v for row in rows for v in row) / (n * k)
    subj_means = [math.fsum(row) / k for row in rows]
    level_means = [math.fsum(row[j] for row in rows) / n for j in range(k)]

    ss_total = math.fsum((v - grand) ** 2 for row in rows for v in row)
    ss_between = k * math.fsum((m - grand) ** 2 for m in subj_means)
    ss_group = 0.0
    ss_cells = 0.0
    for g_rows in groups.values():
        ng = len(g_rows)
        g_mean = math.fsum(v for row in g_rows for v in row) / (ng * k)
        ss_group += ng * k * (g_mean - grand) ** 2
        for j in range(k):
            cell = math.fsum(row[j] for row in g_rows) / ng
            ss_cells += ng * (cell - grand) ** 2
    ss_subj_within = ss_between - ss_group
    ss_within = ss_total - ss_between
    ss_model = n * math.fsum((m - grand) ** 2 for m in level_means)
    ss_inter = ss_cells - ss_group - ss_model
    ss_error = ss_within - ss_model - ss_inter

    df_group = n_groups - 1
    df_subj = n - n_groups
    df_model = k - 1
    df_inter = df_group * df_model
    df_error = df_subj * df_model

    ms_subj = ss_subj_within / df_subj
    ms_error = max(ss_error, 0.0) / df_error
    F_model = _f_ratio(ss_model / df_model, ms_error)
    F_inter = _f_ratio(max(ss_inter, 0.0) / df_inter, ms_error)
    F_form = _f_ratio(ss_group / df_group, ms_subj)

    by_level = {lvl: [row[j] for row in rows] for j, lvl in enumerate(levels)}
    return AnovaResult(
        F_model=F_model,
        df=(df_model, df_error),
        p_model=float(sps.f.sf(F_model, df_model, df_error)),
        F_form=F_form,
        p_form=float(sps.f.sf(F_form, df_group, df_subj)),
        F_interaction=F_inter,
        p_interaction=float(sps.f.sf(F_inter, df_inter, df_error)),
        means={lvl: statistics.fmean(v) for lvl, v in by_level.items()},
        medians={lvl: statistics.median(v) for lvl, v in by_level.items()},
        ss={
            "form": ss_group,
            "subjects_within_form": ss_subj_within,
            "model": ss_model,
            "model_x_form": ss_inter,
            "error": ss_error,
        },
    )


@dataclass
class FitResult:
    subject_id: int
    form: int
    n_items: int
    r_by_model: dict[str, Optional[float]]
    significant_by_model: dict[str, Optional[bool]]
    intermodel_r: dict[str, Optional[float]] = field(default_factory=dict)

    @property
    def df(self) -> int:
        return self.n_items - 2


@dataclass
class FitReport:
    fits: list[FitResult]
    models: list[str]
    best_model: str
    mean_r: dict[str, float]
    median_r: dict[str, float]
    significant_counts: dict[str, int]
    excluded_counts: dict[str, int]
    critical_r: float
    anova: Optional[AnovaResult]
    anova_error: Optional[str]
    # keyed by the non-best model; correlation of its predictions with the best model's
    intermodel_r_mean: dict[str, float]
    intermodel_r_median: dict[str, float]
    # partial r of each non-best model with ratings, best model partialled out
    partial_r_mean: dict[str, Optional[float]]
    partial_r_median: dict[str, Optional[float]]

    def to_dict(self) -> dict:
        return {
            "models": self.models,
            "best_model": self.best_model,
            "critical_r": self.critical_r,
            "mean_r": {m: _json_num(v) for m, v in self.mean_r.items()},
            "median_r": {m: _json_num(v) for m, v in self.median_r.items()},
            "significant_counts": self.significant_counts,
            "excluded_counts": self.excluded_counts,
            "anova": None if self.anova is None else self.anova.to_dict(),
            "anova_error": self.anova_error,
            "intermodel_r_mean": {m: _json_num(v) for m, v in self.intermodel_r_mean.items()},
            "intermodel_r_median": {m: _json_num(v) for m, v in self.intermodel_r_median.items()},
            "partial_r_mean": self.partial_r_mean,
            "partial_r_median": self.partial_r_median,
            "subjects": [
                {
                    "subject_id": f.subject_id,
                    "form": f.form,
                    "n_items": f.n_items,
                    "r_by_model": f.r_by_model,
                    "significant_by_model": f.significant_by_model,
                    "intermodel_r": f.intermodel_r,
                }
                for f in self.fits
            ],
        }

    def to_csv(self) -> str:
        """Flat per-subject summary, one row per subject x model."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subject_id", "form", "model", "r", "significant"])
        for f in self.fits:
            for m in self.models:
                r = f.r_by_model[m]
                sig = f.significant_by_model[m]
                w.writerow([f.subject_id, f.form, m, "" if r is None else repr(r),
                            "" if sig is None else int(sig)])
        return buf.getvalue()


def _safe_pearson(xs, ys, what: str) -> Optional[float]:
    try:
        return pearson(xs, ys)
    except DegenerateInput:
        log.info("excluded: %s is constant", what)
        return None


def _agg(values, fn) -> float:
    vals = [v for v in values if v is not None]
    return fn(vals) if vals else math.nan


def _safe_partial(r_xy, r_xz, r_yz) -> Optional[float]:
    if any(math.isnan(v) for v in (r_xy, r_xz, r_yz)):
        return None
    try:
        return partial_correlation(r_xy, r_xz, r_yz)
    except DegenerateInput:
        return None


def fit_models(
    subjects: Sequence[SubjectRecord],
    design: DesignSpec = DEFAULT_DESIGN,
    models: Mapping[str, StrategyConfig] | None = None,
    alpha: float = 0.05,
    fisher_z: bool = False,
) -> FitReport:
    """Correlate each model's predictions with each subject's ratings.

    Predictions use the subject's own calibration.  The best model is the
    one with the highest mean r.  The ANOVA compares the best model with
    the runner-up, using form as the between factor; its failure (e.g.
    too few subjects) is reported in ``anova_error`` rather than raised.
    Partial correlations are computed from the aggregated (mean or median)
    correlations.
    """
    if models is None:
        models = {"mmh": MODELS["mmh"], "mean": MODELS["mean"]}
    names = list(models)
    if not names:
        raise ValueError("no models to fit")
    items = generate_items(design)
    crit = critical_r(len(items) - 2, alpha)
    fits, all_preds = [], []
    for s in subjects:
        missing = [it.id for it in items if it.id not in s.ratings]
        if missing:
            raise ValueError(f"subject {s.subject_id} has no rating for items {missing}")
        ratings = [s.ratings[it.id] for it in items]
        preds = {m: [predict_item(it, s.calibration, cfg) for it in items]
                 for m, cfg in models.items()}
        r_by = {m: _safe_pearson(preds[m], ratings, f"subject {s.subject_id} / {m}")
                for m in names}
        sig = {m: None if r is None else abs(r) > crit for m, r in r_by.items()}
        fits.append(FitResult(s.subject_id, s.form, len(items), r_by, sig))
        all_preds.append(preds)

    mean_r = {m: _agg((f.r_by_model[m] for f in fits), statistics.fmean) for m in names}
    median_r = {m: _agg((f.r_by_model[m] for f in fits), statistics.median) for m in names}
    # highest mean r first; ties and all-degenerate models keep declaration order
    ranked = sorted(names, key=lambda m: -mean_r[m] if not math.isnan(mean_r[m]) else math.inf)
    best = ranked[0]

    for f, preds in zip(fits, all_preds):
        f.intermodel_r = {
            m: _safe_pearson(preds[m], preds[best], f"subject {f.subject_id} / {m} vs {best}")
            for m in names if m != best
        }

    inter_mean = {m: _agg((f.intermodel_r[m] for f in fits), statistics.fmean)
                  for m in names if m != best}
    inter_median = {m: _agg((f.intermodel_r[m] for f in fits), statistics.median)
                    for m in names if m != best}
    partial_mean = {m: _safe_partial(mean_r[m], mean_r[best], inter_mean[m]) for m in inter_mean}
    partial_median = {m: _safe_partial(median_r[m], median_r[best], inter_median[m])
                      for m in inter_median}

    anova, anova_error = None, None
    if len(ranked) < 2:
        anova_error = "ANOVA needs two models"
    else:
        pair = ranked[:2]
        transform = (lambda r: math.atanh(max(-0.999999, min(0.999999, r)))) if fisher_z else float
        scores = {
            f.subject_id: (f.form, {m: transform(f.r_by_model[m]) for m in pair})
            for f in fits
            if all(f.r_by_model[m] is not None for m in pair)
        }
        try:
            anova = mixed_anova(scores)
        except ValueError as exc:
            anova_error = str(exc)

    return FitReport(
        fits=fits,
        models=names,
        best_model=best,
        mean_r=mean_r,
        median_r=median_r,
        significant_counts={m: sum(1 for f in fits if f.significant_by_model[m]) for m in names},
        excluded_counts={m: sum(1 for f in fits if f.r_by_model[m] is None) for m in names},
        critical_r=crit,
        anova=anova,
        anova_error=anova_error,
        intermodel_r_mean=inter_mean,
        intermodel_r_median=inter_median,
        partial_r_mean=partial_mean,
        partial_r_median=partial_median,
    )
