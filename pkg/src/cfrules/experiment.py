"""Questionnaire design, mark conversions, predictions and synthetic subjects.

Each item pairs two rules concluding the same event X.  Rule 1 reads its
antecedents from events A, B, C and rule 2 from D, E, F; antecedent and
conclusion certainties come from a subject's calibration of the verbal
descriptors *highly*, *moderately* and *slightly*.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .antecedent import And, Leaf, Or
from .dsl import format_rulebase
from .engine import MMH, Rule, StrategyConfig, WorkingMemory, infer

DESCRIPTORS = ("highly", "moderately", "slightly")
CONNECTIVES = ("and", "or")
DIRECTIONS = ("happen", "not_happen")

LINE_CM = 16.0
MARK_STEP_CM = 0.5
CALIBRATION_STEP = MARK_STEP_CM / LINE_CM  # 1/32
RATING_STEP = MARK_STEP_CM / (LINE_CM / 2)  # 1/16

# centres of the thirds of the calibration line; simulation only
BASE_CALIBRATION = {"highly": 0.875, "moderately": 0.5, "slightly": 0.1875}
CALIBRATION_JITTER = 0.0625

CONCLUSION = "X"
RULE1_EVENTS = ("A", "B", "C")
RULE2_EVENTS = ("D", "E", "F")


def _round_half_up(x: float) -> float:
    # ties away from zero
    return math.copysign(math.floor(abs(x) + 0.5), x)


def quantize(x: float, step: float) -> float:
    return _round_half_up(x / step) * step


def _check_mark(cm: float) -> float:
    cm = float(cm)
    if not 0.0 <= cm <= LINE_CM:
        raise ValueError(f"mark {cm} cm is off the {LINE_CM:g} cm line")
    return quantize(cm, MARK_STEP_CM)


def convert_calibration_mark(cm: float) -> float:
    """Calibration-line mark (cm from the *uncertain* end) to a certainty in [0, 1]."""
    return _check_mark(cm) / LINE_CM


def convert_rating_mark(cm: float) -> float:
    """Rating-line mark (cm from the *certain not* end) to a CF in [-1, 1]."""
    half = LINE_CM / 2
    return (_check_mark(cm) - half) / half


@dataclass(frozen=True)
class RuleTemplate:
    connective: str
    antecedent_descriptors: tuple[str, str, str]
    conclusion_descriptor: str
    conclusion_direction: str

    def __post_init__(self):
        object.__setattr__(self, "antecedent_descriptors", tuple(self.antecedent_descriptors))
        if self.connective not in CONNECTIVES:
            raise ValueError(f"unknown connective {self.connective!r}")
        if self.conclusion_direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.conclusion_direction!r}")
        for d in (*self.antecedent_descriptors, self.conclusion_descriptor):
            if d not in DESCRIPTORS:
                raise ValueError(f"unknown descriptor {d!r}")
        if len(self.antecedent_descriptors) != 3:
            raise ValueError("a rule has exactly three antecedents")

    def to_rule(self, rule_id: str, events: Sequence[str], calib: Mapping[str, float]) -> Rule:
        node = And if self.connective == "and" else Or
        max_cf = calib[self.conclusion_descriptor]
        if self.conclusion_direction == "not_happen":
            max_cf = -max_cf
        return Rule(rule_id, node(tuple(Leaf(e) for e in events)), ((CONCLUSION, max_cf),))


@dataclass(frozen=True)
class ExperimentItem:
    id: int
    rule1: RuleTemplate
    rule2: RuleTemplate

    def rulebase(self, calib: Mapping[str, float]) -> tuple[list[Rule], list[tuple[str, float]]]:
        """The item's two rules and its six antecedent facts under ``calib``."""
        rules = [
            self.rule1.to_rule("r1", RULE1_EVENTS, calib),
            self.rule2.to_rule("r2", RULE2_EVENTS, calib),
        ]
        facts = [
            (event, calib[d])
            for tmpl, events in ((self.rule1, RULE1_EVENTS), (self.rule2, RULE2_EVENTS))
            for event, d in zip(events, tmpl.antecedent_descriptors)
        ]
        return rules, facts

    def to_dict(self) -> dict:
        return {"id": self.id, "rule1": asdict(self.rule1), "rule2": asdict(self.rule2)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentItem":
        return cls(int(d["id"]), RuleTemplate(**d["rule1"]), RuleTemplate(**d["rule2"]))


@dataclass(frozen=True)
class DesignSpec:
    """Factor levels for the item set, or an explicit item list.

    The default crosses rule-1 direction x rule-2 direction x rule-1
    connective x rule-1 conclusion strength and drops the cells where both
    rules conclude "happen", leaving 12 items.  Rule 2 takes the opposite
    connective of rule 1 and a moderate conclusion.
    """

    rule1_connectives: tuple[str, ...] = CONNECTIVES
    rule1_conclusions: tuple[str, ...] = ("highly", "moderately")
    rule1_directions: tuple[str, ...] = DIRECTIONS
    rule2_directions: tuple[str, ...] = DIRECTIONS
    rule2_conclusion: str = "moderately"
    antecedent_descriptors: tuple[str, str, str] = DESCRIPTORS
    exclude_directions: tuple[tuple[str, str], ...] = (("happen", "happen"),)
    n_items: Optional[int] = 12
    items: Optional[tuple[ExperimentItem, ...]] = None

    @classmethod
    def from_json(cls, data: Mapping | str) -> "DesignSpec":
        if isinstance(data, str):
            data = json.loads(data)
        data = dict(data)
        if "items" in data and data["items"] is not None:
            data["items"] = tuple(ExperimentItem.from_dict(d) for d in data["items"])
        if "exclude_directions" in data:
            data["exclude_directions"] = tuple(tuple(p) for p in data["exclude_directions"])
        for key in ("rule1_connectives", "rule1_conclusions", "rule1_directions",
                    "rule2_directions", "antecedent_descriptors"):
            if key in data:
                data[key] = tuple(data[key])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown design keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "DesignSpec":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> dict:
        d = {
            "rule1_connectives": list(self.rule1_connectives),
            "rule1_conclusions": list(self.rule1_conclusions),
            "rule1_directions": list(self.rule1_directions),
            "rule2_directions": list(self.rule2_directions),
            "rule2_conclusion": self.rule2_conclusion,
            "antecedent_descriptors": list(self.antecedent_descriptors),
            "exclude_directions": [list(p) for p in self.exclude_directions],
            "n_items": self.n_items,
        }
        if self.items is not None:
            d["items"] = [it.to_dict() for it in self.items]
        return d


DEFAULT_DESIGN = DesignSpec()


def generate_items(design: DesignSpec = DEFAULT_DESIGN) -> list[ExperimentItem]:
    """Enumerate the design's items deterministically, numbered from 1."""
    if design.items is not None:
        items = list(design.items)
    else:
        items = []
        cells = itertools.product(
            design.rule1_directions,
            design.rule2_directions,
            design.rule1_connectives,
            design.rule1_conclusions,
        )
        for dir1, dir2, conn, concl in cells:
            if (dir1, dir2) in design.exclude_directions:
                continue
            other = "or" if conn == "and" else "and"
            items.append(ExperimentItem(
                len(items) + 1,
                RuleTemplate(conn, design.antecedent_descriptors, concl, dir1),
                RuleTemplate(other, design.antecedent_descriptors, design.rule2_conclusion, dir2),
            ))
    ids = [it.id for it in items]
    if len(set(ids)) != len(ids):
        raise ValueError("design has duplicate item ids")
    if len({(it.rule1, it.rule2) for it in items}) != len(items):
        raise ValueError("design has duplicate items")
    if design.n_items is not None and len(items) != design.n_items:
        raise ValueError(f"design yields {len(items)} items, expected {design.n_items}")
    return items


def form_order(form: int, n_items: int) -> list[int]:
    """Presentation order of item ids for questionnaire ``form``."""
    order = list(range(1, n_items + 1))
    random.Random(1000 + form).shuffle(order)
    return order


def item_to_cfr(item: ExperimentItem, calib: Mapping[str, float]) -> str:
    rules, facts = item.rulebase(calib)
    header = [f"# item {item.id}"]
    for name, tmpl in (("r1", item.rule1), ("r2", item.rule2)):
        header.append(
            f"# {name}: {tmpl.connective} of {', '.join(tmpl.antecedent_descriptors)}"
            f" -> {tmpl.conclusion_descriptor} certain "
            f"{'to happen' if tmpl.conclusion_direction == 'happen' else 'not to happen'}"
        )
    return "\n".join(header) + "\n" + format_rulebase(rules, facts)


def predict_item(item: ExperimentItem, calib: Mapping[str, float], cfg: StrategyConfig) -> float:
    """Model prediction for the certainty of X.

    Runs with firing threshold 0 so that every item gets a prediction;
    when neither rule fires the prediction is 0 (uncertain).
    """
    rules, facts = item.rulebase(calib)
    wm, _ = infer(WorkingMemory(facts), rules, cfg.with_threshold(0.0))
    cf = wm.query(CONCLUSION)
    return 0.0 if cf is None else cf


@dataclass
class SubjectRecord:
    subject_id: int
    form: int
    calibration: dict[str, float]
    ratings: dict[int, float] = field(default_factory=dict)


def simulate_subjects(
    n: int,
    design: DesignSpec = DEFAULT_DESIGN,
    truth_cfg: StrategyConfig = MMH,
    noise_sd: float = 0.15,
    seed: int = 0,
) -> list[SubjectRecord]:
    """Synthetic subjects whose ratings follow ``truth_cfg`` plus Gaussian noise.

    Calibrations jitter uniformly around :data:`BASE_CALIBRATION`; both
    calibrations and ratings are quantised to half-centimetre marks.
    Subjects alternate between forms 1 and 2.
    """
    if n < 2:
        raise ValueError("need at least two subjects")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    items = generate_items(design)
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n):
        jitter = rng.uniform(-CALIBRATION_JITTER, CALIBRATION_JITTER, size=len(DESCRIPTORS))
        calib = {
            d: min(1.0, max(0.0, quantize(BASE_CALIBRATION[d] + j, CALIBRATION_STEP)))
            for d, j in zip(DESCRIPTORS, jitter)
        }
        noise = rng.normal(0.0, noise_sd, size=len(items))
        ratings = {}
        for item, e in zip(items, noise):
            raw = predict_item(item, calib, truth_cfg) + float(e)
            ratings[item.id] = quantize(min(1.0, max(-1.0, raw)), RATING_STEP)
        subjects.append(SubjectRecord(i + 1, 1 + i % 2, calib, ratings))
    return subjects


RATINGS_COLUMNS = ("subject_id", "form", "item_id", "rating")
CALIBRATION_COLUMNS = ("subject_id", "descriptor", "value")


def write_subjects(subjects: Iterable[SubjectRecord], ratings_path, calibration_path) -> None:
    subjects = list(subjects)
    with open(ratings_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATINGS_COLUMNS)
        for s in subjects:
            for item_id, r in sorted(s.ratings.items()):
                w.writerow([s.subject_id, s.form, item_id, repr(float(r))])
    with open(calibration_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALIBRATION_COLUMNS)
        for s in subjects:
            for d in DESCRIPTORS:
                w.writerow([s.subject_id, d, repr(float(s.calibration[d]))])


def _check_header(reader, expected, path):
    if tuple(reader.fieldnames or ()) != expected:
        raise ValueError(f"{path}: expected columns {','.join(expected)}")


def read_subjects(ratings_path, calibration_path) -> list[SubjectRecord]:
    subjects: dict[int, SubjectRecord] = {}
    with open(calibration_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, CALIBRATION_COLUMNS, calibration_path)
        for row in reader:
            sid = int(row["subject_id"])
            if row["descriptor"] not in DESCRIPTORS:
                raise ValueError(f"{calibration_path}: unknown descriptor {row['descriptor']!r}")
            value = float(row["value"])
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{calibration_path}: calibration {value} outside [0, 1]")
            rec = subjects.setdefault(sid, SubjectRecord(sid, 0, {}))
            rec.calibration[row["descriptor"]] = value
    with open(ratings_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, RATINGS_COLUMNS, ratings_path)
        for row in reader:
            sid = int(row["subject_id"])
            if sid not in subjects:
                raise ValueError(f"{ratings_path}: subject {sid} has no calibration")
            rec = subjects[sid]
            form = int(row["form"])
            if form not in (1, 2) or rec.form not in (0, form):
                raise ValueError(f"{ratings_path}: bad form {form} for subject {sid}")
            rec.form = form
            value = float(row["rating"])
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"{ratings_path}: rating {value} outside [-1, 1]")
            rec.ratings[int(row["item_id"])] = value
    for rec in subjects.values():
        missing = set(DESCRIPTORS) - set(rec.calibration)
        if missing:
            raise ValueError(f"subject {rec.subject_id} lacks calibration for {sorted(missing)}")
        if rec.form == 0:
            raise ValueError(f"subject {rec.subject_id} has no ratings")
    return [subjects[k] for k in sorted(subjects)]
