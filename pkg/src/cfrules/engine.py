"""Working memory, rule firing and forward chaining."""

from __future__ import annotations

import graphlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .antecedent import Expr, SummarizerKind, UnknownProposition, leaves, summarize
from .cf_algebra import CombinerKind, ScalerKind, check_cf, fold_combine, scale


class CycleError(ValueError):
    """The rulebase's dependency graph is not acyclic."""

    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__("cyclic rule dependencies: " + " -> ".join(self.cycle))


@dataclass(frozen=True)
class Rule:
    id: str
    antecedent: Expr
    conclusions: tuple[tuple[str, float], ...]

    def __post_init__(self):
        concl = tuple((str(p), check_cf(cf)) for p, cf in self.conclusions)
        if not concl:
            raise ValueError(f"rule {self.id} has no conclusions")
        props = [p for p, _ in concl]
        if len(set(props)) != len(props):
            raise ValueError(f"rule {self.id} concludes the same proposition twice")
        object.__setattr__(self, "conclusions", concl)


@dataclass(frozen=True)
class StrategyConfig:
    summarizer: SummarizerKind = SummarizerKind.MAXIMIN
    scaler: ScalerKind = ScalerKind.MULTIPLY
    combiner: CombinerKind = CombinerKind.HECKERMAN
    firing_threshold: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "summarizer", SummarizerKind(self.summarizer))
        object.__setattr__(self, "scaler", ScalerKind(self.scaler))
        object.__setattr__(self, "combiner", CombinerKind(self.combiner))
        if not 0.0 <= self.firing_threshold < 1.0:
            raise ValueError("firing threshold must lie in [0, 1)")

    def with_threshold(self, threshold: float) -> "StrategyConfig":
        return StrategyConfig(self.summarizer, self.scaler, self.combiner, threshold)


MMH = StrategyConfig(SummarizerKind.MAXIMIN, ScalerKind.MULTIPLY, CombinerKind.HECKERMAN)
MEAN_MODEL = StrategyConfig(SummarizerKind.MEAN, ScalerKind.MEAN, CombinerKind.MEAN)

MODELS: dict[str, StrategyConfig] = {
    "mmh": MMH,
    "mean": MEAN_MODEL,
    "classic": StrategyConfig(SummarizerKind.MAXIMIN, ScalerKind.MULTIPLY, CombinerKind.CLASSIC),
    "ds": StrategyConfig(SummarizerKind.MAXIMIN, ScalerKind.MULTIPLY, CombinerKind.DEMPSTER_SHAFER),
}


@dataclass
class Belief:
    """A proposition's current CF plus the evidence it was folded from."""

    cf: float
    base: Optional[float] = None
    contributions: list[tuple[str, float]] = field(default_factory=list)
    combiner: Optional[CombinerKind] = None

    def evidence(self) -> list[float]:
        head = [] if self.base is None else [self.base]
        return head + [c for _, c in self.contributions]

    def copy(self) -> "Belief":
        return Belief(self.cf, self.base, list(self.contributions), self.combiner)

    def recompute(self) -> float:
        values = self.evidence()
        if len(values) == 1:
            return values[0]
        return fold_combine(self.combiner or CombinerKind.HECKERMAN, values)


class WorkingMemory:
    def __init__(self, facts: Iterable[tuple[str, float]] = ()):
        self.beliefs: dict[str, Belief] = {}
        for prop, cf in facts:
            self.assert_fact(prop, cf)

    def assert_fact(self, prop: str, cf: float) -> "WorkingMemory":
        """Record a base fact, replacing any earlier base fact for ``prop``."""
        cf = check_cf(cf)
        belief = self.beliefs.get(prop)
        if belief is None:
            self.beliefs[prop] = Belief(cf=cf, base=cf)
        else:
            belief.base = cf
            belief.cf = belief.recompute()
        return self

    def query(self, prop: str) -> Optional[float]:
        belief = self.beliefs.get(prop)
        return None if belief is None else belief.cf

    def cf(self, prop: str) -> float:
        try:
            return self.beliefs[prop].cf
        except KeyError:
            raise UnknownProposition(prop) from None

    def __contains__(self, prop: str) -> bool:
        return prop in self.beliefs

    def copy(self) -> "WorkingMemory":
        out = WorkingMemory()
        out.beliefs = {p: b.copy() for p, b in self.beliefs.items()}
        return out

    def snapshot(self) -> dict[str, float]:
        return {p: b.cf for p, b in sorted(self.beliefs.items())}

    def __repr__(self) -> str:
        return f"WorkingMemory({self.snapshot()!r})"


def assert_fact(wm: WorkingMemory, prop: str, cf: float) -> WorkingMemory:
    return wm.assert_fact(prop, cf)


def query(wm: WorkingMemory, prop: str) -> Optional[float]:
    """The belief CF for ``prop``, or None when nothing is believed about it."""
    return wm.query(prop)


@dataclass(frozen=True)
class Contribution:
    proposition: str
    scaled_cf: float
    combined_cf_after: float


@dataclass(frozen=True)
class Firing:
    rule_id: str
    summarized_antecedent: float
    contributions: tuple[Contribution, ...]

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "summarized_antecedent": self.summarized_antecedent,
            "contributions": [
                {
                    "proposition": c.proposition,
                    "scaled_cf": c.scaled_cf,
                    "combined_cf_after": c.combined_cf_after,
                }
                for c in self.contributions
            ],
        }


class Trace(list):
    """Firing records in the order rules fired."""

    def to_json(self) -> list[dict]:
        return [f.to_dict() for f in self]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def to_text(self) -> str:
        lines = []
        for i, f in enumerate(self, 1):
            lines.append(f"{i}. {f.rule_id}: antecedent {f.summarized_antecedent:.4f}")
            for c in f.contributions:
                lines.append(
                    f"   {c.proposition} += {c.scaled_cf:.4f} -> {c.combined_cf_after:.4f}"
                )
        return "\n".join(lines)


def fire_rule(wm: WorkingMemory, rule: Rule, cfg: StrategyConfig) -> Optional[Firing]:
    """Fire ``rule`` against ``wm`` in place.

    Returns the firing record, or None when the summarised antecedent does
    not exceed the threshold.  Conclusions this rule already contributed to
    are left alone.  Nothing is modified if a combination fails.
    """
    a = summarize(cfg.summarizer, rule.antecedent, wm.cf)
    if a <= cfg.firing_threshold:
        return None
    updates: list[tuple[str, Belief]] = []
    records = []
    for prop, max_cf in rule.conclusions:
        old = wm.beliefs.get(prop)
        if old is not None and any(rid == rule.id for rid, _ in old.contributions):
            continue
        c = scale(cfg.scaler, max_cf, a)
        new = old.copy() if old is not None else Belief(cf=c)
        new.contributions.append((rule.id, c))
        new.combiner = cfg.combiner
        new.cf = new.recompute()
        updates.append((prop, new))
        records.append(Contribution(prop, c, new.cf))
    if not updates:
        return None
    for prop, new in updates:
        wm.beliefs[prop] = new
    return Firing(rule.id, a, tuple(records))


def check_acyclic(rules: Sequence[Rule], needed: Optional[Sequence[set[str]]] = None) -> None:
    if needed is None:
        needed = [set(leaves(r.antecedent)) for r in rules]
    graph: dict[str, set[str]] = {}
    for rule, deps in zip(rules, needed):
        for prop, _ in rule.conclusions:
            graph.setdefault(prop, set()).update(deps)
    try:
        graphlib.TopologicalSorter(graph).prepare()
    except graphlib.CycleError as exc:
        raise CycleError(exc.args[1]) from None


def infer(
    wm: WorkingMemory, rules: Sequence[Rule], cfg: StrategyConfig
) -> tuple[WorkingMemory, Trace]:
    """Forward-chain ``rules`` over a copy of ``wm`` until nothing can fire.

    A rule is considered once every rule concluding one of its leaves has
    been considered, so chained rules always see settled beliefs.  Within a
    pass, rules are visited in declaration order.  A rule with a leaf that
    ends up unbelieved (all of its producers stayed below threshold) is
    skipped.
    """
    ids = [r.id for r in rules]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate rule ids in rulebase")
    needed = [set(leaves(r.antecedent)) for r in rules]
    check_acyclic(rules, needed)

    wm = wm.copy()
    producers: dict[str, list[int]] = {}
    for i, rule in enumerate(rules):
        for prop, _ in rule.conclusions:
            producers.setdefault(prop, []).append(i)
    for deps in needed:
        for prop in sorted(deps):
            if prop not in wm and prop not in producers:
                raise UnknownProposition(prop)

    trace = Trace()
    done = [False] * len(rules)
    while not all(done):
        progressed = False
        for i, rule in enumerate(rules):
            if done[i]:
                continue
            if any(not done[j] for p in needed[i] for j in producers.get(p, ())):
                continue
            done[i] = progressed = True
            if all(p in wm for p in needed[i]):
                firing = fire_rule(wm, rule, cfg)
                if firing is not None:
                    trace.append(firing)
        if not progressed:  # pragma: no cover - excluded by check_acyclic
            raise RuntimeError("forward chaining stalled")
    return wm, trace
