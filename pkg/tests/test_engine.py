import itertools
import random

import pytest

from cfrules.antecedent import And, Leaf, Or, UnknownProposition
from cfrules.cf_algebra import ContradictionError
from cfrules.engine import (
    MEAN_MODEL,
    MMH,
    CycleError,
    Rule,
    StrategyConfig,
    WorkingMemory,
    assert_fact,
    fire_rule,
    infer,
    query,
)

R1 = Rule("r1", And((Leaf("A"), Leaf("B"), Leaf("C"))), (("X", 0.9),))
R2 = Rule("r2", Or((Leaf("D"), Leaf("E"), Leaf("F"))), (("X", -0.6),))
FACTS = [("A", 0.9), ("B", 0.6), ("C", 0.3), ("D", 0.9), ("E", 0.6), ("F", 0.3)]
MMH0 = MMH.with_threshold(0.0)


class TestWorkingMemory:
    def test_assert(self):
        wm = assert_fact(WorkingMemory(), "A", 0.9)
        assert query(wm, "A") == 0.9

    def test_replace(self):
        wm = WorkingMemory()
        assert_fact(wm, "A", 0.9)
        assert_fact(wm, "A", 0.4)
        assert query(wm, "A") == 0.4

    def test_range(self):
        with pytest.raises(ValueError):
            assert_fact(WorkingMemory(), "A", 1.2)

    def test_absent_vs_zero(self):
        wm = WorkingMemory([("p", 0.0)])
        assert query(wm, "p") == 0.0
        assert query(wm, "unseen") is None

    def test_reassert_recomputes_with_contributions(self):
        wm = WorkingMemory([("A", 1.0), ("X", 0.5)])
        fire_rule(wm, Rule("r", Leaf("A"), (("X", 0.5),)), MMH)
        assert query(wm, "X") == pytest.approx(0.8)
        assert_fact(wm, "X", -0.5)
        assert query(wm, "X") == pytest.approx(0.0)
        assert wm.beliefs["X"].contributions == [("r", 0.5)]


class TestRule:
    def test_duplicate_conclusion(self):
        with pytest.raises(ValueError):
            Rule("r", Leaf("A"), (("X", 0.5), ("X", 0.2)))

    def test_needs_conclusion(self):
        with pytest.raises(ValueError):
            Rule("r", Leaf("A"), ())

    def test_max_cf_range(self):
        with pytest.raises(ValueError):
            Rule("r", Leaf("A"), (("X", 1.5),))


class TestFireRule:
    def test_sample_item(self):
        wm = WorkingMemory(FACTS)
        f1 = fire_rule(wm, R1, MMH)
        assert f1.summarized_antecedent == 0.3
        assert f1.contributions[0].scaled_cf == pytest.approx(0.27)
        f2 = fire_rule(wm, R2, MMH)
        assert f2.contributions[0].scaled_cf == pytest.approx(-0.54)
        assert query(wm, "X") == pytest.approx(-0.31608, abs=1e-5)
        assert f2.contributions[0].combined_cf_after == query(wm, "X")

    def test_below_threshold_no_fire(self):
        wm = WorkingMemory([("A", 0.2)])
        assert fire_rule(wm, Rule("r", Leaf("A"), (("X", 1.0),)), MMH) is None
        assert query(wm, "X") is None

    def test_threshold_is_strict(self):
        wm = WorkingMemory([("A", 0.25)])
        cfg = MMH.with_threshold(0.25)
        assert fire_rule(wm, Rule("r", Leaf("A"), (("X", 1.0),)), cfg) is None

    def test_no_double_contribution(self):
        wm = WorkingMemory(FACTS)
        fire_rule(wm, R1, MMH)
        assert fire_rule(wm, R1, MMH) is None
        assert query(wm, "X") == pytest.approx(0.27)

    def test_unknown(self):
        with pytest.raises(UnknownProposition):
            fire_rule(WorkingMemory([("A", 1.0)]), R1, MMH)

    def test_contradiction_leaves_wm_untouched(self):
        wm = WorkingMemory([("A", 1.0), ("X", -1.0)])
        with pytest.raises(ContradictionError):
            fire_rule(wm, Rule("r", Leaf("A"), (("Y", 0.5), ("X", 1.0))), MMH)
        assert query(wm, "X") == -1.0
        assert query(wm, "Y") is None

    def test_base_fact_folded_first(self):
        wm = WorkingMemory([("A", 1.0), ("X", 0.5)])
        fire_rule(wm, Rule("r", Leaf("A"), (("X", 0.5),)), StrategyConfig("maximin", "multiply", "mean"))
        assert query(wm, "X") == 0.5
        assert wm.beliefs["X"].evidence() == [0.5, 0.5]


class TestInfer:
    def test_empty_rulebase(self):
        wm = WorkingMemory(FACTS)
        out, trace = infer(wm, [], MMH)
        assert out.snapshot() == wm.snapshot()
        assert trace == []

    def test_chain(self):
        rules = [Rule("r1", Leaf("A"), (("B", 1.0),)), Rule("r2", Leaf("B"), (("C", 1.0),))]
        wm, trace = infer(WorkingMemory([("A", 0.5)]), rules, MMH)
        assert query(wm, "C") == 0.5
        assert [f.rule_id for f in trace] == ["r1", "r2"]

    def test_chain_declared_backwards(self):
        rules = [Rule("r2", Leaf("B"), (("C", 1.0),)), Rule("r1", Leaf("A"), (("B", 1.0),))]
        wm, trace = infer(WorkingMemory([("A", 0.5)]), rules, MMH)
        assert query(wm, "C") == 0.5
        assert [f.rule_id for f in trace] == ["r1", "r2"]

    def test_consumer_waits_for_all_producers(self):
        rules = [
            Rule("p1", Leaf("A"), (("B", 0.5),)),
            Rule("use", Leaf("B"), (("C", 1.0),)),
            Rule("p2", Leaf("A"), (("B", 0.5),)),
        ]
        wm, trace = infer(WorkingMemory([("A", 1.0)]), rules, MMH)
        assert query(wm, "B") == pytest.approx(0.8)
        assert query(wm, "C") == pytest.approx(0.8)
        assert [f.rule_id for f in trace] == ["p1", "p2", "use"]

    def test_sample_item(self):
        wm, trace = infer(WorkingMemory(FACTS), [R1, R2], MMH)
        assert query(wm, "X") == pytest.approx(-0.31608, abs=1e-5)
        assert len(trace) == 2
        assert [c.scaled_cf for f in trace for c in f.contributions] == pytest.approx([0.27, -0.54])

    def test_does_not_mutate_input(self):
        wm = WorkingMemory(FACTS)
        infer(wm, [R1, R2], MMH)
        assert query(wm, "X") is None

    def test_idempotent(self):
        wm, _ = infer(WorkingMemory(FACTS), [R1, R2], MMH)
        again, trace = infer(wm, [R1, R2], MMH)
        assert again.snapshot() == wm.snapshot()
        assert trace == []

    def test_cycle(self):
        rules = [Rule("a", Leaf("X"), (("Y", 1.0),)), Rule("b", Leaf("Y"), (("X", 1.0),))]
        with pytest.raises(CycleError) as exc:
            infer(WorkingMemory([("X", 1.0)]), rules, MMH)
        assert set(exc.value.cycle) == {"X", "Y"}

    def test_self_cycle(self):
        with pytest.raises(CycleError):
            infer(WorkingMemory([("X", 1.0)]), [Rule("a", Leaf("X"), (("X", 1.0),))], MMH)

    def test_underivable_leaf(self):
        with pytest.raises(UnknownProposition):
            infer(WorkingMemory([("A", 1.0)]), [R1], MMH)

    def test_leaf_left_unbelieved_skips_rule(self):
        rules = [Rule("r1", Leaf("A"), (("B", 1.0),)), Rule("r2", Leaf("B"), (("C", 1.0),))]
        wm, trace = infer(WorkingMemory([("A", 0.1)]), rules, MMH)
        assert query(wm, "B") is None and query(wm, "C") is None
        assert trace == []

    def test_duplicate_ids(self):
        with pytest.raises(ValueError):
            infer(WorkingMemory(FACTS), [R1, R1], MMH)

    def test_mean_model_sample_item(self):
        wm, _ = infer(WorkingMemory(FACTS), [R1, R2], MEAN_MODEL.with_threshold(0.0))
        assert query(wm, "X") == pytest.approx(0.375, abs=1e-12)

    def test_trace_serialisation(self):
        _, trace = infer(WorkingMemory(FACTS), [R1, R2], MMH)
        doc = trace.to_json()
        assert doc[0] == {
            "rule_id": "r1",
            "summarized_antecedent": 0.3,
            "contributions": [{"proposition": "X", "scaled_cf": pytest.approx(0.27),
                               "combined_cf_after": pytest.approx(0.27)}],
        }
        text = trace.to_text()
        assert "r2: antecedent 0.9000" in text
        assert "-0.3161" in text


def random_rulebase(rng, n_rules, n_props):
    """Layered acyclic rulebase; layer-0 propositions are facts."""
    props = [f"P{i}" for i in range(n_props)]
    facts = [(p, rng.uniform(-0.2, 1.0)) for p in props[:3]]
    rules = []
    available = set(props[:3])
    for i in range(n_rules):
        hi = rng.randint(3, n_props - 1)
        concl = props[hi]
        pool = [p for p in props[:hi] if p in available]
        available.add(concl)
        k = rng.randint(1, min(3, len(pool)))
        kids = tuple(Leaf(p) for p in rng.sample(pool, k))
        ante = kids[0] if k == 1 else rng.choice([And, Or])(kids)
        rules.append(Rule(f"r{i}", ante, ((concl, rng.uniform(-0.95, 0.95)),)))
    return rules, facts


@pytest.mark.parametrize("seed", range(40))
def test_heckerman_declaration_order_invariance(seed):
    rng = random.Random(seed)
    rules, facts = random_rulebase(rng, 6, 7)
    base, _ = infer(WorkingMemory(facts), rules, MMH)
    for _ in range(5):
        shuffled = rules[:]
        rng.shuffle(shuffled)
        other, _ = infer(WorkingMemory(facts), shuffled, MMH)
        assert other.snapshot().keys() == base.snapshot().keys()
        for p, cf in base.snapshot().items():
            assert other.query(p) == pytest.approx(cf, abs=1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_removing_non_firing_rule_changes_nothing(seed):
    rng = random.Random(seed)
    rules, facts = random_rulebase(rng, 6, 7)
    wm, trace = infer(WorkingMemory(facts), rules, MMH)
    fired = {f.rule_id for f in trace}
    for r in rules:
        if r.id in fired:
            continue
        reduced = [x for x in rules if x.id != r.id]
        # removing the only producer of a leaf would make it underivable
        try:
            out, _ = infer(WorkingMemory(facts), reduced, MMH)
        except UnknownProposition:
            continue
        assert out.snapshot() == wm.snapshot()


def test_classic_is_deterministic_for_fixed_order():
    rng = random.Random(3)
    rules, facts = random_rulebase(rng, 6, 7)
    cfg = StrategyConfig("maximin", "multiply", "classic")
    a, _ = infer(WorkingMemory(facts), rules, cfg)
    b, _ = infer(WorkingMemory(facts), rules, cfg)
    assert a.snapshot() == b.snapshot()
