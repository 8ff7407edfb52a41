"""Certainty-factor propagation for production rules."""

from .antecedent import And, Leaf, Or, SummarizerKind, UnknownProposition, summarize
from .cf_algebra import (
    CombinerKind,
    ContradictionError,
    ScalerKind,
    check_cf,
    combine,
    combine_classic,
    combine_dempster_shafer,
    combine_heckerman,
    combine_simple,
    fold_combine,
    scale,
)
from .dsl import ParseError, format_rulebase, parse_rulebase
from .engine import (
    MEAN_MODEL,
    MMH,
    MODELS,
    CycleError,
    Rule,
    StrategyConfig,
    Trace,
    WorkingMemory,
    assert_fact,
    fire_rule,
    infer,
    query,
)

__version__ = "0.1.0"
