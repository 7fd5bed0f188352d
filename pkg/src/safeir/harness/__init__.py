"""Corpus generation, parity evaluation, statistics and test oracles."""

from .corpus import CorpusCase, Invalidation, Site, gen_corpus, load_corpus, write_corpus
from .parity import CaseResult, ParityError, ParityReport, evaluate_parity, run_case
from .stats import collect_stats, emit_stats, format_stats

__all__ = [
    "CaseResult",
    "CorpusCase",
    "Invalidation",
    "ParityError",
    "ParityReport",
    "Site",
    "collect_stats",
    "emit_stats",
    "evaluate_parity",
    "format_stats",
    "gen_corpus",
    "load_corpus",
    "run_case",
    "write_corpus",
]
