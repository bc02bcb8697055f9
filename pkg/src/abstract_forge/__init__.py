"""Corpus-guided synthesis of compressive lambda-calculus abstractions."""

from .compression import (Abstraction, LibraryResult, compress_iterated, compression_ratio,
                          inline, local_utility, make_abstraction, rewrite_corpus, utility)
from .expr import CostParams, Corpus, ExprStore, Kind, ParseError, Program, corpus_stats
from .kernels import IMPLEMENTATION as KERNELS
from .search import SearchConfig, SearchResult, SearchStats, cts_search
from .unify import downshift, lambda_unify, substitute, upshift

__all__ = [
    "Abstraction", "CostParams", "Corpus", "ExprStore", "KERNELS", "Kind", "LibraryResult",
    "ParseError", "Program", "SearchConfig", "SearchResult", "SearchStats", "compress_iterated",
    "compression_ratio", "corpus_stats", "cts_search", "downshift", "inline", "lambda_unify",
    "local_utility", "make_abstraction", "rewrite_corpus", "substitute", "upshift", "utility",
]
