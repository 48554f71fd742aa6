"""sciline: bibliometric metric engine and pipeline.

Computes embedding-space stylization scores, citation-graph disruption
decompositions, knowledge-recombination distances, reception and review
latency statistics, twin-paper validation, and fixed-effects regressions
over publication corpora, with a seeded synthetic-corpus generator for
ground-truth verification.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    corpus,
    disruption,
    embed_space,
    recombination,
    reception,
    regress,
    synth,
    twins,
)
