"""Python bindings for the eventstruct type-induction library."""

from ._core import (
    Error,
    Schema,
    Document,
    ModelParams,
    __version__,
    corpus_stats,
    default_schema,
    fit,
    krippendorff_alpha,
    load_checkpoint,
    load_corpus,
    load_schema,
    posteriors,
    ridit_table,
    save_checkpoint,
    save_corpus,
    summarize_types,
    synth,
)

__all__ = [
    "Error",
    "Schema",
    "Document",
    "ModelParams",
    "__version__",
    "corpus_stats",
    "default_schema",
    "fit",
    "krippendorff_alpha",
    "load_checkpoint",
    "load_corpus",
    "load_schema",
    "posteriors",
    "ridit_table",
    "save_checkpoint",
    "save_corpus",
    "summarize_types",
    "synth",
]
