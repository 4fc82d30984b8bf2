"""Protocol dependency extraction and formal model generation."""

from ._core import (
    PROPERTIES,
    ConfigError,
    ConsistencyError,
    Error,
    InputError,
    NumericError,
    ParseError,
    ShapeError,
    TemplateError,
    auc,
    balanced_bce,
    demo,
    emit_formal_model,
    intent_filter,
    merge_graphs,
    parse_formal_model,
    softmax_rows,
    to_dot,
    train,
    unweighted_bce,
)

__all__ = [
    "PROPERTIES",
    "ConfigError",
    "ConsistencyError",
    "Error",
    "InputError",
    "NumericError",
    "ParseError",
    "ShapeError",
    "TemplateError",
    "auc",
    "balanced_bce",
    "demo",
    "emit_formal_model",
    "intent_filter",
    "merge_graphs",
    "parse_formal_model",
    "softmax_rows",
    "to_dot",
    "train",
    "unweighted_bce",
]
