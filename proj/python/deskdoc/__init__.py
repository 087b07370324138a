"""Desk-scale multi-modal document model: geometry, tokenizer, metrics and
training entry points backed by the C++ core."""

from ._deskdoc import (
    Box,
    DataError,
    GridConfig,
    NumericalError,
    SpatialIndices,
    Vocab,
    accuracy,
    anls,
    assign_lines,
    corrupt_spans,
    count_params,
    entity_f1,
    evaluate,
    finetune,
    generate_corpus,
    grid_label,
    inject_ocr_noise,
    levenshtein,
    line_distance_label,
    normalize_box,
    pretrain,
    quantize_spatial,
)

__all__ = [
    "Box",
    "DataError",
    "GridConfig",
    "NumericalError",
    "SpatialIndices",
    "Vocab",
    "accuracy",
    "anls",
    "assign_lines",
    "corrupt_spans",
    "count_params",
    "entity_f1",
    "evaluate",
    "finetune",
    "generate_corpus",
    "grid_label",
    "inject_ocr_noise",
    "levenshtein",
    "line_distance_label",
    "normalize_box",
    "pretrain",
    "quantize_spatial",
]

__version__ = "0.1.0"
