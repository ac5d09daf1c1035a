"""MLVE embedding store exporter for pretrained encoders."""

from .export import (
    DatasetError,
    ExporterError,
    ExportSpec,
    ModelLoadError,
    TokenizationError,
    WriteError,
    export_embeddings,
    read_sentences,
    write_mlve,
)

__version__ = "0.1.0"
