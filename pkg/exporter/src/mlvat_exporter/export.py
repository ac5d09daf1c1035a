"""Export per-sentence, per-layer embeddings from a pretrained encoder.

For every sentence in a TSV dataset (ID, Tweet, label columns) the
exporter runs the encoder once in eval mode and stores, for each hidden
layer, the mean over non-padding token states. Layer 0 is the embedding
layer, so an encoder with N transformer layers yields N+1 vectors per
sentence. Output is the MLVE binary store: magic, version, counts,
length-prefixed ids, then 32-bit little-endian floats.

Determinism: eval mode (no dropout), sentences processed in file order,
fixed batch composition. Exporting the same spec twice produces
byte-identical files.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

STORE_MAGIC = b"MLVE"
STORE_VERSION = 1


class ExporterError(Exception):
    pass


class ModelLoadError(ExporterError):
    pass


class TokenizationError(ExporterError):
    pass


class DatasetError(ExporterError):
    pass


class WriteError(ExporterError):
    pass


@dataclass(frozen=True)
class ExportSpec:
    model: str                       # hub id or local directory
    data: str                        # dataset TSV path
    out: str                         # output MLVE path
    layers: str | tuple[int, ...] = "all"
    max_len: int = 128
    batch_size: int = 16
    include_special_tokens: bool = True  # delimiters join the average by default


def read_sentences(path) -> list[tuple[str, str]]:
    """(id, text) pairs from a TSV with header ID, Tweet, labels..."""
    pairs: list[tuple[str, str]] = []
    try:
        f = open(path, encoding="utf-8", newline="")
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    with f:
        reader = csv.reader(f, delimiter="\t")
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DatasetError(f"{path}: header must start with ID, Tweet")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise DatasetError(f"{path}:{lineno}: expected at least 2 columns")
            pairs.append((row[0], row[1]))
    if not pairs:
        raise DatasetError(f"{path}: no data rows")
    return pairs


def write_mlve(path, ids: list[str], data: np.ndarray) -> None:
    """Write the store: n x layers x dim float32, little-endian."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 3 or data.shape[0] != len(ids):
        raise WriteError(f"data shape {data.shape} does not match {len(ids)} ids")
    try:
        with open(path, "wb") as f:
            f.write(STORE_MAGIC)
            f.write(struct.pack("<IIII", STORE_VERSION, *data.shape))
            for sid in ids:
                raw = sid.encode("utf-8")
                f.write(struct.pack("<I", len(raw)))
                f.write(raw)
            f.write(data.tobytes())
    except OSError as e:
        raise WriteError(f"cannot write {path}: {e}") from e


def _load_model(name_or_path: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name_or_path)
        model = AutoModel.from_pretrained(name_or_path)
    except Exception as e:
        raise ModelLoadError(f"cannot load {name_or_path!r}: {e}") from e
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def _resolve_layers(layers, n_available: int) -> list[int]:
    if layers == "all":
        return list(range(n_available))
    picked = list(layers)
    for layer in picked:
        if not (0 <= layer < n_available):
            raise ExporterError(f"layer {layer} out of range [0, {n_available})")
    return picked


def export_embeddings(spec: ExportSpec) -> str:
    """Run the encoder over the dataset and write the MLVE store."""
    import torch

    pairs = read_sentences(spec.data)
    tokenizer, model = _load_model(spec.model)

    ids = [sid for sid, _ in pairs]
    blocks: list[np.ndarray] = []
    picked: list[int] | None = None
    for start in range(0, len(pairs), spec.batch_size):
        texts = [text for _, text in pairs[start : start + spec.batch_size]]
        try:
            enc = tokenizer(
                texts,
                padding=True,
                truncation=True,
                max_length=spec.max_len,
                return_tensors="pt",
                return_special_tokens_mask=True,
            )
        except Exception as e:
            raise TokenizationError(f"rows {start}..{start + len(texts)}: {e}") from e
        special = enc.pop("special_tokens_mask")
        out = model(**enc, output_hidden_states=True)
        hidden = out.hidden_states  # (layers+1) tensors of (batch, tokens, dim)
        if picked is None:
            picked = _resolve_layers(spec.layers, len(hidden))
        mask = enc["attention_mask"]
        if not spec.include_special_tokens:
            mask = mask * (1 - special)
        mask = mask.unsqueeze(-1).to(hidden[0].dtype)
        counts = mask.sum(dim=1).clamp(min=1.0)
        layer_means = [
            ((hidden[layer] * mask).sum(dim=1) / counts).to(torch.float32) for layer in picked
        ]
        blocks.append(torch.stack(layer_means, dim=1).numpy())

    data = np.concatenate(blocks, axis=0)
    write_mlve(spec.out, ids, data)
    return spec.out
