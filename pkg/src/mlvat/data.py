"""Datasets, embedding storage, semi-supervised splits, and batching.

Covers four concerns: parsing the tab-separated emotion corpus layout
(ID, Tweet, then one binary column per emotion), reading and writing the
MLVE binary store of per-sentence per-layer embedding vectors, carving a
training set into labeled/unlabeled pools, and composing mixed batches.
A Gaussian-cluster generator provides a self-contained multi-domain
stand-in corpus so everything downstream can run without real tweets.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ConfigError,
    DataError,
    DuplicateId,
    InvalidSpec,
    MalformedRow,
    MissingEmbedding,
    NotFound,
    TruncatedFile,
    VersionUnsupported,
)
from .numkit import make_rng

EMOTIONS = (
    "anger", "anticipation", "disgust", "fear", "joy", "love",
    "optimism", "pessimism", "sadness", "surprise", "trust",
)

STORE_MAGIC = b"MLVE"
STORE_VERSION = 1


@dataclass(frozen=True)
class LabeledRecord:
    id: str
    language: str
    labels: tuple[int, ...]
    split: str = "train"
    text: str | None = None


def parse_dataset(path, language: str, split: str = "train") -> list[LabeledRecord]:
    """Read one TSV file: header ID, Tweet, then binary label columns."""
    records: list[LabeledRecord] = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        header = next(reader, None)
        if header is None or len(header) < 3:
            raise MalformedRow(f"{path}: header must have ID, Tweet and label columns")
        n_cols = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise MalformedRow(f"{path}:{lineno}: expected {n_cols} columns, got {len(row)}")
            labels = []
            for col, value in zip(header[2:], row[2:]):
                if value not in ("0", "1"):
                    raise MalformedRow(f"{path}:{lineno}: column {col} has non-binary value {value!r}")
                labels.append(int(value))
            records.append(
                LabeledRecord(id=row[0], language=language, labels=tuple(labels),
                              split=split, text=row[1])
            )
    return records


def write_dataset_tsv(path, records: list[LabeledRecord], label_names: list[str] | None = None) -> None:
    if records and label_names is None:
        k = len(records[0].labels)
        label_names = list(EMOTIONS) if k == 11 else [f"label_{i}" for i in range(k)]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t")
        writer.writerow(["ID", "Tweet"] + list(label_names or []))
        for r in records:
            writer.writerow([r.id, r.text or ""] + [str(v) for v in r.labels])


class EmbeddingStore:
    """Per-sentence, per-layer vectors keyed by sentence id.

    Stored as 32-bit floats (producer precision) and promoted to 64-bit
    on lookup. Read-only after construction.
    """

    def __init__(self, ids: list[str], data: np.ndarray):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim != 3 or data.shape[0] != len(ids):
            raise TruncatedFile(
                f"data shape {data.shape} does not match {len(ids)} ids (need n x layers x dim)"
            )
        index: dict[str, int] = {}
        for i, sid in enumerate(ids):
            if sid in index:
                raise DuplicateId(f"duplicate sentence id {sid!r}")
            index[sid] = i
        self.ids = tuple(ids)
        self._data = data
        self._index = index

    @property
    def n_sentences(self) -> int:
        return self._data.shape[0]

    @property
    def n_layers(self) -> int:
        return self._data.shape[1]

    @property
    def dim(self) -> int:
        return self._data.shape[2]

    def lookup(self, sentence_id: str) -> np.ndarray:
        """(n_layers x dim) float64 block for one sentence."""
        i = self._index.get(sentence_id)
        if i is None:
            raise NotFound(f"sentence id {sentence_id!r} not in store")
        return self._data[i].astype(np.float64)

    def matrix(self, ids: list[str], layer: int | None = None) -> np.ndarray:
        """Feature rows for the given ids.

        layer=None averages across all layers; an integer picks one
        layer. Missing ids raise MissingEmbedding.
        """
        if layer is not None and not (0 <= layer < self.n_layers):
            from .errors import LayerOutOfRange

            raise LayerOutOfRange(f"layer {layer} out of range [0, {self.n_layers})")
        rows = np.empty((len(ids), self.dim), dtype=np.float64)
        for j, sid in enumerate(ids):
            i = self._index.get(sid)
            if i is None:
                raise MissingEmbedding(f"no embedding for id {sid!r}")
            block = self._data[i].astype(np.float64)
            rows[j] = block.mean(axis=0) if layer is None else block[layer]
        return rows

    def layer_view(self, layers: list[int]) -> "EmbeddingStore":
        """New single-layer store holding the mean over the given layers."""
        from .errors import LayerOutOfRange

        for layer in layers:
            if not (0 <= layer < self.n_layers):
                raise LayerOutOfRange(f"layer {layer} out of range [0, {self.n_layers})")
        merged = self._data[:, layers, :].mean(axis=1, dtype=np.float64)
        return EmbeddingStore(list(self.ids), merged[:, None, :].astype(np.float32))

    def write(self, path) -> None:
        with open(path, "wb") as f:
            f.write(STORE_MAGIC)
            f.write(struct.pack("<IIII", STORE_VERSION, self.n_sentences, self.n_layers, self.dim))
            for sid in self.ids:
                raw = sid.encode("utf-8")
                f.write(struct.pack("<I", len(raw)))
                f.write(raw)
            f.write(np.ascontiguousarray(self._data, dtype="<f4").tobytes())


def write_store(path, ids: list[str], data: np.ndarray) -> None:
    EmbeddingStore(list(ids), data).write(path)


def open_embeddings(path) -> EmbeddingStore:
    """Read an MLVE file, validating magic, version and length."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4:
        raise TruncatedFile(f"{path}: shorter than magic")
    if blob[:4] != STORE_MAGIC:
        raise BadMagic(f"{path}: expected {STORE_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 20:
        raise TruncatedFile(f"{path}: header incomplete")
    version, n, layers, dim = struct.unpack("<IIII", blob[4:20])
    if version != STORE_VERSION:
        raise VersionUnsupported(f"{path}: version {version}, supported {STORE_VERSION}")
    offset = 20
    ids: list[str] = []
    for _ in range(n):
        if offset + 4 > len(blob):
            raise TruncatedFile(f"{path}: id table ends early")
        (id_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + id_len > len(blob):
            raise TruncatedFile(f"{path}: id bytes end early")
        ids.append(blob[offset : offset + id_len].decode("utf-8"))
        offset += id_len
    expected = offset + 4 * n * layers * dim
    if len(blob) != expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", count=n * layers * dim, offset=offset)
    return EmbeddingStore(ids, data.reshape(n, layers, dim).copy())


@dataclass(frozen=True)
class SemiSupSplit:
    labeled_ids: tuple[str, ...]
    unlabeled_ids: tuple[str, ...]
    seed: int


def make_semisup_split(
    records: list[LabeledRecord],
    target_language: str,
    rho: float,
    other_language_records: list[LabeledRecord],
    seed: int,
) -> SemiSupSplit:
    """Labeled pool: floor(rho * N) of the target-language train split.

    The unlabeled pool is the remaining target train rows plus the train
    splits of the other languages. Sampling shuffles the target ids once
    per seed and takes a prefix, so smaller rho values are strict
    subsets of larger ones under the same seed.
    """
    if not (0 < rho <= 1):
        raise ConfigError(f"rho must be in (0, 1], got {rho}")
    target_train = [r.id for r in records if r.language == target_language and r.split == "train"]
    perm = make_rng(seed).permutation(len(target_train))
    shuffled = [target_train[i] for i in perm]
    k = math.floor(rho * len(target_train))
    others = [
        r.id
        for r in other_language_records
        if r.split == "train" and r.language != target_language
    ]
    return SemiSupSplit(
        labeled_ids=tuple(shuffled[:k]),
        unlabeled_ids=tuple(shuffled[k:] + others),
        seed=seed,
    )


@dataclass(frozen=True)
class BatchPlan:
    labeled_batch: int = 8
    unlabeled_batch: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.labeled_batch < 1:
            raise ConfigError(f"labeled_batch must be >= 1, got {self.labeled_batch}")
        if self.unlabeled_batch < 0:
            raise ConfigError(f"unlabeled_batch must be >= 0, got {self.unlabeled_batch}")


class BatchComposer:
    """Yields mixed batches over materialized feature matrices.

    Epochs follow the labeled pool: every labeled row appears exactly
    once per epoch (last batch may be short). The unlabeled pool cycles
    on its own cursor, reshuffling whenever it wraps, so its pace is
    independent of epoch boundaries. Shuffles for each pool come from
    separate rng substreams: an empty unlabeled pool leaves the labeled
    order untouched.
    """

    def __init__(
        self,
        labeled_x: np.ndarray,
        labeled_y: np.ndarray,
        unlabeled_x: np.ndarray,
        plan: BatchPlan,
    ):
        if labeled_x.shape[0] != labeled_y.shape[0]:
            raise ConfigError(
                f"labeled features/labels misaligned: {labeled_x.shape[0]} vs {labeled_y.shape[0]}"
            )
        self.labeled_x = labeled_x
        self.labeled_y = labeled_y
        self.unlabeled_x = unlabeled_x
        self.plan = plan
        self._rng_labeled, self._rng_unlabeled = make_rng(plan.seed).spawn(2)
        self._u_order = np.empty(0, dtype=np.int64)
        self._u_cursor = 0

    @property
    def steps_per_epoch(self) -> int:
        return max(1, math.ceil(self.labeled_x.shape[0] / self.plan.labeled_batch))

    def _draw_unlabeled(self) -> np.ndarray:
        want = self.plan.unlabeled_batch
        n = self.unlabeled_x.shape[0]
        if want == 0 or n == 0:
            return self.unlabeled_x[:0]
        taken: list[np.ndarray] = []
        while want > 0:
            if self._u_cursor >= self._u_order.shape[0]:
                self._u_order = self._rng_unlabeled.permutation(n)
                self._u_cursor = 0
            chunk = self._u_order[self._u_cursor : self._u_cursor + want]
            taken.append(chunk)
            self._u_cursor += chunk.shape[0]
            want -= chunk.shape[0]
        return self.unlabeled_x[np.concatenate(taken)]

    def epoch_batches(self):
        """One epoch of ((labeled_x, labeled_y), unlabeled_x) batches."""
        n = self.labeled_x.shape[0]
        order = self._rng_labeled.permutation(n)
        for start in range(0, n, self.plan.labeled_batch):
            idx = order[start : start + self.plan.labeled_batch]
            yield (self.labeled_x[idx], self.labeled_y[idx]), self._draw_unlabeled()


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian-cluster corpus with correlated label patterns.

    Each domain gets its own mean offset (drawn with domain_shift_sigma)
    standing in for a language; every (domain, cluster) cell holds
    n_per_cluster points split into train/dev/test by split_fractions.
    """

    n_per_cluster: int = 250
    dim: int = 32
    n_labels: int = 6
    n_clusters: int = 4
    cluster_centers: tuple[tuple[float, ...], ...] | None = None
    label_patterns: tuple[tuple[int, ...], ...] | None = None
    noise_sigma: float = 0.5
    domains: tuple[str, ...] = ("synthetic-0",)
    domain_shift_sigma: float = 0.0
    center_scale: float = 1.0
    split_fractions: tuple[float, float] = (0.6, 0.15)  # train, dev; rest is test
    seed: int = 0


def default_label_patterns(n_clusters: int, n_labels: int) -> tuple[tuple[int, ...], ...]:
    """Overlapping 3-hot patterns so neighboring clusters share labels."""
    width = min(3, n_labels)
    patterns = []
    for c in range(n_clusters):
        row = [0] * n_labels
        for j in range(width):
            row[(c + j) % n_labels] = 1
        patterns.append(tuple(row))
    return tuple(patterns)


def _validate_spec(spec: SyntheticSpec, patterns) -> None:
    if spec.n_per_cluster < 1 or spec.dim < 1 or spec.n_labels < 1 or spec.n_clusters < 1:
        raise InvalidSpec("counts must all be >= 1")
    if spec.noise_sigma < 0 or spec.domain_shift_sigma < 0:
        raise InvalidSpec("sigmas must be >= 0")
    if not spec.domains:
        raise InvalidSpec("need at least one domain")
    if len(patterns) != spec.n_clusters:
        raise InvalidSpec(f"need {spec.n_clusters} label patterns, got {len(patterns)}")
    for p in patterns:
        if len(p) != spec.n_labels or any(v not in (0, 1) for v in p):
            raise InvalidSpec(f"pattern {p} is not a binary {spec.n_labels}-vector")
    shares = sum(
        1
        for i in range(len(patterns))
        for j in range(i + 1, len(patterns))
        if any(a and b for a, b in zip(patterns[i], patterns[j]))
    )
    if spec.n_clusters >= 2 and shares == 0:
        raise InvalidSpec("no two clusters share an active label; patterns must co-occur")


def gen_synthetic(spec: SyntheticSpec) -> tuple[list[LabeledRecord], EmbeddingStore]:
    """Build records plus a single-layer store, fully seed-determined."""
    patterns = spec.label_patterns or default_label_patterns(spec.n_clusters, spec.n_labels)
    _validate_spec(spec, patterns)
    rng_centers, rng_domains, rng_noise, rng_splits = make_rng(spec.seed).spawn(4)

    if spec.cluster_centers is not None:
        centers = np.asarray(spec.cluster_centers, dtype=np.float64)
        if centers.shape != (spec.n_clusters, spec.dim):
            raise InvalidSpec(f"cluster_centers shape {centers.shape} != ({spec.n_clusters}, {spec.dim})")
    else:
        centers = rng_centers.standard_normal((spec.n_clusters, spec.dim)) * spec.center_scale
    offsets = rng_domains.standard_normal((len(spec.domains), spec.dim)) * spec.domain_shift_sigma

    f_train, f_dev = spec.split_fractions
    n = spec.n_per_cluster
    n_train = math.floor(f_train * n)
    n_dev = math.floor(f_dev * n)

    records: list[LabeledRecord] = []
    ids: list[str] = []
    vectors: list[np.ndarray] = []
    for d, domain in enumerate(spec.domains):
        for c in range(spec.n_clusters):
            points = centers[c] + offsets[d] + spec.noise_sigma * rng_noise.standard_normal((n, spec.dim))
            split_order = rng_splits.permutation(n)
            split_names = np.empty(n, dtype=object)
            split_names[split_order[:n_train]] = "train"
            split_names[split_order[n_train : n_train + n_dev]] = "dev"
            split_names[split_order[n_train + n_dev :]] = "test"
            for i in range(n):
                sid = f"{domain}-c{c}-{i:04d}"
                ids.append(sid)
                vectors.append(points[i])
                records.append(
                    LabeledRecord(id=sid, language=domain, labels=patterns[c],
                                  split=str(split_names[i]))
                )
    data = np.stack(vectors).astype(np.float32)[:, None, :]
    return records, EmbeddingStore(ids, data)


def standard_benchmark_spec(seed: int = 0) -> SyntheticSpec:
    """The 4-cluster, 3-domain corpus used by the desk-scale experiments."""
    return SyntheticSpec(
        n_per_cluster=120,
        dim=32,
        n_labels=6,
        n_clusters=4,
        noise_sigma=0.5,
        domains=("synthetic-0", "synthetic-1", "synthetic-2"),
        domain_shift_sigma=0.3,
        center_scale=0.35,
        seed=seed,
    )


@dataclass
class DataBundle:
    """Records plus the store that holds their feature vectors."""

    records: list[LabeledRecord]
    store: EmbeddingStore

    def languages(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.language, None)
        return list(seen)

    def records_for(self, language: str, split: str) -> list[LabeledRecord]:
        return [r for r in self.records if r.language == language and r.split == split]

    def other_language_records(self, target_language: str) -> list[LabeledRecord]:
        return [r for r in self.records if r.language != target_language]

    def labels_matrix(self, records: list[LabeledRecord]) -> np.ndarray:
        return np.asarray([r.labels for r in records], dtype=np.float64)

    def features(self, ids: list[str], layer: int | None = None) -> np.ndarray:
        return self.store.matrix(list(ids), layer=layer)

    def labels_by_id(self) -> dict[str, tuple[int, ...]]:
        return {r.id: r.labels for r in self.records}


def write_bundle(out_dir, prefix: str, records: list[LabeledRecord], store: EmbeddingStore) -> Path:
    """Write per-(language, split) TSVs, the store, and a manifest; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_key: dict[tuple[str, str], list[LabeledRecord]] = {}
    for r in records:
        by_key.setdefault((r.language, r.split), []).append(r)
    manifest: dict = {"languages": {}, "embeddings": f"{prefix}.mlve"}
    for (language, split), rows in sorted(by_key.items()):
        name = f"{prefix}-{language}-{split}.tsv"
        write_dataset_tsv(out_dir / name, rows)
        manifest["languages"].setdefault(language, {})[split] = name
    store.write(out_dir / f"{prefix}.mlve")
    manifest_path = out_dir / f"{prefix}-manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest_path


def load_bundle(manifest_path) -> DataBundle:
    """Load records and store from a manifest written by write_bundle."""
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{manifest_path}: not valid JSON: {e}") from e
    root = manifest_path.parent
    records: list[LabeledRecord] = []
    for language, splits in sorted(manifest["languages"].items()):
        for split, rel in sorted(splits.items()):
            records.extend(parse_dataset(root / rel, language, split=split))
    store = open_embeddings(root / manifest["embeddings"])
    return DataBundle(records=records, store=store)
