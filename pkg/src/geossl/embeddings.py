"""Embedding sets: the MEMB binary format, CSV fallback, PCA, and IDX ingestion.

An EmbeddingSet is an (n, F) float32 matrix with one integer label in
{1..C} per row and optional train/test split tags. The MEMB file layout
(all little-endian) is the interchange contract with external embedding
producers:

    magic "MEMB" (4 bytes)
    version      u32 = 1
    n            u64
    F            u64
    C            u32
    flags        u32, bit0 set iff split tags are present
    data         f32[n*F], row-major
    labels       u32[n], stored 0-based (in-memory labels are 1-based)
    split        u8[n], 0=train 1=test, present iff flags bit0

A CSV fallback with header `id,label,split,f0..f{F-1}` is accepted for
hand-made fixtures; labels there are 1-based and split is the literal
word "train" or "test".
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np

MEMB_MAGIC = b"MEMB"
MEMB_VERSION = 1
_SPLIT_FLAG = 1
TRAIN, TEST = 0, 1


class FormatError(ValueError):
    """An embedding file violates the MEMB or CSV contract."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class LabelRangeError(FormatError):
    pass


@dataclass
class EmbeddingSet:
    data: np.ndarray       # (n, F) float32
    labels: np.ndarray     # (n,) int, values in {1..C}
    n_classes: int
    split: np.ndarray = None   # (n,) uint8, 0=train 1=test, or None

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.split is not None:
            self.split = np.ascontiguousarray(self.split, dtype=np.uint8)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]

    def validate(self):
        if self.data.ndim != 2:
            raise FormatError(f"data must be 2-D, got shape {self.data.shape}")
        if self.labels.shape[0] != self.n:
            raise FormatError(f"{self.labels.shape[0]} labels for {self.n} rows")
        if not np.all(np.isfinite(self.data)):
            raise FormatError("embedding data contains non-finite entries")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.n_classes):
            raise LabelRangeError(
                f"labels must lie in 1..{self.n_classes}, "
                f"got range [{self.labels.min()}, {self.labels.max()}]")
        if self.split is not None:
            if self.split.shape[0] != self.n:
                raise FormatError(f"{self.split.shape[0]} split tags for {self.n} rows")
            if self.split.size and self.split.max() > 1:
                raise FormatError("split tags must be 0 (train) or 1 (test)")
        return self

    def train_indices(self):
        if self.split is None:
            raise ValueError("embedding set carries no split tags")
        return np.flatnonzero(self.split == TRAIN)

    def test_indices(self):
        if self.split is None:
            raise ValueError("embedding set carries no split tags")
        return np.flatnonzero(self.split == TEST)


def save_embeddings(emb, path):
    """Write an EmbeddingSet in the MEMB layout. Byte-deterministic."""
    emb.validate()
    flags = _SPLIT_FLAG if emb.split is not None else 0
    with open(path, "wb") as fh:
        fh.write(MEMB_MAGIC)
        fh.write(struct.pack("<IQQII", MEMB_VERSION, emb.n, emb.dim, emb.n_classes, flags))
        fh.write(emb.data.astype("<f4").tobytes())
        fh.write((emb.labels - 1).astype("<u4").tobytes())
        if emb.split is not None:
            fh.write(emb.split.astype("u1").tobytes())


def load_embeddings(path):
    """Read a MEMB file; exact inverse of :func:`save_embeddings`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != MEMB_MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r}, expected {MEMB_MAGIC!r}")
    header = struct.calcsize("<IQQII")
    if len(blob) < 4 + header:
        raise TruncatedFileError("file ends inside the header")
    version, n, dim, n_classes, flags = struct.unpack_from("<IQQII", blob, 4)
    if version != MEMB_VERSION:
        raise VersionMismatchError(f"unsupported MEMB version {version}")
    has_split = bool(flags & _SPLIT_FLAG)
    need = 4 + header + 4 * n * dim + 4 * n + (n if has_split else 0)
    if len(blob) < need:
        raise TruncatedFileError(f"payload is {len(blob)} bytes, format needs {need}")
    if len(blob) > need:
        raise FormatError(f"{len(blob) - need} trailing bytes after payload")
    off = 4 + header
    data = np.frombuffer(blob, dtype="<f4", count=n * dim, offset=off).reshape(n, dim)
    off += 4 * n * dim
    raw_labels = np.frombuffer(blob, dtype="<u4", count=n, offset=off)
    off += 4 * n
    if raw_labels.size and raw_labels.max() >= n_classes:
        raise LabelRangeError(
            f"stored label {raw_labels.max()} out of range for C={n_classes}")
    split = np.frombuffer(blob, dtype="u1", count=n, offset=off).copy() if has_split else None
    emb = EmbeddingSet(data=data.copy(), labels=raw_labels.astype(np.int64) + 1,
                       n_classes=n_classes, split=split)
    return emb.validate()


def save_embeddings_csv(emb, path):
    emb.validate()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "split"] + [f"f{j}" for j in range(emb.dim)])
        for i in range(emb.n):
            tag = "" if emb.split is None else ("train" if emb.split[i] == TRAIN else "test")
            writer.writerow([i, int(emb.labels[i]), tag] + [repr(float(v)) for v in emb.data[i]])


def load_embeddings_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["id", "label", "split"]:
            raise FormatError("CSV header must start with id,label,split")
        dim = len(header) - 3
        data, labels, tags = [], [], []
        for row in reader:
            if len(row) != 3 + dim:
                raise FormatError(f"row {row[0]!r} has {len(row)} fields, expected {3 + dim}")
            labels.append(int(row[1]))
            if row[2] not in ("train", "test", ""):
                raise FormatError(f"unknown split tag {row[2]!r}")
            tags.append(row[2])
            data.append([float(v) for v in row[3:]])
    if any(t == "" for t in tags) and any(t != "" for t in tags):
        raise FormatError("split tags must be given for all rows or none")
    split = None
    if tags and tags[0] != "":
        split = np.asarray([TRAIN if t == "train" else TEST for t in tags], dtype=np.uint8)
    arr = np.asarray(data, dtype=np.float32).reshape(len(labels), dim)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and labels.min() < 1:
        raise LabelRangeError("CSV labels are 1-based")
    emb = EmbeddingSet(data=arr, labels=labels, n_classes=int(labels.max()) if labels.size else 1,
                       split=split)
    return emb.validate()


# ---------------------------------------------------------------------------
# raw image datasets and PCA

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class RawDataset:
    images: np.ndarray     # (n, H*W*channels)
    labels: np.ndarray     # (n,), values in {1..C}
    height: int
    width: int
    channels: int = 1
    split: np.ndarray = None

    @property
    def n(self):
        return self.images.shape[0]


def load_idx_images(images_path, labels_path):
    """Parse the big-endian IDX image/label file pair (MNIST layout).

    Pixel rows come back as float32 in [0, 1]; labels are shifted to 1-based.
    """
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(">IIII", fh.read(16))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(f"image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        raw = fh.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise TruncatedFileError("image payload shorter than the declared count")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(">II", fh.read(8))
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(f"label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        raw = fh.read(label_count)
        if len(raw) != label_count:
            raise TruncatedFileError("label payload shorter than the declared count")
        labels = np.frombuffer(raw, dtype=np.uint8)
    if count != label_count:
        raise FormatError(f"{count} images but {label_count} labels")
    return RawDataset(images=images.astype(np.float32) / 255.0,
                      labels=labels.astype(np.int64) + 1,
                      height=rows, width=cols)


def merge_raw(train, test):
    """Stack two RawDatasets and tag rows with their origin split."""
    if (train.height, train.width, train.channels) != (test.height, test.width, test.channels):
        raise ValueError("image geometry differs between splits")
    split = np.concatenate([np.zeros(train.n, dtype=np.uint8),
                            np.ones(test.n, dtype=np.uint8)])
    return RawDataset(images=np.concatenate([train.images, test.images]),
                      labels=np.concatenate([train.labels, test.labels]),
                      height=train.height, width=train.width,
                      channels=train.channels, split=split)


def pca_embed(raw, target_dim):
    """Project raw rows onto the top principal directions.

    Centers the data, takes the thin SVD, keeps the ``target_dim``
    leading right-singular directions sorted by descending singular
    value, and fixes each component's sign so its largest-magnitude
    entry is positive. Deterministic.
    """
    x = np.asarray(raw.images, dtype=np.float64)
    n, input_dim = x.shape
    if not 1 <= target_dim <= min(n, input_dim):
        raise ValueError(
            f"target dimension {target_dim} must lie in 1..min(n={n}, dim={input_dim})")
    centered = x - x.mean(axis=0)
    if not np.any(centered):
        raise ValueError("data has zero variance; no principal directions exist")
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:target_dim]
    signs = np.sign(comps[np.arange(target_dim), np.argmax(np.abs(comps), axis=1)])
    signs[signs == 0] = 1.0
    comps = comps * signs[:, None]
    projected = centered @ comps.T
    labels = np.asarray(raw.labels, dtype=np.int64)
    emb = EmbeddingSet(data=projected.astype(np.float32), labels=labels,
                       n_classes=int(labels.max()), split=raw.split)
    return emb.validate()


def pca_components(raw, target_dim):
    """The orthonormal (target_dim, input_dim) component matrix alone."""
    x = np.asarray(raw.images, dtype=np.float64)
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:target_dim]
    signs = np.sign(comps[np.arange(target_dim), np.argmax(np.abs(comps), axis=1)])
    signs[signs == 0] = 1.0
    return comps * signs[:, None]


def assign_split(n, train_fraction, seed):
    """Tag round(nu*n) uniformly chosen rows as train, the rest as test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must lie in (0, 1), got {train_fraction}")
    p = int(round(train_fraction * n))
    if p < 1 or n - p < 1:
        raise ValueError(f"split nu={train_fraction} leaves an empty side for n={n}")
    rng = np.random.default_rng(seed)
    tags = np.ones(n, dtype=np.uint8)
    tags[rng.choice(n, size=p, replace=False)] = TRAIN
    return tags
