"""Dataset ingestion, segmentation masks, and model serialization.

Datasets are flat float64 matrices scaled to [0, 1] with the clip bounds of
the loaded split attached.  The IDX reader handles the classic uncompressed
big-endian byte format; synthetic Gaussian blobs cover self-contained runs.
Models round-trip bit-exactly through a small text format with a checksummed
base64 payload.
"""
import base64
import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .net import Layer, Net, get_weights, make_net, relu, set_weights

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
MODEL_HEADER = "xaimeta-model v1"


@dataclass
class Dataset:
    inputs: np.ndarray  # (N, D), scaled to [0, 1]
    labels: np.ndarray  # (N,) integers
    bounds: tuple  # (min, max) over this split
    masks: np.ndarray | None = None  # (N, D) bool

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.size:
            lo, hi = self.bounds
            if self.inputs.min() < lo or self.inputs.max() > hi:
                raise DataFormatError("dataset bounds inconsistent with inputs")
        if self.masks is not None:
            self.masks = np.asarray(self.masks).astype(bool)
            if self.masks.shape != self.inputs.shape:
                raise DataFormatError("mask matrix must match the input matrix")
            if self.inputs.size and not self.masks.any(axis=1).all():
                raise DataFormatError("every mask row needs at least one positive entry")

    @property
    def mean(self) -> float:
        return float(self.inputs.mean()) if self.inputs.size else 0.0


def _read_be_u32(buffer, offset, path):
    if offset + 4 > len(buffer):
        raise DataFormatError(f"{path}: truncated at byte {offset}")
    return struct.unpack_from(">I", buffer, offset)[0], offset + 4


def load_idx(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label file pair into a flat [0, 1] dataset."""
    with open(images_path, "rb") as handle:
        blob = handle.read()
    magic, offset = _read_be_u32(blob, 0, images_path)
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{images_path}: bad magic 0x{magic:08x} at byte 0")
    count, offset = _read_be_u32(blob, offset, images_path)
    rows, offset = _read_be_u32(blob, offset, images_path)
    cols, offset = _read_be_u32(blob, offset, images_path)
    expected = count * rows * cols
    if len(blob) - offset < expected:
        raise DataFormatError(
            f"{images_path}: payload short, expected {expected} bytes from byte {offset}"
        )
    pixels = np.frombuffer(blob, dtype=np.uint8, count=expected, offset=offset)
    inputs = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0

    with open(labels_path, "rb") as handle:
        blob = handle.read()
    magic, offset = _read_be_u32(blob, 0, labels_path)
    if magic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{labels_path}: bad magic 0x{magic:08x} at byte 0")
    n_labels, offset = _read_be_u32(blob, offset, labels_path)
    if n_labels != count:
        raise DataFormatError(f"{labels_path}: {n_labels} labels for {count} images")
    if len(blob) - offset < n_labels:
        raise DataFormatError(f"{labels_path}: payload short from byte {offset}")
    labels = np.frombuffer(blob, dtype=np.uint8, count=n_labels, offset=offset).astype(np.int64)

    if count == 0:
        return Dataset(inputs.reshape(0, rows * cols), labels, (0.0, 1.0))
    return Dataset(inputs, labels, (float(inputs.min()), float(inputs.max())))


def synth_blobs(n: int, d: int, classes: int, seed: int, spread: float = 0.04) -> Dataset:
    """Seeded Gaussian blobs with class centers spread over the unit cube,
    clipped to [0, 1]."""
    if n == 0:
        return Dataset(np.zeros((0, d)), np.zeros(0, dtype=np.int64), (0.0, 1.0))
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.15, 0.85, size=(classes, d))
    labels = np.arange(n) % classes
    inputs = np.clip(centers[labels] + rng.normal(0.0, spread, size=(n, d)), 0.0, 1.0)
    order = rng.permutation(n)
    inputs, labels = inputs[order], labels[order]
    return Dataset(inputs, labels, (float(inputs.min()), float(inputs.max())))


def make_masks(dataset: Dataset, policy: str, fraction: float = 0.25, quantile: float = 0.75):
    """Segmentation masks for the localisation estimators.

    center_box(fraction) marks the centered square covering `fraction` of a
    square image's features.  threshold(quantile) marks the pixels above the
    per-image quantile, falling back to the argmax pixel so that no row is
    empty.
    """
    n, d = dataset.inputs.shape
    masks = np.zeros((n, d), dtype=bool)
    if policy == "center_box":
        side = int(round(np.sqrt(d)))
        if side * side != d:
            raise DataFormatError(f"center_box needs a square feature count, got {d}")
        box = int(round(side * np.sqrt(fraction)))
        box = max(1, min(side, box))
        start = (side - box) // 2
        grid = np.zeros((side, side), dtype=bool)
        grid[start : start + box, start : start + box] = True
        masks[:] = grid.ravel()
        return masks
    if policy == "threshold":
        for i in range(n):
            x = dataset.inputs[i]
            row = x > np.quantile(x, quantile)
            if not row.any():
                row = np.zeros(d, dtype=bool)
                row[int(np.argmax(x))] = True
            masks[i] = row
        return masks
    raise DataFormatError(f"unknown mask policy {policy!r}")


def _layer_spec(net: Net) -> str:
    parts = []
    for layer in net.layers:
        if layer.kind == "dense":
            parts.append(f"dense {layer.weights.shape[0]} {layer.weights.shape[1]}")
        else:
            parts.append("relu")
    return ", ".join(parts)


def save_model(net: Net, path, provenance: str = "") -> None:
    """Write the text header plus checksummed base64 float64 payload."""
    payload = get_weights(net).astype("<f8").tobytes()
    digest = hashlib.sha256(payload).hexdigest()
    lines = [
        MODEL_HEADER,
        f"input_dim {net.input_dim}",
        f"num_classes {net.num_classes}",
        f"layers {_layer_spec(net)}",
        f"provenance {provenance}",
        f"checksum sha256:{digest}",
        f"payload {base64.b64encode(payload).decode('ascii')}",
        "",
    ]
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines))


def _header_value(lines, key, path):
    for line in lines:
        if line.startswith(key + " "):
            return line[len(key) + 1 :]
        if line == key:
            return ""
    raise DataFormatError(f"{path}: missing header field {key!r}")


def load_model(path) -> Net:
    """Read a model file back; bit-exact inverse of save_model."""
    with open(path, "r", encoding="ascii") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != MODEL_HEADER:
        raise DataFormatError(f"{path}: not a {MODEL_HEADER} file")
    spec = _header_value(lines, "layers", path)
    layers = []
    for part in spec.split(","):
        fields = part.split()
        if fields[0] == "relu":
            layers.append(relu())
        elif fields[0] == "dense" and len(fields) == 3:
            out_dim, in_dim = int(fields[1]), int(fields[2])
            layers.append(Layer("dense", np.zeros((out_dim, in_dim)), np.zeros(out_dim)))
        else:
            raise DataFormatError(f"{path}: bad layer spec {part.strip()!r}")
    skeleton = make_net(layers)
    checksum = _header_value(lines, "checksum", path)
    try:
        payload = base64.b64decode(_header_value(lines, "payload", path), validate=True)
    except Exception as exc:
        raise DataFormatError(f"{path}: undecodable payload ({exc})") from exc
    if checksum != "sha256:" + hashlib.sha256(payload).hexdigest():
        raise DataFormatError(f"{path}: checksum mismatch")
    weights = np.frombuffer(payload, dtype="<f8")
    expected = get_weights(skeleton).size
    if weights.size != expected:
        raise DataFormatError(f"{path}: payload holds {weights.size} values, expected {expected}")
    return set_weights(skeleton, weights.astype(np.float64))
