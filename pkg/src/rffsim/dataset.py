"""Flat binary dataset files with a one-line JSON header.

Layout: a single JSON line (sorted keys) describing schema version,
generating config, and payload counts, then little-endian 32-bit float
feature rows, 32-bit integer labels, and per-row 32-bit float SNR tags.
The format is byte-deterministic for a fixed header and payload, which
is what the reproducibility checks compare.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class Dataset:
    """In-memory dataset: feature rows, labels, SNR tags, header echo."""

    features: np.ndarray
    labels: np.ndarray
    snr_tags: np.ndarray
    header: dict

    def __post_init__(self):
        n = len(self.features)
        if len(self.labels) != n or len(self.snr_tags) != n:
            raise ValueError("features, labels and snr tags must align")

    @property
    def n_rows(self) -> int:
        return len(self.features)

    @property
    def feature_len(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> int:
        return int(self.header["n_classes"])


def make_header(config_echo: dict, n_subcarriers: int, feature_len: int,
                n_rows: int, n_classes: int, extras: dict | None = None) -> dict:
    header = {
        "schema_version": SCHEMA_VERSION,
        "config": config_echo,
        "n_subcarriers": int(n_subcarriers),
        "feature_len": int(feature_len),
        "n_rows": int(n_rows),
        "n_classes": int(n_classes),
    }
    if extras:
        header.update(extras)
    return header


def save_dataset(path, features, labels, snr_tags, header: dict) -> None:
    """Write header line plus float32/int32/float32 payload blocks.

    The header's row and feature-length counts must match the arrays;
    mismatches are rejected before anything is written.
    """
    features = np.ascontiguousarray(features, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<i4")
    snr_tags = np.ascontiguousarray(snr_tags, dtype="<f4")
    if features.ndim != 2:
        raise ValueError("features must be a 2-D row matrix")
    n, flen = features.shape
    if len(labels) != n or len(snr_tags) != n:
        raise ValueError("labels and snr tags must have one entry per row")
    if header.get("n_rows") != n or header.get("feature_len") != flen:
        raise ValueError("header counts disagree with the payload")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("header must carry the current schema version")
    line = json.dumps(header, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(line.encode("utf-8") + b"\n")
        fh.write(features.tobytes())
        fh.write(labels.tobytes())
        fh.write(snr_tags.tobytes())


def load_dataset(path) -> Dataset:
    """Read a dataset file back; counts and schema version are verified."""
    with open(path, "rb") as fh:
        line = fh.readline()
        blob = fh.read()
    header = json.loads(line.decode("utf-8"))
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported schema version {header.get('schema_version')!r}")
    n = int(header["n_rows"])
    flen = int(header["feature_len"])
    want = n * flen * 4 + n * 4 + n * 4
    if len(blob) != want:
        raise ValueError(f"payload is {len(blob)} bytes, expected {want}")
    off = n * flen * 4
    features = np.frombuffer(blob[:off], dtype="<f4").reshape(n, flen)
    labels = np.frombuffer(blob[off:off + n * 4], dtype="<i4")
    snr_tags = np.frombuffer(blob[off + n * 4:], dtype="<f4")
    return Dataset(features=features.copy(), labels=labels.copy(),
                   snr_tags=snr_tags.copy(), header=header)
