"""Tests for the binary dataset container.

Proves:
1. Datasets round-trip exactly: float32 features, int32 labels and
   float32 SNR tags survive save/load bit-for-bit along with the header.
2. Serialization is byte-deterministic: identical content gives
   identical files.
3. Misaligned inputs are rejected on save (row-count mismatches, wrong
   dimensionality, header counts that disagree with the arrays).
4. Corrupt files are rejected on load: foreign headers, unsupported
   schema versions and truncated payloads.
5. Header construction records the row geometry, class count and echoed
   configuration, and derived properties expose them.
"""

import numpy as np
import pytest

from rffsim import dataset as ds


def _toy(n_rows=6, feature_len=8, n_classes=2, seed=0):
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n_rows, feature_len)).astype(np.float32)
    labels = (np.arange(n_rows) % n_classes).astype(np.int32)
    snr = np.full(n_rows, 20.0, dtype=np.float32)
    header = ds.make_header(
        config_echo={"master_seed": 1}, n_subcarriers=160,
        feature_len=feature_len, n_rows=n_rows, n_classes=n_classes,
    )
    return features, labels, snr, header


def test_round_trip_exact(tmp_path):
    features, labels, snr, header = _toy()
    path = tmp_path / "d.bin"
    ds.save_dataset(path, features, labels, snr, header)
    data = ds.load_dataset(path)
    assert np.array_equal(data.features, features)
    assert np.array_equal(data.labels, labels)
    assert np.array_equal(data.snr_tags, snr)
    assert data.header["config"] == {"master_seed": 1}
    assert data.n_rows == 6
    assert data.feature_len == 8
    assert data.n_classes == 2


def test_serialization_is_byte_deterministic(tmp_path):
    features, labels, snr, header = _toy()
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    ds.save_dataset(p1, features, labels, snr, header)
    ds.save_dataset(p2, features, labels, snr, header)
    assert p1.read_bytes() == p2.read_bytes()


def test_save_rejects_misaligned_inputs(tmp_path):
    features, labels, snr, header = _toy()
    path = tmp_path / "d.bin"
    with pytest.raises(ValueError):
        ds.save_dataset(path, features, labels[:-1], snr, header)
    with pytest.raises(ValueError):
        ds.save_dataset(path, features[0], labels, snr, header)
    bad_header = dict(header)
    bad_header["n_rows"] = 99
    with pytest.raises(ValueError):
        ds.save_dataset(path, features, labels, snr, bad_header)


def test_load_rejects_corrupt_files(tmp_path):
    features, labels, snr, header = _toy()
    good = tmp_path / "good.bin"
    ds.save_dataset(good, features, labels, snr, header)
    raw = good.read_bytes()

    foreign = tmp_path / "foreign.bin"
    foreign.write_bytes(b'{"format": "other"}\n' + raw.split(b"\n", 1)[1])
    with pytest.raises(ValueError):
        ds.load_dataset(foreign)

    truncated = tmp_path / "short.bin"
    truncated.write_bytes(raw[:-4])
    with pytest.raises(ValueError):
        ds.load_dataset(truncated)


def test_header_extras_round_trip(tmp_path):
    features, labels, snr, _ = _toy()
    header = ds.make_header(
        config_echo={}, n_subcarriers=160, feature_len=8, n_rows=6,
        n_classes=2, extras={"n_degenerate_rows": 3},
    )
    path = tmp_path / "d.bin"
    ds.save_dataset(path, features, labels, snr, header)
    assert ds.load_dataset(path).header["n_degenerate_rows"] == 3
