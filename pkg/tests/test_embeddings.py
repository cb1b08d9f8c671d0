import struct

import numpy as np
import pytest

from geossl.embeddings import (BadMagicError, EmbeddingSet, FormatError,
                               LabelRangeError, TruncatedFileError,
                               VersionMismatchError, assign_split,
                               load_embeddings, load_embeddings_csv,
                               load_idx_images, merge_raw, pca_embed,
                               pca_components, save_embeddings,
                               save_embeddings_csv)


def random_set(seed, with_split=True):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    dim = int(rng.integers(1, 12))
    n_classes = int(rng.integers(1, 6))
    split = None
    if with_split and n >= 2:
        split = np.zeros(n, dtype=np.uint8)
        split[rng.choice(n, size=max(1, n // 3), replace=False)] = 1
    return EmbeddingSet(
        data=rng.standard_normal((n, dim)).astype(np.float32),
        labels=rng.integers(1, n_classes + 1, size=n),
        n_classes=n_classes,
        split=split,
    )


class TestMembFormat:
    def test_round_trip_many(self, tmp_path):
        for seed in range(100):
            emb = random_set(seed, with_split=seed % 3 != 0)
            path = tmp_path / f"s{seed}.memb"
            save_embeddings(emb, path)
            back = load_embeddings(path)
            assert np.array_equal(back.data, emb.data)
            assert np.array_equal(back.labels, emb.labels)
            assert back.n_classes == emb.n_classes
            if emb.split is None:
                assert back.split is None
            else:
                assert np.array_equal(back.split, emb.split)

    def test_minimal_file_size(self, tmp_path):
        emb = EmbeddingSet(data=np.array([[0.5]], dtype=np.float32),
                           labels=np.array([1]), n_classes=1,
                           split=np.array([0], dtype=np.uint8))
        path = tmp_path / "one.memb"
        save_embeddings(emb, path)
        # 4 magic + 28 header + 4 data + 4 label + 1 split
        assert path.stat().st_size == 4 + 28 + 4 + 4 + 1

    def test_save_is_byte_deterministic(self, tmp_path):
        emb = random_set(5)
        save_embeddings(emb, tmp_path / "a.memb")
        save_embeddings(emb, tmp_path / "b.memb")
        assert (tmp_path / "a.memb").read_bytes() == (tmp_path / "b.memb").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.memb"
        path.write_bytes(b"XXXX" + b"\0" * 64)
        with pytest.raises(BadMagicError):
            load_embeddings(path)

    def test_bad_version(self, tmp_path):
        emb = random_set(6)
        path = tmp_path / "v.memb"
        save_embeddings(emb, path)
        blob = bytearray(path.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionMismatchError):
            load_embeddings(path)

    def test_truncated_payload(self, tmp_path):
        emb = random_set(7)
        path = tmp_path / "t.memb"
        save_embeddings(emb, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-3])
        with pytest.raises(TruncatedFileError):
            load_embeddings(path)

    def test_trailing_garbage(self, tmp_path):
        emb = random_set(8)
        path = tmp_path / "g.memb"
        save_embeddings(emb, path)
        path.write_bytes(path.read_bytes() + b"\0")
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_label_out_of_range(self, tmp_path):
        emb = EmbeddingSet(data=np.zeros((2, 2), dtype=np.float32),
                           labels=np.array([1, 2]), n_classes=2)
        path = tmp_path / "l.memb"
        save_embeddings(emb, path)
        blob = bytearray(path.read_bytes())
        # labels start after 4 magic + 28 header + 16 data bytes
        struct.pack_into("<I", blob, 4 + 28 + 16, 7)
        path.write_bytes(bytes(blob))
        with pytest.raises(LabelRangeError):
            load_embeddings(path)

    def test_unwritable_path(self):
        emb = random_set(9)
        with pytest.raises(OSError):
            save_embeddings(emb, "/nonexistent-dir/x.memb")

    def test_nonfinite_rejected(self):
        emb = EmbeddingSet(data=np.array([[np.nan]], dtype=np.float32),
                           labels=np.array([1]), n_classes=1)
        with pytest.raises(FormatError):
            emb.validate()


class TestCsvFallback:
    def test_round_trip(self, tmp_path):
        emb = random_set(10)
        path = tmp_path / "emb.csv"
        save_embeddings_csv(emb, path)
        back = load_embeddings_csv(path)
        assert np.array_equal(back.data, emb.data)
        assert np.array_equal(back.labels, emb.labels)
        assert np.array_equal(back.split, emb.split)

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(FormatError):
            load_embeddings_csv(path)


class TestPca:
    def test_low_rank_preserves_distances(self):
        rng = np.random.default_rng(0)
        basis = rng.standard_normal((3, 20))
        coords = rng.standard_normal((50, 3))
        from geossl.embeddings import RawDataset
        raw = RawDataset(images=coords @ basis, labels=np.ones(50, dtype=np.int64),
                         height=4, width=5)
        emb = pca_embed(raw, 5)
        d_orig = np.linalg.norm(raw.images[:, None] - raw.images[None, :], axis=2)
        d_proj = np.linalg.norm(
            emb.data.astype(np.float64)[:, None] - emb.data.astype(np.float64)[None, :],
            axis=2)
        assert np.max(np.abs(d_orig - d_proj)) < 1e-4  # f32 storage rounds

    def test_line_through_origin(self):
        from geossl.embeddings import RawDataset
        direction = np.array([3.0, 4.0]) / 5.0
        t = np.linspace(-2, 2, 21)
        raw = RawDataset(images=t[:, None] * direction[None, :],
                         labels=np.ones(21, dtype=np.int64), height=1, width=2)
        comps = pca_components(raw, 1)
        assert abs(abs(comps[0] @ direction) - 1.0) < 1e-12

    def test_orthonormal_components(self):
        from geossl.embeddings import RawDataset
        rng = np.random.default_rng(1)
        raw = RawDataset(images=rng.standard_normal((40, 15)),
                         labels=np.ones(40, dtype=np.int64), height=3, width=5)
        comps = pca_components(raw, 6)
        assert np.max(np.abs(comps @ comps.T - np.eye(6))) < 1e-10

    def test_beats_random_frames(self):
        # projection error of PCA <= any random orthonormal frame
        from geossl.embeddings import RawDataset
        rng = np.random.default_rng(2)
        x = rng.standard_normal((60, 10)) @ np.diag(np.linspace(3, 0.1, 10))
        raw = RawDataset(images=x, labels=np.ones(60, dtype=np.int64), height=2, width=5)
        comps = pca_components(raw, 3)
        centered = x - x.mean(axis=0)
        err_pca = np.linalg.norm(centered - centered @ comps.T @ comps)
        for trial in range(20):
            q, _ = np.linalg.qr(rng.standard_normal((10, 3)))
            frame = q.T
            err = np.linalg.norm(centered - centered @ frame.T @ frame)
            assert err_pca <= err + 1e-9

    def test_sign_convention_deterministic(self):
        from geossl.embeddings import RawDataset
        rng = np.random.default_rng(3)
        raw = RawDataset(images=rng.standard_normal((30, 8)),
                         labels=np.ones(30, dtype=np.int64), height=2, width=4)
        c1, c2 = pca_components(raw, 4), pca_components(raw, 4)
        assert np.array_equal(c1, c2)
        for row in c1:
            assert row[np.argmax(np.abs(row))] > 0

    def test_bad_target_dim(self):
        from geossl.embeddings import RawDataset
        raw = RawDataset(images=np.random.default_rng(4).standard_normal((5, 3)),
                         labels=np.ones(5, dtype=np.int64), height=1, width=3)
        with pytest.raises(ValueError):
            pca_embed(raw, 4)
        with pytest.raises(ValueError):
            pca_embed(raw, 0)
        flat = RawDataset(images=np.ones((5, 3)), labels=np.ones(5, dtype=np.int64),
                          height=1, width=3)
        with pytest.raises(ValueError):
            pca_embed(flat, 2)


def write_idx_pair(tmp_path, images, labels):
    n, rows, cols = images.shape
    img_path = tmp_path / "imgs.idx"
    with open(img_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.astype(np.uint8).tobytes())
    lbl_path = tmp_path / "lbls.idx"
    with open(lbl_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        fh.write(labels.astype(np.uint8).tobytes())
    return img_path, lbl_path


class TestIdx:
    def test_load_synthetic_pair(self, tmp_path):
        rng = np.random.default_rng(5)
        images = rng.integers(0, 256, size=(9, 4, 4), dtype=np.uint8)
        labels = rng.integers(0, 3, size=9, dtype=np.uint8)
        ip, lp = write_idx_pair(tmp_path, images, labels)
        raw = load_idx_images(ip, lp)
        assert raw.images.shape == (9, 16)
        assert raw.height == raw.width == 4
        assert raw.images.max() <= 1.0
        assert np.array_equal(raw.labels, labels.astype(np.int64) + 1)

    def test_count_mismatch(self, tmp_path):
        rng = np.random.default_rng(6)
        images = rng.integers(0, 256, size=(9, 4, 4), dtype=np.uint8)
        labels = rng.integers(0, 3, size=10, dtype=np.uint8)
        ip, lp = write_idx_pair(tmp_path, images, labels)
        with pytest.raises(FormatError):
            load_idx_images(ip, lp)

    def test_bad_magic(self, tmp_path):
        ip = tmp_path / "z.idx"
        ip.write_bytes(struct.pack(">IIII", 0, 1, 2, 2) + b"\0" * 4)
        lp = tmp_path / "zl.idx"
        lp.write_bytes(struct.pack(">II", 0x00000801, 1) + b"\0")
        with pytest.raises(FormatError):
            load_idx_images(ip, lp)

    def test_merge_tags_origin(self, tmp_path):
        rng = np.random.default_rng(7)
        tr = rng.integers(0, 256, size=(6, 2, 2), dtype=np.uint8)
        te = rng.integers(0, 256, size=(4, 2, 2), dtype=np.uint8)
        ip1, lp1 = write_idx_pair(tmp_path, tr, np.zeros(6, dtype=np.uint8))
        raw_tr = load_idx_images(ip1, lp1)
        ip2, lp2 = write_idx_pair(tmp_path, te, np.ones(4, dtype=np.uint8))
        raw_te = load_idx_images(ip2, lp2)
        merged = merge_raw(raw_tr, raw_te)
        assert merged.n == 10
        assert merged.split.tolist() == [0] * 6 + [1] * 4


class TestAssignSplit:
    def test_balanced(self):
        tags = assign_split(10, 0.5, seed=0)
        assert (tags == 0).sum() == 5 and (tags == 1).sum() == 5

    def test_ninety_ten(self):
        tags = assign_split(100, 0.9, seed=1)
        assert (tags == 0).sum() == 90 and (tags == 1).sum() == 10

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            assign_split(10, 1.0, seed=0)
        with pytest.raises(ValueError):
            assign_split(10, 0.0, seed=0)
        with pytest.raises(ValueError):
            assign_split(2, 0.01, seed=0)

    def test_deterministic(self):
        assert np.array_equal(assign_split(50, 0.7, seed=3), assign_split(50, 0.7, seed=3))
        assert not np.array_equal(assign_split(50, 0.7, seed=3), assign_split(50, 0.7, seed=4))
