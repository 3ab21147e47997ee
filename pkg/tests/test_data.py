import numpy as np
import pytest
from PIL import Image

from wavelight import data
from wavelight.data import (
    Azimuth,
    DataError,
    IlluminationSetting,
    ImagePair,
    color_tint,
    load_paired_dataset,
    load_png,
    save_png,
    split,
    synth_relight_pair,
    write_split_manifest,
)
from wavelight.tensor import Tensor

N6500 = IlluminationSetting(Azimuth.N, 6500)
E4500 = IlluminationSetting(Azimuth.E, 4500)


class TestPng:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        raw = rng.integers(0, 256, size=(12, 10, 3), dtype=np.uint8)
        Image.fromarray(raw, "RGB").save(tmp_path / "a.png")
        decoded = load_png(tmp_path / "a.png")
        save_png(tmp_path / "b.png", decoded)
        back = np.asarray(Image.open(tmp_path / "b.png"))
        np.testing.assert_array_equal(back, raw)

    def test_decode_normalization(self, tmp_path):
        Image.fromarray(np.full((2, 2, 3), 128, np.uint8), "RGB").save(tmp_path / "g.png")
        t = load_png(tmp_path / "g.png")
        assert t.data.shape == (1, 2, 2, 3)
        np.testing.assert_allclose(t.data, np.float32(128 / 255), atol=0)

    def test_rejects_non_png(self, tmp_path):
        p = tmp_path / "fake.png"
        Image.fromarray(np.zeros((4, 4, 3), np.uint8), "RGB").save(p, format="JPEG")
        with pytest.raises(DataError, match="expected a PNG"):
            load_png(p)

    def test_rejects_non_rgb(self, tmp_path):
        gray = tmp_path / "gray.png"
        Image.fromarray(np.zeros((4, 4), np.uint8), "L").save(gray)
        with pytest.raises(DataError, match="RGB"):
            load_png(gray)
        deep = tmp_path / "deep.png"
        Image.fromarray(np.zeros((4, 4), np.uint16)).save(deep)  # 16-bit grayscale PNG
        with pytest.raises(DataError, match="RGB"):
            load_png(deep)

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "junk.png"
        p.write_bytes(b"not an image at all")
        with pytest.raises(DataError, match="not a decodable image"):
            load_png(p)


def _write_pair_tree(root, names, size=8):
    rng = np.random.default_rng(0)
    (root / "input").mkdir(parents=True)
    (root / "target").mkdir(parents=True)
    for name in names:
        for sub in ("input", "target"):
            arr = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
            Image.fromarray(arr, "RGB").save(root / sub / name)


class TestPairedDataset:
    def test_empty_directories(self, tmp_path):
        (tmp_path / "input").mkdir()
        (tmp_path / "target").mkdir()
        assert load_paired_dataset(tmp_path) == []

    def test_three_pairs_sorted(self, tmp_path):
        _write_pair_tree(tmp_path, ["c.png", "a.png", "b.png"])
        pairs = load_paired_dataset(tmp_path)
        assert [p.name for p in pairs] == ["a", "b", "c"]
        assert pairs[0].from_setting == data.DEFAULT_FROM
        assert pairs[0].to_setting == data.DEFAULT_TO

    def test_orphan_named(self, tmp_path):
        _write_pair_tree(tmp_path, ["a.png"])
        extra = np.zeros((4, 4, 3), np.uint8)
        Image.fromarray(extra, "RGB").save(tmp_path / "input" / "lonely.png")
        with pytest.raises(DataError, match="lonely.png"):
            load_paired_dataset(tmp_path)

    def test_dimension_mismatch_named(self, tmp_path):
        (tmp_path / "input").mkdir()
        (tmp_path / "target").mkdir()
        Image.fromarray(np.zeros((4, 4, 3), np.uint8), "RGB").save(tmp_path / "input" / "p.png")
        Image.fromarray(np.zeros((6, 4, 3), np.uint8), "RGB").save(tmp_path / "target" / "p.png")
        with pytest.raises(DataError, match="p"):
            load_paired_dataset(tmp_path)

    def test_missing_subdirectory(self, tmp_path):
        (tmp_path / "input").mkdir()
        with pytest.raises(DataError, match="target"):
            load_paired_dataset(tmp_path)


class TestSynthetic:
    def test_deterministic_bitwise(self):
        a = synth_relight_pair(7, 32, N6500, E4500)
        b = synth_relight_pair(7, 32, N6500, E4500)
        np.testing.assert_array_equal(a.input_image.data, b.input_image.data)
        np.testing.assert_array_equal(a.target_image.data, b.target_image.data)

    def test_same_settings_identical_images(self):
        p = synth_relight_pair(3, 32, N6500, N6500)
        np.testing.assert_array_equal(p.input_image.data, p.target_image.data)

    def test_different_settings_differ(self):
        p = synth_relight_pair(3, 32, N6500, E4500)
        assert not np.array_equal(p.input_image.data, p.target_image.data)

    def test_tint_endpoints(self):
        np.testing.assert_allclose(color_tint(6500), [1.0, 1.0, 1.0], atol=0)
        np.testing.assert_allclose(color_tint(2500), [1.0, 0.6, 0.3], atol=0)

    def test_values_in_unit_interval(self):
        for seed in range(4):
            p = synth_relight_pair(seed, 16, N6500, E4500)
            for img in (p.input_image.data, p.target_image.data):
                assert img.min() >= 0.0 and img.max() <= 1.0

    def test_size_must_be_divisible_by_16(self):
        with pytest.raises(ValueError, match="divisible by 16"):
            synth_relight_pair(0, 20, N6500, E4500)

    def test_kelvin_range_validated(self):
        with pytest.raises(ValueError, match="color_temp_kelvin"):
            IlluminationSetting(Azimuth.N, 2000)


class TestImagePair:
    def test_shape_mismatch_rejected(self):
        a = Tensor(np.zeros((1, 16, 16, 3), np.float32))
        b = Tensor(np.zeros((1, 8, 8, 3), np.float32))
        with pytest.raises(DataError, match="differ"):
            ImagePair(a, b, N6500, E4500, "x")

    def test_out_of_range_rejected(self):
        a = Tensor(np.full((1, 8, 8, 3), 1.5, np.float32))
        with pytest.raises(DataError, match=r"\[0, 1\]"):
            ImagePair(a, a, N6500, E4500, "x")


def _synth_set(n, size=16):
    return [synth_relight_pair(i, size, N6500, E4500, name=f"p{i:03d}") for i in range(n)]


class TestSplit:
    def test_challenge_style_counts(self):
        ds = _synth_set(390 // 30)  # scaled-down stand-in uses the same fractions
        out = split(ds, (300 / 390, 45 / 390, 45 / 390), seed=0)
        assert (len(out.train), len(out.val), len(out.test)) == (10, 2, 1)
        full = split(_synth_set(0) + ds * 30, (300 / 390, 45 / 390, 45 / 390), seed=0)
        assert (len(full.train), len(full.val), len(full.test)) == (300, 45, 45)

    def test_everything_in_train(self):
        ds = _synth_set(5)
        out = split(ds, (1.0, 0.0, 0.0), seed=1)
        assert len(out.train) == 5 and not out.val and not out.test

    def test_same_seed_identical(self):
        ds = _synth_set(9)
        a = split(ds, (0.5, 0.25, 0.25), seed=3)
        b = split(ds, (0.5, 0.25, 0.25), seed=3)
        assert [p.name for p in a.train] == [p.name for p in b.train]
        assert a.order == b.order

    def test_disjoint_and_complete(self):
        ds = _synth_set(10)
        out = split(ds, (0.6, 0.2, 0.2), seed=4)
        names = [p.name for p in out.train + out.val + out.test]
        assert sorted(names) == sorted(p.name for p in ds)
        assert len(set(names)) == len(names)

    def test_bad_fractions_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            split(_synth_set(4), (0.5, 0.2, 0.2), seed=0)

    def test_manifest_format(self, tmp_path):
        ds = _synth_set(4)
        out = split(ds, (0.5, 0.25, 0.25), seed=5)
        write_split_manifest(out, tmp_path / "m.tsv")
        lines = (tmp_path / "m.tsv").read_text().splitlines()
        assert len(lines) == 4
        assert all("\t" in line for line in lines)
        labels = {line.split("\t")[1] for line in lines}
        assert labels == {"train", "val", "test"}
