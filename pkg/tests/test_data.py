"""Synthetic dataset generator, preprocessing, splits, and image I/O."""

import struct
import zlib

import numpy as np
import pytest

from swan.data import (Sample, SynthConfig, load_dataset, measure_scr,
                       normalize_minmax, preprocess, save_dataset, split,
                       synth_dataset)
from swan.imageio import (ImageFormatError, load_image, load_pgm, load_png,
                          save_heatmap, save_image, save_pgm, save_png)

# -- generator --------------------------------------------------------------


def test_generator_determinism_is_bitwise():
    cfg = SynthConfig(count=6, size=64, seed=11)
    a = synth_dataset(cfg)
    b = synth_dataset(SynthConfig(count=6, size=64, seed=11))
    for s1, s2 in zip(a, b):
        assert np.array_equal(s1.image, s2.image)
        assert np.array_equal(s1.mask, s2.mask)
    c = synth_dataset(SynthConfig(count=6, size=64, seed=12))
    assert not np.array_equal(a[0].image, c[0].image)


def test_samples_satisfy_invariants():
    for s in synth_dataset(SynthConfig(count=8, size=64, seed=0)):
        assert s.image.shape == s.mask.shape == (64, 64)
        assert s.image.dtype == np.float32
        assert 0.0 <= s.image.min() and s.image.max() <= 1.0
        assert set(np.unique(s.mask)) <= {0, 1}
        assert 1 <= len(s.meta["targets"]) <= 3


def test_targets_stay_small():
    # every connected blob fits a 9x9 box
    for s in synth_dataset(SynthConfig(count=8, size=64, seed=3)):
        for t in s.meta["targets"]:
            cy, cx = t["cy"], t["cx"]
            box = s.mask.copy()
            box[max(cy - 4, 0):cy + 5, max(cx - 4, 0):cx + 5] = 0
            others = [o for o in s.meta["targets"] if o is not t]
            for o in others:
                box[max(o["cy"] - 4, 0):o["cy"] + 5, max(o["cx"] - 4, 0):o["cx"] + 5] = 0
            assert box.sum() == 0


def test_measured_scr_within_requested_range():
    cfg = SynthConfig(count=60, size=64, scr_min=4.0, scr_max=6.0, seed=21)
    hits = total = 0
    for s in synth_dataset(cfg):
        for t in s.meta["targets"]:
            total += 1
            if abs(measure_scr(s.image, t["cy"], t["cx"]) - t["scr"]) <= 1.0:
                hits += 1
    assert total > 0
    assert hits / total >= 0.95


def test_impossible_scr_combination_rejected():
    with pytest.raises(ValueError):
        SynthConfig(scr_max=50.0, noise_sigma=0.05).validate()
    with pytest.raises(ValueError):
        SynthConfig(radius_max=10.0).validate()


# -- preprocessing ----------------------------------------------------------


def test_constant_image_normalizes_to_zeros():
    s = Sample(image=np.full((32, 32), 0.7, np.float32),
               mask=np.zeros((32, 32), np.uint8))
    out = preprocess(s, train_mode=False)
    assert np.array_equal(out.image, np.zeros((32, 32), np.float32))


def test_train_crop_keeps_alignment_and_is_seeded():
    rng_img = np.random.default_rng(0)
    img = rng_img.random((80, 80)).astype(np.float32)
    mask = (img > 0.8).astype(np.uint8)
    s = Sample(image=img, mask=mask)
    a = preprocess(s, train_mode=True, crop=48, rng=np.random.default_rng(7))
    b = preprocess(s, train_mode=True, crop=48, rng=np.random.default_rng(7))
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.mask, b.mask)
    # alignment: the mask of the crop equals thresholding the cropped image
    norm = normalize_minmax(img)
    found = False
    for oy in range(80 - 48 + 1):
        for ox in range(80 - 48 + 1):
            if np.array_equal(a.image, norm[oy:oy + 48, ox:ox + 48]):
                assert np.array_equal(a.mask, mask[oy:oy + 48, ox:ox + 48])
                found = True
    assert found


def test_train_crop_pads_small_images():
    s = Sample(image=np.random.rand(20, 20).astype(np.float32),
               mask=np.zeros((20, 20), np.uint8))
    out = preprocess(s, train_mode=True, crop=32, rng=np.random.default_rng(0))
    assert out.image.shape == (32, 32)


def test_eval_pads_to_multiple_of_16():
    s = Sample(image=np.random.rand(50, 70).astype(np.float32),
               mask=np.zeros((50, 70), np.uint8))
    out = preprocess(s, train_mode=False)
    assert out.image.shape == (64, 80)


def test_split_is_disjoint_exhaustive_seeded():
    ds = synth_dataset(SynthConfig(count=10, size=64, seed=1))
    tr, te = split(ds, ratio=0.8, seed=4)
    assert len(tr) == 8 and len(te) == 2
    ids = sorted(id(s) for s in tr + te)
    assert ids == sorted(id(s) for s in ds)
    tr2, te2 = split(ds, ratio=0.8, seed=4)
    assert [id(s) for s in tr] == [id(s) for s in tr2]
    with pytest.raises(ValueError):
        split(ds[:1])


# -- dataset directory ------------------------------------------------------


def test_dataset_directory_roundtrip(tmp_path):
    cfg = SynthConfig(count=5, size=64, seed=9)
    samples = synth_dataset(cfg)
    save_dataset(samples, cfg, tmp_path, split_seed=1)
    back = load_dataset(tmp_path)
    assert len(back) == 5
    for orig, got in zip(samples, back):
        assert np.array_equal(got.mask, orig.mask)
        assert np.allclose(got.image, np.rint(orig.image * 255) / 255, atol=1e-6)
    tr = load_dataset(tmp_path, subset="train")
    te = load_dataset(tmp_path, subset="test")
    assert len(tr) + len(te) == 5


# -- image I/O --------------------------------------------------------------


def test_pgm_fixture_decode(tmp_path):
    p = tmp_path / "f.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    img = load_pgm(p)
    assert np.allclose(img, [[0, 128 / 255], [1, 64 / 255]])


def test_pgm_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 256, size=(9, 7)).astype(np.uint8)
    p = tmp_path / "x.pgm"
    save_pgm(raw / 255.0, p)
    assert np.array_equal((load_pgm(p) * 255).round().astype(np.uint8), raw)


def test_pgm_comments_and_16bit(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# hello\n2 1\n255\n" + bytes([10, 20]))
    assert np.allclose(load_pgm(p), np.array([[10, 20]]) / 255)
    save_pgm(np.array([[0.25, 0.75]]), tmp_path / "w.pgm", maxval=65535)
    assert np.allclose(load_pgm(tmp_path / "w.pgm"), [[0.25, 0.75]], atol=1e-4)


def test_pgm_errors_name_byte_counts(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 1]))
    with pytest.raises(ImageFormatError, match="expected 4 bytes, got 2"):
        load_pgm(p)
    p.write_bytes(b"P6\n2 2\n255\n" + bytes(4))
    with pytest.raises(ImageFormatError, match="byte offset"):
        load_pgm(p)
    p.write_bytes(b"P5\nx 2\n255\n")
    with pytest.raises(ImageFormatError):
        load_pgm(p)


def test_png_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    raw = rng.integers(0, 256, size=(12, 5)).astype(np.uint8)
    p = tmp_path / "x.png"
    save_png(raw, p)
    assert np.array_equal((load_png(p) * 255).round().astype(np.uint8), raw)


def test_png_decodes_all_filter_types(tmp_path):
    rng = np.random.default_rng(2)
    arr = rng.integers(0, 256, size=(6, 4)).astype(np.uint8)

    def paeth(a, b, c):
        q = a + b - c
        pa, pb, pc = abs(q - a), abs(q - b), abs(q - c)
        return a if pa <= pb and pa <= pc else (b if pb <= pc else c)

    rows = []
    prev = np.zeros(4, np.int64)
    for y, ft in enumerate([0, 1, 2, 3, 4, 2]):
        cur = arr[y].astype(np.int64)
        enc = cur.copy()
        if ft == 1:
            enc[1:] = (cur[1:] - cur[:-1]) & 0xFF
        elif ft == 2:
            enc = (cur - prev) & 0xFF
        elif ft == 3:
            enc[0] = (cur[0] - prev[0] // 2) & 0xFF
            for x in range(1, 4):
                enc[x] = (cur[x] - (cur[x - 1] + prev[x]) // 2) & 0xFF
        elif ft == 4:
            enc[0] = (cur[0] - paeth(0, prev[0], 0)) & 0xFF
            for x in range(1, 4):
                enc[x] = (cur[x] - paeth(cur[x - 1], prev[x], prev[x - 1])) & 0xFF
        rows.append(bytes([ft]) + bytes(enc.astype(np.uint8)))
        prev = cur
    raw = b"".join(rows)

    def chunk(tag, body):
        return (struct.pack(">I", len(body)) + tag + body
                + struct.pack(">I", zlib.crc32(tag + body)))

    blob = (b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", struct.pack(">IIBBBBB", 4, 6, 8, 0, 0, 0, 0))
            + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b""))
    p = tmp_path / "filters.png"
    p.write_bytes(blob)
    assert np.array_equal((load_png(p) * 255).round().astype(np.uint8), arr)


def test_png_errors(tmp_path):
    p = tmp_path / "bad.png"
    p.write_bytes(b"not a png at all")
    with pytest.raises(ImageFormatError, match="signature"):
        load_png(p)
    good = tmp_path / "ok.png"
    save_png(np.zeros((4, 4), np.uint8), good)
    p.write_bytes(good.read_bytes()[:-16])
    with pytest.raises(ImageFormatError, match="truncated"):
        load_png(p)


def test_dispatch_and_heatmap(tmp_path):
    img = np.random.default_rng(3).random((8, 8))
    for ext in ("png", "pgm"):
        path = tmp_path / f"d.{ext}"
        save_image(img, path)
        back = load_image(path)
        assert np.allclose(back, np.rint(img * 255) / 255, atol=1e-6)
    save_heatmap(img * 3.0 - 1.0, tmp_path / "h.png")  # clipped to [0,1]
    hm = load_image(tmp_path / "h.png")
    assert hm.min() >= 0.0 and hm.max() <= 1.0
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "x.bmp")
