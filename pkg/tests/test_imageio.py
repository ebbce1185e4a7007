import numpy as np
import pytest

from damkit.geometry import Image, RegionMask
from damkit.imageio import load_mask_rle, load_ppm, save_mask_rle, save_ppm


def test_rle_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    for _ in range(10):
        w, h = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        mask = RegionMask(rng.random((h, w)) < 0.5)
        path = tmp_path / "m.json"
        save_mask_rle(mask, path)
        back = load_mask_rle(path)
        assert (back.width, back.height) == (w, h)
        assert np.array_equal(back.data, mask.data)


def test_rle_counts_start_with_zero_run(tmp_path):
    # Column-major scan: pixel (0,0) set means the leading zero run is empty.
    import json

    mask = RegionMask.zeros(3, 3)
    mask.data[0, 0] = True
    save_mask_rle(mask, tmp_path / "m.json")
    counts = json.loads((tmp_path / "m.json").read_text())["counts"]
    assert counts[0] == 0
    assert counts[1] == 1

    mask2 = RegionMask.zeros(3, 3)
    mask2.data[2, 0] = True  # third pixel in column-major order
    save_mask_rle(mask2, tmp_path / "m2.json")
    counts2 = json.loads((tmp_path / "m2.json").read_text())["counts"]
    assert counts2 == [2, 1, 6]


def test_rle_rejects_bad_counts(tmp_path):
    (tmp_path / "bad.json").write_text('{"width": 2, "height": 2, "counts": [1, 1]}')
    with pytest.raises(ValueError):
        load_mask_rle(tmp_path / "bad.json")


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = Image(np.round(rng.random((5, 7, 3)) * 255) / 255.0)
    save_ppm(img, tmp_path / "i.ppm")
    back = load_ppm(tmp_path / "i.ppm")
    assert (back.width, back.height) == (7, 5)
    assert np.allclose(back.data, img.data, atol=1e-12)


def test_ppm_header_with_comment(tmp_path):
    body = bytes([10, 20, 30] * 4)
    (tmp_path / "c.ppm").write_bytes(b"P6\n# a comment\n2 2\n255\n" + body)
    img = load_ppm(tmp_path / "c.ppm")
    assert (img.width, img.height) == (2, 2)
    assert np.isclose(img.data[0, 0, 0], 10 / 255.0)


def test_ppm_rejects_wrong_magic(tmp_path):
    (tmp_path / "x.ppm").write_bytes(b"P5\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError):
        load_ppm(tmp_path / "x.ppm")
