"""Tests for image I/O, patches, splits and the synthetic generator."""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import numpy as np
import pytest
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import DimensionError, ParseError, ValidationError
from data.dataset import MANIFEST, load_dataset, load_patches, write_dataset
from data.manifest import DatasetManifest, apply_assignments, read_assignments, split, to_csv
from data.patches import LabeledPatch, cut_patches, hflip, reassemble, stack
from data.pnm import decode_pgm, decode_ppm, encode_ppm, load_image, load_mask, save_image, save_mask
from data.synthetic import gen_synthetic
from engine.tensor import Tensor
from metrics.confusion import ConfusionMatrix, accumulate, acc, evaluate, miou


def _patch(size=4, value=0.5, source="img", row=0, col=0):
    return LabeledPatch(Tensor(np.full((1, 3, size, size), value)), np.zeros((size, size), dtype=np.uint8),
                        source=source, row=row, col=col)


# -- portable pixmaps ---------------------------------------------------------------

def test_white_pixel_scales_to_one():
    """Test that a P6 pixel (255,255,255) becomes (1.0, 1.0, 1.0)."""
    image = decode_ppm(b"P6\n1 1\n255\n\xff\xff\xff")
    assert image.shape == (1, 3, 1, 1)
    assert image.data.ravel().tolist() == [1.0, 1.0, 1.0]


def test_header_comments_are_skipped():
    """Test that '#' comments between header fields are ignored."""
    image = decode_ppm(b"P6\n# made by hand\n2 1\n# max\n255\n" + bytes([0, 0, 0, 255, 0, 0]))
    assert image.shape == (1, 3, 1, 2)
    assert image.data[0, 0, 0, 1] == 1.0


def test_unsupported_maxval_is_parse_error():
    """Test that maxval other than 255 is rejected with a byte offset."""
    with pytest.raises(ParseError) as info:
        decode_ppm(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00")
    assert info.value.offset is not None


@pytest.mark.parametrize("blob", [b"P3\n1 1\n255\n\x00\x00\x00", b"P61 1\n255\n\x00\x00\x00",
                                  b"P6\n1 x\n255\n\x00\x00\x00", b"P6\n2 2\n255\n\x00\x00\x00"])
def test_malformed_headers(blob):
    """Test wrong magic, missing separators, bad fields and short payloads."""
    with pytest.raises(ParseError):
        decode_ppm(blob)


def test_mask_roundtrip(tmp_path):
    """Test that save then load of a mask gives back the label map."""
    labels = np.random.default_rng(0).integers(0, 2, size=(7, 5)).astype(np.uint8)
    save_mask(tmp_path / "m.pgm", labels)
    assert np.array_equal(load_mask(tmp_path / "m.pgm"), labels)
    assert (tmp_path / "m.pgm").read_bytes().startswith(b"P5\n5 7\n255\n")


def test_mask_rejects_grey_values():
    """Test that a mask byte other than 0 or 255 is a validation error naming the pixel."""
    with pytest.raises(ValidationError) as info:
        decode_pgm(b"P5\n2 1\n255\n\x00\x80")
    assert "(0, 1)" in str(info.value)


def test_image_roundtrip_quantizes(tmp_path):
    """Test that P6 storage is exact for multiples of 1/255."""
    data = np.random.default_rng(1).integers(0, 256, size=(1, 3, 4, 6)) / 255.0
    save_image(tmp_path / "i.ppm", Tensor(data))
    loaded = load_image(tmp_path / "i.ppm", "float64")
    assert np.allclose(loaded.data, data, atol=1e-12)
    assert encode_ppm(loaded) == encode_ppm(Tensor(data))


def test_image_raw_tensor_suffix(tmp_path):
    """Test that `.mnt` paths go through the raw tensor format losslessly."""
    data = np.random.default_rng(2).uniform(size=(1, 3, 2, 2)).astype(np.float32)
    save_image(tmp_path / "i.mnt", Tensor(data))
    assert load_image(tmp_path / "i.mnt").data.tobytes() == data.tobytes()


def test_missing_image_names_path(tmp_path):
    """Test that an unreadable image raises an OSError with the path."""
    with pytest.raises(OSError) as info:
        load_image(tmp_path / "gone.ppm")
    assert "gone.ppm" in str(info.value)


# -- patches ----------------------------------------------------------------------------

def test_cut_and_reassemble_identity():
    """Test that a 64x64 tile cuts into 4 patches of 32 that reassemble exactly."""
    rng = np.random.default_rng(3)
    image = Tensor(rng.uniform(size=(1, 3, 64, 64)))
    label = rng.integers(0, 2, size=(64, 64)).astype(np.uint8)
    patches = cut_patches(image, label, 32, source="tile")
    assert [(p.row, p.col) for p in patches] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert patches[1].patch_id == "tile_000_001"
    back_image, back_label = reassemble(patches)
    assert back_image.data.tobytes() == image.data.tobytes()
    assert np.array_equal(back_label, label)


def test_patch_grid_count():
    """Test the 10x10 grid geometry: a side ten times the patch gives 100 patches."""
    image = Tensor(np.zeros((1, 3, 50, 50), dtype=np.float32))
    assert len(cut_patches(image, np.zeros((50, 50), dtype=np.uint8), 5)) == 100


def test_single_patch_equals_input():
    """Test that cutting with the full size returns the input."""
    image = Tensor(np.random.default_rng(4).uniform(size=(1, 3, 8, 8)))
    patches = cut_patches(image, np.ones((8, 8), dtype=np.uint8), 8)
    assert len(patches) == 1
    assert patches[0].image.data.tobytes() == image.data.tobytes()


def test_indivisible_cut_is_dimension_error():
    """Test that no partial patches are produced."""
    with pytest.raises(DimensionError):
        cut_patches(Tensor(np.zeros((1, 3, 10, 12))), np.zeros((10, 12), dtype=np.uint8), 4)


def test_patch_label_must_match_image():
    """Test that a label of the wrong size is rejected."""
    with pytest.raises(ValidationError):
        LabeledPatch(Tensor(np.zeros((1, 3, 4, 4))), np.zeros((4, 5), dtype=np.uint8))


def test_hflip_is_involution_and_mirrors():
    """Test hflip(hflip(p)) == p bitwise and column 0 moving to column W-1."""
    patch = gen_synthetic(1, 16, 5)[0]
    flipped = hflip(patch)
    assert np.array_equal(flipped.label[:, -1], patch.label[:, 0])
    assert np.array_equal(flipped.image.data[..., -1], patch.image.data[..., 0])
    twice = hflip(flipped)
    assert twice.image.data.tobytes() == patch.image.data.tobytes()
    assert np.array_equal(twice.label, patch.label)
    assert np.bincount(flipped.label.ravel(), minlength=2).tolist() == \
           np.bincount(patch.label.ravel(), minlength=2).tolist()


def test_constant_predictor_is_flip_invariant():
    """Test that an all-background predictor scores the same on flipped patches."""
    patches = gen_synthetic(6, 16, 6)

    def predict(p):
        return np.zeros(p.size, dtype=np.uint8)

    original = evaluate(predict, patches)
    flipped = evaluate(predict, [hflip(p) for p in patches])
    assert np.array_equal(original.counts, flipped.counts)


def test_stack_batches():
    """Test that stack builds (N,3,H,W) images and (N,H,W) labels."""
    images, labels = stack([_patch(), _patch(value=1.0)], np.float32)
    assert images.shape == (2, 3, 4, 4)
    assert images.dtype == np.float32
    assert labels.shape == (2, 4, 4)


# -- splits -------------------------------------------------------------------------------

def test_split_full_scene_geometry():
    """Test that 1800 patches split into 1620 train and 180 val."""
    manifest = split(DatasetManifest([_patch(col=i) for i in range(1800)]), 0.9, seed=0)
    assert (len(manifest.train), len(manifest.val)) == (1620, 180)


def test_split_small_and_deterministic():
    """Test 10 patches -> 9/1 and identical assignments under the same seed."""
    manifest = DatasetManifest([_patch(col=i) for i in range(10)])
    first, second = split(manifest, 0.9, 7), split(manifest, 0.9, 7)
    assert (len(first.train), len(first.val)) == (9, 1)
    assert first.splits == second.splits
    assert sorted(first.train + first.val, key=lambda p: p.col) == manifest.patches


def test_split_keeps_both_sides():
    """Test that extreme fractions still leave one patch on each side."""
    manifest = DatasetManifest([_patch(col=i) for i in range(3)])
    assert len(split(manifest, 0.99).val) == 1
    assert len(split(manifest, 0.01).train) == 1


def test_split_needs_two_patches():
    """Test that a single patch cannot be split."""
    with pytest.raises(ValidationError):
        split(DatasetManifest([_patch()]))


def test_manifest_csv_assignments():
    """Test that written assignments are read back and reapplied."""
    manifest = split(DatasetManifest([_patch(col=i) for i in range(4)]), 0.5, 1)
    text = to_csv(manifest)
    assert text.splitlines()[0] == "patch_id,source,row,col,split"
    restored = apply_assignments(DatasetManifest(manifest.patches), read_assignments(text))
    assert restored.splits == manifest.splits
    with pytest.raises(ValidationError):
        read_assignments("patch_id,source,row,col,split\nimg_000_000,img,0,0,test\n")


# -- synthetic data ---------------------------------------------------------------------

def test_synthetic_is_deterministic():
    """Test that the same seed produces identical bytes."""
    a, b = gen_synthetic(5, 32, 9), gen_synthetic(5, 32, 9)
    for x, y in zip(a, b):
        assert x.image.data.tobytes() == y.image.data.tobytes()
        assert x.label.tobytes() == y.label.tobytes()
    assert gen_synthetic(1, 32, 10)[0].label.tobytes() != a[0].label.tobytes()


def test_synthetic_class_balance():
    """Test both classes in every tile and a building fraction within [5%, 40%]."""
    for patch in gen_synthetic(40, 64, 0):
        assert set(np.unique(patch.label)) == {0, 1}
        assert 0.05 <= patch.label.mean() <= 0.40
        assert 0.0 <= patch.image.data.min() and patch.image.data.max() <= 1.0
        assert patch.image.shape == (1, 3, 64, 64)


def test_synthetic_targets_are_crisp():
    """Test that a 3x3 median filter of each label scores mIOU >= 0.95 against it."""
    cm = ConfusionMatrix(2)
    for patch in gen_synthetic(30, 64, 1):
        padded = np.pad(patch.label, 1, mode="edge")
        median = np.median(sliding_window_view(padded, (3, 3)), axis=(-2, -1)).astype(np.uint8)
        cm = accumulate(cm, median, patch.label)
    assert miou(cm) >= 0.95
    assert acc(cm) >= 0.95


def test_synthetic_size_contract():
    """Test that tile sizes not divisible by 4 are rejected and the smallest tile works."""
    for size in (30, 0):
        with pytest.raises(ValidationError):
            gen_synthetic(1, size)
    for patch in gen_synthetic(3, 4, seed=2):
        assert patch.image.shape == (1, 3, 4, 4)
        assert 0.05 <= patch.label.mean() <= 0.40


# -- dataset directories ----------------------------------------------------------------

def test_dataset_directory_roundtrip(tmp_path):
    """Test write_dataset then load_dataset restores ids, labels and splits."""
    manifest = split(DatasetManifest(gen_synthetic(5, 16, 2)), 0.9, 3)
    write_dataset(tmp_path, manifest)
    assert (tmp_path / MANIFEST).is_file()
    loaded = load_dataset(tmp_path)
    assert [p.patch_id for p in loaded.patches] == [p.patch_id for p in manifest.patches]
    assert loaded.splits == manifest.splits
    for a, b in zip(loaded.patches, manifest.patches):
        assert np.array_equal(a.label, b.label)
        assert np.max(np.abs(a.image.data - b.image.data)) <= 0.5 / 255 + 1e-6


def test_load_patches_cuts_large_images(tmp_path):
    """Test that an image larger than the patch size is cut on load."""
    image = Tensor(np.random.default_rng(8).integers(0, 256, size=(1, 3, 8, 16)) / 255.0)
    save_image(tmp_path / "images" / "scene.ppm", image)
    save_mask(tmp_path / "labels" / "scene.pgm", np.zeros((8, 16), dtype=np.uint8))
    patches = load_patches(tmp_path, patch_size=8)
    assert [p.patch_id for p in patches] == ["scene_000_000", "scene_000_001"]


def test_missing_label_file(tmp_path):
    """Test that an image without a label file is a validation error."""
    save_image(tmp_path / "images" / "lonely.ppm", Tensor(np.zeros((1, 3, 4, 4))))
    with pytest.raises(ValidationError):
        load_patches(tmp_path)
