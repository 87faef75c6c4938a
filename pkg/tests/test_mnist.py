import struct

import numpy as np
import pytest

from synthdata import idx_image_bytes, idx_label_bytes, make_images
from losspaths.mnist import (BatchPlan, Dataset, epoch_permutation,
                             minibatches, parse_idx_images, parse_idx_labels,
                             standard_split)


def test_parse_images_from_handcrafted_stream():
    pixels = np.zeros((2, 28, 28), dtype=np.uint8)
    pixels[0, 0, 0] = 255
    pixels[0, 13, 7] = 128
    pixels[1, 27, 27] = 3
    mat = parse_idx_images(idx_image_bytes(pixels))
    assert mat.shape == (2, 784)
    assert mat[0, 0] == 1.0
    assert mat[0, 13 * 28 + 7] == 128 / 255
    assert mat[1, 783] == 3 / 255
    assert mat.min() >= 0.0 and mat.max() <= 1.0


def test_parse_labels_from_handcrafted_stream():
    np.testing.assert_array_equal(parse_idx_labels(idx_label_bytes([3, 7])), [3, 7])


def test_wrong_magic_is_rejected():
    bad = struct.pack(">4i", 0x00000802, 1, 28, 28) + bytes(784)
    with pytest.raises(ValueError, match="magic"):
        parse_idx_images(bad)
    with pytest.raises(ValueError, match="magic"):
        parse_idx_labels(struct.pack(">2i", 0x00000803, 2) + bytes(2))


def test_truncated_streams_are_rejected():
    good = idx_image_bytes(np.zeros((2, 28, 28), dtype=np.uint8))
    with pytest.raises(ValueError, match="truncated"):
        parse_idx_images(good[:-5])
    with pytest.raises(ValueError, match="truncated"):
        parse_idx_labels(idx_label_bytes([1, 2, 3])[:-1])
    with pytest.raises(ValueError):
        parse_idx_images(good[:10])


def test_parse_determinism():
    images, _ = make_images(5, seed=2)
    blob = idx_image_bytes(images)
    a = parse_idx_images(blob)
    b = parse_idx_images(blob)
    assert a.tobytes() == b.tobytes()


def test_standard_split_truncates_to_cap():
    images, labels = make_images(120, seed=0)
    t_images, t_labels = make_images(30, seed=1)
    imgs = parse_idx_images(idx_image_bytes(images))
    timgs = parse_idx_images(idx_image_bytes(t_images))
    train, test = standard_split(imgs, labels.astype(np.int64), timgs,
                                 t_labels.astype(np.int64), train_cap=100)
    assert len(train) == 100
    assert len(test) == 30
    assert train.split_tag == "train" and test.split_tag == "test"
    # first-N truncation, in file order
    np.testing.assert_array_equal(train.images, imgs[:100])


def test_split_rejects_oversized_cap():
    images, labels = make_images(10, seed=0)
    imgs = parse_idx_images(idx_image_bytes(images))
    with pytest.raises(ValueError):
        standard_split(imgs, labels.astype(np.int64), imgs,
                       labels.astype(np.int64), train_cap=11)


def _small_dataset(n=130, seed=5):
    images, labels = make_images(n, seed=seed)
    return Dataset(parse_idx_images(idx_image_bytes(images)),
                   labels.astype(np.int64), "train")


def test_minibatch_sizes_partition_the_dataset():
    ds = _small_dataset(130)
    batches = list(minibatches(ds, BatchPlan(64, shuffle_seed=9, epoch=0)))
    assert [len(b) for b in batches] == [64, 64, 2]


def test_minibatch_determinism_per_seed_epoch():
    ds = _small_dataset(50)
    a = list(minibatches(ds, BatchPlan(16, shuffle_seed=3, epoch=4)))
    b = list(minibatches(ds, BatchPlan(16, shuffle_seed=3, epoch=4)))
    for ba, bb in zip(a, b):
        assert ba.inputs.tobytes() == bb.inputs.tobytes()
    c = list(minibatches(ds, BatchPlan(16, shuffle_seed=3, epoch=5)))
    assert any(ba.inputs.tobytes() != bc.inputs.tobytes()
               for ba, bc in zip(a, c))


def test_epoch_visits_every_sample_exactly_once():
    ds = _small_dataset(97)
    seen = np.concatenate([
        b.inputs.sum(axis=1)  # pixel sums act as row fingerprints
        for b in minibatches(ds, BatchPlan(10, shuffle_seed=1, epoch=2))
    ])
    np.testing.assert_allclose(np.sort(seen), np.sort(ds.images.sum(axis=1)))
    assert epoch_permutation(97, 1, 2).shape == (97,)


def test_reconstruction_batches_use_images_as_targets():
    ds = _small_dataset(20)
    (batch,) = list(minibatches(ds, BatchPlan(50, shuffle_seed=0, epoch=0),
                                reconstruction=True))
    np.testing.assert_array_equal(batch.targets, batch.inputs)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.full((2, 4), 2.0), np.array([0, 1]))  # pixels out of range
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 4)), np.array([0, 11]))  # label out of range
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 4)), np.array([0]))  # count mismatch
