"""Seed derivation: stability, independence, and the pinned reference vector."""

import hashlib

import numpy as np

from p2pcast import derive_seed, make_rng


def test_pinned_vectors():
    # Frozen reference values; a change here would silently re-randomise every
    # experiment, so these must never move.
    assert derive_seed(12345) == 8383533804853196449
    assert derive_seed(12345, "build") == 1100909238304656199
    assert derive_seed(0, "cell", "FR", "flat", 10, 0) == 13466156006359765218


def test_matches_documented_hash():
    # The scheme is blake2b-8 over the master seed and labels joined by 0x1f.
    h = hashlib.blake2b(digest_size=8)
    h.update(b"42")
    for label in (b"delay_space", b"tight", b"coords"):
        h.update(b"\x1f")
        h.update(label)
    assert derive_seed(42, "delay_space", "tight", "coords") == int.from_bytes(h.digest(), "big")


def test_labels_separate_streams():
    a = make_rng(7, "alpha").random(8)
    b = make_rng(7, "beta").random(8)
    a2 = make_rng(7, "alpha").random(8)
    assert np.array_equal(a, a2)
    assert not np.array_equal(a, b)


def test_label_boundaries_matter():
    # ("ab", "c") and ("a", "bc") must not collide.
    assert derive_seed(1, "ab", "c") != derive_seed(1, "a", "bc")
    assert derive_seed(1, "10", "0") != derive_seed(1, "1", "00")


def test_int_and_str_labels_interchangeable_only_by_value():
    assert derive_seed(3, 5) == derive_seed(3, "5")
    assert derive_seed(3, 5) != derive_seed(3, "05")
