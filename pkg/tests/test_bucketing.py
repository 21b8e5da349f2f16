"""Hashing determinism, range, avalanche, and uniformity diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from bucketreuse.bucketing import (
    BucketingConfig,
    PathCountOverflowError,
    TooFewIdsError,
    bucket_many,
    hash64,
    hash_to_bucket,
    path_count_nonexclusive,
    uniformity_report,
)


def random_ids(n: int, seed: int = 0) -> list[bytes]:
    rng = np.random.default_rng(seed)
    lengths = rng.integers(4, 24, size=n)
    blob = rng.integers(0, 256, size=int(lengths.sum()), dtype=np.uint8).tobytes()
    ids, pos = [], 0
    for length in lengths:
        ids.append(blob[pos : pos + length])
        pos += length
    return ids


class TestHashToBucket:
    def test_single_bucket(self):
        assert hash_to_bucket("u", BucketingConfig(1, "s")) == 0

    def test_consistency(self):
        cfg = BucketingConfig(100, "s")
        assert hash_to_bucket("u", cfg) == hash_to_bucket("u", cfg)

    @given(
        unit_id=st.binary(min_size=1, max_size=64),
        salt=st.binary(max_size=32),
        num_buckets=st.integers(1, 10_000),
    )
    @settings(max_examples=200, deadline=None)
    def test_deterministic_and_in_range(self, unit_id, salt, num_buckets):
        cfg = BucketingConfig(num_buckets, salt)
        bucket = hash_to_bucket(unit_id, cfg)
        assert bucket == hash_to_bucket(unit_id, cfg)
        assert 0 <= bucket < num_buckets

    def test_str_and_bytes_agree(self):
        assert hash_to_bucket("user-1", BucketingConfig(100, "s")) == hash_to_bucket(
            b"user-1", BucketingConfig(100, b"s")
        )

    def test_separator_prevents_boundary_collisions(self):
        assert hash64(b"ab", b"c") != hash64(b"a", b"bc")

    def test_rejects_empty_id(self):
        with pytest.raises(ValueError):
            hash_to_bucket(b"", BucketingConfig(10))

    def test_salts_give_independent_assignments(self):
        # joint distribution over two salts should be independent: chi-square
        # on the 100x100 contingency table at alpha = 0.001
        ids = random_ids(1_000_000, seed=7)
        cfg1 = BucketingConfig(100, "salt-one")
        cfg2 = BucketingConfig(100, "salt-two")
        b1 = bucket_many(ids, cfg1)
        b2 = bucket_many(ids, cfg2)
        table = np.bincount(b1 * 100 + b2, minlength=10_000).reshape(100, 100)
        row = table.sum(axis=1, keepdims=True)
        col = table.sum(axis=0, keepdims=True)
        expected = row * col / table.sum()
        stat = float(((table - expected) ** 2 / expected).sum())
        p_value = float(chi2.sf(stat, df=99 * 99))
        assert p_value > 0.001


class TestAvalanche:
    def test_single_byte_flip_changes_many_bits(self):
        rng = np.random.default_rng(11)
        ids = random_ids(10_000, seed=11)
        flipped_bits = []
        for unit_id in ids:
            pos = int(rng.integers(len(unit_id)))
            flip = int(rng.integers(1, 256))
            mutated = bytearray(unit_id)
            mutated[pos] ^= flip
            diff = hash64(unit_id) ^ hash64(bytes(mutated))
            flipped_bits.append(bin(diff).count("1"))
        assert np.mean(flipped_bits) >= 25.0


class TestUniformityReport:
    def test_million_ids_thousand_buckets(self):
        report = uniformity_report(random_ids(1_000_000, seed=3), BucketingConfig(1000, "u"))
        assert int(report.counts.sum()) == 1_000_000
        assert report.p_value > 0.001

    def test_identical_ids_are_degenerate(self):
        report = uniformity_report([b"same"] * 100, BucketingConfig(2, "s"))
        assert sorted(report.counts) == [0, 100]
        assert report.p_value == pytest.approx(0.0, abs=1e-20)

    def test_single_bucket_is_trivially_uniform(self):
        report = uniformity_report([b"x", b"y"] * 10, BucketingConfig(1))
        assert report.chi_square == 0.0
        assert report.p_value == 1.0

    def test_too_few_ids(self):
        with pytest.raises(TooFewIdsError):
            uniformity_report([b"a"] * 19, BucketingConfig(2))


class TestPathCount:
    @pytest.mark.parametrize("n,expected", [(0, 1), (5, 32), (10, 1024), (62, 2**62)])
    def test_values(self, n, expected):
        assert path_count_nonexclusive(n) == expected

    def test_overflow(self):
        with pytest.raises(PathCountOverflowError):
            path_count_nonexclusive(63)

    def test_negative(self):
        with pytest.raises(ValueError):
            path_count_nonexclusive(-1)
