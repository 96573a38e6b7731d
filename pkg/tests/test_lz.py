from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from lznet.lz import Digest, jaccard_distance, knn_classify, knn_predict, lz_digest, lzjd, lzjd_matrix


def token_lists(max_alphabet=8, max_len=400):
    return st.integers(2, max_alphabet).flatmap(
        lambda m: st.lists(st.integers(0, m - 1), max_size=max_len)
    )


def random_seq(rng, alphabet, n):
    return tuple(int(t) for t in rng.integers(0, alphabet, n))


class TestDigest:
    def test_table_rows(self):
        assert lz_digest("aabbaba").entries == {"a", "ab", "b", "aba"}
        assert lz_digest("aabbba").entries == {"a", "ab", "b", "ba"}

    def test_insertion_order(self):
        assert lz_digest("aabbaba").order == ("a", "ab", "b", "aba")

    def test_boundaries(self):
        assert len(lz_digest("")) == 0
        assert lz_digest("a").entries == {"a"}
        assert len(lz_digest("", hashed=True)) == 0

    def test_trailing_repeat_discarded(self):
        # "ab" then "a" again: the final window "a" is already stored.
        assert lz_digest("aba").order == ("a", "b")

    def test_bytes_and_token_lists(self):
        assert lz_digest(b"aabbaba").entries == {b"a", b"ab", b"b", b"aba"}
        assert lz_digest([0, 0, 1, 1, 0, 1, 0]).entries == {(0,), (0, 1), (1,), (0, 1, 0)}

    @given(token_lists())
    def test_matches_oracle(self, seq):
        assert list(lz_digest(seq).order) == oracles.lz_digest(seq)

    @given(token_lists())
    def test_prefix_closed(self, seq):
        entries = lz_digest(seq).entries
        assert all(e[:-1] in entries for e in entries if len(e) > 1)

    @given(token_lists())
    def test_reconstruction(self, seq):
        d = lz_digest(seq)
        joined = tuple(tok for e in d.order for tok in e)
        assert joined == tuple(seq[: len(joined)])
        rest = tuple(seq[len(joined) :])
        assert rest == () or rest in d.entries

    @pytest.mark.parametrize("alphabet", [2, 4, 8])
    def test_long_sequences(self, alphabet):
        seq = random_seq(np.random.default_rng(alphabet), alphabet, 10_000)
        d = lz_digest(seq)
        assert all(e[:-1] in d for e in d if len(e) > 1)
        assert sum(map(len, d.order)) >= 10_000 - max(map(len, d.order))

    @given(token_lists())
    def test_hashed_is_a_faithful_image(self, seq):
        exact, hashed = lz_digest(seq), lz_digest(seq, hashed=True)
        assert len(exact) == len(hashed)
        assert len(set(hashed.order)) == len(hashed.order)


class TestJaccard:
    A = Digest(("a", "ab", "b", "aba"))
    B = Digest(("a", "ab", "b", "ba"))

    def test_table_pair(self):
        assert jaccard_distance(self.A, self.B) == pytest.approx(0.4, abs=1e-12)

    def test_identity_and_disjoint(self):
        assert jaccard_distance(self.A, self.A) == 0.0
        assert jaccard_distance(self.A, Digest(("z", "zz"))) == 1.0
        assert jaccard_distance(Digest(()), Digest(())) == 0.0

    def test_mixed_modes_rejected(self):
        with pytest.raises(ValueError):
            jaccard_distance(lz_digest("ab"), lz_digest("ab", hashed=True))

    def test_metric_axioms(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            a, b, c = (lz_digest(random_seq(rng, 3, int(rng.integers(0, 40)))) for _ in range(3))
            ab, ba = jaccard_distance(a, b), jaccard_distance(b, a)
            assert 0.0 <= ab <= 1.0
            assert ab == ba
            assert jaccard_distance(a, a) == 0.0
            assert ab <= jaccard_distance(a, c) + jaccard_distance(c, b) + 1e-12

    @given(st.lists(st.integers(0, 5), max_size=30), st.lists(st.integers(0, 5), max_size=30))
    def test_matches_set_oracle(self, x, y):
        assert lzjd(x, y) == pytest.approx(oracles.jaccard(oracles.lz_digest(x), oracles.lz_digest(y)), abs=1e-15)


class TestLzjd:
    def test_examples(self):
        assert lzjd("aabbaba", "aabbaba") == 0.0
        assert lzjd("aabbaba", "aabbba") == pytest.approx(0.4, abs=1e-12)
        assert lzjd("aabbaba", "aabbba", hashed=True) == pytest.approx(0.4, abs=1e-12)
        assert lzjd("abcab", "bbcaa") == lzjd("bbcaa", "abcab")

    @pytest.mark.parametrize("n", [100, 1000, 10_000])
    def test_hashed_agrees_with_exact(self, n):
        rng = np.random.default_rng(n)
        for _ in range(5):
            x, y = random_seq(rng, 4, n), random_seq(rng, 4, n)
            assert lzjd(x, y, hashed=True) == pytest.approx(lzjd(x, y), abs=1e-15)

    def test_matrix_layout_independent_of_workers(self):
        rng = np.random.default_rng(1)
        seqs = [random_seq(rng, 3, 50) for _ in range(7)]
        m1 = lzjd_matrix(seqs, workers=1)
        m4 = lzjd_matrix(seqs, seqs[:3], workers=4)
        assert m1.shape == (7, 7)
        np.testing.assert_array_equal(m1[:, :3], m4)
        np.testing.assert_array_equal(m1, m1.T)
        assert m1[2, 5] == lzjd(seqs[2], seqs[5])


class TestKnn:
    def test_self_match(self):
        train = [("abcabc", "P"), ("zzzz", "Q"), ("aabbaba", "R")]
        assert knn_classify(train, "aabbaba", 1) == "R"

    def test_example(self):
        assert knn_classify([("aabbaba", "X"), ("zzzzzz", "Y")], "aabbba", 1) == "X"

    def test_all_same_label(self):
        train = [("ab", "L"), ("cd", "L"), ("ef", "L")]
        assert knn_classify(train, "xyz", 3) == "L"

    def test_distance_tie_keeps_training_order(self):
        train = [("zz", "first"), ("yy", "second")]
        assert knn_classify(train, "ab", 1) == "first"

    def test_count_tie_goes_to_smaller_summed_distance(self):
        # The nearest item is B, but the two A items sum to less than the two B items.
        train = [("cdaabba", "B"), ("dcba", "A"), ("bcadz", "A"), ("cca", "B")]
        q = "abcabd"
        assert [lzjd(q, s) for s, _ in train] == pytest.approx([0.0, 0.2, 1 / 3, 5 / 6])
        assert knn_classify(train, q, 1) == "B"
        assert knn_classify(train, q, 4) == "A"

    def test_full_tie_goes_to_first_seen(self):
        train = [("zz", "late"), ("ab", "early"), ("yy", "late"), ("ab", "early")]
        # Two labels, equal counts and equal sums: the label ranked first wins.
        assert knn_classify([("ab", "x"), ("ab", "y")], "ab", 2) == "x"
        assert knn_classify(train, "ab", 2) == "early"

    @pytest.mark.parametrize("k", [0, 3, 1.5])
    def test_bad_k(self, k):
        with pytest.raises(ValueError):
            knn_classify([("a", 1), ("b", 2)], "a", k)

    def test_empty_train(self):
        with pytest.raises(ValueError):
            knn_classify([], "a", 1)

    def test_predict_many(self):
        train = [("aaaa", 0), ("bbbb", 1)]
        assert knn_predict(train, ["aaab", "bbba"], 1) == [0, 1]
