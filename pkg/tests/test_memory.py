from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lznet import engine as E
from lznet import vsa
from lznet.bench import tag_separability
from lznet.memory import AssociativeMemory, MemoryKind, new_memory


def rv(d, seed):
    return vsa.random_hypervector(d, seed)


class TestConstruction:
    def test_hrr_fresh(self):
        mem = new_memory(MemoryKind.HRR, 256, 3)
        assert np.linalg.norm(mem.m) == 0.0
        assert np.linalg.norm(mem.tag) == pytest.approx(1.0, abs=1e-9)

    def test_vtb_needs_square(self):
        with pytest.raises(vsa.DimensionError):
            new_memory("vtb", 255, 3)
        assert new_memory("vtb", 256, 3).d == 256

    def test_same_seed_same_tag(self):
        np.testing.assert_array_equal(new_memory("hrr", 64, 7).tag, new_memory("hrr", 64, 7).tag)

    def test_tag_is_unitary(self):
        tag = new_memory("hrr", 64, 1).tag
        np.testing.assert_allclose(np.abs(np.fft.fft(tag)), 1.0, atol=1e-12)

    def test_hopfield_defaults(self):
        mem = new_memory("hopfield", 64)
        assert mem.beta == pytest.approx(1 / 8)
        assert len(mem) == 0 and mem.tag is None

    @pytest.mark.parametrize("d", [0, 1])
    def test_bad_dimension(self, d):
        with pytest.raises(vsa.DimensionError):
            new_memory("hrr", d)


class TestInsert:
    @pytest.mark.parametrize("kind", ["hrr", "vtb"])
    def test_zero_weight_is_bit_identical(self, kind):
        mem = new_memory(kind, 16, 0).insert(rv(16, 1), 0.7)
        before = mem.m.copy()
        mem.insert(rv(16, 2), 0.0)
        np.testing.assert_array_equal(mem.m, before)

    def test_hopfield_zero_weight_appends_nothing(self):
        mem = new_memory("hopfield", 16).insert(rv(16, 1), 0.0)
        assert len(mem) == 0
        mem.insert(rv(16, 2), 0.3)
        assert len(mem) == 1

    def test_single_insert_is_the_binding(self):
        mem = new_memory("hrr", 64, 2)
        v = rv(64, 5)
        mem.insert(v, 1.0)
        np.testing.assert_array_equal(mem.m, vsa.bind_hrr(v, mem.tag))

    @pytest.mark.parametrize("kind,bind", [("hrr", vsa.bind_hrr), ("vtb", vsa.bind_vtb)])
    def test_weighted_bundle(self, kind, bind):
        mem = new_memory(kind, 64, 2)
        v1, v2 = rv(64, 1), rv(64, 2)
        mem.insert(v1, 0.5).insert(v2, 1.0)
        expected = vsa.bundle([bind(v1, mem.tag), bind(v2, mem.tag)], [0.5, 1.0])
        np.testing.assert_allclose(mem.m, expected, atol=1e-9)

    @given(st.permutations(range(5)), st.sampled_from(["hrr", "vtb"]))
    def test_order_independent(self, order, kind):
        vs = [rv(16, i) for i in range(5)]
        ps = [0.1, 0.9, 0.5, 1.0, 0.3]
        a, b = new_memory(kind, 16, 4), new_memory(kind, 16, 4)
        for i in range(5):
            a.insert(vs[i], ps[i])
        for i in order:
            b.insert(vs[i], ps[i])
        np.testing.assert_allclose(a.m, b.m, atol=1e-9)

    @pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
    def test_weight_out_of_range(self, p):
        with pytest.raises(ValueError):
            new_memory("hrr", 8).insert(rv(8, 0), p)

    def test_dimension_mismatch(self):
        mem = new_memory("hrr", 8)
        with pytest.raises(vsa.DimensionError):
            mem.insert(rv(9, 0))
        with pytest.raises(vsa.DimensionError):
            mem.query(rv(9, 0))

    def test_tag_fixed_across_inserts(self):
        mem = new_memory("hrr", 32, 1)
        tag = mem.tag.copy()
        for i in range(5):
            mem.insert(rv(32, i), 1.0)
        mem.reset()
        np.testing.assert_array_equal(mem.tag, tag)


class TestQuery:
    def test_empty_vsa_returns_zero(self):
        mem = new_memory("hrr", 16, 0)
        res = mem.query(rv(16, 1))
        np.testing.assert_array_equal(res.r_hat.data, np.zeros(16))
        np.testing.assert_array_equal(res.r.data, mem.tag)
        with pytest.raises(vsa.UndefinedSimilarityError):
            vsa.cosine_similarity(res.r_hat.data, res.r.data)

    def test_stored_query_recovers_tag(self):
        mem = new_memory("hrr", 256, 0)
        v = vsa.project_unitary(rv(256, 1))
        mem.insert(v, 1.0)
        res = mem.query(v)
        assert vsa.cosine_similarity(res.r_hat.data, res.r.data) >= 0.99

    def test_cross_talk_is_small(self):
        cos = []
        for t in range(1000):
            mem = new_memory("hrr", 256, t)
            mem.insert(rv(256, [t, 1]), 1.0)
            res = mem.query(rv(256, [t, 2]))
            cos.append(vsa.cosine_similarity(res.r_hat.data, res.r.data))
        # Cross-talk is roughly N(0, 1/d): 0.2 sits at 3.2 sigma for d = 256.
        assert np.quantile(np.abs(cos), 0.99) <= 0.2
        assert np.std(cos) == pytest.approx(1 / 16, rel=0.15)

    def test_vtb_query_unbinds_with_query(self):
        mem = new_memory("vtb", 16, 0)
        v = rv(16, 1)
        mem.insert(v, 1.0)
        np.testing.assert_allclose(mem.query(v).r_hat.data, vsa.unbind_vtb(mem.m, v), atol=1e-12)

    def test_batched_memories_are_independent(self):
        V = np.stack([rv(32, i) for i in range(3)])
        batched = new_memory("hrr", 32, 5).insert(V, np.array([0.2, 0.0, 1.0]))
        for i, p in enumerate([0.2, 0.0, 1.0]):
            single = new_memory("hrr", 32, 5).insert(V[i], p)
            np.testing.assert_allclose(batched.m[i], single.m, atol=1e-15)


class TestHopfield:
    def test_empty_returns_zero(self):
        res = new_memory("hopfield", 8).query(rv(8, 0))
        np.testing.assert_array_equal(res.r_hat.data, np.zeros(8))

    def test_reference_is_query(self):
        mem = new_memory("hopfield", 8).insert(rv(8, 0), 1.0)
        q = rv(8, 1)
        np.testing.assert_array_equal(mem.query(q).r.data, q)

    def test_singleton_retrieval(self):
        v = rv(16, 0)
        mem = new_memory("hopfield", 16).insert(v, 0.4)
        for s in range(5):
            np.testing.assert_allclose(mem.query(rv(16, s + 10)).r_hat.data, v, atol=1e-15)

    def test_matches_log_weight_softmax(self):
        mem = new_memory("hopfield", 16, beta=0.7)
        P = np.stack([rv(16, i) for i in range(4)])
        w = np.array([1.0, 0.3, 0.8, 0.05])
        for p, wi in zip(P, w):
            mem.insert(p, wi)
        q = rv(16, 99)
        logits = 0.7 * P @ q + np.log(w)
        a = np.exp(logits - logits.max())
        a /= a.sum()
        np.testing.assert_allclose(mem.query(q).r_hat.data, a @ P, atol=1e-12)

    def test_sharp_beta_picks_argmax(self):
        P = np.stack([rv(32, i) for i in range(6)])
        q = rv(32, 50)
        mem = new_memory("hopfield", 32, beta=1e3)
        for p in P:
            mem.insert(p, 1.0)
        np.testing.assert_allclose(mem.query(q).r_hat.data, P[np.argmax(P @ q)], atol=1e-9)


class TestReset:
    @pytest.mark.parametrize("kind", ["hrr", "vtb", "hopfield"])
    def test_reset_then_query_is_zero(self, kind):
        mem = new_memory(kind, 16, 0).insert(rv(16, 1), 1.0)
        mem.reset()
        np.testing.assert_array_equal(mem.query(rv(16, 2)).r_hat.data, np.zeros(16))
        mem.reset()
        np.testing.assert_array_equal(mem.query(rv(16, 2)).r_hat.data, np.zeros(16))

    def test_reset_then_insert_matches_fresh(self):
        a = new_memory("hrr", 16, 3).insert(rv(16, 1), 1.0).reset().insert(rv(16, 2), 1.0)
        b = new_memory("hrr", 16, 3).insert(rv(16, 2), 1.0)
        np.testing.assert_array_equal(a.m, b.m)


class TestDifferentiable:
    def test_gradient_flows_through_weight(self):
        mem = AssociativeMemory("hrr", 8, 0)
        p = E.parameter(np.array([0.5]))
        v = rv(8, 1)
        with E.Tape() as tape:
            mem.insert(v, p)
            loss = E.total(mem.query(v).r_hat)
        g = tape.backward(loss, [p])[p]
        # r_hat is linear in p, so the gradient equals r_hat at p = 1.
        expected = vsa.unbind_hrr(vsa.bind_hrr(v, mem.tag), v).sum()
        np.testing.assert_allclose(g, [expected], atol=1e-12)


class TestSeparability:
    def test_calibrated_threshold_generalizes(self):
        fit = tag_separability(1024, 20, 1000, seed=0)
        threshold = fit.best_threshold()
        for seed in (1, 2):
            assert tag_separability(1024, 20, 1000, seed=seed).accuracy(threshold) >= 0.95

    def test_stored_dominates_fresh(self):
        sep = tag_separability(1024, 20, 1000, seed=3)
        pairs = itertools.product(sep.stored, sep.fresh[:200])
        assert np.mean([s > f for s, f in pairs]) > 0.99


class TestDegenerateQuery:
    def test_zero_query_reads_zero(self):
        mem = new_memory("hrr", 16, 0).insert(rv(16, 1), 1.0)
        np.testing.assert_array_equal(mem.query(np.zeros(16)).r_hat.data, np.zeros(16))

    def test_partial_degeneracy_drops_bins(self):
        mem = new_memory("hrr", 16, 0).insert(rv(16, 1), 1.0)
        q = np.ones(16)  # only the DC bin is non-zero
        expected = np.full(16, mem.m.sum() / 16)
        np.testing.assert_allclose(mem.query(q).r_hat.data, expected, atol=1e-15)

    def test_strict_engine_op_raises(self):
        with pytest.raises(vsa.DegenerateSpectrumError):
            E.unbind_hrr(rv(8, 0), np.zeros(8))
