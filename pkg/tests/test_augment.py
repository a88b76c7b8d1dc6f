import numpy as np
import pytest

from hypercl import AugmentConfig, ConfigurationError, Hypergraph, make_views
from hypercl.augment import mask_features, mask_hyperedges, mask_memberships, mask_nodes
from hypercl.rng import child_rng

from conftest import random_dataset, random_hypergraph


def _big_hypergraph(k):
    # k memberships spread over k // 10 hyperedges of 10 distinct nodes
    m = k // 10
    return Hypergraph(10, m, np.tile(np.arange(10), m), np.repeat(np.arange(m), 10))


class TestFeatureMask:
    def test_zero_rate_is_identity(self):
        x = np.random.default_rng(0).normal(size=(4, 6))
        assert mask_features(x, 0.0, child_rng(1)) is x

    def test_full_rate_zeroes(self):
        x = np.ones((3, 5))
        assert not mask_features(x, 1.0, child_rng(1)).any()

    def test_same_columns_in_every_row(self):
        x = np.random.default_rng(0).normal(size=(20, 30)) + 5
        out = mask_features(x, 0.5, child_rng(2))
        zero_cols = (out == 0).all(axis=0)
        kept = ~zero_cols
        np.testing.assert_array_equal(out[:, kept], x[:, kept])
        assert not (out[:, zero_cols] != 0).any()

    def test_rate_concentration(self):
        x = np.ones((1, 1000))
        fracs = [(mask_features(x, 0.4, child_rng(s)) == 0).mean() for s in range(100)]
        assert all(0.35 <= f <= 0.45 for f in fracs)


class TestMembershipMask:
    def test_zero_and_full(self):
        h = _big_hypergraph(100)
        assert mask_memberships(h, 0.0, child_rng(0)) is h
        assert mask_memberships(h, 1.0, child_rng(0)).num_memberships == 0

    def test_survivor_count(self):
        h = _big_hypergraph(10_000)
        counts = [mask_memberships(h, 0.4, child_rng(s)).num_memberships for s in range(100)]
        assert all(5800 <= c <= 6200 for c in counts)
        sd = np.sqrt(10_000 * 0.4 * 0.6 / 100)
        assert abs(np.mean(counts) - 6000) < 3 * sd

    def test_index_spaces_preserved(self):
        h, _ = random_hypergraph(np.random.default_rng(0), 30, 12)
        out = mask_memberships(h, 0.5, child_rng(3))
        assert (out.num_nodes, out.num_hyperedges) == (h.num_nodes, h.num_hyperedges)
        keys = set(zip(h.nodes.tolist(), h.edges.tolist()))
        assert set(zip(out.nodes.tolist(), out.edges.tolist())) <= keys


class TestNodeEdgeMask:
    def test_forced_node_removal(self):
        h = Hypergraph.from_hyperedges([[0, 2], [2, 3]], num_nodes=4)
        # first seed whose draw masks node 2 only
        seed = next(s for s in range(1000)
                    if (child_rng(s).random(4) >= 0.5).tolist() == [True, True, False, True])
        out = mask_nodes(h, 0.5, child_rng(seed))
        assert list(zip(out.nodes.tolist(), out.edges.tolist())) == [(0, 0), (3, 1)]
        assert (out.num_nodes, out.num_hyperedges) == (4, 2)

    def test_zero_rates_identity(self):
        h, _ = random_hypergraph(np.random.default_rng(0), 10, 5)
        assert mask_nodes(h, 0.0, child_rng(0)) is h
        assert mask_hyperedges(h, 0.0, child_rng(0)) is h

    def test_full_edge_rate(self):
        h, _ = random_hypergraph(np.random.default_rng(0), 10, 5)
        assert mask_hyperedges(h, 1.0, child_rng(0)).num_memberships == 0

    def test_no_membership_touches_masked_node(self):
        h, _ = random_hypergraph(np.random.default_rng(1), 30, 15, max_size=8)
        keep = child_rng(9).random(30) >= 0.3
        out = mask_nodes(h, 0.3, child_rng(9))
        assert keep[out.nodes].all()
        assert out.num_memberships == keep[h.nodes].sum()

    def test_no_membership_touches_masked_edge(self):
        h, _ = random_hypergraph(np.random.default_rng(2), 30, 15, max_size=8)
        keep = child_rng(4).random(15) >= 0.3
        out = mask_hyperedges(h, 0.3, child_rng(4))
        assert keep[out.edges].all()
        assert out.num_memberships == keep[h.edges].sum()


class TestViews:
    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            AugmentConfig(p_f=1.5)

    def test_zero_rates_give_original(self):
        d = random_dataset(np.random.default_rng(0))
        v1, v2 = make_views(d, AugmentConfig(), child_rng(0))
        for v in (v1, v2):
            assert v.features is d.features
            assert v.hypergraph is d.hypergraph

    def test_reproducible(self):
        d = random_dataset(np.random.default_rng(0), n=40, m=20)
        cfg = AugmentConfig(0.3, 0.3)
        a = make_views(d, cfg, (child_rng(1), child_rng(2)))
        b = make_views(d, cfg, (child_rng(1), child_rng(2)))
        for va, vb in zip(a, b):
            np.testing.assert_array_equal(va.features, vb.features)
            np.testing.assert_array_equal(va.hypergraph.nodes, vb.hypergraph.nodes)

    def test_cora_sized_keep_fraction(self):
        from hypercl import LabeledDataset
        h = _big_hypergraph(4790).with_memberships(np.arange(4790) < 4786)
        d = LabeledDataset(h, np.ones((10, 2)), np.zeros(10, int), 1)
        v1, v2 = make_views(d, AugmentConfig(p_m=0.2), (child_rng(0), child_rng(1)))
        for v in (v1, v2):
            assert abs(v.hypergraph.num_memberships - 3829) <= 0.05 * 3829

    def test_views_independent(self):
        h = _big_hypergraph(2000)
        k1, k2 = [], []
        for s in range(40):
            k1.append(child_rng(s, 0, 1).random(2000) >= 0.4)
            k2.append(child_rng(s, 0, 2).random(2000) >= 0.4)
            m1 = mask_memberships(h, 0.4, child_rng(s, 0, 1))
            assert m1.num_memberships == k1[-1].sum()
        rho = np.corrcoef(np.concatenate(k1), np.concatenate(k2))[0, 1]
        assert abs(rho) < 0.05
