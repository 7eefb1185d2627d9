import itertools

import numpy as np
import pytest

from dinet import (
    ConfigError,
    QuantizedDataset,
    SchemaMismatchError,
    ValidationError,
    build_topology,
    mux_combine,
    mux_split,
    predict_quantized,
    train_network,
)
from dinet.network import derive_seed, sample_channel, stream_rng


def toy_dataset(rng, n=300):
    """Single informative binary feature plus a noisy 3-symbol one."""
    y = rng.integers(0, 2, n)
    informative = y.copy()
    noisy = rng.integers(0, 3, n)
    return QuantizedDataset(columns=(informative, noisy), cardinalities=(2, 3),
                            labels=y, n_class=2)


class TestBuildTopology:
    @pytest.mark.parametrize("D", [2, 4, 8, 16])
    def test_power_of_two_counts(self, D):
        layers = int(np.log2(D)) + 1
        topo = build_topology(D, [3] * (layers - 1) + [2], 2, [4] * D)
        assert topo.n_nodes == 2 * D - 1
        assert topo.n_mixers == D - 1

    def test_24_feature_layout(self):
        topo = build_topology(24, [3, 3, 3, 3, 2], 2, [5] * 24)
        assert topo.layer_sizes == (24, 12, 6, 3, 1)
        # final 3-way merge: input alphabet is the cube of the feeding outputs
        assert topo.mux_groups[-1] == ((0, 1, 2),)
        assert topo.layers[-1].n_in == (27,)

    def test_single_feature_degenerates(self):
        topo = build_topology(1, [2], 2, [4])
        assert topo.n_nodes == 1 and topo.n_mixers == 0

    def test_mux_input_cardinality_is_product(self):
        topo = build_topology(4, [3, 2, 2], 2, [7, 7, 7, 7])
        assert topo.layers[1].n_in == (9, 9)
        assert topo.layers[2].n_in == (4,)

    def test_wrong_layer_count_rejected(self):
        with pytest.raises(ConfigError):
            build_topology(8, [3, 3, 2], 2, [4] * 8)

    def test_final_layer_must_match_classes(self):
        with pytest.raises(ConfigError):
            build_topology(4, [3, 3, 3], 2, [4] * 4)


class TestMux:
    def test_paired_symbols(self):
        out = mux_combine([np.array([1]), np.array([2])], [3, 3])
        assert out[0] == 7

    def test_all_zero(self):
        out = mux_combine([np.zeros(4, int), np.zeros(4, int)], [3, 3])
        assert np.all(out == 0)

    def test_three_way(self):
        out = mux_combine([np.array([2]), np.array([1]), np.array([0])], [3, 3, 3])
        assert out[0] == 5

    def test_symbol_above_radix_rejected(self):
        with pytest.raises(ValidationError):
            mux_combine([np.array([3]), np.array([0])], [3, 2])

    def test_single_input_rejected(self):
        with pytest.raises(ValidationError):
            mux_combine([np.array([0])], [3])

    @pytest.mark.parametrize("radices", [(2, 2), (3, 3), (2, 5), (5, 5, 5), (2, 3, 4)])
    def test_round_trip_exhaustive(self, radices):
        grids = [np.array(v) for v in zip(*itertools.product(*[range(r) for r in radices]))]
        combined = mux_combine(grids, radices)
        assert len(set(combined.tolist())) == combined.size  # bijective
        back = mux_split(combined, radices)
        for orig, rec in zip(grids, back):
            assert np.array_equal(orig, rec)


class TestSampling:
    def test_deterministic_rows_pass_through(self):
        chan = np.eye(3)
        rng = stream_rng(0)
        x = np.array([2, 0, 1, 1])
        assert np.array_equal(sample_channel(chan, x, rng), x)

    def test_marginal_frequencies(self):
        chan = np.array([[0.8, 0.2], [0.1, 0.9]])
        rng = stream_rng(1)
        x = np.zeros(20000, dtype=int)
        out = sample_channel(chan, x, rng)
        assert out.mean() == pytest.approx(0.2, abs=0.01)


class TestTrainNetwork:
    def test_single_feature_identity_is_perfect(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 200)
        data = QuantizedDataset(columns=(y.copy(),), cardinalities=(2,),
                                labels=y, n_class=2)
        topo = build_topology(1, [2], 2, [2])
        model = train_network(data, topo, beta=5.0, seed=0)
        preds = predict_quantized(model, data, seed=1)
        assert np.array_equal(preds, y)

    def test_informative_feature_dominates(self):
        rng = np.random.default_rng(1)
        data = toy_dataset(rng)
        topo = build_topology(2, [2, 2], 2, [2, 3])
        model = train_network(data, topo, beta=10.0, seed=0)
        preds = predict_quantized(model, data, seed=0)
        assert (preds == data.labels).mean() >= 0.95

    def test_training_is_reproducible(self):
        rng = np.random.default_rng(2)
        data = toy_dataset(rng)
        topo = build_topology(2, [2, 2], 2, [2, 3])
        a = train_network(data, topo, beta=5.0, seed=7)
        b = train_network(data, topo, beta=5.0, seed=7)
        for key in a.nodes:
            assert np.array_equal(a.nodes[key].channel.p, b.nodes[key].channel.p)
        assert a.class_alignment == b.class_alignment

    def test_per_node_relevance_never_grows(self):
        rng = np.random.default_rng(3)
        data = toy_dataset(rng)
        topo = build_topology(2, [2, 2], 2, [2, 3])
        model = train_network(data, topo, beta=5.0, seed=1)
        for node in model.nodes.values():
            assert node.mi_out_y <= node.mi_in_y + 1e-9

    def test_schema_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        data = toy_dataset(rng)
        topo = build_topology(2, [2, 2], 2, [2, 4])  # wrong cardinality for col 1
        with pytest.raises(SchemaMismatchError):
            train_network(data, topo, beta=5.0, seed=0)

    def test_nonconverged_node_recorded_not_fatal(self):
        rng = np.random.default_rng(5)
        data = toy_dataset(rng)
        topo = build_topology(2, [2, 2], 2, [2, 3])
        model = train_network(data, topo, beta=5.0, seed=0, max_iter=1)
        assert any(not n.diagnostics.converged for n in model.nodes.values())


class TestPredict:
    @pytest.fixture()
    def trained(self):
        rng = np.random.default_rng(6)
        data = toy_dataset(rng)
        topo = build_topology(2, [2, 2], 2, [2, 3])
        return data, train_network(data, topo, beta=10.0, seed=0)

    def test_same_seed_same_output(self, trained):
        data, model = trained
        a = predict_quantized(model, data, seed=42)
        b = predict_quantized(model, data, seed=42)
        assert np.array_equal(a, b)

    def test_deterministic_channels_ignore_seed(self):
        import dataclasses

        from dinet import ConditionalMatrix

        rng = np.random.default_rng(7)
        y = rng.integers(0, 2, 150)
        data = QuantizedDataset(columns=(y.copy(),), cardinalities=(2,),
                                labels=y, n_class=2)
        model = train_network(data, build_topology(1, [2], 2, [2]), beta=8.0, seed=0)
        # force exact 0/1 entries: no randomness left anywhere
        nodes = {
            key: dataclasses.replace(node, channel=ConditionalMatrix(
                np.eye(2)[node.channel.p.argmax(axis=1)]))
            for key, node in model.nodes.items()
        }
        model = dataclasses.replace(model, nodes=nodes)
        a = predict_quantized(model, data, seed=1)
        b = predict_quantized(model, data, seed=999)
        assert np.array_equal(a, b)

    def test_ensemble_single_repeat_equals_stochastic(self, trained):
        data, model = trained
        a = predict_quantized(model, data, seed=3, mode="stochastic")
        b = predict_quantized(model, data, seed=3, mode="ensemble", repeats=1)
        assert np.array_equal(a, b)

    def test_ensemble_votes_stabilize(self, trained):
        data, model = trained
        a = predict_quantized(model, data, seed=1, mode="ensemble", repeats=41)
        b = predict_quantized(model, data, seed=2, mode="ensemble", repeats=41)
        assert (a == b).mean() > 0.95

    def test_unknown_mode_rejected(self, trained):
        data, model = trained
        with pytest.raises(ValidationError):
            predict_quantized(model, data, mode="map")


class TestSeedDerivation:
    def test_distinct_streams(self):
        seeds = {derive_seed(0, 1, layer, pos) for layer in range(4) for pos in range(6)}
        assert len(seeds) == 24

    def test_stable_values(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
