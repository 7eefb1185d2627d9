import csv
import dataclasses
import itertools

import numpy as np
import pytest

from dinet import (
    ConditionalMatrix,
    DINModel,
    QuantizedDataset,
    TrainedNode,
    ValidationError,
    build_topology,
    check_bounds,
    compose_full_matrix,
    mi_flow,
    train_network,
)
from dinet.analysis import MIFlowReport, MuxFlow
from dinet.ib import IBDiagnostics
from dinet.network import mux_combine


def hand_model(channels_by_slot, topo, n_class=2, alignment=None):
    nodes = {}
    for (layer, pos), chan in channels_by_slot.items():
        chan = ConditionalMatrix(chan)
        nodes[(layer, pos)] = TrainedNode(
            channel=chan, n_in=chan.rows, n_out=chan.cols,
            diagnostics=IBDiagnostics(0, (), 0.0, 0.0, True),
            mi_in_y=0.0, mi_out_y=0.0)
    return DINModel(topology=topo, nodes=nodes, quantizers=(), feature_names=(),
                    class_names=tuple(str(i) for i in range(n_class)),
                    class_alignment=alignment or tuple(range(n_class)),
                    beta=5.0, seed=0)


def random_model(D, rng, n_out=2, n_class=2):
    cards = [int(rng.integers(2, 4)) for _ in range(D)]
    n_layers = int(np.log2(D)) + 1
    topo = build_topology(D, [n_out] * (n_layers - 1) + [n_class], n_class, cards)
    channels = {}
    for li, layer in enumerate(topo.layers):
        for k in range(layer.size):
            channels[(li, k)] = rng.dirichlet(np.ones(layer.n_out[k]), size=layer.n_in[k])
    return hand_model(channels, topo, n_class=n_class)


def brute_force_compose(model):
    """Independent oracle: enumerate every intermediate symbol combination."""
    topo = model.topology
    cards = topo.layers[0].n_in
    n_states = int(np.prod(cards))
    out = np.zeros((n_states, topo.n_class))
    for joint in itertools.product(*[range(c) for c in cards]):
        row = sum(s * int(np.prod(cards[:i])) for i, s in enumerate(joint))
        paths = {tuple(joint): 1.0}
        for li, layer in enumerate(topo.layers):
            nxt = {}
            for symbols, pr in paths.items():
                for outs in itertools.product(*[range(layer.n_out[k])
                                                for k in range(layer.size)]):
                    p = pr
                    for k in range(layer.size):
                        p *= model.nodes[(li, k)].channel.p[symbols[k], outs[k]]
                    if p == 0.0:
                        continue
                    if li == topo.depth:
                        key = outs
                    else:
                        key = tuple(
                            int(mux_combine([np.array([outs[m]]) for m in g],
                                            [layer.n_out[m] for m in g])[0])
                            for g in topo.mux_groups[li])
                    nxt[key] = nxt.get(key, 0.0) + p
            paths = nxt
        for (sym,), p in paths.items():
            out[row, model.class_alignment[sym]] += p
    return out


class TestCompose:
    def test_identity_channels_compose_to_identity(self):
        topo = build_topology(2, [2, 2], 2, [2, 2])
        eye = np.eye(2)
        # root input is the mux pairing (low-order digit = node 0)
        root = np.zeros((4, 2))
        for a, b in itertools.product(range(2), range(2)):
            root[a + 2 * b, a ^ b] = 1.0  # xor decoder: exercises digit order
        model = hand_model({(0, 0): eye, (0, 1): eye, (1, 0): root}, topo)
        full = compose_full_matrix(model).p
        for a, b in itertools.product(range(2), range(2)):
            assert full[a + 2 * b, a ^ b] == 1.0

    @pytest.mark.parametrize("D", [2, 4])
    def test_matches_brute_force(self, D):
        rng = np.random.default_rng(10 + D)
        for _ in range(4):
            model = random_model(D, rng)
            fast = compose_full_matrix(model).p
            slow = brute_force_compose(model)
            assert np.abs(fast - slow).max() < 1e-9

    def test_kronecker_dimension_law(self):
        a = np.random.default_rng(0).dirichlet(np.ones(3), size=4)
        b = np.random.default_rng(1).dirichlet(np.ones(3), size=4)
        k = np.kron(a, b)
        assert k.shape == (16, 9)

    def test_state_space_cap(self):
        rng = np.random.default_rng(5)
        model = random_model(4, rng)
        with pytest.raises(ValidationError, match="cap"):
            compose_full_matrix(model, max_states=2)

    def test_alignment_permutes_columns(self):
        topo = build_topology(1, [2], 2, [2])
        chan = np.array([[0.9, 0.1], [0.3, 0.7]])
        plain = hand_model({(0, 0): chan}, topo, alignment=(0, 1))
        flipped = hand_model({(0, 0): chan}, topo, alignment=(1, 0))
        assert np.allclose(compose_full_matrix(plain).p,
                           compose_full_matrix(flipped).p[:, ::-1])


def trained_toy(seed=0, n=400):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    col0 = y.copy()                            # deterministic codeword
    col1 = np.where(rng.random(n) < 0.75, y, rng.integers(0, 2, n))
    data = QuantizedDataset(columns=(col0, col1), cardinalities=(2, 2),
                            labels=y, n_class=2)
    topo = build_topology(2, [2, 2], 2, [2, 2])
    return data, train_network(data, topo, beta=10.0, seed=seed)


class TestMiFlow:
    def test_report_shape_and_nonnegativity(self):
        data, model = trained_toy()
        rep = mi_flow(model, data)
        assert len(rep.nodes) == model.topology.n_nodes
        assert len(rep.muxes) == model.topology.n_mixers
        for node in rep.nodes:
            assert node.mi_in_y >= 0 and node.mi_out_y >= 0 and node.h_out >= 0
        for mux in rep.muxes:
            assert mux.lower_bound >= 0 and mux.observed >= 0

    def test_duplicated_feature_attains_lower_bound(self):
        rng = np.random.default_rng(3)
        y = rng.integers(0, 2, 500)
        data = QuantizedDataset(columns=(y.copy(), y.copy()), cardinalities=(2, 2),
                                labels=y, n_class=2)
        topo = build_topology(2, [2, 2], 2, [2, 2])
        model = train_network(data, topo, beta=10.0, seed=1)
        # near-deterministic channels on identical columns: snap them exact
        nodes = {
            key: dataclasses.replace(node, channel=ConditionalMatrix(
                np.eye(node.n_out)[node.channel.p.argmax(axis=1)]))
            for key, node in model.nodes.items()
        }
        model = dataclasses.replace(model, nodes=nodes)
        rep = mi_flow(model, data)
        mux = rep.muxes[0]
        assert mux.observed == pytest.approx(mux.lower_bound, abs=1e-9)

    def test_informative_side_is_a_floor(self):
        data, model = trained_toy(seed=4)
        rep = mi_flow(model, data)
        for mux in rep.muxes:
            assert mux.observed >= mux.lower_bound - 1e-9

    def test_bounds_hold_on_trained_models(self):
        for seed in range(5):
            data, model = trained_toy(seed=seed)
            assert check_bounds(mi_flow(model, data), tol=1e-6) == []

    def test_reproducible_given_model(self):
        data, model = trained_toy(seed=6)
        a = mi_flow(model, data)
        b = mi_flow(model, data)
        assert a == b

    def test_csv_output(self, tmp_path):
        data, model = trained_toy(seed=7)
        rep = mi_flow(model, data)
        out = tmp_path / "flow.csv"
        rep.to_csv(out)
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        kinds = {r["kind"] for r in rows}
        assert kinds == {"node", "mux"}
        assert len(rows) == len(rep.nodes) + len(rep.muxes)
        node0 = next(r for r in rows if r["kind"] == "node")
        assert float(node0["mi_in_y"]) >= 0.0


class TestKidneyFlow:
    """Information-flow profile on the real table (skipped until fetched)."""

    def test_max_mux_information_grows_with_depth(self, ckd_arff):
        from dinet.cli import DatasetConfig, ExperimentConfig, train_on
        from dinet.dataio import load_dataset, split

        cfg = ExperimentConfig()
        cfg.dataset = DatasetConfig(path=str(ckd_arff))
        data = load_dataset(ckd_arff, format="arff", target="class")
        train, _ = split(data, 200, seed=0, stratify="balanced",
                         positive_fraction=0.5, positive_label="ckd")
        model, qtrain = train_on(train, cfg, seed=0)
        rep = mi_flow(model, qtrain)
        per_layer_max = {}
        for mux in rep.muxes:
            per_layer_max[mux.layer] = max(per_layer_max.get(mux.layer, 0.0),
                                           mux.observed)
        layers = sorted(per_layer_max)
        values = [per_layer_max[i] for i in layers]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


class TestCheckBounds:
    def test_empty_report_is_clean(self):
        assert check_bounds(MIFlowReport(nodes=(), muxes=())) == []

    def test_detects_observed_above_upper(self):
        bad = MuxFlow(layer=0, position=3, stage=0,
                      lower_bound=0.1, observed=0.9, upper_bound=0.5)
        violations = check_bounds(MIFlowReport(nodes=(), muxes=(bad,)), tol=1e-6)
        assert len(violations) == 1
        assert "pos=3" in violations[0] and "above upper" in violations[0]

    def test_detects_observed_below_lower(self):
        bad = MuxFlow(layer=1, position=0, stage=1,
                      lower_bound=0.5, observed=0.2, upper_bound=0.9)
        violations = check_bounds(MIFlowReport(nodes=(), muxes=(bad,)))
        assert len(violations) == 1 and "below lower" in violations[0]

    def test_tolerance_is_respected(self):
        edge = MuxFlow(layer=0, position=0, stage=0,
                       lower_bound=0.5, observed=0.5 - 1e-9, upper_bound=0.6)
        assert check_bounds(MIFlowReport(nodes=(), muxes=(edge,)), tol=1e-6) == []
