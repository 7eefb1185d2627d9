"""Layered tree of compression nodes joined by lossless multiplexers.

Layer 0 holds one node per feature.  Adjacent node outputs are merged two
at a time by mixed-radix multiplexers (an odd layer ends with one 3-way
merge) and the column count shrinks until a single node remains, whose
output alphabet is the class alphabet.  Layers train in order: each node
solves its own bottleneck problem against the target, then stochastically
emits the symbol stream the next layer trains on.

Every random draw comes from a stream derived from (master seed, layer,
position, purpose), so training and prediction are reproducible and nodes
never share randomness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SchemaMismatchError, ValidationError
from .ib import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    IBDiagnostics,
    IBProblem,
    estimate_empirical,
    solve_ib,
)
from .infotheory import ConditionalMatrix, mutual_information_raw
from .quantizer import QuantizedDataset, apply_quantizer

# stream purposes for seed derivation
_STREAM_IB = 1
_STREAM_TRAIN_SAMPLE = 2
_STREAM_PREDICT = 3
_STREAM_MIFLOW = 4


def derive_seed(*parts: int) -> int:
    """Deterministically hash integer key parts into a fresh solver seed."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def stream_rng(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))


# ---------------------------------------------------------------------------
# topology

@dataclass(frozen=True)
class LayerSpec:
    n_in: tuple          # per-node input cardinality
    n_out: tuple         # per-node output cardinality

    @property
    def size(self) -> int:
        return len(self.n_in)


@dataclass(frozen=True)
class Topology:
    """Layer shapes plus the grouping of each layer's nodes into muxes.

    ``mux_groups[i][k]`` lists the layer-i node indices whose outputs are
    combined into the input of node k at layer i+1 (first member is the
    low-order digit).
    """

    layers: tuple
    mux_groups: tuple

    def __post_init__(self):
        if len(self.mux_groups) != len(self.layers) - 1:
            raise ValidationError("need one mux stage between consecutive layers")
        for i, groups in enumerate(self.mux_groups):
            prev, nxt = self.layers[i], self.layers[i + 1]
            if len(groups) != nxt.size:
                raise ValidationError(f"layer {i + 1}: one group per node required")
            covered = [m for g in groups for m in g]
            if sorted(covered) != list(range(prev.size)):
                raise ValidationError(f"layer {i}: groups must partition the layer")
            for k, g in enumerate(groups):
                expect = 1
                for m in g:
                    expect *= prev.n_out[m]
                if expect != nxt.n_in[k]:
                    raise ValidationError(
                        f"node ({i + 1},{k}): input cardinality {nxt.n_in[k]} "
                        f"!= product of feeding outputs {expect}")
        if self.layers[-1].size != 1:
            raise ValidationError("final layer must hold exactly one node")

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def layer_sizes(self) -> tuple:
        return tuple(layer.size for layer in self.layers)

    @property
    def n_nodes(self) -> int:
        return sum(self.layer_sizes)

    @property
    def n_mixers(self) -> int:
        return sum(len(g) for g in self.mux_groups)

    @property
    def n_class(self) -> int:
        return self.layers[-1].n_out[0]


def _group_layer(size: int):
    """Pair adjacent nodes; an odd layer (>1) ends with one arity-3 group."""
    if size % 2 == 0:
        return tuple(tuple(range(2 * k, 2 * k + 2)) for k in range(size // 2))
    groups = [tuple(range(2 * k, 2 * k + 2)) for k in range(size // 2 - 1)]
    groups.append((size - 3, size - 2, size - 1))
    return tuple(groups)


def build_topology(D: int, n_out_per_layer, n_class: int,
                   feature_cardinalities) -> Topology:
    """Construct the standard tree for D features.

    ``n_out_per_layer`` supplies one output cardinality per layer and its
    last entry must equal ``n_class``.
    """
    if D < 1:
        raise ConfigError(f"need at least one feature, got {D}")
    cards = tuple(int(c) for c in feature_cardinalities)
    if len(cards) != D:
        raise ConfigError(f"{len(cards)} feature cardinalities for D={D}")
    if any(c < 1 for c in cards):
        raise ConfigError("feature cardinalities must be >= 1")

    sizes = [D]
    while sizes[-1] > 1:
        sizes.append(len(_group_layer(sizes[-1])))
    n_out = [int(v) for v in n_out_per_layer]
    if len(n_out) != len(sizes):
        raise ConfigError(
            f"n_out_per_layer has {len(n_out)} entries but this tree has "
            f"{len(sizes)} layers (sizes {sizes})")
    if any(v < 1 for v in n_out):
        raise ConfigError("n_out values must be >= 1")
    if n_out[-1] != n_class:
        raise ConfigError(
            f"final layer n_out must equal the class count {n_class}, got {n_out[-1]}")

    layers = [LayerSpec(n_in=cards, n_out=(n_out[0],) * D)]
    mux_groups = []
    for i in range(1, len(sizes)):
        groups = _group_layer(sizes[i - 1])
        prev = layers[i - 1]
        n_in = tuple(int(np.prod([prev.n_out[m] for m in g])) for g in groups)
        layers.append(LayerSpec(n_in=n_in, n_out=(n_out[i],) * sizes[i]))
        mux_groups.append(groups)
    return Topology(layers=tuple(layers), mux_groups=tuple(mux_groups))


# ---------------------------------------------------------------------------
# multiplexers

def mux_combine(inputs, radices) -> np.ndarray:
    """Losslessly pack parallel symbol vectors into one mixed-radix vector.

    The first input is the low-order digit: out = v0 + r0*v1 + r0*r1*v2 + ...
    """
    if len(inputs) != len(radices):
        raise ValidationError("need one radix per input vector")
    if len(inputs) < 2:
        raise ValidationError("a multiplexer combines at least two inputs")
    vecs = [np.asarray(v, dtype=np.int64) for v in inputs]
    n = vecs[0].size
    out = np.zeros(n, dtype=np.int64)
    scale = 1
    for v, r in zip(vecs, radices):
        if v.size != n:
            raise ValidationError("input vectors must share one length")
        if v.size and (v.min() < 0 or v.max() >= r):
            raise ValidationError(f"symbol outside [0, {r})")
        out += scale * v
        scale *= int(r)
    return out


def mux_split(symbols, radices):
    """Inverse of mux_combine: recover the digit vectors."""
    s = np.asarray(symbols, dtype=np.int64)
    total = int(np.prod([int(r) for r in radices]))
    if s.size and (s.min() < 0 or s.max() >= total):
        raise ValidationError(f"symbol outside [0, {total})")
    out = []
    for r in radices:
        out.append(s % int(r))
        s = s // int(r)
    return out


# ---------------------------------------------------------------------------
# trained model

@dataclass(frozen=True)
class TrainedNode:
    channel: ConditionalMatrix
    n_in: int
    n_out: int
    diagnostics: IBDiagnostics
    mi_in_y: float           # I(input; target) on the training estimates
    mi_out_y: float          # I(output; target) induced by the learned channel


@dataclass(frozen=True)
class DINModel:
    topology: Topology
    nodes: dict              # (layer, position) -> TrainedNode
    quantizers: tuple        # FeatureSpec per feature ([] when trained on symbols)
    feature_names: tuple
    class_names: tuple
    class_alignment: tuple   # final output symbol -> class label index
    beta: float
    seed: int

    def __post_init__(self):
        if len(self.nodes) != self.topology.n_nodes:
            raise ValidationError("one trained node per topology slot required")
        align = tuple(int(a) for a in self.class_alignment)
        if sorted(align) != list(range(self.topology.n_class)):
            raise ValidationError("class_alignment must be a bijection on the classes")
        object.__setattr__(self, "class_alignment", align)

    @property
    def n_class(self) -> int:
        return self.topology.n_class


def sample_channel(channel: np.ndarray, symbols: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw one output symbol per element, row ``symbols[n]`` of the channel."""
    cum = np.cumsum(channel, axis=1)
    u = rng.random(symbols.size)
    out = (u[:, None] > cum[symbols]).sum(axis=1)
    return np.minimum(out, channel.shape[1] - 1).astype(np.int64)


def _align_classes(py_given_out: np.ndarray) -> tuple:
    """Bijection from final output symbols to classes by maximum posterior.

    Greedy on descending posterior mass, so it reduces to per-symbol argmax
    whenever that is already collision-free; ties go to the smaller class.
    """
    n = py_given_out.shape[0]
    pairs = sorted(
        ((j, m) for j in range(n) for m in range(n)),
        key=lambda jm: (-py_given_out[jm[0], jm[1]], jm[0], jm[1]),
    )
    assign = {}
    used = set()
    for j, m in pairs:
        if j not in assign and m not in used:
            assign[j] = m
            used.add(m)
    return tuple(assign[j] for j in range(n))


def _propagate(topology, channels, columns, rngs):
    """Push symbol columns through the tree, sampling each node's output.

    ``rngs(layer, pos)`` must return the generator for that node's draw.
    Returns the final node's raw output symbols.
    """
    current = [np.asarray(c, dtype=np.int64) for c in columns]
    for layer_idx, layer in enumerate(topology.layers):
        sampled = [
            sample_channel(channels[(layer_idx, k)], current[k], rngs(layer_idx, k))
            for k in range(layer.size)
        ]
        if layer_idx == topology.depth:
            return sampled[0]
        groups = topology.mux_groups[layer_idx]
        current = [
            mux_combine([sampled[m] for m in g], [layer.n_out[m] for m in g])
            for g in groups
        ]


def train_network(data: QuantizedDataset, topology: Topology, beta: float,
                  tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  seed: int = 0, quantizers=(), feature_names=(),
                  class_names=()) -> DINModel:
    """Train the tree layer by layer on quantized columns.

    Each node gets empirical estimates from its (possibly sampled) input
    stream, solves its bottleneck problem, then emits one stochastic
    realization that feeds the muxes of the next layer.  A node that fails
    to converge is recorded in its diagnostics, not fatal.
    """
    if data.n_features != topology.layers[0].size:
        raise SchemaMismatchError(
            f"dataset has {data.n_features} features, topology expects "
            f"{topology.layers[0].size}")
    if tuple(data.cardinalities) != tuple(topology.layers[0].n_in):
        raise SchemaMismatchError(
            f"feature cardinalities {tuple(data.cardinalities)} do not match "
            f"topology layer 0 {tuple(topology.layers[0].n_in)}")
    if data.n_class != topology.n_class:
        raise SchemaMismatchError(
            f"dataset has {data.n_class} classes, topology expects {topology.n_class}")

    y = data.labels
    nodes = {}
    channels = {}
    current = [np.asarray(c, dtype=np.int64) for c in data.columns]
    final_solution = None
    for layer_idx, layer in enumerate(topology.layers):
        sampled = []
        for k in range(layer.size):
            px, py_x = estimate_empirical(current[k], y, layer.n_in[k], data.n_class)
            problem = IBProblem(px=px, py_given_x=py_x, beta=beta, n_out=layer.n_out[k])
            sol = solve_ib(problem, tol=tol, max_iter=max_iter,
                           seed=derive_seed(seed, _STREAM_IB, layer_idx, k))
            nodes[(layer_idx, k)] = TrainedNode(
                channel=sol.channel,
                n_in=layer.n_in[k],
                n_out=layer.n_out[k],
                diagnostics=sol.diagnostics,
                mi_in_y=mutual_information_raw(px.probs, py_x.p),
                mi_out_y=sol.diagnostics.i_y_out,
            )
            channels[(layer_idx, k)] = sol.channel.p
            rng = stream_rng(seed, _STREAM_TRAIN_SAMPLE, layer_idx, k)
            sampled.append(sample_channel(sol.channel.p, current[k], rng))
            if layer_idx == topology.depth:
                final_solution = sol
        if layer_idx < topology.depth:
            groups = topology.mux_groups[layer_idx]
            current = [
                mux_combine([sampled[m] for m in g], [layer.n_out[m] for m in g])
                for g in groups
            ]

    alignment = _align_classes(final_solution.py_given_out.p)
    return DINModel(
        topology=topology,
        nodes=nodes,
        quantizers=tuple(quantizers),
        feature_names=tuple(feature_names),
        class_names=tuple(class_names),
        class_alignment=alignment,
        beta=float(beta),
        seed=int(seed),
    )


def predict_quantized(model: DINModel, data: QuantizedDataset, seed: int = 0,
                      mode: str = "stochastic", repeats: int = 25) -> np.ndarray:
    """Class label indices for already-quantized rows.

    ``stochastic`` runs one sampled pass; ``ensemble`` repeats it and takes
    a per-row majority vote (ties to the smaller label).  Repeat r of an
    ensemble equals a stochastic pass seeded with derived seed (seed, r),
    so ensemble with repeats=1 reproduces stochastic exactly.
    """
    if tuple(data.cardinalities) != tuple(model.topology.layers[0].n_in):
        raise SchemaMismatchError("dataset cardinalities do not match the model")
    channels = {key: node.channel.p for key, node in model.nodes.items()}
    align = np.asarray(model.class_alignment, dtype=np.int64)

    def one_pass(r):
        rngs = lambda layer, pos: stream_rng(seed, _STREAM_PREDICT, r, layer, pos)
        return align[_propagate(model.topology, channels, data.columns, rngs)]

    if mode == "stochastic":
        return one_pass(0)
    if mode != "ensemble":
        raise ValidationError(f"unknown prediction mode {mode!r}")
    if repeats < 1:
        raise ValidationError("ensemble needs repeats >= 1")
    votes = np.zeros((data.n_rows, model.n_class), dtype=np.int64)
    rows = np.arange(data.n_rows)
    for r in range(repeats):
        votes[rows, one_pass(r)] += 1
    return votes.argmax(axis=1)


def quantize_features(model: DINModel, dataset) -> QuantizedDataset:
    """Quantize a raw dataset with the model's fitted specs."""
    if not model.quantizers:
        raise SchemaMismatchError("model carries no quantizers; pass quantized data")
    if tuple(dataset.feature_names) != tuple(model.feature_names):
        missing = set(model.feature_names) - set(dataset.feature_names)
        detail = f"; missing column(s) {sorted(missing)}" if missing else ""
        raise SchemaMismatchError(
            f"dataset columns {list(dataset.feature_names)} do not match the "
            f"model's features{detail}")
    if tuple(dataset.classes) != tuple(model.class_names):
        raise SchemaMismatchError(
            f"dataset classes {list(dataset.classes)} do not match the model's "
            f"{list(model.class_names)}")
    columns = [
        apply_quantizer(spec, dataset.columns[i])
        for i, spec in enumerate(model.quantizers)
    ]
    return QuantizedDataset(
        columns=tuple(columns),
        cardinalities=tuple(s.cardinality for s in model.quantizers),
        labels=dataset.label_indices(),
        n_class=len(model.class_names),
    )


def predict(model: DINModel, dataset, seed: int = 0, mode: str = "stochastic",
            repeats: int = 25) -> np.ndarray:
    """Class label indices for raw rows (quantize, propagate, align)."""
    return predict_quantized(model, quantize_features(model, dataset),
                             seed=seed, mode=mode, repeats=repeats)
