"""Verification oracles and information-flow diagnostics for trained trees.

``compose_full_matrix`` collapses the whole tree into one conditional
matrix from joint quantized input to class, via Kronecker products taken
in the same mixed-radix order the multiplexers use (first input = low
order digit).  ``mi_flow`` re-propagates a dataset and reports plug-in
information estimates per node plus, per multiplexer, the sandwich

    max(I(a;y), I(b;y)) <= I(mux(a,b);y) <= min(I(a;y)+H(b), I(b;y)+H(a))

which holds exactly for plug-in estimates taken from one sample.
Three-way muxes are checked by chaining two pairwise applications.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import SchemaMismatchError, ValidationError
from .infotheory import ConditionalMatrix, entropy_raw, joint_mi_raw
from .network import DINModel, _STREAM_MIFLOW, mux_combine, sample_channel, stream_rng
from .quantizer import QuantizedDataset

DEFAULT_STATE_CAP = 1 << 20


@dataclass(frozen=True)
class NodeFlow:
    layer: int
    position: int
    mi_in_y: float
    mi_out_y: float
    h_out: float


@dataclass(frozen=True)
class MuxFlow:
    layer: int            # layer of the mux inputs
    position: int         # group index within that mux stage
    stage: int            # 0 for pairwise, 0/1 for a chained 3-way mux
    lower_bound: float
    observed: float
    upper_bound: float


@dataclass(frozen=True)
class MIFlowReport:
    nodes: tuple
    muxes: tuple

    def to_csv(self, path) -> None:
        """Flat CSV: one row per node or mux, quantities in bits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "layer", "position", "stage",
                        "mi_in_y", "mi_out_y", "h_out",
                        "lower_bound", "observed", "upper_bound"])
            for n in self.nodes:
                w.writerow(["node", n.layer, n.position, "",
                            repr(n.mi_in_y), repr(n.mi_out_y), repr(n.h_out),
                            "", "", ""])
            for m in self.muxes:
                w.writerow(["mux", m.layer, m.position, m.stage, "", "", "",
                            repr(m.lower_bound), repr(m.observed),
                            repr(m.upper_bound)])


def compose_full_matrix(model: DINModel, max_states: int = DEFAULT_STATE_CAP) -> ConditionalMatrix:
    """Collapse the tree into one joint-input -> class conditional matrix.

    Row index is the mixed-radix packing of the quantized feature symbols
    (feature 0 = low-order digit); columns are class labels, i.e. the final
    node's outputs permuted by the model's class alignment.
    """
    cards = model.topology.layers[0].n_in
    n_states = int(np.prod([int(c) for c in cards], dtype=object))
    if n_states > max_states:
        raise ValidationError(
            f"joint input space has {n_states} states, above the cap "
            f"{max_states}; raise max_states to force the computation")

    topo = model.topology

    def matrix_for(layer: int, pos: int) -> np.ndarray:
        channel = model.nodes[(layer, pos)].channel.p
        if layer == 0:
            return channel
        group = topo.mux_groups[layer - 1][pos]
        kron = matrix_for(layer - 1, group[0])
        for member in group[1:]:
            # later members are higher-order digits -> left operand of kron
            kron = np.kron(matrix_for(layer - 1, member), kron)
        return kron @ channel

    full = matrix_for(topo.depth, 0)
    aligned = np.empty_like(full)
    for j, cls in enumerate(model.class_alignment):
        aligned[:, cls] = full[:, j]
    return ConditionalMatrix(aligned)


def _plugin_joint(a: np.ndarray, b: np.ndarray, card_a: int, card_b: int) -> np.ndarray:
    counts = np.bincount(a * card_b + b, minlength=card_a * card_b)
    return counts.reshape(card_a, card_b).astype(np.float64) / a.size


def _marginal(v: np.ndarray, card: int) -> np.ndarray:
    return np.bincount(v, minlength=card).astype(np.float64) / v.size


def mi_flow(model: DINModel, data: QuantizedDataset, seed: int | None = None) -> MIFlowReport:
    """Re-propagate data through the model and report plug-in MI per node/mux.

    Sampling streams derive from the model's stored seed unless overridden,
    so the report is reproducible for a given model.
    """
    topo = model.topology
    if tuple(data.cardinalities) != tuple(topo.layers[0].n_in):
        raise SchemaMismatchError("dataset cardinalities do not match the model")
    base = model.seed if seed is None else seed
    y = data.labels
    card_y = data.n_class

    def mi_with_y(v, card):
        return joint_mi_raw(_plugin_joint(v, y, card, card_y))

    nodes = []
    muxes = []
    current = [np.asarray(c, dtype=np.int64) for c in data.columns]
    for layer_idx, layer in enumerate(topo.layers):
        sampled = []
        for k in range(layer.size):
            chan = model.nodes[(layer_idx, k)].channel.p
            rng = stream_rng(base, _STREAM_MIFLOW, layer_idx, k)
            out = sample_channel(chan, current[k], rng)
            sampled.append(out)
            nodes.append(NodeFlow(
                layer=layer_idx,
                position=k,
                mi_in_y=mi_with_y(current[k], layer.n_in[k]),
                mi_out_y=mi_with_y(out, layer.n_out[k]),
                h_out=entropy_raw(_marginal(out, layer.n_out[k])),
            ))
        if layer_idx == topo.depth:
            break
        groups = topo.mux_groups[layer_idx]
        nxt = []
        for g_idx, g in enumerate(groups):
            acc = sampled[g[0]]
            acc_card = layer.n_out[g[0]]
            for stage, member in enumerate(g[1:]):
                other = sampled[member]
                other_card = layer.n_out[member]
                combined = mux_combine([acc, other], [acc_card, other_card])
                i_acc = mi_with_y(acc, acc_card)
                i_other = mi_with_y(other, other_card)
                h_acc = entropy_raw(_marginal(acc, acc_card))
                h_other = entropy_raw(_marginal(other, other_card))
                muxes.append(MuxFlow(
                    layer=layer_idx,
                    position=g_idx,
                    stage=stage,
                    lower_bound=max(i_acc, i_other),
                    observed=mi_with_y(combined, acc_card * other_card),
                    upper_bound=min(i_acc + h_other, i_other + h_acc),
                ))
                acc, acc_card = combined, acc_card * other_card
            nxt.append(acc)
        current = nxt
    return MIFlowReport(nodes=tuple(nodes), muxes=tuple(muxes))


def check_bounds(report: MIFlowReport, tol: float = 1e-6):
    """Violations of the mux sandwich, empty when every mux is inside it."""
    out = []
    for m in report.muxes:
        if m.observed < m.lower_bound - tol:
            out.append(
                f"mux layer={m.layer} pos={m.position} stage={m.stage}: observed "
                f"{m.observed:.9f} below lower bound {m.lower_bound:.9f}")
        if m.observed > m.upper_bound + tol:
            out.append(
                f"mux layer={m.layer} pos={m.position} stage={m.stage}: observed "
                f"{m.observed:.9f} above upper bound {m.upper_bound:.9f}")
    return out
