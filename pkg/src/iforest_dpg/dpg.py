"""Decision predicate graph construction from a fitted isolation forest.

Every training sample is re-routed through every tree; the satisfied split
predicates form one labeled trace per (tree, sample) pair. Outlier traces
that reach the depth cap are pruned, split values are dropped so predicates
collapse to (feature, sign) pairs, and the surviving transitions are
aggregated into a weighted directed graph between predicate nodes, a virtual
source, and the two class terminals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .forest import INLIER, OUTLIER, Dataset, FlatTree, ForestModel, SingleClassError

LE = "<="
GT = ">"

SOURCE_ID = "SOURCE"
INLIER_ID = "INLIER"
OUTLIER_ID = "OUTLIER"


class PredicateTriple(NamedTuple):
    feature_index: int
    sign: str
    split_value: float


class Predicate(NamedTuple):
    feature_index: int
    sign: str


def predicate_id(p: Predicate | PredicateTriple) -> str:
    """Stable node id, e.g. (3, "<=") -> "F3_LE"."""
    return f"F{p.feature_index}_{'LE' if p.sign == LE else 'GT'}"


def predicate_label(p: Predicate, feature_names: list[str] | None = None) -> str:
    """Display label, e.g. "F3 <=" or "TSH >" when feature names are known."""
    name = feature_names[p.feature_index] if feature_names else f"F{p.feature_index}"
    return f"{name} {p.sign}"


@dataclass(slots=True)
class TraceList:
    """Ordered predicates satisfied by one sample traversing one tree."""

    sample_index: int
    tree_index: int
    predicates: list
    class_label: str


@dataclass(frozen=True)
class ClassWeights:
    """Imbalance-correcting transition multipliers from sample counts."""

    w_o: float
    w_i: float
    n_o: int
    n_i: int


def class_weights(n_o: int, n_i: int) -> ClassWeights:
    """w_o = (N_o + N_i)/N_o and w_i = (N_o + N_i)/N_i."""
    if n_o < 1 or n_i < 1:
        raise SingleClassError("single-class dataset; weighting undefined")
    total = n_o + n_i
    return ClassWeights(w_o=total / n_o, w_i=total / n_i, n_o=n_o, n_i=n_i)


@dataclass
class DpGraph:
    """Weighted directed graph over predicate nodes plus SOURCE/INLIER/OUTLIER.

    `edges` maps (src_id, dst_id) to accumulated weighted frequency. The
    virtual source carries path-start flow so every predicate node has
    positive inflow and flow conservation holds; it is hidden in rendered
    output by default. Treat instances as immutable once built.
    """

    predicates: list[Predicate]
    edges: dict[tuple[str, str], float]
    weights: ClassWeights
    metadata: dict = field(default_factory=dict)

    def node_ids(self) -> list[str]:
        ids = [SOURCE_ID]
        ids.extend(predicate_id(p) for p in self.predicates)
        ids.extend([INLIER_ID, OUTLIER_ID])
        return ids

    def edge_weight(self, src: str, dst: str) -> float:
        return self.edges.get((src, dst), 0.0)

    def incoming_weight(self, node: str) -> float:
        return sum(w for (_, dst), w in self.edges.items() if dst == node)

    def outgoing_weight(self, node: str) -> float:
        return sum(w for (src, _), w in self.edges.items() if src == node)


def node_sort_key(node_id: str) -> tuple:
    """Deterministic node order: SOURCE, predicates by (feature, LE, GT), terminals."""
    if node_id == SOURCE_ID:
        return (0, 0, 0)
    if node_id == INLIER_ID:
        return (2, 0, 0)
    if node_id == OUTLIER_ID:
        return (2, 1, 0)
    feature, sign = node_id[1:].rsplit("_", 1)
    return (1, int(feature), 0 if sign == "LE" else 1)


def _tree_paths(
    flat: FlatTree, X: np.ndarray, depth_cap: int, record_values: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Predicate codes along each sample's root-to-leaf path in one tree.

    Returns (codes, lengths, values): codes is (n, depth_cap) of
    2*feature + went_right with -1 padding, lengths the per-sample number of
    predicates, values the split thresholds when requested.
    """
    n = len(X)
    codes = np.full((n, depth_cap), -1, dtype=np.int32)
    values = np.full((n, depth_cap), np.nan) if record_values else None
    lengths = np.zeros(n, dtype=np.int32)
    cur = np.zeros(n, dtype=np.int32)
    rows = np.arange(n)
    for step in range(depth_cap):
        f = flat.feature[cur]
        internal = f >= 0
        if not internal.any():
            break
        thr = flat.threshold[cur]
        go_right = X[rows, np.where(internal, f, 0)] > thr
        step_codes = 2 * f + go_right
        codes[internal, step] = step_codes[internal]
        if values is not None:
            values[internal, step] = thr[internal]
        lengths[internal] += 1
        nxt = np.where(go_right, flat.right[cur], flat.left[cur])
        cur = np.where(internal, nxt, cur)
    return codes, lengths, values


def traverse(model: ForestModel, data: Dataset) -> list[TraceList]:
    """One labeled TraceList of (feature, sign, value) triples per (tree, sample).

    `data` must be the training dataset; class labels are copied from the
    model. Traces are ordered by (tree_index, sample_index). Materializes
    n_trees * n_samples objects, so prefer `build_model_graph` for large runs.
    """
    if data.n_samples != model.n_train:
        raise ValueError(
            f"dataset has {data.n_samples} samples but model was trained on {model.n_train}"
        )
    X = data.features
    depth_cap = model.max_depth
    labels = model.labels
    traces: list[TraceList] = []
    for t, flat in enumerate(model.flat_trees()):
        if flat.feature.max(initial=-1) >= data.n_features:
            raise ValueError("model splits on features beyond the dataset width")
        codes, lengths, values = _tree_paths(flat, X, depth_cap, record_values=True)
        for s in range(len(X)):
            preds = [
                PredicateTriple(int(codes[s, j]) // 2, LE if codes[s, j] % 2 == 0 else GT, float(values[s, j]))
                for j in range(lengths[s])
            ]
            traces.append(
                TraceList(
                    sample_index=s,
                    tree_index=t,
                    predicates=preds,
                    class_label=str(labels[s]),
                )
            )
    return traces


def prune_deep_outlier_traces(traces: list[TraceList], dmax: int) -> list[TraceList]:
    """Drop Outlier traces whose predicate list reached the depth cap.

    A leaf at depth >= dmax was force-stopped rather than isolated early, so
    it carries no outlier evidence. Inlier traces are always kept.
    """
    return [
        tr
        for tr in traces
        if not (tr.class_label == OUTLIER and len(tr.predicates) >= dmax)
    ]


def collapse(traces: list[TraceList]) -> list[TraceList]:
    """Project triples to (feature, sign) pairs, preserving order and repeats.

    Consecutive duplicates are retained; they become self-loop transitions.
    """
    return [
        TraceList(
            sample_index=tr.sample_index,
            tree_index=tr.tree_index,
            predicates=[Predicate(p.feature_index, p.sign) for p in tr.predicates],
            class_label=tr.class_label,
        )
        for tr in traces
    ]


def build_graph(
    traces: list[TraceList], weights: ClassWeights, metadata: dict | None = None
) -> DpGraph:
    """Aggregate collapsed traces into the weighted predicate-transition graph.

    Each trace contributes its class weight to (SOURCE -> first predicate),
    every consecutive pair, and (last predicate -> class terminal); traces
    with no predicates route SOURCE directly to their terminal. Accumulation
    follows the given trace order, so results are reproducible bit for bit.
    """
    if not traces:
        raise ValueError("cannot build a graph from zero traces")
    by_class = {INLIER: 0, OUTLIER: 0}
    for tr in traces:
        by_class[tr.class_label] += 1
    if min(by_class.values()) == 0:
        missing = INLIER if by_class[INLIER] == 0 else OUTLIER
        raise SingleClassError(
            f"no {missing} traces remain; graph would be single-class"
        )

    edges: dict[tuple[str, str], float] = {}
    seen: set[Predicate] = set()
    terminal = {INLIER: INLIER_ID, OUTLIER: OUTLIER_ID}
    for tr in traces:
        w = weights.w_o if tr.class_label == OUTLIER else weights.w_i
        prev = SOURCE_ID
        for p in tr.predicates:
            seen.add(p)
            key = (prev, predicate_id(p))
            edges[key] = edges.get(key, 0.0) + w
            prev = predicate_id(p)
        key = (prev, terminal[tr.class_label])
        edges[key] = edges.get(key, 0.0) + w

    predicates = sorted(seen, key=lambda p: (p.feature_index, 0 if p.sign == LE else 1))
    return DpGraph(
        predicates=predicates,
        edges=edges,
        weights=weights,
        metadata=dict(metadata or {}),
    )


def build_model_graph(model: ForestModel, data: Dataset) -> DpGraph:
    """Fused traverse -> prune -> collapse -> weight -> build pipeline.

    Produces the same graph as composing the individual steps (verified by
    tests) but accumulates transitions from padded code matrices per tree,
    which keeps large runs fast. Edge weights are added in (tree, sample,
    step) order, matching the per-trace route exactly.
    """
    if data.n_samples != model.n_train:
        raise ValueError(
            f"dataset has {data.n_samples} samples but model was trained on {model.n_train}"
        )
    weights = class_weights(model.outlier_count(), model.inlier_count())
    X = data.features
    n = data.n_samples
    d = data.n_features
    depth_cap = model.max_depth
    outlier_mask = model.labels == OUTLIER
    sample_w = np.where(outlier_mask, weights.w_o, weights.w_i)

    # Node indexing for the dense accumulator: predicates 0..2d-1, then
    # SOURCE, INLIER, OUTLIER.
    k = 2 * d
    src_idx, inl_idx, out_idx = k, k + 1, k + 2
    dense = np.zeros((k + 3, k + 3))
    terminal = np.where(outlier_mask, out_idx, inl_idx).astype(np.int32)

    pruned = 0
    kept_by_class = {INLIER: 0, OUTLIER: 0}
    for flat in model.flat_trees():
        if flat.feature.max(initial=-1) >= d:
            raise ValueError("model splits on features beyond the dataset width")
        codes, lengths, _ = _tree_paths(flat, X, depth_cap, record_values=False)
        keep = ~(outlier_mask & (lengths >= depth_cap))
        pruned += int(n - keep.sum())
        kept_by_class[OUTLIER] += int(np.count_nonzero(outlier_mask & keep))
        kept_by_class[INLIER] += int(np.count_nonzero(~outlier_mask))

        codes = codes[keep]
        lens = lengths[keep]
        m = len(codes)
        # Per-sample node sequence SOURCE, p_1..p_L, terminal in one padded
        # matrix; consecutive columns are the transition endpoints.
        seq = np.full((m, depth_cap + 2), -1, dtype=np.int32)
        seq[:, 0] = src_idx
        seq[:, 1 : depth_cap + 1] = codes
        seq[np.arange(m), lens + 1] = terminal[keep]
        valid = np.arange(depth_cap + 1)[None, :] <= lens[:, None]
        srcs = seq[:, :-1][valid]
        dsts = seq[:, 1:][valid]
        w = np.broadcast_to(sample_w[keep][:, None], valid.shape)[valid]
        np.add.at(dense, (srcs, dsts), w)

    if kept_by_class[OUTLIER] == 0:
        raise SingleClassError("no Outlier traces remain; graph would be single-class")
    if kept_by_class[INLIER] == 0:
        raise SingleClassError("no Inlier traces remain; graph would be single-class")

    id_of = (
        [predicate_id(Predicate(c // 2, LE if c % 2 == 0 else GT)) for c in range(k)]
        + [SOURCE_ID, INLIER_ID, OUTLIER_ID]
    )
    edges: dict[tuple[str, str], float] = {}
    order = [src_idx] + list(range(k)) + [inl_idx, out_idx]
    for a in order:
        for b in order:
            if dense[a, b] > 0.0:
                edges[(id_of[a], id_of[b])] = float(dense[a, b])

    present = dense.sum(axis=0) + dense.sum(axis=1)
    predicates = [
        Predicate(c // 2, LE if c % 2 == 0 else GT) for c in range(k) if present[c] > 0.0
    ]
    rule = model.params.label_rule
    metadata = {
        "n_trees": model.params.n_trees,
        "max_subsample": model.params.max_subsample,
        "seed": model.params.seed,
        "leaf_adjustment": model.params.leaf_adjustment,
        "label_rule": (
            {"kind": "contamination", "fraction": rule.fraction}
            if hasattr(rule, "fraction")
            else {"kind": "score_threshold", "threshold": rule.threshold}
        ),
        "n_train": model.n_train,
        "subsample_size": model.subsample_size,
        "max_depth": depth_cap,
        "n_outliers": weights.n_o,
        "n_inliers": weights.n_i,
        "traces_total": model.params.n_trees * n,
        "traces_pruned": pruned,
        "feature_names": list(data.feature_names),
    }
    return DpGraph(predicates=predicates, edges=edges, weights=weights, metadata=metadata)
