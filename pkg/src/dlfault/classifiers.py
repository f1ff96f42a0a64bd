"""Multi-label diagnosers: KNN, CART decision tree, random forest.

All three use binary relevance (one independent binary model per fault type)
and train on identically normalized features. Training is deterministic for a
fixed seed; per-tree RNG streams are derived from the bundle seed via
SeedSequence so results do not depend on training order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    InvalidParams,
    ModelNotFitted,
)
from .features import N_FEATURES, NormParams, fit_normalizer, normalize
from .labels import FAULT_ORDER, FaultLabelSet

BUNDLE_VERSION = 1
N_LABELS = len(FAULT_ORDER)


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    labels: FaultLabelSet
    origin_id: str = ""


@dataclass(frozen=True)
class ClassifierConfig:
    k: int = 5
    max_depth: int = 10
    min_samples_split: int = 2
    n_trees: int = 50
    n_candidates: int = 12  # floor(sqrt(160))

    def __post_init__(self):
        if self.k < 1 or self.n_trees < 1:
            raise InvalidParams(f"k and n_trees must be >= 1 (k={self.k}, T={self.n_trees})")
        if self.max_depth < 1 or self.n_candidates < 1:
            raise InvalidParams("max_depth and n_candidates must be >= 1")


# -- decision trees -----------------------------------------------------------
#
# A tree is a flat node list. Each node is [feature, threshold, left, right,
# leaf_value]; feature == -1 marks a leaf. Branching: x[feature] <= threshold
# goes left.

def _grow_tree(X, y, cfg: ClassifierConfig, rng: Optional[np.random.Generator] = None):
    n, d = X.shape
    all_feats = np.arange(d, dtype=np.int64)
    nodes: list[list] = []

    def build(idx, depth):
        node_id = len(nodes)
        nodes.append(None)
        ys = y[idx]
        pos = int(ys.sum())
        cnt = idx.size
        leaf_val = 1 if 2 * pos >= cnt else 0
        done = (
            depth >= cfg.max_depth
            or cnt < cfg.min_samples_split
            or pos == 0
            or pos == cnt
        )
        if not done:
            if rng is None:
                feats = all_feats
            else:
                feats = np.sort(rng.choice(d, size=min(cfg.n_candidates, d), replace=False))
            f, thr, score = _kernels.best_split(
                np.ascontiguousarray(X[idx]), ys, feats.astype(np.int64)
            )
            neg = cnt - pos
            base = (pos * pos + neg * neg) / cnt
            if f >= 0 and score > base:
                mask = X[idx, f] <= thr
                left = build(idx[mask], depth + 1)
                right = build(idx[~mask], depth + 1)
                nodes[node_id] = [int(f), float(thr), left, right, leaf_val]
                return node_id
        nodes[node_id] = [-1, 0.0, -1, -1, leaf_val]
        return node_id

    build(np.arange(n), 0)
    return nodes


def _tree_predict(nodes, x) -> int:
    i = 0
    while True:
        f, thr, left, right, leaf_val = nodes[i]
        if f < 0:
            return leaf_val
        i = left if x[f] <= thr else right


def _forest_tree_seed(bundle_seed: int, label_idx: int, tree_idx: int) -> int:
    ss = np.random.SeedSequence([bundle_seed, label_idx, tree_idx])
    return int(ss.generate_state(1)[0])


# -- sub-model fit/predict ----------------------------------------------------

def fit(algorithm: str, data: list[LabeledSample], params: ClassifierConfig, seed: int = 0):
    """Fit one sub-model ("knn" | "tree" | "forest") on (pre-normalized) samples."""
    if not data:
        raise EmptyDataset("no training samples")
    X = np.ascontiguousarray([s.features for s in data], dtype=np.float64)
    Y = np.array([s.labels.to_bools() for s in data], dtype=np.uint8)
    if algorithm == "knn":
        return KnnModel(k=params.k, points=X, labels=Y)
    if algorithm == "tree":
        trees = [_grow_tree(X, Y[:, li], params) for li in range(N_LABELS)]
        return TreeModel(trees=trees)
    if algorithm == "forest":
        per_label = []
        for li in range(N_LABELS):
            seeds = [_forest_tree_seed(seed, li, t) for t in range(params.n_trees)]
            trees = []
            for s in seeds:
                rng = np.random.Generator(np.random.PCG64(s))
                boot = rng.integers(0, X.shape[0], size=X.shape[0])
                trees.append(_grow_tree(X[boot], Y[boot, li], params, rng=rng))
            per_label.append({"seeds": seeds, "trees": trees})
        return ForestModel(per_label=per_label)
    raise InvalidParams(f"unknown algorithm {algorithm!r}")


@dataclass
class KnnModel:
    k: int
    points: np.ndarray
    labels: np.ndarray

    def predict(self, x: np.ndarray) -> FaultLabelSet:
        if self.points is None or not len(self.points):
            raise ModelNotFitted("KNN has no training points")
        if x.shape[-1] != self.points.shape[1]:
            raise DimensionMismatch(
                f"query has {x.shape[-1]} dims, model expects {self.points.shape[1]}"
            )
        d2 = _kernels.sq_dists(self.points, np.ascontiguousarray(x, dtype=np.float64))
        # stable sort: distance ties resolved by training-set index
        order = np.argsort(d2, kind="stable")[: self.k]
        votes = self.labels[order].sum(axis=0)
        return FaultLabelSet.from_bools(2 * votes > self.k)


@dataclass
class TreeModel:
    trees: list  # one node list per label

    def predict(self, x: np.ndarray) -> FaultLabelSet:
        if not self.trees:
            raise ModelNotFitted("tree model is empty")
        return FaultLabelSet.from_bools(
            [_tree_predict(t, x) for t in self.trees]
        )


@dataclass
class ForestModel:
    per_label: list  # [{"seeds": [...], "trees": [node lists]}]

    def predict(self, x: np.ndarray) -> FaultLabelSet:
        if not self.per_label:
            raise ModelNotFitted("forest model is empty")
        bits = []
        for entry in self.per_label:
            trees = entry["trees"]
            pos = sum(_tree_predict(t, x) for t in trees)
            bits.append(2 * pos >= len(trees))  # tie -> positive
        return FaultLabelSet.from_bools(bits)


# -- bundle -------------------------------------------------------------------

@dataclass
class DiagnoserBundle:
    norm: NormParams
    knn: KnnModel
    tree: TreeModel
    forest: ForestModel
    config: ClassifierConfig
    seed: int

    def models(self):
        return {"knn": self.knn, "tree": self.tree, "forest": self.forest}

    def predict_union(self, raw_features: np.ndarray) -> FaultLabelSet:
        xn = normalize(raw_features, self.norm)
        out: set = set()
        for m in self.models().values():
            out |= m.predict(xn)
        return FaultLabelSet(out)

    def to_json(self) -> str:
        doc = {
            "version": BUNDLE_VERSION,
            "norm": {"lo": self.norm.lo.tolist(), "hi": self.norm.hi.tolist()},
            "knn": {
                "k": self.knn.k,
                "points": self.knn.points.tolist(),
                "labels": self.knn.labels.tolist(),
            },
            "tree": {"trees": self.tree.trees},
            "forest": {"per_label": self.forest.per_label},
            "meta": {"seed": self.seed, "config": asdict(self.config)},
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DiagnoserBundle":
        doc = json.loads(text)
        if doc.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {doc.get('version')!r}")
        cfg = ClassifierConfig(**doc["meta"]["config"])
        return cls(
            norm=NormParams(
                lo=np.array(doc["norm"]["lo"], dtype=np.float64),
                hi=np.array(doc["norm"]["hi"], dtype=np.float64),
            ),
            knn=KnnModel(
                k=doc["knn"]["k"],
                points=np.array(doc["knn"]["points"], dtype=np.float64),
                labels=np.array(doc["knn"]["labels"], dtype=np.uint8),
            ),
            tree=TreeModel(trees=doc["tree"]["trees"]),
            forest=ForestModel(per_label=doc["forest"]["per_label"]),
            config=cfg,
            seed=doc["meta"]["seed"],
        )


def train_diagnosers(
    data: list[LabeledSample],
    config: Optional[ClassifierConfig] = None,
    seed: int = 0,
) -> DiagnoserBundle:
    """Fit the normalizer and all three sub-models on one corpus."""
    if not data:
        raise EmptyDataset("no training samples")
    if len(data) < 2:
        raise EmptyDataset("need at least 2 training samples")
    if config is None:
        config = ClassifierConfig()
    for s in data:
        if len(s.features) != N_FEATURES:
            raise DimensionMismatch(
                f"sample {s.origin_id!r}: {len(s.features)} features, expected {N_FEATURES}"
            )
    norm = fit_normalizer([s.features for s in data])
    normed = [
        LabeledSample(normalize(s.features, norm), s.labels, s.origin_id) for s in data
    ]
    return DiagnoserBundle(
        norm=norm,
        knn=fit("knn", normed, config, seed),
        tree=fit("tree", normed, config, seed),
        forest=fit("forest", normed, config, seed),
        config=config,
        seed=seed,
    )


# -- diagnosis report ---------------------------------------------------------

@dataclass
class DiagnosisReport:
    per_run: list  # [{model_name: FaultLabelSet}]
    final: FaultLabelSet
    votes: dict  # fault name -> (run, model) prediction count

    def to_dict(self):
        return {
            "final": self.final.to_names(),
            "votes": self.votes,
            "per_run": [
                {m: ls.to_names() for m, ls in run.items()} for run in self.per_run
            ],
        }


def diagnose(bundle: DiagnoserBundle, runs: list[np.ndarray]) -> DiagnosisReport:
    """Union of per-model predictions over all runs, with vote counts."""
    if not runs:
        raise EmptyDataset("no feature vectors supplied")
    per_run = []
    votes = {ft.value: 0 for ft in FAULT_ORDER}
    final: set = set()
    for x in runs:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != N_FEATURES:
            raise DimensionMismatch(f"run has {x.shape[-1]} features, expected {N_FEATURES}")
        xn = normalize(x, bundle.norm)
        preds = {name: m.predict(xn) for name, m in bundle.models().items()}
        per_run.append(preds)
        for ls in preds.values():
            final |= ls
            for ft in ls:
                votes[ft.value] += 1
    return DiagnosisReport(per_run=per_run, final=FaultLabelSet(final), votes=votes)


# -- evaluation ---------------------------------------------------------------

@dataclass
class Metrics:
    exact_match_accuracy: float
    any_overlap_accuracy: float
    per_label: dict = field(default_factory=dict)  # name -> {"precision","recall"}

    def to_dict(self):
        return {
            "exact_match_accuracy": self.exact_match_accuracy,
            "any_overlap_accuracy": self.any_overlap_accuracy,
            "per_label": self.per_label,
        }


def evaluate(bundle: DiagnoserBundle, held_out: list[LabeledSample]) -> Metrics:
    if not held_out:
        raise EmptyDataset("no held-out samples")
    exact = 0
    overlap_num = 0
    overlap_den = 0
    tp = {ft: 0 for ft in FAULT_ORDER}
    fp = {ft: 0 for ft in FAULT_ORDER}
    fn = {ft: 0 for ft in FAULT_ORDER}
    for s in held_out:
        pred = bundle.predict_union(np.asarray(s.features, dtype=np.float64))
        if pred == s.labels:
            exact += 1
        if s.labels:
            overlap_den += 1
            if pred & s.labels:
                overlap_num += 1
        for ft in FAULT_ORDER:
            p, t = ft in pred, ft in s.labels
            if p and t:
                tp[ft] += 1
            elif p:
                fp[ft] += 1
            elif t:
                fn[ft] += 1
    per_label = {}
    for ft in FAULT_ORDER:
        prec_den = tp[ft] + fp[ft]
        rec_den = tp[ft] + fn[ft]
        per_label[ft.value] = {
            "precision": tp[ft] / prec_den if prec_den else 0.0,
            "recall": tp[ft] / rec_den if rec_den else 0.0,
        }
    return Metrics(
        exact_match_accuracy=exact / len(held_out),
        any_overlap_accuracy=overlap_num / overlap_den if overlap_den else 1.0,
        per_label=per_label,
    )
