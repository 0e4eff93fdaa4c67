"""Evaluation suite: triplet accuracy, clustering quality of the learned
embeddings, linear and nearest-anchor probes, and the worker preference
report.

Views are concatenated into one V*D vector per item for clustering,
linear and anchor evaluation. k-means is implemented here (k-means++
seeding, Lloyd iterations to an assignment fixpoint); agglomerative
clustering delegates to scipy's average-linkage hierarchy.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from . import objective
from .crowdsim import DatasetManifest, render_items
from .model import EncoderConfig, ModelParams, forward_batch


def triplet_accuracy(params, config, items, triplets, use_entropy: bool = True) -> float:
    """Fraction of triplets whose annotated pair gets the strictly
    highest choice probability; exact ties count as incorrect."""
    X, ii, jj, kk, wrows = objective._resolve(params, items, triplets)
    Y = forward_batch(params, config, X)
    E = np.moveaxis(objective._pair_exponents(Y[ii], Y[jj], Y[kk]), 0, 1)
    logp, *_ = objective._choice_log_probs(E, params.worker_prefs[wrows], use_entropy)
    correct = (logp[:, 0] > logp[:, 1]) & (logp[:, 0] > logp[:, 2])
    return float(correct.mean())


def kmeans(points, k: int, seed: int = 0) -> np.ndarray:
    """k-means++ seeding then Lloyd iterations until the assignment stops
    changing (at most 300). Returns cluster index per point."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centers[c] = points[rng.integers(n)]
        else:
            centers[c] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    assign = np.full(n, -1)
    for _ in range(300):
        dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            mask = assign == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:
                # re-seed an emptied cluster at the worst-fit point
                centers[c] = points[dists.min(axis=1).argmax()]
    return assign


def agglomerative(points, k: int) -> np.ndarray:
    """Average-linkage hierarchical clustering cut at k clusters."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k == n:
        return np.arange(n)
    Z = linkage(points, method="average", metric="euclidean")
    return fcluster(Z, t=k, criterion="maxclust") - 1


def _as_codes(values) -> np.ndarray:
    return np.unique(np.asarray(values), return_inverse=True)[1]


def purity(assignments, labels) -> float:
    """Fraction of points lying in their cluster's majority class."""
    a = _as_codes(assignments)
    l = _as_codes(labels)
    counts = np.zeros((a.max() + 1, l.max() + 1))
    np.add.at(counts, (a, l), 1)
    return float(counts.max(axis=1).sum() / len(a))


def _entropy(codes: np.ndarray) -> float:
    p = np.bincount(codes) / len(codes)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def nmi(assignments, labels) -> float:
    """Mutual information normalized by the arithmetic mean of the two
    partition entropies (natural logs)."""
    a = _as_codes(assignments)
    l = _as_codes(labels)
    counts = np.zeros((a.max() + 1, l.max() + 1))
    np.add.at(counts, (a, l), 1)
    pij = counts / counts.sum()
    pa = pij.sum(axis=1, keepdims=True)
    pl = pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / (pa @ pl)[nz])).sum())
    ha, hl = _entropy(a), _entropy(l)
    if ha == 0.0 and hl == 0.0:
        return 1.0
    mean_h = 0.5 * (ha + hl)
    return mi / mean_h if mean_h > 0 else 0.0


def linear_eval(train_embeds, train_labels, test_embeds, test_labels, seed: int = 0) -> float:
    """Test accuracy of a multinomial logistic probe on frozen embeddings
    (zero init, full-batch gradient descent, lr 0.1, 1000 steps). The
    seed argument is accepted for interface symmetry; the fit is
    deterministic."""
    X = np.asarray(train_embeds, dtype=np.float64)
    Xt = np.asarray(test_embeds, dtype=np.float64)
    classes = sorted(set(train_labels))
    cls_index = {c: i for i, c in enumerate(classes)}
    y = np.array([cls_index[c] for c in train_labels])
    n, f = X.shape
    C = len(classes)
    W = np.zeros((f, C))
    b = np.zeros(C)
    onehot = np.zeros((n, C))
    onehot[np.arange(n), y] = 1.0
    for _ in range(1000):
        logits = X @ W + b
        p = objective._softmax(logits, axis=1)
        G = (p - onehot) / n
        W -= 0.1 * (X.T @ G)
        b -= 0.1 * G.sum(axis=0)
    pred = (Xt @ W + b).argmax(axis=1)
    truth = np.array([cls_index.get(c, -1) for c in test_labels])
    return float((pred == truth).mean())


def k_anchors_eval(test_embeds, test_labels, K: int, seed: int = 0) -> float:
    """Nearest-anchor classification with K seeded-random anchors per
    category; anchors are excluded from scoring, distance ties go to the
    lowest-index anchor."""
    X = np.asarray(test_embeds, dtype=np.float64)
    labels = np.asarray(test_labels)
    categories = sorted(set(labels.tolist()))
    sizes = {c: int((labels == c).sum()) for c in categories}
    if K < 1:
        raise ValueError("K must be >= 1")
    if K >= min(sizes.values()):
        raise ValueError(
            f"K={K} leaves no scorable points for the smallest category "
            f"(size {min(sizes.values())})"
        )
    rng = np.random.default_rng(seed)
    anchor_idx = []
    for c in categories:
        members = np.flatnonzero(labels == c)
        anchor_idx.extend(sorted(rng.choice(members, size=K, replace=False).tolist()))
    anchor_idx = np.array(sorted(anchor_idx))
    rest = np.setdiff1d(np.arange(len(labels)), anchor_idx)
    d2 = ((X[rest][:, None, :] - X[anchor_idx][None, :, :]) ** 2).sum(axis=2)
    pred = labels[anchor_idx][d2.argmin(axis=1)]
    return float((pred == labels[rest]).mean())


def preference_report(worker_prefs) -> np.ndarray:
    """Row-softmax of the preference matrix: how much each worker leans
    toward each view; rows sum to 1."""
    W = np.atleast_2d(np.asarray(worker_prefs, dtype=np.float64))
    return objective._softmax(W, axis=1)


def export_embeddings(params, config, manifest: DatasetManifest, path, split=None) -> None:
    """One line per (item, view): id, digit, color, view index, then the
    D coordinates comma-separated."""
    records = manifest.records if split is None else manifest.split(split)
    items = render_items(manifest, split)
    X = np.stack([items[r.item_id].reshape(-1) for r in records])
    Y = forward_batch(params, config, X)
    with open(path, "w", encoding="utf-8") as fh:
        for idx, r in enumerate(records):
            for v in range(config.num_views):
                coords = ",".join(repr(float(x)) for x in Y[idx, v])
                fh.write(f"{r.item_id}\t{r.digit}\t{r.color}\t{v}\t{coords}\n")


ALL_METRICS = ("accuracy", "clustering", "linear", "anchors", "preferences")


@dataclass
class EvalReport:
    triplet_accuracy: Optional[float] = None
    kmeans_purity: Optional[float] = None
    kmeans_nmi: Optional[float] = None
    agglomerative_purity: Optional[float] = None
    agglomerative_nmi: Optional[float] = None
    linear_accuracy: Optional[float] = None
    k_anchors_accuracy: Optional[float] = None
    preference_shares: Optional[list] = None
    worker_ids: Optional[list] = None

    def to_text(self) -> str:
        lines = []
        for field in dataclasses.fields(self):
            if field.name in ("preference_shares", "worker_ids"):
                continue
            value = getattr(self, field.name)
            if value is not None:
                lines.append(f"{field.name}\t{value:.6f}")
        if self.preference_shares is not None:
            for wid, row in zip(self.worker_ids, self.preference_shares):
                shares = "\t".join(f"{s:.6f}" for s in row)
                lines.append(f"preference\t{wid}\t{shares}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)


def category_labels(records) -> list:
    return [r.digit * 10 + r.color for r in records]


def evaluate_model(
    params: ModelParams,
    config: EncoderConfig,
    manifest: DatasetManifest,
    triplets=None,
    metrics=ALL_METRICS,
    anchors_k: int = 1,
    seed: int = 0,
    use_entropy: bool = True,
) -> EvalReport:
    """Run the selected metrics on the manifest's test split (training
    split embeddings are used to fit the linear probe)."""
    report = EvalReport()
    test_records = manifest.split("test")
    items = render_items(manifest)
    if "accuracy" in metrics and triplets:
        report.triplet_accuracy = triplet_accuracy(
            params, config, items, triplets, use_entropy=use_entropy
        )
    need_embeds = {"clustering", "linear", "anchors"} & set(metrics)
    if need_embeds and test_records:
        X_test = np.stack([items[r.item_id].reshape(-1) for r in test_records])
        emb_test = forward_batch(params, config, X_test).reshape(len(test_records), -1)
        y_test = category_labels(test_records)
        k = len(set(y_test))
        if "clustering" in metrics:
            km = kmeans(emb_test, k, seed=seed)
            report.kmeans_purity = purity(km, y_test)
            report.kmeans_nmi = nmi(km, y_test)
            ag = agglomerative(emb_test, k)
            report.agglomerative_purity = purity(ag, y_test)
            report.agglomerative_nmi = nmi(ag, y_test)
        if "linear" in metrics:
            train_records = manifest.split("train")
            X_train = np.stack([items[r.item_id].reshape(-1) for r in train_records])
            emb_train = forward_batch(params, config, X_train).reshape(len(train_records), -1)
            report.linear_accuracy = linear_eval(
                emb_train, category_labels(train_records), emb_test, y_test, seed=seed
            )
        if "anchors" in metrics:
            report.k_anchors_accuracy = k_anchors_eval(emb_test, y_test, anchors_k, seed=seed)
    if "preferences" in metrics and config.num_views > 1:
        report.preference_shares = preference_report(params.worker_prefs).tolist()
        report.worker_ids = list(params.worker_ids)
    return report
