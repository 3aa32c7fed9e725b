"""Descriptor index, exact nearest-neighbor retrieval, and metrics.

Search is an exhaustive exact scan (fine at the database sizes this
targets). Metrics follow the common place-recognition protocol: a
retrieval counts as correct when the returned frame lies within the
positive radius of the query's true position; the PR curve sweeps an
acceptance threshold over the observed top-1 distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_POS_RADIUS = 9.0


@dataclass
class DescriptorIndex:
    """Immutable database of (frame_id, descriptor, position)."""

    frame_ids: list
    descriptors: np.ndarray  # (N, D) float64, unit rows
    positions: np.ndarray    # (N, 2) float64

    def __post_init__(self):
        self.descriptors = np.asarray(self.descriptors, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        n = len(self.frame_ids)
        if self.descriptors.shape[0] != n or self.positions.shape[0] != n:
            raise ValueError("frame_ids, descriptors, positions disagree on length")
        if len(set(self.frame_ids)) != n:
            raise ValueError("frame_ids must be unique")
        if n:
            norms = np.linalg.norm(self.descriptors, axis=1)
            if not np.allclose(norms, 1.0, atol=1e-6):
                raise ValueError("descriptors must be unit-norm")
        self.descriptors.setflags(write=False)
        self.positions.setflags(write=False)

    def __len__(self) -> int:
        return len(self.frame_ids)


def query_topk(index: DescriptorIndex, q: np.ndarray, k: int):
    """k nearest database entries by Euclidean distance, ascending;
    exact ties break toward the smaller frame_id."""
    if len(index) == 0:
        raise ValueError("cannot query an empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(q, dtype=np.float64)
    diff = index.descriptors - q[None, :]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    ids = np.asarray(index.frame_ids)
    order = np.lexsort((ids, dist))
    top = order[:min(k, len(index))]
    return [(index.frame_ids[i], float(dist[i])) for i in top]


def _in_radius(index: DescriptorIndex, position, radius: float) -> np.ndarray:
    d = index.positions - np.asarray(position, dtype=np.float64)[None, :]
    return np.sqrt(np.sum(d * d, axis=1)) <= radius


def recall_at_k(index: DescriptorIndex, queries, ks,
                pos_radius: float = DEFAULT_POS_RADIUS):
    """Fraction of queries whose top-k retrieval contains a true revisit.

    ``queries`` is a sequence of (descriptor, position). Queries with no
    database entry inside pos_radius cannot be scored; they are excluded
    and returned as a separate count: (recall mapping, excluded).
    """
    if len(queries) == 0:
        raise ValueError("empty query set")
    ks = sorted(ks)
    kmax = ks[-1]
    id_pos = {fid: i for i, fid in enumerate(index.frame_ids)}
    hits = {k: 0 for k in ks}
    scored = 0
    excluded = 0
    for desc, position in queries:
        positive = _in_radius(index, position, pos_radius)
        if not positive.any():
            excluded += 1
            continue
        scored += 1
        ranked = query_topk(index, desc, kmax)
        first_hit = None
        for rank, (fid, _) in enumerate(ranked):
            if positive[id_pos[fid]]:
                first_hit = rank + 1
                break
        if first_hit is not None:
            for k in ks:
                if first_hit <= k:
                    hits[k] += 1
    if scored == 0:
        raise ValueError("no query has an in-radius database entry")
    return {k: hits[k] / scored for k in ks}, excluded


@dataclass
class EvalReport:
    recall_at: dict
    max_f1: float
    pr_auc: float
    pr_points: list                    # (precision, recall) per threshold
    taus: list = field(default_factory=list)
    n_queries: int = 0
    n_revisit_queries: int = 0
    excluded_queries: int = 0


def pr_curve_max_f1_auc(index: DescriptorIndex, queries,
                        pos_radius: float = DEFAULT_POS_RADIUS,
                        ks=(1, 5, 10)) -> EvalReport:
    """Threshold-sweep PR evaluation of top-1 retrieval.

    At threshold tau the top-1 match is accepted iff its distance < tau.
    TP: accepted and in-radius. FP: accepted but not. FN: any query that
    has an in-radius entry but was rejected or retrieved a wrong top-1.
    Precision at zero accepts is defined as 1. AUC integrates the
    recall-sorted PR points with the trapezoid rule.
    """
    if len(queries) == 0:
        raise ValueError("empty query set")
    id_pos = {fid: i for i, fid in enumerate(index.frame_ids)}
    top1_dist = np.empty(len(queries))
    top1_correct = np.empty(len(queries), dtype=bool)
    has_revisit = np.empty(len(queries), dtype=bool)
    for i, (desc, position) in enumerate(queries):
        positive = _in_radius(index, position, pos_radius)
        has_revisit[i] = bool(positive.any())
        fid, dist = query_topk(index, desc, 1)[0]
        top1_dist[i] = dist
        top1_correct[i] = bool(positive[id_pos[fid]])
    n_revisit = int(has_revisit.sum())
    if n_revisit == 0:
        raise ValueError("no revisit queries: recall is undefined")

    points = []
    taus = sorted(set(top1_dist.tolist()))
    for tau in taus:
        accepted = top1_dist < tau
        tp = int(np.sum(accepted & top1_correct))
        fp = int(np.sum(accepted & ~top1_correct))
        precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
        recall = tp / n_revisit
        points.append((precision, recall))

    f1s = [2 * p * r / (p + r) if (p + r) > 0 else 0.0 for p, r in points]
    max_f1 = max(f1s) if f1s else 0.0
    by_recall = sorted(zip(points, taus), key=lambda pr: (pr[0][1], pr[0][0]))
    rs = np.array([p[0][1] for p in by_recall])
    ps = np.array([p[0][0] for p in by_recall])
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    auc = float(trapezoid(ps, rs)) if len(rs) > 1 else 0.0

    recalls, excluded = recall_at_k(index, queries, ks, pos_radius)
    return EvalReport(
        recall_at=recalls, max_f1=float(max_f1), pr_auc=auc,
        pr_points=points, taus=list(taus),
        n_queries=len(queries), n_revisit_queries=n_revisit,
        excluded_queries=excluded,
    )
