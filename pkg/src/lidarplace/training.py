"""Triplet mining, margin loss, and the Adam training loop.

Positives sit within 9 m of the query's capture location, negatives at
least 18 m away. Each epoch refreshes every frame's descriptor with the
current weights, mines one triplet per query (hardest positive by
descriptor distance, random negatives filtered to distance < margin),
and applies one Adam update per surviving triplet. Everything is driven
by named rng substreams, so a run is bit-reproducible from its seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import engine as eg
from .bev import BevMap
from .cloud import FrameMeta
from .network import (NetConfig, NetworkWeights, compute_descriptor,
                      descriptor_distance, forward_from, init_weights,
                      wrap_weights)
from .riv import RivImage


@dataclass(frozen=True)
class MiningConfig:
    pos_radius: float = 9.0    # meters
    neg_radius: float = 18.0   # meters
    n_neg: int = 6
    margin: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.pos_radius < self.neg_radius):
            raise ValueError("need 0 < pos_radius < neg_radius")
        if self.n_neg < 1 or self.margin <= 0.0:
            raise ValueError("n_neg >= 1 and margin > 0 required")


@dataclass
class TripletBatch:
    query: str
    positive: str
    negatives: list


def _ground_dist(a: FrameMeta, b: FrameMeta) -> float:
    return float(np.hypot(a.east - b.east, a.north - b.north))


def mine_triplet(query: FrameMeta, dataset, descriptors: dict,
                 cfg: MiningConfig, rng: np.random.Generator) -> TripletBatch | None:
    """Build one triplet for ``query`` or return None when impossible.

    The positive is the in-radius candidate whose descriptor is closest
    to the query's; negatives are a seeded uniform sample of out-of-radius
    frames, kept only while their descriptor distance is below the margin.
    """
    dq = descriptors[query.frame_id]
    pos_pool = []
    neg_pool = []
    for f in dataset:
        if f.frame_id == query.frame_id:
            continue
        d = _ground_dist(query, f)
        if d <= cfg.pos_radius:
            pos_pool.append(f.frame_id)
        elif d >= cfg.neg_radius:
            neg_pool.append(f.frame_id)
    if not pos_pool:
        return None
    positive = min(pos_pool,
                   key=lambda fid: (descriptor_distance(dq, descriptors[fid]), fid))
    if not neg_pool:
        return None
    take = min(cfg.n_neg, len(neg_pool))
    picks = rng.choice(len(neg_pool), size=take, replace=False)
    negatives = [neg_pool[i] for i in picks
                 if descriptor_distance(dq, descriptors[neg_pool[i]]) < cfg.margin]
    if not negatives:
        return None
    return TripletBatch(query.frame_id, positive, negatives)


def triplet_loss(d_pos: float, d_negs, margin: float) -> float:
    """Mean hinge over negatives: (1/N) sum max(0, d_pos - d_neg + m)."""
    if len(d_negs) == 0:
        raise ValueError("triplet loss needs at least one negative")
    return float(np.mean([max(0.0, d_pos - dn + margin) for dn in d_negs]))


def triplet_loss_op(d_pos: eg.Tensor, d_negs, margin: float) -> eg.Tensor:
    """Taped version of triplet_loss for training."""
    if len(d_negs) == 0:
        raise ValueError("triplet loss needs at least one negative")
    total = None
    for dn in d_negs:
        hinge = eg.relu(eg.add_const(eg.sub(d_pos, dn), margin))
        total = hinge if total is None else eg.add(total, hinge)
    return eg.scale(total, 1.0 / len(d_negs))


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place on ``params``."""
    state.t += 1
    t = state.t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p)
            state.m[name] = m
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def lr_schedule(epoch: int, lr0: float) -> float:
    """Decay by a factor of 10 every 10 epochs."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr0 * 10.0 ** (-(epoch // 10))


@dataclass
class TrainFrame:
    meta: FrameMeta
    riv: RivImage
    bev: BevMap


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    lr: float
    batches_used: int
    batches_skipped: int


def train(frames, net_cfg: NetConfig, mining_cfg: MiningConfig, epochs: int,
          lr0: float = 1e-5, seed: int = 0,
          initial: NetworkWeights | None = None):
    """Run the full loop; returns (weights, per-epoch logs).

    Descriptors are refreshed once per epoch and reused for mining within
    it. Queries are visited in a seeded shuffled order; each mined triplet
    triggers one Adam step. Epochs=0 returns the freshly initialized
    weights untouched.
    """
    weights = initial.copy() if initial is not None else init_weights(net_cfg)
    metas = [f.meta for f in frames]
    by_id = {f.meta.frame_id: f for f in frames}
    state = AdamState()
    rng = np.random.default_rng([int(seed), 0x313131])  # mining substream
    logs = []
    for epoch in range(epochs):
        lr = lr_schedule(epoch, lr0)
        descs = {f.meta.frame_id: compute_descriptor(f.riv, f.bev, weights)
                 for f in frames}
        losses = []
        skipped = 0
        for qi in rng.permutation(len(frames)):
            batch = mine_triplet(metas[qi], metas, descs, mining_cfg, rng)
            if batch is None:
                skipped += 1
                continue
            tape = eg.Tape()
            w = wrap_weights(weights, tape)
            q = by_id[batch.query]
            p = by_id[batch.positive]
            dq = forward_from(w, q.riv, q.bev, net_cfg)
            d_pos = descriptor_distance(dq, forward_from(w, p.riv, p.bev, net_cfg))
            d_negs = [descriptor_distance(
                dq, forward_from(w, by_id[n].riv, by_id[n].bev, net_cfg))
                for n in batch.negatives]
            loss = triplet_loss_op(d_pos, d_negs, mining_cfg.margin)
            losses.append(float(loss.value))
            if loss.value > 0.0:
                eg.backward(tape, loss)
                grads = {name: w[name].grad for name in w}
                adam_step(weights.params, grads, state, lr)
        if epoch == 0 and not losses:
            raise RuntimeError(
                f"no valid triplet in epoch 0: every one of {len(frames)} queries "
                f"was skipped (missing in-radius positives or all negatives "
                f"filtered at margin {mining_cfg.margin})")
        mean_loss = float(np.mean(losses)) if losses else 0.0
        logs.append(EpochLog(epoch, mean_loss, lr, len(losses), skipped))
    return weights, logs


def write_loss_csv(logs, path, config_hash: str = "") -> None:
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config {config_hash}\n")
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_loss", "lr", "batches_used", "batches_skipped"])
        for log in logs:
            writer.writerow([log.epoch, f"{log.mean_loss:.9g}", f"{log.lr:.9g}",
                             log.batches_used, log.batches_skipped])
