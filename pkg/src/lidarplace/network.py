"""Dual-branch fusion network producing a unit-norm global descriptor.

Each view (range image, polar BEV) runs through a small conv pyramid
(circular padding along azimuth). At every level the two branches
exchange information through per-column cross-attention in both
directions, each refined by a residual feed-forward block. Fused maps
are pooled vertically, their columns projected to a shared width and
aggregated as one token set by a soft-assignment residual aggregator
(NetVLAD) with a sigmoid context gate.

Every stage is either column-shift equivariant or aggregates tokens in
a canonical sorted order, so the final descriptor is bit-for-bit
invariant to cyclic azimuth shifts of both inputs by any multiple of
the total azimuth stride.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import engine as eg
from .bev import BevMap
from .riv import RivImage


@dataclass(frozen=True)
class NetConfig:
    levels: int = 4
    channels: tuple = (16, 32, 64, 128)
    v_strides: tuple = (2, 2, 2, 2)
    a_strides: tuple = (1, 1, 1, 1)
    heads: int = 1
    clusters: int = 8
    descriptor_dim: int = 256
    riv_channels: int = 2
    bev_channels: int = 4
    kernel: int = 3
    ffn_mult: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        for name in ("channels", "v_strides", "a_strides"):
            if len(getattr(self, name)) != self.levels:
                raise ValueError(f"{name} must list one entry per level")
        if self.descriptor_dim % self.clusters != 0:
            raise ValueError("descriptor_dim must be a multiple of clusters")
        for c in self.channels:
            if c % self.heads != 0:
                raise ValueError("every channel count must divide by heads")
        if self.kernel % 2 == 0:
            raise ValueError("kernel must be odd")

    @property
    def proj_dim(self) -> int:
        """Shared token width; descriptor_dim = clusters * proj_dim."""
        return self.descriptor_dim // self.clusters

    @property
    def total_azimuth_stride(self) -> int:
        s = 1
        for a in self.a_strides:
            s *= a
        return s

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def speed_profile(**overrides) -> NetConfig:
    """Variant that also downsamples azimuth at levels 2-4 (total stride 8);
    descriptors are then invariant to shifts in multiples of 8 bins."""
    base = dict(a_strides=(1, 2, 2, 2))
    base.update(overrides)
    return NetConfig(**base)


@dataclass
class NetworkWeights:
    """Named parameter arrays plus the config they were built for."""

    params: dict
    config: NetConfig

    def copy(self) -> "NetworkWeights":
        return NetworkWeights({k: v.copy() for k, v in self.params.items()},
                              self.config)


def parameter_shapes(cfg: NetConfig) -> dict:
    """Name -> shape for every learnable parameter, in creation order."""
    shapes: dict = {}
    k = cfg.kernel
    for view, c_in0 in (("riv", cfg.riv_channels), ("bev", cfg.bev_channels)):
        c_prev = c_in0
        for i, c in enumerate(cfg.channels):
            shapes[f"{view}_conv{i}_w"] = (c, c_prev, k, k)
            shapes[f"{view}_conv{i}_b"] = (c,)
            shapes[f"{view}_norm{i}_g"] = (c,)
            shapes[f"{view}_norm{i}_b"] = (c,)
            c_prev = c
    for i, c in enumerate(cfg.channels):
        for direction in ("r", "b"):  # r: range image queries BEV, b: reverse
            for proj in ("q", "k", "v"):
                shapes[f"fuse{i}_{direction}_{proj}_w"] = (c, c, 1, 1)
                shapes[f"fuse{i}_{direction}_{proj}_b"] = (c,)
            hidden = cfg.ffn_mult * c
            shapes[f"fuse{i}_{direction}_ffn1_w"] = (hidden, c, 1, 1)
            shapes[f"fuse{i}_{direction}_ffn1_b"] = (hidden,)
            shapes[f"fuse{i}_{direction}_ffn2_w"] = (c, hidden, 1, 1)
            shapes[f"fuse{i}_{direction}_ffn2_b"] = (c,)
    for i, c in enumerate(cfg.channels):
        for view in ("riv", "bev"):
            shapes[f"pool{i}_{view}_w"] = (cfg.proj_dim, c)
            shapes[f"pool{i}_{view}_b"] = (cfg.proj_dim,)
    shapes["vlad_assign_w"] = (cfg.clusters, cfg.proj_dim)
    shapes["vlad_assign_b"] = (cfg.clusters,)
    shapes["vlad_centers"] = (cfg.clusters, cfg.proj_dim)
    shapes["gate_w"] = (cfg.descriptor_dim, cfg.descriptor_dim)
    shapes["gate_b"] = (cfg.descriptor_dim,)
    return shapes


def init_weights(cfg: NetConfig) -> NetworkWeights:
    """Seed-deterministic random initialization.

    Weight matrices and conv kernels draw scaled-uniform with fan-in
    scaling, aggregation centers draw standard-normal scaled by 0.1,
    norm scales start at 1 and every bias at 0.
    """
    rng = np.random.default_rng([int(cfg.seed), 0xC0FFEE])
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        if name == "vlad_centers":
            params[name] = 0.1 * rng.standard_normal(shape)
        elif name.endswith("_g"):
            params[name] = np.ones(shape)
        elif name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, shape)
    return NetworkWeights(params, cfg)


def wrap_weights(weights: NetworkWeights, tape: eg.Tape | None) -> dict:
    """Enter parameters onto a tape (trainable) or as constants."""
    if tape is None:
        return {k: eg.Tensor(v) for k, v in weights.params.items()}
    return {k: tape.leaf(v, requires_grad=True) for k, v in weights.params.items()}


def _conv(w, name, x, sh, sw):
    return eg.conv2d_circular(x, w[f"{name}_w"], w[f"{name}_b"], sh, sw)


def _branch(w, view, x, cfg: NetConfig):
    """Conv pyramid: (conv -> instance norm -> relu) per level."""
    feats = []
    for i in range(cfg.levels):
        x = _conv(w, f"{view}_conv{i}", x, cfg.v_strides[i], cfg.a_strides[i])
        x = eg.instance_norm_affine(x, w[f"{view}_norm{i}_g"], w[f"{view}_norm{i}_b"])
        x = eg.relu(x)
        feats.append(x)
    return feats


def _attend(q, k, v, heads: int):
    if heads == 1:
        return eg.azimuth_attention(q, k, v)
    c = q.value.shape[0]
    step = c // heads
    outs = []
    for h in range(heads):
        sl = slice(h * step, (h + 1) * step)
        outs.append(eg.azimuth_attention(eg.slice0(q, sl.start, sl.stop),
                                         eg.slice0(k, sl.start, sl.stop),
                                         eg.slice0(v, sl.start, sl.stop)))
    return eg.concat_rows(outs)


def _ffn(w, prefix, x):
    h = eg.relu(eg.conv2d_circular(x, w[f"{prefix}_ffn1_w"], w[f"{prefix}_ffn1_b"], 1, 1))
    return eg.conv2d_circular(h, w[f"{prefix}_ffn2_w"], w[f"{prefix}_ffn2_b"], 1, 1)


def _fuse_level(w, i, fr, fb, cfg: NetConfig):
    """Bi-directional per-column cross attention with residual FFN."""
    qr = _conv(w, f"fuse{i}_r_q", fr, 1, 1)
    kb = _conv(w, f"fuse{i}_r_k", fb, 1, 1)
    vb = _conv(w, f"fuse{i}_r_v", fb, 1, 1)
    ar = _attend(qr, kb, vb, cfg.heads)
    fr_out = eg.add(fr, _ffn(w, f"fuse{i}_r", ar))

    qb = _conv(w, f"fuse{i}_b_q", fb, 1, 1)
    kr = _conv(w, f"fuse{i}_b_k", fr, 1, 1)
    vr = _conv(w, f"fuse{i}_b_v", fr, 1, 1)
    ab = _attend(qb, kr, vr, cfg.heads)
    fb_out = eg.add(fb, _ffn(w, f"fuse{i}_b", ab))
    return fr_out, fb_out


def _tokens(w, i, view, feat, cfg: NetConfig):
    """Vertical average pool, then per-column projection to proj_dim."""
    pooled = eg.mean_h(feat)                      # (C_i, W_i)
    cols = eg.transpose2d(pooled)                 # (W_i, C_i)
    proj = eg.matmul(cols, eg.transpose2d(w[f"pool{i}_{view}_w"]))
    return eg.add_rowvec(proj, w[f"pool{i}_{view}_b"])


def _lex_perm(x: np.ndarray) -> np.ndarray:
    """Lexicographic row order; ties are between bitwise-equal rows, so
    any stable order gives identical downstream results."""
    keys = tuple(x[:, j] for j in range(x.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


def _aggregate(w, tokens, cfg: NetConfig):
    """Soft-assignment residual aggregation over the token set.

    Tokens are sorted into a canonical order first, which makes the
    aggregation bit-exactly invariant to any permutation of the set.
    """
    x = eg.concat_rows(tokens)                    # (M, P)
    xs = eg.permute_rows(x, _lex_perm(x.value))
    logits = eg.add_rowvec(eg.matmul(xs, eg.transpose2d(w["vlad_assign_w"])),
                           w["vlad_assign_b"])
    assign = eg.softmax_rows(logits)              # (M, K)
    pooled = eg.matmul(eg.transpose2d(assign), xs)          # (K, P)
    centered = eg.sub(pooled, eg.scale_rows(w["vlad_centers"], eg.colsum(assign)))
    intra = eg.l2_normalize_rows(centered)
    return eg.reshape(intra, (cfg.descriptor_dim,))


def forward_from(w: dict, riv: RivImage, bev: BevMap, cfg: NetConfig) -> eg.Tensor:
    """Descriptor from already-wrapped weight tensors (shared across the
    several forwards of one training step)."""
    if riv.width != bev.width:
        raise ValueError(f"azimuth width mismatch: {riv.width} vs {bev.width}")
    fr = _branch(w, "riv", eg.Tensor(riv.grid), cfg)
    fb = _branch(w, "bev", eg.Tensor(bev.grid), cfg)
    tokens = []
    for i in range(cfg.levels):
        fri, fbi = _fuse_level(w, i, fr[i], fb[i], cfg)
        tokens.append(_tokens(w, i, "riv", fri, cfg))
        tokens.append(_tokens(w, i, "bev", fbi, cfg))
    y = _aggregate(w, tokens, cfg)
    gate = eg.sigmoid(eg.linear(y, w["gate_w"], w["gate_b"]))
    return eg.l2_normalize(eg.mul(y, gate))


def forward(riv: RivImage, bev: BevMap, weights: NetworkWeights,
            cfg: NetConfig | None = None, tape: eg.Tape | None = None) -> eg.Tensor:
    """Full forward pass; pass a Tape to record for backward."""
    cfg = cfg or weights.config
    return forward_from(wrap_weights(weights, tape), riv, bev, cfg)


def compute_descriptor(riv: RivImage, bev: BevMap, weights: NetworkWeights) -> np.ndarray:
    """Inference-only descriptor as a plain array."""
    return forward(riv, bev, weights).value


def descriptor_distance(a, b):
    """Euclidean distance between descriptors.

    Accepts arrays (returns float) or engine Tensors (returns a taped
    scalar Tensor). Unit-norm inputs give values in [0, 2].
    """
    if isinstance(a, eg.Tensor) or isinstance(b, eg.Tensor):
        diff = eg.sub(a, b)
        return eg.sqrt(eg.sum_all(eg.mul(diff, diff)))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"descriptor dims differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))
