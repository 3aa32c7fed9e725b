"""Minimal dense-tensor engine with taped reverse-mode gradients.

Values are float64 numpy arrays. Operations record themselves on an
optional Tape; ``backward`` replays the tape in reverse, accumulating
gradients additively across fan-out. A tape is single-writer (one
forward/backward pass at a time); separate tapes sharing read-only
weight values may run concurrently.

Two reductions here are order-canonicalized so the results are
bit-for-bit invariant under cyclic column shifts of the input:
instance-norm spatial statistics (per-column sums, then a sorted
sequential sum) and anything fed through ``permute_rows`` with a
content-based permutation. Plain convolutions and per-column attention
get the same guarantee from uniform GEMM summation order.
"""

from __future__ import annotations

import math

import numpy as np

NORM_EPS = 1e-5


class Tensor:
    """A float64 array plus its node id on the tape that produced it."""

    __slots__ = ("value", "tape", "node", "requires_grad", "grad")

    def __init__(self, value, tape=None, node=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        if not np.isfinite(self.value).all():
            raise FloatingPointError("tensor holds non-finite values")
        self.tape = tape
        self.node = node
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, node={self.node})"


class Tape:
    """Append-only operation record; list order is a topological order."""

    def __init__(self):
        self.nodes = []    # (input_node_ids, backward_fn) per node
        self.tensors = []  # tensor per node, for gradient delivery

    def _register(self, tensor, input_ids, backward_fn):
        tensor.tape = self
        tensor.node = len(self.nodes)
        self.nodes.append((input_ids, backward_fn))
        self.tensors.append(tensor)
        return tensor

    def leaf(self, value, requires_grad=False):
        """Enter a raw array onto the tape (weights, inputs)."""
        t = Tensor(value, requires_grad=requires_grad)
        return self._register(t, (), None)


def _record(out, inputs, backward_fn):
    """Attach ``out`` to the tape of its inputs, if any."""
    tapes = {t.tape for t in inputs if isinstance(t, Tensor) and t.tape is not None}
    if not tapes:
        return out
    if len(tapes) > 1:
        raise ValueError("operation mixes tensors from different tapes")
    tape = tapes.pop()
    ids = tuple(t.node if isinstance(t, Tensor) and t.tape is tape else None
                for t in inputs)
    return tape._register(out, ids, backward_fn)


def backward(tape: Tape, loss: Tensor) -> dict:
    """Reverse sweep from a scalar loss node.

    Gradients of every requires_grad tensor are stored on ``.grad`` and
    returned as {node_id: gradient}. Fan-out accumulates additively.
    """
    if loss.tape is not tape or loss.node is None:
        raise ValueError("loss was not produced on this tape")
    if loss.value.shape != ():
        raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
    grads = [None] * len(tape.nodes)
    grads[loss.node] = np.ones(())
    for nid in range(loss.node, -1, -1):
        g = grads[nid]
        if g is None:
            continue
        input_ids, backward_fn = tape.nodes[nid]
        if backward_fn is None:
            continue
        for in_id, contrib in zip(input_ids, backward_fn(g)):
            if in_id is None or contrib is None:
                continue
            if grads[in_id] is None:
                grads[in_id] = contrib.copy() if contrib.base is not None else contrib
            else:
                grads[in_id] = grads[in_id] + contrib
    out = {}
    for nid, t in enumerate(tape.tensors):
        if t.requires_grad:
            t.grad = grads[nid] if grads[nid] is not None else np.zeros_like(t.value)
            out[nid] = t.grad
    return out


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


# --- elementwise and shape ops ---------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value + b.value)
    return _record(out, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value - b.value)
    return _record(out, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    """Elementwise product of same-shape tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    av, bv = a.value, b.value
    out = Tensor(av * bv)
    return _record(out, (a, b), lambda g: (g * bv, g * av))


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.value * c)
    return _record(out, (a,), lambda g: (g * c,))


def add_const(a, c: float) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.value + c)
    return _record(out, (a,), lambda g: (g,))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    pos = a.value > 0.0
    out = Tensor(np.where(pos, a.value, 0.0))
    return _record(out, (a,), lambda g: (g * pos,))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.value))
    out = Tensor(s)
    return _record(out, (a,), lambda g: (g * s * (1.0 - s),))


def sqrt(a) -> Tensor:
    """Elementwise square root; the subgradient at 0 is taken as 0."""
    a = _as_tensor(a)
    r = np.sqrt(a.value)
    safe = np.where(r > 0.0, r, 1.0)
    out = Tensor(r)
    return _record(out, (a,), lambda g: (g * np.where(r > 0.0, 0.5 / safe, 0.0),))


def sum_all(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.sum(a.value))
    shape = a.value.shape
    return _record(out, (a,), lambda g: (np.broadcast_to(g, shape),))


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.value.shape
    out = Tensor(a.value.reshape(shape))
    return _record(out, (a,), lambda g: (g.reshape(old),))


def transpose2d(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.value.T)
    return _record(out, (a,), lambda g: (g.T,))


def concat_rows(tensors) -> Tensor:
    """Stack 2-D blocks along axis 0."""
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.value.shape[0] for t in tensors]
    out = Tensor(np.concatenate([t.value for t in tensors], axis=0))
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=0))

    return _record(out, tuple(tensors), bwd)


def slice0(a, start: int, stop: int) -> Tensor:
    """Contiguous slice along axis 0; gradients scatter into a zero block."""
    a = _as_tensor(a)
    shape = a.value.shape
    out = Tensor(a.value[start:stop])

    def bwd(g):
        back = np.zeros(shape)
        back[start:stop] = g
        return (back,)

    return _record(out, (a,), bwd)


def permute_rows(a, perm) -> Tensor:
    """Reorder rows by a fixed permutation; gradients scatter back."""
    a = _as_tensor(a)
    perm = np.asarray(perm)
    out = Tensor(a.value[perm])

    def bwd(g):
        back = np.empty_like(g)
        back[perm] = g
        return (back,)

    return _record(out, (a,), bwd)


# --- linear algebra ---------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    av, bv = a.value, b.value
    out = Tensor(av @ bv)
    return _record(out, (a, b), lambda g: (g @ bv.T, av.T @ g))


def linear(x, weight, bias) -> Tensor:
    """y = W x + b for a flat input vector."""
    x, weight, bias = _as_tensor(x), _as_tensor(weight), _as_tensor(bias)
    xv, wv = x.value, weight.value
    out = Tensor(wv @ xv + bias.value)
    return _record(out, (x, weight, bias),
                   lambda g: (wv.T @ g, np.outer(g, xv), g))


def colsum(a) -> Tensor:
    """Sum of a 2-D tensor over rows -> (D,)."""
    a = _as_tensor(a)
    n = a.value.shape[0]
    out = Tensor(np.sum(a.value, axis=0))
    return _record(out, (a,), lambda g: (np.broadcast_to(g, (n,) + g.shape),))


def add_rowvec(a, v) -> Tensor:
    """Add a (D,) vector to every row of an (N, D) tensor."""
    a, v = _as_tensor(a), _as_tensor(v)
    out = Tensor(a.value + v.value[None, :])
    return _record(out, (a, v), lambda g: (g, np.sum(g, axis=0)))


def scale_rows(a, s) -> Tensor:
    """Scale row i of an (N, D) tensor by s[i]."""
    a, s = _as_tensor(a), _as_tensor(s)
    av, sv = a.value, s.value
    out = Tensor(av * sv[:, None])
    return _record(out, (a, s), lambda g: (g * sv[:, None], np.sum(g * av, axis=1)))


def softmax_rows(a) -> Tensor:
    """Row-wise softmax of a 2-D tensor, max-subtracted for stability."""
    a = _as_tensor(a)
    v = a.value
    if v.ndim != 2 or v.shape[1] == 0:
        raise ValueError("softmax_rows expects a 2-D tensor with nonempty rows")
    e = np.exp(v - np.max(v, axis=1, keepdims=True))
    s = e / np.sum(e, axis=1, keepdims=True)
    out = Tensor(s)

    def bwd(g):
        dot = np.sum(g * s, axis=1, keepdims=True)
        return (s * (g - dot),)

    return _record(out, (a,), bwd)


def l2_normalize(x) -> Tensor:
    """x / ||x||; a zero vector maps to zero (flagged via RuntimeWarning)."""
    x = _as_tensor(x)
    v = x.value
    n = math.sqrt(float(np.sum(v * v)))
    if n == 0.0:
        import warnings

        warnings.warn("l2_normalize of a zero vector", RuntimeWarning)
        out = Tensor(np.zeros_like(v))
        return _record(out, (x,), lambda g: (np.zeros_like(g),))
    y = v / n
    out = Tensor(y)

    def bwd(g):
        return ((g - y * np.sum(g * y)) / n,)

    return _record(out, (x,), bwd)


def l2_normalize_rows(a) -> Tensor:
    """Row-wise l2 normalization of an (N, D) tensor; zero rows stay zero."""
    a = _as_tensor(a)
    v = a.value
    norms = np.sqrt(np.sum(v * v, axis=1, keepdims=True))
    safe = np.where(norms > 0.0, norms, 1.0)
    y = v / safe
    out = Tensor(y)

    def bwd(g):
        dot = np.sum(g * y, axis=1, keepdims=True)
        return (np.where(norms > 0.0, (g - y * dot) / safe, 0.0),)

    return _record(out, (a,), bwd)


# --- spatial ops ------------------------------------------------------------

_PATCH_INDEX_CACHE: dict = {}


def _patch_indices(c_in, h, w, kh, kw, sh, sw):
    """Flat gather indices building the im2col matrix for a (C,H,W) input
    zero-padded along H and wrapped circularly along W."""
    key = (c_in, h, w, kh, kw, sh, sw)
    hit = _PATCH_INDEX_CACHE.get(key)
    if hit is not None:
        return hit
    ph = (kh - 1) // 2
    pw = (kw - 1) // 2
    h_out = -(-h // sh)  # ceil
    w_out = w // sw
    hp = h + 2 * ph
    ci = np.arange(c_in)[:, None, None, None, None, None]
    dy = np.arange(kh)[None, :, None, None, None, None]
    dx = np.arange(kw)[None, None, :, None, None, None]
    oi = np.arange(h_out)[None, None, None, :, None, None]
    oj = np.arange(w_out)[None, None, None, None, :, None]
    row = oi * sh + dy
    col = (oj * sw + dx - pw) % w
    idx = (ci * hp + row) * w + col
    idx = np.broadcast_to(idx, (c_in, kh, kw, h_out, w_out, 1))
    idx = np.ascontiguousarray(idx).reshape(c_in * kh * kw, h_out * w_out)
    _PATCH_INDEX_CACHE[key] = (idx, ph, h_out, w_out)
    return idx, ph, h_out, w_out


def conv2d_circular(x, kernel, bias, stride_h: int = 1, stride_w: int = 1) -> Tensor:
    """2-D cross-correlation with circular width padding and zero height
    padding, sized for "same" output before striding.

    x: (C_in, H, W); kernel: (C_out, C_in, k_h, k_w), odd k_h/k_w;
    output: (C_out, ceil(H/stride_h), W/stride_w). W must divide by
    stride_w. Implemented as a gather + single GEMM, which keeps the
    column summation order uniform, so cyclic input shifts produce
    bit-identical cyclically shifted outputs at stride 1.
    """
    x, kernel, bias = _as_tensor(x), _as_tensor(kernel), _as_tensor(bias)
    c_in, h, w = x.value.shape
    c_out, c_in_k, kh, kw = kernel.value.shape
    if c_in_k != c_in:
        raise ValueError(f"kernel expects {c_in_k} input channels, got {c_in}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("kernel sides must be odd")
    if w % stride_w != 0:
        raise ValueError(f"width {w} not divisible by stride {stride_w}")
    idx, ph, h_out, w_out = _patch_indices(c_in, h, w, kh, kw, stride_h, stride_w)

    xp = np.zeros((c_in, h + 2 * ph, w))
    xp[:, ph:ph + h, :] = x.value
    patches = xp.reshape(-1)[idx]                       # (C_in*kh*kw, Ho*Wo)
    wmat = kernel.value.reshape(c_out, -1)
    out2d = wmat @ patches + bias.value[:, None]
    out = Tensor(out2d.reshape(c_out, h_out, w_out))

    def bwd(g):
        g2 = g.reshape(c_out, -1)
        dk = (g2 @ patches.T).reshape(kernel.value.shape)
        db = np.sum(g2, axis=1)
        dp = wmat.T @ g2
        dxp = np.zeros(c_in * (h + 2 * ph) * w)
        np.add.at(dxp, idx, dp)
        dx = dxp.reshape(c_in, h + 2 * ph, w)[:, ph:ph + h, :]
        return (dx, dk, db)

    return _record(out, (x, kernel, bias), bwd)


def _canonical_spatial_sum(a3d):
    """Per-channel sums of a (C, H, W) array in an order invariant to
    cyclic column shifts: per-column sums (position-uniform order), then
    a sorted sequential sum across columns."""
    colsums = np.sum(a3d, axis=1)                       # (C, W)
    return np.cumsum(np.sort(colsums, axis=1), axis=1)[:, -1]


def instance_norm_affine(x, gamma, beta) -> Tensor:
    """Per-channel spatial normalization with learnable scale and bias.

    Each channel is centered by its spatial mean and divided by its
    spatial std plus 1e-5. Statistics are accumulated in a canonical
    order, so a cyclic column shift of the input yields the bit-identical
    shifted output.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    v = x.value
    c, h, w = v.shape
    if h * w < 2:
        raise ValueError("instance norm needs at least 2 spatial positions")
    n = h * w
    mean = _canonical_spatial_sum(v) / n
    cent = v - mean[:, None, None]
    var = _canonical_spatial_sum(cent * cent) / n
    std = np.sqrt(var)
    denom = std + NORM_EPS
    y = cent / denom[:, None, None]
    gv, bv = gamma.value, beta.value
    out = Tensor(y * gv[:, None, None] + bv[:, None, None])

    inv_std = np.where(std > 0.0, 1.0 / np.where(std > 0.0, std, 1.0), 0.0)

    def bwd(g):
        dgamma = np.sum(g * y, axis=(1, 2))
        dbeta = np.sum(g, axis=(1, 2))
        dy = g * gv[:, None, None]
        dy_mean = np.mean(dy, axis=(1, 2))
        proj = np.sum(dy * cent, axis=(1, 2))  # sum dy_i * u_i per channel
        dx = (dy - dy_mean[:, None, None]) / denom[:, None, None] \
            - cent * (proj * inv_std / (n * denom * denom))[:, None, None]
        return (dx, dgamma, dbeta)

    return _record(out, (x, gamma, beta), bwd)


def mean_h(x) -> Tensor:
    """Average a (C, H, W) tensor over H -> (C, W). Per-column summation
    order is position-uniform, so this is bit-exactly shift-equivariant."""
    x = _as_tensor(x)
    c, h, w = x.value.shape
    out = Tensor(np.sum(x.value, axis=1) / h)
    return _record(out, (x,), lambda g: (np.broadcast_to(g[:, None, :] / h, (c, h, w)),))


def azimuth_attention(q, k, v) -> Tensor:
    """Scaled dot-product attention evaluated independently per column.

    q: (C, H_q, W); k, v: (C, H_k, W); all share C and W. For each column
    w, out(w) = softmax(q(w) k(w)^T / sqrt(C)) v(w). Columns never mix,
    and weights are shared across columns, so a cyclic column shift of
    all three inputs shifts the output bit-identically.
    """
    q, k, v = _as_tensor(q), _as_tensor(k), _as_tensor(v)
    cq, hq, wq = q.value.shape
    ck, hk, wk = k.value.shape
    cv, hv, wv = v.value.shape
    if not (cq == ck == cv and wq == wk == wv and hk == hv):
        raise ValueError(
            f"attention shape mismatch: q{q.value.shape} k{k.value.shape} v{v.value.shape}")
    inv_scale = 1.0 / math.sqrt(cq)
    # (W, H, C) batches: one independent GEMM per column
    qw = np.ascontiguousarray(q.value.transpose(2, 1, 0))
    kw = np.ascontiguousarray(k.value.transpose(2, 1, 0))
    vw = np.ascontiguousarray(v.value.transpose(2, 1, 0))
    scores = np.matmul(qw, kw.transpose(0, 2, 1)) * inv_scale   # (W, Hq, Hk)
    scores -= np.max(scores, axis=2, keepdims=True)
    e = np.exp(scores)
    attn = e / np.sum(e, axis=2, keepdims=True)
    ow = np.matmul(attn, vw)                                     # (W, Hq, C)
    out = Tensor(ow.transpose(2, 1, 0))

    def bwd(g):
        gw = g.transpose(2, 1, 0)                                # (W, Hq, C)
        d_attn = np.matmul(gw, vw.transpose(0, 2, 1))            # (W, Hq, Hk)
        dv = np.matmul(attn.transpose(0, 2, 1), gw)              # (W, Hk, C)
        dot = np.sum(d_attn * attn, axis=2, keepdims=True)
        ds = attn * (d_attn - dot)
        dq = np.matmul(ds, kw) * inv_scale                       # (W, Hq, C)
        dk = np.matmul(ds.transpose(0, 2, 1), qw) * inv_scale    # (W, Hk, C)
        return (dq.transpose(2, 1, 0), dk.transpose(2, 1, 0), dv.transpose(2, 1, 0))

    return _record(out, (q, k, v), bwd)


# --- finite-difference verification ----------------------------------------

def finite_difference_grads(fn, arrays, step: float = 1e-5):
    """Central-difference gradients of scalar ``fn(arrays)`` w.r.t. each
    array, perturbing one component at a time."""
    grads = []
    for ai, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = fn(arrays)
            flat[i] = orig - step
            dn = fn(arrays)
            flat[i] = orig
            gflat[i] = (up - dn) / (2.0 * step)
        grads.append(g)
    return grads


def _away_from_zero(rng, shape, margin=0.2):
    """Random values with |x| >= margin, keeping relu/sqrt kinks far from
    the finite-difference step."""
    mag = rng.uniform(margin, 1.0, shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return mag * sign


def primitive_gradcheck_suite(n_seeds: int = 20, step: float = 1e-5):
    """Finite-difference check of every primitive on random small inputs.

    Returns [(name, max relative error over seeds)]. Output tensors are
    reduced to a scalar through a fixed random projection so every
    gradient path is exercised.
    """
    cases = {
        "add": lambda rng: ([rng.standard_normal((3, 4)) for _ in range(2)],
                            lambda ts: (add(ts[0], ts[1]), None)),
        "sub": lambda rng: ([rng.standard_normal((3, 4)) for _ in range(2)],
                            lambda ts: (sub(ts[0], ts[1]), None)),
        "mul": lambda rng: ([rng.standard_normal((3, 4)) for _ in range(2)],
                            lambda ts: (mul(ts[0], ts[1]), None)),
        "scale": lambda rng: ([rng.standard_normal((3, 4))],
                              lambda ts: (scale(ts[0], 1.7), None)),
        "add_const": lambda rng: ([rng.standard_normal((3, 4))],
                                  lambda ts: (add_const(ts[0], 0.3), None)),
        "relu": lambda rng: ([_away_from_zero(rng, (4, 6))],
                             lambda ts: (relu(ts[0]), None)),
        "sigmoid": lambda rng: ([rng.standard_normal((4, 6))],
                                lambda ts: (sigmoid(ts[0]), None)),
        "sqrt": lambda rng: ([rng.uniform(0.5, 2.0, (4, 6))],
                             lambda ts: (sqrt(ts[0]), None)),
        "sum_all": lambda rng: ([rng.standard_normal((3, 4))],
                                lambda ts: (sum_all(ts[0]), "scalar")),
        "reshape": lambda rng: ([rng.standard_normal((3, 4))],
                                lambda ts: (reshape(ts[0], (2, 6)), None)),
        "transpose2d": lambda rng: ([rng.standard_normal((3, 4))],
                                    lambda ts: (transpose2d(ts[0]), None)),
        "concat_rows": lambda rng: ([rng.standard_normal((2, 4)),
                                     rng.standard_normal((3, 4))],
                                    lambda ts: (concat_rows(ts), None)),
        "slice0": lambda rng: ([rng.standard_normal((5, 4))],
                               lambda ts: (slice0(ts[0], 1, 4), None)),
        "permute_rows": lambda rng: ([rng.standard_normal((5, 3))],
                                     lambda ts: (permute_rows(ts[0], [3, 0, 4, 1, 2]), None)),
        "matmul": lambda rng: ([rng.standard_normal((3, 4)),
                                rng.standard_normal((4, 5))],
                               lambda ts: (matmul(ts[0], ts[1]), None)),
        "linear": lambda rng: ([rng.standard_normal(4),
                                rng.standard_normal((3, 4)),
                                rng.standard_normal(3)],
                               lambda ts: (linear(ts[0], ts[1], ts[2]), None)),
        "colsum": lambda rng: ([rng.standard_normal((5, 3))],
                               lambda ts: (colsum(ts[0]), None)),
        "add_rowvec": lambda rng: ([rng.standard_normal((4, 3)),
                                    rng.standard_normal(3)],
                                   lambda ts: (add_rowvec(ts[0], ts[1]), None)),
        "scale_rows": lambda rng: ([rng.standard_normal((4, 3)),
                                    rng.standard_normal(4)],
                                   lambda ts: (scale_rows(ts[0], ts[1]), None)),
        "softmax_rows": lambda rng: ([rng.standard_normal((4, 5))],
                                     lambda ts: (softmax_rows(ts[0]), None)),
        "l2_normalize": lambda rng: ([rng.standard_normal(6) + 2.0],
                                     lambda ts: (l2_normalize(ts[0]), None)),
        "l2_normalize_rows": lambda rng: ([rng.standard_normal((4, 3)) + 2.0],
                                          lambda ts: (l2_normalize_rows(ts[0]), None)),
        "conv2d_circular": lambda rng: ([rng.standard_normal((2, 4, 6)),
                                         rng.standard_normal((3, 2, 3, 3)),
                                         rng.standard_normal(3)],
                                        lambda ts: (conv2d_circular(*ts, 1, 1), None)),
        "conv2d_strided": lambda rng: ([rng.standard_normal((2, 4, 6)),
                                        rng.standard_normal((3, 2, 3, 3)),
                                        rng.standard_normal(3)],
                                       lambda ts: (conv2d_circular(*ts, 2, 2), None)),
        "instance_norm_affine": lambda rng: ([rng.standard_normal((3, 4, 6)),
                                              rng.uniform(0.5, 1.5, 3),
                                              rng.standard_normal(3)],
                                             lambda ts: (instance_norm_affine(*ts), None)),
        "mean_h": lambda rng: ([rng.standard_normal((3, 4, 6))],
                               lambda ts: (mean_h(ts[0]), None)),
        "azimuth_attention": lambda rng: ([rng.standard_normal((3, 4, 5)),
                                           rng.standard_normal((3, 6, 5)),
                                           rng.standard_normal((3, 6, 5))],
                                          lambda ts: (azimuth_attention(*ts), None)),
    }
    results = []
    for case_idx, (name, make) in enumerate(cases.items()):
        worst = 0.0
        for seed in range(n_seeds):
            rng = np.random.default_rng([seed, case_idx, 0x6AD])
            arrays, apply = make(rng)
            probe_rng = np.random.default_rng([seed, 0x9906])
            probe = {}

            def build_loss(leaves, apply=apply, probe=probe, probe_rng=probe_rng):
                out, kind = apply(leaves)
                if kind == "scalar":
                    return out
                if "r" not in probe:
                    probe["r"] = probe_rng.standard_normal(out.value.shape)
                return sum_all(mul(out, Tensor(probe["r"])))

            worst = max(worst, gradcheck(build_loss, arrays, step))
        results.append((name, worst))
    return results


def gradcheck(build_loss, arrays, step: float = 1e-5):
    """Compare taped gradients with central differences.

    ``build_loss(tensors)`` returns a scalar Tensor given leaf tensors
    wrapped on a fresh tape. Returns the worst relative error, measured
    per input array as max|a - n| / max(max|n|, 1e-6).
    """
    tape = Tape()
    leaves = [tape.leaf(a.copy(), requires_grad=True) for a in arrays]
    loss = build_loss(leaves)
    backward(tape, loss)
    analytic = [lf.grad for lf in leaves]

    def scalar_fn(arrs):
        t2 = Tape()
        lv = [t2.leaf(a, requires_grad=False) for a in arrs]
        return float(build_loss(lv).value)

    numeric = finite_difference_grads(scalar_fn, [a.copy() for a in arrays], step)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = max(float(np.max(np.abs(n))), 1e-6)
        err = float(np.max(np.abs(a - n))) / denom
        worst = max(worst, err)
    return worst
