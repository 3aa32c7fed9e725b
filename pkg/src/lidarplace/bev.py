"""Polar bird's-eye-view encoding with per-cell Gaussian statistics.

Each polar cell's points are modeled as a 3-D Gaussian (mean, covariance)
plus an independent 1-D Gaussian over intensity. Four channels are
emitted per cell: geometric density score, geometric entropy, intensity
density score, intensity entropy, each normalized into [0, 1].

Cell reductions are accumulated in a canonical point order (sorted by
cell, then x, y, z, intensity) so the encoding is bit-for-bit independent
of input point order. ``fit_cell`` and ``build_bev`` share one bulk
routine, so per-cell statistics agree bitwise between the two paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .riv import azimuth_bin

LN_TWO_PI_E = math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class BevConfig:
    radial_bins: int = 32     # H_b
    width: int = 1056         # azimuth bins, must match the range-image width
    r_max: float = 80.0       # meters
    eps: float = 1e-6         # covariance regularizer, m^2
    min_points: int = 2       # cells below this are invalid
    # baseline 2-channel encoder bounds (max-height channel)
    z_lo: float = -5.0
    z_hi: float = 15.0

    def __post_init__(self):
        if self.radial_bins < 1 or self.width < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.r_max <= 0 or self.eps <= 0:
            raise ValueError("r_max and eps must be positive")
        if self.min_points < 2:
            raise ValueError("min_points must be >= 2")


@dataclass
class CellStats:
    """Raw (pre-normalization) Gaussian statistics of one polar cell."""

    n: int
    mu: np.ndarray       # (3,)
    sigma: np.ndarray    # (3, 3), regularized
    h_p: float           # geometric differential entropy, nats
    pds_p: float         # sum of per-point Gaussian responses, in (0, N]
    mu_it: float
    var_it: float        # regularized
    h_it: float
    pds_it: float


@dataclass
class BevMap:
    """4-channel polar grid [PDS_p, EN_p, PDS_it, EN_it], values in [0, 1];
    invalid cells hold 0."""

    grid: np.ndarray  # (4, H_b, W) float64
    mask: np.ndarray  # (H_b, W) bool

    @property
    def width(self) -> int:
        return self.grid.shape[2]


def entropy_gauss(sigma, d: int | None = None) -> float:
    """Differential entropy of a Gaussian: 0.5 * (d*ln(2*pi*e) + ln|sigma|).

    ``sigma`` is a d x d covariance (or a scalar variance for d=1). The
    determinant comes from a Cholesky factor, so non-positive-definite
    input raises.
    """
    sig = np.asarray(sigma, dtype=np.float64)
    if sig.ndim == 0:
        sig = sig.reshape(1, 1)
    if d is not None and sig.shape[0] != d:
        raise ValueError(f"sigma is {sig.shape[0]}x{sig.shape[0]}, expected d={d}")
    dim = sig.shape[0]
    try:
        chol = np.linalg.cholesky(sig)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return 0.5 * (dim * LN_TWO_PI_E + logdet)


def pds(points, mu, sigma) -> float:
    """Sum of unnormalized Gaussian responses of ``points`` under N(mu, sigma).

    The Mahalanobis terms are computed through a Cholesky solve, never an
    explicit inverse. Result lies in (0, N] for any positive-definite sigma.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sig = np.asarray(sigma, dtype=np.float64)
    if sig.ndim == 0:
        sig = sig.reshape(1, 1)
    try:
        chol = np.linalg.cholesky(sig)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    dev = pts - mu[None, :]
    # forward substitution L y = dev^T, one column of y per point
    d = sig.shape[0]
    ys = np.empty_like(dev)
    for i in range(d):
        acc = dev[:, i].copy()
        for j in range(i):
            acc -= chol[i, j] * ys[:, j]
        ys[:, i] = acc / chol[i, i]
    quad = np.sum(ys * ys, axis=1)
    return float(np.sum(np.exp(-0.5 * quad)))


def polar_bins(cloud: PointCloud, cfg: BevConfig):
    """(radial bin, azimuth bin, keep mask) for every point.

    Points with planar range 0 or beyond r_max are dropped; the azimuth
    convention is the one shared with the range-image encoder.
    """
    x, y = cloud.xyz[:, 0], cloud.xyz[:, 1]
    rho = np.sqrt(x * x + y * y)
    keep = (rho > 0.0) & (rho <= cfg.r_max)
    rbin = np.floor(cfg.radial_bins * rho / cfg.r_max).astype(np.int64)
    rbin = np.minimum(rbin, cfg.radial_bins - 1)  # clamp rho == r_max
    abin = azimuth_bin(np.arctan2(y, x), cfg.width)
    return rbin, abin, keep


def assign_polar_cells(cloud: PointCloud, cfg: BevConfig = BevConfig()) -> dict:
    """Group point indices by (radial bin, azimuth bin)."""
    if len(cloud) == 0:
        return {}
    rbin, abin, keep = polar_bins(cloud, cfg)
    idx = np.nonzero(keep)[0]
    cells: dict = {}
    for i in idx:
        cells.setdefault((int(rbin[i]), int(abin[i])), []).append(int(i))
    return {k: np.array(v) for k, v in cells.items()}


def _seq_sum(ids, weights, n_cells):
    """Per-cell sums accumulated strictly in array order (bincount is a
    sequential C loop, so sorted input gives a canonical summation order)."""
    return np.bincount(ids, weights=weights, minlength=n_cells)


def _bulk_stats(xyz, inten, ids, n_cells, eps):
    """Raw Gaussian statistics for cells indexed 0..n_cells-1.

    Inputs must already be in canonical order (sorted by id, then
    x, y, z, intensity). Cells are assumed to hold >= 2 points each.
    Returns a dict of per-cell arrays.
    """
    counts = np.bincount(ids, minlength=n_cells).astype(np.float64)
    mu = np.stack([_seq_sum(ids, xyz[:, k], n_cells) for k in range(3)],
                  axis=1) / counts[:, None]
    dev = xyz - mu[ids]
    denom = counts - 1.0
    sigma = np.empty((n_cells, 3, 3))
    for i in range(3):
        for j in range(i, 3):
            s = _seq_sum(ids, dev[:, i] * dev[:, j], n_cells) / denom
            sigma[:, i, j] = s
            sigma[:, j, i] = s
    sigma[:, 0, 0] += eps
    sigma[:, 1, 1] += eps
    sigma[:, 2, 2] += eps

    mu_it = _seq_sum(ids, inten, n_cells) / counts
    dev_it = inten - mu_it[ids]
    var_it = _seq_sum(ids, dev_it * dev_it, n_cells) / denom + eps

    chol = np.linalg.cholesky(sigma)
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    h_p = 0.5 * (3.0 * LN_TWO_PI_E + logdet)
    h_it = 0.5 * (LN_TWO_PI_E + np.log(var_it))

    # Mahalanobis via forward substitution with each point's cell factor
    lc = chol[ids]
    y0 = dev[:, 0] / lc[:, 0, 0]
    y1 = (dev[:, 1] - lc[:, 1, 0] * y0) / lc[:, 1, 1]
    y2 = (dev[:, 2] - lc[:, 2, 0] * y0 - lc[:, 2, 1] * y1) / lc[:, 2, 2]
    quad = y0 * y0 + y1 * y1 + y2 * y2
    pds_p = _seq_sum(ids, np.exp(-0.5 * quad), n_cells)
    pds_it = _seq_sum(ids, np.exp(-0.5 * dev_it * dev_it / var_it[ids]), n_cells)

    return {
        "n": counts.astype(np.int64), "mu": mu, "sigma": sigma,
        "h_p": h_p, "pds_p": pds_p,
        "mu_it": mu_it, "var_it": var_it, "h_it": h_it, "pds_it": pds_it,
    }


def _canonical_order(ids, xyz, inten):
    """Sort by (cell id, x, y, z, intensity); fixes the summation order."""
    return np.lexsort((inten, xyz[:, 2], xyz[:, 1], xyz[:, 0], ids))


def fit_cell(xyz, intensity, eps: float = 1e-6, min_points: int = 2) -> CellStats | None:
    """Gaussian statistics of one cell's points, or None below min_points.

    Uses the same bulk machinery as build_bev, so the two paths agree
    bit-for-bit.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    intensity = np.asarray(intensity, dtype=np.float64).reshape(-1)
    n = xyz.shape[0]
    if n < min_points:
        return None
    ids = np.zeros(n, dtype=np.int64)
    order = _canonical_order(ids, xyz, intensity)
    s = _bulk_stats(xyz[order], intensity[order], ids, 1, eps)
    return CellStats(
        n=int(s["n"][0]), mu=s["mu"][0], sigma=s["sigma"][0],
        h_p=float(s["h_p"][0]), pds_p=float(s["pds_p"][0]),
        mu_it=float(s["mu_it"][0]), var_it=float(s["var_it"][0]),
        h_it=float(s["h_it"][0]), pds_it=float(s["pds_it"][0]),
    )


def entropy_bounds_geometric(cfg: BevConfig) -> tuple:
    """Fixed normalization bounds for the geometric entropy channel:
    entropy at sigma = eps*I (degenerate cell) up to sigma = (r_max^2/4)*I."""
    lo = entropy_gauss(cfg.eps * np.eye(3))
    hi = entropy_gauss((cfg.r_max ** 2 / 4.0) * np.eye(3))
    return lo, hi


def entropy_bounds_intensity(cfg: BevConfig) -> tuple:
    """1-D analog: variance from eps up to 1/4 (intensity spans [0, 1])."""
    lo = entropy_gauss(cfg.eps)
    hi = entropy_gauss(0.25)
    return lo, hi


def build_bev(cloud: PointCloud, cfg: BevConfig = BevConfig()) -> BevMap:
    """Encode a cloud into the 4-channel polar grid.

    Channels: [PDS_p, EN_p, PDS_it, EN_it]. Density channels store
    PDS/N (mean Gaussian response); entropy channels are min-max
    normalized against the fixed bounds above and clipped to [0, 1].
    Fixed bounds keep the normalization commuting with column shifts.
    """
    grid = np.zeros((4, cfg.radial_bins, cfg.width))
    mask = np.zeros((cfg.radial_bins, cfg.width), dtype=bool)
    if len(cloud) == 0:
        return BevMap(grid, mask)

    rbin, abin, keep = polar_bins(cloud, cfg)
    if not keep.any():
        return BevMap(grid, mask)
    xyz = cloud.xyz[keep]
    inten = cloud.intensity[keep]
    cell = rbin[keep] * cfg.width + abin[keep]

    # drop cells below min_points, then relabel to dense ids
    uniq, inv, counts = np.unique(cell, return_inverse=True, return_counts=True)
    valid = counts >= cfg.min_points
    if not valid.any():
        return BevMap(grid, mask)
    keep_pt = valid[inv]
    xyz, inten = xyz[keep_pt], inten[keep_pt]
    dense = np.cumsum(valid) - 1          # old unique index -> dense id
    ids = dense[inv[keep_pt]]
    n_cells = int(valid.sum())

    order = _canonical_order(ids, xyz, inten)
    stats = _bulk_stats(xyz[order], inten[order], ids[order], n_cells, cfg.eps)

    lo_p, hi_p = entropy_bounds_geometric(cfg)
    lo_it, hi_it = entropy_bounds_intensity(cfg)
    nf = stats["n"].astype(np.float64)
    ch = np.stack([
        stats["pds_p"] / nf,
        np.clip((stats["h_p"] - lo_p) / (hi_p - lo_p), 0.0, 1.0),
        stats["pds_it"] / nf,
        np.clip((stats["h_it"] - lo_it) / (hi_it - lo_it), 0.0, 1.0),
    ])

    cells = uniq[valid]
    rr, aa = cells // cfg.width, cells % cfg.width
    grid[:, rr, aa] = ch
    mask[rr, aa] = True
    return BevMap(grid, mask)


def build_bev_stats(cloud: PointCloud, cfg: BevConfig = BevConfig()) -> dict:
    """Raw per-cell statistics keyed by (radial bin, azimuth bin); the
    pre-normalization view of build_bev for oracle checks."""
    cells = assign_polar_cells(cloud, cfg)
    out = {}
    for key, idx in cells.items():
        st = fit_cell(cloud.xyz[idx], cloud.intensity[idx],
                      eps=cfg.eps, min_points=cfg.min_points)
        if st is not None:
            out[key] = st
    return out


def build_std_bev(cloud: PointCloud, cfg: BevConfig = BevConfig()) -> BevMap:
    """Baseline 2-channel encoder: normalized max height and occupancy.

    Exists to compare simple statistical aggregation against the Gaussian
    channels; any nonempty cell is valid here.
    """
    grid = np.zeros((2, cfg.radial_bins, cfg.width))
    mask = np.zeros((cfg.radial_bins, cfg.width), dtype=bool)
    if len(cloud) == 0:
        return BevMap(grid, mask)
    rbin, abin, keep = polar_bins(cloud, cfg)
    if not keep.any():
        return BevMap(grid, mask)
    rr, aa = rbin[keep], abin[keep]
    z = cloud.xyz[keep, 2]
    zmax = np.full((cfg.radial_bins, cfg.width), -np.inf)
    np.maximum.at(zmax, (rr, aa), z)
    hit = np.isfinite(zmax)
    grid[0][hit] = np.clip((zmax[hit] - cfg.z_lo) / (cfg.z_hi - cfg.z_lo), 0.0, 1.0)
    grid[1][hit] = 1.0
    mask[:] = hit
    return BevMap(grid, mask)


def shift_bev(bev: BevMap, k: int) -> BevMap:
    """Cyclic azimuth-column shift, same convention as the range image."""
    return BevMap(np.roll(bev.grid, k, axis=2), np.roll(bev.mask, k, axis=1))
