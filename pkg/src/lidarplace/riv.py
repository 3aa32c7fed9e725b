"""Spherical range-image encoding.

A scan is projected onto an elevation x azimuth grid holding two channels:
normalized range and normalized intensity. Nearer points overwrite farther
ones on the same pixel (depth-priority filling). The azimuth column
convention defined by :func:`azimuth_bin` is shared with the polar BEV
encoder so the two views stay column-aligned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RivConfig:
    height: int = 32          # elevation rows
    width: int = 1056         # azimuth bins, shared with the BEV grid
    fov_up: float = 10.0      # degrees
    fov_down: float = -30.0   # degrees
    max_range: float = 80.0   # meters

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.fov_up <= self.fov_down:
            raise ValueError("fov_up must exceed fov_down")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")


@dataclass
class RivImage:
    """Dual-channel spherical grid: channel 0 range/max_range, channel 1
    intensity, both in [0, 1]; empty pixels hold 0 in both channels."""

    grid: np.ndarray  # (2, H, W) float64
    mask: np.ndarray  # (H, W) bool, True where a point landed

    @property
    def width(self) -> int:
        return self.grid.shape[2]


def azimuth_bin(phi: np.ndarray, width: int) -> np.ndarray:
    """Column index for azimuth angles, shared by both view encoders.

    phi = 0 (sensor forward) lands at column width/2; increasing phi
    (counter-clockwise) maps to decreasing column index.
    """
    u = np.floor(width * (0.5 - phi / TWO_PI)).astype(np.int64)
    return u % width


def project_riv(cloud: PointCloud, cfg: RivConfig = RivConfig()) -> RivImage:
    """Project a cloud onto the spherical grid with depth-priority filling.

    Points at the origin, beyond max_range, or outside the elevation FOV
    are silently discarded. Within a pixel the point with the smallest
    range wins; exact range ties are broken by lexicographically smaller
    (x, y, z), so the output is independent of input order.
    """
    grid = np.zeros((2, cfg.height, cfg.width))
    mask = np.zeros((cfg.height, cfg.width), dtype=bool)
    if len(cloud) == 0:
        return RivImage(grid, mask)

    x, y, z = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
    r = np.sqrt(x * x + y * y + z * z)
    keep = (r > 0.0) & (r <= cfg.max_range)
    if not keep.any():
        return RivImage(grid, mask)
    x, y, z, r = x[keep], y[keep], z[keep], r[keep]
    inten = cloud.intensity[keep]

    phi = np.arctan2(y, x)
    psi_deg = np.degrees(np.arcsin(np.clip(z / r, -1.0, 1.0)))
    u = azimuth_bin(phi, cfg.width)
    v = np.floor(cfg.height * (cfg.fov_up - psi_deg)
                 / (cfg.fov_up - cfg.fov_down)).astype(np.int64)
    in_fov = (v >= 0) & (v < cfg.height)
    if not in_fov.any():
        return RivImage(grid, mask)
    u, v, r, inten = u[in_fov], v[in_fov], r[in_fov], inten[in_fov]
    x, y, z = x[in_fov], y[in_fov], z[in_fov]

    pix = v * cfg.width + u
    # primary sort by pixel, then (range, x, y, z): first entry per pixel
    # is the depth-priority winner with the documented tie-break
    order = np.lexsort((z, y, x, r, pix))
    pix_sorted = pix[order]
    first = np.ones(pix_sorted.size, dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    win = order[first]

    vv, uu = v[win], u[win]
    grid[0, vv, uu] = r[win] / cfg.max_range
    grid[1, vv, uu] = inten[win]
    mask[vv, uu] = True
    return RivImage(grid, mask)


def shift_azimuth(img: RivImage, k: int) -> RivImage:
    """Cyclic column shift: output column u holds input column (u-k) mod W."""
    return RivImage(np.roll(img.grid, k, axis=2), np.roll(img.mask, k, axis=1))
