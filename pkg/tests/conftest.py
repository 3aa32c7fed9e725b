"""Shared helpers for the test suite."""

import numpy as np
import pytest

from lidarplace.bev import BevConfig
from lidarplace.cloud import PointCloud
from lidarplace.riv import RivConfig


def boundary_safe_cloud(rng, n, riv_cfg: RivConfig, bev_cfg: BevConfig,
                        frame_id="test") -> PointCloud:
    """Random cloud whose points sit well inside every grid bin.

    Azimuths, elevations, and planar ranges are sampled at interior
    offsets (15-85%) of their bins, so bin assignments survive the float
    noise of a yaw rotation by an exact bin multiple.
    """
    w = riv_cfg.width
    assert w == bev_cfg.width
    abin = rng.integers(0, w, n)
    aoff = rng.uniform(0.15, 0.85, n)
    phi = 2.0 * np.pi * (0.5 - (abin + aoff) / w)

    rbin = rng.integers(1, bev_cfg.radial_bins - 1, n)
    roff = rng.uniform(0.15, 0.85, n)
    rho = (rbin + roff) * bev_cfg.r_max / bev_cfg.radial_bins

    vbin = rng.integers(0, riv_cfg.height, n)
    voff = rng.uniform(0.15, 0.85, n)
    span = riv_cfg.fov_up - riv_cfg.fov_down
    psi_deg = riv_cfg.fov_up - (vbin + voff) * span / riv_cfg.height

    z = rho * np.tan(np.deg2rad(psi_deg))
    xyz = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    r = np.linalg.norm(xyz, axis=1)
    keep = r <= 0.98 * riv_cfg.max_range
    return PointCloud(frame_id, xyz[keep], rng.uniform(0.0, 1.0, n)[keep])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
