"""LiDAR place recognition via fused range-image and polar Gaussian BEV
encodings, with yaw-shift-invariant global descriptors."""

from .bev import (BevConfig, BevMap, CellStats, assign_polar_cells, build_bev,
                  build_std_bev, entropy_gauss, fit_cell, pds, shift_bev)
from .cloud import (FrameMeta, Point, PointCloud, SyntheticWorld, apply_yaw,
                    load_kitti_bin, render_scan, save_kitti_bin, synth_world)
from .network import (NetConfig, NetworkWeights, compute_descriptor,
                      descriptor_distance, forward, init_weights, speed_profile)
from .retrieval import (DescriptorIndex, EvalReport, pr_curve_max_f1_auc,
                        query_topk, recall_at_k)
from .riv import RivConfig, RivImage, project_riv, shift_azimuth
from .training import (AdamState, MiningConfig, TrainFrame, TripletBatch,
                       adam_step, lr_schedule, mine_triplet, train,
                       triplet_loss)

__version__ = "0.1.0"
