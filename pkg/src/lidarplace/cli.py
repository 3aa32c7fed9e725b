"""Command-line harness: dataset synthesis, encoding, training, evaluation,
invariance and gradient checks, and a latency benchmark.

A run is described by a RunConfig (JSON file, overridable with repeated
``--set section.key=value`` flags). Every output file carries the run's
config hash so results can be traced back to their exact configuration.
All randomness derives from the single run seed through named substreams
(world, trajectory, init, mining).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine as eg
from .bev import BevConfig, build_bev, build_std_bev, shift_bev
from .cloud import (FrameMeta, PointCloud, apply_yaw, load_kitti_bin,
                    render_scan, save_kitti_bin, synth_world)
from .network import (NetConfig, compute_descriptor, descriptor_distance,
                      init_weights)
from .retrieval import DescriptorIndex, pr_curve_max_f1_auc, query_topk
from .riv import RivConfig, project_riv, shift_azimuth
from .storage import (load_checkpoint, load_tensor, save_checkpoint,
                      save_descriptors, save_tensor)
from .training import MiningConfig, TrainFrame, train, write_loss_csv

BEV_CHANNEL_NAMES = ["pds_p", "en_p", "pds_it", "en_it"]
STD_BEV_CHANNEL_NAMES = ["max_height", "occupancy"]
RIV_CHANNEL_NAMES = ["range", "intensity"]
YAW_STUDY_DEGREES = (55.0, 110.0, 180.0, 250.0, 305.0, 360.0)


@dataclass(frozen=True)
class RunConfig:
    riv: RivConfig = RivConfig()
    bev: BevConfig = BevConfig()
    net: NetConfig = NetConfig()
    mining: MiningConfig = MiningConfig()
    seed: int = 0
    bev_encoder: str = "ndt"   # "ndt" (4-channel Gaussian) or "std" (baseline)
    lr0: float = 1e-5
    epochs: int = 30
    eval_ks: tuple = (1, 5, 10, 20)
    eval_pos_radius: float = 9.0
    # synthetic scan geometry
    beams: int = 16
    azimuth_steps: int = 180
    scan_range: float = 80.0

    def __post_init__(self):
        if self.riv.width != self.bev.width:
            raise ValueError(
                f"riv width {self.riv.width} != bev width {self.bev.width}")
        if self.riv.width % self.net.total_azimuth_stride != 0:
            raise ValueError("width must divide by the total azimuth stride")
        if self.bev_encoder not in ("ndt", "std"):
            raise ValueError("bev_encoder must be 'ndt' or 'std'")
        expected = 4 if self.bev_encoder == "ndt" else 2
        if self.net.bev_channels != expected:
            raise ValueError(
                f"net.bev_channels must be {expected} for the {self.bev_encoder} encoder")

    def config_hash(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def net_for_run(self) -> NetConfig:
        """The run seed drives weight init unless net.seed was set explicitly."""
        if self.net.seed != 0:
            return self.net
        return dataclasses.replace(self.net, seed=self.seed)


def _coerce_tuples(cls, data: dict):
    fixed = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        fixed[f.name] = tuple(v) if isinstance(v, list) else v
    return cls(**fixed)


def run_config_from_dict(data: dict) -> RunConfig:
    parts = {}
    for name, sub in (("riv", RivConfig), ("bev", BevConfig),
                      ("net", NetConfig), ("mining", MiningConfig)):
        if name in data:
            parts[name] = _coerce_tuples(sub, data[name])
    rest = {k: v for k, v in data.items() if k not in parts}
    return _coerce_tuples(RunConfig, {**rest, **parts})


def load_run_config(path: str | None, overrides) -> RunConfig:
    data = {}
    if path:
        data = json.loads(Path(path).read_text())
    for item in overrides or []:
        key, _, raw = item.partition("=")
        if not _:
            raise SystemExit(f"--set expects section.key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return run_config_from_dict(data)


# --- dataset manifest --------------------------------------------------------

@dataclass
class ManifestEntry:
    frame_id: str
    scan_path: Path
    east: float
    north: float
    yaw: float | None
    split: str

    def meta(self) -> FrameMeta:
        return FrameMeta(self.frame_id, self.east, self.north, self.yaw)


def save_manifest(entries, path, config_hash: str = "") -> None:
    """One frame per line: frame_id scan_path east north yaw split
    (tab-separated, '-' for a missing yaw)."""
    lines = []
    if config_hash:
        lines.append(f"# config {config_hash}")
    for e in entries:
        yaw = "-" if e.yaw is None else f"{e.yaw:.17g}"
        lines.append(f"{e.frame_id}\t{e.scan_path}\t{e.east:.17g}\t"
                     f"{e.north:.17g}\t{yaw}\t{e.split}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path) -> list:
    path = Path(path)
    entries = []
    seen = set()
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise ValueError(f"{path}:{ln}: expected 6 tab-separated fields")
        fid, scan, east, north, yaw, split = parts
        if fid in seen:
            raise ValueError(f"{path}:{ln}: duplicate frame_id {fid!r}")
        seen.add(fid)
        scan_path = Path(scan)
        if not scan_path.is_absolute():
            scan_path = path.parent / scan_path
        entries.append(ManifestEntry(
            fid, scan_path, float(east), float(north),
            None if yaw == "-" else float(yaw), split))
    return entries


# --- synthetic dataset generation -------------------------------------------

def _serpentine(n: int, spacing: float):
    """n grid positions walked row by row, centered on the origin."""
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    pts = []
    for r in range(rows):
        cs = range(cols) if r % 2 == 0 else range(cols - 1, -1, -1)
        for c in cs:
            pts.append(((c - (cols - 1) / 2.0) * spacing,
                        (r - (rows - 1) / 2.0) * spacing))
            if len(pts) == n:
                return np.array(pts)
    return np.array(pts)


def synth_dataset(out_dir, seed: int, n_frames: int, revisit_fraction: float,
                  n_database: int = 0, n_queries: int = 0,
                  n_nonrevisit_queries: int = 0, query_jitter: float = 3.0,
                  density: float = 4.0, cfg: RunConfig | None = None) -> Path:
    """Generate scans plus a manifest for a looping trajectory.

    Exactly floor((n_frames-1) * revisit_fraction) training frames are
    revisits placed within ``query_jitter`` meters of an earlier fresh
    frame; fresh frames sit on a 24 m grid (pairwise far beyond the 18 m
    negative radius). Database frames extend the same grid; each query
    is jittered from a database frame. Fully deterministic per seed.
    """
    cfg = cfg or RunConfig()
    out = Path(out_dir)
    (out / "scans").mkdir(parents=True, exist_ok=True)
    traj_rng = np.random.default_rng([int(seed), 0x7247])   # trajectory substream

    n_revisit = int((n_frames - 1) * revisit_fraction) if n_frames > 1 else 0
    n_fresh = n_frames - n_revisit
    n_extra = n_database + n_nonrevisit_queries
    spacing = 24.0
    grid = _serpentine(n_fresh + n_extra, spacing)
    grid = grid + traj_rng.uniform(-2.0, 2.0, grid.shape)

    span = float(np.max(np.abs(grid))) * 2.0 if len(grid) else 40.0
    world = synth_world(seed, extent=span + 40.0, density=density)

    entries = []
    fresh_positions = []
    gi = 0
    acc_prev = 0
    for i in range(n_frames):
        revisit = i > 0 and int(i * revisit_fraction) > acc_prev
        if revisit:
            acc_prev = int(i * revisit_fraction)
            anchor = fresh_positions[traj_rng.integers(0, len(fresh_positions))]
            ang = traj_rng.uniform(0.0, 2.0 * np.pi)
            rad = traj_rng.uniform(0.0, query_jitter)
            pos = (anchor[0] + rad * np.cos(ang), anchor[1] + rad * np.sin(ang))
        else:
            pos = tuple(grid[gi])
            gi += 1
            fresh_positions.append(pos)
        entries.append(("train", pos))
    db_positions = []
    for j in range(n_database):
        pos = tuple(grid[gi])
        gi += 1
        db_positions.append(pos)
        entries.append(("database", pos))
    for j in range(n_queries):
        anchor = db_positions[int(traj_rng.integers(0, len(db_positions)))]
        ang = traj_rng.uniform(0.0, 2.0 * np.pi)
        rad = traj_rng.uniform(0.0, query_jitter)
        entries.append(("query", (anchor[0] + rad * np.cos(ang),
                                  anchor[1] + rad * np.sin(ang))))
    for j in range(n_nonrevisit_queries):
        pos = tuple(grid[gi])
        gi += 1
        entries.append(("query", pos))

    manifest = []
    for idx, (split, pos) in enumerate(entries):
        fid = f"{split[:2]}{idx:05d}"
        yaw = float(traj_rng.uniform(0.0, 2.0 * np.pi))
        meta = FrameMeta(fid, float(pos[0]), float(pos[1]), yaw)
        cloud = render_scan(world, meta, beams=cfg.beams,
                            azimuth_steps=cfg.azimuth_steps,
                            max_range=cfg.scan_range,
                            fov_up=cfg.riv.fov_up, fov_down=cfg.riv.fov_down)
        scan_path = out / "scans" / f"{fid}.bin"
        save_kitti_bin(cloud, scan_path)
        manifest.append(ManifestEntry(fid, Path("scans") / f"{fid}.bin",
                                      meta.east, meta.north, yaw, split))
    mpath = out / "manifest.txt"
    save_manifest(manifest, mpath, cfg.config_hash())
    return mpath


# --- frame encoding ----------------------------------------------------------

def encode_frame(cloud: PointCloud, cfg: RunConfig):
    riv = project_riv(cloud, cfg.riv)
    if cfg.bev_encoder == "ndt":
        bev = build_bev(cloud, cfg.bev)
    else:
        bev = build_std_bev(cloud, cfg.bev)
    return riv, bev


def _load_frames(entries, cfg: RunConfig, tensors_dir: Path | None = None):
    """Encode manifest entries (or load cached tensors with a matching
    config hash) into TrainFrames."""
    frames = []
    for e in entries:
        if tensors_dir is not None:
            riv_p = tensors_dir / f"riv_{e.frame_id}.tnsr"
            bev_p = tensors_dir / f"bev_{e.frame_id}.tnsr"
            if riv_p.exists() and bev_p.exists():
                rg, _, rh = load_tensor(riv_p)
                bg, _, bh = load_tensor(bev_p)
                if rh == cfg.config_hash() and bh == cfg.config_hash():
                    from .bev import BevMap
                    from .riv import RivImage
                    frames.append(TrainFrame(
                        e.meta(),
                        RivImage(rg, rg[0] > 0),
                        BevMap(bg, np.any(bg > 0, axis=0))))
                    continue
        if not e.scan_path.exists():
            raise FileNotFoundError(
                f"frame {e.frame_id}: scan file {e.scan_path} is missing")
        cloud = load_kitti_bin(e.scan_path, e.frame_id)
        riv, bev = encode_frame(cloud, cfg)
        frames.append(TrainFrame(e.meta(), riv, bev))
    return frames


# --- commands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = load_run_config(args.config, args.set)
    path = synth_dataset(args.out, args.seed if args.seed is not None else cfg.seed,
                         args.n_frames, args.revisit_fraction,
                         n_database=args.n_database, n_queries=args.n_queries,
                         n_nonrevisit_queries=args.n_nonrevisit_queries,
                         density=args.density, cfg=cfg)
    print(f"wrote {path}")
    return 0


def cmd_encode(args) -> int:
    cfg = load_run_config(args.config, args.set)
    entries = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()
    bev_names = BEV_CHANNEL_NAMES if cfg.bev_encoder == "ndt" else STD_BEV_CHANNEL_NAMES
    for e in entries:
        for prefix in ("riv", "bev"):
            existing = out / f"{prefix}_{e.frame_id}.tnsr"
            if existing.exists():
                _, _, old_hash = load_tensor(existing)
                if old_hash != chash:
                    raise SystemExit(
                        f"{existing} was encoded with config {old_hash}, "
                        f"current config is {chash}")
        if not e.scan_path.exists():
            raise SystemExit(f"frame {e.frame_id}: scan file {e.scan_path} is missing")
        cloud = load_kitti_bin(e.scan_path, e.frame_id)
        riv, bev = encode_frame(cloud, cfg)
        save_tensor(out / f"riv_{e.frame_id}.tnsr", riv.grid, RIV_CHANNEL_NAMES, chash)
        save_tensor(out / f"bev_{e.frame_id}.tnsr", bev.grid, bev_names, chash)
    print(f"encoded {len(entries)} frames into {out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, args.set)
    entries = [e for e in load_manifest(args.manifest) if e.split == "train"]
    if not entries:
        raise SystemExit("manifest has no train frames")
    tensors = Path(args.tensors) if args.tensors else None
    frames = _load_frames(entries, cfg, tensors)
    epochs = args.epochs if args.epochs is not None else cfg.epochs
    weights, logs = train(frames, cfg.net_for_run(), cfg.mining, epochs,
                          lr0=cfg.lr0, seed=cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "weights.ckpt", weights)
    write_loss_csv(logs, out / "loss_log.csv", cfg.config_hash())
    if logs:
        print(f"trained {epochs} epochs, final mean loss {logs[-1].mean_loss:.6f}")
    print(f"checkpoint at {out / 'weights.ckpt'}")
    return 0


def _descriptors_for(frames, weights):
    mat = np.stack([compute_descriptor(f.riv, f.bev, weights) for f in frames])
    ids = [f.meta.frame_id for f in frames]
    pos = np.array([[f.meta.east, f.meta.north] for f in frames])
    return ids, mat, pos


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config, args.set)
    entries = load_manifest(args.manifest)
    db_entries = [e for e in entries if e.split == "database"]
    q_entries = [e for e in entries if e.split == "query"]
    if not db_entries or not q_entries:
        raise SystemExit("manifest needs both database and query frames")
    weights = load_checkpoint(args.checkpoint, cfg.net_for_run())
    tensors = Path(args.tensors) if args.tensors else None
    db_frames = _load_frames(db_entries, cfg, tensors)
    q_frames = _load_frames(q_entries, cfg, tensors)
    db_ids, db_mat, db_pos = _descriptors_for(db_frames, weights)
    q_ids, q_mat, q_pos = _descriptors_for(q_frames, weights)

    index = DescriptorIndex(db_ids, db_mat, db_pos)
    queries = list(zip(q_mat, q_pos))
    report = pr_curve_max_f1_auc(index, queries, cfg.eval_pos_radius, cfg.eval_ks)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()
    save_descriptors(out / "database.desc", db_ids, db_mat, chash)
    save_descriptors(out / "queries.desc", q_ids, q_mat, chash)
    with open(out / "pr_curve.csv", "w") as f:
        f.write(f"# config {chash}\n")
        f.write("tau,precision,recall\n")
        for tau, (p, r) in zip(report.taus, report.pr_points):
            f.write(f"{tau:.9g},{p:.9g},{r:.9g}\n")
    payload = {
        "config": chash,
        "recall_at": {str(k): v for k, v in report.recall_at.items()},
        "max_f1": report.max_f1,
        "pr_auc": report.pr_auc,
        "n_queries": report.n_queries,
        "n_revisit_queries": report.n_revisit_queries,
        "excluded_queries": report.excluded_queries,
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for k in sorted(report.recall_at):
        print(f"recall@{k}: {report.recall_at[k]:.4f}")
    print(f"max F1: {report.max_f1:.4f}  PR-AUC: {report.pr_auc:.4f}")
    return 0


def invariance_bin_shifts(width: int, stride: int):
    """Representative cyclic shifts, all multiples of the azimuth stride."""
    raw = [1, 7, width // 4, width // 2, width - 1]
    ks = []
    for v in raw:
        k = max(stride, (v // stride) * stride)
        if 0 < k < width and k not in ks:
            ks.append(k)
    return ks


def cmd_invariance(args) -> int:
    cfg = load_run_config(args.config, args.set)
    entries = load_manifest(args.manifest)
    pick = [e for e in entries if args.frame_id is None or e.frame_id == args.frame_id]
    if not pick:
        raise SystemExit(f"frame {args.frame_id!r} not found in manifest")
    e = pick[0]
    cloud = load_kitti_bin(e.scan_path, e.frame_id)
    net_cfg = cfg.net_for_run()
    weights = (load_checkpoint(args.checkpoint, net_cfg)
               if args.checkpoint else init_weights(net_cfg))

    riv, bev = encode_frame(cloud, cfg)
    base = compute_descriptor(riv, bev, weights)

    rows = []
    worst_exact = 0.0
    for k in invariance_bin_shifts(cfg.riv.width, net_cfg.total_azimuth_stride):
        d = compute_descriptor(shift_azimuth(riv, k), shift_bev(bev, k), weights)
        drift = descriptor_distance(base, d)
        worst_exact = max(worst_exact, drift)
        rows.append(("bin_shift", float(k), drift))
    for deg in YAW_STUDY_DEGREES:
        rotated = apply_yaw(cloud, np.deg2rad(deg))
        riv_r, bev_r = encode_frame(rotated, cfg)
        drift = descriptor_distance(base, compute_descriptor(riv_r, bev_r, weights))
        rows.append(("yaw_deg", deg, drift))
        if deg == 360.0:
            worst_exact = max(worst_exact, drift)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "invariance.csv", "w") as f:
        f.write(f"# config {cfg.config_hash()}\n")
        f.write("kind,value,drift\n")
        for kind, value, drift in rows:
            f.write(f"{kind},{value:.9g},{drift:.12g}\n")
    for kind, value, drift in rows:
        print(f"{kind:>9} {value:8.1f}  drift {drift:.3e}")
    ok = worst_exact <= 1e-9
    print(f"exact-shift drift {worst_exact:.3e} ({'PASS' if ok else 'FAIL'} at 1e-9)")
    return 0 if ok else 1


def cmd_gradcheck(args) -> int:
    results = eg.primitive_gradcheck_suite(n_seeds=args.seeds)
    worst_name, worst = None, -1.0
    for name, err in results:
        status = "PASS" if err <= 1e-6 else "FAIL"
        print(f"{name:<24} max rel err {err:.3e}  {status}")
        if err > worst:
            worst_name, worst = name, err
    ok = worst <= 1e-6
    print(f"worst: {worst_name} at {worst:.3e} ({'PASS' if ok else 'FAIL'})")
    return 0 if ok else 1


def _bench_cloud(n_points: int, seed: int, max_range: float) -> PointCloud:
    rng = np.random.default_rng([seed, 0xBE7C])
    rho = rng.uniform(1.0, max_range * 0.98, n_points)
    phi = rng.uniform(-np.pi, np.pi, n_points)
    z = rng.uniform(-2.0, 6.0, n_points)
    xyz = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return PointCloud("bench", xyz, rng.uniform(0.0, 1.0, n_points))


def _time_stage(fn, repeats: int):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    arr = np.array(times)
    return float(arr.mean()), float(np.percentile(arr, 95))


def run_bench(cfg: RunConfig, n_points: int = 100_000, repeats: int = 100,
              forward_repeats: int | None = None, query_repeats: int | None = None,
              index_size: int = 2000) -> dict:
    """Latency stats (mean/p95 ms) for encode, forward, and query stages."""
    cloud = _bench_cloud(n_points, cfg.seed, cfg.riv.max_range)
    riv, bev = encode_frame(cloud, cfg)
    weights = init_weights(cfg.net_for_run())
    rng = np.random.default_rng([cfg.seed, 0x1D3])
    mat = rng.standard_normal((index_size, cfg.net.descriptor_dim))
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    index = DescriptorIndex([f"f{i}" for i in range(index_size)], mat,
                            rng.uniform(-100, 100, (index_size, 2)))
    q = mat[0]

    stats = {}
    stats["encode_riv"] = _time_stage(lambda: project_riv(cloud, cfg.riv), repeats)
    stats["encode_bev"] = _time_stage(lambda: build_bev(cloud, cfg.bev), repeats)
    stats["encode_total"] = _time_stage(lambda: encode_frame(cloud, cfg), repeats)
    stats["forward"] = _time_stage(
        lambda: compute_descriptor(riv, bev, weights),
        forward_repeats if forward_repeats is not None else repeats)
    stats["query_top20"] = _time_stage(
        lambda: query_topk(index, q, 20),
        query_repeats if query_repeats is not None else repeats)
    return stats


def cmd_bench(args) -> int:
    cfg = load_run_config(args.config, args.set)
    stats = run_bench(cfg, n_points=args.points, repeats=args.repeats,
                      forward_repeats=args.forward_repeats)
    for name, (mean, p95) in stats.items():
        print(f"{name:<14} mean {mean:8.2f} ms   p95 {p95:8.2f} ms")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lidarplace",
                                 description="LiDAR place recognition pipeline")
    ap.add_argument("--config", help="JSON run-config file")
    ap.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                    help="override a config field (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-frames", type=int, default=200)
    p.add_argument("--revisit-fraction", type=float, default=0.3)
    p.add_argument("--n-database", type=int, default=0)
    p.add_argument("--n-queries", type=int, default=0)
    p.add_argument("--n-nonrevisit-queries", type=int, default=0)
    p.add_argument("--density", type=float, default=4.0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("encode", help="write per-frame tensor files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("train", help="train and write a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--tensors", help="directory of precomputed tensor files")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="retrieval metrics against a database")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tensors")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("invariance", help="descriptor drift under rotation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--frame-id")
    p.set_defaults(fn=cmd_invariance)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("bench", help="per-stage latency statistics")
    p.add_argument("--points", type=int, default=100_000)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--forward-repeats", type=int, default=None)
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
