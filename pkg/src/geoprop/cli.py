"""Batch command-line driver.

Subcommands wrap the library with reproducible file outputs: every run is
described by a JSON config plus flag overrides (flags win), and every output
artifact embeds the tool version, a hash of the effective config, and the
seed.  Reruns of an identical config are byte-identical for any thread count.

Exit codes: 0 success, 1 numerical/domain error, 2 I/O or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .disparity import DEFAULT_TV_CALIBRATION, TvCalibration, tv_class, tv_to_sigma
from .errors import FormatError, GeopropError
from .evaluate import (
    LE90_FACTOR,
    h90_radius,
    neighborhood_normalized_distance,
    normalized_distance,
)
from .formats import (
    read_point_cloud,
    read_point_cloud_csv,
    read_raster,
    write_ascii_grid,
    write_point_cloud,
    write_raster,
)
from .fusion import GridSpec, fuse_dsm, median_fuse
from .geodesy import GeodeticPoint, TangentFrame
from .intersect import (
    RNG_ALGORITHM,
    error_ellipsoid,
    intersect_unweighted,
    intersect_weighted,
    mig_covariance,
    monte_carlo_scatter,
    unweighted_estimator_covariance,
)
from .rpc import RpcModel, fit_affine_camera
from .synth import (
    SCENE_TEMPLATES,
    build_scene_geometry,
    load_scene_template,
    make_pushbroom_rpc,
    make_stereo_clouds,
    make_surface,
    scene_from_config,
)
from . import plots

log = logging.getLogger("geoprop")


# ---------------------------------------------------------------------------
# Config plumbing

def _config_hash(cfg: dict) -> str:
    # thread count and output location change where and how fast results are
    # written, never what they are; keep them out of the identity hash
    hashed = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    canon = json.dumps(hashed, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _load_config(path):
    if path is None:
        return {}
    with open(path) as f:
        return json.load(f)


def _effective(defaults: dict, config: dict, overrides: dict) -> dict:
    cfg = dict(defaults)
    cfg.update({k: v for k, v in config.items() if v is not None})
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _meta(cfg: dict) -> dict:
    return {
        "tool_version": __version__,
        "config_hash": _config_hash(cfg),
        "seed": cfg.get("seed", 0),
        "rng": RNG_ALGORITHM,
    }


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _resolve_scene(value, rho=None):
    if isinstance(value, str):
        if value in SCENE_TEMPLATES:
            cfg = load_scene_template(value)
        else:
            with open(value) as f:
                cfg = json.load(f)
    elif isinstance(value, dict):
        cfg = value
    else:
        raise ValueError("scene must be a template name, a path, or an inline object")
    scene = scene_from_config(cfg)
    if rho is not None:
        scene.errors = [dataclasses.replace(e, rho=float(rho)) for e in scene.errors]
    return scene


def _read_cloud_any(path):
    if str(path).endswith(".csv"):
        return read_point_cloud_csv(path)
    return read_point_cloud(path)


def _grid_spec(cfg_grid: dict) -> GridSpec:
    return GridSpec(
        origin_x=float(cfg_grid["origin_x"]),
        origin_y=float(cfg_grid["origin_y"]),
        spacing=float(cfg_grid["spacing"]),
        width=int(cfg_grid["width"]),
        height=int(cfg_grid["height"]),
    )


def _out_dir(cfg):
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands

def cmd_fit_affine(args):
    config = _load_config(args.config)
    cfg = _effective(
        {"n_samples": 100, "seed": 0, "out": "."},
        config,
        {"rpc": args.rpc, "n_samples": args.n_samples, "seed": args.seed, "out": args.out},
    )
    out = _out_dir(cfg)
    meta = _meta(cfg)
    model = RpcModel.load(cfg["rpc"])
    origin = GeodeticPoint(**cfg["origin"])
    frame = TangentFrame(origin)
    tile = np.asarray(cfg["tile"], dtype=float)
    camera = fit_affine_camera(model, tile, frame, n_samples=cfg["n_samples"], seed=cfg["seed"])

    # held-out residuals on a fresh sample of the tile
    rng = np.random.default_rng(int(cfg["seed"]) + 1)
    pts = rng.uniform(tile[:, 0], tile[:, 1], size=(256, 3))
    lon, lat, h = frame.enu_to_geodetic(pts)
    line, samp = model.project(lon, lat, h)
    cu, cv = camera.project(pts)
    holdout = np.sqrt(((line - cu) ** 2 + (samp - cv) ** 2) / 2.0)

    _write_json(os.path.join(out, "camera.json"), {"camera": camera.to_dict(), "meta": meta})
    _write_json(
        os.path.join(out, "fit_report.json"),
        {
            "rms_residual_px": camera.rms_residual,
            "holdout_rms_px": float(np.sqrt(np.mean(holdout**2))),
            "holdout_max_px": float(np.max(holdout)),
            "n_samples": cfg["n_samples"],
            "meta": meta,
        },
    )
    with open(os.path.join(out, "holdout_residuals.csv"), "w") as f:
        f.write(f"# tool_version={meta['tool_version']} config_hash={meta['config_hash']} seed={meta['seed']}\n")
        f.write("residual_px\n")
        for r in holdout:
            f.write(f"{r:.17g}\n")
    plots.histogram_figure(
        holdout,
        os.path.join(out, "residuals.png"),
        xlabel="reprojection residual (px)",
        title="affine camera held-out residuals",
        meta=meta,
    )
    log.info("fit-affine: rms=%.3g px over %d samples", camera.rms_residual, cfg["n_samples"])
    return 0


def cmd_intersect(args):
    config = _load_config(args.config)
    cfg = _effective(
        {"confidence": 0.9, "weighted": True, "mig": False, "seed": 0, "out": "."},
        config,
        {
            "scene": args.scene,
            "confidence": args.confidence,
            "weighted": False if args.no_weights else None,
            "mig": True if args.mig else None,
            "rho": args.rho,
            "seed": args.seed,
            "out": args.out,
        },
    )
    out = _out_dir(cfg)
    meta = _meta(cfg)
    scene = _resolve_scene(cfg["scene"], rho=cfg.get("rho"))
    geometry = build_scene_geometry(scene)
    result = intersect_weighted(geometry.bundle)
    if cfg["weighted"]:
        x, cov = result.point, result.covariance
    else:
        x = intersect_unweighted(geometry.bundle)
        cov = unweighted_estimator_covariance(geometry.bundle)
    ellipsoid = error_ellipsoid(cov, cfg["confidence"], center=x)
    report = {
        "X_enu": x.tolist(),
        "P": cov.reshape(-1).tolist(),
        "ellipsoid": {
            "confidence": ellipsoid.confidence,
            "semi_axes": ellipsoid.semi_axes.tolist(),
            "rotation": ellipsoid.rotation.reshape(-1).tolist(),
        },
        "residuals": result.ray_distances.tolist(),
        "weighted": bool(cfg["weighted"]),
        "seed": cfg["seed"],
        "n_samples": None,
        "meta": meta,
    }
    if cfg["mig"]:
        mig = mig_covariance(
            geometry.bundle.projection_stack, geometry.jacobian, geometry.pose_cov.matrix
        )
        report["mig_covariance"] = mig.reshape(-1).tolist()
    _write_json(os.path.join(out, "intersection.json"), report)
    plots.ellipsoid_views(ellipsoid, os.path.join(out, "ellipsoid.png"), meta=meta)
    log.info("intersect: %d rays, X=(%.3f, %.3f, %.3f)", len(geometry.bundle), *x)
    return 0


def cmd_montecarlo(args):
    config = _load_config(args.config)
    cfg = _effective(
        {"n_samples": 100000, "weighted": False, "seed": 0, "threads": 1, "out": "."},
        config,
        {
            "scene": args.scene,
            "n_samples": args.n_samples,
            "weighted": True if args.weighted else None,
            "rho": args.rho,
            "seed": args.seed,
            "threads": args.threads,
            "out": args.out,
        },
    )
    out = _out_dir(cfg)
    meta = _meta(cfg)
    scene = _resolve_scene(cfg["scene"], rho=cfg.get("rho"))
    geometry = build_scene_geometry(scene)
    mc = monte_carlo_scatter(
        geometry.bundle,
        geometry.pose_cov,
        geometry.jacobian,
        n_samples=cfg["n_samples"],
        seed=cfg["seed"],
        weighted=cfg["weighted"],
        n_threads=cfg["threads"],
    )
    weighted_cov = intersect_weighted(geometry.bundle).covariance
    sandwich = unweighted_estimator_covariance(geometry.bundle)
    analytic = weighted_cov if cfg["weighted"] else sandwich
    rel = float(np.linalg.norm(mc.sample_cov - analytic) / np.linalg.norm(analytic))

    with open(os.path.join(out, "scatter.csv"), "w") as f:
        f.write(
            f"# tool_version={meta['tool_version']} config_hash={meta['config_hash']} "
            f"seed={meta['seed']} rng={mc.algorithm}\n"
        )
        f.write("x,y,z\n")
        for p in mc.points:
            f.write(f"{p[0]:.17g},{p[1]:.17g},{p[2]:.17g}\n")
    _write_json(
        os.path.join(out, "montecarlo.json"),
        {
            "n_samples": mc.n_samples,
            "seed": mc.seed,
            "rng": mc.algorithm,
            "weighted_sampling": mc.weighted,
            "sample_covariance": mc.sample_cov.reshape(-1).tolist(),
            "analytic_covariance": analytic.reshape(-1).tolist(),
            "relative_frobenius_error": rel,
            "det_weighted": float(np.linalg.det(weighted_cov)),
            "det_unweighted": float(np.linalg.det(sandwich)),
            "meta": meta,
        },
    )
    plots.scatter_views(mc.points, os.path.join(out, "scatter.png"), meta=meta)
    log.info(
        "montecarlo: %d samples, relative Frobenius error vs analytic %.3g", mc.n_samples, rel
    )
    return 0


def cmd_fuse(args):
    config = _load_config(args.config)
    cfg = _effective(
        {
            "radius": None,
            "k_max": 16,
            "tol": 0.5,
            "median": False,
            "ascii": False,
            "seed": 0,
            "threads": 1,
            "out": ".",
        },
        config,
        {
            "radius": args.radius,
            "k_max": args.k_max,
            "tol": args.tol,
            "median": True if args.median else None,
            "seed": args.seed,
            "threads": args.threads,
            "out": args.out,
        },
    )
    out = _out_dir(cfg)
    meta = _meta(cfg)
    clouds = [_read_cloud_any(p) for p in cfg["clouds"]]
    spec = _grid_spec(cfg["grid"])
    grid = fuse_dsm(
        clouds,
        spec,
        radius=cfg["radius"],
        k_max=cfg["k_max"],
        tol=cfg["tol"],
        n_threads=cfg["threads"],
    )
    layers = {
        "z": grid.z,
        "sigma_z": grid.sigma_z,
        "sigma_h": grid.sigma_h,
        "pbar": grid.pbar,
    }
    for name, arr in layers.items():
        write_raster(os.path.join(out, name), arr, spec, layer=name, meta=meta)
        if cfg["ascii"]:
            write_ascii_grid(os.path.join(out, f"{name}.asc"), arr, spec)
    if cfg["median"]:
        zmed = median_fuse(clouds, spec, radius=cfg["radius"], k_max=cfg["k_max"], n_threads=cfg["threads"])
        write_raster(os.path.join(out, "z_median"), zmed, spec, layer="z", meta=meta)
    _write_json(
        os.path.join(out, "fuse_report.json"),
        {
            "n_clouds": len(clouds),
            "n_points": int(sum(len(c) for c in clouds)),
            "n_valid_cells": int(grid.valid.sum()),
            "n_low_confidence_cells": int(grid.low_confidence.sum()),
            "radius": cfg["radius"] if cfg["radius"] is not None else spec.spacing,
            "k_max": cfg["k_max"],
            "tol": cfg["tol"],
            "meta": meta,
        },
    )
    plots.raster_figure(grid.z, spec, os.path.join(out, "z.png"), "fused elevation (m)", meta=meta)
    plots.raster_figure(
        grid.sigma_h, spec, os.path.join(out, "sigma_h.png"),
        "horizontal sigma (m)", cmap="magma", meta=meta,
    )
    plots.raster_figure(
        grid.sigma_z, spec, os.path.join(out, "sigma_z.png"),
        "vertical sigma (m)", cmap="magma", meta=meta,
    )
    log.info("fuse: %d clouds -> %d valid cells", len(clouds), int(grid.valid.sum()))
    return 0


def cmd_evaluate(args):
    config = _load_config(args.config)
    cfg = _effective(
        {"neighborhood": False, "gt_spacing": None, "seed": 0, "out": "."},
        config,
        {
            "neighborhood": True if args.neighborhood else None,
            "seed": args.seed,
            "out": args.out,
        },
    )
    out = _out_dir(cfg)
    meta = _meta(cfg)
    z, spec, _ = read_raster(cfg["dsm_z"])
    sigma_z, spec_s, _ = read_raster(cfg["dsm_sigma_z"])
    gt, spec_gt, _ = read_raster(cfg["gt"])
    if spec_s != spec or spec_gt != spec:
        raise FormatError("dsm and ground-truth rasters are not co-registered")
    gt_spacing = cfg["gt_spacing"] if cfg["gt_spacing"] is not None else spec.spacing
    ndist, summary = normalized_distance(z, sigma_z, gt)
    report = {
        "plain": summary.to_dict(),
        "le90_factor": LE90_FACTOR,
        "meta": meta,
    }
    final = ndist
    if cfg["neighborhood"]:
        sigma_h, spec_h, _ = read_raster(cfg["dsm_sigma_h"])
        if spec_h != spec:
            raise FormatError("sigma_h raster is not co-registered with the DSM")
        radius = h90_radius(np.nan_to_num(sigma_h, nan=0.0), gt_spacing)
        ndist_nb, summary_nb = neighborhood_normalized_distance(
            z, sigma_z, gt, radius, spec.spacing
        )
        report["neighborhood"] = summary_nb.to_dict()
        report["gt_spacing"] = gt_spacing
        final = ndist_nb
        write_raster(os.path.join(out, "ndist_h90"), ndist_nb, spec, layer="ndist", meta=meta)
    write_raster(os.path.join(out, "ndist"), ndist, spec, layer="ndist", meta=meta)
    _write_json(os.path.join(out, "evaluate_report.json"), report)
    finite = np.where(np.isinf(final), np.nan, final)
    plots.raster_figure(
        finite, spec, os.path.join(out, "ndist.png"), "normalized distance", cmap="magma", meta=meta
    )
    plots.histogram_figure(
        final[np.isfinite(final)],
        os.path.join(out, "ndist_hist.png"),
        xlabel="normalized distance",
        title="normalized distance distribution",
        vline=LE90_FACTOR,
        meta=meta,
    )
    log.info("evaluate: fraction within LE90 = %.3f", summary.fraction_within_le90)
    return 0


def cmd_tv(args):
    config = _load_config(args.config)
    cfg = _effective(
        {"theta": 1.0, "n_max": 8, "calibration": None, "seed": 0, "out": "."},
        config,
        {"theta": args.theta, "n_max": args.n_max, "seed": args.seed, "out": args.out},
    )
    out = _out_dir(cfg)
    meta = _meta(cfg)
    disp, spec, _ = read_raster(cfg["disparity"])
    cal = (
        TvCalibration.from_dict(cfg["calibration"])
        if cfg["calibration"]
        else DEFAULT_TV_CALIBRATION
    )
    classes = tv_class(disp, theta=cfg["theta"], n_max=cfg["n_max"])
    sigma = tv_to_sigma(classes, cal)
    class_layer = np.where(classes < 0, np.nan, classes.astype(float))
    write_raster(os.path.join(out, "tv_class"), class_layer, spec, layer="tv_class", meta=meta)
    write_raster(os.path.join(out, "sigma_disp"), sigma, spec, layer="sigma_disp", meta=meta)
    _write_json(
        os.path.join(out, "tv_report.json"),
        {
            "theta": cfg["theta"],
            "n_max": cfg["n_max"],
            "calibration": cal.to_dict(),
            "class_histogram": {
                str(k): int(v) for k, v in zip(*np.unique(classes, return_counts=True))
            },
            "meta": meta,
        },
    )
    plots.raster_figure(
        class_layer, spec, os.path.join(out, "tv_class.png"), "total-variation class", meta=meta
    )
    plots.raster_figure(
        sigma, spec, os.path.join(out, "sigma_disp.png"),
        "disparity sigma (px)", cmap="magma", meta=meta,
    )
    log.info("tv: classes computed with theta=%.3g, n_max=%d", cfg["theta"], cfg["n_max"])
    return 0


def cmd_simulate(args):
    config = _load_config(args.config)
    cfg = _effective(
        {
            "template": None,
            "scene": None,
            "surface": {"kind": "plane", "z0": 7.0},
            "clouds": {
                "n_pairs": 5,
                "extent": [[-30.0, 30.0], [-30.0, 30.0]],
                "lattice_spacing": 0.4,
                "sigma_xy": 0.05,
                "sigma_z": 0.2,
                "outlier_rate": 0.05,
            },
            "grid": None,
            "rpc": {"tile": [[-250.0, 250.0], [-250.0, 250.0], [0.0, 120.0]], "gsd": 0.5,
                    "perturbation": 0.0},
            "seed": 0,
            "out": ".",
        },
        config,
        {"template": args.template, "seed": args.seed, "out": args.out},
    )
    out = _out_dir(cfg)
    meta = _meta(cfg)
    if cfg["scene"] is not None:
        scene_cfg = cfg["scene"]
    else:
        scene_cfg = load_scene_template(cfg["template"] or "buenos_aires")
    scene_cfg = dict(scene_cfg)
    scene_cfg["seed"] = cfg["seed"]
    scene = scene_from_config(scene_cfg)
    _write_json(os.path.join(out, "scene.json"), scene_cfg)

    rpc_cfg = cfg["rpc"]
    synthetic = make_pushbroom_rpc(
        scene.images[0],
        tile=np.asarray(rpc_cfg["tile"], dtype=float),
        gsd=float(rpc_cfg.get("gsd", 0.5)),
        perturbation=float(rpc_cfg.get("perturbation", 0.0)),
        seed=cfg["seed"],
    )
    synthetic.model.save(os.path.join(out, "rpc.json"))

    clouds_cfg = cfg["clouds"]
    surface_cfg = cfg["surface"]
    clouds = make_stereo_clouds(
        surface_cfg,
        n_pairs=int(clouds_cfg["n_pairs"]),
        extent=clouds_cfg["extent"],
        lattice_spacing=float(clouds_cfg["lattice_spacing"]),
        sigma_xy=float(clouds_cfg.get("sigma_xy", 0.0)),
        sigma_z=float(clouds_cfg.get("sigma_z", 0.0)),
        outlier_rate=float(clouds_cfg.get("outlier_rate", 0.0)),
        seed=cfg["seed"],
    )
    cloud_dir = os.path.join(out, "clouds")
    os.makedirs(cloud_dir, exist_ok=True)
    cloud_paths = []
    for cloud in clouds:
        path = os.path.join(cloud_dir, f"{cloud.pair_id}.wpc")
        write_point_cloud(path, cloud)
        cloud_paths.append(path)

    if cfg["grid"] is not None:
        spec = _grid_spec(cfg["grid"])
    else:
        (xmin, xmax), (ymin, ymax) = clouds_cfg["extent"]
        spacing = float(clouds_cfg["lattice_spacing"])
        spec = GridSpec(
            origin_x=float(xmin),
            origin_y=float(ymin),
            spacing=spacing,
            width=int(round((xmax - xmin) / spacing)),
            height=int(round((ymax - ymin) / spacing)),
        )
    surf = make_surface(surface_cfg["kind"], **{k: v for k, v in surface_cfg.items() if k != "kind"})
    xs, ys = np.meshgrid(spec.x_centers(), spec.y_centers())
    gt = surf(xs, ys)
    write_raster(os.path.join(out, "gt"), gt, spec, layer="z", meta=meta)
    plots.raster_figure(gt, spec, os.path.join(out, "gt.png"), "synthetic truth (m)", meta=meta)

    fuse_config = {
        "clouds": cloud_paths,
        "grid": {
            "origin_x": spec.origin_x,
            "origin_y": spec.origin_y,
            "spacing": spec.spacing,
            "width": spec.width,
            "height": spec.height,
        },
        "seed": cfg["seed"],
    }
    _write_json(os.path.join(out, "fuse_config.json"), fuse_config)
    _write_json(
        os.path.join(out, "manifest.json"),
        {
            "scene": "scene.json",
            "rpc": "rpc.json",
            "clouds": [os.path.relpath(p, out) for p in cloud_paths],
            "gt": "gt.json",
            "fuse_config": "fuse_config.json",
            "meta": meta,
        },
    )
    log.info("simulate: wrote %d clouds and fixtures under %s", len(clouds), out)
    return 0


# ---------------------------------------------------------------------------
# Parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="geoprop",
        description="Geospatial error prediction for multi-image satellite surface models.",
    )
    parser.add_argument("--version", action="version", version=f"geoprop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (default '.')")
        p.add_argument("--seed", type=int, help="RNG seed recorded in every output")
        p.add_argument("--threads", type=int, help="worker threads (results are identical)")

    p = sub.add_parser("fit-affine", help="fit an affine camera to an RPC over a tile")
    common(p)
    p.add_argument("--rpc", help="RPC model JSON path")
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.set_defaults(func=cmd_fit_affine)

    p = sub.add_parser("intersect", help="covariance-weighted multi-ray intersection")
    common(p)
    p.add_argument("--scene", help="scene config path, template name, or inline JSON")
    p.add_argument("--confidence", type=float)
    p.add_argument("--no-weights", action="store_true", help="plain least-squares intersection")
    p.add_argument("--mig", action="store_true", help="also emit the classical MIG covariance")
    p.add_argument("--rho", type=float, help="override the same-pass correlation")
    p.set_defaults(func=cmd_intersect)

    p = sub.add_parser("montecarlo", help="sample pose errors and intersect each draw")
    common(p)
    p.add_argument("--scene", help="scene config path or template name")
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--weighted", action="store_true", help="weighted per-sample intersection")
    p.add_argument("--rho", type=float)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("fuse", help="fuse stereo point clouds into a DSM with uncertainty")
    common(p)
    p.add_argument("--radius", type=float, help="binning radius in meters")
    p.add_argument("--k-max", type=int, dest="k_max")
    p.add_argument("--tol", type=float, help="consensus tolerance in meters")
    p.add_argument("--median", action="store_true", help="also emit a median-fused layer")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="score a DSM against co-registered ground truth")
    common(p)
    p.add_argument("--neighborhood", action="store_true", help="use the r_h90 neighborhood")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tv", help="total-variation classes and disparity sigma")
    common(p)
    p.add_argument("--theta", type=float)
    p.add_argument("--n-max", type=int, dest="n_max")
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("simulate", help="generate synthetic fixtures for the other commands")
    common(p)
    p.add_argument("--template", choices=SCENE_TEMPLATES, help="site scene template")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except GeopropError as exc:
        print(f"geoprop: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"geoprop: config/input error: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
