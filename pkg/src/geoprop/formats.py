"""On-disk formats: weighted point clouds, raster layers, and ASCII grid export.

Point clouds are a one-line JSON header {pair_id, count, frame} followed by
count little-endian float64 records of (x, y, z, p); a CSV variant with an
``x,y,z,p`` header row exists for interoperability.  Rasters are a row-major
little-endian float32 payload (.f32) beside a JSON sidecar carrying
{origin_xy, spacing, width, height, nodata, layer}.  NaN cells are written as
the nodata value and come back as NaN.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import FormatError
from .fusion import GridSpec, StereoCloud

NODATA = -9999.0
POINT_CLOUD_MAGIC = "geoprop-points-v1"
RASTER_MAGIC = "geoprop-raster-v1"

STANDARD_LAYERS = ("z", "sigma_z", "sigma_h", "pbar", "ndist")


def write_point_cloud(path, cloud: StereoCloud, frame=None):
    header = {
        "format": POINT_CLOUD_MAGIC,
        "pair_id": cloud.pair_id,
        "count": int(len(cloud)),
        "frame": frame if frame is not None else "local-enu",
    }
    records = np.column_stack([cloud.xyz, cloud.prob]).astype("<f8")
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(records.tobytes())


def read_point_cloud(path) -> StereoCloud:
    """Read a binary point cloud, dropping records with non-positive probability."""
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad point-cloud header") from exc
    if header.get("format") != POINT_CLOUD_MAGIC:
        raise FormatError(f"{path}: not a {POINT_CLOUD_MAGIC} file")
    count = int(header["count"])
    expected = count * 4 * 8
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    records = np.frombuffer(payload, dtype="<f8").reshape(count, 4)
    if np.any(records[:, 3] > 1.0):
        raise FormatError(f"{path}: point probabilities above 1")
    keep = records[:, 3] > 0.0
    records = records[keep]
    if len(records) == 0:
        raise FormatError(f"{path}: no points with positive probability")
    return StereoCloud(pair_id=str(header["pair_id"]), xyz=records[:, :3], prob=records[:, 3])


def write_point_cloud_csv(path, cloud: StereoCloud):
    with open(path, "w") as f:
        f.write("x,y,z,p\n")
        for (x, y, z), p in zip(cloud.xyz, cloud.prob):
            f.write(f"{x:.17g},{y:.17g},{z:.17g},{p:.17g}\n")


def read_point_cloud_csv(path, pair_id=None) -> StereoCloud:
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float)
    data = np.atleast_2d(data)
    if data.shape[1] != 4:
        raise FormatError(f"{path}: expected 4 CSV columns (x,y,z,p)")
    if np.any(data[:, 3] > 1.0):
        raise FormatError(f"{path}: point probabilities above 1")
    data = data[data[:, 3] > 0.0]
    if len(data) == 0:
        raise FormatError(f"{path}: no points with positive probability")
    name = pair_id if pair_id is not None else os.path.splitext(os.path.basename(path))[0]
    return StereoCloud(pair_id=name, xyz=data[:, :3], prob=data[:, 3])


def _raster_paths(stem):
    stem = str(stem)
    for suffix in (".json", ".f32"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    return stem + ".f32", stem + ".json"


def write_raster(stem, array, spec: GridSpec, layer, nodata=NODATA, meta=None):
    """Write a float32 raster payload and its JSON sidecar; returns the sidecar path."""
    array = np.asarray(array, dtype=float)
    if array.shape != (spec.height, spec.width):
        raise ValueError(f"array shape {array.shape} does not match grid spec")
    payload_path, sidecar_path = _raster_paths(stem)
    data = np.where(np.isfinite(array), array, nodata).astype("<f4")
    with open(payload_path, "wb") as f:
        f.write(data.tobytes())
    sidecar = {
        "format": RASTER_MAGIC,
        "layer": str(layer),
        "origin_xy": [spec.origin_x, spec.origin_y],
        "spacing": spec.spacing,
        "width": spec.width,
        "height": spec.height,
        "nodata": nodata,
        "dtype": "float32",
        "byte_order": "little",
    }
    if meta:
        sidecar["meta"] = meta
    with open(sidecar_path, "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    return sidecar_path


def read_raster(stem):
    """Read a raster written by write_raster: (array, GridSpec, sidecar dict)."""
    payload_path, sidecar_path = _raster_paths(stem)
    try:
        with open(sidecar_path) as f:
            sidecar = json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sidecar_path}: bad raster sidecar") from exc
    if sidecar.get("format") != RASTER_MAGIC:
        raise FormatError(f"{sidecar_path}: not a {RASTER_MAGIC} sidecar")
    spec = GridSpec(
        origin_x=float(sidecar["origin_xy"][0]),
        origin_y=float(sidecar["origin_xy"][1]),
        spacing=float(sidecar["spacing"]),
        width=int(sidecar["width"]),
        height=int(sidecar["height"]),
    )
    with open(payload_path, "rb") as f:
        payload = f.read()
    expected = spec.height * spec.width * 4
    if len(payload) != expected:
        raise FormatError(f"{payload_path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(spec.height, spec.width).astype(float)
    nodata = float(sidecar.get("nodata", NODATA))
    data = np.where(data == np.float32(nodata), np.nan, data)
    return data, spec, sidecar


def write_ascii_grid(path, array, spec: GridSpec, nodata=NODATA):
    """ESRI ASCII grid export for GIS viewers; rows are written north to south."""
    array = np.asarray(array, dtype=float)
    if array.shape != (spec.height, spec.width):
        raise ValueError(f"array shape {array.shape} does not match grid spec")
    filled = np.where(np.isfinite(array), array, nodata)
    with open(path, "w") as f:
        f.write(f"ncols {spec.width}\n")
        f.write(f"nrows {spec.height}\n")
        f.write(f"xllcorner {spec.origin_x:.17g}\n")
        f.write(f"yllcorner {spec.origin_y:.17g}\n")
        f.write(f"cellsize {spec.spacing:.17g}\n")
        f.write(f"NODATA_value {nodata:.17g}\n")
        for row in filled[::-1]:
            f.write(" ".join(f"{v:.17g}" for v in row))
            f.write("\n")
