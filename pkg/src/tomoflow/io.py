"""File formats and run manifests.

Images and vector fields are stored as flat little-endian float64 binaries in
C (row-major) order next to a JSON sidecar describing the grid; sinograms are
stored angle-major with their geometry in the sidecar.  PNG exports are 8-bit
grayscale, min-max normalized, and are presentation artifacts only: nothing
reads them back.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .grid import Grid2, Image, VectorField2
from .radon import ParallelBeamGeometry, Sinogram

__all__ = [
    "write_image",
    "read_image",
    "write_vector_field",
    "read_vector_field",
    "write_sinogram",
    "read_sinogram",
    "write_png",
    "file_sha256",
    "write_manifest",
    "read_manifest",
]

_FLOAT_FMT = "%.17g"


def _grid_sidecar(grid: Grid2) -> dict:
    return {
        "nx": grid.nx,
        "ny": grid.ny,
        "x_min": grid.x_min,
        "x_max": grid.x_max,
        "y_min": grid.y_min,
        "y_max": grid.y_max,
    }


def _grid_from_sidecar(meta: dict) -> Grid2:
    return Grid2(
        nx=int(meta["nx"]),
        ny=int(meta["ny"]),
        x_min=float(meta["x_min"]),
        x_max=float(meta["x_max"]),
        y_min=float(meta["y_min"]),
        y_max=float(meta["y_max"]),
    )


def _write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_image(path: str, image: Image):
    """Write ``<path>`` (raw float64 LE, C order) and ``<path>.json``."""
    arr = np.ascontiguousarray(image.values, dtype="<f8")
    arr.tofile(path)
    _write_json(path + ".json", _grid_sidecar(image.grid))


def read_image(path: str) -> Image:
    with open(path + ".json") as fh:
        meta = json.load(fh)
    grid = _grid_from_sidecar(meta)
    values = np.fromfile(path, dtype="<f8")
    if values.size != grid.nx * grid.ny:
        raise ValueError(
            f"{path}: expected {grid.nx * grid.ny} samples, found {values.size}"
        )
    return Image(grid, values.reshape(grid.shape))


def write_vector_field(path: str, vf: VectorField2):
    """Both components in one file (u then v), grid in the sidecar."""
    arr = np.concatenate(
        [
            np.ascontiguousarray(vf.u, dtype="<f8").ravel(),
            np.ascontiguousarray(vf.v, dtype="<f8").ravel(),
        ]
    )
    arr.tofile(path)
    meta = _grid_sidecar(vf.grid)
    meta["components"] = ["u", "v"]
    _write_json(path + ".json", meta)


def read_vector_field(path: str) -> VectorField2:
    with open(path + ".json") as fh:
        meta = json.load(fh)
    grid = _grid_from_sidecar(meta)
    values = np.fromfile(path, dtype="<f8")
    n = grid.nx * grid.ny
    if values.size != 2 * n:
        raise ValueError(f"{path}: expected {2 * n} samples, found {values.size}")
    u = values[:n].reshape(grid.shape)
    v = values[n:].reshape(grid.shape)
    return VectorField2(grid, u, v)


def write_sinogram(path: str, sino: Sinogram):
    arr = np.ascontiguousarray(sino.values, dtype="<f8")
    arr.tofile(path)
    geo = sino.geometry
    _write_json(
        path + ".json",
        {
            "angles": list(geo.angles),
            "n_bins": geo.n_bins,
            "s_min": geo.s_min,
            "s_max": geo.s_max,
        },
    )


def read_sinogram(path: str) -> Sinogram:
    with open(path + ".json") as fh:
        meta = json.load(fh)
    geo = ParallelBeamGeometry(
        angles=tuple(float(a) for a in meta["angles"]),
        n_bins=int(meta["n_bins"]),
        s_min=float(meta["s_min"]),
        s_max=float(meta["s_max"]),
    )
    values = np.fromfile(path, dtype="<f8")
    if values.size != geo.n_angles * geo.n_bins:
        raise ValueError(
            f"{path}: expected {geo.n_angles * geo.n_bins} samples, found {values.size}"
        )
    return Sinogram(geo, values.reshape((geo.n_angles, geo.n_bins)))


def write_png(path: str, values: np.ndarray):
    """8-bit grayscale export, min-max normalized. Presentation only.

    The array is in (x, y) index order; the PNG is written with y up.
    """
    from PIL import Image as PilImage

    arr = np.asarray(values, dtype=np.float64)
    lo = float(arr.min())
    hi = float(arr.max())
    if hi > lo:
        norm = (arr - lo) / (hi - lo)
    else:
        norm = np.zeros_like(arr)
    # (nx, ny) with y up -> image rows top-to-bottom
    img8 = np.round(255.0 * norm.T[::-1, :]).astype(np.uint8)
    PilImage.fromarray(img8, mode="L").save(path)


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: str, kind: str, config: dict, files: list, extra: dict = None):
    """Record what a pipeline stage produced.

    ``files`` are paths relative to the manifest's directory; each entry is
    hashed so downstream stages can refuse stale inputs.  ``manifest_sha256``
    covers only ``kind``, ``config`` and ``files`` so that reruns of a
    deterministic stage agree on it; ``extra`` (timings, achieved noise
    levels and similar annotations) rides along outside the hash.
    """
    base = os.path.dirname(os.path.abspath(path))
    payload = {
        "kind": kind,
        "config": config,
        "files": {
            rel: file_sha256(os.path.join(base, rel)) for rel in sorted(files)
        },
    }
    canonical = json.dumps(payload, sort_keys=True).encode()
    digest = hashlib.sha256(canonical).hexdigest()
    if extra:
        payload.update(extra)
    payload["manifest_sha256"] = digest
    _write_json(path, payload)


def read_manifest(path: str, verify: bool = True) -> dict:
    """Load a manifest; with ``verify`` recompute file hashes and fail on drift."""
    with open(path) as fh:
        payload = json.load(fh)
    if verify:
        base = os.path.dirname(os.path.abspath(path))
        for rel, digest in payload.get("files", {}).items():
            target = os.path.join(base, rel)
            if not os.path.exists(target):
                raise FileNotFoundError(f"manifest references missing file: {target}")
            actual = file_sha256(target)
            if actual != digest:
                raise ValueError(
                    f"stale input: {target} hash {actual[:12]} != recorded {digest[:12]}"
                )
    return payload
