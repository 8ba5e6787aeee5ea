import hashlib
import json

import numpy as np
import pytest

from tomoflow.grid import Grid2, Image, VectorField2
from tomoflow.io import (
    file_sha256,
    read_image,
    read_manifest,
    read_sinogram,
    read_vector_field,
    write_image,
    write_manifest,
    write_png,
    write_sinogram,
    write_vector_field,
)
from tomoflow.radon import ParallelBeamGeometry, Sinogram


def test_image_round_trip(tmp_path):
    g = Grid2(12, 9, -3.0, 3.0, 0.0, 4.5)
    rng = np.random.default_rng(0)
    img = Image(g, rng.standard_normal(g.shape))
    path = str(tmp_path / "img.raw")
    write_image(path, img)
    back = read_image(path)
    assert back.grid == g
    assert np.array_equal(back.values, img.values)


def test_image_size_mismatch(tmp_path):
    g = Grid2(4, 4, 0, 1, 0, 1)
    path = str(tmp_path / "img.raw")
    write_image(path, Image(g, np.ones(g.shape)))
    with open(path, "ab") as fh:
        fh.write(b"\x00" * 8)
    with pytest.raises(ValueError):
        read_image(path)


def test_vector_field_round_trip(tmp_path):
    g = Grid2(7, 11, -1, 1, -2, 2)
    rng = np.random.default_rng(1)
    vf = VectorField2(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    path = str(tmp_path / "field.raw")
    write_vector_field(path, vf)
    back = read_vector_field(path)
    assert back.grid == g
    assert np.array_equal(back.u, vf.u)
    assert np.array_equal(back.v, vf.v)


def test_sinogram_round_trip(tmp_path):
    geo = ParallelBeamGeometry((0.0, 0.7, 1.4), 17, -5.0, 5.0)
    rng = np.random.default_rng(2)
    sino = Sinogram(geo, rng.standard_normal(geo.shape))
    path = str(tmp_path / "sino.raw")
    write_sinogram(path, sino)
    back = read_sinogram(path)
    assert back.geometry == geo
    assert np.array_equal(back.values, sino.values)


def test_png_export(tmp_path):
    from PIL import Image as PilImage

    g = Grid2(16, 8, 0, 2, 0, 1)
    x, y = g.meshgrid()
    path = tmp_path / "img.png"
    write_png(str(path), x + y)
    with PilImage.open(path) as im:
        assert im.mode == "L"
        assert im.size == (16, 8)  # width nx, height ny
        arr = np.asarray(im)
    assert arr.min() == 0 and arr.max() == 255
    # constant image must not divide by zero
    write_png(str(tmp_path / "flat.png"), np.full((4, 4), 3.0))


def test_file_sha256_known_value(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"tomoflow")
    assert file_sha256(str(p)) == hashlib.sha256(b"tomoflow").hexdigest()


def test_manifest_round_trip_and_verify(tmp_path):
    g = Grid2(4, 4, 0, 1, 0, 1)
    write_image(str(tmp_path / "a.raw"), Image(g, np.ones(g.shape)))
    mpath = str(tmp_path / "stage_manifest.json")
    write_manifest(mpath, "stage", {"p": 1}, ["a.raw", "a.raw.json"])
    payload = read_manifest(mpath)
    assert payload["kind"] == "stage"
    assert payload["config"] == {"p": 1}
    assert set(payload["files"]) == {"a.raw", "a.raw.json"}
    assert len(payload["manifest_sha256"]) == 64


def test_manifest_detects_tampering(tmp_path):
    p = tmp_path / "a.raw"
    p.write_bytes(b"\x00" * 32)
    mpath = str(tmp_path / "m.json")
    write_manifest(mpath, "stage", {}, ["a.raw"])
    p.write_bytes(b"\x01" * 32)
    with pytest.raises(ValueError, match="stale input"):
        read_manifest(mpath)
    assert read_manifest(mpath, verify=False)["kind"] == "stage"


def test_manifest_detects_missing_file(tmp_path):
    p = tmp_path / "a.raw"
    p.write_bytes(b"\x00" * 32)
    mpath = str(tmp_path / "m.json")
    write_manifest(mpath, "stage", {}, ["a.raw"])
    p.unlink()
    with pytest.raises(FileNotFoundError):
        read_manifest(mpath)


def test_manifest_hash_ignores_extra(tmp_path):
    p = tmp_path / "a.raw"
    p.write_bytes(b"\x07" * 16)
    m1 = str(tmp_path / "m1.json")
    m2 = str(tmp_path / "m2.json")
    write_manifest(m1, "stage", {"k": 2}, ["a.raw"], extra={"wall_time_s": 1.23})
    write_manifest(m2, "stage", {"k": 2}, ["a.raw"], extra={"wall_time_s": 9.87})
    h1 = json.loads((tmp_path / "m1.json").read_text())
    h2 = json.loads((tmp_path / "m2.json").read_text())
    assert h1["manifest_sha256"] == h2["manifest_sha256"]
    assert h1["wall_time_s"] != h2["wall_time_s"]


def test_manifest_hash_tracks_inputs(tmp_path):
    p = tmp_path / "a.raw"
    p.write_bytes(b"\x07" * 16)
    m1 = str(tmp_path / "m1.json")
    m2 = str(tmp_path / "m2.json")
    m3 = str(tmp_path / "m3.json")
    write_manifest(m1, "stage", {"k": 2}, ["a.raw"])
    write_manifest(m2, "stage", {"k": 3}, ["a.raw"])  # config change
    p.write_bytes(b"\x08" * 16)
    write_manifest(m3, "stage", {"k": 2}, ["a.raw"])  # content change
    digests = [
        json.loads((tmp_path / n).read_text())["manifest_sha256"]
        for n in ("m1.json", "m2.json", "m3.json")
    ]
    assert len(set(digests)) == 3
