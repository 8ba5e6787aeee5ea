"""Project a star phantom, back-project the sinogram, save both as PNGs.

Also prints the duality pairing <Ax, y> vs <x, A'y>, which is the quickest
way to convince yourself the projector pair is consistent.
"""

import argparse
import os

import numpy as np

from tomoflow.grid import Grid2, image_inner
from tomoflow.io import write_png
from tomoflow.radon import ParallelBeamGeometry, radon_adjoint, radon_forward, sino_inner
from tomoflow.sim import PhantomSpec, make_phantom


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out/projector")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    grid = Grid2(128, 128, -16.0, 16.0, -16.0, 16.0)
    image = make_phantom(PhantomSpec("multi_star", grid, 1, 4.0, 3, seed=7))[0].values
    geom = ParallelBeamGeometry(
        tuple(k * np.pi / 60 for k in range(60)), 183, -24.0, 24.0
    )

    sino = radon_forward(grid, geom, image)
    back = radon_adjoint(grid, geom, sino)

    write_png(os.path.join(args.out, "phantom.png"), image)
    write_png(os.path.join(args.out, "sinogram.png"), sino)
    write_png(os.path.join(args.out, "backprojection.png"), back)

    y = np.random.default_rng(0).standard_normal(sino.shape)
    lhs = sino_inner(geom, sino, y)
    rhs = image_inner(grid, image, radon_adjoint(grid, geom, y))
    print(f"<Ax, y>  = {lhs:.12f}")
    print(f"<x, A'y> = {rhs:.12f}")
    print(f"wrote phantom/sinogram/backprojection PNGs to {args.out}")


if __name__ == "__main__":
    main()
