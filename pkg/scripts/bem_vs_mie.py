#!/usr/bin/env python3
"""Convergence of the single-layer Dirichlet solver against the Mie series."""

import argparse
import csv
import time

import numpy as np

from bubblelab.bemlimit import mie_soft_sphere, solve_dirichlet
from bubblelab.fields import fibonacci_directions
from bubblelab.meshes import icosphere
from bubblelab.pointscat import IncidentWave


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kappa0", type=float, default=1.0)
    parser.add_argument("--levels", type=int, nargs="+", default=[2, 3, 4])
    parser.add_argument("--directions", type=int, default=200)
    parser.add_argument("--out", default="bem_vs_mie.csv")
    args = parser.parse_args()

    inc = IncidentWave(args.kappa0, np.array([0.0, 0.0, 1.0]))
    dirs = fibonacci_directions(args.directions)
    mie = mie_soft_sphere(args.kappa0, 1.0, dirs, inc.theta)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["panels", "rel_sup_err", "wall_time_s"])
        for level in args.levels:
            mesh = icosphere(level)
            t0 = time.perf_counter()
            _, ff = solve_dirichlet(mesh, inc, dirs)
            wall = time.perf_counter() - t0
            rel = float(np.abs(ff.values - mie.values).max() / np.abs(mie.values).max())
            writer.writerow([mesh.n_panels, repr(rel), repr(wall)])
            print(f"{mesh.n_panels:6d} panels: rel sup err {rel:.3e}  ({wall:.1f}s)")
    print(f"-> {args.out}")


if __name__ == "__main__":
    main()
