#!/usr/bin/env python3
"""Standing-wave modulus error at (h, dt), (h/2, dt/4), (h/4, dt/16) for p=3, alpha=-1, N=3, omega=2."""

import numpy as np

from graphnls.evolution import EvolutionConfig, evolve
from graphnls.grid import StarGraphGrid
from graphnls.profiles import WaveParams, build_profile_delta


def run(h, dt, stride, length=20.0, t_end=0.25):
    prm = WaveParams(3, -1.0, 2.0, 3.0)
    grid = StarGraphGrid.from_spacing(3, length, h)
    phi = build_profile_delta(prm, grid, on_coarse="ignore")
    rec = evolve(phi, EvolutionConfig(dt=dt, t_end=t_end, monitor_stride=stride), -1.0, 2.0, 3.0,
                 reference_modulus=np.abs(phi.edges))
    return float(rec.modulus_dev.max())


def main():
    prev = None
    print("h,dt,modulus_dev,ratio")
    for level in range(3):
        h, dt, stride = 0.02 / 2**level, 1e-4 / 4**level, 10 * 4**level
        err = run(h, dt, stride)
        ratio = prev / err if prev else float("nan")
        print(f"{h:g},{dt:g},{err:.4e},{ratio:.3f}")
        prev = err


if __name__ == "__main__":
    main()
