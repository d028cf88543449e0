"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--sizes 500,5000] [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from cylstereo import _core_py
from cylstereo.simulation import SimulationSpec, sample_2d_direct

try:
    from cylstereo import _core
except ImportError:  # extension not built
    _core = None

VOLUME = 3


def cases(obs):
    z, h = obs.z, obs.h
    poles = np.unique(np.concatenate([[0.0], _core_py.poles(z, h, VOLUME)]))
    grid = np.geomspace(poles[1], poles[-1], 256)
    u = _core_py.un_grid(z, h, VOLUME, poles)
    return {
        "un_grid (all poles)": lambda m: m.un_grid(z, h, VOLUME, poles),
        "ntilde_grid (256 pts)": lambda m: m.ntilde_grid(z, h, VOLUME, grid),
        "window_count_grid (256 pts)": lambda m: m.window_count_grid(z, h, VOLUME, grid, 0.1),
        "upper_hull (all poles)": lambda m: m.upper_hull(poles, u),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="500,5000")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = [("python", _core_py)] + ([("cython", _core)] if _core is not None else [])
    print(f"{'n':>6}  {'kernel':<28}" + "".join(f"{name:>12}" for name, _ in backends) + "     speedup")
    for n in (int(s) for s in args.sizes.split(",")):
        obs = sample_2d_direct(SimulationSpec(n, seed=1))
        for label, fn in cases(obs).items():
            times = [min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for _, mod in backends]
            speed = f"{times[0] / times[1]:10.1f}x" if len(times) == 2 else ""
            print(f"{n:>6}  {label:<28}" + "".join(f"{t * 1e3:10.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
