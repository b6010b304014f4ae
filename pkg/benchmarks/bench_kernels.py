"""Time the numba and numpy kernels, and a full split step with each backend.

    python benchmarks/bench_kernels.py [--n 512] [--repeat 20]

Kernel timings use the suffixed functions directly, so both flavours run in
one process. The full-step timing switches backends through the
``GEOPHASE_DISABLE_JIT`` flag in a subprocess.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from geophase import kernels
from geophase.gauge import ConstantFlux, ModelParams, kick_tables
from geophase.spectral import GridSpec, build_grid

STEP_SNIPPET = """
import timeit
from geophase import kernels
from geophase.gauge import ConstantFlux, ModelParams
from geophase.spectral import GridSpec, PacketSpec, RunConfig, build_grid, make_packet, propagate
g = build_grid(GridSpec({n}, {n}))
p = ModelParams(200.0, 2.0, ConstantFlux(6.0))
psi = make_packet(g, PacketSpec())
propagate(psi, g, p, RunConfig(dtau=1e-4, n_steps=2))
t = min(timeit.repeat(lambda: propagate(psi, g, p, RunConfig(dtau=1e-4, n_steps=50, snapshot_stride=10)),
                      number=1, repeat=3))
print(kernels.backend_name(), t / 50)
"""


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(n, repeat):
    grid = build_grid(GridSpec(n, n))
    rng = np.random.default_rng(0)
    f = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    g = f.copy()
    diag, coup, phase = kick_tables(grid.xi, grid.eta, ModelParams(200.0, 2.0, ConstantFlux(6.0)), 1e-4)
    px, py = np.exp(1j * grid.kxi), np.exp(1j * grid.keta)
    # warm the JIT
    kernels.kick_numba(f, g, diag, coup, phase)
    kernels.separable_scale_numba(f, px, py)
    kernels.moments_numba(f, grid.xi, grid.eta, 0.0)
    rows = []
    for name, nb, npy in (
        ("kick", lambda: kernels.kick_numba(f, g, diag, coup, phase),
         lambda: kernels.kick_numpy(f, g, diag, coup, phase)),
        ("separable_scale", lambda: kernels.separable_scale_numba(f, px, py),
         lambda: kernels.separable_scale_numpy(f, px, py)),
        ("moments", lambda: kernels.moments_numba(f, grid.xi, grid.eta, 0.0),
         lambda: kernels.moments_numpy(f, grid.xi, grid.eta, 0.0)),
    ):
        rows.append((name, _best(nb, repeat), _best(npy, repeat)))
    return rows


def step_times(n):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, GEOPHASE_DISABLE_JIT=flag)
        r = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=n)], env=env,
                           capture_output=True, text=True, check=True)
        name, t = r.stdout.split()
        out[name] = float(t)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    print(f"grid {args.n}x{args.n}")
    print(f"{'kernel':<18}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, tn, tp in kernel_table(args.n, args.repeat):
        print(f"{name:<18}{tn * 1e3:>10.3f}{tp * 1e3:>10.3f}{tp / tn:>9.2f}")
    st = step_times(args.n)
    print(f"{'full step':<18}{st['numba'] * 1e3:>10.3f}{st['numpy'] * 1e3:>10.3f}{st['numpy'] / st['numba']:>9.2f}")


if __name__ == "__main__":
    main()
