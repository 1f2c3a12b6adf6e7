"""Time the numba and numpy kernels side by side.

    python benchmarks/bench_kernels.py [--n-theta 256] [--n-radial 32] [--repeat 20]

Both variants are called directly, so one process compares them on the same
mesh and field. The numba timings exclude compilation (one warm-up call).
"""

import argparse
import timeit

import numpy as np

from robincap import kernels
from robincap.fem import radial_interpolant
from robincap.geometry import circle, validate_pair
from robincap.mesh import build_annular_mesh
from robincap.radial import ProblemParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-theta", type=int, default=256)
    ap.add_argument("--n-radial", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    mesh = build_annular_mesh(validate_pair(circle(1.0), circle(2.0)), args.n_theta, args.n_radial)
    params = ProblemParams(2, 3.0, 1.0)
    u = radial_interpolant(mesh, params, 2.0)
    xi, wq = kernels.gauss_legendre_unit(4)
    grad = np.empty_like(u)
    m = len(mesh.triangles)
    areas, moments, segs = np.empty(m), np.empty((m, 2)), np.empty((m, 2, 2))

    energy_args = (u, mesh.triangles, mesh.triangle_areas, mesh.shape_gradients, mesh.outer_edges,
                   mesh.edge_lengths, xi, wq, params.p, params.beta, 1e-8, grad)
    clip_args = (mesh.nodes, mesh.triangles, u, 0.55, areas, moments, segs)
    cases = {
        "energy+gradient": (kernels._energy_grad_nb, kernels._energy_grad_np, energy_args),
        "level clipping": (kernels._clip_level_nb, kernels._clip_level_np, clip_args),
    }
    print(f"mesh {args.n_theta}x{args.n_radial}: {len(mesh.nodes)} nodes, {m} triangles")
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (nb, npy, a) in cases.items():
        nb(*a)  # compile
        t_nb = min(timeit.repeat(lambda: nb(*a), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: npy(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
