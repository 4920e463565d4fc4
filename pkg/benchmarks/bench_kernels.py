#!/usr/bin/env python3
"""Benchmark the frame-transport kernels: numba @njit vs the pure-numpy
fallback (the same code path, undecorated).

The transport kernel dominates the runtime of surface reconstruction
(spanning-tree integration visits every grid node with several RK4
substeps of small complex matmuls), so this is the comparison that
matters.  Run with TITEICA_DISABLE_NUMBA=1 to confirm the package
operates identically on the fallback.
"""

import argparse
import time

import numpy as np

from titeica import (BackgroundMetric, CubicDifferential, Domain, PdeProblem,
                     SignCase, build_connection, solve_newton, torus_generator)
from titeica._kernels import (BACKEND, HAS_NUMBA, transport_numba,
                              transport_numpy)
from titeica.frames import _lattice_points
from titeica.immersion import affine_sphere_immersion


def _bench(fn, A, B, dom, pts, F0, repeats):
    rec = np.empty((pts.shape[0], 3, 3), np.complex128)
    # warm-up (includes JIT compilation for the numba path)
    fn(A, B, dom.step1, dom.step2, pts, F0, False, True, dom.hmin / 2.0, rec)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(A, B, dom.step1, dom.step2, pts, F0, False, True, dom.hmin / 2.0, rec)
        best = min(best, time.perf_counter() - t0)
    return best, rec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=96, help="torus grid size")
    ap.add_argument("--loops", type=int, default=64,
                    help="number of generator-loop transports per timing")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    dom = Domain.torus(1j, args.n, args.n)
    case = SignCase(1, -1)
    Q = CubicDifferential.constant(1.0)
    p = PdeProblem(dom, BackgroundMetric("flat"), Q, case)
    sol = solve_newton(p).solution
    alpha = build_connection(sol.psi, Q, case, dom, zeta=1.0)
    loop = torus_generator(dom, 0)
    pts1 = _lattice_points(dom, loop)
    pts = np.concatenate([pts1] + [pts1[1:]] * (args.loops - 1))
    F0 = np.eye(3, dtype=np.complex128)
    A = np.ascontiguousarray(alpha.A)
    B = np.ascontiguousarray(alpha.B)

    print(f"grid {args.n}x{args.n}, polyline of {pts.shape[0]} vertices, "
          f"active backend: {BACKEND}")
    t_np, rec_np = _bench(transport_numpy, A, B, dom, pts, F0, args.repeats)
    print(f"numpy fallback : {t_np * 1e3:9.2f} ms")
    if HAS_NUMBA:
        t_nb, rec_nb = _bench(transport_numba, A, B, dom, pts, F0, args.repeats)
        dev = np.abs(rec_nb - rec_np).max()
        print(f"numba @njit    : {t_nb * 1e3:9.2f} ms   "
              f"(speedup {t_np / t_nb:5.1f}x, max deviation {dev:.2e})")
    else:
        print("numba unavailable or disabled (TITEICA_DISABLE_NUMBA)")

    # end-to-end reconstruction timing through whichever backend is active
    t0 = time.perf_counter()
    affine_sphere_immersion(sol, Q, lam=-1)
    t1 = time.perf_counter()
    print(f"full {args.n}x{args.n} tree reconstruction via {BACKEND}: "
          f"{(t1 - t0) * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
