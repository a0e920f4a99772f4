"""Compare the numba and numpy variants of the hot kernels.

    python benchmarks/bench_kernels.py --repeat 5

Each kernel runs once untimed so numba compilation is excluded, then the
best of ``--repeat`` runs is reported. Outputs of both variants are checked
for agreement before timing.
"""
import argparse
import time

import numpy as np

from eyecontact import kernels
from eyecontact.geometry import GENERIC_FACE_MODEL, PHONE_CAMERA, HeadPose, angles_to_rotation, project_points


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def pnp_case(n, seed):
    rng = np.random.default_rng(seed)
    obj = np.ascontiguousarray(GENERIC_FACE_MODEL.points)
    intr = PHONE_CAMERA
    cases = []
    for _ in range(n):
        p, y, r = rng.uniform(-40, 40, 3)
        t = np.array([rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(200, 600)])
        pose = HeadPose(angles_to_rotation(p, y, r), t)
        img = project_points(GENERIC_FACE_MODEL, pose, intr) + rng.normal(0, 1.0, (6, 2))
        R0 = angles_to_rotation(p + 5, y - 5, r)
        cases.append((img, R0, t + 10.0))

    def run(fn):
        def go():
            return [fn(obj, img, intr.fx, intr.fy, intr.cx, intr.cy, R0, t0, 100, 1e-10) for img, R0, t0 in cases]
        return go

    return run(kernels.lm_pnp_numba), run(kernels.lm_pnp_numpy)


def dbscan_case(n, seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-300, 300, (8, 2))
    pts = centers[rng.integers(0, 8, n)] + rng.normal(0, 15, (n, 2))
    pts = np.ascontiguousarray(pts)
    return (lambda: kernels.dbscan_numba(pts, 20.0, 5)), (lambda: kernels.dbscan_numpy(pts, 20.0, 5))


def pegasos_case(n, dim, epochs, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 1, (n, dim))
    y = np.sign(X @ rng.normal(0, 1, dim) + 0.1)
    Xa = np.ascontiguousarray(np.column_stack([X, np.ones(n)]))
    sw = np.ones(n)
    order = np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    return (lambda: kernels.pegasos_numba(Xa, y, sw, 1e-4, order)), (lambda: kernels.pegasos_numpy(Xa, y, sw, 1e-4, order))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pnp", type=int, default=500, help="number of PnP solves")
    ap.add_argument("--points", type=int, default=5000, help="points for DBSCAN")
    ap.add_argument("--samples", type=int, default=5000, help="samples for Pegasos")
    args = ap.parse_args(argv)

    cases = {
        f"lm_pnp x{args.pnp}": pnp_case(args.pnp, args.seed),
        f"dbscan n={args.points}": dbscan_case(args.points, args.seed),
        f"pegasos n={args.samples} d=64 e=20": pegasos_case(args.samples, 64, 20, args.seed),
    }
    print(f"{'kernel':<32}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, (nb, npy) in cases.items():
        a, b = nb(), npy()
        if isinstance(a, np.ndarray):
            assert np.array_equal(a, b) or np.allclose(a, b, rtol=1e-9, atol=1e-12), name
        t_nb = best_of(nb, args.repeat)
        t_np = best_of(npy, args.repeat)
        print(f"{name:<32}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
