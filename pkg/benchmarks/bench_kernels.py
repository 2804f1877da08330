"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are checked for identical output before timing. The first
numba call (JIT compile or cache load) is excluded.
"""
import argparse
import time

import numpy as np

from emsaccess._kernels import multi_source_dijkstra, radius_counts
from emsaccess.density import density_field, derive_intersections
from emsaccess.fixtures import synthetic_city
from emsaccess.network import generate_grid
from emsaccess.traveltime import edge_times


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def bench(name, make, repeat):
    make("numba")  # warm-up
    a, tn = best_of(lambda: make("numba"), repeat)
    b, tp = best_of(lambda: make("numpy"), repeat)
    assert np.array_equal(a, b), f"{name}: backends disagree"
    print(f"{name:<34} numba {tn * 1e3:9.2f} ms   numpy {tp * 1e3:9.2f} ms   "
          f"speedup {tp / tn:6.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    for n in (2_000, 20_000):
        q = rng.uniform(0, 10_000, (n, 2))
        p = rng.uniform(0, 10_000, (n, 2))
        bench(f"radius_counts n={n} r=800", lambda be: radius_counts(q, p, 800.0, backend=be),
              args.repeat)

    for label, net in (("city 2025 nodes", synthetic_city()[0]),
                       ("grid 150x150", generate_grid(150, 150, 100.0, 11.0))):
        dens = density_field(net, derive_intersections(net), 800.0)
        w = np.asarray(edge_times(net, dens, 15.0).adjusted)
        csr = net.csr()
        cw = csr.weights(w)
        src = np.array(sorted(rng.choice(net.n_nodes, 20, replace=False)), dtype=np.int64)
        bench(f"dijkstra {label}",
              lambda be: multi_source_dijkstra(csr.indptr, csr.indices, cw, src, net.n_nodes,
                                               backend=be), args.repeat)


if __name__ == "__main__":
    main()
