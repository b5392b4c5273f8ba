"""Wall-clock comparison of the numba and numpy kernel backends.

Run with ``python benchmarks/bench_kernels.py``. The first numba call per
kernel is timed separately as compile time and excluded from the median.
"""

from __future__ import annotations

import argparse
import statistics
import time

from chaosbound import _kernels
from chaosbound.graph import encode_shapes, enumerate_shapes, graph_schema, wigner_shape, zshape
from chaosbound.sampler import Mode, accumulate, draw_tables, make_plan
from chaosbound.schema import khatri_rao_schema


def _time(fn, repeat: int) -> tuple[float, float]:
    start = time.perf_counter()
    fn()
    first = time.perf_counter() - start
    runs = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - start)
    return first, statistics.median(runs)


def _cases(scale: int):
    kr = khatri_rao_schema(2).bind(d=16 * scale, n=(16 * scale) ** 2)
    for name, schema, mode in (
        (f"khatri-rao d={16 * scale}", kr, Mode.DECOUPLED),
        (f"wigner n={256 * scale}", graph_schema(wigner_shape(), 256 * scale), Mode.COUPLED),
        (f"zshape n={24 * scale}", graph_schema(zshape(), 24 * scale), Mode.COUPLED),
    ):
        plan = make_plan(schema, mode)
        tables = draw_tables(schema, mode, 0)
        yield name, lambda b, s=schema, p=plan, t=tables: accumulate(s, p, t, backend=b)
    enc = encode_shapes(enumerate_shapes(max_vertices=5, max_edges=4, up_to_isomorphism=False))
    yield "sigma batch (<=5 vertices)", lambda b: _kernels.sigma_exponent_batch(*enc, backend=b)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=int, default=1, help="multiplies every problem size")
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':<28} {'backend':<7} {'first (s)':>10} {'median (s)':>11} {'speedup':>8}")
    for name, run in _cases(args.scale):
        results = {b: _time(lambda: run(b), args.repeat) for b in backends}
        base = results["numpy"][1]
        for b, (first, med) in results.items():
            print(f"{name:<28} {b:<7} {first:>10.4f} {med:>11.4f} {base / med:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
