"""Compare the numba kernels with the numpy fallback.

Each backend runs in its own interpreter, since the choice is made once at
import time from IRDATAKIT_NO_NUMBA. Usage:

    python benchmarks/bench_kernels.py [--gzip-mib 2] [--ids 100000]
"""

import argparse
import gzip
import json
import os
import random
import subprocess
import sys
import tempfile
import time

import numpy as np


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def run_backend(args):
    from irdatakit import kernels
    from irdatakit.gzseek import build_checkpoints

    rng = random.Random(0)
    results = {"backend": kernels.BACKEND}

    words = "alpha beta gamma delta query document index ranking corpus text".split()
    raw = " ".join(rng.choices(words, k=(args.gzip_mib << 20) // 6)).encode()
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "bench.gz")
        with open(path, "wb") as f:
            f.write(gzip.compress(raw, mtime=0))
        build_checkpoints(path, 1 << 20)  # warm-up / JIT compile
        secs = _best(lambda: build_checkpoints(path, 1 << 20), args.repeat)
    results["inflate_MiB_per_s"] = len(raw) / secs / (1 << 20)

    width = 20
    ids = sorted({"".join(rng.choices("abcdefghij0123456789", k=rng.randint(4, width)))
                  for _ in range(args.ids)})
    table = np.zeros((len(ids), width), dtype=np.uint8)
    for row, i in enumerate(ids):
        table[row, :len(i)] = np.frombuffer(i.encode(), dtype=np.uint8)
    keys = [table[rng.randrange(len(ids))].copy() for _ in range(args.lookups)]
    kernels.search_fixed(table, keys[0])

    def searches():
        for k in keys:
            kernels.search_fixed(table, k)

    results["search_us_per_lookup"] = _best(searches, args.repeat) / len(keys) * 1e6

    blob = np.frombuffer(os.urandom(1 << 20), dtype=np.uint8)
    kernels.shift_bits(blob, 3)
    results["shift_MiB_per_s"] = 1 / _best(lambda: kernels.shift_bits(blob, 3), args.repeat)
    print(json.dumps(results))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--gzip-mib", type=int, default=2)
    p.add_argument("--ids", type=int, default=100_000)
    p.add_argument("--lookups", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args()
    if args.child:
        run_backend(args)
        return
    rows = []
    for flag in ("0", "1"):
        env = dict(os.environ, IRDATAKIT_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--child", *sys.argv[1:]],
                             env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))
    cols = ["inflate_MiB_per_s", "search_us_per_lookup", "shift_MiB_per_s"]
    print(f"{'backend':<8}" + "".join(f"{c:>24}" for c in cols))
    for r in rows:
        print(f"{r['backend']:<8}" + "".join(f"{r[c]:>24.2f}" for c in cols))
    if len(rows) == 2 and rows[0]["backend"] != rows[1]["backend"]:
        jit, fallback = rows
        print(f"numba speedup: inflate {jit[cols[0]] / fallback[cols[0]]:.0f}x, "
              f"search {fallback[cols[1]] / jit[cols[1]]:.1f}x, "
              f"shift {jit[cols[2]] / fallback[cols[2]]:.1f}x")


if __name__ == "__main__":
    main()
