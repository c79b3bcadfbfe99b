"""Time each hot kernel on both backends and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

The numba column excludes compilation (one warm-up call first).
"""
import argparse
import csv
import sys
import time

import numpy as np

from shallowcert import kernels
from shallowcert.qsim import haar_unitaries
from shallowcert.noise import local_depolarizing


def _cases(rng):
    A = rng.random((64, 60))
    B = rng.random((256, 60))
    U = haar_unitaries(4, 4096, rng)
    out = rng.integers(0, 4, size=4096)
    psi = np.linalg.qr(rng.standard_normal((4, 64)) + 1j * rng.standard_normal((4, 64)))[0]
    probs = rng.dirichlet(np.ones(16), size=20000)
    u = rng.random(20000)
    # two qubits, three layers, 500 trials
    UT = haar_unitaries(4, 1500, rng).reshape(500, 3, 4, 4)
    kraus = np.stack(local_depolarizing(0.1).full_kraus(2))
    return {
        "poly_kernel_matrix": (A, B, 8),
        "snapshot_overlaps": (U, out, psi),
        "sample_categorical": (probs, u),
        "noisy_overlap_trials": (UT, kraus),
    }


def _best_of(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args(argv)

    if not kernels.HAVE_NUMBA:
        print("numba unavailable (missing or SHALLOWCERT_DISABLE_NUMBA set); timing numpy only")
    rows = []
    for name, case in _cases(np.random.default_rng(args.seed)).items():
        ref = getattr(kernels, name + "_numpy")
        t_np = _best_of(ref, case, args.repeat)
        row = {"kernel": name, "numpy_s": t_np, "numba_s": None, "speedup": None, "max_abs_diff": None}
        if kernels.HAVE_NUMBA:
            fast = getattr(kernels, name + "_numba")
            fast(*case)  # compile
            row["numba_s"] = _best_of(fast, case, args.repeat)
            row["speedup"] = t_np / row["numba_s"]
            row["max_abs_diff"] = float(np.max(np.abs(np.asarray(fast(*case)) - np.asarray(ref(*case)))))
        rows.append(row)

    print(f"{'kernel':24s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max|diff|':>10s}")
    for r in rows:
        nb = "-" if r["numba_s"] is None else f"{1e3 * r['numba_s']:11.2f}"
        sp = "-" if r["speedup"] is None else f"{r['speedup']:8.1f}"
        df = "-" if r["max_abs_diff"] is None else f"{r['max_abs_diff']:10.1e}"
        print(f"{r['kernel']:24s} {1e3 * r['numpy_s']:11.2f} {nb:>11s} {sp:>8s} {df:>10s}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
