"""Compare the compiled kernels with the pure-Python fallback.

Micro-benchmarks time each kernel call in-process with both modules loaded
side by side. The end-to-end figure runs a preset in a subprocess per backend,
because the backend is fixed when ``balsi.kernels`` is first imported.

    python benchmarks/bench_kernels.py [--repeat 5] [--preset wingrock_ic1]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from balsi.identifier import IdentifierLayout
from balsi.kernels import load_backend

THETA = np.array([-26.67, 0.76485, -2.9225, 0.0, 1.5])
X = (0.21, -0.13, 0.05)


def kernel_cases(mod):
    lay = IdentifierLayout(1, 5)
    G = np.ascontiguousarray(np.arange(5, dtype=float).reshape(1, 5) / 7.0)
    F = np.array([0.3])
    cx = np.array([-0.13])
    s = np.linspace(-1.0, 1.0, lay.size)
    out = np.empty(lay.size)
    x1, x2, x3 = X
    return {
        "wingrock_zeta": lambda: mod.wingrock_zeta(x1, x2, x3),
        "wingrock_phi": lambda: mod.wingrock_phi(THETA, x1, x2, 1.5),
        "wingrock_phi_theta": lambda: mod.wingrock_phi_theta(THETA, x1, x2, 1.5),
        "wingrock_feedback": lambda: mod.wingrock_feedback(THETA, x1, x2, x3, 1.5, 15.0),
        "wingrock_clf": lambda: mod.wingrock_clf(THETA, x1, x2, x3, 1.5),
        "wingrock_clf_grad": lambda: mod.wingrock_clf_grad(THETA, x1, x2, x3, 1.5),
        "identifier_deriv": lambda: mod.identifier_deriv(0.7, G, F, cx, s, out),
    }


def per_call(fn, repeat, number=20000):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


_END_TO_END = """
import json, time
from balsi import scenario as scn
from balsi.kernels import BACKEND
from balsi.runner import run_scenario
sc = scn.preset({name!r})
best = float("inf")
for _ in range({repeat}):
    t = time.perf_counter()
    r = run_scenario(sc)
    best = min(best, time.perf_counter() - t)
print(json.dumps({{"backend": BACKEND, "seconds": best, "nfev": sum(s.nfev for s in r.traj.segments)}}))
"""


def end_to_end(name, repeat, pure):
    env = dict(os.environ, BALSI_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", _END_TO_END.format(name=name, repeat=repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--preset", default="wingrock_ic1")
    args = ap.parse_args(argv)

    try:
        fast = load_backend("cython")
    except ImportError:
        sys.exit("compiled kernels are not built; run `pip install --no-build-isolation -e .`")
    slow = load_backend("python")

    print(f"{'kernel':<22}{'cython (us)':>13}{'python (us)':>13}{'speed-up':>10}")
    fast_cases, slow_cases = kernel_cases(fast), kernel_cases(slow)
    for name in fast_cases:
        a = per_call(fast_cases[name], args.repeat) * 1e6
        b = per_call(slow_cases[name], args.repeat) * 1e6
        print(f"{name:<22}{a:>13.3f}{b:>13.3f}{b / a:>9.1f}x")

    print(f"\nend to end: {args.preset} (best of {args.repeat})")
    rows = [end_to_end(args.preset, args.repeat, pure) for pure in (False, True)]
    for row in rows:
        print(f"  {row['backend']:<8}{row['seconds']:>8.3f} s   {row['nfev']} rhs evaluations")
    print(f"  speed-up {rows[1]['seconds'] / rows[0]['seconds']:.2f}x")


if __name__ == "__main__":
    main()
