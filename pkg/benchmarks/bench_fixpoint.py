#!/usr/bin/env python3
"""Benchmark: compiled vs pure reaching-definitions fixed point.

Generates synthetic methods of growing size — a worst-ish case with many
interleaved definitions and backward branches so the worklist iterates —
and times `compute_chains` under both backends. Results are identical by
construction (see tests/test_dataflow.py::test_backend_parity); this
script only reports speed.

Usage: python benchmarks/bench_fixpoint.py [--sizes 500,2000,8000] [--repeat 3]
"""

import argparse
import random
import time

# _DefTables/_solve_method are internal, imported here to time the solver
# phase apart from the shared UD/DU extraction.
from clicksift.dataflow import (
    _DefTables,
    _solve_method,
    build_icfg,
    compute_chains,
    solver_backend,
)
from clicksift.ir import parse_package


def synthetic_method(n_stmts: int, n_vars: int = 40, seed: int = 0) -> str:
    rng = random.Random(seed)
    variables = [f"v{i}" for i in range(n_vars)]
    lines = ["package bench", "class B", "method hot()"]
    lines += [f"  {v} = const {i}" for i, v in enumerate(variables)]
    n_labels = max(2, n_stmts // 100)
    label_at = sorted(rng.sample(range(n_stmts), k=n_labels))
    for i in range(n_stmts):
        if i in label_at:
            lines.append(f"  label L{label_at.index(i)}")
        roll = rng.random()
        target = rng.choice(variables)
        if roll < 0.5:
            lines.append(f"  {target} = add {rng.choice(variables)} {rng.choice(variables)}")
        elif roll < 0.75:
            lines.append(f"  {target} = copy {rng.choice(variables)}")
        elif roll < 0.85:
            lines.append(f"  {target} = const {rng.randint(0, 99)}")
        else:
            lines.append(f"  if {rng.choice(variables)} < 50 goto L{rng.randrange(n_labels)}")
    lines += ["  return", "endmethod", "endclass", "endpackage"]
    return "\n".join(lines) + "\n"


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="500,2000,8000")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"default backend at import: {solver_backend()}")
    header = (f"{'statements':>10} | {'solve pure':>11} {'solve ext':>10} {'speedup':>8}"
              f" | {'chains pure':>12} {'chains ext':>11} {'speedup':>8}")
    print(header)
    print("-" * len(header))
    for n in sizes:
        pkg = parse_package(synthetic_method(n))
        icfg = build_icfg(pkg)
        cls, method = next(pkg.iter_methods())
        cfg = icfg.cfgs[(cls.name, method.name)]
        tables = _DefTables(cls.name, method)

        solve_pure = _best_of(lambda: _solve_method(cfg, tables, "pure"), args.repeat)
        chains_pure = _best_of(lambda: compute_chains(icfg, backend="pure"), args.repeat)
        try:
            solve_ext = _best_of(lambda: _solve_method(cfg, tables, "compiled"), args.repeat)
            chains_ext = _best_of(lambda: compute_chains(icfg, backend="compiled"), args.repeat)
        except RuntimeError:
            print(f"{n:>10} | {solve_pure:>11.4f} {'unavailable':>10} {'-':>8}"
                  f" | {chains_pure:>12.4f} {'-':>11} {'-':>8}")
            continue
        print(f"{n:>10} | {solve_pure:>11.4f} {solve_ext:>10.4f} {solve_pure / solve_ext:>7.1f}x"
              f" | {chains_pure:>12.4f} {chains_ext:>11.4f} {chains_pure / chains_ext:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
