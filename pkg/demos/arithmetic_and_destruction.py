"""Throughput of majority-based arithmetic, and how fast a bank can be wiped.

Run:  python demos/arithmetic_and_destruction.py
"""
import numpy as np

from pudsim.casestudies import (CostModel, destruction_table, estimate_speedup, lower_kernel,
                                oracle, simulate)

cost = CostModel.default()

# An 8-bit adder built from MAJ3 only, then with MAJ5 for the sum bits.
for xs in ((3,), (3, 5)):
    p = lower_kernel("ADD", 8, xs, cost)
    print(f"ADD8 with MAJ{max(xs)}: {len(p.gates())} MAJ ops, "
          f"{p.count('HostWrite')} host writes, {p.latency / 1e3:.1f} us")

# Exhaustive check against integer arithmetic.
a, b = np.meshgrid(np.arange(256), np.arange(1, 256), indexing="ij")
for k in ("ADD", "SUB", "MUL", "DIV"):
    ok = (simulate(lower_kernel(k, 8, (3, 5)), a, b) == oracle(k, 8, a, b)).all()
    print(f"{k}8 matches integer arithmetic: {ok}")

print("\n32-bit speedup over MAJ3 with 4-row activation:")
print(f"{'kernel':>6} " + " ".join(f"{'<=MAJ' + str(x):>8}" for x in (3, 5, 7, 9)))
for k in ("AND", "OR", "XOR", "ADD", "SUB", "MUL", "DIV"):
    s = [estimate_speedup(lower_kernel(k, 32, [x for x in (3, 5, 7, 9) if x <= top], cost), cost)
         for top in (3, 5, 7, 9)]
    print(f"{k:>6} " + " ".join(f"{v:8.2f}" for v in s))

print("\ncontent destruction of one bank:")
for r in destruction_table():
    print(f"  {r['method']:>8}: {r['total_ns'] / 1e6:7.3f} ms  ({r['speedup']:5.2f}x)")
