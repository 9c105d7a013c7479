"""A scaled-down characterization run: MAJ-X, Multi-RowCopy and the WRITE test.

Uses 2 banks x 2 subarrays x 20 groups instead of the full 16 x 3 x 100, so
it finishes in well under a minute. Results land in ./demo-out/.

Run:  python demos/characterize_small.py
"""
from pathlib import Path

from pudsim.harness import ExperimentConfig, best_timing, export, run_experiment

small = dict(banks=2, subarrays=2, groups=20, trials=5, columns=128, seed=1)
out = Path("demo-out")

maj = run_experiment(ExperimentConfig(operation="maj", t1=[1.5, 3.0], t2=[1.5, 3.0], **small))
print("MAJ mean success at the best timing, per (X, N):")
for x in (3, 5, 7, 9):
    row = []
    for n in (4, 8, 16, 32):
        if n < x:
            row.append("   -  ")
            continue
        t1, t2 = best_timing(maj, x=x, n=n)
        row.append(f"{maj.mean(x=x, n=n, t1=t1, t2=t2):6.1%}")
    print(f"  MAJ{x}: " + " ".join(row))
print("MAJ3 @ N=32 best timing:", best_timing(maj, x=3, n=32))

mrc = run_experiment(ExperimentConfig(operation="mrc", t1=[1.5, 36.0], t2=[3.0],
                                      n=[2, 4, 8, 16, 32], **small))
print("\nMulti-RowCopy destinations -> success at t1=36 / t1=1.5:")
for n in (2, 4, 8, 16, 32):
    print(f"  {n - 1:>2}: {mrc.mean(n=n, t1=36.0):7.2%} / {mrc.mean(n=n, t1=1.5):7.2%}")

act = run_experiment(ExperimentConfig(operation="activation", t1=[1.5, 3.0], t2=[1.5, 3.0],
                                      n=[8, 32], **small))
print("\nWRITE after many-row activation, N=8:")
for t1 in (1.5, 3.0):
    for t2 in (1.5, 3.0):
        print(f"  t1={t1:<3} t2={t2:<3} {act.mean(n=8, t1=t1, t2=t2):7.2%}")

paths = export([maj, mrc, act], out, stem="small")
print("\nwrote", ", ".join(str(p) for p in paths))
