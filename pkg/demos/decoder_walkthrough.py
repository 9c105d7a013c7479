"""Which rows fire when an ACT lands on top of an unfinished precharge.

Run:  python demos/decoder_walkthrough.py
"""
import numpy as np

from pudsim.bank import Bank, apa, pre, wr
from pudsim.decoder import activation_counts, activation_set, predecode
from pudsim.profile import PRESETS

demo = PRESETS["demo-8"]
h512 = PRESETS["mfrH-512"]

# The toy decoder splits a 3-bit row address into a 1-bit and a 2-bit field.
for r in (0, 7):
    print(f"row {r}: predecoded fields {predecode(r, demo)}")

# Both fields differ, so each predecoder latches two values -> 2 x 2 rows.
print("APA(0, 7) activates", activation_set(0, 7, demo))

# Same thing through the bank state machine, with a WR that lands on all four rows.
bank = Bank(demo, seed=0)
trace = bank.execute(apa(0, 7, 3.0, 3.0, demo) + [wr([1] * demo.columns, demo.tRAS),
                                                  pre(demo.tRP)])
for ev in trace.events:
    print(" ", ev.to_dict())

# A 512-row subarray has five predecoders, so up to 32 rows fire together.
print("APA(127, 128) activates", len(activation_set(127, 128, h512)), "rows")

counts = activation_counts(h512)
sizes, freq = np.unique(counts, return_counts=True)
print("\nshare of (R_F, R_S) pairs per activation size:")
for s, f in zip(sizes, freq):
    print(f"  {s:>2} rows: {f / counts.size:6.2%}")
