"""Why replicating MAJ3 operands helps: bitline swing and tolerance to variation.

Monte-Carlo over MAJ3(1, 1, 0) with 4 to 32 activated rows while the
per-cell variation grows from 0% to 40%.

Run:  python demos/replication_study.py
"""
import numpy as np

from pudsim.analog import monte_carlo_success
from pudsim.ops import plan_replication
from pudsim.profile import AnalogParams

TRIALS = 10_000
operands = [1.0, 1.0, 0.0]

print(f"{'N':>3} {'var%':>5} {'mean |dV|':>10} {'success':>8}")
for n in (4, 8, 16, 32):
    plan = plan_replication(3, n)
    # neutral rows sit at Vdd/2
    charges = [0.5 if a < 0 else operands[a] for a in plan.assignment]
    for var in (0, 10, 20, 30, 40):
        r = monte_carlo_success(charges, 1, AnalogParams(variation_pct=var), TRIALS,
                                np.random.SeedSequence([n, var]))
        print(f"{n:>3} {var:>5} {r.mean_abs_perturbation:>10.4f} {r.success:>8.2%}")
