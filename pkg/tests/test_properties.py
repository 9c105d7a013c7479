import numpy as np
from hypothesis import given, settings, strategies as st

from pudsim.analog import charge_share
from pudsim.casestudies import KERNELS, CostModel, estimate_speedup, lower_kernel, oracle, simulate, widen
from pudsim.decoder import activation_set, differing_fields
from pudsim.ops import MAJ_N, MAJ_X, majority, plan_replication, success_rate
from pudsim.profile import PRESETS, AnalogParams

H = PRESETS["mfrH-512"]
rows = st.integers(0, 511)
IDEAL = AnalogParams.ideal()


@given(rows, rows)
def test_decoder_symmetric_and_sized(a, b):
    s = activation_set(a, b, H)
    assert s == activation_set(b, a, H)
    assert a in s and b in s
    assert len(s) == 1 << differing_fields(a, b, H)


@given(rows, rows, st.data())
def test_decoder_closure(a, b, data):
    s = activation_set(a, b, H)
    c = data.draw(st.sampled_from(s))
    d = data.draw(st.sampled_from(s))
    assert set(activation_set(c, d, H)) <= set(s)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=32), st.integers(0, 31), st.floats(0.01, 0.5))
def test_divider_monotone_in_charge(q, i, bump):
    q = np.array(q)
    i %= len(q)
    lo = charge_share(q, 1.0, 1.0, 1.0, IDEAL)
    q2 = q.copy()
    q2[i] = min(1.0, q2[i] + bump)
    assert charge_share(q2, 1.0, 1.0, 1.0, IDEAL) >= lo - 1e-12


@given(st.lists(st.floats(0, 1), min_size=1, max_size=16), st.floats(0.1, 10))
def test_divider_scale_invariant(q, k):
    q = np.array(q)
    caps = np.linspace(0.8, 1.2, len(q))
    base = charge_share(q, caps, 1.0, 1.0, IDEAL)
    scaled = charge_share(q, caps * k, 1.0, 1.0, AnalogParams.ideal(capacitance_ratio=6.0 * k))
    assert np.isclose(base, scaled)


@given(st.sampled_from(MAJ_X), st.sampled_from(MAJ_N))
def test_replication_identity(X, N):
    if N < X:
        return
    p = plan_replication(X, N)
    assert p.copies * X + p.neutral_count == N
    assert all(len(p.operand_rows(k)) == p.copies for k in range(X))


@given(st.sampled_from(MAJ_X), st.data())
def test_replicated_majority_is_majority(X, data):
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=X, max_size=X)))
    copies = data.draw(st.integers(1, 10))
    rep = np.repeat(bits, copies)
    assert majority(rep[:, None])[0] == majority(bits[:, None])[0]


@given(st.lists(st.lists(st.booleans(), min_size=6, max_size=6), min_size=1, max_size=5),
       st.lists(st.booleans(), min_size=6, max_size=6))
def test_success_rate_monotone_in_trials(trials, extra):
    before = success_rate(np.array(trials)).fraction
    after = success_rate(np.array(trials + [extra])).fraction
    assert after <= before


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(KERNELS), st.sampled_from([(3,), (3, 5), (3, 5, 7, 9)]),
       st.floats(0.1, 10))
def test_speedup_scale_invariant(kernel, xs, k):
    c = CostModel.default()
    p = lower_kernel(kernel, 4, xs, c)
    a = estimate_speedup(p, c)
    b = estimate_speedup(p, c.scaled(k))
    assert np.isclose(a, b)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(KERNELS), st.integers(1, 6), st.sampled_from([5, 7, 9]), st.data())
def test_widened_program_same_semantics(kernel, width, X, data):
    p = lower_kernel(kernel, width, (3, 5))
    a = np.array(data.draw(st.lists(st.integers(0, 2 ** width - 1), min_size=8, max_size=8)))
    lo = 1 if kernel == "DIV" else 0
    b = np.array(data.draw(st.lists(st.integers(lo, 2 ** width - 1), min_size=8, max_size=8)))
    assert (simulate(widen(p, X), a, b) == oracle(kernel, width, a, b)).all()
