import itertools

import numpy as np
import pytest

from pudsim.bank import Bank, Subarray, nominal_write
from pudsim.decoder import activation_set, find_pair_for_count
from pudsim.ops import (NEUTRAL, maj_x, majority, multi_row_copy, plan_replication, row_clone,
                        success_rate)
from pudsim.profile import AnalogParams


def test_plan_counts():
    p = plan_replication(3, 32)
    assert (p.copies, p.neutral_count) == (10, 2)
    assert p.neutral_rows == [30, 31]
    assert [len(p.operand_rows(k)) for k in range(3)] == [10, 10, 10]
    q = plan_replication(5, 8, neutral="low")
    assert q.assignment[:3] == (NEUTRAL,) * 3


def test_plan_errors():
    with pytest.raises(ValueError):
        plan_replication(9, 8)
    with pytest.raises(ValueError):
        plan_replication(4, 8)
    with pytest.raises(ValueError):
        plan_replication(3, 6)
    with pytest.raises(ValueError):
        plan_replication(3, 4, rows=[1, 1, 2, 3])


def test_majority():
    assert majority(np.array([[1, 0], [1, 0], [0, 1]])).tolist() == [1, 0]


def test_maj_rejects_wrong_timing(h512):
    sub = Subarray(h512, 0, 8)
    a, b = 0, 7
    plan = plan_replication(3, 4, activation_set(a, b, h512))
    with pytest.raises(ValueError):
        maj_x(sub, plan, a, b, np.zeros((3, 8)), h512, t1=36, t2=3)
    with pytest.raises(ValueError):
        maj_x(sub, plan_replication(3, 4), a, 1, np.zeros((3, 8)), h512)


def test_maj3_ideal_small(h512):
    ideal = h512.with_analog(**AnalogParams.ideal().__dict__)
    sub = Subarray(ideal, 0, 8)
    a, b = find_pair_for_count(ideal, 4, np.random.default_rng(0))
    plan = plan_replication(3, 4, activation_set(a, b, ideal))
    ops = np.array(list(itertools.product([0, 1], repeat=3))).T.astype(np.uint8)
    res = maj_x(sub, plan, a, b, ops, ideal)
    assert (res.value == majority(ops)).all() and res.reliable.all()
    # every activated row now holds the result
    assert np.allclose(sub.charge[list(plan.rows)], res.value)


def test_multi_row_copy(h512):
    sub = Subarray(h512, 1, 64)
    a, b = find_pair_for_count(h512, 8, np.random.default_rng(3))
    src = np.random.default_rng(1).integers(0, 2, 64)
    sub.write_rows([a], src)
    res = multi_row_copy(sub, a, b, h512)
    assert len(res.destinations) == 7 and res.success


def test_row_clone_same_and_cross(h512):
    bank = Bank(h512, seed=2, columns=64)
    bank.execute(nominal_write(3, [1] * 64, h512))
    assert row_clone(bank, 3, 100).correct.mean() > 0.99
    assert row_clone(bank, 3, 3).success
    assert row_clone(bank, 3, 700).correct.mean() < 0.1


def test_success_rate():
    outcomes = np.array([[1, 1, 0, 1], [1, 0, 0, 1]], dtype=bool)
    r = success_rate(outcomes)
    assert r.stable.tolist() == [True, False, False, True] and r.fraction == 0.5
    g = success_rate(np.ones((3, 2, 5), dtype=bool), group_axis=0)
    assert g.groups == [1.0, 1.0]
    with pytest.raises(ValueError):
        success_rate([[1, 1], [1]])
    with pytest.raises(ValueError):
        success_rate(np.ones(3))
