import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milpscope.model import (
    MilpInstance,
    instance_from_doc,
    instance_to_doc,
    negate_to_min,
    read_instance,
    user_facing_objective,
    validate,
    write_instance,
)


def two_var_instance(**kw):
    args = dict(
        name="toy",
        obj=[3.0, 2.0],
        rows=[[(0, 1.0), (1, 1.0)], [(0, 2.0), (1, -1.0)]],
        rhs=[1.0, 0.0],
        integer_set=[0],
        var_lower=[0.0, 0.0],
        var_upper=[1.0, math.inf],
    )
    args.update(kw)
    return MilpInstance(**args)


def test_well_formed_instance_validates_clean():
    assert validate(two_var_instance()) == []


def test_partition_overlap_reported_with_index():
    inst = MilpInstance(
        name="bad",
        obj=[1.0] * 5,
        rows=[[(0, 1.0), (3, 1.0)]],
        rhs=[1.0],
        integer_set=[0, 3],
        continuous_set=[1, 2, 3, 4],
    )
    assert validate(inst) == ["partition overlap at 3"]


def test_partition_missing_reported():
    inst = MilpInstance(
        name="bad",
        obj=[1.0, 1.0],
        rows=[[(0, 1.0)]],
        rhs=[1.0],
        integer_set=[0],
        continuous_set=[],
    )
    assert validate(inst) == ["partition missing 1"]


def test_empty_row_reported_with_index():
    rows = [[(0, 1.0)]] * 5 + [[]]
    inst = MilpInstance(
        name="bad", obj=[1.0], rows=rows, rhs=[1.0] * 6, integer_set=[0],
        var_upper=[1.0],
    )
    assert validate(inst) == ["empty row 5"]


def test_all_zero_row_counts_as_empty():
    inst = MilpInstance(
        name="bad", obj=[1.0], rows=[[(0, 0.0)]], rhs=[0.0], integer_set=[0],
        var_upper=[1.0],
    )
    assert validate(inst) == ["empty row 0"]


def test_bound_order_violation_reported():
    inst = two_var_instance(var_lower=[0.0, 5.0], var_upper=[1.0, 2.0])
    assert validate(inst) == ["bound order at 1"]


def test_nan_coefficient_reported():
    inst = two_var_instance(rows=[[(0, float("nan")), (1, 1.0)], [(0, 2.0), (1, -1.0)]])
    assert any("non-finite coefficient in row 0" in v for v in validate(inst))


def test_negate_flips_objective_and_flag():
    inst = MilpInstance(name="mx", obj=[3.0], rows=[[(0, 1.0)]], rhs=[0.0],
                        integer_set=[0], var_upper=[1.0])
    neg = negate_to_min(inst)
    assert np.allclose(neg.obj, [-3.0])
    assert neg.maximize_origin is True
    assert np.allclose(inst.obj, [3.0])  # original untouched


def test_negate_is_an_involution():
    inst = two_var_instance()
    back = negate_to_min(negate_to_min(inst))
    assert np.allclose(back.obj, inst.obj)
    assert back.maximize_origin == inst.maximize_origin


def test_user_facing_objective_renegates_for_max_origin():
    inst = two_var_instance(maximize_origin=True)
    assert user_facing_objective(inst, -7.5) == 7.5
    assert user_facing_objective(two_var_instance(), -7.5) == -7.5


def test_round_trip_through_file(tmp_path):
    inst = two_var_instance()
    path = tmp_path / "toy.milp.json"
    write_instance(inst, path)
    back = read_instance(path)
    assert back.name == inst.name
    assert np.array_equal(back.obj, inst.obj)
    assert np.array_equal(back.rhs, inst.rhs)
    assert back.integer_set == inst.integer_set
    assert np.array_equal(back.var_lower, inst.var_lower)
    assert np.array_equal(back.var_upper, inst.var_upper)
    assert back.rows_as_pairs() == inst.rows_as_pairs()
    assert back.maximize_origin == inst.maximize_origin


def test_write_is_deterministic(tmp_path):
    inst = two_var_instance()
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_instance(inst, p1)
    write_instance(inst, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_read_rejects_wrong_format(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError):
        read_instance(path)


coef = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False,
                 allow_infinity=False).map(lambda v: v or 1.0)


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_round_trip_is_bit_exact_for_random_instances(data, tmp_path_factory):
    n = data.draw(st.integers(1, 6))
    m = data.draw(st.integers(1, 5))
    rows = []
    for _ in range(m):
        k = data.draw(st.integers(1, n))
        idx = data.draw(st.permutations(range(n))).copy()[:k]
        rows.append([(j, data.draw(coef)) for j in sorted(idx)])
    inst = MilpInstance(
        name="h",
        obj=[data.draw(coef) for _ in range(n)],
        rows=rows,
        rhs=[data.draw(coef) for _ in range(m)],
        integer_set=data.draw(st.sets(st.integers(0, n - 1))),
        var_lower=[0.0] * n,
        var_upper=[data.draw(st.sampled_from([1.0, 10.0, math.inf])) for _ in range(n)],
        maximize_origin=data.draw(st.booleans()),
    )
    doc = instance_to_doc(inst)
    back = instance_from_doc(doc)
    assert np.array_equal(back.obj, inst.obj)
    assert np.array_equal(back.coefs, inst.coefs)
    assert np.array_equal(back.col_index, inst.col_index)
    assert np.array_equal(back.rhs, inst.rhs)
    assert np.array_equal(back.var_upper, inst.var_upper)
    assert back.integer_set == inst.integer_set
