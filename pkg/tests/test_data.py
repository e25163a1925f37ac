import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsdp.data import (
    LoadInstance,
    PerturbationConfig,
    generate_instances,
    instances_to_matrix,
    matrix_to_instances,
    read_instances,
    split_labels,
    split_sizes,
    write_instances,
)


def test_unit_factors_reproduce_reference(net3):
    cfg = PerturbationConfig(1.0, 1.0, 1.0, 1.0)
    data = generate_instances(net3, 5, seed=0, cfg=cfg)
    for inst in data.instances:
        np.testing.assert_array_equal(inst.p_d, net3.ref_p_d)
        np.testing.assert_array_equal(inst.q_d, net3.ref_q_d)


def test_large_dataset_split_sizes():
    assert split_sizes(20000) == (18000, 1000, 1000)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5000), st.integers(0, 2**32 - 1))
def test_split_invariants(n, seed):
    labels = split_labels(n, seed)
    n_train, n_val, n_test = split_sizes(n)
    assert (labels.count("train"), labels.count("val"), labels.count("test")) == (n_train, n_val, n_test)
    assert n_val == n_test == (5 * n) // 100
    assert labels == split_labels(n, seed)


def test_same_seed_same_set(net14):
    a = generate_instances(net14, 30, seed=4)
    b = generate_instances(net14, 30, seed=4)
    np.testing.assert_array_equal(instances_to_matrix(a.instances), instances_to_matrix(b.instances))
    assert a.splits == b.splits


def test_perturbation_preserves_power_factor_and_range(net14):
    data = generate_instances(net14, 200, seed=1)
    X = instances_to_matrix(data.instances)
    n = net14.n_bus
    loaded = net14.ref_p_d != 0
    ratio = X[:, :n][:, loaded] / net14.ref_p_d[loaded]
    assert ratio.min() >= 0.8 * 0.95 - 1e-12 and ratio.max() <= 1.2 * 1.05 + 1e-12
    both = loaded & (net14.ref_q_d != 0)
    np.testing.assert_allclose(X[:, :n][:, both] / X[:, n:][:, both], np.broadcast_to(net14.ref_p_d[both] / net14.ref_q_d[both], (200, both.sum())))


def test_splits_disjoint(net3):
    data = generate_instances(net3, 100, seed=2)
    ids = [{i.id for i in data.subset(s)} for s in ("train", "val", "test")]
    assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])
    assert sum(map(len, ids)) == 100


def test_jsonl_round_trip(tmp_path, net3):
    data = generate_instances(net3, 25, seed=3)
    path = tmp_path / "d.jsonl"
    write_instances(path, data)
    back = read_instances(path)
    assert back.splits == data.splits
    np.testing.assert_array_equal(instances_to_matrix(back.instances), instances_to_matrix(data.instances))


def test_bad_record_reports_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": 0, "p_d": [1], "q_d": [0], "split": "train"}\n{"id": 1, "p_d": [1]}\n')
    with pytest.raises(ValueError, match=":2:"):
        read_instances(path)


def test_instance_validation():
    with pytest.raises(ValueError):
        LoadInstance([1.0, np.nan], [0.0, 0.0])
    with pytest.raises(ValueError):
        LoadInstance([1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        generate_instances(None, 0)


def test_matrix_round_trip():
    X = np.arange(12.0).reshape(3, 4)
    insts = matrix_to_instances(X, ids=[7, 8, 9])
    assert [i.id for i in insts] == [7, 8, 9]
    np.testing.assert_array_equal(instances_to_matrix(insts), X)
