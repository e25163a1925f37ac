import csv

import numpy as np
import pytest

from dualsdp import LoadInstance, Prediction, complete, generate_instances
from dualsdp import training as tr
from dualsdp.grid import Bus, Generator, make_network
from dualsdp.mlp import forward
from dualsdp.training import (
    Reference,
    TrainingDivergedError,
    evaluate,
    mean_bound,
    new_model,
    read_refs,
    train,
    write_eval_csv,
    write_history,
)


@pytest.fixture(scope="module")
def data3(net3):
    return generate_instances(net3, 200, seed=0)


def test_zero_epochs_returns_input(net3, data3):
    m = new_model(net3, seed=1, instances=data3.train)
    out, hist = train(net3, m, data3, epochs=0)
    for p, q in zip(m.params(), out.params()):
        np.testing.assert_array_equal(p, q)
    assert hist.epochs == []
    assert out is not m


def test_training_beats_zero_baseline(net3, data3):
    zero = new_model(net3, output_gain=0.0)
    baseline = mean_bound(net3, zero, data3.val)
    assert baseline == pytest.approx(float(net3.cost @ net3.p_min))
    model, hist = train(net3, new_model(net3, seed=0, instances=data3.train), data3, epochs=50, patience=50)
    assert mean_bound(net3, model, data3.val) > baseline
    assert hist.best_val_bound > baseline


def test_best_on_validation_retained(net3):
    data = generate_instances(net3, 60, seed=1)
    model, hist = train(net3, new_model(net3, seed=2, instances=data.train), data, epochs=8, batch=16, patience=100)
    best = max([hist.initial_val_bound] + hist.val_bound)
    assert hist.best_val_bound == best
    assert mean_bound(net3, model, data.val) == pytest.approx(best, rel=1e-12)


def test_identical_seed_identical_history(net3):
    data = generate_instances(net3, 40, seed=2)
    runs = [train(net3, new_model(net3, seed=3, instances=data.train), data, epochs=3, batch=8, seed=5)[1] for _ in range(2)]
    assert runs[0].rows() == runs[1].rows()


def test_early_stopping(net3):
    data = generate_instances(net3, 40, seed=3)
    _, hist = train(net3, new_model(net3, seed=4, instances=data.train), data, epochs=100, batch=8, lr=0.0, patience=2)
    assert hist.stopped_early and len(hist.epochs) == 2


def test_divergence_guard_names_batch(net3, monkeypatch):
    data = generate_instances(net3, 40, seed=4)
    real_step = tr.adam_step

    def poisoned(model, grads, **kw):
        real_step(model, grads, **kw)
        model.weights[-1][...] = np.nan

    monkeypatch.setattr(tr, "adam_step", poisoned)
    with pytest.raises(TrainingDivergedError) as err:
        train(net3, new_model(net3, instances=data.train), data, epochs=1, batch=8)
    assert (err.value.epoch, err.value.batch) == (1, 1)


def test_spot_checks_run(net3):
    data = generate_instances(net3, 40, seed=5)
    _, hist = train(net3, new_model(net3, instances=data.train), data, epochs=1, batch=8, spot_check_rate=1.0)
    assert hist.spot_checks == len(data.train)


def test_needs_val_split(net3):
    data = generate_instances(net3, 10, seed=0)  # 5% of 10 floors to zero
    with pytest.raises(ValueError):
        train(net3, new_model(net3), data, epochs=1)


def test_evaluate_without_refs(tmp_path, net3, data3):
    m = new_model(net3, seed=0, instances=data3.train)
    res = evaluate(net3, m, data3.test)
    assert all(r.passed for r in res.reports)
    path = tmp_path / "eval.csv"
    write_eval_csv(path, res)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["instance_id", "bound", "wall_time_ms"]
    assert len(rows) == 1 + len(data3.test)


def test_evaluate_refs_equal_bounds_give_zero_gap():
    net = make_network(
        [Bus(0)], [Generator(0, cost=10.0, p_min=0.1, p_max=1.0, q_min=-1.0, q_max=1.0)], [], [0.3], [0.1]
    )
    insts = [LoadInstance([0.3 + 0.01 * k], [0.1], id=k) for k in range(4)]
    m = new_model(net, output_gain=0.0)
    res = evaluate(net, m, insts)
    assert np.allclose(res.bounds, 1.0)
    refs = {r["instance_id"]: Reference(r["bound"]) for r in res.rows}
    res = evaluate(net, m, insts, refs)
    assert all(r["gap_pct"] == 0.0 for r in res.rows)
    assert res.summary["gap_pct_geomean"] == 0.0


def test_evaluate_csv_with_refs(tmp_path, net3, data3):
    m = new_model(net3, seed=0, instances=data3.train)
    refs_path = tmp_path / "refs.csv"
    with refs_path.open("w") as fh:
        fh.write("instance_id,z_ac_star,z_sdp_star,z_hat_soc\n")
        for inst in data3.test:
            fh.write(f"{inst.id},1500.0,1400.0,1000.0\n")
    refs = read_refs(refs_path)
    res = evaluate(net3, m, data3.test, refs)
    path = tmp_path / "eval.csv"
    write_eval_csv(path, res)
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0].keys()) == ["instance_id", "bound", "gap_pct", "gap_closed_pct", "wall_time_ms"]
    assert rows[-1]["instance_id"] == "summary"
    assert float(rows[-1]["gap_pct"]) == pytest.approx(res.summary["gap_pct_geomean"])
    b = float(rows[0]["bound"])
    assert float(rows[0]["gap_pct"]) == pytest.approx(100 * (1500 - b) / 1500)


def test_read_refs_requires_columns(tmp_path):
    p = tmp_path / "refs.csv"
    p.write_text("id,z\n1,2\n")
    with pytest.raises(ValueError, match="instance_id"):
        read_refs(p)


def test_history_csv(tmp_path, net3):
    data = generate_instances(net3, 40, seed=6)
    _, hist = train(net3, new_model(net3, instances=data.train), data, epochs=2, batch=16)
    p = tmp_path / "h.csv"
    write_history(p, hist)
    rows = list(csv.DictReader(p.open()))
    assert [int(r["epoch"]) for r in rows] == [1, 2]
    assert float(rows[1]["val_bound"]) == hist.val_bound[1]


def test_new_model_output_scale(net3):
    m = new_model(net3, output_gain=0.0)
    assert m.output_scale == net3.cost.max()
    y, _ = forward(m, np.ones((1, 6)))
    sol, _ = complete(net3, Prediction.from_vector(net3, y[0]), LoadInstance.reference(net3))
    assert sol.objective == 0.0
