import json

import numpy as np
import pytest

from rnn_sysid.losses import make_loss
from rnn_sysid.student import init_student
from rnn_sysid.teacher import ParameterError, generate_dataset, random_stable_system
from rnn_sysid.trainer import averaged_loss, running_average, sgd_train


def _problem(seed=0, noise=0.0, T=12, K=8):
    sys = random_stable_system(3, 2, 2, 0.8, seed)
    ds = generate_dataset(sys, "iid_gaussian_unit", noise, T, K, seed + 1)
    return sys, ds


def test_loss_decreases():
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    rnn = init_student(64, 2, 2, 0.9, 3)
    trace = sgd_train(rnn, ds, loss, 1e-2 / 64, 300, seed=0)
    losses = trace.losses()
    assert np.mean(losses[-50:]) < 0.5 * np.mean(losses[:50])
    assert not trace.aborted


def test_eta_zero_keeps_parameters():
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    rnn = init_student(32, 2, 2, 0.9, 3)
    W_before = rnn.W_tilde.copy()
    trace = sgd_train(rnn, ds, loss, 0.0, 20, seed=0)
    np.testing.assert_array_equal(rnn.W_tilde, W_before)
    assert trace.records[-1]["dW_frob"] == 0.0


def test_same_seed_same_trace():
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    traces = []
    for _ in range(2):
        rnn = init_student(32, 2, 2, 0.9, 3)
        traces.append(sgd_train(rnn, ds, loss, 1e-4, 50, seed=5))
    np.testing.assert_array_equal(traces[0].losses(), traces[1].losses())
    assert [r["i"] for r in traces[0].records] == \
        [r["i"] for r in traces[1].records]


def test_trace_file_matches_records(tmp_path):
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    rnn = init_student(32, 2, 2, 0.9, 3)
    path = tmp_path / "trace.jsonl"
    trace = sgd_train(rnn, ds, loss, 1e-4, 30, seed=1, trace_path=str(path))
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(rows) == 30
    assert rows[7] == trace.records[7]


def test_checkpoints_written(tmp_path):
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    rnn = init_student(32, 2, 2, 0.9, 3)
    trace = sgd_train(rnn, ds, loss, 1e-4, 40, seed=1,
                      checkpoint_every=20, checkpoint_dir=str(tmp_path))
    assert len(trace.checkpoint_dirs) == 2
    assert (tmp_path / "step_000020" / "checkpoint.json").exists()


def test_divergence_aborts_with_checkpoint(tmp_path):
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    rnn = init_student(32, 2, 2, 0.9, 3)
    with np.errstate(over="ignore", invalid="ignore"):
        trace = sgd_train(rnn, ds, loss, 1e6, 200, seed=1,
                          checkpoint_dir=str(tmp_path))
    assert trace.aborted
    assert len(trace.records) < 200
    assert any(d.find("abort") >= 0 for d in trace.checkpoint_dirs)


def test_holdout_losses_recorded():
    sys, ds = _problem()
    holdout = generate_dataset(sys, "iid_gaussian_unit", 0.0, 12, 8, seed=99)
    loss = make_loss("square", d_y=2)
    rnn = init_student(32, 2, 2, 0.9, 3)
    trace = sgd_train(rnn, ds, loss, 1e-4, 25, seed=1, holdout=holdout)
    assert len(trace.holdout_losses()) == 25


def test_invalid_eta_and_K():
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    rnn = init_student(8, 2, 2, 0.9, 3)
    with pytest.raises(ParameterError):
        sgd_train(rnn, ds, loss, -1.0, 10, seed=0)
    with pytest.raises(ParameterError):
        sgd_train(rnn, ds, loss, 1e-4, 0, seed=0)


def test_averaged_loss_is_mean():
    _, ds = _problem()
    loss = make_loss("square", d_y=2)
    rnn = init_student(16, 2, 2, 0.9, 3)
    trace = sgd_train(rnn, ds, loss, 1e-4, 20, seed=2)
    assert averaged_loss(trace) == pytest.approx(float(np.mean(trace.losses())))


def test_running_average_trailing_window():
    vals = [1.0, 2.0, 3.0, 4.0]
    out = running_average(vals, 2)
    np.testing.assert_allclose(out, [1.0, 1.5, 2.5, 3.5])
