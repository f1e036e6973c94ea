import csv
import math

import numpy as np
import pytest

from clstm_bearing import checkpoint
from clstm_bearing.errors import BatchTooLargeError, DivergenceError, EmptySplitError, NoNegativesError
from clstm_bearing.model import ModelConfig, build_model
from clstm_bearing.synth import Split
from clstm_bearing.train_eval import (
    HISTORY_FIELDS, TrainConfig, TrainHistory, accuracy, batch_slices, confusion_matrix, evaluate,
    export_confusion, export_history, fpr_normal, normal_false_alarm_rate, precision_recall,
    read_confusion, train,
)


def sizes(n, bs):
    return [s.stop - s.start for s in batch_slices(n, bs)]


def test_batch_arithmetic():
    assert sizes(8000, 128) == [128] * 62 + [64]
    assert sizes(256, 128) == [128, 128]
    assert sizes(257, 128) == [128, 129]
    assert sizes(258, 128) == [128, 128, 2]
    with pytest.raises(BatchTooLargeError):
        batch_slices(100, 128)
    with pytest.raises(EmptySplitError):
        batch_slices(0, 2)


def test_config_invariants():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)


def test_constant_predictor():
    y = np.repeat(np.arange(5), 20)
    cm = confusion_matrix(y, np.zeros_like(y))
    assert accuracy(cm) == 0.2
    assert np.count_nonzero(cm.sum(axis=0)) == 1
    assert fpr_normal(cm) == 1.0


def test_perfect_predictor():
    y = np.repeat(np.arange(5), 3)
    cm = confusion_matrix(y, y)
    assert np.array_equal(cm, 3 * np.eye(5, dtype=int))
    assert accuracy(cm) == 1.0 and fpr_normal(cm) == 0.0 and normal_false_alarm_rate(cm) == 0.0


def test_hand_tally():
    y_true = [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]
    y_pred = [0, 1, 1, 1, 0, 2, 3, 4, 4, 4]
    cm = confusion_matrix(y_true, y_pred)
    want = np.zeros((5, 5), int)
    for t, p in [(0, 0), (0, 1), (1, 1), (1, 1), (2, 0), (2, 2), (3, 3), (3, 4), (4, 4), (4, 4)]:
        want[t, p] += 1
    assert np.array_equal(cm, want)
    assert accuracy(cm) == 0.7
    assert fpr_normal(cm) == 1 / 8
    assert normal_false_alarm_rate(cm) == 0.5
    precision, recall = precision_recall(cm)
    assert precision[1] == pytest.approx(2 / 3) and recall[3] == 0.5


def test_fpr_two_of_800():
    cm = np.diag([200, 200, 200, 200, 200])
    cm[1, 1] -= 2
    cm[1, 0] += 2
    assert fpr_normal(cm) == 0.0025


def test_fpr_needs_faulty():
    cm = np.zeros((5, 5), int)
    cm[0, 0] = 10
    with pytest.raises(NoNegativesError):
        fpr_normal(cm)


def test_fpr_randomized(rng):
    for _ in range(20):
        cm = rng.integers(0, 20, (5, 5))
        assert fpr_normal(cm) == cm[1:, 0].sum() / cm[1:].sum()
        assert accuracy(cm) == np.trace(cm) / cm.sum()


def test_confusion_csv(tmp_path, rng):
    p = tmp_path / "cm.csv"
    export_confusion(np.zeros((5, 5), int), p)
    rows = list(csv.reader(open(p)))
    assert rows[0][1:] == ["Normal", "DriveInnerSpall", "NonDriveInnerSpall", "DriveOuterSpall", "NonDriveOuterSpall"]
    assert [r[0] for r in rows[1:]] == rows[0][1:]
    assert all(v == "0" for r in rows[1:] for v in r[1:]) and len(rows) == 6
    cm = rng.integers(0, 100, (5, 5))
    export_confusion(cm, p)
    assert np.array_equal(read_confusion(p), cm)


def test_history_csv(tmp_path):
    h = TrainHistory(iteration_epoch=[1, 1, 2, 2], iteration_loss=[1.5, 1.2, 1.0, 0.9],
                     iteration_acc=[0.2, 0.3, 0.5, 0.6], train_loss=[1.35, 0.95], train_acc=[0.25, 0.55],
                     val_loss=[1.1, math.nan], val_acc=[0.4, math.nan])
    p = tmp_path / "h.csv"
    export_history(h, p)
    rows = list(csv.DictReader(open(p)))
    assert tuple(rows[0]) == HISTORY_FIELDS
    epoch_rows = [r for r in rows if r["iteration"] == ""]
    assert len(epoch_rows) == 2 and len(rows) == 6
    assert float(epoch_rows[0]["val_acc"]) == 0.4 and epoch_rows[1]["val_acc"] == ""
    assert [r["iteration"] for r in rows if r["iteration"]] == ["1", "2", "3", "4"]


@pytest.fixture(scope="module")
def small_model_cfg():
    return ModelConfig(frame_len=480, conv1_channels=4, conv2_channels=6, lstm_hidden=16)


def test_lr_zero_is_null_update(desk_data, small_model_cfg):
    m = build_model(small_model_cfg, 0)
    before = {k: v.copy() for k, v in m.params.items()}
    res = train(m, desk_data, TrainConfig(epochs=2, batch_size=64, learning_rate=0.0))
    assert all(np.array_equal(before[k], m.params[k]) for k in before)
    per_epoch = np.array(res.history.iteration_loss).reshape(2, -1)
    # same batches in shuffled order with different dropout masks: flat on average
    assert abs(per_epoch[0].mean() - per_epoch[1].mean()) < 0.05


def test_training_improves_and_is_deterministic(desk_data, small_model_cfg):
    cfg = TrainConfig(epochs=3, batch_size=32, learning_rate=0.05, shuffle_seed=4)
    runs = []
    for _ in range(2):
        m = build_model(small_model_cfg, 4)
        runs.append(train(m, desk_data, cfg))
    a, b = runs
    assert a.final_checkpoint == b.final_checkpoint
    assert a.history == b.history
    h = a.history
    n_batches = len(batch_slices(desk_data.counts()["train"], 32))
    assert len(h.iteration_loss) == 3 * n_batches
    assert len(h.train_loss) == len(h.val_acc) == 3
    assert h.train_loss[-1] < h.train_loss[0]
    assert abs(h.iteration_loss[0] - math.log(5)) < 0.3


def test_best_checkpoint_policy(desk_data, small_model_cfg):
    m = build_model(small_model_cfg, 1)
    seen = []
    res = train(m, desk_data, TrainConfig(epochs=4, batch_size=32, learning_rate=0.05),
                on_epoch=lambda e, h: seen.append(e))
    assert seen == [1, 2, 3, 4]
    h = res.history
    qualifying = [a for a in h.val_acc if a >= 0.99]
    if qualifying:
        best = max(qualifying)
        assert h.best_epoch == h.val_acc.index(best) + 1
        _, meta = checkpoint.loads(res.best_checkpoint)
        assert meta.epoch == h.best_epoch and meta.val_accuracy == best
    else:
        assert res.best_checkpoint is None and h.best_epoch is None
    model, meta = checkpoint.loads(res.final_checkpoint)
    assert meta.epoch == 4 and meta.stats == desk_data.stats


def test_threshold_zero_saves_first_epoch(desk_data, small_model_cfg):
    m = build_model(small_model_cfg, 1)
    res = train(m, desk_data, TrainConfig(epochs=1, batch_size=64, val_accuracy_save_threshold=0.0))
    assert res.history.best_epoch == 1 and res.best_checkpoint is not None


def test_divergence_raises(desk_data, small_model_cfg):
    m = build_model(small_model_cfg, 0)
    m.params["fc.bias"][:] = np.nan
    with pytest.raises(DivergenceError):
        train(m, desk_data, TrainConfig(epochs=1, batch_size=64))


def test_evaluate_pure_and_consistent(desk_data, small_model_cfg):
    m = build_model(small_model_cfg, 0)
    snap = checkpoint.dumps(m)
    res = evaluate(m, desk_data, Split.VAL)
    assert checkpoint.dumps(m) == snap
    _, y = desk_data.subset(Split.VAL)
    assert res.confusion.sum() == y.size
    assert np.array_equal(res.confusion.sum(axis=1), np.bincount(y, minlength=5))


def test_untrained_near_chance(desk_data):
    accs = [evaluate(build_model(ModelConfig(frame_len=480), s), desk_data, Split.TEST).accuracy
            for s in range(3)]
    assert 0.1 <= np.mean(accs) <= 0.4


def test_empty_split(desk_data, small_model_cfg):
    import dataclasses
    empty = dataclasses.replace(desk_data, split=np.zeros_like(desk_data.split))
    with pytest.raises(EmptySplitError):
        evaluate(build_model(small_model_cfg, 0), empty, Split.TEST)
