import numpy as np
import pytest

from reconxfer.errors import ConfigurationError, ShapeError
from reconxfer.nn import parameter_checksum
from reconxfer.training import (
    Architecture,
    EarlyStopper,
    LabeledDataset,
    StagedModel,
    TaskAdapter,
    TrainConfig,
    build_staged_model,
    combined_loss,
    evaluate_model,
    reconstruction_loss,
    train_source,
    train_target,
    transfer_feature_stage,
)

TINY = Architecture(feature_dims=[8, 10, 6], optimization_dims=[6, 8, 2],
                    reconstruction_dims=[6, 10, 8])


class QuadraticAdapter(TaskAdapter):
    """Regression toward a fixed linear map; utility is negative RMS."""

    def __init__(self, w):
        self.w = w

    def _target(self, batch):
        return batch.extras["raw"] @ self.w.T

    def loss_and_grad(self, outputs, batch):
        err = outputs - self._target(batch)
        loss = float((err ** 2).sum(axis=1).mean())
        return loss, 2.0 * err / len(outputs)

    def utility(self, outputs, batch):
        err = outputs - self._target(batch)
        return -float(np.sqrt((err ** 2).sum(axis=1).mean()))


def make_data(n, seed, with_recon=True):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 8))
    return LabeledDataset(x, recon_targets=x.copy() if with_recon else None,
                          extras={"raw": x})


def adapter():
    rng = np.random.default_rng(1234)
    return QuadraticAdapter(rng.normal(size=(2, 8)) * 0.5)


# ---------------------------------------------------------------------------
# loss algebra


def test_combined_loss_examples():
    assert combined_loss(2.0, 3.0, 5.0) == 17.0
    assert combined_loss(1.7, 99.0, 0.0) == 1.7
    assert combined_loss(0.0, 2.5, 3.0) == 7.5


def test_reconstruction_loss_examples():
    assert reconstruction_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert reconstruction_loss([1.0, 1.0], [0.0, 0.0]) == 1.0
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=12), rng.normal(size=12)
    assert reconstruction_loss(a, b) == pytest.approx(
        float(np.mean((a - b) ** 2)), abs=1e-15)
    with pytest.raises(ShapeError):
        reconstruction_loss([1.0, 2.0], [1.0])


# ---------------------------------------------------------------------------
# staged model assembly


def test_build_staged_model_shapes_and_determinism():
    a = build_staged_model(TINY, with_reconstruction=True, seed=5)
    b = build_staged_model(TINY, with_reconstruction=True, seed=5)
    assert parameter_checksum(a.feature) == parameter_checksum(b.feature)
    assert parameter_checksum(a.reconstruction) == parameter_checksum(b.reconstruction)
    assert a.feature.out_dim == a.optimization.in_dim == a.reconstruction.in_dim
    c = build_staged_model(TINY, with_reconstruction=False, seed=5)
    assert c.reconstruction is None
    # dropping the reconstruction stage must not reshuffle the others
    assert parameter_checksum(c.feature) == parameter_checksum(a.feature)
    assert parameter_checksum(c.optimization) == parameter_checksum(a.optimization)


def test_architecture_rejects_feature_width_mismatch():
    with pytest.raises(ConfigurationError):
        Architecture(feature_dims=[8, 10, 6], optimization_dims=[7, 2],
                     reconstruction_dims=[6, 8])


def test_alpha_model_consistency_enforced():
    data = make_data(32, 0)
    cfg = TrainConfig(alpha=1.0, max_epochs=1, patience=1, batch_size=16, seed=0)
    no_recon = build_staged_model(TINY, with_reconstruction=False, seed=0)
    with pytest.raises(ConfigurationError):
        train_source(no_recon, data, data, adapter(), cfg)
    with_recon = build_staged_model(TINY, with_reconstruction=True, seed=0)
    cfg0 = TrainConfig(alpha=0.0, max_epochs=1, patience=1, batch_size=16, seed=0)
    with pytest.raises(ConfigurationError):
        train_source(with_recon, data, data, adapter(), cfg0)
    missing_targets = make_data(32, 0, with_recon=False)
    with pytest.raises(ConfigurationError):
        train_source(with_recon, missing_targets, missing_targets, adapter(), cfg)


# ---------------------------------------------------------------------------
# early stopping


def test_early_stopper_strictly_improving_never_stops():
    st = EarlyStopper(patience=3, mode="max")
    for epoch in range(1, 200):
        st.update(epoch, float(epoch))
        assert not st.should_stop()


def test_early_stopper_constant_metric_stops_after_patience():
    st = EarlyStopper(patience=20, mode="min")
    stopped_at = None
    for epoch in range(1, 100):
        st.update(epoch, 1.0)
        if st.should_stop():
            stopped_at = epoch
            break
    assert stopped_at == 21
    assert st.best_epoch == 1


def test_early_stopper_tracks_best_epoch():
    st = EarlyStopper(patience=50, mode="max")
    series = [0.1, 0.5, 0.3, 0.9, 0.2, 0.4]
    for epoch, val in enumerate(series, start=1):
        st.update(epoch, val)
    assert st.best_epoch == 4
    assert st.best == 0.9


# ---------------------------------------------------------------------------
# training behavior


def small_cfg(**kw):
    base = dict(alpha=0.0, lr=3e-3, batch_size=16, max_epochs=30,
                early_stopping=False, seed=3)
    base.update(kw)
    base.setdefault("patience", base["max_epochs"])
    return TrainConfig(**base)


def test_training_reduces_loss_and_reports_curves():
    data, val = make_data(128, 0), make_data(64, 1)
    model = build_staged_model(TINY, False, seed=0)
    report = train_target(model, data, val, adapter(), small_cfg())
    assert report.epochs_run == 30
    assert len(report.train_loss) == 30 == len(report.val_utility)
    assert report.val_loss[-1] < report.val_loss[0]
    assert report.best_epoch == int(np.argmax(report.val_utility)) + 1


def test_best_checkpoint_matches_best_validation_epoch():
    data, val = make_data(96, 2), make_data(64, 3)
    model = build_staged_model(TINY, False, seed=1)
    report = train_target(model, data, val, adapter(), small_cfg(max_epochs=15))
    report.restore_best(model)
    stats = evaluate_model(model, val, adapter())
    assert stats["utility"] == pytest.approx(max(report.val_utility), abs=1e-12)
    # early stopping never returns a worse checkpoint than any epoch seen
    assert stats["utility"] >= max(report.val_utility) - 1e-12


def test_source_training_with_reconstruction_loss_decreases_both():
    data, val = make_data(192, 4), make_data(96, 5)
    model = build_staged_model(TINY, True, seed=2)
    cfg = small_cfg(alpha=2.0, max_epochs=40, patience=40)
    report = train_source(model, data, val, adapter(), cfg)
    # total = task + alpha * recon stays above the task loss
    for total, task in zip(report.val_loss, report.val_task_loss):
        assert total >= task - 1e-12
    assert report.val_loss[-1] < report.val_loss[0]
    rec_first = (report.val_loss[0] - report.val_task_loss[0]) / cfg.alpha
    rec_last = (report.val_loss[-1] - report.val_task_loss[-1]) / cfg.alpha
    assert rec_last < rec_first


def test_alpha_zero_trajectory_matches_plain_source_run():
    data, val = make_data(64, 6), make_data(32, 7)
    cfg = small_cfg(max_epochs=5)
    m1 = build_staged_model(TINY, False, seed=9)
    m2 = build_staged_model(TINY, False, seed=9)
    r1 = train_source(m1, data, val, adapter(), cfg)
    r2 = train_source(m2, data, val, adapter(), cfg)
    assert parameter_checksum(m1.feature) == parameter_checksum(m2.feature)
    assert parameter_checksum(m1.optimization) == parameter_checksum(m2.optimization)
    assert r1.val_loss == r2.val_loss


def test_reconstruction_gradient_reaches_feature_stage():
    data, val = make_data(64, 8), make_data(32, 9)
    m_plain = build_staged_model(TINY, False, seed=4)
    m_recon = build_staged_model(TINY, True, seed=4)
    assert parameter_checksum(m_plain.feature) == parameter_checksum(m_recon.feature)
    train_source(m_plain, data, val, adapter(), small_cfg(max_epochs=3))
    train_source(m_recon, data, val, adapter(),
                 small_cfg(alpha=5.0, max_epochs=3))
    assert parameter_checksum(m_plain.feature) != parameter_checksum(m_recon.feature)


def test_transfer_freezes_features_through_target_training():
    data, val = make_data(96, 10), make_data(48, 11)
    source = build_staged_model(TINY, True, seed=5)
    train_source(source, data, val, adapter(), small_cfg(alpha=1.0, max_epochs=3))
    target = transfer_feature_stage(source, TINY, seed=77)
    assert target.reconstruction is None
    assert target.feature.frozen.all()
    assert parameter_checksum(target.feature) == parameter_checksum(source.feature)
    frozen_before = parameter_checksum(target.feature)
    opt_before = parameter_checksum(target.optimization)
    train_target(target, data, val, adapter(), small_cfg(max_epochs=10))
    assert parameter_checksum(target.feature) == frozen_before
    assert parameter_checksum(target.optimization) != opt_before


def test_transfer_rejects_mismatched_feature_dims():
    source = build_staged_model(TINY, False, seed=0)
    other = Architecture(feature_dims=[8, 12, 6], optimization_dims=[6, 2],
                         reconstruction_dims=[6, 8])
    with pytest.raises(ConfigurationError):
        transfer_feature_stage(source, other, seed=0)


def test_zero_epochs_keeps_initial_model():
    data, val = make_data(32, 12), make_data(32, 13)
    model = build_staged_model(TINY, False, seed=6)
    before = evaluate_model(model, val, adapter())
    report = train_target(model, data, val, adapter(),
                          small_cfg(max_epochs=0, patience=0))
    assert report.epochs_run == 0
    after = evaluate_model(model, val, adapter())
    assert after["utility"] == pytest.approx(before["utility"], abs=1e-15)


def test_early_stopping_halts_and_restores():
    data, val = make_data(64, 14), make_data(48, 15)
    model = build_staged_model(TINY, False, seed=7)
    cfg = small_cfg(max_epochs=200, patience=5, early_stopping=True, lr=0.02)
    report = train_target(model, data, val, adapter(), cfg)
    assert report.stopped_early
    assert report.epochs_run < 200
    assert report.best_epoch <= report.epochs_run - 5


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(patience=10, max_epochs=5)
    with pytest.raises(ConfigurationError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(alpha=-1.0)
    with pytest.raises(ConfigurationError):
        TrainConfig(validation_metric="nope")
