"""Smoke tests for the python surface of the C++ core."""

import os

import numpy as np
import pytest

import ungap


def test_losses_agree_with_each_other():
    rng = np.random.default_rng(0)
    y = (rng.random((2, 1, 4, 4)) < 0.5).astype(float)
    y_hat = rng.uniform(0.05, 0.95, (2, 1, 4, 4))
    s = rng.uniform(-2.0, 2.0, (2, 1, 4, 4))
    assert ungap.beta_nll(y, y_hat, s, beta=0.0) == pytest.approx(
        ungap.standard_nll(y, y_hat, s), abs=1e-12
    )
    gy, gs = ungap.beta_nll_grad(y, y_hat, s, beta=0.25)
    assert gy.shape == (2, 1, 4, 4) and gs.shape == (2, 1, 4, 4)
    assert np.isfinite(gy).all() and np.isfinite(gs).all()
    assert ungap.attenuation_ratio(0.0, 0.25) == pytest.approx(1.0)
    assert ungap.attenuation_ratio(2.0, 1.0) == pytest.approx(1.0)


def test_generate_scene_is_deterministic():
    a = ungap.generate_scene(7, size=48)
    b = ungap.generate_scene(7, size=48)
    assert {"image", "clean", "mask", "noise_sigma", "seed"} <= set(a)
    assert a["image"].shape == (1, 1, 48, 48)
    assert np.array_equal(a["image"], b["image"])
    assert set(np.unique(a["mask"])) <= {0.0, 1.0}
    assert a["image"].min() >= 0.0 and a["image"].max() <= 1.0
    assert a["seed"] == 7


def test_boundary_and_dice():
    mask = np.zeros((1, 1, 12, 12))
    mask[0, 0, 4:8, 4:8] = 1.0
    band = ungap.boundary_from_mask(mask, width=1)
    assert band.shape == mask.shape
    assert band.max() == 1.0
    assert band[0, 0, 0, 0] == 0.0
    assert ungap.dice_loss(mask, mask) == pytest.approx(0.0, abs=1e-12)


def test_micro_metrics_counts():
    pred = np.array([[[[0.9, 0.1], [0.8, 0.2]]]])
    target = np.array([[[[1.0, 0.0], [0.0, 1.0]]]])
    rep = ungap.micro_metrics([pred], [target], threshold=0.5)
    assert (rep["tp"], rep["fp"], rep["fn"], rep["tn"]) == (1, 1, 1, 1)
    assert rep["precision"] == pytest.approx(0.5)


def test_sparsification_and_correlation():
    rng = np.random.default_rng(3)
    target = (rng.random((1, 1, 8, 8)) < 0.5).astype(float)
    pred = np.clip(target + rng.normal(0.0, 0.2, target.shape), 0.0, 1.0)
    s = np.abs(pred - target)  # oracle ordering
    fractions, residual = ungap.sparsification([pred], [target], [s], steps=5)
    assert list(fractions) == pytest.approx([0.0, 0.2, 0.4, 0.6, 0.8])
    assert all(residual[i + 1] <= residual[i] + 1e-12 for i in range(len(residual) - 1))
    rho, undefined = ungap.uncertainty_noise_correlation([s], [s])
    assert not undefined
    assert rho == pytest.approx(1.0)


def test_model_forward_save_load(tmp_path):
    cfg = ungap.ModelConfig.preset("tiny", 32)
    model = ungap.Model(cfg, seed=3)
    assert model.parameter_count > 0
    rng = np.random.default_rng(1)
    image = rng.random((1, 3, 32, 32))
    out = model.forward(image)
    assert out["seg_prob"].shape == (1, 1, 32, 32)
    assert 0.0 <= out["seg_prob"].min() <= out["seg_prob"].max() <= 1.0
    assert out["s"].min() >= -7.0 and out["s"].max() <= 7.0
    assert "boundary_prob" in out and "y_hat_aux" in out

    path = str(tmp_path / "model.ckpt")
    model.save(path, epoch=1, beta=0.25, seed=3)
    clone = ungap.Model.load(path)
    again = clone.forward(image)
    assert np.array_equal(out["seg_prob"], again["seg_prob"])
    assert np.array_equal(out["s"], again["s"])


def test_augment_shapes():
    scene = ungap.generate_scene(11, size=48)
    img, msk = ungap.augment(scene["image"], scene["mask"], seed=5, train_size=32)
    assert img.shape == (1, 1, 32, 32)
    assert msk.shape == (1, 1, 32, 32)
    assert set(np.unique(msk)) <= {0.0, 1.0}


def test_train_on_directory(tmp_path):
    data = str(tmp_path / "ds")
    ungap.generate_dataset(data, n=3, seed=5, size=32)
    assert os.path.isdir(os.path.join(data, "images"))
    assert os.path.isdir(os.path.join(data, "masks"))

    model = ungap.Model(ungap.ModelConfig.preset("tiny", 32), seed=9)
    records = ungap.train_on_directory(
        model, data, epochs=2, batch_size=2, lr=1e-3, beta=0.25, seed=9
    )
    assert len(records) == 2
    assert records[0]["epoch"] == 1
    assert all(np.isfinite(r["l_final"]) for r in records)


def test_errors_surface_as_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        ungap.dice_loss(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)))
    with pytest.raises(OSError):
        ungap.Model.load(str(tmp_path / "absent.ckpt"))
    with pytest.raises(ValueError):
        ungap.micro_metrics([np.zeros((1, 1, 2, 2))], [np.zeros((1, 1, 2, 2))], threshold=0.0)
