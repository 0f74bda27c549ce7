import json
import math

import pytest

import utvi

SQRT3 = math.sqrt(3.0)


def test_sigma_points_kappa2():
    points, weights = utvi.sigma_points(1.0, 4.0, 2.0)
    assert points == pytest.approx((1.0, 1.0 - 2.0 * SQRT3, 1.0 + 2.0 * SQRT3), abs=1e-14)
    assert weights == pytest.approx((2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0), abs=1e-15)
    assert sum(weights) == pytest.approx(1.0, abs=1e-15)


def test_product_moments():
    mean, var = utvi.product_moments(2.0, 3.0, -1.0, 0.5)
    assert mean == -2.0
    assert var == pytest.approx(3.0 * 0.5 + 3.0 * 1.0 + 4.0 * 0.5, abs=1e-15)


def test_smp_relu_standard_normal():
    mean, var = utvi.smp_leaky_relu(0.0, 1.0, 0.0)
    assert mean == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-14)
    assert var == pytest.approx(0.5 - 1.0 / (2.0 * math.pi), abs=1e-14)


def test_ut_propagate_quadratic_exact():
    mean, var = utvi.ut_propagate(0.3, 2.0, lambda x: x * x, 2.0)
    assert mean == pytest.approx(0.3**2 + 2.0, abs=1e-12)
    assert var >= 0.0


def test_scalar_helpers():
    assert utvi.normal_cdf(0.0) == 0.5
    assert utvi.normal_inv_cdf(0.975) == pytest.approx(1.959963984540054, abs=1e-9)
    z = 0.7531
    assert utvi.normal_inv_cdf(utvi.normal_cdf(z)) == pytest.approx(z, abs=1e-9)
    assert utvi.sigmoid(0.0) == 0.5
    x = 1.37
    assert utvi.softplus(x) - utvi.softplus(-x) == pytest.approx(x, abs=1e-12)


def test_kl_scale_schedule():
    assert utvi.kl_scale(1, 3) == pytest.approx(4.0 / 7.0, abs=1e-15)
    assert sum(utvi.kl_scale(l, 10) for l in range(1, 11)) == pytest.approx(1.0, abs=1e-12)


def test_gaussian_nll_unit():
    assert utvi.gaussian_nll([0.0], [1.0], [0.0]) == pytest.approx(
        0.5 * math.log(2.0 * math.pi), abs=1e-15
    )


def test_datasets_deterministic():
    xs1, ys1 = utvi.regression_dataset(64, 5)
    xs2, ys2 = utvi.regression_dataset(64, 5)
    assert xs1 == xs2 and ys1 == ys2
    assert len(xs1) == 64 and len(xs1[0]) == 1 and len(ys1[0]) == 1
    assert all(-1.0 <= row[0] <= 2.0 for row in xs1)

    imgs, targets = utvi.localization_dataset(8, 3)
    assert len(imgs) == 8 and len(imgs[0]) == 64 and len(targets[0]) == 3
    assert all(v >= 0.0 for v in imgs[0])


def test_emitter_physics():
    img = utvi.expected_image(0.0, 0.0)
    assert len(img) == 64
    total = utvi.expected_in_frame_count(0.0, 0.0)
    assert sum(img) == pytest.approx(total, rel=1e-12)
    assert total == pytest.approx(99.97215499892118, abs=1e-9)


TINY_CONFIG = {
    "task": "regression",
    "mode": "utvi",
    "train": {
        "epochs": 3,
        "batches_per_epoch": 2,
        "batch_size": 16,
        "val_size": 32,
        "learning_rate": 1e-3,
    },
}


def strip_wall(log_csv):
    # the trailing column is wall-clock time
    return [line.rsplit(",", 1)[0] for line in log_csv.splitlines()]


def test_train_run_deterministic():
    cfg = json.dumps(TINY_CONFIG)
    a = utvi.train_run(cfg, seed=3)
    b = utvi.train_run(cfg, seed=3)
    assert a["checkpoint_json"] == b["checkpoint_json"]
    assert strip_wall(a["log_csv"]) == strip_wall(b["log_csv"])
    assert a["best_epoch"] >= 1
    assert math.isfinite(a["best_val_nll"])
    c = utvi.train_run(cfg, seed=4)
    assert c["checkpoint_json"] != a["checkpoint_json"]


def test_predictor_round_trip():
    res = utvi.train_run(json.dumps(TINY_CONFIG), seed=3)
    p = utvi.Predictor(res["checkpoint_json"])
    assert p.task == "regression"
    assert p.epoch == res["best_epoch"]
    assert p.param_count > 0

    means, vars_ = p.predict([[0.0], [0.5], [1.5]])
    assert len(means) == 3 and len(means[0]) == 1
    assert all(v[0] > 0.0 for v in vars_)

    q = utvi.Predictor(p.to_json())
    means2, vars2 = q.predict([[0.0], [0.5], [1.5]])
    assert means2 == means and vars2 == vars_

    nll = p.nll([[0.0], [0.5]], [[0.0], [0.5]])
    assert math.isfinite(nll)
    assert nll == p.nll([[0.0], [0.5]], [[0.0], [0.5]])


def test_error_mapping():
    with pytest.raises(ValueError):
        utvi.sigma_points(0.0, -1.0)
    with pytest.raises(ValueError):
        utvi.gaussian_nll([0.0], [1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        utvi.train_run(json.dumps({"task": "cooking"}))
    with pytest.raises(RuntimeError):
        utvi.Predictor("not a checkpoint")
