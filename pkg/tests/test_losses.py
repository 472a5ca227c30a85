import numpy as np
import pytest

from duopoly_learning.losses import (
    OWNERS,
    InvalidTargetError,
    QuadraticPair,
    avg_loss_and_grad,
    make_complementary_quadratics,
    make_synthetic_logistic,
)
from duopoly_learning.harness import standard_quadratic


@pytest.fixture(scope="module")
def quad():
    return standard_quadratic(6, 0.65, seed=3)


@pytest.fixture(scope="module")
def logistic():
    return make_synthetic_logistic(80, 4, 0.8, seed=1)


def fd_grad(f, x, h=1e-5):
    out = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def test_hand_evaluated_quadratic():
    eye = np.eye(2)
    m = QuadraticPair(
        centers={"low": [1.0, 0.0], "high": [-1.0, 0.0]},
        hessians={"low": 0.1 * eye, "high": 0.1 * eye},
        offsets={"low": 0.05, "high": 0.05},
    )
    np.testing.assert_allclose(m.optimum, [0.0, 0.0], atol=1e-15)
    loss, grad = avg_loss_and_grad(m, m.optimum)
    assert loss == pytest.approx(0.1)
    np.testing.assert_allclose(grad, 0.0, atol=1e-15)
    assert m.smoothness == pytest.approx(0.1)
    assert m.max_quality == pytest.approx(0.9)


def test_rejects_indefinite_hessian():
    with pytest.raises(ValueError):
        QuadraticPair({"low": [0.0], "high": [1.0]}, {"low": [[-1.0]], "high": [[1.0]]},
                      {"low": 0.0, "high": 0.0})


@pytest.mark.parametrize("model_name", ["quad", "logistic"])
def test_gradients_match_finite_differences(model_name, request):
    model = request.getfixturevalue(model_name)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.standard_normal(model.dim) * 0.5
        for owner in OWNERS:
            fd = fd_grad(lambda z: model.owner_loss(z, owner), x)
            np.testing.assert_allclose(model.owner_grad(x, owner), fd, atol=1e-6)


@pytest.mark.parametrize("model_name", ["quad", "logistic"])
def test_convex_and_smooth_along_random_pairs(model_name, request):
    model = request.getfixturevalue(model_name)
    rng = np.random.default_rng(1)
    for _ in range(100):
        x, y = rng.standard_normal((2, model.dim))
        lam = rng.random()
        z = lam * x + (1 - lam) * y
        for owner in OWNERS:
            lhs = model.owner_loss(z, owner)
            rhs = lam * model.owner_loss(x, owner) + (1 - lam) * model.owner_loss(y, owner)
            assert lhs <= rhs + 1e-9
        dg = np.linalg.norm(model.grad(x) - model.grad(y))
        assert dg <= model.smoothness * np.linalg.norm(x - y) * (1 + 1e-9)


@pytest.mark.parametrize("model_name", ["quad", "logistic"])
def test_optimum_is_stationary(model_name, request):
    model = request.getfixturevalue(model_name)
    loss, grad = avg_loss_and_grad(model, model.optimum)
    assert loss == pytest.approx(model.optimum_value)
    assert np.linalg.norm(grad) <= 1e-8
    for owner in OWNERS:
        assert np.linalg.norm(model.owner_grad(model.owner_optimum(owner), owner)) <= 1e-8


def test_quadratic_target_is_exact():
    m = make_complementary_quadratics(5, 0.95, 0.0, seed=2)
    assert m.optimum_value == pytest.approx(0.05, abs=1e-14)
    assert m.owner_loss(m.optimum, "low") == pytest.approx(m.owner_loss(m.optimum, "high"), abs=1e-14)


def test_quadratic_asymmetry_sets_offset_gap():
    m = make_complementary_quadratics(3, 0.7, 0.2, seed=0)
    assert m.offsets["low"] - m.offsets["high"] == pytest.approx(0.2)
    assert m.max_quality == pytest.approx(0.7)


def test_quadratic_determinism():
    a = make_complementary_quadratics(4, 0.8, 0.05, seed=9)
    b = make_complementary_quadratics(4, 0.8, 0.05, seed=9)
    c = make_complementary_quadratics(4, 0.8, 0.05, seed=10)
    np.testing.assert_array_equal(a.hessians["low"], b.hessians["low"])
    np.testing.assert_array_equal(a.centers["high"], b.centers["high"])
    assert not np.allclose(a.hessians["low"], c.hessians["low"])


@pytest.mark.parametrize("target,asym,kw", [
    (0.05, 0.0, {}),                     # offsets push the center losses above 1
    (0.9, 0.5, {}),                      # negative offset
    (0.6, 0.0, {"cross_loss": 1.5}),     # curvature alone exceeds the range
])
def test_quadratic_invalid_targets(target, asym, kw):
    with pytest.raises(InvalidTargetError):
        make_complementary_quadratics(2, target, asym, seed=0, **kw)


def test_quadratic_losses_in_range_between_centers(quad):
    # gradient descent from either center stays in the box spanned by the centers
    for lam in np.linspace(0, 1, 21):
        x = lam * quad.centers["low"] + (1 - lam) * quad.centers["high"]
        for owner in OWNERS:
            assert 0.0 <= quad.owner_loss(x, owner) <= 1.0


def test_logistic_loss_at_zero(logistic):
    for owner in OWNERS:
        assert logistic.owner_loss(np.zeros(logistic.dim), owner) == pytest.approx(
            np.log(2) / logistic.normalizer)


def test_logistic_losses_in_range_on_reachable_points(logistic):
    pts = [np.zeros(logistic.dim), logistic.optimum,
           logistic.owner_optimum("low"), logistic.owner_optimum("high")]
    for x in pts:
        for owner in OWNERS:
            assert 0.0 <= logistic.owner_loss(x, owner) <= 1.0


def test_logistic_symmetric_skew_gives_exchangeable_firms():
    m = make_synthetic_logistic(4000, 3, 0.5, seed=4)
    x = np.array([0.3, -0.2, 0.5])
    assert m.owner_loss(x, "low") == pytest.approx(m.owner_loss(x, "high"), abs=0.03)


def test_logistic_skew_splits_classes():
    m = make_synthetic_logistic(100, 2, 0.8, seed=0)
    assert np.sum(m.data["low"][1] < 0) == 80
    assert np.sum(m.data["high"][1] < 0) == 20
    with pytest.raises(ValueError):
        make_synthetic_logistic(5, 2, 0.8, seed=0)
