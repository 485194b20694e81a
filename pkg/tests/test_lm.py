import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifinn.lm import LAMBDA_MIN, TrainOptions, TrainingDiverged, damped_solve, least_squares_lm, lm_step, \
    lm_update, multi_restart_train, split_validation, sweep_hidden_units, train, gradient_descent_baseline
from bifinn.net import NetLayout, fit_normalizers, forward, forward_normalized, init_net, jacobian


def sin_data(n=200):
    x = np.linspace(0.0, 1.0, n)[:, None]
    return x, np.sin(2 * np.pi * x[:, 0])


def rosenbrock(theta):
    f = np.array([theta[0], 10 * (theta[0] ** 2 - theta[1])])
    J = np.array([[1.0, 0.0], [20 * theta[0], -10.0]])
    return f, J


def assert_strictly_decreasing_when_accepted(hist):
    steps = np.diff(hist)
    assert np.all(steps <= 0)  # rejected steps repeat the value, accepted ones decrease


def test_options_validation():
    with pytest.raises(ValueError):
        TrainOptions(val_fraction=1.0)
    with pytest.raises(ValueError):
        TrainOptions(lambda_up=1.0)
    with pytest.raises(ValueError):
        TrainOptions(grad_tol=0.0)


def test_rosenbrock_reaches_minimum():
    # residual y - f = (1 - t1, 10 (t2 - t1^2))
    theta, mse, iters, stop = least_squares_lm(rosenbrock, [-1.2, 1.0], [1.0, 0.0],
                                               TrainOptions(max_iters=200, grad_tol=1e-30))
    np.testing.assert_allclose(theta, [1.0, 1.0], atol=1e-6)
    assert iters <= 200


def test_gauss_newton_exact_on_linear_model():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((30, 4))
    y = rng.standard_normal(30)
    model = lambda t: A @ t  # noqa: E731
    theta, mse, accepted, lam = lm_update(np.zeros(4), float(np.mean(y**2)), A, y, 1e-15, model, y,
                                          TrainOptions())
    assert accepted
    np.testing.assert_allclose(theta, np.linalg.lstsq(A, y, rcond=None)[0], rtol=1e-8, atol=1e-10)


def test_lm_step_exact_on_linearized_net():
    # targets a tiny parameter step away: the model is linear in theta to round-off,
    # so one Gauss-Newton step with vanishing damping lands on the least-squares optimum
    net = init_net(NetLayout(1, 2, 2, 1), 3)
    net = net.with_theta(net.theta + 0.3 * np.random.default_rng(0).standard_normal(13))
    X = np.linspace(-1, 1, 40)[:, None]
    J = jacobian(net, X)
    delta = 1e-7 * np.random.default_rng(1).standard_normal(13)
    Y = forward(net, X)[:, 0] + J @ delta
    _, mse, accepted, _ = lm_step(net, X, Y, 1e-15)
    assert accepted
    assert mse < 1e-8 * np.mean((J @ delta) ** 2)


def test_rejected_step_contract():
    net = init_net(NetLayout(1, 3, 3, 1), 0)
    X, Y = sin_data(20)
    opts = TrainOptions(lambda_up=7.0)
    # a model whose candidate loss can never improve forces a rejection
    theta = net.theta.copy()
    out = forward_normalized(theta, net.layout, X).ravel()
    J = jacobian(net, X)
    r = Y - out
    mse = float(np.mean(r**2))
    new_theta, new_mse, accepted, lam = lm_update(theta, mse, J, r, 0.5, lambda t: out + 1.0, Y, opts)
    assert not accepted
    np.testing.assert_array_equal(new_theta, theta)
    assert new_mse == mse and lam == 0.5 * 7.0


def test_damping_floor_handles_zero_columns():
    J = np.array([[1.0, 0.0], [2.0, 0.0]])
    step = damped_solve(J, np.array([1.0, 1.0]), 1e-3)
    assert np.all(np.isfinite(step)) and step[1] == 0.0


def test_lambda_stays_bounded():
    opts = TrainOptions(lambda_max=1e4)
    lam, theta = opts.lambda0, np.array([-1.2, 1.0])
    y = np.array([1.0, 0.0])
    f, J = rosenbrock(theta)
    mse = float(np.mean((y - f) ** 2))
    for _ in range(200):
        theta, mse, accepted, lam = lm_update(theta, mse, J, y - f, lam, lambda t: rosenbrock(t)[0], y, opts)
        assert LAMBDA_MIN <= lam
        if accepted:
            f, J = rosenbrock(theta)
        elif lam > opts.lambda_max:
            break
    # a wrong Jacobian makes every step uphill, so damping grows until the cap
    _, _, _, stop = least_squares_lm(lambda t: (1.0 + np.abs(t), np.array([[1.0]])), [0.0], [0.0],
                                     TrainOptions(lambda_max=1e4))
    assert stop == "lambda_max"


def test_realizable_targets_zero_iterations():
    net = fit_normalizers(init_net(NetLayout(2, 4, 4, 1), 7), np.zeros((1, 2)), np.zeros(1))
    X = np.random.default_rng(1).uniform(-1, 1, (40, 2))
    Y = forward(net, X)
    rep = train(net, X, Y, TrainOptions())
    assert rep.best_val_mse < 1e-20
    assert rep.stop_reason == "grad_tol"
    assert rep.n_iters == 0


def test_training_is_deterministic():
    X, Y = sin_data(60)
    opts = TrainOptions(max_iters=40, n_restarts=3, seed=4)
    a = multi_restart_train(NetLayout.square(1, 4), X, Y, opts)
    b = multi_restart_train(NetLayout.square(1, 4), X, Y, opts)
    np.testing.assert_array_equal(a.best_net.theta, b.best_net.theta)
    np.testing.assert_array_equal(a.train_mse_history, b.train_mse_history)
    assert a.restart_index == b.restart_index and a.stop_reason == b.stop_reason


def test_sample_order_does_not_matter():
    X, Y = sin_data(40)
    perm = np.random.default_rng(0).permutation(40)
    opts = TrainOptions(max_iters=30, n_restarts=2)
    a = multi_restart_train(NetLayout.square(1, 3), X, Y, opts)
    b = multi_restart_train(NetLayout.square(1, 3), X[perm], Y[perm], opts)
    assert abs(a.best_val_mse - b.best_val_mse) < 1e-12


def test_validation_split_shape():
    X = np.arange(10.0)[:, None]
    Xtr, Ytr, Xva, Yva = split_validation(X, X[:, 0] ** 2, TrainOptions(val_fraction=0.25))
    assert Xtr.shape == (7, 1) and Xva.shape == (3, 1)
    assert sorted(np.concatenate([Xtr, Xva])[:, 0]) == list(range(10))
    with pytest.raises(ValueError):
        split_validation(X[:2], X[:2, 0], TrainOptions(val_fraction=0.5))


def test_sin_fit_beats_gradient_descent():
    X, Y = sin_data(200)
    opts = TrainOptions(max_iters=300, n_restarts=1)
    net = fit_normalizers(init_net(NetLayout.square(1, 8), 0), *split_validation(X, Y, opts)[:2])
    rep = train(net, X, Y, opts)
    assert rep.train_mse_history[-1] < 1e-5
    assert_strictly_decreasing_when_accepted(rep.train_mse_history)
    Xtr, Ytr, _, _ = split_validation(X, Y, opts)
    _, gd_mse = gradient_descent_baseline(net, Xtr, Ytr, n_iters=rep.n_iters)
    assert gd_mse >= rep.train_mse_history[-1]


def test_best_validation_snapshot():
    X, Y = sin_data(80)
    rep = train(fit_normalizers(init_net(NetLayout.square(1, 6), 2), X, Y), X, Y,
                TrainOptions(max_iters=150))
    assert rep.best_val_mse <= rep.val_mse_history.min() + 1e-15
    assert rep.val_mse_history[rep.best_iter] == rep.best_val_mse


def test_patience_stops_early():
    X, Y = sin_data(80)
    Y = Y + 0.3 * np.random.default_rng(0).standard_normal(80)  # noise makes validation stall
    rep = train(fit_normalizers(init_net(NetLayout.square(1, 10), 0), X, Y), X, Y,
                TrainOptions(max_iters=1000, patience=5))
    assert rep.stop_reason == "val_patience"
    assert rep.n_iters < 1000


def test_multi_restart_selection():
    X, Y = sin_data(100)
    opts = TrainOptions(max_iters=60, n_restarts=10, seed=3)
    rep = multi_restart_train(NetLayout.square(1, 5), X, Y, opts)
    assert len(rep.restart_val_mse) == 10
    assert rep.best_val_mse == min(rep.restart_val_mse)
    assert rep.best_val_mse <= np.median(rep.restart_val_mse)
    assert rep.restart_index == int(np.argmin(rep.restart_val_mse))


def test_single_restart_equals_train():
    X, Y = sin_data(50)
    opts = TrainOptions(max_iters=30, n_restarts=1, seed=9)
    Xtr, Ytr, Xva, Yva = split_validation(X, Y, opts)
    net = fit_normalizers(init_net(NetLayout.square(1, 4), 9), Xtr, Ytr)
    a = train(net, X, Y, opts)
    b = multi_restart_train(NetLayout.square(1, 4), X, Y, opts)
    np.testing.assert_array_equal(a.best_net.theta, b.best_net.theta)


def test_all_restarts_diverging_raises():
    X = np.linspace(0, 1, 10)[:, None]
    Y = np.full(10, np.nan)
    with pytest.raises(TrainingDiverged, match="non_finite"):
        multi_restart_train(NetLayout.square(1, 2), X, Y, TrainOptions(n_restarts=2))


def test_sweep_hidden_units():
    X = np.linspace(-1, 1, 40)[:, None]
    Y = 2 * X[:, 0] + 1
    opts = TrainOptions(max_iters=100, n_restarts=2)
    H, reps = sweep_hidden_units([3], 1, 1, X, Y, opts)
    assert H == 3 and list(reps) == [3]
    H, reps = sweep_hidden_units([1, 2, 4, 2], 1, 1, X, Y, opts)
    assert sorted(reps) == [1, 2, 4]
    assert reps[H].best_val_mse == min(r.best_val_mse for r in reps.values())
    with pytest.raises(ValueError):
        sweep_hidden_units([], 1, 1, X, Y, opts)


def test_linear_target_saturates_capacity():
    # a linear map needs no width: every H fits it to near round-off in normalized units,
    # though the ratio between tiny MSEs is not meaningful
    X = np.linspace(-1, 1, 40)[:, None]
    _, reps = sweep_hidden_units([1, 2, 4, 8], 1, 1, X, 2 * X[:, 0] + 1, TrainOptions(max_iters=1000, n_restarts=2))
    assert all(r.best_val_mse < 1e-6 for r in reps.values())


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4))
def test_accepted_losses_decrease_and_runs_repeat(seed, H):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (24, 2))
    Y = np.tanh(X @ rng.standard_normal(2)) + 0.1 * rng.standard_normal(24)
    opts = TrainOptions(max_iters=25, seed=seed % 1000)
    net = fit_normalizers(init_net(NetLayout.square(2, H), seed % 1000), X, Y)
    a, b = train(net, X, Y, opts), train(net, X, Y, opts)
    assert_strictly_decreasing_when_accepted(a.train_mse_history)
    np.testing.assert_array_equal(a.best_net.theta, b.best_net.theta)
    assert a.best_val_mse <= a.val_mse_history.min()
