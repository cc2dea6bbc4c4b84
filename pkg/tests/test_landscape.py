import numpy as np
import pytest

from conftest import f1_loss, square
from reluclosure.geometry import BoxDomain
from reluclosure.landscape import (BadExponent, BudgetExceeded, LossSpec, NonFiniteLoss, TrainConfig, Trajectory,
                                   abs_loss, best_constant, divergence_report, error_and_gradient, error_at,
                                   fd_gradient, loss_audit, lp_loss, make_target, oracle_min, oracle_path, train)
from reluclosure.quadrature import Measure


def test_lp_loss_examples():
    loss = f1_loss()
    assert loss(np.array([[0.5]]), np.array([1.0]))[0] == 0.25
    X = np.linspace(-1, 1, 9)[:, None]
    assert np.all(loss(X, np.abs(X[:, 0])) == 0.0)
    L4 = lp_loss(make_target({"kind": "constant", "value": 0.0}, 1), 4)
    assert L4(np.array([[0.0]]), np.array([2.0]))[0] == 16.0
    with pytest.raises(BadExponent):
        lp_loss(lambda X: X[:, 0], 1.0)


def test_targets_registry():
    X = np.array([[0.5, -0.25]])
    assert make_target({"kind": "abs"}, 2)(X)[0] == 0.75
    assert make_target({"kind": "ramp", "a": 0.25}, 2)(X)[0] == 0.25
    assert make_target({"kind": "quadratic"}, 2)(X)[0] == pytest.approx(0.3125)
    pl = make_target({"kind": "piecewise-linear", "knots": [[-1, 0], [0, 1], [1, 0]]}, 1)
    assert pl(np.array([[0.5]]))[0] == 0.5 and len(pl.cuts) == 3
    with pytest.raises(ValueError):
        make_target({"kind": "sinc"}, 1)


def test_loss_audit_examples(m1):
    f = make_target({"kind": "abs"}, 1)
    assert loss_audit(lp_loss(f, 2), m1).ok
    assert "strict_convexity" in loss_audit(abs_loss(f), m1).kinds()
    expo = LossSpec(lambda X, y: np.exp(np.clip(y, -700, 700)), name="exp")
    assert "coercivity" in loss_audit(expo, m1).kinds()


def test_theta_gradient_matches_fd(rng):
    for d_in, d in ((1, 2), (2, 2), (2, 3)):
        m = square(d_in)
        loss = lp_loss(make_target({"kind": "abs"}, d_in), 2)
        theta = rng.standard_normal((d_in + 2) * d + 1)
        err, g = error_and_gradient(theta, d, loss, m)
        assert err == pytest.approx(error_at(theta, d, loss, m), rel=1e-12)
        fd = fd_gradient(lambda t: error_at(t, d, loss, m), theta, 1e-6)
        assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


def test_best_constant_is_one_twelfth(m1):
    c, e = best_constant(f1_loss(), m1)
    assert c == pytest.approx(0.5, abs=1e-12) and e == pytest.approx(1 / 12, abs=1e-12)
    c4, e4 = best_constant(lp_loss(make_target({"kind": "abs"}, 1), 4), m1)
    assert 0.4 < c4 < 0.6 and e4 > 0


def test_train_d0_reaches_closed_form(m1):
    _, traj = train(TrainConfig(d=0, step_size=0.5, steps=200), f1_loss(), m1)
    assert abs(traj.err.min() - 1 / 12) < 1e-4


def test_zero_init_constant_target(m1):
    loss = lp_loss(make_target({"kind": "constant", "value": 0.7}, 1), 2)
    best, traj = train(TrainConfig(d=1, step_size=0.25, steps=300, init="zero"), loss, m1)
    assert traj.err.min() <= 1e-8 and best.bias == pytest.approx(0.7, abs=1e-4)


def test_train_is_deterministic(m1):
    cfg = TrainConfig(d=2, steps=50, seed=3)
    _, a = train(cfg, f1_loss(), m1)
    _, b = train(cfg, f1_loss(), m1)
    assert np.array_equal(a.err, b.err) and np.array_equal(a.param_norm, b.param_norm)


def test_finite_difference_mode_agrees(m1):
    _, a = train(TrainConfig(d=1, steps=20, seed=1), f1_loss(), m1)
    _, b = train(TrainConfig(d=1, steps=20, seed=1, gradient="finite-difference"), f1_loss(), m1)
    assert np.allclose(a.err, b.err, rtol=1e-6)


def test_non_finite_loss_keeps_trajectory(m1):
    _, ok = train(TrainConfig(d=1, steps=5), f1_loss(), m1)
    with pytest.raises(NonFiniteLoss) as info:
        train(TrainConfig(d=1, step_size=1e200, steps=50), f1_loss(), m1)
    assert info.value.trajectory is not None and len(info.value.trajectory) >= 1


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(d=1, step_size=0.0)
    with pytest.raises(ValueError):
        TrainConfig(d=1, steps=0)
    with pytest.raises(ValueError):
        TrainConfig(d=1, gradient="adam")


def test_oracle_examples(m1):
    assert oracle_min(0, f1_loss(), m1)[0] == pytest.approx(1 / 12, abs=1e-5)
    sq = lp_loss(make_target({"kind": "quadratic"}, 1), 2)
    e0, _ = oracle_min(0, sq, m1, budget=2000)
    e1, _ = oracle_min(1, sq, m1, budget=2000)
    assert e0 == pytest.approx(4 / 45, abs=1e-6) and e1 <= e0 + 1e-6


def test_oracle_path_is_prefix_consistent(m1):
    a = oracle_path(1, f1_loss(), m1, budget=1500)
    b = oracle_path(2, f1_loss(), m1, budget=1500)
    assert a[0][0] == b[0][0] and a[1][0] == b[1][0]


def test_oracle_guards(m1):
    with pytest.raises(ValueError):
        oracle_min(3, f1_loss(), m1)
    with pytest.raises(ValueError):
        oracle_min(1, lp_loss(make_target({"kind": "abs"}, 3), 2), Measure.uniform(BoxDomain.cube(3)))
    with pytest.raises(BudgetExceeded):
        oracle_min(2, f1_loss(), m1, budget=3)


def _traj(err, norm, grad):
    n = len(err)
    return Trajectory(np.arange(n), np.asarray(err, float), np.asarray(norm, float), np.asarray(grad, float))


def test_divergence_report_cases():
    n = 200
    frozen = _traj(np.full(n, 0.1), np.geomspace(1, 1e4, n), np.full(n, 1e-3))
    assert divergence_report(frozen) == "plateau_with_norm_blowup"
    calm = _traj(np.linspace(1, 0, n), np.ones(n), np.r_[np.ones(n - 1), 1e-9])
    assert divergence_report(calm) == "converged"
    assert divergence_report(_traj(np.linspace(1, 0, n), np.ones(n), np.ones(n))) == "undecided"
    with pytest.raises(ValueError):
        divergence_report(_traj(np.ones(50), np.ones(50), np.ones(50)))
