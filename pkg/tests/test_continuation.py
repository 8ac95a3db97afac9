"""Continuation-path machinery: schedules, chain-rule gradients, trap dynamics."""

import numpy as np
import pytest

from pbopt.benchmarks import make_counterexample, make_nnloss
from pbopt.continuation import TemperatureSchedule, CPState, cp_gradient, cp_run, cp_step, threshold
from pbopt.params import sigmoid
from pbopt.pbcore import PBFunction


class IdentityLoss(PBFunction):
    d = 1

    def eval_discrete(self, z):
        return float(z[0])

    def eval_smooth(self, u):
        return float(u[0])

    def grad_smooth(self, u):
        return np.ones(1)


class ConstantLoss(PBFunction):
    d = 3

    def eval_discrete(self, z):
        return 1.0

    def eval_smooth(self, u):
        return 1.0

    def grad_smooth(self, u):
        return np.zeros(3)


def test_schedule_endpoints_and_monotonicity():
    sched = TemperatureSchedule()
    temps = sched.stage_temps(2000)
    assert temps.size == 20
    assert temps[0] == 1.0
    assert temps[-1] == pytest.approx(1 / 200)
    assert np.all(np.diff(temps) < 0)


def test_schedule_length_is_ceil():
    sched = TemperatureSchedule(steps_per_tau=100)
    assert sched.stage_temps(250).size == 3
    assert sched.stage_temps(300).size == 3
    assert sched.stage_temps(301).size == 4


def test_schedule_rejects_single_stage_anneal():
    with pytest.raises(ValueError):
        TemperatureSchedule().stage_temps(50)


def test_cp_step_identity_loss_example():
    state = CPState(x=np.zeros(1), tau=1.0)
    state = cp_step(IdentityLoss(), state, lr=1.0)
    assert state.x[0] == pytest.approx(-0.25)  # sigma'(0) = 1/4


def test_cp_gradient_matches_finite_differences():
    f = make_nnloss(6, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(20):
        x = rng.normal(scale=1.5, size=6)
        tau = rng.uniform(0.3, 1.5)
        g = cp_gradient(f, x, tau)
        for i in range(6):
            up, dn = x.copy(), x.copy()
            up[i] += h
            dn[i] -= h
            fd = (f.eval_smooth(sigmoid(up / tau)) - f.eval_smooth(sigmoid(dn / tau))) / (2 * h)
            assert g[i] == pytest.approx(fd, abs=1e-5)


def test_cp_gradient_vanishes_when_saturated():
    f = make_nnloss(4, np.random.default_rng(2))
    g = cp_gradient(f, np.full(4, 0.1), tau=1e-4)
    assert np.all(np.abs(g) < 1e-10)


def test_threshold_consistency_at_tiny_tau():
    x = np.array([1e-3, -1e-3, 0.5, -0.5])
    u = sigmoid(x / 1e-6)
    assert np.array_equal(np.round(u), threshold(x))
    assert u[0] == 1.0 and u[1] == 0.0


def test_constant_loss_keeps_x_at_init():
    rows, state = cp_run(ConstantLoss(), TemperatureSchedule(), lr=0.5,
                         x_init=np.zeros(3), total_iters=300)
    assert np.all(state.x == 0.0)


def test_warm_start_across_stages():
    f = IdentityLoss()
    sched = TemperatureSchedule(steps_per_tau=10)
    xs = []
    rows, state = cp_run(f, sched, lr=0.1, x_init=np.zeros(1), total_iters=30,
                         on_iteration=lambda s, row: xs.append(s.x.copy()))
    # x decreases through stage boundaries with no resets; once the sigmoid
    # saturates at tiny tau the updates vanish and the iterate freezes
    seq = np.array(xs).ravel()
    assert np.all(np.diff(seq) <= 0)
    assert np.all(np.diff(seq[:10]) < 0)


def test_ex31_learning_rate_split():
    f = make_counterexample("ex31")
    outcomes = {}
    for lr in (0.5, 0.01):
        rows, state = cp_run(f, TemperatureSchedule(), lr, np.zeros(1), total_iters=2000)
        outcomes[lr] = threshold(state.x)[0]
    assert outcomes[0.5] == 0.0  # steep sliver kicks the fast run back to the optimum
    assert outcomes[0.01] == 1.0  # slow run never escapes the deceptive slope


def test_ex32_fails_from_centered_init_any_rate():
    f = make_counterexample("ex32")
    for lr in (0.5, 0.1, 0.01):
        rows, state = cp_run(f, TemperatureSchedule(), lr, np.zeros(1), total_iters=2000)
        assert threshold(state.x)[0] == 1.0


def test_ex32_succeeds_below_the_basin_boundary():
    f = make_counterexample("ex32")
    x0 = np.array([np.log(0.4 / 0.6) - 0.3])  # below Logit(0.4)
    rows, state = cp_run(f, TemperatureSchedule(), 0.1, x0, total_iters=2000)
    assert threshold(state.x)[0] == 0.0


def test_cp_run_rows_record_discrete_loss_and_tau():
    f = make_counterexample("ex32")
    rows, state = cp_run(f, TemperatureSchedule(), 0.1, np.zeros(1), total_iters=200)
    assert len(rows) == 200
    assert rows[0]["tau"] == 1.0
    assert rows[-1]["tau"] == pytest.approx(1 / 200)
    assert all(r["discrete_loss"] in (f.eval_discrete([0]), f.eval_discrete([1])) for r in rows)
