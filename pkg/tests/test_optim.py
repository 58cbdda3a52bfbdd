"""Optimizer update rules and the warmup schedule."""

import math

import numpy as np
import pytest

from tagforge import numgrad as ng
from tagforge.numgrad import AdamW, OptimizerError, ScheduleError, SgdMomentum, WarmupSchedule


def make_param(value, name="theta"):
    p = ng.Tensor(np.asarray(value, dtype=float), name=name)
    return p


class TestAdamW:
    def test_zero_grad_no_decay_leaves_param(self):
        p = make_param([1.0, -2.0])
        p.grad = np.zeros(2)
        opt = AdamW([p], weight_decay=0.0)
        opt.step(lr=0.1)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_first_step_matches_closed_form(self):
        # theta=1, g=1, defaults, lr=3e-5: evaluate the update by hand.
        beta1, beta2, eps, wd, lr = 0.9, 0.999, 1e-8, 0.01, 3e-5
        m = (1 - beta1) * 1.0
        v = (1 - beta2) * 1.0
        mhat = m / (1 - beta1)
        vhat = v / (1 - beta2)
        expected = 1.0 - lr * (mhat / (math.sqrt(vhat) + eps) + wd * 1.0)

        p = make_param(1.0)
        p.grad = np.array(1.0)
        opt = AdamW([p])
        opt.step(lr=lr)
        assert p.data == pytest.approx(expected, rel=1e-12)

    def test_two_steps_single_state_evolution(self):
        def run(n):
            p = make_param([0.5, -0.5])
            opt = AdamW([p])
            for _ in range(n):
                p.grad = np.array([0.3, -0.2])
                opt.step(lr=1e-3)
            return p.data.copy()

        once = run(2)
        twice = run(2)
        np.testing.assert_array_equal(once, twice)

    def test_nonfinite_gradient_names_parameter(self):
        p = make_param([1.0], name="embed")
        p.grad = np.array([np.nan])
        opt = AdamW([p])
        with pytest.raises(OptimizerError, match="embed"):
            opt.step(lr=1e-3)

    def test_decay_is_decoupled(self):
        # with zero gradient the update is exactly -lr*wd*theta
        p = make_param([2.0])
        p.grad = np.zeros(1)
        opt = AdamW([p], weight_decay=0.1)
        opt.step(lr=0.5)
        np.testing.assert_allclose(p.data, [2.0 - 0.5 * 0.1 * 2.0])


class TestSgdMomentum:
    def test_zero_momentum_is_plain_sgd(self):
        p = make_param([1.0, 2.0])
        p.grad = np.array([0.5, -1.0])
        opt = SgdMomentum([p], momentum=0.0)
        opt.step(lr=0.1)
        np.testing.assert_allclose(p.data, [1.0 - 0.05, 2.0 + 0.1])

    def test_constant_gradient_velocity_geometric(self):
        mu, g, k = 0.9, 0.7, 6
        p = make_param([0.0])
        opt = SgdMomentum([p], momentum=mu)
        for _ in range(k):
            p.grad = np.array([g])
            opt.step(lr=0.0)  # lr=0 leaves theta fixed, velocity still evolves
        expected_v = g * sum(mu ** i for i in range(k))
        np.testing.assert_allclose(opt.velocity[0], [expected_v], rtol=1e-12)

    def test_zero_gradient_zero_velocity_no_move(self):
        p = make_param([3.0])
        p.grad = np.zeros(1)
        opt = SgdMomentum([p])
        opt.step(lr=0.1)
        np.testing.assert_array_equal(p.data, [3.0])


class TestWarmupSchedule:
    def test_paper_values_bit_exact(self):
        sched = WarmupSchedule(base_lr=3e-5, warmup_steps=2500, total_steps=10000)
        assert sched.lr(0) == 0.0
        assert sched.lr(1250) == 1.5e-5
        assert sched.lr(2500) == 3e-5

    def test_linear_decay_to_zero(self):
        sched = WarmupSchedule(base_lr=1.0, warmup_steps=10, total_steps=20)
        assert sched.lr(20) == 0.0
        assert sched.lr(15) == pytest.approx(0.5)

    def test_out_of_range_raises(self):
        sched = WarmupSchedule(base_lr=1.0, warmup_steps=5, total_steps=10)
        with pytest.raises(ScheduleError):
            sched.lr(11)
        with pytest.raises(ScheduleError):
            sched.lr(-1)

    def test_invalid_construction(self):
        with pytest.raises(ScheduleError):
            WarmupSchedule(base_lr=1.0, warmup_steps=0, total_steps=10)
        with pytest.raises(ScheduleError):
            WarmupSchedule(base_lr=1.0, warmup_steps=11, total_steps=10)
